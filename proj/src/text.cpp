#include "lmncc/text.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace lmncc {

namespace {

// ---------------------------------------------------------------------------
// Lexer

enum class Tok {
  End, LIdent, UIdent, Int,
  LBrace, RBrace, LParen, RParen, LBracket, RBracket,
  Comma, Dot, Bar, Slash, Dollar, At, AtAt,
  Plus, Minus, Star, Assign, ColonDash,
  CmpEq, CmpNe, CmpGt, CmpLt, CmpGe, CmpLe,
};

struct Token {
  Tok kind;
  std::string text;
  int64_t value = 0;
  int line = 1, col = 1;
};

class Lexer {
 public:
  explicit Lexer(const std::string &src) : src_(src) { advance(); }

  const Token &peek() const { return cur_; }
  Token next() {
    Token t = cur_;
    advance();
    return t;
  }
  bool at(Tok k) const { return cur_.kind == k; }
  bool accept(Tok k) {
    if (!at(k)) return false;
    advance();
    return true;
  }
  Token expect(Tok k, const char *what) {
    if (!at(k)) fail(std::string("expected ") + what);
    return next();
  }
  [[noreturn]] void fail(const std::string &msg) const {
    throw SyntaxError(msg + " (got '" + cur_.text + "')", cur_.line, cur_.col);
  }

  struct State {
    size_t pos;
    int line, col;
    Token cur;
  };
  State save() const { return {pos_, line_, col_, cur_}; }
  void restore(const State &s) {
    pos_ = s.pos;
    line_ = s.line;
    col_ = s.col;
    cur_ = s.cur;
  }

 private:
  void advance() {
    skip_ws();
    cur_.line = line_;
    cur_.col = col_;
    if (pos_ >= src_.size()) {
      cur_ = {Tok::End, "<eof>", 0, line_, col_};
      return;
    }
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t s = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      cur_.kind = Tok::Int;
      cur_.text = src_.substr(s, pos_ - s);
      cur_.value = std::stoll(cur_.text);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t s = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        bump();
      cur_.text = src_.substr(s, pos_ - s);
      cur_.kind = std::isupper(static_cast<unsigned char>(c)) ? Tok::UIdent : Tok::LIdent;
      return;
    }
    auto two = [&](const char *s) {
      return pos_ + 1 < src_.size() && src_[pos_] == s[0] && src_[pos_ + 1] == s[1];
    };
    auto three = [&](const char *s) {
      return pos_ + 2 < src_.size() && src_[pos_] == s[0] && src_[pos_ + 1] == s[1] &&
             src_[pos_ + 2] == s[2];
    };
    if (three("=:=")) return emit(Tok::CmpEq, 3);
    if (three("=\\=")) return emit(Tok::CmpNe, 3);
    if (two(">=")) return emit(Tok::CmpGe, 2);
    if (two("=<")) return emit(Tok::CmpLe, 2);
    if (two(":-")) return emit(Tok::ColonDash, 2);
    if (two("@@")) return emit(Tok::AtAt, 2);
    switch (c) {
      case '{': return emit(Tok::LBrace, 1);
      case '}': return emit(Tok::RBrace, 1);
      case '(': return emit(Tok::LParen, 1);
      case ')': return emit(Tok::RParen, 1);
      case '[': return emit(Tok::LBracket, 1);
      case ']': return emit(Tok::RBracket, 1);
      case ',': return emit(Tok::Comma, 1);
      case '.': return emit(Tok::Dot, 1);
      case '|': return emit(Tok::Bar, 1);
      case '/': return emit(Tok::Slash, 1);
      case '$': return emit(Tok::Dollar, 1);
      case '@': return emit(Tok::At, 1);
      case '+': return emit(Tok::Plus, 1);
      case '-': return emit(Tok::Minus, 1);
      case '*': return emit(Tok::Star, 1);
      case '=': return emit(Tok::Assign, 1);
      case '>': return emit(Tok::CmpGt, 1);
      case '<': return emit(Tok::CmpLt, 1);
      default:
        throw SyntaxError(std::string("unexpected character '") + c + "'", line_, col_);
    }
  }

  void emit(Tok k, int n) {
    cur_.kind = k;
    cur_.text = src_.substr(pos_, n);
    for (int i = 0; i < n; ++i) bump();
  }

  void skip_ws() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        bump();
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') bump();
      } else if (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '*') {
        bump();
        bump();
        while (pos_ + 1 < src_.size() && !(src_[pos_] == '*' && src_[pos_ + 1] == '/')) bump();
        if (pos_ + 1 >= src_.size()) throw SyntaxError("unterminated comment", line_, col_);
        bump();
        bump();
      } else {
        break;
      }
    }
  }

  void bump() {
    if (src_[pos_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++pos_;
  }

  const std::string &src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
  Token cur_;
};

// ---------------------------------------------------------------------------
// Parser

struct PCell;
struct PProc {
  std::vector<AtomTemplate> atoms;
  std::vector<PCell> cells;
  std::vector<std::string> proc_ctxs;
  std::vector<std::string> rule_ctxs;
  std::vector<RulePtr> rules;  // literal rules; valid in world position only
};
struct PCell {
  std::shared_ptr<PProc> body;
  bool stable = false;
  std::vector<std::string> plus, minus;
};

class Parser {
 public:
  explicit Parser(const std::string &src) : lx_(src) {}

  PProc parse_program() {
    PProc p = parse_process(false);
    if (!lx_.at(Tok::End)) lx_.fail("trailing input");
    return p;
  }

  RulePtr parse_single_rule() {
    PProc p = parse_process(false);
    if (p.rules.size() != 1 || !p.atoms.empty() || !p.cells.empty())
      throw SyntaxError("expected exactly one rule", 1, 1);
    return p.rules[0];
  }

 private:
  Lexer lx_;
  int fresh_ = 0;

  std::string fresh_var() { return "~" + std::to_string(fresh_++); }

  // Parses entities and rules up to '}' or end of input.
  PProc parse_process(bool in_cell) {
    (void)in_cell;
    PProc out;
    std::vector<size_t> group_atoms;  // atoms of the current comma group
    std::vector<size_t> group_cells;
    PProc group;
    auto flush = [&](PProc &&g) {
      for (auto &a : g.atoms) out.atoms.push_back(std::move(a));
      for (auto &c : g.cells) out.cells.push_back(std::move(c));
      for (auto &p : g.proc_ctxs) out.proc_ctxs.push_back(std::move(p));
      for (auto &r : g.rule_ctxs) out.rule_ctxs.push_back(std::move(r));
    };
    std::optional<std::string> pending_name;
    bool group_empty = true;
    while (true) {
      if (lx_.at(Tok::End) || lx_.at(Tok::RBrace)) {
        if (pending_name) lx_.fail("expected ':-' after named rule head");
        flush(std::move(group));
        return out;
      }
      // optional rule name at the start of a group
      if (group_empty && lx_.at(Tok::LIdent)) {
        auto st = lx_.save();
        Token id = lx_.next();
        if (lx_.accept(Tok::AtAt)) {
          pending_name = id.text;
        } else {
          lx_.restore(st);
        }
      }
      parse_element(group);
      group_empty = false;
      if (lx_.accept(Tok::ColonDash)) {
        out.rules.push_back(finish_rule(std::move(pending_name), std::move(group)));
        pending_name.reset();
        group = PProc{};
        group_empty = true;
        lx_.accept(Tok::Comma);
        continue;
      }
      if (lx_.accept(Tok::Comma)) continue;
      if (pending_name) lx_.fail("expected ':-' after named rule head");
      if (lx_.accept(Tok::Dot)) {
        flush(std::move(group));
        group = PProc{};
        group_empty = true;
        continue;
      }
      if (lx_.at(Tok::End) || lx_.at(Tok::RBrace)) {
        flush(std::move(group));
        return out;
      }
      lx_.fail("expected ',' or '.'");
    }
  }

  RulePtr finish_rule(std::optional<std::string> name, PProc lhs) {
    Guard guard;
    auto st = lx_.save();
    if (try_parse_guard(guard)) {
      if (!lx_.accept(Tok::Bar)) {
        lx_.restore(st);
        guard.conjuncts.clear();
      }
    } else {
      lx_.restore(st);
    }
    PProc rhs = parse_rule_side();
    lx_.expect(Tok::Dot, "'.' after rule");
    auto r = std::make_shared<RewriteRule>();
    r->name = std::move(name);
    r->lhs = to_template(lhs, true);
    r->rhs = to_template(rhs, false);
    r->guard = std::move(guard);
    rename_internal_vars(*r);
    return r;
  }

  // Desugaring introduces '~N' link variables; give them printable names so
  // rule text round-trips.
  static void rename_internal_vars(RewriteRule &r) {
    std::set<std::string> taken;
    std::function<void(const ProcessTemplate &)> collect = [&](const ProcessTemplate &t) {
      for (const auto &a : t.atoms)
        for (const auto &v : a.args) taken.insert(v);
      for (const auto &c : t.cells) collect(*c.body);
    };
    collect(r.lhs);
    collect(r.rhs);
    std::map<std::string, std::string> ren;
    int n = 0;
    auto renamed = [&](const std::string &v) {
      if (v.empty() || v[0] != '~') return v;
      auto it = ren.find(v);
      if (it != ren.end()) return it->second;
      std::string fresh;
      do {
        fresh = "W" + std::to_string(n++) + "_";
      } while (taken.count(fresh));
      taken.insert(fresh);
      ren[v] = fresh;
      return fresh;
    };
    std::function<void(ProcessTemplate &)> apply = [&](ProcessTemplate &t) {
      for (auto &a : t.atoms)
        for (auto &v : a.args) v = renamed(v);
      for (auto &c : t.cells) {
        for (auto &v : c.plus_links) v = renamed(v);
        for (auto &v : c.minus_links) v = renamed(v);
        apply(const_cast<ProcessTemplate &>(*c.body));
      }
    };
    apply(r.lhs);
    apply(r.rhs);
  }

  // One comma-separated list of elements (no nested rules). May be empty:
  // a rule with an empty rhs deletes its match.
  PProc parse_rule_side() {
    PProc p;
    if (lx_.at(Tok::Dot)) return p;
    while (true) {
      parse_element(p);
      if (!lx_.accept(Tok::Comma)) break;
    }
    return p;
  }

  bool try_parse_guard(Guard &g) {
    try {
      while (true) {
        GuardCmp c;
        c.lhs = parse_int_expr();
        switch (lx_.peek().kind) {
          case Tok::CmpEq: c.op = CmpOp::Eq; break;
          case Tok::CmpNe: c.op = CmpOp::Ne; break;
          case Tok::CmpGt: c.op = CmpOp::Gt; break;
          case Tok::CmpLt: c.op = CmpOp::Lt; break;
          case Tok::CmpGe: c.op = CmpOp::Ge; break;
          case Tok::CmpLe: c.op = CmpOp::Le; break;
          default: return false;
        }
        lx_.next();
        c.rhs = parse_int_expr();
        g.conjuncts.push_back(std::move(c));
        if (!lx_.accept(Tok::Comma)) return true;
      }
    } catch (const SyntaxError &) {
      return false;
    }
  }

  IntExpr parse_int_expr() {
    IntExpr e = parse_int_term();
    while (lx_.at(Tok::Plus) || lx_.at(Tok::Minus)) {
      bool add = lx_.next().kind == Tok::Plus;
      IntExpr r = parse_int_term();
      e = IntExpr::binary(add ? IntExpr::Kind::Add : IntExpr::Kind::Sub, std::move(e),
                          std::move(r));
    }
    return e;
  }

  IntExpr parse_int_term() {
    IntExpr e = parse_int_primary();
    while (lx_.at(Tok::Star)) {
      lx_.next();
      IntExpr r = parse_int_primary();
      e = IntExpr::binary(IntExpr::Kind::Mul, std::move(e), std::move(r));
    }
    return e;
  }

  IntExpr parse_int_primary() {
    if (lx_.at(Tok::Int)) return IntExpr::constant(lx_.next().value);
    if (lx_.at(Tok::Minus)) {
      lx_.next();
      Token t = lx_.expect(Tok::Int, "integer");
      return IntExpr::constant(-t.value);
    }
    if (lx_.at(Tok::UIdent)) return IntExpr::variable(lx_.next().text);
    if (lx_.accept(Tok::LParen)) {
      IntExpr e = parse_int_expr();
      lx_.expect(Tok::RParen, "')'");
      return e;
    }
    lx_.fail("expected integer expression");
  }

  void parse_element(PProc &p) {
    if (lx_.at(Tok::LBrace)) {
      p.cells.push_back(parse_cell());
      return;
    }
    if (lx_.accept(Tok::Dollar)) {
      Token id = lx_.expect(Tok::LIdent, "context name");
      p.proc_ctxs.push_back(id.text);
      return;
    }
    if (lx_.accept(Tok::At)) {
      Token id = lx_.expect(Tok::LIdent, "rule context name");
      p.rule_ctxs.push_back(id.text);
      return;
    }
    if (lx_.at(Tok::UIdent)) {
      // Link-rooted entity: L = rhs, or a bare free-link mention inside a
      // cell (treated as a +L declaration).
      Token l = lx_.next();
      if (!lx_.accept(Tok::Assign)) {
        lx_.fail("expected '=' after link");
      }
      parse_rooted(p, l.text);
      return;
    }
    if (lx_.at(Tok::Plus) || lx_.at(Tok::Minus)) {
      bool plus = lx_.next().kind == Tok::Plus;
      Token id = lx_.expect(Tok::UIdent, "link after +/-");
      // Free-link declarations attach to the enclosing cell; stash them as
      // pseudo contexts resolved by parse_cell.
      (plus ? pending_plus_ : pending_minus_).push_back(id.text);
      return;
    }
    if (lx_.at(Tok::LIdent)) {
      Token id = lx_.next();
      AtomTemplate a;
      a.name = id.text;
      a.kind = AtomKind::Plain;
      if (lx_.accept(Tok::LParen)) {
        if (!lx_.at(Tok::RParen)) {
          while (true) {
            a.args.push_back(parse_arg(p));
            if (!lx_.accept(Tok::Comma)) break;
          }
        }
        lx_.expect(Tok::RParen, "')'");
      }
      if (lx_.accept(Tok::Assign)) {
        // name = term: the atom's root link connects to term's root
        std::string root = fresh_var();
        a.args.push_back(root);
        p.atoms.push_back(std::move(a));
        parse_rooted(p, root);
        return;
      }
      p.atoms.push_back(std::move(a));
      return;
    }
    lx_.fail("expected entity");
  }

  PCell parse_cell() {
    lx_.expect(Tok::LBrace, "'{'");
    size_t save_p = pending_plus_.size(), save_m = pending_minus_.size();
    PCell c;
    c.body = std::make_shared<PProc>(parse_process(true));
    lx_.expect(Tok::RBrace, "'}'");
    if (lx_.accept(Tok::Slash)) c.stable = true;
    c.plus.assign(pending_plus_.begin() + save_p, pending_plus_.end());
    c.minus.assign(pending_minus_.begin() + save_m, pending_minus_.end());
    pending_plus_.resize(save_p);
    pending_minus_.resize(save_m);
    return c;
  }

  // L = <int | link | term | list | a op b>
  void parse_rooted(PProc &p, const std::string &root) {
    // Try arithmetic: primary op primary.
    auto st = lx_.save();
    if (lx_.at(Tok::Int) || lx_.at(Tok::UIdent)) {
      Token first = lx_.next();
      Tok k = lx_.peek().kind;
      if (k == Tok::Plus || k == Tok::Minus || k == Tok::Star) {
        std::string op = lx_.next().text;
        std::string a1 = operand_to_var(p, first);
        Token second = lx_.next();
        if (second.kind != Tok::Int && second.kind != Tok::UIdent)
          lx_.fail("expected operand");
        std::string a2 = operand_to_var(p, second);
        AtomTemplate a;
        a.name = op;
        a.kind = AtomKind::Plain;
        a.args = {a1, a2, root};
        p.atoms.push_back(std::move(a));
        return;
      }
      lx_.restore(st);
    }
    if (lx_.at(Tok::Int)) {
      Token t = lx_.next();
      AtomTemplate a;
      a.name = std::to_string(t.value);
      a.kind = AtomKind::IntLit;
      a.value_expr = IntExpr::constant(t.value);
      a.args = {root};
      p.atoms.push_back(std::move(a));
      return;
    }
    if (lx_.at(Tok::UIdent)) {
      Token t = lx_.next();
      AtomTemplate a;
      a.name = "=";
      a.kind = AtomKind::Connector;
      a.args = {root, t.text};
      p.atoms.push_back(std::move(a));
      return;
    }
    if (lx_.at(Tok::LBracket)) {
      parse_list(p, root);
      return;
    }
    if (lx_.at(Tok::LIdent)) {
      Token id = lx_.next();
      AtomTemplate a;
      a.name = id.text;
      a.kind = AtomKind::Plain;
      if (lx_.accept(Tok::LParen)) {
        if (!lx_.at(Tok::RParen)) {
          while (true) {
            a.args.push_back(parse_arg(p));
            if (!lx_.accept(Tok::Comma)) break;
          }
        }
        lx_.expect(Tok::RParen, "')'");
      }
      a.args.push_back(root);
      p.atoms.push_back(std::move(a));
      return;
    }
    lx_.fail("expected value after '='");
  }

  std::string operand_to_var(PProc &p, const Token &t) {
    if (t.kind == Tok::UIdent) return t.text;
    std::string v = fresh_var();
    AtomTemplate a;
    a.name = std::to_string(t.value);
    a.kind = AtomKind::IntLit;
    a.value_expr = IntExpr::constant(t.value);
    a.args = {v};
    p.atoms.push_back(std::move(a));
    return v;
  }

  // An argument position: link, integer expression, nested term, or list.
  std::string parse_arg(PProc &p) {
    if (lx_.at(Tok::UIdent)) {
      auto st = lx_.save();
      Token t = lx_.next();
      // Uide followed by an operator: integer expression over guard vars.
      if (lx_.at(Tok::Plus) || lx_.at(Tok::Minus) || lx_.at(Tok::Star)) {
        lx_.restore(st);
        IntExpr e = parse_int_expr();
        std::string v = fresh_var();
        AtomTemplate a;
        a.name = "<expr>";
        a.kind = AtomKind::IntLit;
        a.value_expr = std::move(e);
        a.args = {v};
        p.atoms.push_back(std::move(a));
        return v;
      }
      return t.text;
    }
    if (lx_.at(Tok::Int) || lx_.at(Tok::Minus)) {
      IntExpr e = parse_int_expr();
      std::string v = fresh_var();
      AtomTemplate a;
      a.kind = AtomKind::IntLit;
      a.name = e.is_const() ? std::to_string(e.value) : "<expr>";
      a.value_expr = std::move(e);
      a.args = {v};
      p.atoms.push_back(std::move(a));
      return v;
    }
    if (lx_.at(Tok::LBracket)) {
      std::string v = fresh_var();
      parse_list(p, v);
      return v;
    }
    if (lx_.at(Tok::LIdent)) {
      Token id = lx_.next();
      AtomTemplate a;
      a.name = id.text;
      a.kind = AtomKind::Plain;
      if (lx_.accept(Tok::LParen)) {
        if (!lx_.at(Tok::RParen)) {
          while (true) {
            a.args.push_back(parse_arg(p));
            if (!lx_.accept(Tok::Comma)) break;
          }
        }
        lx_.expect(Tok::RParen, "')'");
      }
      std::string v = fresh_var();
      a.args.push_back(v);
      p.atoms.push_back(std::move(a));
      return v;
    }
    lx_.fail("expected argument");
  }

  // [a, b | T] rooted at `root`, desugared to cons/nil atoms.
  void parse_list(PProc &p, const std::string &root) {
    lx_.expect(Tok::LBracket, "'['");
    std::vector<std::string> heads;
    std::optional<std::string> tail;
    if (!lx_.at(Tok::RBracket)) {
      while (true) {
        heads.push_back(parse_arg(p));
        if (lx_.accept(Tok::Comma)) continue;
        if (lx_.accept(Tok::Bar)) {
          tail = parse_arg(p);
          break;
        }
        break;
      }
    }
    lx_.expect(Tok::RBracket, "']'");
    std::string cur = root;
    for (size_t i = 0; i < heads.size(); ++i) {
      std::string next = (i + 1 == heads.size() && tail) ? *tail : fresh_var();
      AtomTemplate a;
      a.name = "cons";
      a.kind = AtomKind::Plain;
      a.args = {heads[i], next, cur};
      p.atoms.push_back(std::move(a));
      cur = next;
    }
    if (!tail) {
      AtomTemplate nil;
      nil.name = "nil";
      nil.kind = AtomKind::Plain;
      nil.args = {cur};
      p.atoms.push_back(std::move(nil));
    }
  }

  ProcessTemplate to_template(const PProc &p, bool lhs) {
    if (!p.rules.empty()) lx_.fail("rule literal inside a rule template");
    ProcessTemplate t;
    t.atoms = p.atoms;
    t.proc_contexts = p.proc_ctxs;
    t.rule_contexts = p.rule_ctxs;
    if (lhs && (t.proc_contexts.size() > 1 || t.rule_contexts.size() > 1))
      lx_.fail("at most one context per cell on a rule lhs");
    for (const PCell &c : p.cells) {
      CellTemplate ct;
      ct.body = std::make_shared<ProcessTemplate>(to_template(*c.body, lhs));
      ct.stable_flag = c.stable;
      if (ct.stable_flag && !lhs) lx_.fail("stable flag on rule rhs");
      ct.plus_links = c.plus;
      ct.minus_links = c.minus;
      t.cells.push_back(std::move(ct));
    }
    return t;
  }

  std::vector<std::string> pending_plus_, pending_minus_;

 public:
  // World materialization.
  void build(World &w, MembraneId dest, const PProc &p, std::map<std::string, LinkId> &links) {
    auto lk = [&](const std::string &v) -> LinkId {
      auto it = links.find(v);
      if (it != links.end()) return it->second;
      LinkId l = (v[0] == '~') ? w.new_link() : w.named_link(v);
      links[v] = l;
      return l;
    };
    if (!p.proc_ctxs.empty() || !p.rule_ctxs.empty())
      throw SyntaxError("context outside of a rule", 1, 1);
    for (const auto &a : p.atoms) {
      std::vector<LinkId> args;
      for (const auto &v : a.args) args.push_back(lk(v));
      if (a.kind == AtomKind::IntLit) {
        if (!a.value_expr.is_const())
          throw SyntaxError("integer expression outside of a rule", 1, 1);
        w.add_atom(dest, std::to_string(a.value_expr.value), args, AtomKind::IntLit,
                   a.value_expr.value);
      } else {
        w.add_atom(dest, a.name, args, a.kind);
      }
    }
    for (const auto &r : p.rules) w.add_rule(dest, r);
    for (const auto &c : p.cells) {
      if (c.stable || !c.plus.empty() || !c.minus.empty())
        throw SyntaxError("rule-only cell decoration outside of a rule", 1, 1);
      MembraneId m = w.new_membrane(dest);
      build(w, m, *c.body, links);
    }
  }
};

}  // namespace

void parse_into(World &w, MembraneId dest, const std::string &text) {
  Parser p(text);
  PProc prog = p.parse_program();
  std::map<std::string, LinkId> links;
  p.build(w, dest, prog, links);
  w.fuse_connectors(dest);
}

World parse_world(const std::string &text, World::LinkMode mode) {
  World w(mode);
  parse_into(w, w.root(), text);
  return w;
}

RulePtr parse_rule(const std::string &text) {
  Parser p(text);
  return p.parse_single_rule();
}

// ---------------------------------------------------------------------------
// Rule printing

namespace {

std::string intexpr_to_text(const IntExpr &e) {
  switch (e.kind) {
    case IntExpr::Kind::Const: return std::to_string(e.value);
    case IntExpr::Kind::Var: return e.var;
    case IntExpr::Kind::Add: return intexpr_to_text(e.kids[0]) + "+" + intexpr_to_text(e.kids[1]);
    case IntExpr::Kind::Sub: return intexpr_to_text(e.kids[0]) + "-" + intexpr_to_text(e.kids[1]);
    case IntExpr::Kind::Mul: return intexpr_to_text(e.kids[0]) + "*" + intexpr_to_text(e.kids[1]);
  }
  return "?";
}

const char *cmp_to_text(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "=:=";
    case CmpOp::Ne: return "=\\=";
    case CmpOp::Gt: return ">";
    case CmpOp::Lt: return "<";
    case CmpOp::Ge: return ">=";
    case CmpOp::Le: return "=<";
  }
  return "?";
}

bool is_arith_name(const std::string &n) { return n == "+" || n == "-" || n == "*"; }

// Prints a process template, inlining single-use integer and nullary symbol
// atoms into their consumer's argument positions.
std::string proc_to_text(const ProcessTemplate &t) {
  std::map<std::string, int> uses;
  for (const AtomTemplate &a : t.atoms)
    for (const auto &v : a.args) uses[v]++;
  std::set<size_t> skipped;
  std::map<std::string, std::string> inline_text;
  for (size_t i = 0; i < t.atoms.size(); ++i) {
    const AtomTemplate &a = t.atoms[i];
    bool provider = a.args.size() == 1 && !is_arith_name(a.name) &&
                    (a.kind == AtomKind::IntLit || a.kind == AtomKind::Plain);
    if (!provider || uses[a.args[0]] != 2) continue;
    if (inline_text.count(a.args[0])) continue;
    // find the consumer position; an integer atom is never a consumer
    bool consumed = false;
    for (size_t j = 0; j < t.atoms.size() && !consumed; ++j) {
      if (j == i || t.atoms[j].kind != AtomKind::Plain) continue;
      for (const auto &v : t.atoms[j].args)
        if (v == a.args[0]) consumed = true;
    }
    if (!consumed) continue;
    skipped.insert(i);
    inline_text[a.args[0]] =
        a.kind == AtomKind::IntLit ? intexpr_to_text(a.value_expr) : a.name;
  }
  auto render_var = [&](const std::string &v) {
    auto it = inline_text.find(v);
    return it == inline_text.end() ? v : it->second;
  };
  std::vector<std::string> parts;
  for (size_t i = 0; i < t.atoms.size(); ++i) {
    if (skipped.count(i)) continue;
    const AtomTemplate &a = t.atoms[i];
    if (a.kind == AtomKind::IntLit) {
      parts.push_back(a.args[0] + " = " + intexpr_to_text(a.value_expr));
      continue;
    }
    if (a.kind == AtomKind::Connector) {
      parts.push_back(a.args[0] + " = " + a.args[1]);
      continue;
    }
    if (is_arith_name(a.name) && a.args.size() == 3) {
      std::string l = render_var(a.args[0]);
      std::string r = render_var(a.args[1]);
      parts.push_back(a.args[2] + " = " + l + a.name + r);
      continue;
    }
    if (a.args.empty()) {
      parts.push_back(a.name);
      continue;
    }
    std::string s = a.name + "(";
    for (size_t j = 0; j < a.args.size(); ++j) {
      if (j) s += ",";
      s += render_var(a.args[j]);
    }
    s += ")";
    parts.push_back(std::move(s));
  }
  for (const CellTemplate &c : t.cells) {
    std::string s = "{";
    std::string inner = proc_to_text(*c.body);
    for (const auto &l : c.plus_links) inner = inner.empty() ? "+" + l : inner + ", +" + l;
    for (const auto &l : c.minus_links) inner = inner.empty() ? "-" + l : inner + ", -" + l;
    s += inner + "}";
    if (c.stable_flag) s += "/";
    parts.push_back(std::move(s));
  }
  for (auto it = t.rule_contexts.rbegin(); it != t.rule_contexts.rend(); ++it)
    parts.insert(parts.begin(), "@" + *it);
  for (const auto &p : t.proc_contexts) parts.push_back("$" + p);
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ", ";
    out += parts[i];
  }
  return out;
}

}  // namespace

std::string rule_to_text(const RewriteRule &r) {
  if (r.builtin != RewriteRule::Builtin::None)
    return (r.name ? *r.name : "<builtin>") + "@@ <builtin>.";
  std::string s;
  if (r.name) s += *r.name + "@@ ";
  s += proc_to_text(r.lhs);
  s += " :- ";
  if (!r.guard.empty()) {
    for (size_t i = 0; i < r.guard.conjuncts.size(); ++i) {
      if (i) s += ", ";
      const GuardCmp &c = r.guard.conjuncts[i];
      s += intexpr_to_text(c.lhs) + " " + cmp_to_text(c.op) + " " + intexpr_to_text(c.rhs);
    }
    s += " | ";
  }
  s += proc_to_text(r.rhs);
  s += ".";
  return s;
}

// ---------------------------------------------------------------------------
// Canonical serialization

namespace {

struct Namer {
  const World &w;
  std::map<LinkId, std::string> names{};
  int next = 1;
  std::string operator()(LinkId l) {
    const Link &lk = w.link(l);
    if (!lk.name.empty()) return lk.name;
    auto it = names.find(l);
    if (it != names.end()) return it->second;
    std::string n = "L" + std::to_string(next++);
    names[l] = n;
    return n;
  }
};

// Ordering key independent of ids and link names.
std::string struct_key(const World &w, MembraneId m);

std::string atom_key(const Atom &a) {
  return a.name + "/" + std::to_string(a.args.size()) + "/" +
         (a.is_int() ? std::to_string(a.value) : "");
}

std::string struct_key(const World &w, MembraneId m) {
  const Membrane &mm = w.mem(m);
  std::vector<std::string> keys;
  for (AtomId a : mm.atoms) keys.push_back(atom_key(w.atom(a)));
  std::sort(keys.begin(), keys.end());
  std::vector<std::string> ckeys;
  for (MembraneId c : mm.children) ckeys.push_back(struct_key(w, c));
  std::sort(ckeys.begin(), ckeys.end());
  std::string s = "{";
  for (auto &k : keys) s += k + ";";
  for (auto &k : ckeys) s += k;
  s += "#" + std::to_string(mm.rules.size()) + "}";
  return s;
}

void serialize_mem(const World &w, MembraneId m, Namer &namer, std::string &out, bool outermost);

void serialize_contents(const World &w, MembraneId m, Namer &namer, std::string &out) {
  const Membrane &mm = w.mem(m);
  bool first = true;
  auto sep = [&]() {
    if (!first) out += ", ";
    first = false;
  };
  for (const RulePtr &r : mm.rules) {
    if (!first) out += " ";
    first = false;
    out += rule_to_text(*r);
  }
  if (!mm.rules.empty() && !(mm.atoms.empty() && mm.children.empty())) {
    out += " ";
    first = true;
  }
  std::vector<AtomId> atoms(mm.atoms.begin(), mm.atoms.end());
  std::stable_sort(atoms.begin(), atoms.end(), [&](AtomId x, AtomId y) {
    return atom_key(w.atom(x)) < atom_key(w.atom(y));
  });
  for (AtomId a : atoms) {
    sep();
    const Atom &at = w.atom(a);
    if (at.is_int()) {
      out += namer(at.args[0]) + " = " + std::to_string(at.value);
    } else if (at.is_connector()) {
      out += namer(at.args[0]) + " = " + namer(at.args[1]);
    } else if (is_arith_name(at.name) && at.args.size() == 3) {
      out += namer(at.args[2]) + " = " + namer(at.args[0]) + at.name + namer(at.args[1]);
    } else if (at.args.empty()) {
      out += at.name;
    } else {
      out += at.name + "(";
      for (size_t i = 0; i < at.args.size(); ++i) {
        if (i) out += ",";
        out += namer(at.args[i]);
      }
      out += ")";
    }
  }
  std::vector<MembraneId> kids(mm.children.begin(), mm.children.end());
  std::stable_sort(kids.begin(), kids.end(), [&](MembraneId x, MembraneId y) {
    return struct_key(w, x) < struct_key(w, y);
  });
  for (MembraneId c : kids) {
    sep();
    serialize_mem(w, c, namer, out, false);
  }
}

void serialize_mem(const World &w, MembraneId m, Namer &namer, std::string &out, bool outermost) {
  if (!outermost) out += "{";
  serialize_contents(w, m, namer, out);
  if (!outermost) out += "}";
}

}  // namespace

std::string serialize(const World &w, MembraneId m) {
  Namer namer{w};
  std::string out;
  serialize_mem(w, m, namer, out, m == w.root());
  return out;
}

std::string serialize_world(const World &w) { return serialize(w, w.root()); }

std::string serialize_atoms(const World &w, const std::vector<AtomId> &atoms,
                            const std::vector<MembraneId> &mems) {
  // Trace fragments keep world link identity so distinct reductions read
  // differently.
  Namer namer{w};
  for (AtomId a : atoms)
    if (w.atom(a).alive)
      for (LinkId l : w.atom(a).args)
        if (w.link(l).name.empty() && !namer.names.count(l))
          namer.names[l] = "l" + std::to_string(l);
  std::string out;
  bool first = true;
  for (AtomId a : atoms) {
    if (!w.atom(a).alive) continue;
    if (!first) out += ", ";
    first = false;
    const Atom &at = w.atom(a);
    if (at.is_int()) {
      out += namer(at.args[0]) + " = " + std::to_string(at.value);
    } else if (at.args.empty()) {
      out += at.name;
    } else {
      out += at.name + "(";
      for (size_t i = 0; i < at.args.size(); ++i) {
        if (i) out += ",";
        out += namer(at.args[i]);
      }
      out += ")";
    }
  }
  for (MembraneId m : mems) {
    if (!w.mem(m).alive) continue;
    if (!first) out += ", ";
    first = false;
    serialize_mem(w, m, namer, out, false);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DOT export

std::string to_dot(const World &w) {
  std::ostringstream os;
  os << "graph world {\n  compound=true;\n  node [shape=box];\n";
  std::function<void(MembraneId, int)> walk = [&](MembraneId m, int depth) {
    std::string ind(static_cast<size_t>(depth) * 2, ' ');
    if (m != w.root()) {
      os << ind << "subgraph cluster_m" << m << " {\n";
      os << ind << "  label=\"m" << m << "\";\n";
      if (!w.mem(m).rules.empty())
        os << ind << "  rules_m" << m << " [label=\"" << w.mem(m).rules.size()
           << " rules\", shape=note];\n";
    }
    for (AtomId a : w.mem(m).atoms) {
      const Atom &at = w.atom(a);
      std::string label = at.is_int() ? std::to_string(at.value) : at.name;
      os << ind << "  a" << a << " [label=\"" << label << "\"];\n";
    }
    for (MembraneId c : w.mem(m).children) walk(c, depth + 1);
    if (m != w.root()) os << ind << "}\n";
  };
  walk(w.root(), 0);
  // links: connect consecutive endpoints
  std::set<LinkId> seen;
  for (MembraneId m : w.preorder()) {
    for (AtomId a : w.mem(m).atoms) {
      for (LinkId l : w.atom(a).args) {
        if (seen.count(l)) continue;
        seen.insert(l);
        const Link &lk = w.link(l);
        for (size_t i = 0; i + 1 < lk.ends.size(); ++i)
          os << "  a" << lk.ends[i].atom << " -- a" << lk.ends[i + 1].atom << ";\n";
        if (lk.ends.size() == 1 && !lk.name.empty()) {
          os << "  env_" << lk.name << " [label=\"" << lk.name << "\", shape=plaintext];\n";
          os << "  a" << lk.ends[0].atom << " -- env_" << lk.name << ";\n";
        }
      }
    }
  }
  os << "}\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Isomorphism

namespace {

struct IsoState {
  std::map<LinkId, LinkId> ab, ba;
  bool bind(const World &wa, const World &wb, LinkId a, LinkId b) {
    // Links are equal up to renaming; only interface (free) links keep names.
    bool a_free = wa.link(a).ends.size() == 1;
    bool b_free = wb.link(b).ends.size() == 1;
    if (a_free != b_free) return false;
    if (a_free && wa.link(a).name != wb.link(b).name) return false;
    auto it = ab.find(a);
    if (it != ab.end()) return it->second == b;
    auto it2 = ba.find(b);
    if (it2 != ba.end()) return false;
    ab[a] = b;
    ba[b] = a;
    return true;
  }
};

bool iso_mem(const World &wa, MembraneId a, const World &wb, MembraneId b, IsoState &st);

bool iso_atoms(const World &wa, const std::vector<AtomId> &as, const World &wb,
               const std::vector<AtomId> &bs, size_t i, std::vector<bool> &used, IsoState &st,
               const std::function<bool(IsoState &)> &cont) {
  if (i == as.size()) return cont(st);
  const Atom &aa = wa.atom(as[i]);
  for (size_t j = 0; j < bs.size(); ++j) {
    if (used[j]) continue;
    const Atom &bb = wb.atom(bs[j]);
    if (aa.name != bb.name || aa.kind != bb.kind || aa.value != bb.value ||
        aa.args.size() != bb.args.size())
      continue;
    IsoState saved = st;
    bool ok = true;
    for (size_t k = 0; k < aa.args.size() && ok; ++k) ok = st.bind(wa, wb, aa.args[k], bb.args[k]);
    if (ok) {
      used[j] = true;
      if (iso_atoms(wa, as, wb, bs, i + 1, used, st, cont)) return true;
      used[j] = false;
    }
    st = saved;
  }
  return false;
}

bool iso_children(const World &wa, const std::vector<MembraneId> &as, const World &wb,
                  const std::vector<MembraneId> &bs, size_t i, std::vector<bool> &used,
                  IsoState &st) {
  if (i == as.size()) return true;
  for (size_t j = 0; j < bs.size(); ++j) {
    if (used[j]) continue;
    IsoState saved = st;
    if (iso_mem(wa, as[i], wb, bs[j], st)) {
      used[j] = true;
      if (iso_children(wa, as, wb, bs, i + 1, used, st)) return true;
      used[j] = false;
    }
    st = saved;
  }
  return false;
}

bool iso_mem(const World &wa, MembraneId a, const World &wb, MembraneId b, IsoState &st) {
  const Membrane &ma = wa.mem(a);
  const Membrane &mb = wb.mem(b);
  if (ma.atoms.size() != mb.atoms.size() || ma.children.size() != mb.children.size()) return false;
  std::vector<std::string> ra, rb;
  for (const auto &r : ma.rules) ra.push_back(rule_to_text(*r));
  for (const auto &r : mb.rules) rb.push_back(rule_to_text(*r));
  std::sort(ra.begin(), ra.end());
  std::sort(rb.begin(), rb.end());
  if (ra != rb) return false;
  std::vector<bool> used_a(mb.atoms.size(), false);
  auto cont = [&](IsoState &st2) {
    std::vector<bool> used_m(mb.children.size(), false);
    return iso_children(wa, ma.children, wb, mb.children, 0, used_m, st2);
  };
  return iso_atoms(wa, ma.atoms, wb, mb.atoms, 0, used_a, st, cont);
}

}  // namespace

bool isomorphic(const World &wa, MembraneId a, const World &wb, MembraneId b) {
  IsoState st;
  return iso_mem(wa, a, wb, b, st);
}

}  // namespace lmncc
