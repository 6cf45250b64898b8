#include "lmncc/ccfl.hpp"

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <sstream>

namespace lmncc::ccfl {

ExprPtr make_var(std::string name) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::Var;
  e->name = std::move(name);
  return e;
}
ExprPtr make_int(int64_t v) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::IntLit;
  e->value = v;
  return e;
}
ExprPtr make_app(ExprPtr fn, std::vector<ExprPtr> args) {
  auto e = std::make_shared<Expr>();
  e->kind = Expr::Kind::App;
  e->kids.push_back(std::move(fn));
  for (auto &a : args) e->kids.push_back(std::move(a));
  return e;
}

const FunDef *Program::find_def(const std::string &name) const {
  for (const auto &d : defs)
    if (d.name == name) return &d;
  return nullptr;
}

std::optional<int> Program::ctor_arity(const std::string &name) const {
  for (const auto &d : datas)
    for (const auto &c : d.ctors)
      if (c.name == name) return c.arity;
  if (name == "Nil") return 0;
  if (name == "Cons") return 2;
  return std::nullopt;
}

std::optional<int> Program::fn_arity(const std::string &name) const {
  const FunDef *d = find_def(name);
  if (!d) return std::nullopt;
  return static_cast<int>(d->params.size());
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tk {
  End, Lower, Upper, Int,
  KwData, KwFun, KwDef, KwCase, KwOf, KwLet, KwIn, KwWith,
  LParen, RParen, LBracket, RBracket, Comma, Semi, Bar, Amp,
  Eq, Arrow, DblColon, Colon, Plus, Minus, Star, StrictEq,
};

struct CTok {
  Tk kind;
  std::string text;
  int64_t value = 0;
  int line = 1, col = 1;
};

class CLexer {
 public:
  explicit CLexer(const std::string &src) : src_(src) { advance(); }
  const CTok &peek() const { return cur_; }
  CTok next() {
    CTok t = cur_;
    advance();
    return t;
  }
  bool at(Tk k) const { return cur_.kind == k; }
  bool accept(Tk k) {
    if (!at(k)) return false;
    advance();
    return true;
  }
  CTok expect(Tk k, const char *what) {
    if (!at(k)) fail(std::string("expected ") + what);
    return next();
  }
  [[noreturn]] void fail(const std::string &msg) const {
    throw ParseError(msg + " (got '" + cur_.text + "')", cur_.line, cur_.col);
  }
  struct State {
    size_t pos;
    int line, col;
    CTok cur;
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
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        bump();
      } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '-') {
        while (pos_ < src_.size() && src_[pos_] != '\n') bump();
      } else {
        break;
      }
    }
    cur_.line = line_;
    cur_.col = col_;
    if (pos_ >= src_.size()) {
      cur_ = {Tk::End, "<eof>", 0, line_, col_};
      return;
    }
    char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t s = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) bump();
      cur_.kind = Tk::Int;
      cur_.text = src_.substr(s, pos_ - s);
      cur_.value = std::stoll(cur_.text);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t s = pos_;
      while (pos_ < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_' ||
              src_[pos_] == '\''))
        bump();
      cur_.text = src_.substr(s, pos_ - s);
      if (cur_.text == "data") cur_.kind = Tk::KwData;
      else if (cur_.text == "fun") cur_.kind = Tk::KwFun;
      else if (cur_.text == "def") cur_.kind = Tk::KwDef;
      else if (cur_.text == "case") cur_.kind = Tk::KwCase;
      else if (cur_.text == "of") cur_.kind = Tk::KwOf;
      else if (cur_.text == "let") cur_.kind = Tk::KwLet;
      else if (cur_.text == "in") cur_.kind = Tk::KwIn;
      else if (cur_.text == "with") cur_.kind = Tk::KwWith;
      else if (std::isupper(static_cast<unsigned char>(c))) cur_.kind = Tk::Upper;
      else cur_.kind = Tk::Lower;
      return;
    }
    auto two = [&](const char *s) {
      return pos_ + 1 < src_.size() && src_[pos_] == s[0] && src_[pos_ + 1] == s[1];
    };
    auto three = [&](const char *s) {
      return pos_ + 2 < src_.size() && src_[pos_] == s[0] && src_[pos_ + 1] == s[1] &&
             src_[pos_ + 2] == s[2];
    };
    if (three("=:=")) return emit(Tk::StrictEq, 3);
    if (two("->")) return emit(Tk::Arrow, 2);
    if (two("::")) return emit(Tk::DblColon, 2);
    switch (c) {
      case '(': return emit(Tk::LParen, 1);
      case ')': return emit(Tk::RParen, 1);
      case '[': return emit(Tk::LBracket, 1);
      case ']': return emit(Tk::RBracket, 1);
      case ',': return emit(Tk::Comma, 1);
      case ';': return emit(Tk::Semi, 1);
      case '|': return emit(Tk::Bar, 1);
      case '&': return emit(Tk::Amp, 1);
      case '=': return emit(Tk::Eq, 1);
      case ':': return emit(Tk::Colon, 1);
      case '+': return emit(Tk::Plus, 1);
      case '-': return emit(Tk::Minus, 1);
      case '*': return emit(Tk::Star, 1);
      default:
        throw ParseError(std::string("unexpected character '") + c + "'", line_, col_);
    }
  }
  void emit(Tk k, int n) {
    cur_.kind = k;
    cur_.text = src_.substr(pos_, n);
    for (int i = 0; i < n; ++i) bump();
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
  CTok cur_;
};

// ---------------------------------------------------------------------------
// Parser

class CParser {
 public:
  explicit CParser(const std::string &src) : lx_(src) {}

  Program parse_program() {
    Program p;
    while (!lx_.at(Tk::End)) {
      if (lx_.at(Tk::KwData)) {
        p.datas.push_back(parse_data());
      } else if (lx_.at(Tk::KwFun)) {
        parse_sig(p);
      } else if (lx_.at(Tk::KwDef)) {
        p.defs.push_back(parse_def(p));
      } else {
        lx_.fail("expected 'data', 'fun' or 'def'");
      }
    }
    return p;
  }

  ExprPtr parse_expression() {
    ExprPtr e = parse_conj();
    if (!lx_.at(Tk::End)) lx_.fail("trailing input in expression");
    return e;
  }

 private:
  CLexer lx_;
  std::set<std::string> constraint_sigs_;

  DataDecl parse_data() {
    lx_.expect(Tk::KwData, "'data'");
    DataDecl d;
    d.name = lx_.expect(Tk::Upper, "type name").text;
    while (lx_.at(Tk::Lower)) d.tyvars.push_back(lx_.next().text);
    lx_.expect(Tk::Eq, "'='");
    while (true) {
      DataDecl::Ctor c;
      c.name = lx_.expect(Tk::Upper, "constructor name").text;
      c.arity = 0;
      while (lx_.at(Tk::Lower) || lx_.at(Tk::Upper) || lx_.at(Tk::LParen)) {
        skip_type_atom();
        c.arity++;
      }
      d.ctors.push_back(c);
      if (!lx_.accept(Tk::Bar)) break;
    }
    return d;
  }

  void skip_type_atom() {
    if (lx_.accept(Tk::LParen)) {
      int depth = 1;
      while (depth > 0) {
        if (lx_.at(Tk::End)) lx_.fail("unterminated type");
        if (lx_.at(Tk::LParen)) depth++;
        if (lx_.at(Tk::RParen)) depth--;
        lx_.next();
      }
      return;
    }
    lx_.next();
  }

  // fun name :: T1 -> T2 -> ... ; retained, unchecked. A result type C marks
  // a constraint.
  void parse_sig(Program &p) {
    lx_.expect(Tk::KwFun, "'fun'");
    std::string name = lx_.expect(Tk::Lower, "function name").text;
    lx_.expect(Tk::DblColon, "'::'");
    std::string sig = name + " ::";
    std::string last_upper;
    while (!lx_.at(Tk::End) && !lx_.at(Tk::KwDef) && !lx_.at(Tk::KwFun) && !lx_.at(Tk::KwData)) {
      CTok t = lx_.next();
      sig += " " + t.text;
      if (t.kind == Tk::Upper) last_upper = t.text;
    }
    if (last_upper == "C") constraint_sigs_.insert(name);
    p.type_sigs.push_back(sig);
  }

  FunDef parse_def(const Program &p) {
    (void)p;
    CTok kw = lx_.expect(Tk::KwDef, "'def'");
    FunDef d;
    d.line = kw.line;
    d.col = kw.col;
    d.name = lx_.expect(Tk::Lower, "function name").text;
    while (lx_.at(Tk::Lower)) d.params.push_back(lx_.next().text);
    lx_.expect(Tk::Eq, "'='");
    d.is_constraint = constraint_sigs_.count(d.name) > 0;
    // Guarded alternatives: ask -> conj ('|' ask -> conj)*
    auto st = lx_.save();
    if (try_parse_alts(d)) {
      d.is_constraint = true;
      return d;
    }
    lx_.restore(st);
    d.body = parse_conj();
    if (d.body->kind == Expr::Kind::Equality || d.body->kind == Expr::Kind::Conjunction ||
        d.body->kind == Expr::Kind::With)
      d.is_constraint = true;
    return d;
  }

  bool try_parse_alts(FunDef &d) {
    try {
      while (true) {
        GuardedAlt alt;
        alt.ask_var = lx_.expect(Tk::Lower, "ask variable").text;
        lx_.expect(Tk::StrictEq, "'=:='");
        // constructor skeleton: y:ys | Ctor v... | []
        if (lx_.at(Tk::Lower)) {
          std::string a = lx_.next().text;
          lx_.expect(Tk::Colon, "':'");
          std::string b = lx_.expect(Tk::Lower, "variable").text;
          alt.ask_ctor = "Cons";
          alt.ask_binders = {a, b};
        } else if (lx_.at(Tk::LBracket)) {
          lx_.next();
          lx_.expect(Tk::RBracket, "']'");
          alt.ask_ctor = "Nil";
        } else {
          alt.ask_ctor = lx_.expect(Tk::Upper, "constructor").text;
          while (lx_.at(Tk::Lower)) alt.ask_binders.push_back(lx_.next().text);
        }
        lx_.expect(Tk::Arrow, "'->'");
        alt.body = parse_conj();
        d.alts.push_back(std::move(alt));
        if (!lx_.accept(Tk::Bar)) break;
      }
      return true;
    } catch (const ParseError &) {
      return false;
    }
  }

  ExprPtr parse_conj() {
    ExprPtr e = parse_eq();
    if (!lx_.at(Tk::Amp)) return e;
    auto conj = std::make_shared<Expr>();
    conj->kind = Expr::Kind::Conjunction;
    conj->kids.push_back(e);
    while (lx_.accept(Tk::Amp)) conj->kids.push_back(parse_eq());
    return conj;
  }

  ExprPtr parse_eq() {
    ExprPtr l = parse_cons();
    if (lx_.accept(Tk::StrictEq)) {
      ExprPtr r = parse_cons();
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::Equality;
      e->kids = {l, r};
      return e;
    }
    return l;
  }

  ExprPtr parse_cons() {
    ExprPtr l = parse_add();
    if (lx_.accept(Tk::Colon)) {
      ExprPtr r = parse_cons();
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::CtorApp;
      e->name = "Cons";
      e->kids = {l, r};
      return e;
    }
    return l;
  }

  ExprPtr parse_add() {
    ExprPtr e = parse_mul();
    while (lx_.at(Tk::Plus) || lx_.at(Tk::Minus)) {
      std::string op = lx_.next().text;
      ExprPtr r = parse_mul();
      auto n = std::make_shared<Expr>();
      n->kind = Expr::Kind::Infix;
      n->name = op;
      n->kids = {e, r};
      e = n;
    }
    return e;
  }

  ExprPtr parse_mul() {
    ExprPtr e = parse_app();
    while (lx_.at(Tk::Star)) {
      lx_.next();
      ExprPtr r = parse_app();
      auto n = std::make_shared<Expr>();
      n->kind = Expr::Kind::Infix;
      n->name = "*";
      n->kids = {e, r};
      e = n;
    }
    return e;
  }

  bool at_atom_start() const {
    return lx_.at(Tk::Int) || lx_.at(Tk::Lower) || lx_.at(Tk::Upper) || lx_.at(Tk::LParen) ||
           lx_.at(Tk::LBracket) || lx_.at(Tk::KwCase) || lx_.at(Tk::KwLet) || lx_.at(Tk::KwWith);
  }

  ExprPtr parse_app() {
    ExprPtr head = parse_atom();
    std::vector<ExprPtr> args;
    while (at_atom_start() && !lx_.at(Tk::KwCase) && !lx_.at(Tk::KwLet) && !lx_.at(Tk::KwWith))
      args.push_back(parse_atom());
    if (args.empty()) return head;
    if (head->kind == Expr::Kind::CtorApp && head->kids.empty()) {
      head->kids = std::move(args);
      return head;
    }
    return make_app(std::move(head), std::move(args));
  }

  ExprPtr parse_atom() {
    CTok t = lx_.peek();
    if (lx_.accept(Tk::Int)) {
      auto e = make_int(t.value);
      e->line = t.line;
      e->col = t.col;
      return e;
    }
    if (lx_.at(Tk::Minus)) {
      // negative literal
      auto st = lx_.save();
      lx_.next();
      if (lx_.at(Tk::Int)) {
        CTok i = lx_.next();
        return make_int(-i.value);
      }
      lx_.restore(st);
      lx_.fail("unexpected '-'");
    }
    if (lx_.accept(Tk::Lower)) {
      auto e = make_var(t.text);
      e->line = t.line;
      e->col = t.col;
      return e;
    }
    if (lx_.accept(Tk::Upper)) {
      auto e = std::make_shared<Expr>();
      e->kind = Expr::Kind::CtorApp;
      e->name = t.text;
      e->line = t.line;
      e->col = t.col;
      return e;
    }
    if (lx_.accept(Tk::LParen)) {
      ExprPtr e = parse_conj();
      lx_.expect(Tk::RParen, "')'");
      return e;
    }
    if (lx_.at(Tk::LBracket)) return parse_list();
    if (lx_.at(Tk::KwCase)) return parse_case();
    if (lx_.at(Tk::KwLet)) return parse_let();
    if (lx_.at(Tk::KwWith)) return parse_with();
    lx_.fail("expected expression");
  }

  ExprPtr parse_list() {
    lx_.expect(Tk::LBracket, "'['");
    std::vector<ExprPtr> items;
    if (!lx_.at(Tk::RBracket)) {
      while (true) {
        items.push_back(parse_eq());
        if (!lx_.accept(Tk::Comma)) break;
      }
    }
    lx_.expect(Tk::RBracket, "']'");
    auto nil = std::make_shared<Expr>();
    nil->kind = Expr::Kind::CtorApp;
    nil->name = "Nil";
    ExprPtr acc = nil;
    for (auto it = items.rbegin(); it != items.rend(); ++it) {
      auto c = std::make_shared<Expr>();
      c->kind = Expr::Kind::CtorApp;
      c->name = "Cons";
      c->kids = {*it, acc};
      acc = c;
    }
    return acc;
  }

  Pattern parse_pattern() {
    Pattern p;
    if (lx_.at(Tk::Int)) {
      p.kind = Pattern::Kind::Int;
      p.value = lx_.next().value;
      return p;
    }
    if (lx_.at(Tk::LBracket)) {
      lx_.next();
      lx_.expect(Tk::RBracket, "']'");
      p.kind = Pattern::Kind::Ctor;
      p.name = "Nil";
      return p;
    }
    if (lx_.at(Tk::Upper)) {
      p.kind = Pattern::Kind::Ctor;
      p.name = lx_.next().text;
      while (lx_.at(Tk::Lower)) p.binders.push_back(lx_.next().text);
      return p;
    }
    if (lx_.at(Tk::Lower)) {
      std::string a = lx_.next().text;
      if (lx_.accept(Tk::Colon)) {
        std::string b = lx_.expect(Tk::Lower, "variable").text;
        p.kind = Pattern::Kind::Ctor;
        p.name = "Cons";
        p.binders = {a, b};
        return p;
      }
      p.kind = Pattern::Kind::Var;
      p.name = a;
      return p;
    }
    lx_.fail("expected pattern");
  }

  ExprPtr parse_case() {
    CTok kw = lx_.expect(Tk::KwCase, "'case'");
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Case;
    e->line = kw.line;
    e->col = kw.col;
    e->kids.push_back(parse_eq());
    lx_.expect(Tk::KwOf, "'of'");
    while (true) {
      Expr::Branch b;
      b.pat = parse_pattern();
      lx_.expect(Tk::Arrow, "'->'");
      b.body = parse_conj();
      e->branches.push_back(std::move(b));
      if (!lx_.accept(Tk::Semi)) break;
    }
    return e;
  }

  ExprPtr parse_let() {
    lx_.expect(Tk::KwLet, "'let'");
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::Let;
    while (true) {
      std::string n = lx_.expect(Tk::Lower, "binding name").text;
      lx_.expect(Tk::Eq, "'='");
      e->let_names.push_back(n);
      e->kids.push_back(parse_eq());
      if (!lx_.accept(Tk::Semi)) break;
    }
    lx_.expect(Tk::KwIn, "'in'");
    e->kids.push_back(parse_conj());
    return e;
  }

  ExprPtr parse_with() {
    lx_.expect(Tk::KwWith, "'with'");
    auto e = std::make_shared<Expr>();
    e->kind = Expr::Kind::With;
    while (true) {
      e->with_vars.push_back(lx_.expect(Tk::Lower, "variable").text);
      if (!lx_.accept(Tk::Comma)) break;
    }
    if (lx_.accept(Tk::DblColon)) {
      // type annotation, skipped up to 'in'
      while (!lx_.at(Tk::KwIn) && !lx_.at(Tk::End)) lx_.next();
    }
    lx_.expect(Tk::KwIn, "'in'");
    e->kids.push_back(parse_conj());
    return e;
  }
};

}  // namespace

Program parse_ccfl(const std::string &text) {
  CParser p(text);
  return p.parse_program();
}

// ---------------------------------------------------------------------------
// Queries

namespace {

void collect_free_vars(const Expr &e, const Program &p, std::set<std::string> bound,
                       std::vector<std::string> &out, std::set<std::string> &seen) {
  switch (e.kind) {
    case Expr::Kind::Var:
      if (!bound.count(e.name) && !p.find_def(e.name) && !seen.count(e.name)) {
        seen.insert(e.name);
        out.push_back(e.name);
      }
      return;
    case Expr::Kind::Case: {
      collect_free_vars(*e.kids[0], p, bound, out, seen);
      for (const auto &br : e.branches) {
        std::set<std::string> b2 = bound;
        if (br.pat.kind == Pattern::Kind::Var) b2.insert(br.pat.name);
        for (const auto &v : br.pat.binders) b2.insert(v);
        collect_free_vars(*br.body, p, b2, out, seen);
      }
      return;
    }
    case Expr::Kind::Let: {
      std::set<std::string> b2 = bound;
      for (size_t i = 0; i + 1 < e.kids.size(); ++i) {
        collect_free_vars(*e.kids[i], p, b2, out, seen);
        b2.insert(e.let_names[i]);
      }
      collect_free_vars(*e.kids.back(), p, b2, out, seen);
      return;
    }
    case Expr::Kind::With: {
      std::set<std::string> b2 = bound;
      for (const auto &v : e.with_vars) b2.insert(v);
      collect_free_vars(*e.kids[0], p, b2, out, seen);
      return;
    }
    default:
      for (const auto &k : e.kids) collect_free_vars(*k, p, bound, out, seen);
  }
}

bool contains_constraint(const Expr &e, const Program &p) {
  if (e.kind == Expr::Kind::Equality || e.kind == Expr::Kind::Conjunction ||
      e.kind == Expr::Kind::With)
    return true;
  if (e.kind == Expr::Kind::Var) {
    const FunDef *d = p.find_def(e.name);
    if (d && d->is_constraint) return true;
  }
  for (const auto &k : e.kids)
    if (contains_constraint(*k, p)) return true;
  return false;
}

}  // namespace

Query parse_query(const std::string &text, const Program &p) {
  CParser parser(text);
  Query q;
  q.expr = parser.parse_expression();
  std::set<std::string> seen;
  collect_free_vars(*q.expr, p, {}, q.free_vars, seen);
  // Unknown lowercase heads applied to arguments are errors, not free vars.
  std::function<void(const Expr &)> check_heads = [&](const Expr &e) {
    if (e.kind == Expr::Kind::App && e.kids[0]->kind == Expr::Kind::Var) {
      const std::string &h = e.kids[0]->name;
      if (!p.find_def(h))
        throw ParseError("unknown identifier '" + h + "'", e.kids[0]->line, e.kids[0]->col);
    }
    for (const auto &k : e.kids) check_heads(*k);
  };
  check_heads(*q.expr);
  q.is_constraint = contains_constraint(*q.expr, p);
  return q;
}

// ---------------------------------------------------------------------------
// Checking

namespace {

struct Checker {
  const Program &p;
  std::vector<Diagnostic> diags;

  void report(const std::string &msg, int line, int col) { diags.push_back({msg, line, col}); }

  void check_expr(const Expr &e, std::set<std::string> bound, int line, int col) {
    int l = e.line ? e.line : line;
    int c = e.col ? e.col : col;
    switch (e.kind) {
      case Expr::Kind::Var:
        if (!bound.count(e.name) && !p.find_def(e.name))
          report("unbound variable '" + e.name + "'", l, c);
        return;
      case Expr::Kind::IntLit:
        return;
      case Expr::Kind::CtorApp: {
        auto ar = p.ctor_arity(e.name);
        if (!ar) {
          report("unknown constructor '" + e.name + "'", l, c);
        } else if ((int)e.kids.size() > *ar) {
          report("constructor '" + e.name + "' applied to " + std::to_string(e.kids.size()) +
                     " arguments, arity is " + std::to_string(*ar),
                 l, c);
        }
        break;
      }
      case Expr::Kind::App: {
        // Over-application of a known function at a saturated call site.
        const Expr &head = *e.kids[0];
        if (head.kind == Expr::Kind::Var) {
          auto ar = p.fn_arity(head.name);
          if (ar && (int)e.kids.size() - 1 > *ar && *ar > 0)
            report("function '" + head.name + "' applied to " +
                       std::to_string(e.kids.size() - 1) + " arguments, arity is " +
                       std::to_string(*ar),
                   l, c);
        }
        break;
      }
      case Expr::Kind::Case: {
        check_expr(*e.kids[0], bound, l, c);
        for (const auto &br : e.branches) {
          std::set<std::string> b2 = bound;
          if (br.pat.kind == Pattern::Kind::Var) b2.insert(br.pat.name);
          if (br.pat.kind == Pattern::Kind::Ctor) {
            auto ar = p.ctor_arity(br.pat.name);
            if (!ar)
              report("unknown constructor '" + br.pat.name + "' in pattern", l, c);
            else if ((int)br.pat.binders.size() != *ar)
              report("pattern '" + br.pat.name + "' has " +
                         std::to_string(br.pat.binders.size()) + " variables, arity is " +
                         std::to_string(*ar),
                     l, c);
            std::set<std::string> lin;
            for (const auto &v : br.pat.binders)
              if (!lin.insert(v).second) report("non-linear pattern variable '" + v + "'", l, c);
            for (const auto &v : br.pat.binders) b2.insert(v);
          }
          check_expr(*br.body, b2, l, c);
        }
        return;
      }
      case Expr::Kind::Let: {
        std::set<std::string> b2 = bound;
        for (size_t i = 0; i + 1 < e.kids.size(); ++i) {
          check_expr(*e.kids[i], b2, l, c);
          b2.insert(e.let_names[i]);
        }
        check_expr(*e.kids.back(), b2, l, c);
        return;
      }
      case Expr::Kind::With: {
        std::set<std::string> b2 = bound;
        for (const auto &v : e.with_vars) b2.insert(v);
        check_expr(*e.kids[0], b2, l, c);
        return;
      }
      default:
        break;
    }
    for (const auto &k : e.kids) check_expr(*k, bound, l, c);
  }
};

}  // namespace

std::vector<Diagnostic> check_ccfl(const Program &p) {
  Checker ck{p, {}};
  std::set<std::string> fn_names, ctor_names;
  for (const auto &d : p.defs)
    if (!fn_names.insert(d.name).second)
      ck.report("duplicate definition of '" + d.name + "'", d.line, d.col);
  for (const auto &dd : p.datas)
    for (const auto &c : dd.ctors)
      if (!ctor_names.insert(c.name).second)
        ck.report("duplicate constructor '" + c.name + "'", 0, 0);
  for (const auto &d : p.defs) {
    std::set<std::string> params;
    for (const auto &v : d.params)
      if (!params.insert(v).second)
        ck.report("duplicate parameter '" + v + "' of '" + d.name + "'", d.line, d.col);
    if (d.body) ck.check_expr(*d.body, params, d.line, d.col);
    for (const auto &alt : d.alts) {
      if (!params.count(alt.ask_var))
        ck.report("ask pattern matches non-parameter '" + alt.ask_var + "'", d.line, d.col);
      std::set<std::string> b2 = params;
      for (const auto &v : alt.ask_binders) b2.insert(v);
      ck.check_expr(*alt.body, b2, d.line, d.col);
    }
  }
  return ck.diags;
}

// ---------------------------------------------------------------------------
// Eta enrichment

namespace {

// Length of the application spine and its head.
const Expr *spine_head(const Expr &e, int &args) {
  if (e.kind == Expr::Kind::App) {
    const Expr *h = spine_head(*e.kids[0], args);
    args += static_cast<int>(e.kids.size()) - 1;
    return h;
  }
  args = 0;
  return &e;
}

}  // namespace

FunDef eta_enrich(const FunDef &d, const Program &p) {
  if (!d.body || !d.alts.empty()) return d;
  int given = 0;
  const Expr *head = spine_head(*d.body, given);
  if (head->kind != Expr::Kind::Var) return d;
  auto arity = p.fn_arity(head->name);
  if (!arity) return d;
  int missing = *arity - given;
  if (missing <= 0) return d;
  FunDef out = d;
  ExprPtr body = out.body;
  std::set<std::string> taken(d.params.begin(), d.params.end());
  for (int i = 0; i < missing; ++i) {
    std::string v = "x";
    int n = 0;
    while (taken.count(v)) v = "x" + std::to_string(++n);
    taken.insert(v);
    out.params.push_back(v);
    body = make_app(body, {make_var(v)});
  }
  out.body = body;
  return out;
}

void eta_enrich_all(Program &p) {
  Program snapshot = p;
  for (auto &d : p.defs) d = eta_enrich(d, snapshot);
}

// ---------------------------------------------------------------------------
// Pretty printing and equality

namespace {

void pretty_rec(const Expr &e, std::ostringstream &os, bool parens) {
  auto wrap = [&](const std::function<void()> &f) {
    if (parens) os << "(";
    f();
    if (parens) os << ")";
  };
  switch (e.kind) {
    case Expr::Kind::Var: os << e.name; return;
    case Expr::Kind::IntLit: os << e.value; return;
    case Expr::Kind::CtorApp:
      if (e.kids.empty()) {
        os << e.name;
        return;
      }
      wrap([&] {
        os << e.name;
        for (const auto &k : e.kids) {
          os << " ";
          pretty_rec(*k, os, true);
        }
      });
      return;
    case Expr::Kind::App:
      wrap([&] {
        pretty_rec(*e.kids[0], os, e.kids[0]->kind != Expr::Kind::Var &&
                                        e.kids[0]->kind != Expr::Kind::App);
        for (size_t i = 1; i < e.kids.size(); ++i) {
          os << " ";
          pretty_rec(*e.kids[i], os, true);
        }
      });
      return;
    case Expr::Kind::Infix:
      wrap([&] {
        pretty_rec(*e.kids[0], os, true);
        os << " " << e.name << " ";
        pretty_rec(*e.kids[1], os, true);
      });
      return;
    case Expr::Kind::Case:
      wrap([&] {
        os << "case ";
        pretty_rec(*e.kids[0], os, false);
        os << " of ";
        for (size_t i = 0; i < e.branches.size(); ++i) {
          if (i) os << " ; ";
          const auto &b = e.branches[i];
          switch (b.pat.kind) {
            case Pattern::Kind::Int: os << b.pat.value; break;
            case Pattern::Kind::Var: os << b.pat.name; break;
            case Pattern::Kind::Ctor:
              os << b.pat.name;
              for (const auto &v : b.pat.binders) os << " " << v;
              break;
          }
          os << " -> ";
          pretty_rec(*b.body, os, false);
        }
      });
      return;
    case Expr::Kind::Let:
      wrap([&] {
        os << "let ";
        for (size_t i = 0; i + 1 < e.kids.size(); ++i) {
          if (i) os << " ; ";
          os << e.let_names[i] << " = ";
          pretty_rec(*e.kids[i], os, false);
        }
        os << " in ";
        pretty_rec(*e.kids.back(), os, false);
      });
      return;
    case Expr::Kind::With:
      wrap([&] {
        os << "with ";
        for (size_t i = 0; i < e.with_vars.size(); ++i) {
          if (i) os << ", ";
          os << e.with_vars[i];
        }
        os << " in ";
        pretty_rec(*e.kids[0], os, false);
      });
      return;
    case Expr::Kind::Equality:
      wrap([&] {
        pretty_rec(*e.kids[0], os, true);
        os << " =:= ";
        pretty_rec(*e.kids[1], os, true);
      });
      return;
    case Expr::Kind::Conjunction:
      wrap([&] {
        for (size_t i = 0; i < e.kids.size(); ++i) {
          if (i) os << " & ";
          pretty_rec(*e.kids[i], os, true);
        }
      });
      return;
  }
}

}  // namespace

std::string pretty(const Expr &e) {
  std::ostringstream os;
  pretty_rec(e, os, false);
  return os.str();
}

std::string pretty_program(const Program &p) {
  std::ostringstream os;
  for (const auto &d : p.datas) {
    os << "data " << d.name;
    for (const auto &v : d.tyvars) os << " " << v;
    os << " = ";
    for (size_t i = 0; i < d.ctors.size(); ++i) {
      if (i) os << " | ";
      os << d.ctors[i].name;
      for (int j = 0; j < d.ctors[i].arity; ++j) os << " a";
    }
    os << "\n";
  }
  for (const auto &d : p.defs) {
    os << "def " << d.name;
    for (const auto &v : d.params) os << " " << v;
    os << " = ";
    if (d.body) os << pretty(*d.body);
    for (size_t i = 0; i < d.alts.size(); ++i) {
      if (i) os << " | ";
      const auto &a = d.alts[i];
      os << a.ask_var << " =:= ";
      if (a.ask_ctor == "Cons" && a.ask_binders.size() == 2)
        os << a.ask_binders[0] << ":" << a.ask_binders[1];
      else {
        os << a.ask_ctor;
        for (const auto &b : a.ask_binders) os << " " << b;
      }
      os << " -> " << pretty(*a.body);
    }
    os << "\n";
  }
  return os.str();
}

bool expr_equal(const Expr &a, const Expr &b) {
  if (a.kind != b.kind || a.name != b.name || a.value != b.value ||
      a.kids.size() != b.kids.size() || a.branches.size() != b.branches.size() ||
      a.let_names != b.let_names || a.with_vars != b.with_vars)
    return false;
  for (size_t i = 0; i < a.kids.size(); ++i)
    if (!expr_equal(*a.kids[i], *b.kids[i])) return false;
  for (size_t i = 0; i < a.branches.size(); ++i) {
    const auto &pa = a.branches[i].pat;
    const auto &pb = b.branches[i].pat;
    if (pa.kind != pb.kind || pa.value != pb.value || pa.name != pb.name ||
        pa.binders != pb.binders)
      return false;
    if (!expr_equal(*a.branches[i].body, *b.branches[i].body)) return false;
  }
  return true;
}

int expr_depth(const Expr &e) {
  if (e.kids.empty()) return 0;
  int d = 0;
  for (const auto &k : e.kids) d = std::max(d, expr_depth(*k));
  return d + 1;
}

}  // namespace lmncc::ccfl
