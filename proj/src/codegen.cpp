#include "lmncc/codegen.hpp"

#include <algorithm>
#include <cctype>
#include <functional>

#include "lmncc/text.hpp"

namespace lmncc::codegen {

const char *k_result_link = "Res";

namespace {

using ccfl::Expr;
using ccfl::ExprPtr;

std::string ctor_engine(const std::string &n) {
  std::string s = n;
  s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
  return s;
}

bool looks_like_fresh(const std::string &s) {
  if (s.size() < 2 || s[0] != 'V') return false;
  for (size_t i = 1; i < s.size(); ++i)
    if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
  return true;
}

std::string param_link(const std::string &v) {
  std::string s = v;
  s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  if (looks_like_fresh(s)) s = "P" + s;
  return s;
}

AtomTemplate mk_plain(const std::string &name, std::vector<std::string> args) {
  AtomTemplate a;
  a.name = name;
  a.kind = AtomKind::Plain;
  a.args = std::move(args);
  return a;
}

AtomTemplate mk_int(int64_t v, const std::string &root) {
  AtomTemplate a;
  a.kind = AtomKind::IntLit;
  a.name = std::to_string(v);
  a.value_expr = IntExpr::constant(v);
  a.args = {root};
  return a;
}

AtomTemplate mk_conn(const std::string &a1, const std::string &a2) {
  AtomTemplate a;
  a.kind = AtomKind::Connector;
  a.name = "=";
  a.args = {a1, a2};
  return a;
}

// ---------------------------------------------------------------------------
// Flattening

struct CompileCtx {
  const ccfl::Program &prog;
  Compiled &comp;
  std::vector<ccfl::FunDef> aux_queue;
  int aux_counter = 0;
};

class Flattener {
 public:
  Flattener(CompileCtx &cx, bool query_mode) : cx_(cx), query_mode_(query_mode) {}

  std::vector<AtomTemplate> atoms;
  std::map<std::string, std::string> env;  // source variable -> link variable
  std::vector<std::string> free_vars;      // query mode only

  std::string fresh() {
    std::string v;
    do {
      v = "V" + std::to_string(fresh_n_++);
    } while (taken_.count(v));
    return v;
  }
  void reserve(const std::string &v) { taken_.insert(v); }

  void flatten_into(const Expr &e, const std::string &dest) {
    switch (e.kind) {
      case Expr::Kind::IntLit:
        atoms.push_back(mk_int(e.value, dest));
        return;
      case Expr::Kind::Var: {
        auto it = env.find(e.name);
        if (it != env.end()) {
          atoms.push_back(mk_conn(it->second, dest));
          return;
        }
        auto ar = cx_.comp.fn_arity.find(e.name);
        if (ar != cx_.comp.fn_arity.end()) {
          // zero-argument call, or the function itself as a value
          atoms.push_back(mk_plain(e.name, {dest}));
          return;
        }
        atoms.push_back(mk_conn(free_link(e.name), dest));
        return;
      }
      case Expr::Kind::CtorApp: {
        auto ar = cx_.prog.ctor_arity(e.name);
        if (!ar || (int)e.kids.size() != *ar)
          throw CompileError("constructor '" + e.name + "' must be fully applied");
        std::vector<std::string> args;
        std::vector<std::pair<const Expr *, std::string>> defer;
        for (const auto &k : e.kids) args.push_back(arg_var(*k, defer));
        args.push_back(dest);
        atoms.push_back(mk_plain(ctor_engine(e.name), std::move(args)));
        for (auto &[sub, v] : defer) flatten_into(*sub, v);
        return;
      }
      case Expr::Kind::Infix: {
        std::vector<std::pair<const Expr *, std::string>> defer;
        std::string l = arg_var(*e.kids[0], defer);
        std::string r = arg_var(*e.kids[1], defer);
        atoms.push_back(mk_plain(e.name, {l, r, dest}));
        for (auto &[sub, v] : defer) flatten_into(*sub, v);
        return;
      }
      case Expr::Kind::App:
        flatten_app(e, dest);
        return;
      case Expr::Kind::Case: {
        std::string call = hoist_case(e);
        // the hoisted atom was emitted with a pending result slot `dest`
        atoms.back().args.push_back(dest);
        (void)call;
        return;
      }
      case Expr::Kind::Let: {
        for (size_t i = 0; i + 1 < e.kids.size(); ++i) {
          std::string v = fresh();
          flatten_into(*e.kids[i], v);
          env_save_.push_back({e.let_names[i], env.count(e.let_names[i])
                                                   ? std::optional<std::string>(env[e.let_names[i]])
                                                   : std::nullopt});
          env[e.let_names[i]] = v;
        }
        flatten_into(*e.kids.back(), dest);
        for (size_t i = 0; i + 1 < e.kids.size(); ++i) {
          auto [name, old] = env_save_.back();
          env_save_.pop_back();
          if (old) env[name] = *old;
          else env.erase(name);
        }
        return;
      }
      default:
        throw CompileError("constraint expression in functional position");
    }
  }

  void flatten_constraint(const Expr &e) {
    switch (e.kind) {
      case Expr::Kind::Conjunction:
        for (const auto &k : e.kids) flatten_constraint(*k);
        return;
      case Expr::Kind::With:
        for (const auto &v : e.with_vars) {
          std::string lv = fresh();
          env[v] = lv;
        }
        flatten_constraint(*e.kids[0]);
        return;
      case Expr::Kind::Equality: {
        const Expr &l = *e.kids[0];
        const Expr &r = *e.kids[1];
        bool lvar = l.kind == Expr::Kind::Var && !cx_.comp.fn_arity.count(l.name);
        bool rvar = r.kind == Expr::Kind::Var && !cx_.comp.fn_arity.count(r.name);
        if (lvar) {
          std::string lv = var_link(l.name);
          std::string rv = value_var(r);
          atoms.push_back(mk_conn(lv, rv));
          atoms.push_back(mk_plain("success", {}));
          return;
        }
        if (rvar) {
          std::string rv = var_link(r.name);
          std::string lv = value_var(l);
          atoms.push_back(mk_conn(rv, lv));
          atoms.push_back(mk_plain("success", {}));
          return;
        }
        std::string a = value_var(l);
        std::string b = value_var(r);
        atoms.push_back(mk_plain("eq_", {a, b}));
        return;
      }
      case Expr::Kind::App: {
        // saturated constraint application
        int n = 0;
        const Expr *head = spine_head(e, n);
        if (head->kind != Expr::Kind::Var || !cx_.comp.is_constraint(head->name))
          throw CompileError("only constraint applications may appear in constraint bodies");
        int k = cx_.comp.fn_arity.at(head->name);
        if (n != k) throw CompileError("constraint '" + head->name + "' must be saturated");
        std::vector<const Expr *> args;
        spine_args(e, args);
        std::vector<std::string> links;
        for (const Expr *a : args) links.push_back(value_var(*a));
        atoms.push_back(mk_plain(head->name, std::move(links)));
        return;
      }
      case Expr::Kind::Case: {
        hoist_case(e);  // constraint case: no result slot
        return;
      }
      case Expr::Kind::Var: {
        // bare application of a zero-argument constraint
        if (cx_.comp.is_constraint(e.name) && cx_.comp.fn_arity.at(e.name) == 0) {
          atoms.push_back(mk_plain(e.name, {}));
          return;
        }
        throw CompileError("unexpected variable '" + e.name + "' as a constraint");
      }
      default:
        throw CompileError("unsupported constraint body form");
    }
  }

  std::string var_link(const std::string &name) {
    auto it = env.find(name);
    if (it != env.end()) return it->second;
    return free_link(name);
  }

 private:
  static const Expr *spine_head(const Expr &e, int &args) {
    if (e.kind == Expr::Kind::App) {
      const Expr *h = spine_head(*e.kids[0], args);
      args += static_cast<int>(e.kids.size()) - 1;
      return h;
    }
    args = 0;
    return &e;
  }
  static void spine_args(const Expr &e, std::vector<const Expr *> &out) {
    if (e.kind == Expr::Kind::App) {
      spine_args(*e.kids[0], out);
      for (size_t i = 1; i < e.kids.size(); ++i) out.push_back(e.kids[i].get());
      return;
    }
  }

  std::string free_link(const std::string &name) {
    if (!query_mode_)
      throw CompileError("unbound variable '" + name + "' in definition body");
    if (std::find(free_vars.begin(), free_vars.end(), name) == free_vars.end())
      free_vars.push_back(name);
    return name;  // materialized as a named world link
  }

  // Argument position in a root-first node: variables resolve directly,
  // integers are emitted immediately, anything else is deferred.
  std::string arg_var(const Expr &e, std::vector<std::pair<const Expr *, std::string>> &defer) {
    if (e.kind == Expr::Kind::Var) {
      auto it = env.find(e.name);
      if (it != env.end()) return it->second;
      auto ar = cx_.comp.fn_arity.find(e.name);
      if (ar != cx_.comp.fn_arity.end()) {
        std::string v = fresh();
        atoms.push_back(mk_plain(e.name, {v}));
        return v;
      }
      return free_link(e.name);
    }
    if (e.kind == Expr::Kind::IntLit) {
      std::string v = fresh();
      atoms.push_back(mk_int(e.value, v));
      return v;
    }
    std::string v = fresh();
    defer.push_back({&e, v});
    return v;
  }

  // Value of an expression, emitted immediately.
  std::string value_var(const Expr &e) {
    if (e.kind == Expr::Kind::Var) {
      auto it = env.find(e.name);
      if (it != env.end()) return it->second;
      if (!cx_.comp.fn_arity.count(e.name)) return free_link(e.name);
    }
    std::string v = fresh();
    flatten_into(e, v);
    return v;
  }

  void flatten_app(const Expr &e, const std::string &dest) {
    int n = 0;
    const Expr *head = spine_head(e, n);
    std::vector<const Expr *> args;
    spine_args(e, args);

    if (head->kind == Expr::Kind::Var && !env.count(head->name)) {
      auto it = cx_.comp.fn_arity.find(head->name);
      if (it != cx_.comp.fn_arity.end()) {
        int k = it->second;
        bool constraint = cx_.comp.is_constraint(head->name);
        if (constraint) throw CompileError("constraint application in functional position");
        if (query_mode_ && n == k && k > 0) {
          // direct call: root first, then argument subtrees
          std::vector<std::string> links;
          std::vector<std::pair<const Expr *, std::string>> defer;
          for (const Expr *a : args) links.push_back(arg_var(*a, defer));
          links.push_back(dest);
          atoms.push_back(mk_plain(head->name, std::move(links)));
          for (auto &[sub, v] : defer) flatten_into(*sub, v);
          return;
        }
        if (query_mode_ && n > k && k > 0) {
          // saturate directly, then apply the remainder
          std::vector<std::string> links;
          std::vector<std::pair<const Expr *, std::string>> defer;
          for (int i = 0; i < k; ++i) links.push_back(arg_var(*args[i], defer));
          std::string mid = fresh();
          links.push_back(mid);
          atoms.push_back(mk_plain(head->name, std::move(links)));
          for (auto &[sub, v] : defer) flatten_into(*sub, v);
          chain_apps(mid, args, k, dest);
          return;
        }
        // application-atom chain: argument subtrees first, then the chain
        std::vector<std::string> argv;
        for (const Expr *a : args) {
          std::vector<std::pair<const Expr *, std::string>> defer;
          std::string v = arg_var(*a, defer);
          for (auto &[sub, vv] : defer) flatten_into(*sub, vv);
          argv.push_back(v);
        }
        std::string h = fresh();
        atoms.push_back(mk_plain(head->name, {h}));  // function symbol / zero-arg call
        std::string cur = h;
        for (size_t i = 0; i < argv.size(); ++i) {
          std::string next = (i + 1 == argv.size()) ? dest : fresh();
          atoms.push_back(mk_plain("app", {cur, argv[i], next}));
          cur = next;
        }
        if (argv.empty()) atoms.push_back(mk_conn(h, dest));
        return;
      }
    }
    // unknown or higher-order head: evaluate it, then chain
    std::vector<std::string> argv;
    for (const Expr *a : args) {
      std::vector<std::pair<const Expr *, std::string>> defer;
      std::string v = arg_var(*a, defer);
      for (auto &[sub, vv] : defer) flatten_into(*sub, vv);
      argv.push_back(v);
    }
    std::string hv;
    {
      std::vector<std::pair<const Expr *, std::string>> defer;
      hv = arg_var(*head, defer);
      for (auto &[sub, vv] : defer) flatten_into(*sub, vv);
    }
    chain_apps(hv, args, 0, dest, &argv);
  }

  void chain_apps(const std::string &from, const std::vector<const Expr *> &args, int start,
                  const std::string &dest, const std::vector<std::string> *precomputed = nullptr) {
    std::string cur = from;
    for (size_t i = start; i < args.size(); ++i) {
      std::string av;
      if (precomputed) {
        av = (*precomputed)[i];
      } else {
        std::vector<std::pair<const Expr *, std::string>> defer;
        av = arg_var(*args[i], defer);
        for (auto &[sub, vv] : defer) flatten_into(*sub, vv);
      }
      std::string next = (i + 1 == args.size()) ? dest : fresh();
      atoms.push_back(mk_plain("app", {cur, av, next}));
      cur = next;
    }
  }

  // Hoists a nested case into an auxiliary definition; emits the call atom
  // (without its result slot, which the caller appends for functions).
  std::string hoist_case(const Expr &e) {
    // captured variables: the case's free variables in scope order
    std::vector<std::string> captured;
    std::set<std::string> seen;
    std::function<void(const Expr &, std::set<std::string>)> walk =
        [&](const Expr &x, std::set<std::string> bound) {
          if (x.kind == Expr::Kind::Var) {
            if (!bound.count(x.name) && !cx_.comp.fn_arity.count(x.name) && !seen.count(x.name) &&
                (env.count(x.name) || query_mode_)) {
              seen.insert(x.name);
              captured.push_back(x.name);
            }
            return;
          }
          if (x.kind == Expr::Kind::Case) {
            walk(*x.kids[0], bound);
            for (const auto &br : x.branches) {
              auto b2 = bound;
              if (br.pat.kind == ccfl::Pattern::Kind::Var) b2.insert(br.pat.name);
              for (const auto &v : br.pat.binders) b2.insert(v);
              walk(*br.body, b2);
            }
            return;
          }
          if (x.kind == Expr::Kind::With) {
            auto b2 = bound;
            for (const auto &v : x.with_vars) b2.insert(v);
            walk(*x.kids[0], b2);
            return;
          }
          if (x.kind == Expr::Kind::Let) {
            auto b2 = bound;
            for (size_t i = 0; i + 1 < x.kids.size(); ++i) {
              walk(*x.kids[i], b2);
              b2.insert(x.let_names[i]);
            }
            walk(*x.kids.back(), b2);
            return;
          }
          for (const auto &k : x.kids) walk(*k, bound);
        };

    const Expr &scrut = *e.kids[0];
    std::string scrut_param;
    if (scrut.kind == Expr::Kind::Var && env.count(scrut.name)) {
      scrut_param = scrut.name;
      seen.insert(scrut.name);
    } else {
      scrut_param = "s_";
    }
    for (const auto &br : e.branches) {
      std::set<std::string> bound{scrut_param};
      if (br.pat.kind == ccfl::Pattern::Kind::Var) bound.insert(br.pat.name);
      for (const auto &v : br.pat.binders) bound.insert(v);
      walk(*br.body, bound);
    }

    ccfl::FunDef aux;
    aux.name = "case" + std::to_string(cx_.aux_counter++) + "_";
    aux.params.push_back(scrut_param);
    for (const auto &v : captured) aux.params.push_back(v);
    auto body = std::make_shared<Expr>(e);
    body->kids[0] = ccfl::make_var(scrut_param);
    aux.body = body;
    aux.is_constraint = constraint_branches(e);
    cx_.aux_queue.push_back(aux);
    cx_.comp.fn_arity[aux.name] = static_cast<int>(aux.params.size());
    if (aux.is_constraint) cx_.comp.constraint_fns.insert(aux.name);

    std::vector<std::string> links;
    links.push_back(scrut.kind == Expr::Kind::Var && env.count(scrut.name) ? env[scrut.name]
                                                                           : value_var(scrut));
    for (const auto &v : captured) links.push_back(var_link(v));
    atoms.push_back(mk_plain(aux.name, std::move(links)));
    return aux.name;
  }

  static bool constraint_branches(const Expr &e) {
    for (const auto &br : e.branches) {
      const Expr &b = *br.body;
      if (b.kind == Expr::Kind::Equality || b.kind == Expr::Kind::Conjunction ||
          b.kind == Expr::Kind::With)
        return true;
    }
    return false;
  }

  CompileCtx &cx_;
  bool query_mode_;
  int fresh_n_ = 0;
  std::set<std::string> taken_;
  std::vector<std::pair<std::string, std::optional<std::string>>> env_save_;
};

// ---------------------------------------------------------------------------
// Definition compilation

ExprPtr subst_literal(const ExprPtr &e, const std::string &var, int64_t value) {
  if (e->kind == Expr::Kind::Var && e->name == var) return ccfl::make_int(value);
  auto out = std::make_shared<Expr>(*e);
  // binder shadowing
  auto shadowed = [&](const std::vector<std::string> &names) {
    return std::find(names.begin(), names.end(), var) != names.end();
  };
  switch (e->kind) {
    case Expr::Kind::Case: {
      out->kids[0] = subst_literal(e->kids[0], var, value);
      for (size_t i = 0; i < e->branches.size(); ++i) {
        const auto &pat = e->branches[i].pat;
        bool sh = (pat.kind == ccfl::Pattern::Kind::Var && pat.name == var) ||
                  shadowed(pat.binders);
        if (!sh) out->branches[i].body = subst_literal(e->branches[i].body, var, value);
      }
      return out;
    }
    case Expr::Kind::Let: {
      bool sh = false;
      for (size_t i = 0; i + 1 < e->kids.size(); ++i) {
        if (!sh) out->kids[i] = subst_literal(e->kids[i], var, value);
        if (e->let_names[i] == var) sh = true;
      }
      if (!sh) out->kids.back() = subst_literal(e->kids.back(), var, value);
      return out;
    }
    case Expr::Kind::With:
      if (!shadowed(e->with_vars)) out->kids[0] = subst_literal(e->kids[0], var, value);
      return out;
    default:
      for (size_t i = 0; i < e->kids.size(); ++i)
        out->kids[i] = subst_literal(e->kids[i], var, value);
      return out;
  }
}

void compile_def(CompileCtx &cx, const ccfl::FunDef &d) {
  Compiled &comp = cx.comp;
  bool constraint = comp.is_constraint(d.name);

  auto make_head = [&](Flattener &fl) {
    std::vector<std::string> links;
    std::set<std::string> used;
    for (const auto &p : d.params) {
      std::string l = param_link(p);
      while (used.count(l)) l = l + "_";
      used.insert(l);
      fl.reserve(l);
      fl.env[p] = l;
      links.push_back(l);
    }
    return links;
  };

  auto emit_rule = [&](int idx, Flattener &fl, std::vector<std::string> head_links,
                       std::vector<AtomTemplate> patterns, Guard guard) {
    FlatRule fr;
    fr.name = d.name + "_" + std::to_string(idx);
    fr.head = mk_plain(d.name, std::move(head_links));
    fr.patterns = std::move(patterns);
    fr.guard = std::move(guard);
    fr.body = std::move(fl.atoms);
    comp.rules.push_back(std::move(fr));
  };

  if (!d.alts.empty()) {
    int idx = 0;
    for (const auto &alt : d.alts) {
      Flattener fl(cx, false);
      auto head_links = make_head(fl);
      std::vector<AtomTemplate> patterns;
      std::string scrut_link = fl.env.at(alt.ask_var);
      std::vector<std::string> pargs;
      for (const auto &b : alt.ask_binders) {
        std::string l = param_link(b);
        fl.reserve(l);
        fl.env[b] = l;
        pargs.push_back(l);
      }
      pargs.push_back(scrut_link);
      patterns.push_back(mk_plain(ctor_engine(alt.ask_ctor), std::move(pargs)));
      fl.flatten_constraint(*alt.body);
      emit_rule(idx++, fl, head_links, std::move(patterns), Guard{});
    }
    return;
  }

  // Top-level case over a parameter becomes per-branch rules.
  const Expr *body = d.body.get();
  bool top_case = body->kind == Expr::Kind::Case &&
                  body->kids[0]->kind == Expr::Kind::Var &&
                  std::find(d.params.begin(), d.params.end(), body->kids[0]->name) !=
                      d.params.end();
  if (top_case) {
    std::vector<int64_t> earlier_literals;
    int idx = 0;
    for (const auto &br : body->branches) {
      Flattener fl(cx, false);
      auto head_links = make_head(fl);
      std::string result;
      if (!constraint) {
        result = fl.fresh();
        head_links.push_back(result);
      }
      std::string scrut_link = fl.env.at(body->kids[0]->name);
      std::vector<AtomTemplate> patterns;
      Guard guard;
      ExprPtr branch_body = br.body;
      switch (br.pat.kind) {
        case ccfl::Pattern::Kind::Int: {
          for (int64_t k : earlier_literals)
            guard.conjuncts.push_back(
                {CmpOp::Ne, IntExpr::variable(scrut_link), IntExpr::constant(k)});
          guard.conjuncts.push_back(
              {CmpOp::Eq, IntExpr::variable(scrut_link), IntExpr::constant(br.pat.value)});
          branch_body = subst_literal(branch_body, body->kids[0]->name, br.pat.value);
          earlier_literals.push_back(br.pat.value);
          break;
        }
        case ccfl::Pattern::Kind::Var: {
          for (int64_t k : earlier_literals)
            guard.conjuncts.push_back(
                {CmpOp::Ne, IntExpr::variable(scrut_link), IntExpr::constant(k)});
          fl.env[br.pat.name] = scrut_link;
          break;
        }
        case ccfl::Pattern::Kind::Ctor: {
          if (!earlier_literals.empty())
            throw CompileError("constructor branch after literal branches in '" + d.name + "'");
          std::vector<std::string> pargs;
          for (const auto &b : br.pat.binders) {
            std::string l = param_link(b);
            fl.reserve(l);
            fl.env[b] = l;
            pargs.push_back(l);
          }
          pargs.push_back(scrut_link);
          patterns.push_back(mk_plain(ctor_engine(br.pat.name), std::move(pargs)));
          // A body mentioning the scrutinee itself needs the constructor
          // rebuilt, since the pattern consumed it.
          std::function<bool(const Expr &)> uses_scrut = [&](const Expr &x) {
            if (x.kind == Expr::Kind::Var) return x.name == body->kids[0]->name;
            for (const auto &k : x.kids)
              if (uses_scrut(*k)) return true;
            for (const auto &b2 : x.branches)
              if (uses_scrut(*b2.body)) return true;
            return false;
          };
          if (uses_scrut(*branch_body)) {
            std::string rebuilt = fl.fresh();
            std::vector<std::string> cargs;
            for (const auto &b : br.pat.binders) cargs.push_back(fl.env.at(b));
            cargs.push_back(rebuilt);
            fl.atoms.push_back(mk_plain(ctor_engine(br.pat.name), std::move(cargs)));
            fl.env[body->kids[0]->name] = rebuilt;
          }
          break;
        }
      }
      if (constraint)
        fl.flatten_constraint(*branch_body);
      else
        fl.flatten_into(*branch_body, result);
      emit_rule(idx++, fl, head_links, std::move(patterns), std::move(guard));
    }
    return;
  }

  Flattener fl(cx, false);
  auto head_links = make_head(fl);
  if (constraint) {
    fl.flatten_constraint(*d.body);
  } else {
    std::string result = fl.fresh();
    head_links.push_back(result);
    fl.flatten_into(*d.body, result);
  }
  emit_rule(0, fl, head_links, {}, Guard{});
}

// ---------------------------------------------------------------------------
// Application rule schema

void gen_app_rules(Compiled &comp, const std::string &f, int k) {
  auto vnames = [](int n, const std::string &prefix) {
    std::vector<std::string> v;
    for (int i = 1; i <= n; ++i) v.push_back(prefix + std::to_string(i));
    return v;
  };
  // app(f, V1..Vj, R) :- f(V1..Vj, R).   for 0 <= j <= k
  for (int j = 0; j <= k; ++j) {
    FlatRule fr;
    fr.name = f + "_app" + std::to_string(j);
    fr.is_app_rule = true;
    auto vs = vnames(j, "V");
    std::vector<std::string> app_args{"H"};
    for (const auto &v : vs) app_args.push_back(v);
    app_args.push_back("R");
    fr.head = mk_plain("app", std::move(app_args));
    fr.patterns.push_back(mk_plain(f, {"H"}));
    std::vector<std::string> call_args(vs);
    call_args.push_back("R");
    fr.body.push_back(mk_plain(f, std::move(call_args)));
    comp.rules.push_back(std::move(fr));
  }
  // app(H, W, R), f(V1..Vj, H) :- f(V1..Vj, W, R).   for 1 <= j < k
  for (int j = 1; j < k; ++j) {
    FlatRule fr;
    fr.name = f + "_pap" + std::to_string(j);
    fr.is_app_rule = true;
    fr.head = mk_plain("app", {"H", "W", "R"});
    auto vs = vnames(j, "V");
    std::vector<std::string> pap_args(vs);
    pap_args.push_back("H");
    fr.patterns.push_back(mk_plain(f, std::move(pap_args)));
    std::vector<std::string> out_args(vs);
    out_args.push_back("W");
    out_args.push_back("R");
    fr.body.push_back(mk_plain(f, std::move(out_args)));
    comp.rules.push_back(std::move(fr));
  }
}

// ---------------------------------------------------------------------------
// Static app inlining: fold statically saturated application chains

void inline_apps(std::vector<AtomTemplate> &atoms, const Compiled &comp) {
  bool changed = true;
  std::set<size_t> tried;
  while (changed) {
    changed = false;
    for (size_t i = 0; i < atoms.size(); ++i) {
      const AtomTemplate &sym = atoms[i];
      if (tried.count(i)) continue;
      if (sym.kind != AtomKind::Plain || sym.args.size() != 1) continue;
      auto ar = comp.fn_arity.find(sym.name);
      if (ar == comp.fn_arity.end() || ar->second < 1) continue;
      // follow the application chain
      std::vector<size_t> chain;
      std::set<size_t> chain_set;
      std::vector<std::string> args;
      std::string cur = sym.args[0];
      bool blocked = false;
      while (true) {
        int uses = 0;
        size_t app_idx = atoms.size();
        for (size_t j = 0; j < atoms.size(); ++j) {
          if (j == i || chain_set.count(j)) continue;  // producers of cur
          const AtomTemplate &a = atoms[j];
          for (size_t p = 0; p < a.args.size(); ++p) {
            if (a.args[p] != cur) continue;
            ++uses;
            if (a.kind == AtomKind::Plain && a.name == "app" && a.args.size() == 3 && p == 0)
              app_idx = j;
          }
        }
        if (uses != 1 || app_idx == atoms.size()) {
          blocked = chain.empty() || (int)args.size() != ar->second;
          break;
        }
        chain_set.insert(app_idx);
        chain.push_back(app_idx);
        args.push_back(atoms[app_idx].args[1]);
        cur = atoms[app_idx].args[2];
        if ((int)args.size() == ar->second) {
          blocked = false;
          break;
        }
      }
      if (blocked || (int)args.size() != ar->second) {
        tried.insert(i);
        continue;
      }
      // replace symbol + chain with a direct call
      std::vector<std::string> call_args(args);
      call_args.push_back(cur);
      AtomTemplate call = mk_plain(sym.name, std::move(call_args));
      std::set<size_t> dead(chain.begin(), chain.end());
      dead.insert(i);
      std::vector<AtomTemplate> next;
      bool inserted = false;
      for (size_t j = 0; j < atoms.size(); ++j) {
        if (dead.count(j)) {
          if (!inserted) {
            next.push_back(call);
            inserted = true;
          }
          continue;
        }
        next.push_back(atoms[j]);
      }
      atoms = std::move(next);
      tried.clear();
      changed = true;
      break;
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<AtomTemplate> flatten_expr(const ccfl::Program &p, const Compiled &c,
                                       const ccfl::Expr &e, const std::string &result_var) {
  Compiled tmp = c;
  CompileCtx cx{p, tmp, {}, 1000};
  Flattener fl(cx, true);
  fl.reserve(result_var);
  fl.flatten_into(e, result_var);
  while (!cx.aux_queue.empty()) {
    ccfl::FunDef d = cx.aux_queue.front();
    cx.aux_queue.erase(cx.aux_queue.begin());
    compile_def(cx, d);
  }
  return fl.atoms;
}

Compiled compile_flat(const ccfl::Program &p, const CompileOptions &opts) {
  Compiled comp;
  for (const auto &d : p.datas)
    for (const auto &ct : d.ctors) {
      comp.ctor_arity[ctor_engine(ct.name)] = ct.arity;
      comp.ctor_display[ctor_engine(ct.name)] = ct.name;
    }
  comp.ctor_arity["nil"] = 0;
  comp.ctor_arity["cons"] = 2;
  comp.ctor_display["nil"] = "Nil";
  comp.ctor_display["cons"] = "Cons";

  for (const auto &d : p.defs) {
    comp.fn_arity[d.name] = static_cast<int>(d.params.size());
    if (d.is_constraint) comp.constraint_fns.insert(d.name);
  }

  CompileCtx cx{p, comp, {}, 0};
  for (const auto &d : p.defs) compile_def(cx, d);
  while (!cx.aux_queue.empty()) {
    ccfl::FunDef d = cx.aux_queue.front();
    cx.aux_queue.erase(cx.aux_queue.begin());
    compile_def(cx, d);
  }

  // Application rules for user functions (not constraints; arity >= 1).
  for (const auto &d : p.defs) {
    if (d.is_constraint) continue;
    int k = static_cast<int>(d.params.size());
    if (k >= 1) gen_app_rules(comp, d.name, k);
  }

  if (opts.inline_app)
    for (auto &r : comp.rules)
      if (!r.is_app_rule) inline_apps(r.body, comp);
  return comp;
}

FlatQuery flatten_query(const ccfl::Program &p, Compiled &c, const ccfl::Query &q) {
  CompileCtx cx{p, c, {}, 1000};
  Flattener fl(cx, true);
  FlatQuery out;
  out.is_constraint = q.is_constraint;
  if (q.is_constraint) {
    fl.flatten_constraint(*q.expr);
  } else {
    out.result_var = k_result_link;
    fl.reserve(out.result_var);
    fl.flatten_into(*q.expr, out.result_var);
  }
  // case expressions inside the query hoist auxiliary definitions
  while (!cx.aux_queue.empty()) {
    ccfl::FunDef d = cx.aux_queue.front();
    cx.aux_queue.erase(cx.aux_queue.begin());
    compile_def(cx, d);
  }
  out.atoms = std::move(fl.atoms);
  out.free_vars = fl.free_vars;
  inline_apps(out.atoms, c);
  return out;
}

// ---------------------------------------------------------------------------
// Grouping for the strategy transformations

namespace {

struct Groups {
  struct G {
    std::vector<size_t> atoms;
    std::set<size_t> deps;  // direct producer groups
    bool wrapped = false;
  };
  std::vector<G> groups;
  size_t root = 0;
};

bool is_redex_atom(const AtomTemplate &a, const Compiled &c) {
  if (a.kind != AtomKind::Plain) return false;
  if (a.name == "app" && a.args.size() >= 2) return true;
  if (a.name == "eq_") return true;
  if ((a.name == "+" || a.name == "-" || a.name == "*") && a.args.size() == 3) return true;
  auto it = c.fn_arity.find(a.name);
  if (it != c.fn_arity.end()) {
    size_t call_arity = static_cast<size_t>(it->second) + (c.is_constraint(a.name) ? 0 : 1);
    return a.args.size() == call_arity;
  }
  return false;
}

bool atom_has_root(const AtomTemplate &a, const Compiled &c) {
  if (a.kind == AtomKind::Connector) return false;
  if (a.name == "eq_" || a.name == "success" || a.name == "fail") return false;
  if (c.is_constraint(a.name)) return false;
  return !a.args.empty();
}

Groups analyze_groups(const std::vector<AtomTemplate> &body, const Compiled &c,
                      const std::string &result_var, const std::set<std::string> &lhs_vars,
                      const std::set<std::string> &value_vars) {
  Groups out;
  size_t n = body.size();
  std::vector<int> group_of(n, -1);

  // producer map: variable -> atom index rooted at it
  std::map<std::string, size_t> producer;
  for (size_t i = 0; i < n; ++i)
    if (atom_has_root(body[i], c)) producer[body[i].args.back()] = i;

  // one group per redex
  for (size_t i = 0; i < n; ++i) {
    if (is_redex_atom(body[i], c)) {
      group_of[i] = static_cast<int>(out.groups.size());
      out.groups.push_back({{i}, {}, false});
    }
  }
  // data atoms ride with their first assigned consumer
  bool progress = true;
  while (progress) {
    progress = false;
    for (size_t i = 0; i < n; ++i) {
      if (group_of[i] != -1 || body[i].kind == AtomKind::Connector) continue;
      if (is_redex_atom(body[i], c)) continue;
      if (!atom_has_root(body[i], c)) continue;
      const std::string &root = body[i].args.back();
      for (size_t j = 0; j < n && group_of[i] == -1; ++j) {
        if (j == i || group_of[j] == -1) continue;
        size_t limit = body[j].args.size() - (atom_has_root(body[j], c) ? 1 : 0);
        for (size_t pidx = 0; pidx < limit; ++pidx) {
          if (body[j].args[pidx] == root) {
            group_of[i] = group_of[j];
            out.groups[group_of[j]].atoms.push_back(i);
            progress = true;
            break;
          }
        }
      }
    }
  }
  // the root group produces the result; leftovers join it
  int root_group = -1;
  if (!result_var.empty()) {
    auto it = producer.find(result_var);
    if (it != producer.end() && group_of[it->second] != -1) root_group = group_of[it->second];
  }
  if (root_group == -1) {
    out.groups.push_back({{}, {}, false});
    root_group = static_cast<int>(out.groups.size()) - 1;
  }
  for (size_t i = 0; i < n; ++i) {
    if (group_of[i] == -1) {
      group_of[i] = root_group;
      out.groups[root_group].atoms.push_back(i);
    }
  }
  out.root = static_cast<size_t>(root_group);

  for (size_t gi = 0; gi < out.groups.size(); ++gi) {
    for (size_t i : out.groups[gi].atoms) {
      const auto &a = body[i];
      for (size_t pidx = 0; pidx < a.args.size(); ++pidx) {
        if (atom_has_root(a, c) && pidx == a.args.size() - 1) continue;  // own root
        auto it = producer.find(a.args[pidx]);
        if (it == producer.end()) continue;
        int pg = group_of[it->second];
        if (pg != -1 && static_cast<size_t>(pg) != gi)
          out.groups[gi].deps.insert(static_cast<size_t>(pg));
      }
    }
  }

  // wrappability: a group touching non-value lhs data must stay local
  std::vector<bool> unwr(out.groups.size(), false);
  for (size_t gi = 0; gi < out.groups.size(); ++gi) {
    for (size_t i : out.groups[gi].atoms)
      for (const auto &v : body[i].args) {
        if (lhs_vars.count(v) && !value_vars.count(v)) unwr[gi] = true;
      }
  }
  unwr[out.root] = true;
  bool fixp = false;
  while (!fixp) {
    fixp = true;
    for (size_t gi = 0; gi < out.groups.size(); ++gi) {
      if (unwr[gi]) continue;
      for (size_t d : out.groups[gi].deps)
        if (unwr[d] && d != out.root) {
          unwr[gi] = true;
          fixp = false;
        }
    }
  }
  // merge unwrappable groups into the root
  for (size_t gi = 0; gi < out.groups.size(); ++gi) {
    if (gi == out.root || !unwr[gi]) continue;
    for (size_t i : out.groups[gi].atoms) {
      group_of[i] = static_cast<int>(out.root);
      out.groups[out.root].atoms.push_back(i);
    }
    out.groups[gi].atoms.clear();
  }
  // drop empty groups, renumber
  Groups final;
  std::map<size_t, size_t> renum;
  for (size_t gi = 0; gi < out.groups.size(); ++gi) {
    if (out.groups[gi].atoms.empty() && gi != out.root) continue;
    renum[gi] = final.groups.size();
    final.groups.push_back({out.groups[gi].atoms, {}, gi != out.root});
  }
  final.root = renum[out.root];
  // recompute deps between final groups
  std::vector<int> fgroup(n, -1);
  for (size_t gi = 0; gi < final.groups.size(); ++gi)
    for (size_t i : final.groups[gi].atoms) fgroup[i] = static_cast<int>(gi);
  for (size_t gi = 0; gi < final.groups.size(); ++gi) {
    for (size_t i : final.groups[gi].atoms) {
      const auto &a = body[i];
      for (size_t pidx = 0; pidx < a.args.size(); ++pidx) {
        const auto &v = a.args[pidx];
        if (atom_has_root(a, c) && pidx == a.args.size() - 1) continue;  // own root
        auto it = producer.find(v);
        if (it == producer.end()) continue;
        int pg = fgroup[it->second];
        if (pg != -1 && static_cast<size_t>(pg) != gi)
          final.groups[gi].deps.insert(static_cast<size_t>(pg));
      }
    }
  }
  // sort atom lists to preserve emission order
  for (auto &g : final.groups) std::sort(g.atoms.begin(), g.atoms.end());
  return final;
}

std::set<std::string> template_vars(const std::vector<AtomTemplate> &atoms) {
  std::set<std::string> out;
  for (const auto &a : atoms)
    for (const auto &v : a.args) out.insert(v);
  return out;
}

ProcessTemplate proc_of_atoms(std::vector<AtomTemplate> atoms) {
  ProcessTemplate t;
  t.atoms = std::move(atoms);
  return t;
}

CellTemplate cell_of(ProcessTemplate t) {
  CellTemplate c;
  c.body = std::make_shared<ProcessTemplate>(std::move(t));
  return c;
}

void add_counter(ProcessTemplate &t, int64_t value, int &fresh_counter) {
  std::string v = "C" + std::to_string(fresh_counter++) + "_";
  t.atoms.push_back(mk_plain("inLinks_", {v}));
  t.atoms.push_back(mk_int(value, v));
}

std::vector<AtomTemplate> pick(const std::vector<AtomTemplate> &body,
                               const std::vector<size_t> &idx) {
  std::vector<AtomTemplate> out;
  for (size_t i : idx) out.push_back(body[i]);
  return out;
}

}  // namespace

std::vector<RulePtr> rules_flat(const Compiled &c) {
  std::vector<RulePtr> out;
  for (const FlatRule &fr : c.rules) {
    auto r = std::make_shared<RewriteRule>();
    r->name = fr.name;
    r->guard = fr.guard;
    r->shared_value_patterns = fr.is_app_rule;
    r->lhs.atoms.push_back(fr.head);
    for (const auto &p : fr.patterns) r->lhs.atoms.push_back(p);
    r->rhs.atoms = fr.body;
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

// Call-by-value form: {head, $p} :- {body, $p} for single-group bodies;
// multi-group bodies spread over cells with inLinks counters.
RulePtr build_cbv_rule(const FlatRule &fr, const Compiled &c) {
  auto r = std::make_shared<RewriteRule>();
  r->name = fr.name;
  r->guard = fr.guard;
  r->shared_value_patterns = fr.is_app_rule;

  std::vector<AtomTemplate> lhs_atoms{fr.head};
  for (const auto &p : fr.patterns) lhs_atoms.push_back(p);
  std::set<std::string> lhs_vars = template_vars(lhs_atoms);
  std::set<std::string> value_vars;
  for (const auto &v : fr.guard.vars()) value_vars.insert(v);

  std::string result_var;
  bool constraint = c.is_constraint(fr.head.name);
  if (!constraint && fr.head.name != "app") result_var = fr.head.args.back();
  if (fr.head.name == "app") result_var = fr.head.args.back();

  Groups g = constraint
                 ? Groups{{Groups::G{{}, {}, false}}, 0}
                 : analyze_groups(fr.body, c, result_var, lhs_vars, value_vars);
  bool multi = false;
  if (!constraint)
    for (const auto &gg : g.groups)
      if (gg.wrapped) multi = true;

  int fresh_counter = 0;
  if (!multi) {
    ProcessTemplate lhs;
    lhs.atoms = lhs_atoms;
    lhs.proc_contexts = {"p"};
    r->lhs.cells.push_back(cell_of(std::move(lhs)));
    ProcessTemplate rhs;
    rhs.atoms = fr.body;
    rhs.proc_contexts = {"p"};
    r->rhs.cells.push_back(cell_of(std::move(rhs)));
    return r;
  }

  ProcessTemplate lhs;
  lhs.atoms = lhs_atoms;
  std::string cv = "C0_";
  lhs.atoms.push_back(mk_plain("inLinks_", {cv}));
  lhs.atoms.push_back(mk_int(0, cv));
  fresh_counter = 1;
  lhs.proc_contexts = {"p"};
  r->lhs.cells.push_back(cell_of(std::move(lhs)));

  // root cell: protected, carries $p and the dependency counter
  {
    ProcessTemplate inner = proc_of_atoms(pick(fr.body, g.groups[g.root].atoms));
    inner.proc_contexts = {"p"};
    add_counter(inner, static_cast<int64_t>(g.groups[g.root].deps.size()), fresh_counter);
    ProcessTemplate wrap;
    wrap.cells.push_back(cell_of(std::move(inner)));
    r->rhs.cells.push_back(cell_of(std::move(wrap)));
  }
  for (size_t gi = 0; gi < g.groups.size(); ++gi) {
    if (gi == g.root) continue;
    const auto &gg = g.groups[gi];
    ProcessTemplate inner = proc_of_atoms(pick(fr.body, gg.atoms));
    add_counter(inner, static_cast<int64_t>(gg.deps.size()), fresh_counter);
    if (gg.deps.empty()) {
      r->rhs.cells.push_back(cell_of(std::move(inner)));
    } else {
      ProcessTemplate wrap;
      wrap.cells.push_back(cell_of(std::move(inner)));
      r->rhs.cells.push_back(cell_of(std::move(wrap)));
    }
  }
  return r;
}

RulePtr build_outermost_bare(const FlatRule &fr, const Compiled &c) {
  auto r = std::make_shared<RewriteRule>();
  r->name = fr.name;
  r->guard = fr.guard;
  r->shared_value_patterns = fr.is_app_rule;
  r->lhs.atoms.push_back(fr.head);
  for (const auto &p : fr.patterns) r->lhs.atoms.push_back(p);

  std::set<std::string> lhs_vars = template_vars(r->lhs.atoms);
  std::set<std::string> value_vars;
  for (const auto &v : fr.guard.vars()) value_vars.insert(v);
  bool constraint = c.is_constraint(fr.head.name);
  std::string result_var;
  if (!constraint) result_var = fr.head.args.back();

  Groups g = constraint ? Groups{{Groups::G{{}, {}, false}}, 0}
                        : analyze_groups(fr.body, c, result_var, lhs_vars, value_vars);
  if (constraint) {
    r->rhs.atoms = fr.body;
    return r;
  }
  r->rhs.atoms = pick(fr.body, g.groups[g.root].atoms);
  for (size_t gi = 0; gi < g.groups.size(); ++gi) {
    if (gi == g.root) continue;
    ProcessTemplate inner = proc_of_atoms(pick(fr.body, g.groups[gi].atoms));
    ProcessTemplate wrap;
    wrap.cells.push_back(cell_of(std::move(inner)));
    r->rhs.cells.push_back(cell_of(std::move(wrap)));
  }
  return r;
}

// One-step variant: fires on a lifted cell, performs the reduction, and
// re-protects the continuation.
RulePtr build_outermost_variant(const FlatRule &fr, const Compiled &c) {
  auto r = std::make_shared<RewriteRule>();
  r->name = fr.name + "'";
  r->guard = fr.guard;
  r->shared_value_patterns = fr.is_app_rule;
  ProcessTemplate lhs;
  lhs.atoms.push_back(fr.head);
  for (const auto &p : fr.patterns) lhs.atoms.push_back(p);
  lhs.proc_contexts = {"p"};
  std::set<std::string> lhs_vars = template_vars(lhs.atoms);
  std::set<std::string> value_vars;
  for (const auto &v : fr.guard.vars()) value_vars.insert(v);
  r->lhs.cells.push_back(cell_of(std::move(lhs)));

  bool constraint = c.is_constraint(fr.head.name);
  std::string result_var;
  if (!constraint) result_var = fr.head.args.back();
  Groups g = constraint ? Groups{{Groups::G{{}, {}, false}}, 0}
                        : analyze_groups(fr.body, c, result_var, lhs_vars, value_vars);

  {
    ProcessTemplate inner = proc_of_atoms(pick(fr.body, g.groups[g.root].atoms));
    inner.proc_contexts = {"p"};
    ProcessTemplate wrap;
    wrap.cells.push_back(cell_of(std::move(inner)));
    r->rhs.cells.push_back(cell_of(std::move(wrap)));
  }
  for (size_t gi = 0; gi < g.groups.size(); ++gi) {
    if (gi == g.root) continue;
    ProcessTemplate inner = proc_of_atoms(pick(fr.body, g.groups[gi].atoms));
    ProcessTemplate wrap;
    wrap.cells.push_back(cell_of(std::move(inner)));
    r->rhs.cells.push_back(cell_of(std::move(wrap)));
  }
  return r;
}

}  // namespace

std::vector<RulePtr> rules_cbv(const Compiled &c) {
  std::vector<RulePtr> out;
  for (const FlatRule &fr : c.rules) out.push_back(build_cbv_rule(fr, c));
  return out;
}

OutermostRules rules_outermost(const Compiled &c) {
  OutermostRules out;
  for (const FlatRule &fr : c.rules) {
    out.bare.push_back(build_outermost_bare(fr, c));
    out.variants.push_back(build_outermost_variant(fr, c));
  }
  return out;
}

// ---------------------------------------------------------------------------
// World construction

namespace {

struct Materializer {
  World &w;
  std::map<std::string, LinkId> links;
  const std::vector<std::string> &free_vars;

  LinkId lk(const std::string &v) {
    auto it = links.find(v);
    if (it != links.end()) return it->second;
    bool named = v == k_result_link ||
                 std::find(free_vars.begin(), free_vars.end(), v) != free_vars.end();
    LinkId l = named ? w.named_link(v) : w.new_link();
    links[v] = l;
    return l;
  }

  void add(const std::vector<AtomTemplate> &atoms, MembraneId dest) {
    for (const AtomTemplate &a : atoms) {
      std::vector<LinkId> args;
      for (const auto &v : a.args) args.push_back(lk(v));
      if (a.kind == AtomKind::IntLit) {
        w.add_atom(dest, std::to_string(a.value_expr.value), args, AtomKind::IntLit,
                   a.value_expr.value);
      } else {
        w.add_atom(dest, a.name, args, a.kind);
      }
    }
  }
};

void add_counter_atom(World &w, MembraneId m, int64_t value) {
  LinkId l = w.new_link();
  w.add_atom(m, "inLinks_", {l});
  w.add_atom(m, std::to_string(value), {l}, AtomKind::IntLit, value);
}

void register_names(World &w, const Compiled &c) {
  for (const auto &[n, a] : c.ctor_arity) {
    (void)a;
    w.ctor_names.insert(n);
  }
  for (const auto &n : c.constraint_fns) w.no_root_names.insert(n);
}

}  // namespace

World build_world(const Compiled &c, const FlatQuery &q, Strategy s) {
  World w(World::LinkMode::Relaxed);
  register_names(w, c);
  Materializer mat{w, {}, q.free_vars};

  if (s == Strategy::Nondet) {
    for (const RulePtr &r : rules_flat(c)) w.add_rule(w.root(), r);
    mat.add(q.atoms, w.root());
    w.fuse_connectors(w.root());
    return w;
  }

  std::set<std::string> lhs_vars, value_vars;
  Groups g = q.is_constraint
                 ? Groups{{Groups::G{{}, {}, false}}, 0}
                 : analyze_groups(q.atoms, c, q.result_var, lhs_vars, value_vars);
  if (q.is_constraint) {
    g.groups[0].atoms.clear();
    for (size_t i = 0; i < q.atoms.size(); ++i) g.groups[0].atoms.push_back(i);
  }

  if (s == Strategy::Cbv) {
    std::vector<RulePtr> prog = rules_cbv(c);
    for (const RulePtr &r : meta_rules(StrategyTag::Cbv).rules) w.add_rule(w.root(), r);
    for (size_t gi = 0; gi < g.groups.size(); ++gi) {
      const auto &gg = g.groups[gi];
      int64_t deps = static_cast<int64_t>(gg.deps.size());
      if (deps == 0) {
        MembraneId outer = w.new_membrane(w.root());
        for (const RulePtr &r : prog) w.add_rule(outer, r);
        MembraneId inner = w.new_membrane(outer);
        mat.add(pick(q.atoms, gg.atoms), inner);
        add_counter_atom(w, inner, 0);
      } else {
        MembraneId outer = w.new_membrane(w.root());
        MembraneId inner = w.new_membrane(outer);
        mat.add(pick(q.atoms, gg.atoms), inner);
        add_counter_atom(w, inner, deps);
      }
    }
    w.fuse_connectors(w.root());
    return w;
  }

  // Outermost: one rule set at the top level; the root group evaluates
  // there, inner groups are double-wrapped.
  OutermostRules prog = rules_outermost(c);
  for (const RulePtr &r : prog.bare) w.add_rule(w.root(), r);
  for (const RulePtr &r : meta_rules(StrategyTag::Outermost).rules) w.add_rule(w.root(), r);
  for (const RulePtr &r : prog.variants) w.add_rule(w.root(), r);
  for (size_t gi = 0; gi < g.groups.size(); ++gi) {
    const auto &gg = g.groups[gi];
    if (gi == g.root) {
      mat.add(pick(q.atoms, gg.atoms), w.root());
    } else {
      MembraneId outer = w.new_membrane(w.root());
      MembraneId inner = w.new_membrane(outer);
      mat.add(pick(q.atoms, gg.atoms), inner);
    }
  }
  w.fuse_connectors(w.root());
  return w;
}

std::string emit_lmntal(const Compiled &c, const FlatQuery &q, Strategy s) {
  std::string out;
  if (s == Strategy::Cbv) {
    out += "// reorganization rules\n";
    for (const RulePtr &r : meta_rules(StrategyTag::Cbv).rules)
      out += rule_to_text(*r) + "\n";
    out += "// program rules (copied into each computation space)\n";
    for (const RulePtr &r : rules_cbv(c)) out += rule_to_text(*r) + "\n";
  } else if (s == Strategy::Outermost) {
    out += "// program rules (evaluation level)\n";
    for (const RulePtr &r : rules_outermost(c).bare) out += rule_to_text(*r) + "\n";
    out += "// one-step variants for lifted cells\n";
    for (const RulePtr &r : rules_outermost(c).variants) out += rule_to_text(*r) + "\n";
    out += "// lift/merge rules are engine builtins: ruleC, ruleD\n";
  } else {
    for (const RulePtr &r : rules_flat(c)) out += rule_to_text(*r) + "\n";
  }
  out += "// initial world\n";
  World w = build_world(c, q, s);
  out += serialize_world(w) + "\n";
  return out;
}

}  // namespace lmncc::codegen
