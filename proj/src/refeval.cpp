#include "lmncc/refeval.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>

namespace lmncc::refeval {

namespace {

using ccfl::Expr;
using ccfl::ExprPtr;
using ccfl::Pattern;

struct Evaluator {
  const ccfl::Program &p;
  Mode mode;
  int fresh = 0;

  bool is_global(const std::string &n) const { return p.find_def(n) != nullptr; }

  // Values: integers, free variables, constructor trees of values, functions
  // referenced by name (arity > 0), and partial applications.
  bool is_value(const Expr &e) const {
    switch (e.kind) {
      case Expr::Kind::IntLit:
        return true;
      case Expr::Kind::Var: {
        const ccfl::FunDef *d = p.find_def(e.name);
        if (!d) return true;  // free variable
        return !d->params.empty();
      }
      case Expr::Kind::CtorApp:
        for (const auto &k : e.kids)
          if (!is_value(*k)) return false;
        return true;
      case Expr::Kind::App: {
        int n = 0;
        const Expr *h = spine_head(e, n);
        if (h->kind != Expr::Kind::Var) return false;
        const ccfl::FunDef *d = p.find_def(h->name);
        if (!d) return true;  // free variable applied: inert
        if (n >= (int)d->params.size()) return false;
        // partial application: a value once the given arguments are values
        std::vector<const Expr *> args;
        spine_args(e, args);
        for (const Expr *a : args)
          if (!is_value(*a)) return false;
        return true;
      }
      default:
        return false;
    }
  }

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
    if (e.kind != Expr::Kind::App) return;
    spine_args(*e.kids[0], out);
    for (size_t i = 1; i < e.kids.size(); ++i) out.push_back(e.kids[i].get());
  }

  ExprPtr substitute(const ExprPtr &e, const std::map<std::string, ExprPtr> &sub) {
    if (sub.empty()) return e;
    switch (e->kind) {
      case Expr::Kind::Var: {
        auto it = sub.find(e->name);
        return it == sub.end() ? e : it->second;
      }
      case Expr::Kind::IntLit:
        return e;
      default:
        break;
    }
    auto out = std::make_shared<Expr>(*e);
    auto minus = [&](const std::vector<std::string> &names) {
      std::map<std::string, ExprPtr> s2 = sub;
      for (const auto &n : names) s2.erase(n);
      return s2;
    };
    switch (e->kind) {
      case Expr::Kind::Case: {
        out->kids[0] = substitute(e->kids[0], sub);
        for (size_t i = 0; i < e->branches.size(); ++i) {
          std::vector<std::string> bound = e->branches[i].pat.binders;
          if (e->branches[i].pat.kind == Pattern::Kind::Var)
            bound.push_back(e->branches[i].pat.name);
          out->branches[i].body = substitute(e->branches[i].body, minus(bound));
        }
        return out;
      }
      case Expr::Kind::Let: {
        auto s2 = sub;
        for (size_t i = 0; i + 1 < e->kids.size(); ++i) {
          out->kids[i] = substitute(e->kids[i], s2);
          s2.erase(e->let_names[i]);
        }
        out->kids.back() = substitute(e->kids.back(), s2);
        return out;
      }
      case Expr::Kind::With: {
        out->kids[0] = substitute(e->kids[0], minus(e->with_vars));
        return out;
      }
      default:
        for (size_t i = 0; i < e->kids.size(); ++i) out->kids[i] = substitute(e->kids[i], sub);
        return out;
    }
  }

  // One reduction at the top of e, if possible.
  std::optional<ExprPtr> step_here(const ExprPtr &e) {
    switch (e->kind) {
      case Expr::Kind::Var: {
        const ccfl::FunDef *d = p.find_def(e->name);
        if (d && d->params.empty() && d->body) return d->body;
        return std::nullopt;
      }
      case Expr::Kind::Infix: {
        const Expr &l = *e->kids[0];
        const Expr &r = *e->kids[1];
        if (l.kind != Expr::Kind::IntLit || r.kind != Expr::Kind::IntLit) return std::nullopt;
        int64_t out = 0;
        bool ovf = false;
        if (e->name == "+") ovf = __builtin_add_overflow(l.value, r.value, &out);
        else if (e->name == "-") ovf = __builtin_sub_overflow(l.value, r.value, &out);
        else if (e->name == "*") ovf = __builtin_mul_overflow(l.value, r.value, &out);
        else return std::nullopt;
        if (ovf) throw std::runtime_error("integer overflow in reference evaluation");
        return ccfl::make_int(out);
      }
      case Expr::Kind::App: {
        int n = 0;
        const Expr *h = spine_head(*e, n);
        if (h->kind != Expr::Kind::Var) return std::nullopt;
        const ccfl::FunDef *d = p.find_def(h->name);
        if (!d || d->params.empty()) return std::nullopt;
        int k = static_cast<int>(d->params.size());
        if (n < k) return std::nullopt;
        std::vector<const Expr *> args;
        spine_args(*e, args);
        if (mode == Mode::Cbv)
          for (int i = 0; i < k; ++i)
            if (!is_value(*args[i])) return std::nullopt;
        if (!d->body) return std::nullopt;  // constraint abstraction
        std::map<std::string, ExprPtr> sub;
        for (int i = 0; i < k; ++i) sub[d->params[i]] = std::make_shared<Expr>(*args[i]);
        ExprPtr reduced = substitute(d->body, sub);
        if (n > k) {
          std::vector<ExprPtr> rest;
          for (int i = k; i < n; ++i) rest.push_back(std::make_shared<Expr>(*args[i]));
          reduced = ccfl::make_app(reduced, rest);
        }
        return reduced;
      }
      case Expr::Kind::Case: {
        const Expr &s = *e->kids[0];
        bool s_int = s.kind == Expr::Kind::IntLit;
        bool s_ctor = s.kind == Expr::Kind::CtorApp;
        if (!s_int && !s_ctor) return std::nullopt;
        if (mode == Mode::Cbv && !is_value(s)) return std::nullopt;
        for (const auto &br : e->branches) {
          switch (br.pat.kind) {
            case Pattern::Kind::Int:
              if (s_int && s.value == br.pat.value) return br.body;
              if (!s_int) return std::nullopt;  // type confusion; stay put
              break;
            case Pattern::Kind::Ctor: {
              if (!s_ctor) return std::nullopt;
              if (s.name != br.pat.name) break;
              std::map<std::string, ExprPtr> sub;
              for (size_t i = 0; i < br.pat.binders.size() && i < s.kids.size(); ++i)
                sub[br.pat.binders[i]] = s.kids[i];
              return substitute(br.body, sub);
            }
            case Pattern::Kind::Var: {
              std::map<std::string, ExprPtr> sub{{br.pat.name, e->kids[0]}};
              return substitute(br.body, sub);
            }
          }
        }
        return std::nullopt;
      }
      case Expr::Kind::Let: {
        // let bindings substitute directly; one step
        std::map<std::string, ExprPtr> sub;
        ExprPtr body = e->kids.back();
        for (size_t i = 0; i + 1 < e->kids.size(); ++i)
          sub[e->let_names[i]] = substitute(e->kids[i], sub);
        return substitute(body, sub);
      }
      default:
        return std::nullopt;
    }
  }

  // Leftmost-innermost: reduce inside subterms first.
  std::optional<ExprPtr> step_cbv(const ExprPtr &e) {
    for (size_t i = 0; i < e->kids.size(); ++i) {
      if (auto r = step_cbv(e->kids[i])) {
        auto out = std::make_shared<Expr>(*e);
        out->kids[i] = *r;
        return out;
      }
    }
    if (e->kind == Expr::Kind::Case) {
      // branches are not evaluated until selected; the scrutinee was kids[0]
    }
    return step_here(e);
  }

  // Leftmost-outermost: reduce the topmost redex; descend only into needed
  // positions, and below constructors for full normal forms.
  std::optional<ExprPtr> step_cbn(const ExprPtr &e) {
    if (auto r = step_here(e)) return r;
    switch (e->kind) {
      case Expr::Kind::Infix: {
        for (size_t i = 0; i < 2; ++i) {
          if (auto r = step_cbn(e->kids[i])) {
            auto out = std::make_shared<Expr>(*e);
            out->kids[i] = *r;
            return out;
          }
        }
        return std::nullopt;
      }
      case Expr::Kind::Case: {
        if (auto r = step_cbn(e->kids[0])) {
          auto out = std::make_shared<Expr>(*e);
          out->kids[0] = *r;
          return out;
        }
        return std::nullopt;
      }
      case Expr::Kind::CtorApp: {
        for (size_t i = 0; i < e->kids.size(); ++i) {
          if (auto r = step_cbn(e->kids[i])) {
            auto out = std::make_shared<Expr>(*e);
            out->kids[i] = *r;
            return out;
          }
        }
        return std::nullopt;
      }
      case Expr::Kind::App: {
        // head not a known saturated function: descend head, then arguments
        for (size_t i = 0; i < e->kids.size(); ++i) {
          if (auto r = step_cbn(e->kids[i])) {
            auto out = std::make_shared<Expr>(*e);
            out->kids[i] = *r;
            return out;
          }
        }
        return std::nullopt;
      }
      default:
        return std::nullopt;
    }
  }
};

}  // namespace

bool is_ground_value(const ccfl::Expr &e) {
  if (e.kind == Expr::Kind::IntLit) return true;
  if (e.kind == Expr::Kind::CtorApp) {
    for (const auto &k : e.kids)
      if (!is_ground_value(*k)) return false;
    return true;
  }
  return false;
}

std::string value_to_string(const ccfl::Expr &e) {
  switch (e.kind) {
    case Expr::Kind::IntLit:
      return std::to_string(e.value);
    case Expr::Kind::Var:
      return e.name;
    case Expr::Kind::CtorApp: {
      std::string s = e.name;
      for (const auto &k : e.kids) {
        std::string ks = value_to_string(*k);
        if (k->kind == Expr::Kind::CtorApp && !k->kids.empty()) ks = "(" + ks + ")";
        s += " " + ks;
      }
      return s;
    }
    default:
      return ccfl::pretty(e);
  }
}

Result evaluate(const ccfl::Program &p, const ccfl::ExprPtr &query, Mode mode, int budget) {
  Evaluator ev{p, mode};
  ExprPtr cur = query;
  int steps = 0;
  while (steps < budget) {
    auto next = mode == Mode::Cbv ? ev.step_cbv(cur) : ev.step_cbn(cur);
    if (!next) {
      Result r;
      r.steps = steps;
      r.value = cur;
      r.kind = is_ground_value(*cur) ? Result::Kind::Value : Result::Kind::Suspended;
      return r;
    }
    cur = *next;
    ++steps;
  }
  Result r;
  r.steps = steps;
  r.value = cur;
  r.kind = Result::Kind::Diverged;
  return r;
}

}  // namespace lmncc::refeval
