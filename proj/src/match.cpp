#include "lmncc/match.hpp"

#include <algorithm>
#include <functional>

namespace lmncc {

namespace {

bool eval_intexpr(const IntExpr &e, const std::map<std::string, int64_t> &vals, int64_t &out) {
  switch (e.kind) {
    case IntExpr::Kind::Const:
      out = e.value;
      return true;
    case IntExpr::Kind::Var: {
      auto it = vals.find(e.var);
      if (it == vals.end()) return false;
      out = it->second;
      return true;
    }
    default: {
      int64_t a, b;
      if (!eval_intexpr(e.kids[0], vals, a) || !eval_intexpr(e.kids[1], vals, b)) return false;
      bool ovf = false;
      switch (e.kind) {
        case IntExpr::Kind::Add: ovf = __builtin_add_overflow(a, b, &out); break;
        case IntExpr::Kind::Sub: ovf = __builtin_sub_overflow(a, b, &out); break;
        case IntExpr::Kind::Mul: ovf = __builtin_mul_overflow(a, b, &out); break;
        default: return false;
      }
      if (ovf) throw ArithmeticError("integer overflow in rule expression");
      return true;
    }
  }
}

bool cmp_holds(CmpOp op, int64_t a, int64_t b) {
  switch (op) {
    case CmpOp::Eq: return a == b;
    case CmpOp::Ne: return a != b;
    case CmpOp::Gt: return a > b;
    case CmpOp::Lt: return a < b;
    case CmpOp::Ge: return a >= b;
    case CmpOp::Le: return a <= b;
  }
  return false;
}

void collect_rhs_link_vars(const ProcessTemplate &t, std::set<std::string> &out) {
  for (const auto &a : t.atoms)
    for (const auto &v : a.args) out.insert(v);
  for (const auto &c : t.cells) {
    for (const auto &v : c.plus_links) out.insert(v);
    for (const auto &v : c.minus_links) out.insert(v);
    collect_rhs_link_vars(*c.body, out);
  }
}

void collect_expr_vars(const ProcessTemplate &t, std::set<std::string> &out) {
  for (const auto &a : t.atoms) {
    if (a.kind == AtomKind::IntLit && !a.value_expr.is_const()) {
      std::vector<std::string> vs;
      a.value_expr.collect_vars(vs);
      out.insert(vs.begin(), vs.end());
    }
  }
  for (const auto &c : t.cells) collect_expr_vars(*c.body, out);
}

class Matcher {
 public:
  Matcher(World &w, const RewriteRule &rule, MembraneId site, bool first_only)
      : w_(w), rule_(rule), site_(site), first_only_(first_only) {
    collect_rhs_link_vars(rule.rhs, rhs_link_vars_);
    for (const auto &v : rule.guard.vars()) value_vars_.insert(v);
    collect_expr_vars(rule.rhs, value_vars_);
  }

  std::vector<MatchBinding> run() {
    if (rule_.lhs.atoms.empty() && rule_.lhs.cells.empty()) return {};
    match_proc(rule_.lhs, site_, [&] { finalize(); });
    return std::move(out_);
  }

 private:
  using Cont = std::function<void()>;

  void match_proc(const ProcessTemplate &t, MembraneId mem, const Cont &k) {
    match_atoms(t.atoms, 0, mem, [&] { match_cells(t.cells, 0, mem, k); });
  }

  bool compatible(const AtomTemplate &t, const Atom &a) const {
    if (a.args.size() != t.args.size()) return false;
    switch (t.kind) {
      case AtomKind::IntLit:
        return a.is_int() && t.value_expr.is_const() && a.value == t.value_expr.value;
      case AtomKind::Connector:
        return a.is_connector();
      case AtomKind::Plain:
        return a.kind == AtomKind::Plain && a.name == t.name;
    }
    return false;
  }

  bool bind_link(const std::string &var, LinkId l, std::vector<std::string> &undo) {
    auto it = links_.find(var);
    if (it != links_.end()) return it->second == l;
    links_[var] = l;
    undo.push_back(var);
    return true;
  }

  void match_atoms(const std::vector<AtomTemplate> &ats, size_t i, MembraneId mem,
                   const Cont &k) {
    if (finished_) return;
    if (i == ats.size()) {
      k();
      return;
    }
    const AtomTemplate &t = ats[i];
    for (AtomId a : w_.mem(mem).atoms) {
      if (finished_) return;
      if (used_atoms_.count(a)) continue;
      const Atom &at = w_.atom(a);
      if (!compatible(t, at)) continue;
      std::vector<std::string> undo;
      bool ok = true;
      for (size_t j = 0; j < t.args.size() && ok; ++j) ok = bind_link(t.args[j], at.args[j], undo);
      if (ok) {
        used_atoms_.insert(a);
        matched_atoms_.push_back(a);
        match_atoms(ats, i + 1, mem, k);
        matched_atoms_.pop_back();
        used_atoms_.erase(a);
      }
      for (const auto &v : undo) links_.erase(v);
    }
  }

  // Free-link variables already required by an earlier cell pin down the
  // candidates: a later declaring cell must contain one of the link's other
  // endpoints.
  void collect_declared(const CellTemplate &ct, std::vector<std::string> &out) const {
    for (const auto &v : ct.plus_links) out.push_back(v);
    for (const auto &v : ct.minus_links) out.push_back(v);
    for (const auto &inner : ct.body->cells) collect_declared(inner, out);
  }

  std::optional<std::set<MembraneId>> allowed_candidates(const CellTemplate &ct,
                                                         MembraneId mem) const {
    std::vector<std::string> vars;
    collect_declared(ct, vars);
    for (const auto &v : vars) {
      std::vector<MembraneId> prior;
      for (const auto &[u, c] : freelink_req_)
        if (u == v) prior.push_back(c);
      if (prior.empty()) continue;
      std::set<MembraneId> out;
      for (LinkId l : freelink_candidates(prior)) {
        for (const LinkEnd &e : w_.link(l).ends) {
          if (!w_.atom(e.atom).alive) continue;
          MembraneId m = w_.atom(e.atom).mem;
          while (m != k_none && w_.mem(m).parent != mem) m = w_.mem(m).parent;
          if (m != k_none) out.insert(m);
        }
      }
      return out;
    }
    return std::nullopt;
  }

  void match_cells(const std::vector<CellTemplate> &cts, size_t j, MembraneId mem, const Cont &k) {
    if (finished_) return;
    if (j == cts.size()) {
      k();
      return;
    }
    const CellTemplate &ct = cts[j];
    std::optional<std::set<MembraneId>> allowed = allowed_candidates(ct, mem);
    for (MembraneId c : w_.mem(mem).children) {
      if (finished_) return;
      if (allowed && !allowed->count(c)) continue;
      if (used_cells_.count(c)) continue;
      const Membrane &cm = w_.mem(c);
      if (ct.body->rule_contexts.empty() && !cm.rules.empty()) continue;
      if (!ct.body->rule_contexts.empty() && cm.rules.empty()) continue;
      if (ct.stable_flag && !is_stable(w_, c)) continue;
      used_cells_.insert(c);
      matched_cells_.push_back(c);
      match_proc(*ct.body, c, [&] {
        // Exactness and context capture for this cell.
        Residual res;
        for (AtomId a : cm.atoms)
          if (!used_atoms_.count(a)) res.atoms.push_back(a);
        for (MembraneId cc : cm.children)
          if (!used_cells_.count(cc)) res.cells.push_back(cc);
        const auto &pcs = ct.body->proc_contexts;
        if (pcs.empty() && (!res.atoms.empty() || !res.cells.empty())) return;
        size_t fl_mark = freelink_req_.size();
        for (const auto &v : ct.plus_links) freelink_req_.push_back({v, c});
        for (const auto &v : ct.minus_links) freelink_req_.push_back({v, c});
        if (!pcs.empty()) proc_ctx_[pcs.front()] = res;
        for (const auto &rc : ct.body->rule_contexts) rule_ctx_[rc] = cm.rules;
        match_cells(cts, j + 1, mem, k);
        if (!pcs.empty()) proc_ctx_.erase(pcs.front());
        for (const auto &rc : ct.body->rule_contexts) rule_ctx_.erase(rc);
        freelink_req_.resize(fl_mark);
      });
      matched_cells_.pop_back();
      used_cells_.erase(c);
    }
  }

  // Candidate links for a free-link variable: an endpoint on an atom directly
  // inside every declaring cell, and (for single-cell declarations) another
  // endpoint outside that cell's subtree.
  std::vector<LinkId> freelink_candidates(const std::vector<MembraneId> &cells) const {
    std::vector<LinkId> cands;
    for (AtomId a : w_.mem(cells[0]).atoms) {
      for (LinkId l : w_.atom(a).args) {
        bool ok = true;
        for (MembraneId c : cells) {
          bool inside = false;
          for (const LinkEnd &e : w_.link(l).ends)
            if (w_.atom(e.atom).alive && w_.atom(e.atom).mem == c) inside = true;
          if (!inside) ok = false;
        }
        if (ok && cells.size() == 1) {
          bool outside = false;
          for (const LinkEnd &e : w_.link(l).ends)
            if (w_.atom(e.atom).alive && !w_.is_ancestor(cells[0], w_.atom(e.atom).mem))
              outside = true;
          if (!outside) ok = false;
        }
        if (ok && std::find(cands.begin(), cands.end(), l) == cands.end()) cands.push_back(l);
      }
    }
    return cands;
  }

  void finalize() {
    // Group free-link requirements per variable.
    std::map<std::string, std::vector<MembraneId>> fl;
    for (const auto &[v, c] : freelink_req_) fl[v].push_back(c);
    assign_freelinks(fl.begin(), fl.end());
  }

  void assign_freelinks(std::map<std::string, std::vector<MembraneId>>::iterator it,
                        std::map<std::string, std::vector<MembraneId>>::iterator end) {
    if (finished_) return;
    if (it == end) {
      emit();
      return;
    }
    const auto &[var, cells] = *it;
    auto next = std::next(it);
    auto bound = links_.find(var);
    if (bound != links_.end()) {
      // Already bound through an atom argument: verify the constraints.
      std::vector<LinkId> cands = freelink_candidates(cells);
      if (std::find(cands.begin(), cands.end(), bound->second) != cands.end())
        assign_freelinks(next, end);
      return;
    }
    for (LinkId l : freelink_candidates(cells)) {
      links_[var] = l;
      assign_freelinks(next, end);
      links_.erase(var);
      if (finished_) return;
      // Distinct crossing links produce equivalent reorganizations; one
      // binding per structural match is enough.
      break;
    }
  }

  void emit() {
    // Resolve every guard / expression variable to a ground integer.
    std::map<std::string, int64_t> values;
    for (const auto &v : value_vars_) {
      auto it = links_.find(v);
      if (it == links_.end()) return;  // suspended
      auto g = w_.ground_int(it->second);
      if (!g) return;  // suspended
      values[v] = *g;
    }
    for (const auto &c : rule_.guard.conjuncts) {
      int64_t a, b;
      if (!eval_intexpr(c.lhs, values, a) || !eval_intexpr(c.rhs, values, b)) return;
      if (!cmp_holds(c.op, a, b)) return;
    }
    MatchBinding b;
    b.rule = &rule_;
    b.site = site_;
    b.link_map = links_;
    b.matched_atoms = matched_atoms_;
    b.matched_cells = matched_cells_;
    b.proc_ctx = proc_ctx_;
    b.rule_ctx = rule_ctx_;
    b.values = std::move(values);
    b.world_version = w_.version();
    for (AtomId a : matched_atoms_) b.pos_key.push_back(a);
    for (MembraneId m : matched_cells_) b.pos_key.push_back((uint64_t)m << 32);
    // An integer consumed as a guard value is absorbed when the rule does not
    // keep its link alive and nothing else holds it.
    for (const auto &[v, val] : b.values) {
      (void)val;
      if (rhs_link_vars_.count(v)) continue;
      LinkId l = b.link_map.at(v);
      AtomId provider = k_none;
      for (const LinkEnd &e : w_.link(l).ends) {
        const Atom &at = w_.atom(e.atom);
        if (at.alive && at.is_int() && e.pos == 0) provider = at.id;
      }
      if (provider == k_none) continue;
      bool orphaned = true;
      for (const LinkEnd &e : w_.link(l).ends) {
        if (e.atom == provider) continue;
        if (!w_.atom(e.atom).alive) continue;
        if (!used_atoms_.count(e.atom)) orphaned = false;
      }
      if (orphaned) b.absorbed.push_back(provider);
    }
    // Deduplicate structurally identical matches.
    std::pair<std::vector<AtomId>, std::vector<MembraneId>> key{matched_atoms_, matched_cells_};
    if (!seen_.insert(key).second) return;
    out_.push_back(std::move(b));
    if (first_only_) finished_ = true;
  }

  World &w_;
  const RewriteRule &rule_;
  MembraneId site_;
  bool first_only_;
  bool finished_ = false;

  std::map<std::string, LinkId> links_;
  std::set<AtomId> used_atoms_;
  std::set<MembraneId> used_cells_;
  std::vector<AtomId> matched_atoms_;
  std::vector<MembraneId> matched_cells_;
  std::map<std::string, Residual> proc_ctx_;
  std::map<std::string, std::vector<RulePtr>> rule_ctx_;
  std::vector<std::pair<std::string, MembraneId>> freelink_req_;
  std::set<std::string> rhs_link_vars_;
  std::set<std::string> value_vars_;
  std::set<std::pair<std::vector<AtomId>, std::vector<MembraneId>>> seen_;
  std::vector<MatchBinding> out_;
};

}  // namespace

namespace {

bool atoms_satisfy(const World &w, MembraneId m, const AtomTemplate &t) {
  for (AtomId a : w.mem(m).atoms) {
    const Atom &at = w.atom(a);
    if (at.args.size() != t.args.size()) continue;
    switch (t.kind) {
      case AtomKind::IntLit:
        if (at.is_int() && t.value_expr.is_const() && at.value == t.value_expr.value) return true;
        break;
      case AtomKind::Connector:
        if (at.is_connector()) return true;
        break;
      case AtomKind::Plain:
        if (at.kind == AtomKind::Plain && at.name == t.name) return true;
        break;
    }
  }
  return false;
}

}  // namespace

bool could_match(const World &w, const RewriteRule &rule, MembraneId site) {
  if (rule.builtin != RewriteRule::Builtin::None) return false;
  if (!rule.lhs.atoms.empty()) return atoms_satisfy(w, site, rule.lhs.atoms[0]);
  for (const CellTemplate &c : rule.lhs.cells) {
    if (c.body->atoms.empty()) continue;
    const AtomTemplate &t = c.body->atoms[0];
    for (MembraneId child : w.mem(site).children)
      if (atoms_satisfy(w, child, t)) return true;
    return false;
  }
  return true;
}

std::vector<MatchBinding> find_matches(World &w, const RewriteRule &rule, MembraneId site,
                                       bool first_only) {
  if (rule.builtin != RewriteRule::Builtin::None) return {};
  if (!could_match(w, rule, site)) return {};
  Matcher m(w, rule, site, first_only);
  auto out = m.run();
  std::stable_sort(out.begin(), out.end(), [](const MatchBinding &a, const MatchBinding &b) {
    return a.pos_key < b.pos_key;
  });
  return out;
}

GuardResult eval_guard(const World &w, const Guard &g, const std::map<std::string, LinkId> &links,
                       std::map<std::string, int64_t> *values_out) {
  std::map<std::string, int64_t> values;
  for (const auto &v : g.vars()) {
    auto it = links.find(v);
    if (it == links.end()) return GuardResult::Suspended;
    auto gi = w.ground_int(it->second);
    if (!gi) return GuardResult::Suspended;
    values[v] = *gi;
  }
  for (const auto &c : g.conjuncts) {
    int64_t a, b;
    if (!eval_intexpr(c.lhs, values, a) || !eval_intexpr(c.rhs, values, b))
      return GuardResult::Suspended;
    if (!cmp_holds(c.op, a, b)) return GuardResult::False;
  }
  if (values_out) *values_out = std::move(values);
  return GuardResult::True;
}

bool builtins_enabled(const World &w, MembraneId m) {
  const Membrane &mm = w.mem(m);
  if (m == w.root()) return true;
  if (!mm.rules.empty()) return true;
  if (mm.parent != k_none && !w.mem(mm.parent).rules.empty()) return true;
  return false;
}

bool is_arith_atom(const Atom &a) {
  return a.kind == AtomKind::Plain && a.args.size() == 3 &&
         (a.name == "+" || a.name == "-" || a.name == "*");
}

bool arith_ready(const World &w, const Atom &a) {
  if (!is_arith_atom(a)) return false;
  return w.ground_int(a.args[0]).has_value() && w.ground_int(a.args[1]).has_value();
}

std::optional<Term> resolve_term(const World &w, LinkId l) {
  std::set<LinkId> visiting;
  std::function<std::optional<Term>(LinkId)> go = [&](LinkId lk) -> std::optional<Term> {
    if (visiting.count(lk)) return std::nullopt;
    visiting.insert(lk);
    auto p = w.producer(lk);
    if (!p) return std::nullopt;
    const Atom &a = w.atom(*p);
    Term t;
    if (a.is_int()) {
      t.is_int = true;
      t.value = a.value;
      return t;
    }
    if (!w.is_ctor(a.name)) return std::nullopt;
    t.ctor = a.name;
    for (size_t i = 0; i + 1 < a.args.size(); ++i) {
      auto kid = go(a.args[i]);
      if (!kid) return std::nullopt;
      t.kids.push_back(std::move(*kid));
    }
    return t;
  };
  return go(l);
}

bool term_equal(const Term &a, const Term &b) {
  if (a.is_int != b.is_int) return false;
  if (a.is_int) return a.value == b.value;
  if (a.ctor != b.ctor || a.kids.size() != b.kids.size()) return false;
  for (size_t i = 0; i < a.kids.size(); ++i)
    if (!term_equal(a.kids[i], b.kids[i])) return false;
  return true;
}

bool strict_eq_ready(const World &w, const Atom &a) {
  if (a.kind != AtomKind::Plain || a.name != "eq_" || a.args.size() != 2) return false;
  return resolve_term(w, a.args[0]).has_value() && resolve_term(w, a.args[1]).has_value();
}

bool is_stable(World &w, MembraneId m) {
  const Membrane &mm = w.mem(m);
  if (mm.stable_cache) return *mm.stable_cache;
  bool stable = true;
  std::vector<MembraneId> stack{m};
  std::vector<MembraneId> subtree;
  while (!stack.empty()) {
    MembraneId x = stack.back();
    stack.pop_back();
    subtree.push_back(x);
    for (MembraneId c : w.mem(x).children) stack.push_back(c);
  }
  for (MembraneId x : subtree) {
    if (!stable) break;
    for (const RulePtr &r : w.mem(x).rules) {
      if (r->builtin != RewriteRule::Builtin::None) continue;
      if (!find_matches(w, *r, x, true).empty()) {
        stable = false;
        break;
      }
    }
    if (stable && builtins_enabled(w, x)) {
      for (AtomId a : w.mem(x).atoms) {
        const Atom &at = w.atom(a);
        if (arith_ready(w, at) || strict_eq_ready(w, at)) {
          stable = false;
          break;
        }
      }
    }
  }
  mm.stable_cache = stable;
  return stable;
}

}  // namespace lmncc
