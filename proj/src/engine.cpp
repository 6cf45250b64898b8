#include "lmncc/engine.hpp"

#include <algorithm>
#include <functional>
#include <map>

#include "lmncc/text.hpp"

namespace lmncc {

namespace {

constexpr uint64_t k_builtin_rule_order = 1u << 20;

int64_t eval_expr_values(const IntExpr &e, const std::map<std::string, int64_t> &vals) {
  switch (e.kind) {
    case IntExpr::Kind::Const: return e.value;
    case IntExpr::Kind::Var: return vals.at(e.var);
    default: {
      int64_t a = eval_expr_values(e.kids[0], vals);
      int64_t b = eval_expr_values(e.kids[1], vals);
      int64_t out = 0;
      bool ovf = false;
      switch (e.kind) {
        case IntExpr::Kind::Add: ovf = __builtin_add_overflow(a, b, &out); break;
        case IntExpr::Kind::Sub: ovf = __builtin_sub_overflow(a, b, &out); break;
        case IntExpr::Kind::Mul: ovf = __builtin_mul_overflow(a, b, &out); break;
        default: break;
      }
      if (ovf) throw ArithmeticError("integer overflow");
      return out;
    }
  }
}

// ---------------------------------------------------------------------------
// Rule application

struct Instantiator {
  World &w;
  const MatchBinding &b;
  std::map<std::string, LinkId> links;
  std::map<std::string, bool> proc_placed;
  std::vector<AtomId> created_atoms;
  std::vector<MembraneId> created_cells;
  std::vector<AtomId> connectors;

  LinkId link_for(const std::string &v) {
    auto it = links.find(v);
    if (it != links.end()) return it->second;
    LinkId l = w.new_link();
    links[v] = l;
    return l;
  }

  void place_proc_ctx(const std::string &name, MembraneId dest) {
    auto it = b.proc_ctx.find(name);
    if (it == b.proc_ctx.end()) return;
    const Residual &res = it->second;
    if (!proc_placed[name]) {
      proc_placed[name] = true;
      for (AtomId a : res.atoms)
        if (w.atom(a).alive) w.move_atom(a, dest);
      for (MembraneId m : res.cells)
        if (w.mem(m).alive) w.move_membrane(m, dest);
    } else {
      std::vector<AtomId> live_atoms;
      std::vector<MembraneId> live_cells;
      for (AtomId a : res.atoms)
        if (w.atom(a).alive) live_atoms.push_back(a);
      for (MembraneId m : res.cells)
        if (w.mem(m).alive) live_cells.push_back(m);
      w.copy_fragment(live_atoms, live_cells, dest);
    }
  }

  void instantiate(const ProcessTemplate &t, MembraneId dest, bool top) {
    for (const AtomTemplate &a : t.atoms) {
      std::vector<LinkId> args;
      args.reserve(a.args.size());
      for (const auto &v : a.args) args.push_back(link_for(v));
      AtomId created;
      if (a.kind == AtomKind::IntLit) {
        int64_t v = eval_expr_values(a.value_expr, b.values);
        created = w.add_atom(dest, std::to_string(v), args, AtomKind::IntLit, v);
      } else {
        created = w.add_atom(dest, a.name, args, a.kind);
      }
      if (top) created_atoms.push_back(created);
      if (a.kind == AtomKind::Connector) connectors.push_back(created);
    }
    for (const auto &name : t.rule_contexts) {
      auto it = b.rule_ctx.find(name);
      if (it != b.rule_ctx.end())
        for (const RulePtr &r : it->second) w.add_rule(dest, r);
    }
    for (const auto &name : t.proc_contexts) place_proc_ctx(name, dest);
    for (const CellTemplate &c : t.cells) {
      MembraneId m = w.new_membrane(dest);
      if (top) created_cells.push_back(m);
      instantiate(*c.body, m, false);
    }
  }
};

void validate_binding(World &w, const MatchBinding &b) {
  if (b.world_version != w.version())
    throw StaleBinding("world changed since the match was found");
  for (AtomId a : b.matched_atoms)
    if (!w.atom(a).alive) throw StaleBinding("matched atom is gone");
  for (MembraneId m : b.matched_cells)
    if (!w.mem(m).alive) throw StaleBinding("matched cell is gone");
}

}  // namespace

TraceEvent apply_match(World &w, const MatchBinding &b, int step_index) {
  validate_binding(w, b);
  const RewriteRule &rule = *b.rule;

  TraceEvent ev;
  ev.step_index = step_index;
  ev.rule_name = rule.display_name();
  ev.site = b.site;
  {
    std::vector<AtomId> consumed(b.matched_atoms.begin(), b.matched_atoms.end());
    consumed.insert(consumed.end(), b.absorbed.begin(), b.absorbed.end());
    ev.consumed = serialize_atoms(w, consumed, b.matched_cells);
  }

  // A consumed function value whose handle is still referenced elsewhere is
  // re-emitted for the remaining users.
  struct Reemit {
    std::string name;
    std::vector<LinkId> args;
  };
  std::vector<Reemit> shared_values;
  if (rule.shared_value_patterns) {
    for (AtomId a : b.matched_atoms) {
      const Atom &at = w.atom(a);
      if (at.name == "app" || at.kind != AtomKind::Plain) continue;
      shared_values.push_back({at.name, at.args});
    }
  }

  // Park residual contents so their parent cells can be deleted.
  MembraneId holding = w.new_membrane(std::nullopt);
  for (const auto &[name, res] : b.proc_ctx) {
    (void)name;
    for (AtomId a : res.atoms) w.move_atom(a, holding);
    for (MembraneId m : res.cells) w.move_membrane(m, holding);
  }
  for (AtomId a : b.matched_atoms) w.remove_atom(a);
  for (AtomId a : b.absorbed) w.remove_atom(a);
  // Remove outermost matched cells first; nested matched cells die with them.
  for (MembraneId m : b.matched_cells)
    if (w.mem(m).alive) w.remove_membrane(m);

  Instantiator inst{w, b, b.link_map, {}, {}, {}, {}};
  inst.instantiate(rule.rhs, b.site, true);

  // Contexts absent from the rhs disappear with their cell.
  w.remove_membrane(holding);

  for (const Reemit &sv : shared_values) {
    if (sv.args.empty()) continue;
    LinkId handle = sv.args.back();
    MembraneId dest = k_none;
    for (const LinkEnd &e : w.link(handle).ends) {
      const Atom &user = w.atom(e.atom);
      if (user.alive) {
        dest = user.mem;
        break;
      }
    }
    if (dest != k_none) w.add_atom(dest, sv.name, sv.args, AtomKind::Plain);
  }

  for (AtomId c : inst.connectors) {
    Atom &at = w.atom(c);
    if (!at.alive) continue;
    LinkId l0 = at.args[0], l1 = at.args[1];
    w.remove_atom(c);
    if (l0 != l1) {
      if (!w.link(l1).name.empty() && w.link(l0).name.empty()) std::swap(l0, l1);
      w.fuse_links(l0, l1);
    }
  }

  std::vector<AtomId> produced_atoms;
  for (AtomId a : inst.created_atoms)
    if (w.atom(a).alive) produced_atoms.push_back(a);
  std::vector<MembraneId> produced_cells;
  for (MembraneId m : inst.created_cells)
    if (w.mem(m).alive) produced_cells.push_back(m);
  ev.produced = serialize_atoms(w, produced_atoms, produced_cells);
  return ev;
}

namespace {

TraceEvent apply_arith(World &w, AtomId target, int step_index) {
  const Atom a = w.atom(target);
  int64_t v0 = *w.ground_int(a.args[0]);
  int64_t v1 = *w.ground_int(a.args[1]);
  int64_t out = 0;
  bool ovf = false;
  if (a.name == "+") ovf = __builtin_add_overflow(v0, v1, &out);
  else if (a.name == "-") ovf = __builtin_sub_overflow(v0, v1, &out);
  else ovf = __builtin_mul_overflow(v0, v1, &out);
  if (ovf)
    throw ArithmeticError("integer overflow: " + std::to_string(v0) + " " + a.name + " " +
                          std::to_string(v1));

  TraceEvent ev;
  ev.step_index = step_index;
  ev.rule_name = "builtin-arith";
  ev.site = a.mem;

  auto provider = [&](LinkId l) -> AtomId {
    for (const LinkEnd &e : w.link(l).ends) {
      const Atom &p = w.atom(e.atom);
      if (p.alive && p.is_int() && e.pos == 0) return p.id;
    }
    return k_none;
  };
  // An operand integer is consumed when every other holder of its link is
  // the arithmetic atom itself.
  std::vector<AtomId> consumed{target};
  std::vector<LinkId> ops{a.args[0]};
  if (a.args[1] != a.args[0]) ops.push_back(a.args[1]);
  for (LinkId l : ops) {
    AtomId p = provider(l);
    if (p == k_none) continue;
    if (!w.link(l).name.empty()) continue;  // interface values stay readable
    bool only_ours = true;
    for (const LinkEnd &e : w.link(l).ends)
      if (e.atom != p && e.atom != target && w.atom(e.atom).alive) only_ours = false;
    if (only_ours) consumed.push_back(p);
  }
  ev.consumed = serialize_atoms(w, consumed, {});
  for (AtomId c : consumed) w.remove_atom(c);
  AtomId res = w.add_atom(a.mem, std::to_string(out), {a.args[2]}, AtomKind::IntLit, out);
  ev.produced = serialize_atoms(w, {res}, {});
  return ev;
}

void gc_orphan_data(World &w, LinkId l) {
  auto p = w.producer(l);
  if (!p) return;
  const Atom &a = w.atom(*p);
  if (!a.is_int() && !w.is_ctor(a.name)) return;
  if (w.link(l).ends.size() != 1) return;  // still referenced elsewhere
  std::vector<LinkId> kids(a.args.begin(), a.args.end() - (a.args.empty() ? 0 : 1));
  w.remove_atom(*p);
  for (LinkId k : kids) gc_orphan_data(w, k);
}

TraceEvent apply_strict_eq(World &w, AtomId target, int step_index) {
  const Atom a = w.atom(target);
  Term t0 = *resolve_term(w, a.args[0]);
  Term t1 = *resolve_term(w, a.args[1]);
  bool equal = term_equal(t0, t1);

  TraceEvent ev;
  ev.step_index = step_index;
  ev.rule_name = "builtin-eq";
  ev.site = a.mem;
  ev.consumed = serialize_atoms(w, {target}, {});

  w.remove_atom(target);
  gc_orphan_data(w, a.args[0]);
  gc_orphan_data(w, a.args[1]);
  AtomId res;
  if (equal) {
    res = w.add_atom(a.mem, "success", {});
  } else {
    res = w.add_atom(a.mem, "fail", {});
    if (a.mem != w.root()) w.add_atom(w.root(), "fail", {});
  }
  ev.produced = serialize_atoms(w, {res}, {});
  return ev;
}

// ---------------------------------------------------------------------------
// Outermost builtins: rule C (lift / dissolve) and rule D (merge)

// A protected cell: {{...}} — no atoms, no rules, exactly one child.
bool is_protected_cell(const World &w, MembraneId m) {
  const Membrane &mm = w.mem(m);
  return mm.atoms.empty() && mm.rules.empty() && mm.children.size() == 1;
}

struct Phase1Info {
  std::set<AtomId> consumed_atoms;
  std::set<MembraneId> matched_cells;
  bool has_candidate_in(const World &w, MembraneId m) const {
    for (AtomId a : w.mem(m).atoms)
      if (consumed_atoms.count(a)) return true;
    return matched_cells.count(m) > 0;
  }
};

// Atoms at the evaluation level: directly at the root or inside an
// unprotected single-wrapped child of the root.
std::vector<AtomId> eval_level_atoms(const World &w) {
  std::vector<AtomId> out;
  MembraneId root = w.root();
  for (AtomId a : w.mem(root).atoms) out.push_back(a);
  for (MembraneId c : w.mem(root).children)
    if (!is_protected_cell(w, c))
      for (AtomId a : w.mem(c).atoms) out.push_back(a);
  return out;
}

bool is_data_atom(const World &w, const Atom &a) {
  return a.is_int() || a.is_connector() || w.is_ctor(a.name);
}

// The cell providing the producer of link l, as seen from the root:
// returns the top-level child containing it, or k_none when bare/absent.
MembraneId producer_cell(const World &w, LinkId l, AtomId *producer_out) {
  auto p = w.producer(l);
  if (!p) return k_none;
  if (producer_out) *producer_out = *p;
  MembraneId m = w.atom(*p).mem;
  if (m == w.root()) return k_none;
  while (w.mem(m).parent != w.root() && w.mem(m).parent != k_none) m = w.mem(m).parent;
  return m;
}

void collect_lift_candidates(World &w, const Phase1Info &p1, uint64_t rule_index,
                             std::vector<Candidate> &out) {
  MembraneId root = w.root();
  // The environment demands every named free link: a protected producer of
  // an interface link is lifted even with no consumer atom in sight.
  for (MembraneId top : w.mem(root).children) {
    if (!w.mem(top).alive) continue;
    bool done = false;
    std::vector<MembraneId> stack{top};
    std::vector<AtomId> atoms;
    while (!stack.empty()) {
      MembraneId m = stack.back();
      stack.pop_back();
      for (AtomId a : w.mem(m).atoms) atoms.push_back(a);
      for (MembraneId c2 : w.mem(m).children) stack.push_back(c2);
    }
    for (AtomId a : atoms) {
      if (done) break;
      const Atom &at = w.atom(a);
      if (!at.alive) continue;
      LinkId l = at.root_link();
      if (l == k_none || w.link(l).name.empty()) continue;
      if (w.ground_int(l)) continue;
      bool external = true;  // every other endpoint lies outside this cell
      for (const LinkEnd &e : w.link(l).ends)
        if (e.atom != a && w.atom(e.atom).alive && w.is_ancestor(top, w.atom(e.atom).mem))
          external = false;
      if (!external) continue;
      if (is_protected_cell(w, top)) {
        Candidate c;
        c.kind = Candidate::Kind::LiftC;
        c.mem_order = 0;
        c.rule_index = rule_index;
        c.pos = {0, l, 0};
        c.cell = top;
        out.push_back(std::move(c));
      } else if (!p1.has_candidate_in(w, top)) {
        Candidate c;
        c.kind = Candidate::Kind::DissolveC;
        c.mem_order = 0;
        c.rule_index = rule_index;
        c.pos = {0, l, 1};
        c.cell = top;
        out.push_back(std::move(c));
      }
      done = true;
    }
  }
  for (AtomId q : eval_level_atoms(w)) {
    const Atom &qa = w.atom(q);
    if (is_data_atom(w, qa)) continue;
    if (p1.consumed_atoms.count(q)) continue;           // reducible itself
    if (p1.has_candidate_in(w, qa.mem)) continue;       // its cell still works
    for (uint32_t i = 0; i < qa.args.size(); ++i) {
      LinkId l = qa.args[i];
      if (w.ground_int(l)) continue;
      AtomId prod = k_none;
      MembraneId pc = producer_cell(w, l, &prod);
      if (pc == k_none || prod == q) continue;
      if (pc == qa.mem) continue;  // already local
      if (is_protected_cell(w, pc)) {
        Candidate c;
        c.kind = Candidate::Kind::LiftC;
        c.mem_order = 0;
        c.rule_index = rule_index;
        c.pos = {q, i, 0};
        c.atom = q;
        c.cell = pc;
        out.push_back(std::move(c));
      } else if (!p1.has_candidate_in(w, pc)) {
        // Fully stuck single-wrapped producer: strip its last membrane so its
        // contents reach the evaluation level.
        Candidate c;
        c.kind = Candidate::Kind::DissolveC;
        c.mem_order = 0;
        c.rule_index = rule_index;
        c.pos = {q, i, 1};
        c.atom = q;
        c.cell = pc;
        out.push_back(std::move(c));
      }
    }
  }
}

void collect_merge_candidates(World &w, const Phase1Info &p1, uint64_t rule_index,
                              std::vector<Candidate> &out) {
  for (AtomId r : eval_level_atoms(w)) {
    const Atom &ra = w.atom(r);
    if (!is_arith_atom(ra)) continue;
    if (p1.consumed_atoms.count(r)) continue;  // already reducible
    std::vector<MembraneId> producers;
    bool ok = false, blocked = false;
    for (int i = 0; i < 2; ++i) {
      LinkId l = ra.args[i];
      if (w.ground_int(l)) continue;
      MembraneId pc = producer_cell(w, l, nullptr);
      if (pc == k_none) {
        // bare producer or free variable: check a producer atom exists
        if (!w.producer(l)) blocked = true;
        continue;
      }
      if (pc == ra.mem) continue;
      if (is_protected_cell(w, pc)) {
        blocked = true;  // rule C has not lifted it yet
        continue;
      }
      if (std::find(producers.begin(), producers.end(), pc) == producers.end())
        producers.push_back(pc);
      ok = true;
    }
    if (!ok || blocked) continue;
    Candidate c;
    c.kind = Candidate::Kind::MergeD;
    c.mem_order = 0;
    c.rule_index = rule_index;
    c.pos = {r};
    c.atom = r;
    c.cell = (ra.mem == w.root()) ? k_none : ra.mem;
    c.producers = std::move(producers);
    out.push_back(std::move(c));
  }
}

TraceEvent apply_lift(World &w, const Candidate &c, int step_index) {
  TraceEvent ev;
  ev.step_index = step_index;
  ev.rule_name = "ruleC";
  ev.site = w.root();
  ev.consumed = serialize_atoms(w, {}, {c.cell});
  MembraneId inner = w.mem(c.cell).children.front();
  w.move_membrane(inner, w.root());
  w.remove_membrane(c.cell);
  ev.produced = serialize_atoms(w, {}, {inner});
  return ev;
}

TraceEvent apply_dissolve(World &w, const Candidate &c, int step_index) {
  TraceEvent ev;
  ev.step_index = step_index;
  ev.rule_name = "ruleC";
  ev.site = w.root();
  ev.consumed = serialize_atoms(w, {}, {c.cell});
  std::vector<AtomId> moved(w.mem(c.cell).atoms.begin(), w.mem(c.cell).atoms.end());
  w.dissolve_membrane(c.cell, w.root());
  ev.produced = serialize_atoms(w, moved, {});
  return ev;
}

TraceEvent apply_merge(World &w, const Candidate &c, int step_index) {
  TraceEvent ev;
  ev.step_index = step_index;
  ev.rule_name = "ruleD";
  ev.site = w.root();
  std::vector<AtomId> catoms{c.atom};
  ev.consumed = serialize_atoms(w, catoms, c.producers);
  if (c.cell == k_none) {
    // Root is a bare atom: producers join the evaluation level itself.
    for (MembraneId p : c.producers) w.dissolve_membrane(p, w.root());
    ev.produced = serialize_atoms(w, {c.atom}, {});
  } else {
    for (MembraneId p : c.producers) w.dissolve_membrane(p, c.cell);
    ev.produced = serialize_atoms(w, {}, {c.cell});
  }
  return ev;
}

}  // namespace

std::vector<Candidate> collect_candidates(World &w) {
  std::vector<Candidate> out;
  std::vector<MembraneId> order = w.preorder();
  uint64_t max_id = 0;
  for (MembraneId m : order) max_id = std::max<uint64_t>(max_id, m);
  std::vector<uint64_t> mem_order(max_id + 1, 0);
  for (size_t i = 0; i < order.size(); ++i) mem_order[order[i]] = i;

  Phase1Info p1;
  std::vector<std::pair<uint64_t, const RewriteRule *>> builtins;  // (rule_index, rule) at root

  for (MembraneId m : order) {
    const Membrane &mm = w.mem(m);
    for (size_t ri = 0; ri < mm.rules.size(); ++ri) {
      const RulePtr &r = mm.rules[ri];
      if (r->builtin != RewriteRule::Builtin::None) {
        if (m == w.root()) builtins.push_back({ri, r.get()});
        continue;
      }
      for (MatchBinding &b : find_matches(w, *r, m)) {
        Candidate c;
        c.kind = Candidate::Kind::Rule;
        c.mem_order = mem_order[m];
        c.rule_index = ri;
        c.pos = b.pos_key;
        for (AtomId a : b.matched_atoms) p1.consumed_atoms.insert(a);
        for (MembraneId mc : b.matched_cells) p1.matched_cells.insert(mc);
        c.binding = std::move(b);
        out.push_back(std::move(c));
      }
    }
    if (builtins_enabled(w, m)) {
      for (AtomId a : mm.atoms) {
        const Atom &at = w.atom(a);
        if (arith_ready(w, at)) {
          Candidate c;
          c.kind = Candidate::Kind::Arith;
          c.mem_order = mem_order[m];
          c.rule_index = k_builtin_rule_order;
          c.pos = {a};
          c.atom = a;
          p1.consumed_atoms.insert(a);
          out.push_back(std::move(c));
        } else if (strict_eq_ready(w, at)) {
          Candidate c;
          c.kind = Candidate::Kind::StrictEq;
          c.mem_order = mem_order[m];
          c.rule_index = k_builtin_rule_order + 1;
          c.pos = {a};
          c.atom = a;
          p1.consumed_atoms.insert(a);
          out.push_back(std::move(c));
        }
      }
    }
  }

  for (const auto &[ri, r] : builtins) {
    if (r->builtin == RewriteRule::Builtin::LiftC)
      collect_lift_candidates(w, p1, ri, out);
    else if (r->builtin == RewriteRule::Builtin::MergeD)
      collect_merge_candidates(w, p1, ri, out);
  }

  std::stable_sort(out.begin(), out.end(), [](const Candidate &a, const Candidate &b) {
    if (a.mem_order != b.mem_order) return a.mem_order < b.mem_order;
    if (a.rule_index != b.rule_index) return a.rule_index < b.rule_index;
    return a.pos < b.pos;
  });
  return out;
}

TraceEvent apply_candidate(World &w, const Candidate &c, int step_index) {
  switch (c.kind) {
    case Candidate::Kind::Rule: return apply_match(w, c.binding, step_index);
    case Candidate::Kind::Arith: return apply_arith(w, c.atom, step_index);
    case Candidate::Kind::StrictEq: return apply_strict_eq(w, c.atom, step_index);
    case Candidate::Kind::LiftC: return apply_lift(w, c, step_index);
    case Candidate::Kind::DissolveC: return apply_dissolve(w, c, step_index);
    case Candidate::Kind::MergeD: return apply_merge(w, c, step_index);
  }
  throw GraphError("unreachable");
}

std::optional<TraceEvent> reduce_arith(World &w, int step_index) {
  for (MembraneId m : w.preorder()) {
    if (!builtins_enabled(w, m)) continue;
    for (AtomId a : w.mem(m).atoms)
      if (arith_ready(w, w.atom(a))) return apply_arith(w, a, step_index);
  }
  return std::nullopt;
}

std::optional<TraceEvent> step(World &w, const SchedulingPolicy &policy, int step_index,
                               uint64_t &prng_state) {
  std::vector<Candidate> cands = collect_candidates(w);
  if (cands.empty()) return std::nullopt;
  size_t pick = 0;
  if (policy.mode == SchedulingPolicy::Mode::Seeded)
    pick = static_cast<size_t>(splitmix64(prng_state) % cands.size());
  return apply_candidate(w, cands[pick], step_index);
}

RunResult run(World &w, const SchedulingPolicy &policy) {
  if (policy.max_steps < 1) throw std::invalid_argument("max_steps must be at least 1");
  RunResult res;
  uint64_t prng = policy.seed;
  for (int i = 1; i <= policy.max_steps; ++i) {
    auto ev = step(w, policy, i, prng);
    if (!ev) {
      res.status = RunStatus::NormalForm;
      return res;
    }
    res.trace.push_back(std::move(*ev));
  }
  res.status = RunStatus::BudgetExhausted;
  return res;
}

}  // namespace lmncc
