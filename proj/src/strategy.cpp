#include "lmncc/strategy.hpp"

namespace lmncc {

namespace {

AtomTemplate plain(const std::string &name, std::vector<std::string> args) {
  AtomTemplate a;
  a.name = name;
  a.kind = AtomKind::Plain;
  a.args = std::move(args);
  return a;
}

AtomTemplate int_tmpl(IntExpr e, const std::string &root) {
  AtomTemplate a;
  a.kind = AtomKind::IntLit;
  a.name = e.is_const() ? std::to_string(e.value) : "<expr>";
  a.value_expr = std::move(e);
  a.args = {root};
  return a;
}

CellTemplate cell(ProcessTemplate body) {
  CellTemplate c;
  c.body = std::make_shared<ProcessTemplate>(std::move(body));
  return c;
}

// Shared lhs of rules A and B:
//   { @rules, {$p, +L, inLinks_(0)} }/, { {$q, -L, inLinks_(N)} }
ProcessTemplate ab_lhs() {
  ProcessTemplate inner_p;
  inner_p.proc_contexts = {"p"};
  inner_p.atoms.push_back(plain("inLinks_", {"Cp"}));
  inner_p.atoms.push_back(int_tmpl(IntExpr::constant(0), "Cp"));
  CellTemplate pin = cell(std::move(inner_p));
  pin.plus_links = {"L"};

  ProcessTemplate producer;
  producer.rule_contexts = {"rules"};
  producer.cells.push_back(std::move(pin));
  CellTemplate pcell = cell(std::move(producer));
  pcell.stable_flag = true;

  ProcessTemplate inner_q;
  inner_q.proc_contexts = {"q"};
  inner_q.atoms.push_back(plain("inLinks_", {"N"}));
  CellTemplate qin = cell(std::move(inner_q));
  qin.minus_links = {"L"};

  ProcessTemplate wrapper;
  wrapper.cells.push_back(std::move(qin));
  CellTemplate qcell = cell(std::move(wrapper));

  ProcessTemplate lhs;
  lhs.cells.push_back(std::move(pcell));
  lhs.cells.push_back(std::move(qcell));
  return lhs;
}

Guard cmp_guard(CmpOp op, IntExpr l, IntExpr r) {
  Guard g;
  g.conjuncts.push_back(GuardCmp{op, std::move(l), std::move(r)});
  return g;
}

}  // namespace

RulePtr rule_a() {
  auto r = std::make_shared<RewriteRule>();
  r->name = "ruleA";
  r->lhs = ab_lhs();
  r->guard = cmp_guard(CmpOp::Eq, IntExpr::variable("N"), IntExpr::constant(1));
  // rhs: { @rules, {$p, $q, inLinks_(0)} }
  ProcessTemplate merged;
  merged.proc_contexts = {"p", "q"};
  merged.atoms.push_back(plain("inLinks_", {"Cz"}));
  merged.atoms.push_back(int_tmpl(IntExpr::constant(0), "Cz"));
  ProcessTemplate outer;
  outer.rule_contexts = {"rules"};
  outer.cells.push_back(cell(std::move(merged)));
  r->rhs.cells.push_back(cell(std::move(outer)));
  return r;
}

RulePtr rule_b() {
  auto r = std::make_shared<RewriteRule>();
  r->name = "ruleB";
  r->lhs = ab_lhs();
  r->guard = cmp_guard(CmpOp::Gt, IntExpr::variable("N"), IntExpr::constant(1));
  // rhs: { {$p, $q, inLinks_(N-1)} } — still protected, no rules granted.
  ProcessTemplate merged;
  merged.proc_contexts = {"p", "q"};
  merged.atoms.push_back(plain("inLinks_", {"Cm"}));
  merged.atoms.push_back(int_tmpl(
      IntExpr::binary(IntExpr::Kind::Sub, IntExpr::variable("N"), IntExpr::constant(1)), "Cm"));
  ProcessTemplate wrapper;
  wrapper.cells.push_back(cell(std::move(merged)));
  r->rhs.cells.push_back(cell(std::move(wrapper)));
  return r;
}

RulePtr rule_release() {
  auto r = std::make_shared<RewriteRule>();
  r->name = "release";
  // {@r, {{$q}}, $s} :- {@r, $s}, {{$q}}.
  ProcessTemplate inner_q;
  inner_q.proc_contexts = {"q"};
  ProcessTemplate wrap;
  wrap.cells.push_back(cell(std::move(inner_q)));
  ProcessTemplate lhs_cell;
  lhs_cell.rule_contexts = {"r"};
  lhs_cell.proc_contexts = {"s"};
  lhs_cell.cells.push_back(cell(std::move(wrap)));
  r->lhs.cells.push_back(cell(std::move(lhs_cell)));

  ProcessTemplate keep;
  keep.rule_contexts = {"r"};
  keep.proc_contexts = {"s"};
  r->rhs.cells.push_back(cell(std::move(keep)));
  ProcessTemplate inner_q2;
  inner_q2.proc_contexts = {"q"};
  ProcessTemplate wrap2;
  wrap2.cells.push_back(cell(std::move(inner_q2)));
  r->rhs.cells.push_back(cell(std::move(wrap2)));
  return r;
}

RulePtr rule_divide() {
  auto r = std::make_shared<RewriteRule>();
  r->name = "divide";
  // {@r, {$p}, {$q}, $s} :- {@r, {$p}, $s}, {@r, {$q}}.
  ProcessTemplate ip;
  ip.proc_contexts = {"p"};
  ProcessTemplate iq;
  iq.proc_contexts = {"q"};
  ProcessTemplate lhs_cell;
  lhs_cell.rule_contexts = {"r"};
  lhs_cell.proc_contexts = {"s"};
  lhs_cell.cells.push_back(cell(std::move(ip)));
  lhs_cell.cells.push_back(cell(std::move(iq)));
  r->lhs.cells.push_back(cell(std::move(lhs_cell)));

  ProcessTemplate ip2;
  ip2.proc_contexts = {"p"};
  ProcessTemplate left;
  left.rule_contexts = {"r"};
  left.proc_contexts = {"s"};
  left.cells.push_back(cell(std::move(ip2)));
  r->rhs.cells.push_back(cell(std::move(left)));

  ProcessTemplate iq2;
  iq2.proc_contexts = {"q"};
  ProcessTemplate right;
  right.rule_contexts = {"r"};
  right.cells.push_back(cell(std::move(iq2)));
  r->rhs.cells.push_back(cell(std::move(right)));
  return r;
}

RulePtr rule_c() {
  auto r = std::make_shared<RewriteRule>();
  r->name = "ruleC";
  r->builtin = RewriteRule::Builtin::LiftC;
  return r;
}

RulePtr rule_d() {
  auto r = std::make_shared<RewriteRule>();
  r->name = "ruleD";
  r->builtin = RewriteRule::Builtin::MergeD;
  return r;
}

MetaRuleSet meta_rules(StrategyTag tag) {
  MetaRuleSet s{tag, {}};
  if (tag == StrategyTag::Cbv) {
    s.rules = {rule_a(), rule_b(), rule_release(), rule_divide()};
  } else {
    s.rules = {rule_d(), rule_c()};
  }
  return s;
}

bool world_has_fail(const World &w) {
  for (MembraneId m : w.preorder())
    for (AtomId a : w.mem(m).atoms) {
      const Atom &at = w.atom(a);
      if (at.alive && at.kind == AtomKind::Plain && at.name == "fail" && at.args.empty())
        return true;
    }
  return false;
}

ReadResult read_result(const World &w, LinkId root) {
  if (world_has_fail(w)) return ReadFail{};
  auto t = resolve_term(w, root);
  if (!t) return ReadSuspended{};
  return *t;
}

ReadResult read_result(const World &w, const std::string &link_name) {
  if (world_has_fail(w)) return ReadFail{};
  auto l = w.find_named(link_name);
  if (!l) return ReadSuspended{};
  return read_result(w, *l);
}

std::string term_to_string(const Term &t, const std::map<std::string, std::string> &display) {
  if (t.is_int) return std::to_string(t.value);
  auto it = display.find(t.ctor);
  std::string name = it == display.end() ? t.ctor : it->second;
  if (t.kids.empty()) return name;
  std::string s = name;
  for (const Term &k : t.kids) {
    std::string ks = term_to_string(k, display);
    if (!k.is_int && !k.kids.empty()) ks = "(" + ks + ")";
    s += " " + ks;
  }
  return s;
}

}  // namespace lmncc
