#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

using namespace lmncc;
using namespace testutil;

namespace {

const char *kProgAdd =
    "def add x y = x + y\n"
    "def addOne = add 1\n"
    "def fac x = case x of 1 -> x ;\n"
    "                      n -> n * fac (n-1)\n";

const char *kProgLength =
    "data List a = Nil | Cons a (List a)\n"
    "def length l = case l of Nil -> 0 ; Cons x xs -> 1 + length xs\n";

const codegen::FlatRule *rule_named(const codegen::Compiled &c, const std::string &n) {
  for (const auto &r : c.rules)
    if (r.name == n) return &r;
  return nullptr;
}

}  // namespace

TEST_CASE("flatten: the running example destructures to four operation atoms") {
  ccfl::Program p = ccfl::parse_ccfl(kProgAdd);
  ccfl::eta_enrich_all(p);
  codegen::Compiled c = codegen::compile_flat(p, {});
  ccfl::Query q = ccfl::parse_query("add (addOne (6+1)) (addOne 8)", p);
  codegen::FlatQuery f = codegen::flatten_query(p, c, q);

  // operation atoms: add/3, addOne/2, +/3, addOne/2 (integers ride along)
  int add3 = 0, addOne2 = 0, plus3 = 0, ints = 0, other = 0;
  for (const auto &a : f.atoms) {
    if (a.kind == AtomKind::IntLit) ints++;
    else if (a.name == "add" && a.args.size() == 3) add3++;
    else if (a.name == "addOne" && a.args.size() == 2) addOne2++;
    else if (a.name == "+" && a.args.size() == 3) plus3++;
    else other++;
  }
  CHECK(add3 == 1);
  CHECK(addOne2 == 2);
  CHECK(plus3 == 1);
  CHECK(ints == 3);  // 6, 1, 8
  CHECK(other == 0);

  // linkage: add's result is the query result; its args are the addOne results
  const AtomTemplate *add = nullptr;
  for (const auto &a : f.atoms)
    if (a.name == "add") add = &a;
  REQUIRE(add);
  CHECK(add->args.back() == codegen::k_result_link);
  int feeds = 0;
  for (const auto &a : f.atoms)
    if (a.name == "addOne" && (a.args.back() == add->args[0] || a.args.back() == add->args[1]))
      feeds++;
  CHECK(feeds == 2);
}

TEST_CASE("flatten: a literal is a single atom on the result link") {
  ccfl::Program p = ccfl::parse_ccfl(kProgAdd);
  codegen::Compiled c = codegen::compile_flat(p, {});
  auto atoms = codegen::flatten_expr(p, c, *ccfl::make_int(7), "R");
  REQUIRE(atoms.size() == 1);
  CHECK(atoms[0].kind == AtomKind::IntLit);
  CHECK(atoms[0].args == std::vector<std::string>{"R"});
}

TEST_CASE("flat compilation of the add/addOne/fac program") {
  codegen::Compiled c = compile(kProgAdd);

  SUBCASE("add compiles to one arithmetic rule") {
    const auto *r = rule_named(c, "add_0");
    REQUIRE(r);
    CHECK(r->head.name == "add");
    CHECK(r->head.args.size() == 3);
    REQUIRE(r->body.size() == 1);
    CHECK(r->body[0].name == "+");
  }

  SUBCASE("fac compiles to two guarded rules") {
    const auto *r1 = rule_named(c, "fac_0");
    const auto *r2 = rule_named(c, "fac_1");
    REQUIRE(r1);
    REQUIRE(r2);
    REQUIRE(r1->guard.conjuncts.size() == 1);
    CHECK(r1->guard.conjuncts[0].op == CmpOp::Eq);
    // branch body with the scrutinee folded to the literal: V0 = 1
    REQUIRE(r1->body.size() == 1);
    CHECK(r1->body[0].kind == AtomKind::IntLit);
    CHECK(r1->body[0].value_expr.value == 1);

    REQUIRE(r2->guard.conjuncts.size() == 1);
    CHECK(r2->guard.conjuncts[0].op == CmpOp::Ne);
    // V0 = X*V1, V2 = X-1, app(fac,V2,V1)
    bool has_mul = false, has_sub = false, has_app = false, has_sym = false;
    for (const auto &a : r2->body) {
      if (a.name == "*") has_mul = true;
      if (a.name == "-") has_sub = true;
      if (a.name == "app") has_app = true;
      if (a.name == "fac" && a.args.size() == 1) has_sym = true;
    }
    CHECK(has_mul);
    CHECK(has_sub);
    CHECK(has_app);
    CHECK(has_sym);
  }

  SUBCASE("addOne body is the curried application chain") {
    const auto *r = rule_named(c, "addOne_0");
    REQUIRE(r);
    int apps = 0;
    for (const auto &a : r->body)
      if (a.name == "app") apps++;
    CHECK(apps == 2);
  }

  SUBCASE("application schema: saturated, intermediate, and discharge rules") {
    std::string all;
    for (const auto &r : c.rules)
      if (r.is_app_rule) all += rule_to_text(*rules_flat(c)[0]);  // force textual path works
    // app(fac,V1) :- fac(V1).
    CHECK(rule_named(c, "fac_app0"));
    // app(fac,V1,V2) :- fac(V1,V2).
    const auto *fa1 = rule_named(c, "fac_app1");
    REQUIRE(fa1);
    CHECK(fa1->head.args.size() == 3);
    REQUIRE(fa1->body.size() == 1);
    CHECK(fa1->body[0].name == "fac");
    CHECK(fa1->body[0].args.size() == 2);
    // app(V2,V3,V4), add(V1,V2) :- add(V1,V3,V4).
    const auto *ap = rule_named(c, "add_pap1");
    REQUIRE(ap);
    CHECK(ap->head.name == "app");
    REQUIRE(ap->patterns.size() == 1);
    CHECK(ap->patterns[0].name == "add");
    CHECK(ap->patterns[0].args.size() == 2);
    REQUIRE(ap->body.size() == 1);
    CHECK(ap->body[0].args.size() == 3);
  }
}

TEST_CASE("inline-app folds the saturated chains (the simplified presentation)") {
  codegen::Compiled c = compile(kProgAdd, true);
  const auto *r = rule_named(c, "addOne_0");
  REQUIRE(r);
  // addOne(X,V0) :- add(1,X,V0).
  int apps = 0;
  const AtomTemplate *call = nullptr;
  for (const auto &a : r->body) {
    if (a.name == "app") apps++;
    if (a.name == "add" && a.args.size() == 3) call = &a;
  }
  CHECK(apps == 0);
  REQUIRE(call);
}

TEST_CASE("pattern rules: length is keyed on nil and cons") {
  codegen::Compiled c = compile(kProgLength);
  const auto *rnil = rule_named(c, "length_0");
  const auto *rcons = rule_named(c, "length_1");
  REQUIRE(rnil);
  REQUIRE(rcons);
  REQUIRE(rnil->patterns.size() == 1);
  CHECK(rnil->patterns[0].name == "nil");
  CHECK(rnil->patterns[0].args.size() == 1);
  REQUIRE(rcons->patterns.size() == 1);
  CHECK(rcons->patterns[0].name == "cons");
  CHECK(rcons->patterns[0].args.size() == 3);
  // absence of the constructor atom simply never matches: that is the whole
  // residuation mechanism, so nothing else is generated for it
  CHECK(rnil->guard.empty());
  CHECK(rcons->guard.empty());
}

TEST_CASE("call-by-value layout of the running example") {
  Built b = build(kProgAdd, "add (addOne (6+1)) (addOne 8)", codegen::Strategy::Cbv, true);
  World &w = b.world;

  // exactly the innermost redexes sit in rule-bearing cells
  std::vector<MembraneId> sandwiches, doubles;
  for (MembraneId m : w.mem(w.root()).children) {
    if (is_rule_bearing(w, m)) sandwiches.push_back(m);
    else if (is_protected(w, m)) doubles.push_back(m);
  }
  REQUIRE(sandwiches.size() == 2);
  REQUIRE(doubles.size() == 2);

  bool has_w_cell = false, has_addone8 = false;
  for (MembraneId m : sandwiches) {
    MembraneId inner = w.mem(m).children[0];
    CHECK(counter_value(w, inner) == 0);
    if (subtree_has_atom(w, m, "+")) has_w_cell = true;
    if (subtree_has_atom_with_int_arg(w, m, "addOne", 0, 8)) has_addone8 = true;
  }
  CHECK(has_w_cell);
  CHECK(has_addone8);

  bool has_addone_dep = false, has_add_dep = false;
  for (MembraneId m : doubles) {
    MembraneId inner = w.mem(m).children[0];
    if (subtree_has_atom(w, m, "addOne")) {
      has_addone_dep = true;
      CHECK(counter_value(w, inner) == 1);
    }
    if (subtree_has_atom(w, m, "add")) {
      has_add_dep = true;
      CHECK(counter_value(w, inner) == 2);
    }
  }
  CHECK(has_addone_dep);
  CHECK(has_add_dep);

  // layout invariant: a cell holds rules iff its dependency count is zero
  for (MembraneId m : w.mem(w.root()).children) {
    MembraneId inner = w.mem(m).children[0];
    auto cnt = counter_value(w, inner);
    REQUIRE(cnt.has_value());
    CHECK((*cnt == 0) == !w.mem(m).rules.empty());
  }
}

TEST_CASE("call-by-value fac rule spreads its body over protected cells") {
  codegen::Compiled c = compile(kProgAdd, true);
  auto rules = codegen::rules_cbv(c);
  const RewriteRule *fac1 = nullptr;
  for (const auto &r : rules)
    if (r->name == "fac_1") fac1 = r.get();
  REQUIRE(fac1);
  // lhs: one cell {fac(X,V0), inLinks_(0), $p}
  REQUIRE(fac1->lhs.cells.size() == 1);
  const ProcessTemplate &lhs = *fac1->lhs.cells[0].body;
  CHECK(lhs.proc_contexts.size() == 1);
  bool lhs_has_counter = false;
  for (const auto &a : lhs.atoms)
    if (a.name == "inLinks_") lhs_has_counter = true;
  CHECK(lhs_has_counter);
  // rhs: {{V0=X*V1, $p}}, {V2=X-1}, {{fac(V2,V1)}} with counters
  REQUIRE(fac1->rhs.cells.size() == 3);
  int protected_cells = 0, open_cells = 0;
  bool mul_protected = false, sub_open = false, fac_protected = false;
  for (const auto &cell : fac1->rhs.cells) {
    bool wrapped = cell.body->atoms.empty() && cell.body->cells.size() == 1;
    const ProcessTemplate &inner = wrapped ? *cell.body->cells[0].body : *cell.body;
    if (wrapped) protected_cells++;
    else open_cells++;
    for (const auto &a : inner.atoms) {
      if (a.name == "*") mul_protected = wrapped;
      if (a.name == "-") sub_open = !wrapped;
      if (a.name == "fac" && a.args.size() == 2) fac_protected = wrapped;
    }
  }
  CHECK(protected_cells == 2);
  CHECK(open_cells == 1);
  CHECK(mul_protected);
  CHECK(sub_open);
  CHECK(fac_protected);
}

TEST_CASE("in-place call-by-value rules carry the context along") {
  codegen::Compiled c = compile(kProgAdd, true);
  auto rules = codegen::rules_cbv(c);
  const RewriteRule *add0 = nullptr;
  for (const auto &r : rules)
    if (r->name == "add_0") add0 = r.get();
  REQUIRE(add0);
  // {add(X,Y,V0), $p} :- {V0 = X+Y, $p}.
  REQUIRE(add0->lhs.cells.size() == 1);
  REQUIRE(add0->rhs.cells.size() == 1);
  CHECK(add0->lhs.cells[0].body->proc_contexts.size() == 1);
  CHECK(add0->rhs.cells[0].body->proc_contexts.size() == 1);
  CHECK(add0->rhs.cells[0].body->cells.empty());
}

TEST_CASE("outermost fac rule keeps the root at evaluation level and protects the inner calls") {
  codegen::Compiled c = compile(kProgAdd, true);
  auto rules = codegen::rules_outermost(c);
  const RewriteRule *fac1 = nullptr;
  for (const auto &r : rules.bare)
    if (r->name == "fac_1") fac1 = r.get();
  REQUIRE(fac1);
  // fac(X,V0) :- X =\= 1 | V0 = X*V1, {{V2 = X-1}}, {{fac(V2,V1)}}.
  CHECK(fac1->lhs.atoms.size() == 1);
  bool mul_bare = false;
  for (const auto &a : fac1->rhs.atoms)
    if (a.name == "*") mul_bare = true;
  CHECK(mul_bare);
  REQUIRE(fac1->rhs.cells.size() == 2);
  for (const auto &cell : fac1->rhs.cells) {
    CHECK(cell.body->atoms.empty());
    CHECK(cell.body->cells.size() == 1);
  }
}

TEST_CASE("outermost add and addOne are carried over flat") {
  codegen::Compiled c = compile(kProgAdd, true);
  auto rules = codegen::rules_outermost(c);
  for (const auto &r : rules.bare) {
    if (r->name == "add_0" || r->name == "addOne_0") {
      CHECK(r->rhs.cells.empty());  // flat term structure carried over
      CHECK(!r->rhs.atoms.empty());
    }
  }
}

TEST_CASE("outermost query layout keeps the root call at the evaluation level") {
  Built b = build(kProgAdd, "add (addOne (6+1)) (addOne 8)", codegen::Strategy::Outermost, true);
  World &w = b.world;
  // top level: the add call at evaluation level, three protected cells
  bool add_at_top = false;
  for (AtomId a : w.mem(w.root()).atoms)
    if (w.atom(a).name == "add") add_at_top = true;
  CHECK(add_at_top);
  int prot = 0;
  for (MembraneId m : w.mem(w.root()).children) {
    CHECK(is_protected(w, m));
    prot++;
  }
  CHECK(prot == 3);
  CHECK(!w.mem(w.root()).rules.empty());
}

TEST_CASE("a literal query is a single stable cell with the result readable") {
  Built b = build(kProgAdd, "7", codegen::Strategy::Cbv);
  World &w = b.world;
  REQUIRE(w.mem(w.root()).children.size() == 1);
  CHECK(is_rule_bearing(w, w.mem(w.root()).children[0]));
  CHECK(is_stable(w, w.mem(w.root()).children[0]));
  CHECK(int_result(w, codegen::k_result_link) == 7);
}

TEST_CASE("strict equality compilation") {
  const char *prog =
      "fun eqc :: Int -> C\n"
      "def eqc x = x =:= 0\n"
      "fun pair :: Int -> Int -> C\n"
      "def pair a b = a =:= 0 & b =:= 0\n";
  SUBCASE("a free variable is bound through a connector and succeeds") {
    Built b = build(prog, "eqc x", codegen::Strategy::Cbv);
    RunResult res = run(b.world, SchedulingPolicy::deterministic());
    CHECK(res.status == RunStatus::NormalForm);
    CHECK(!world_has_fail(b.world));
    CHECK(int_result(b.world, "x") == 0);
    CHECK(subtree_has_atom(b.world, b.world.root(), "success"));
  }
  SUBCASE("equal ground terms reduce to success") {
    Built b = build(prog, "3 =:= 3", codegen::Strategy::Cbv);
    run(b.world, SchedulingPolicy::deterministic());
    CHECK(subtree_has_atom(b.world, b.world.root(), "success"));
    CHECK(!world_has_fail(b.world));
  }
  SUBCASE("unequal ground terms reduce to fail at the top level") {
    Built b = build(prog, "3 =:= 4", codegen::Strategy::Cbv);
    run(b.world, SchedulingPolicy::deterministic());
    CHECK(world_has_fail(b.world));
  }
}

TEST_CASE("emitted rewriting programs carry the expected rule shapes") {
  ccfl::Program p = ccfl::parse_ccfl(
      "def add x y = x + y\n"
      "def addOne = add 1\n"
      "def fac x = case x of 1 -> x ;\n"
      "                      n -> n * fac (n-1)\n");
  ccfl::eta_enrich_all(p);
  codegen::CompileOptions o;
  o.inline_app = true;
  codegen::Compiled c = codegen::compile_flat(p, o);
  ccfl::Query q = ccfl::parse_query("fac 3", p);
  codegen::FlatQuery f = codegen::flatten_query(p, c, q);

  std::string cbv = codegen::emit_lmntal(c, f, codegen::Strategy::Cbv);
  CHECK(cbv.find("{{V0 = X*V1, inLinks_(1), $p}}") != std::string::npos);
  CHECK(cbv.find("{V2 = X-1, inLinks_(0)}") != std::string::npos);
  CHECK(cbv.find("{{fac(V2,V1), inLinks_(1)}}") != std::string::npos);
  CHECK(cbv.find("ruleA@@") != std::string::npos);
  CHECK(cbv.find("ruleB@@") != std::string::npos);

  std::string outer = codegen::emit_lmntal(c, f, codegen::Strategy::Outermost);
  CHECK(outer.find("fac(X,V0) :- X =\\= 1 | V0 = X*V1, {{V2 = X-1}}, {{fac(V2,V1)}}.") !=
        std::string::npos);

  std::string flat = codegen::emit_lmntal(c, f, codegen::Strategy::Nondet);
  CHECK(flat.find("add(X,Y,V0) :- V0 = X+Y.") != std::string::npos);
  CHECK(flat.find("app(fac,V1,R) :- fac(V1,R).") != std::string::npos);
}

TEST_CASE("DOT export names membranes as clusters and atoms as nodes") {
  Built b = build(kProgAdd, "add (addOne (6+1)) (addOne 8)", codegen::Strategy::Cbv, true);
  std::string dot = to_dot(b.world);
  CHECK(dot.find("graph world {") == 0);
  CHECK(dot.find("subgraph cluster_m") != std::string::npos);
  CHECK(dot.find("addOne") != std::string::npos);
  CHECK(dot.find(" -- ") != std::string::npos);
}

TEST_CASE("outermost worlds keep exactly one rule set at all times") {
  Built b = build(kProgAdd, "fac (addOne (addOne 3))", codegen::Strategy::Outermost, true);
  World &w = b.world;
  uint64_t prng = 0;
  for (int i = 1; i <= 100; ++i) {
    int carriers = 0;
    for (MembraneId m : w.preorder())
      if (w.mem(m).alive && !w.mem(m).rules.empty()) carriers++;
    CHECK(carriers == 1);  // the top level only
    if (!step(w, SchedulingPolicy::deterministic(), i, prng)) break;
  }
  CHECK(int_result(w, codegen::k_result_link) == 120);
}

TEST_CASE("constructor-valued queries evaluate to full ground terms") {
  const char *lists =
      "data List a = Nil | Cons a (List a)\n"
      "def inc x = x + 1\n"
      "def add x y = x + y\n"
      "def map f l = case l of Nil -> Nil ;\n"
      "                        Cons x xs -> Cons (f x) (map f xs)\n";
  for (auto s : {codegen::Strategy::Cbv, codegen::Strategy::Outermost}) {
    Built b = build(lists, "map (add 2) [1,2,3]", s);
    RunResult res = run(b.world, SchedulingPolicy::deterministic());
    REQUIRE(res.status == RunStatus::NormalForm);
    auto r = read_result(b.world, codegen::k_result_link);
    auto *t = std::get_if<Term>(&r);
    REQUIRE(t);
    CHECK(term_to_string(*t, b.compiled.ctor_display) == "Cons 3 (Cons 4 (Cons 5 Nil))");
  }
}
