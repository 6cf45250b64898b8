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

// A reorganization scenario: a finished producer cell holding 7 on link W,
// a waiting consumer holding q(W,...) with the given dependency count.
World ab_world(int64_t consumer_count) {
  World w(World::LinkMode::Relaxed);
  w.add_rule(w.root(), rule_a());
  w.add_rule(w.root(), rule_b());
  LinkId wl = w.named_link("W");
  LinkId xl = w.named_link("X");

  MembraneId prod = w.new_membrane(w.root());
  w.add_rule(prod, parse_rule("{addOne(A,B), $p} :- {B = 1+A, $p}."));
  MembraneId prod_in = w.new_membrane(prod);
  w.add_atom(prod_in, "7", {wl}, AtomKind::IntLit, 7);
  LinkId c0 = w.new_link();
  w.add_atom(prod_in, "inLinks_", {c0});
  w.add_atom(prod_in, "0", {c0}, AtomKind::IntLit, 0);

  MembraneId cons = w.new_membrane(w.root());
  MembraneId cons_in = w.new_membrane(cons);
  w.add_atom(cons_in, "addOne", {wl, xl});
  LinkId cn = w.new_link();
  w.add_atom(cons_in, "inLinks_", {cn});
  w.add_atom(cons_in, std::to_string(consumer_count), {cn}, AtomKind::IntLit, consumer_count);
  return w;
}

int count_rule_matches(World &w, const RulePtr &r) {
  return (int)find_matches(w, *r, w.root()).size();
}

}  // namespace

TEST_CASE("rule A merges a finished producer into its last consumer, granting rules") {
  World w = ab_world(1);
  auto ms = find_matches(w, *w.mem(w.root()).rules[0], w.root());
  REQUIRE(ms.size() == 1);
  apply_match(w, ms[0], 1);
  // one merged rule-bearing cell remains
  REQUIRE(w.mem(w.root()).children.size() == 1);
  MembraneId merged = w.mem(w.root()).children[0];
  CHECK(is_rule_bearing(w, merged));
  MembraneId inner = w.mem(merged).children[0];
  CHECK(counter_value(w, inner) == 0);
  CHECK(subtree_has_atom_with_int_arg(w, merged, "addOne", 0, 7));
  // and the merged cell now reduces to X = 8
  run(w, SchedulingPolicy::deterministic());
  CHECK(int_result(w, "X") == 8);
}

TEST_CASE("rule A does not fire when the producer is not stable") {
  World w = ab_world(1);
  // make the producer unstable: an applicable addOne atom inside
  MembraneId prod = w.mem(w.root()).children[0];
  MembraneId prod_in = w.mem(prod).children[0];
  LinkId e = w.named_link("E");
  LinkId f = w.new_link();
  w.add_atom(prod_in, "4", {f}, AtomKind::IntLit, 4);
  w.add_atom(prod_in, "addOne", {f, e});
  CHECK(count_rule_matches(w, w.mem(w.root()).rules[0]) == 0);
  CHECK(count_rule_matches(w, w.mem(w.root()).rules[1]) == 0);
}

TEST_CASE("rules A and B have disjoint guards") {
  for (int64_t n = 1; n <= 5; ++n) {
    World w = ab_world(n);
    int a = count_rule_matches(w, w.mem(w.root()).rules[0]);
    int b = count_rule_matches(w, w.mem(w.root()).rules[1]);
    CHECK(a + b == 1);
    CHECK(a == (n == 1 ? 1 : 0));
    CHECK(b == (n > 1 ? 1 : 0));
  }
}

TEST_CASE("rule B merges without rules and decrements the counter") {
  World w = ab_world(2);
  auto ms = find_matches(w, *w.mem(w.root()).rules[1], w.root());
  REQUIRE(ms.size() == 1);
  apply_match(w, ms[0], 1);
  REQUIRE(w.mem(w.root()).children.size() == 1);
  MembraneId merged = w.mem(w.root()).children[0];
  CHECK(is_protected(w, merged));  // double wrapped, no rules
  MembraneId inner = w.mem(merged).children[0];
  CHECK(counter_value(w, inner) == 1);  // N-1
  CHECK(subtree_has_atom_with_int_arg(w, merged, "addOne", 0, 7));
}

TEST_CASE("rule C lifts a protected producer toward the evaluation level") {
  Built b = build(kProgAdd, "fac (addOne (addOne 3))", codegen::Strategy::Outermost, true);
  World &w = b.world;
  uint64_t prng = 0;
  auto ev = step(w, SchedulingPolicy::deterministic(), 1, prng);
  REQUIRE(ev);
  CHECK(ev->rule_name == "ruleC");
  // the lifted cell holds the producer of fac's argument: addOne(Y,X) with
  // an unevaluated first argument
  bool lifted_found = false;
  for (MembraneId m : w.mem(w.root()).children) {
    if (is_protected(w, m)) continue;
    for (AtomId a : w.mem(m).atoms) {
      const Atom &at = w.atom(a);
      if (at.name == "addOne" && !w.ground_int(at.args[0])) lifted_found = true;
    }
  }
  CHECK(lifted_found);
}

TEST_CASE("rule C has no match without a protected producer") {
  World w(World::LinkMode::Relaxed);
  w.add_rule(w.root(), rule_d());
  w.add_rule(w.root(), rule_c());
  LinkId x = w.named_link("X");
  LinkId r = w.named_link("R");
  w.add_atom(w.root(), "fac", {x, r});
  CHECK(collect_candidates(w).empty());
}

TEST_CASE("rule D merges lifted producers of an arithmetic root") {
  // Z = X+Y with both producers already lifted to single cells
  World w(World::LinkMode::Relaxed);
  w.add_rule(w.root(), rule_d());
  w.add_rule(w.root(), rule_c());
  LinkId x = w.named_link("X");
  LinkId y = w.named_link("Y");
  LinkId z = w.named_link("Z");
  w.add_atom(w.root(), "+", {x, y, z});
  MembraneId p1 = w.new_membrane(w.root());
  LinkId w7 = w.new_link();
  w.add_atom(p1, "addOne", {w7, x});
  MembraneId p2 = w.new_membrane(w.root());
  LinkId e8 = w.new_link();
  w.add_atom(p2, "8", {e8}, AtomKind::IntLit, 8);
  w.add_atom(p2, "addOne", {e8, y});

  auto cands = collect_candidates(w);
  REQUIRE(!cands.empty());
  CHECK(cands[0].kind == Candidate::Kind::MergeD);
  apply_candidate(w, cands[0], 1);
  // both producer cells dissolved onto the evaluation level
  CHECK(w.mem(w.root()).children.empty());
  int addones = 0;
  for (AtomId a : w.mem(w.root()).atoms)
    if (w.atom(a).name == "addOne") addones++;
  CHECK(addones == 2);
}

TEST_CASE("rule D does not fire on a non-arithmetic root") {
  World w(World::LinkMode::Relaxed);
  w.add_rule(w.root(), rule_d());
  LinkId x = w.named_link("X");
  LinkId r = w.named_link("R");
  w.add_atom(w.root(), "fac", {x, r});
  MembraneId p1 = w.new_membrane(w.root());
  LinkId f = w.new_link();
  w.add_atom(p1, "5", {f}, AtomKind::IntLit, 5);
  w.add_atom(p1, "addOne", {f, x});
  for (const auto &c : collect_candidates(w)) CHECK(c.kind != Candidate::Kind::MergeD);
}

TEST_CASE("read_result") {
  SUBCASE("Example 1 after a call-by-value run reads 17") {
    Built b = build(kProgAdd, "add (addOne (6+1)) (addOne 8)", codegen::Strategy::Cbv, true);
    run(b.world, SchedulingPolicy::deterministic());
    CHECK(int_result(b.world, codegen::k_result_link) == 17);
  }
  SUBCASE("a constructor tree reads back as a term") {
    Built b = build(
        "data List a = Nil | Cons a (List a)\n"
        "def two = Cons 1 (Cons 2 Nil)\n",
        "two", codegen::Strategy::Cbv);
    run(b.world, SchedulingPolicy::deterministic());
    auto r = read_result(b.world, codegen::k_result_link);
    auto *t = std::get_if<Term>(&r);
    REQUIRE(t);
    CHECK(term_to_string(*t, b.compiled.ctor_display) == "Cons 1 (Cons 2 Nil)");
  }
  SUBCASE("an unbound result reads as suspended") {
    Built b = build(kProgAdd, "4 + x", codegen::Strategy::Cbv);
    run(b.world, SchedulingPolicy::deterministic());
    auto r = read_result(b.world, codegen::k_result_link);
    CHECK(std::holds_alternative<ReadSuspended>(r));
  }
  SUBCASE("a fail atom wins") {
    Built b = build("fun c :: Int -> C\ndef c x = x =:= 0\n", "3 =:= 4",
                    codegen::Strategy::Cbv);
    run(b.world, SchedulingPolicy::deterministic());
    auto r = read_result(b.world, codegen::k_result_link);
    CHECK(std::holds_alternative<ReadFail>(r));
  }
}

TEST_CASE("strategy agreement on closed terminating programs") {
  struct Case {
    const char *query;
    int64_t expected;
  };
  Case cases[] = {
      {"add (addOne (6+1)) (addOne 8)", 17},
      {"fac 5", 120},
      {"fac (addOne (addOne 3))", 120},
      {"add (add 1 2) (add 3 4)", 10},
  };
  for (const auto &cs : cases) {
    Built cbv = build(kProgAdd, cs.query, codegen::Strategy::Cbv, true);
    Built out = build(kProgAdd, cs.query, codegen::Strategy::Outermost, true);
    run(cbv.world, SchedulingPolicy::deterministic());
    run(out.world, SchedulingPolicy::deterministic());
    CHECK(int_result(cbv.world, codegen::k_result_link) == cs.expected);
    CHECK(int_result(out.world, codegen::k_result_link) == cs.expected);
  }
}

TEST_CASE("lift-once: at most one program step touches a lifted cell before re-protection") {
  Built b = build(kProgAdd, "fac (addOne (addOne 3))", codegen::Strategy::Outermost, true);
  World &w = b.world;
  // Track cells exposed by lift events; until consumed, at most one
  // program-rule application may rewrite each.
  std::map<MembraneId, int> touches;
  for (int i = 1; i <= 200; ++i) {
    auto cands = collect_candidates(w);
    if (cands.empty()) break;
    const Candidate &c = cands[0];
    if (c.kind == Candidate::Kind::Rule && !c.binding.matched_cells.empty()) {
      for (MembraneId m : c.binding.matched_cells)
        if (touches.count(m)) {
          touches[m]++;
          CHECK(touches[m] <= 1);
        }
    }
    TraceEvent ev = apply_candidate(w, c, i);
    if (ev.rule_name == "ruleC") {
      for (MembraneId m : w.mem(w.root()).children)
        if (w.mem(m).alive && !is_protected(w, m) && !touches.count(m)) touches[m] = 0;
    }
  }
  CHECK(int_result(w, codegen::k_result_link) == 120);
}
