#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "lmncc/engine.hpp"
#include "lmncc/strategy.hpp"
#include "lmncc/text.hpp"

using namespace lmncc;

namespace {

std::string read_file(const std::string &path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

World load(const std::string &name) {
  return parse_world(read_file(std::string(TEST_DATA_DIR) + "/programs/" + name));
}

std::vector<int64_t> list_values(const World &w, const std::string &head_atom) {
  // follow the cons chain hanging off the named head atom
  std::vector<int64_t> out;
  for (MembraneId m : w.preorder()) {
    for (AtomId a : w.mem(m).atoms) {
      const Atom &at = w.atom(a);
      if (at.name != head_atom || !at.alive) continue;
      auto t = resolve_term(w, at.args[0]);
      REQUIRE(t.has_value());
      const Term *cur = &*t;
      while (cur->ctor == "cons") {
        REQUIRE(cur->kids.size() == 2);
        REQUIRE(cur->kids[0].is_int);
        out.push_back(cur->kids[0].value);
        cur = &cur->kids[1];
      }
      CHECK(cur->ctor == "nil");
      return out;
    }
  }
  FAIL("head atom not found");
  return out;
}

}  // namespace

TEST_CASE("arithmetic reduction") {
  SUBCASE("E=1+4 becomes E=5") {
    World w = parse_world("E = 1+4");
    auto ev = reduce_arith(w);
    REQUIRE(ev.has_value());
    CHECK(ev->rule_name == "builtin-arith");
    auto t = resolve_term(w, *w.find_named("E"));
    REQUIRE(t.has_value());
    CHECK(t->value == 5);
  }
  SUBCASE("W=6+1 becomes W=7") {
    World w = parse_world("W = 6+1");
    REQUIRE(reduce_arith(w).has_value());
    CHECK(resolve_term(w, *w.find_named("W"))->value == 7);
  }
  SUBCASE("an unbound operand suspends") {
    World w = parse_world("X = 1+Y, p(Y)");
    CHECK(!reduce_arith(w).has_value());
  }
  SUBCASE("overflow is an error, not a wrap") {
    World w = parse_world("A = 9223372036854775807, B = 2, R = A*B, p(R)");
    // build the arith atom by hand since literals parse fine
    CHECK_THROWS_AS(reduce_arith(w), ArithmeticError);
  }
}

TEST_CASE("apply_match: bubble swap rewrites [2,1|T] to [1,2|T]") {
  World w = parse_world("bubble@@ L=[X,Y|L2] :- X > Y | L=[Y,X|L2]. aList = [2,1].");
  const RewriteRule &rule = *w.mem(w.root()).rules[0];
  auto ms = find_matches(w, rule, w.root());
  REQUIRE(ms.size() == 1);
  apply_match(w, ms[0], 1);
  CHECK(list_values(w, "aList") == std::vector<int64_t>{1, 2});
}

TEST_CASE("apply_match: an empty rhs deletes the matched atom") {
  World w = parse_world("gone@@ f(X), g(X) :- . f(A), g(A), h");
  const RewriteRule &rule = *w.mem(w.root()).rules[0];
  auto ms = find_matches(w, rule, w.root());
  REQUIRE(ms.size() == 1);
  size_t before = w.mem(w.root()).atoms.size();
  apply_match(w, ms[0], 1);
  CHECK(w.mem(w.root()).atoms.size() == before - 2);
}

TEST_CASE("apply_match: stale bindings are rejected") {
  World w = parse_world("r@@ f(X) :- g(X). f(A), p");
  const RewriteRule &rule = *w.mem(w.root()).rules[0];
  auto ms = find_matches(w, rule, w.root());
  REQUIRE(ms.size() == 1);
  w.add_atom(w.root(), "noise", {});
  CHECK_THROWS_AS(apply_match(w, ms[0], 1), StaleBinding);
}

TEST_CASE("step on a stable world yields nothing") {
  World w = parse_world("r@@ f(X) :- g(X). h");
  uint64_t prng = 0;
  CHECK(!step(w, SchedulingPolicy::deterministic(), 1, prng).has_value());
}

TEST_CASE("run rejects a zero step budget") {
  World w = parse_world("a");
  CHECK_THROWS_AS(run(w, SchedulingPolicy::deterministic(0)), std::invalid_argument);
}

TEST_CASE("membrane migration program reaches its normal form in 8 steps") {
  World w = load("membranes.lmn");
  RunResult res = run(w, SchedulingPolicy::deterministic());
  CHECK(res.status == RunStatus::NormalForm);
  CHECK(res.trace.size() == 8);

  // derivation shape: in, addOne, +, out, in, addOne, +, out
  std::vector<std::string> names;
  for (const auto &ev : res.trace) names.push_back(ev.rule_name);
  std::vector<std::string> expected{"in",          "<anon>", "builtin-arith", "out",
                                    "in",          "<anon>", "builtin-arith", "out"};
  CHECK(names == expected);

  // final state: the outer cell holds the rule plus E=5 and D=3
  std::string final = serialize_world(w);
  CHECK(final.find("E = 5") != std::string::npos);
  CHECK(final.find("D = 3") != std::string::npos);
  REQUIRE(w.mem(w.root()).children.size() == 1);
  MembraneId outer = w.mem(w.root()).children[0];
  CHECK(w.mem(outer).rules.size() == 1);
  CHECK(w.mem(outer).children.empty());
  CHECK(is_stable(w, w.root()));
}

TEST_CASE("bubble sort reaches the sorted list under any seed") {
  std::vector<int64_t> expected{0, 1, 2, 3, 4, 5, 6};
  for (uint64_t seed : {0ull, 1ull, 2ull, 17ull, 99ull}) {
    World w = load("bubble.lmn");
    SchedulingPolicy p = seed == 0 ? SchedulingPolicy::deterministic()
                                   : SchedulingPolicy::seeded(seed);
    RunResult res = run(w, p);
    CHECK(res.status == RunStatus::NormalForm);
    CHECK(list_values(w, "aList") == expected);
  }
}

TEST_CASE("seeded runs replay bit-exactly") {
  auto trace_of = [&](uint64_t seed) {
    World w = load("bubble.lmn");
    RunResult res = run(w, SchedulingPolicy::seeded(seed));
    std::string all;
    for (const auto &ev : res.trace) all += ev.to_line() + "\n";
    return all;
  };
  CHECK(trace_of(42) == trace_of(42));
  CHECK(trace_of(42) != trace_of(43));
}

TEST_CASE("budget exhaustion is reported") {
  World w = parse_world("spin@@ a :- a. a");
  RunResult res = run(w, SchedulingPolicy::deterministic(25));
  CHECK(res.status == RunStatus::BudgetExhausted);
  CHECK(res.trace.size() == 25);
}

TEST_CASE("trace events snapshot consumed and produced fragments") {
  World w = parse_world("r@@ f(X), X = 3 :- X > 1 | g. f(A), A = 3");
  RunResult res = run(w, SchedulingPolicy::deterministic());
  REQUIRE(res.trace.size() == 1);
  CHECK(res.trace[0].rule_name == "r");
  CHECK(res.trace[0].consumed.find("f(") != std::string::npos);
  CHECK(res.trace[0].produced.find("g") != std::string::npos);
  CHECK(res.trace[0].to_line().find("#1 r @m") == 0);
}

TEST_CASE("soundness: applying any returned match preserves the occurrence bound") {
  World w = parse_world(read_file(std::string(TEST_DATA_DIR) + "/programs/bubble.lmn"));
  const RewriteRule rule = *w.mem(w.root()).rules[0];
  auto ms = find_matches(w, rule, w.root());
  REQUIRE(ms.size() == 3);
  // apply each match on a fresh copy of the world
  for (size_t i = 0; i < ms.size(); ++i) {
    World w2 = parse_world(read_file(std::string(TEST_DATA_DIR) + "/programs/bubble.lmn"));
    auto ms2 = find_matches(w2, *w2.mem(w2.root()).rules[0], w2.root());
    apply_match(w2, ms2[i], 1);
    for (AtomId a : w2.mem(w2.root()).atoms)
      for (LinkId l : w2.atom(a).args) CHECK(w2.link_occurrences(l) <= 2);
  }
}

TEST_CASE("stability at rest: a normal form has no matches and no pending arithmetic") {
  World w = load("membranes.lmn");
  RunResult res = run(w, SchedulingPolicy::deterministic());
  REQUIRE(res.status == RunStatus::NormalForm);
  for (MembraneId m : w.preorder())
    for (const RulePtr &r : w.mem(m).rules)
      CHECK(find_matches(w, *r, m).empty());
  CHECK(!reduce_arith(w).has_value());
  CHECK(collect_candidates(w).empty());
}
