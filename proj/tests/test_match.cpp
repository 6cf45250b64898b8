#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <functional>
#include <sstream>

#include "lmncc/match.hpp"
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

// Independent oracle: enumerate all injective assignments of lhs atom
// templates to the atoms of a membrane, with no indexing or pruning, and
// count those whose link constraints and guard hold. Covers atom-only rules
// (the completeness bound the matcher is checked against).
int brute_force_matches(World &w, const RewriteRule &r, MembraneId site) {
  const auto &atoms = w.mem(site).atoms;
  std::vector<bool> used(atoms.size(), false);
  int count = 0;
  std::function<void(size_t, std::map<std::string, LinkId>)> rec =
      [&](size_t i, std::map<std::string, LinkId> links) {
        if (i == r.lhs.atoms.size()) {
          if (eval_guard(w, r.guard, links) == GuardResult::True) count++;
          return;
        }
        const AtomTemplate &t = r.lhs.atoms[i];
        for (size_t j = 0; j < atoms.size(); ++j) {
          if (used[j]) continue;
          const Atom &a = w.atom(atoms[j]);
          if (t.kind == AtomKind::IntLit) {
            if (!a.is_int() || a.value != t.value_expr.value) continue;
          } else if (t.kind == AtomKind::Plain) {
            if (a.kind != AtomKind::Plain || a.name != t.name) continue;
          } else {
            if (!a.is_connector()) continue;
          }
          if (a.args.size() != t.args.size()) continue;
          auto l2 = links;
          bool ok = true;
          for (size_t k = 0; k < t.args.size() && ok; ++k) {
            auto it = l2.find(t.args[k]);
            if (it == l2.end()) l2[t.args[k]] = a.args[k];
            else if (it->second != a.args[k]) ok = false;
          }
          if (!ok) continue;
          used[j] = true;
          rec(i + 1, l2);
          used[j] = false;
        }
      };
  rec(0, {});
  return count;
}

}  // namespace

TEST_CASE("bubble rule: three matches on the unsorted list, oracle-checked") {
  World w = parse_world(read_file(std::string(TEST_DATA_DIR) + "/programs/bubble.lmn"));
  REQUIRE(w.mem(w.root()).rules.size() == 1);
  const RewriteRule &rule = *w.mem(w.root()).rules[0];
  int oracle = brute_force_matches(w, rule, w.root());
  auto found = find_matches(w, rule, w.root());
  CHECK(oracle == 3);  // inversions at (2,1), (5,0), (6,3)
  CHECK((int)found.size() == oracle);
}

TEST_CASE("bubble rule: no matches on a sorted list") {
  World w = parse_world("bubble@@ L=[X,Y|L2] :- X > Y | L=[Y,X|L2]. aList = [0,1,2].");
  const RewriteRule &rule = *w.mem(w.root()).rules[0];
  CHECK(find_matches(w, rule, w.root()).empty());
  CHECK(brute_force_matches(w, rule, w.root()) == 0);
}

TEST_CASE("matcher agrees with brute force on small instances") {
  struct Case {
    const char *rule;
    const char *world;
  };
  Case cases[] = {
      {"r@@ f(X), g(X) :- h(X).", "f(A), g(A), f(B), g(B)"},
      {"r@@ f(X), g(Y) :- h(X,Y).", "f(A), g(B), g(C)"},
      {"r@@ p(X,Y) :- X > Y | q.", "p(A,B), A = 3, B = 1, p(C,D), C = 1, D = 3"},
      {"r@@ f(X), f(Y) :- g(X,Y).", "f(A), f(B), f(C)"},
      {"r@@ a :- b.", "a, a"},
  };
  for (const auto &c : cases) {
    World w = parse_world(std::string(c.rule) + " " + c.world);
    const RewriteRule &rule = *w.mem(w.root()).rules[0];
    CHECK((int)find_matches(w, rule, w.root()).size() ==
          brute_force_matches(w, rule, w.root()));
  }
}

TEST_CASE("migration rule matches the nested cell with contexts bound") {
  World w = parse_world(read_file(std::string(TEST_DATA_DIR) + "/programs/membranes.lmn"));
  REQUIRE(w.mem(w.root()).rules.size() == 2);
  const RewriteRule &rule_in = *w.mem(w.root()).rules[0];
  auto matches = find_matches(w, rule_in, w.root());
  // one per inner cell choice for {$p}
  CHECK(matches.size() == 2);
  for (const auto &m : matches) {
    REQUIRE(m.rule_ctx.count("r"));
    CHECK(m.rule_ctx.at("r").size() == 1);  // the addOne rule
    REQUIRE(m.proc_ctx.count("p"));
    REQUIRE(m.proc_ctx.count("s"));
    CHECK(m.proc_ctx.at("s").cells.size() == 1);  // the other inner cell
  }
}

TEST_CASE("is_stable") {
  SUBCASE("a cell whose rule cannot fire is stable") {
    World w = parse_world("{addOne(A,B) :- B = 1 + A. E=5}");
    MembraneId c = w.mem(w.root()).children[0];
    CHECK(is_stable(w, c));
  }
  SUBCASE("a cell with an applicable rule is not stable") {
    World w = parse_world("{addOne(A,B) :- B = 1 + A. addOne(4,E)}");
    MembraneId c = w.mem(w.root()).children[0];
    CHECK(!is_stable(w, c));
  }
  SUBCASE("a pending arithmetic reduction keeps a cell unstable") {
    World w = parse_world("{addOne(A,B) :- B = 1 + A. E = 1+4}");
    MembraneId c = w.mem(w.root()).children[0];
    CHECK(!is_stable(w, c));
  }
  SUBCASE("an empty membrane is stable") {
    World w;
    MembraneId m = w.new_membrane(w.root());
    CHECK(is_stable(w, m));
  }
}

TEST_CASE("the stable flag gates matching") {
  // out-rule requires the inner cell to be stable; with work left it must
  // not match
  World w = parse_world(
      "out@@ {{@r,$p}/,$s} :- {@r,$p,$s}. "
      "{{addOne(A,B) :- B = 1 + A. addOne(4,E)}, {x}}");
  const RewriteRule &rule = *w.mem(w.root()).rules[0];
  CHECK(find_matches(w, rule, w.root()).empty());

  World w2 = parse_world(
      "out@@ {{@r,$p}/,$s} :- {@r,$p,$s}. "
      "{{addOne(A,B) :- B = 1 + A. E=5}, {x}}");
  const RewriteRule &rule2 = *w2.mem(w2.root()).rules[0];
  CHECK(find_matches(w2, rule2, w2.root()).size() == 1);
}

TEST_CASE("eval_guard: true, false, suspended") {
  World w = parse_world("p(X), X = 1, q(Y)");
  auto lx = w.find_named("X");
  auto ly = w.find_named("Y");
  REQUIRE(lx);
  REQUIRE(ly);
  std::map<std::string, LinkId> links{{"X", *lx}, {"Y", *ly}};

  Guard eq1;
  eq1.conjuncts.push_back({CmpOp::Eq, IntExpr::variable("X"), IntExpr::constant(1)});
  CHECK(eval_guard(w, eq1, links) == GuardResult::True);

  Guard ne1;
  ne1.conjuncts.push_back({CmpOp::Ne, IntExpr::variable("X"), IntExpr::constant(1)});
  CHECK(eval_guard(w, ne1, links) == GuardResult::False);

  Guard gy;
  gy.conjuncts.push_back({CmpOp::Gt, IntExpr::variable("X"), IntExpr::variable("Y")});
  CHECK(eval_guard(w, gy, links) == GuardResult::Suspended);
}

TEST_CASE("guard evaluation is a function of ground values only") {
  // Extending the world with unrelated atoms never flips a decided guard.
  World w = parse_world("p(X), X = 3");
  auto lx = w.find_named("X");
  std::map<std::string, LinkId> links{{"X", *lx}};
  Guard g;
  g.conjuncts.push_back({CmpOp::Gt, IntExpr::variable("X"), IntExpr::constant(1)});
  auto before = eval_guard(w, g, links);
  w.add_atom(w.root(), "noise", {});
  CHECK(eval_guard(w, g, links) == before);
}

TEST_CASE("matches are ordered deterministically by site position") {
  World w = parse_world("r@@ f(X) :- g(X). f(A), f(B), f(C)");
  const RewriteRule &rule = *w.mem(w.root()).rules[0];
  auto ms = find_matches(w, rule, w.root());
  REQUIRE(ms.size() == 3);
  CHECK(ms[0].pos_key < ms[1].pos_key);
  CHECK(ms[1].pos_key < ms[2].pos_key);
}
