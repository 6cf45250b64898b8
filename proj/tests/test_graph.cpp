#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lmncc/graph.hpp"
#include "lmncc/text.hpp"

using namespace lmncc;

TEST_CASE("new membranes are empty and register with their parent") {
  World w;
  MembraneId m = w.new_membrane(std::nullopt);
  CHECK(w.mem(m).atoms.empty());
  CHECK(w.mem(m).children.empty());
  CHECK(w.mem(m).rules.empty());

  size_t before = w.mem(w.root()).children.size();
  MembraneId c = w.new_membrane(w.root());
  CHECK(w.mem(w.root()).children.size() == before + 1);
  CHECK(w.depth(c) == w.depth(w.root()) + 1);

  MembraneId gc = w.new_membrane(c);
  CHECK(w.depth(gc) == w.depth(c) + 1);
}

TEST_CASE("link occurrence accounting") {
  World w;
  LinkId a = w.named_link("A");
  LinkId b = w.named_link("B");
  LinkId d = w.named_link("D");
  LinkId e = w.named_link("E");
  w.add_atom(w.root(), "f", {a, b, e});
  w.add_atom(w.root(), "7", {a}, AtomKind::IntLit, 7);
  w.add_atom(w.root(), "g", {d, b});
  CHECK(w.link_occurrences(a) == 2);
  CHECK(w.link_occurrences(b) == 2);
  CHECK(w.link_occurrences(d) == 1);
  CHECK(w.link_occurrences(e) == 1);
}

TEST_CASE("strict mode rejects a third occurrence; relaxed flags a hyperlink") {
  World strict(World::LinkMode::Strict);
  LinkId l = strict.named_link("L");
  strict.add_atom(strict.root(), "x", {l});
  strict.add_atom(strict.root(), "y", {l});
  CHECK_THROWS_AS(strict.add_atom(strict.root(), "z", {l}), LinkArityViolation);

  World relaxed(World::LinkMode::Relaxed);
  LinkId r = relaxed.named_link("L");
  relaxed.add_atom(relaxed.root(), "x", {r});
  relaxed.add_atom(relaxed.root(), "y", {r});
  CHECK_NOTHROW(relaxed.add_atom(relaxed.root(), "z", {r}));
  CHECK(relaxed.link(r).hyper);
}

TEST_CASE("membrane tree stays acyclic through construction") {
  World w;
  MembraneId a = w.new_membrane(w.root());
  MembraneId b = w.new_membrane(a);
  MembraneId c = w.new_membrane(b);
  CHECK(w.is_ancestor(w.root(), c));
  CHECK(w.is_ancestor(a, c));
  CHECK(!w.is_ancestor(c, a));
}

TEST_CASE("fuse_connectors: shorthand and expanded forms normalize to the same graph") {
  World expanded = parse_world("E = f(A,B), A = 7, B = g(D)");
  World shorthand = parse_world("E = f(7,g(D))");
  CHECK(isomorphic(expanded, expanded.root(), shorthand, shorthand.root()));
}

TEST_CASE("fuse_connectors is the identity without connectors, and idempotent") {
  World w = parse_world("f(A,B), A = 7");
  std::string before = serialize_world(w);
  w.fuse_connectors(w.root());
  CHECK(serialize_world(w) == before);
  w.fuse_connectors(w.root());
  CHECK(serialize_world(w) == before);
}

TEST_CASE("copy_membrane: fresh ids for internal links, shared free links") {
  World w(World::LinkMode::Relaxed);
  MembraneId cell = w.new_membrane(w.root());
  LinkId internal = w.new_link();
  LinkId crossing = w.named_link("X");
  w.add_atom(cell, "f", {internal, crossing});
  w.add_atom(cell, "g", {internal});
  w.add_atom(w.root(), "h", {crossing});

  MembraneId copy = w.copy_membrane(cell, w.root());

  // internal links of the copy never reuse an id from the original
  std::set<LinkId> orig_links, copy_links;
  for (AtomId a : w.mem(cell).atoms)
    for (LinkId l : w.atom(a).args) orig_links.insert(l);
  for (AtomId a : w.mem(copy).atoms)
    for (LinkId l : w.atom(a).args) copy_links.insert(l);
  for (LinkId l : copy_links) {
    if (l == crossing) continue;  // free link of the fragment is shared
    CHECK(!orig_links.count(l));
  }
  CHECK(copy_links.count(crossing));
  // the crossing link now has three endpoints (original, h, copy)
  CHECK(w.link_occurrences(crossing) >= 3);
}

TEST_CASE("copy of an empty membrane is empty") {
  World w;
  MembraneId cell = w.new_membrane(w.root());
  MembraneId copy = w.copy_membrane(cell, w.root());
  CHECK(w.mem(copy).atoms.empty());
  CHECK(w.mem(copy).children.empty());
}

TEST_CASE("rules are copied verbatim") {
  World w;
  MembraneId cell = w.new_membrane(w.root());
  w.add_rule(cell, parse_rule("addOne(A,B) :- B = 1 + A."));
  MembraneId copy = w.copy_membrane(cell, w.root());
  REQUIRE(w.mem(copy).rules.size() == 1);
  CHECK(rule_to_text(*w.mem(copy).rules[0]) == rule_to_text(*w.mem(cell).rules[0]));
}

TEST_CASE("strict mode holds the occurrence bound across mixed operations") {
  World w(World::LinkMode::Strict);
  // a little adversarial sequence: adds, moves, fusions
  MembraneId cell = w.new_membrane(w.root());
  LinkId a = w.named_link("A");
  LinkId b = w.named_link("B");
  AtomId f = w.add_atom(w.root(), "f", {a});
  w.add_atom(cell, "g", {a, b});
  w.move_atom(f, cell);
  CHECK_THROWS_AS(w.add_atom(cell, "h", {a}), LinkArityViolation);
  w.add_atom(cell, "h", {b});
  for (LinkId l : {a, b}) CHECK(w.link_occurrences(l) <= 2);
}
