#ifndef LMNCC_TEXT_HPP
#define LMNCC_TEXT_HPP

#include <string>

#include "lmncc/graph.hpp"

namespace lmncc {

struct SyntaxError : std::runtime_error {
  int line, col;
  SyntaxError(const std::string &msg, int line_, int col_)
      : std::runtime_error(msg + " at " + std::to_string(line_) + ":" + std::to_string(col_)),
        line(line_),
        col(col_) {}
};

// Parses program text in the engine's concrete syntax into the contents of
// `dest` (usually the root). Rules end with '.', entities are separated by
// ','. Upper-case identifiers are links: in rules they are link variables,
// in world position they name world links (single occurrence = free link).
void parse_into(World &w, MembraneId dest, const std::string &text);

World parse_world(const std::string &text, World::LinkMode mode = World::LinkMode::Strict);

// Parses a single rule, e.g. "name@@ lhs :- g | rhs.".
RulePtr parse_rule(const std::string &text);

// Canonical textual form: atoms ordered by (name, arity, value), child
// cells by their serialized form, links numbered by first use. A fixpoint
// of serialize(parse(.)).
std::string serialize(const World &w, MembraneId m);
std::string serialize_world(const World &w);

// Fragment form used in traces.
std::string serialize_atoms(const World &w, const std::vector<AtomId> &atoms,
                            const std::vector<MembraneId> &mems);

std::string rule_to_text(const RewriteRule &r);

// Graphviz export: membranes as clusters, atoms as nodes, links as edges.
std::string to_dot(const World &w);

// Membrane-tree equality up to multiset order and link renaming.
bool isomorphic(const World &wa, MembraneId a, const World &wb, MembraneId b);

}  // namespace lmncc

#endif
