#ifndef LMNCC_TEST_HELPERS_HPP
#define LMNCC_TEST_HELPERS_HPP

#include <optional>
#include <string>
#include <vector>

#include "lmncc/ccfl.hpp"
#include "lmncc/codegen.hpp"
#include "lmncc/engine.hpp"
#include "lmncc/strategy.hpp"
#include "lmncc/text.hpp"

namespace testutil {

using namespace lmncc;

inline codegen::Compiled compile(const std::string &src, bool inline_app = false) {
  ccfl::Program p = ccfl::parse_ccfl(src);
  ccfl::eta_enrich_all(p);
  codegen::CompileOptions o;
  o.inline_app = inline_app;
  return codegen::compile_flat(p, o);
}

struct Built {
  ccfl::Program program;
  codegen::Compiled compiled;
  codegen::FlatQuery flat;
  World world;
};

inline Built build(const std::string &src, const std::string &query, codegen::Strategy s,
                   bool inline_app = false) {
  ccfl::Program p = ccfl::parse_ccfl(src);
  ccfl::eta_enrich_all(p);
  codegen::CompileOptions o;
  o.inline_app = inline_app;
  codegen::Compiled c = codegen::compile_flat(p, o);
  ccfl::Query q = ccfl::parse_query(query, p);
  codegen::FlatQuery f = codegen::flatten_query(p, c, q);
  World w = codegen::build_world(c, f, s);
  return Built{std::move(p), std::move(c), std::move(f), std::move(w)};
}

// {{...}}: no atoms, no rules, exactly one child.
inline bool is_protected(const World &w, MembraneId m) {
  const Membrane &mm = w.mem(m);
  return mm.atoms.empty() && mm.rules.empty() && mm.children.size() == 1;
}

// {@rules, {...}}: rules plus exactly one child holding the work.
inline bool is_rule_bearing(const World &w, MembraneId m) {
  const Membrane &mm = w.mem(m);
  return !mm.rules.empty() && mm.children.size() == 1 && mm.atoms.empty();
}

inline bool subtree_has_atom(const World &w, MembraneId m, const std::string &name) {
  for (AtomId a : w.subtree_atoms(m))
    if (w.atom(a).alive && w.atom(a).name == name) return true;
  return false;
}

// An atom whose argument `pos` connects to the ground integer `value`.
inline bool subtree_has_atom_with_int_arg(const World &w, MembraneId m, const std::string &name,
                                          size_t pos, int64_t value) {
  for (AtomId a : w.subtree_atoms(m)) {
    const Atom &at = w.atom(a);
    if (!at.alive || at.name != name || at.args.size() <= pos) continue;
    auto g = w.ground_int(at.args[pos]);
    if (g && *g == value) return true;
  }
  return false;
}

inline std::optional<int64_t> counter_value(const World &w, MembraneId m) {
  for (AtomId a : w.mem(m).atoms) {
    const Atom &at = w.atom(a);
    if (at.alive && at.name == "inLinks_" && at.args.size() == 1) return w.ground_int(at.args[0]);
  }
  return std::nullopt;
}

inline std::optional<int64_t> int_result(const World &w, const std::string &link) {
  auto r = read_result(w, link);
  if (auto *t = std::get_if<Term>(&r))
    if (t->is_int) return t->value;
  return std::nullopt;
}

inline std::string rules_text(const std::vector<RulePtr> &rules) {
  std::string s;
  for (const auto &r : rules) s += rule_to_text(*r) + "\n";
  return s;
}

}  // namespace testutil

#endif
