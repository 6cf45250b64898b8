#ifndef LMNCC_MATCH_HPP
#define LMNCC_MATCH_HPP

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lmncc/graph.hpp"

namespace lmncc {

// Residual contents of a matched cell, bound to its process context.
struct Residual {
  std::vector<AtomId> atoms;
  std::vector<MembraneId> cells;
};

struct MatchBinding {
  const RewriteRule *rule = nullptr;
  MembraneId site = k_none;  // membrane the rule fires in (where it resides)
  std::map<std::string, LinkId> link_map;
  std::vector<AtomId> matched_atoms;      // lhs atom templates, in template preorder
  std::vector<MembraneId> matched_cells;  // lhs cell templates, in template preorder
  std::map<std::string, Residual> proc_ctx;
  std::map<std::string, std::vector<RulePtr>> rule_ctx;
  std::map<std::string, int64_t> values;  // ground values of guard/expression vars
  std::vector<AtomId> absorbed;           // value-providing integer atoms consumed on firing
  uint64_t world_version = 0;
  std::vector<uint64_t> pos_key;  // deterministic order of matches at one site
};

// All bindings of `rule` residing in `site`: atom templates match the site's
// own atoms, cell templates its child membranes. Bindings are ordered by
// matched-entity position; a suspended guard yields no binding.
std::vector<MatchBinding> find_matches(World &w, const RewriteRule &rule, MembraneId site,
                                       bool first_only = false);

// Cheap screen: false when the site cannot possibly host a match (the
// leading lhs atom's name is absent).
bool could_match(const World &w, const RewriteRule &rule, MembraneId site);

enum class GuardResult { True, False, Suspended };

// Evaluates a guard under a link binding. True/False only when every
// variable resolves to a ground integer, Suspended otherwise.
GuardResult eval_guard(const World &w, const Guard &g,
                       const std::map<std::string, LinkId> &links,
                       std::map<std::string, int64_t> *values_out = nullptr);

// True iff no rule residing in m or below has a match within m's subtree and
// no built-in reduction applies there. Memoized per world version.
bool is_stable(World &w, MembraneId m);

// Built-in reductions (arithmetic, strict equality) are performed only where
// the membrane itself or its parent holds rules, or at the root.
bool builtins_enabled(const World &w, MembraneId m);

// True if atom a is an arithmetic atom whose operands are ground.
bool arith_ready(const World &w, const Atom &a);
bool is_arith_atom(const Atom &a);

// Ground data term reachable from a link: an integer or constructor tree.
struct Term {
  bool is_int = false;
  int64_t value = 0;
  std::string ctor;
  std::vector<Term> kids;
};
std::optional<Term> resolve_term(const World &w, LinkId l);
bool term_equal(const Term &a, const Term &b);

// True if eq_/2 atom a compares two ground terms.
bool strict_eq_ready(const World &w, const Atom &a);

}  // namespace lmncc

#endif
