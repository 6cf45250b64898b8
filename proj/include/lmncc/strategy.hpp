#ifndef LMNCC_STRATEGY_HPP
#define LMNCC_STRATEGY_HPP

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "lmncc/match.hpp"

namespace lmncc {

// Call-by-value reorganization: a finished inner redex's cell is merged into
// a waiting consumer cell, with the rules (A, last dependency) or without
// them (B, dependencies remain; the counter is decremented).
RulePtr rule_a();
RulePtr rule_b();

// Spills a protected cell out of an active computation space.
RulePtr rule_release();
// Splits two independent redexes into separate spaces, copying the rules.
RulePtr rule_divide();

// Outermost strategy builtins: C lifts a protected producer one membrane
// toward the evaluation level (or dissolves a fully stuck lifted cell);
// D merges the lifted producers of an arithmetic root.
RulePtr rule_c();
RulePtr rule_d();

enum class StrategyTag { Cbv, Outermost };

struct MetaRuleSet {
  StrategyTag tag;
  std::vector<RulePtr> rules;
};

// cbv: {A, B} plus the two organizational spill rules.
// outermost: {D, C}; the one-step rule variants are owned by the compiler.
MetaRuleSet meta_rules(StrategyTag tag);

struct ReadSuspended {};
struct ReadFail {};
using ReadResult = std::variant<Term, ReadSuspended, ReadFail>;

// Follows a result link to the ground data term it connects to. Fail wins
// over everything; an unbound link reads as suspended.
ReadResult read_result(const World &w, LinkId root);
ReadResult read_result(const World &w, const std::string &link_name);

bool world_has_fail(const World &w);

// Renders a term using display names for constructors (cons -> Cons).
std::string term_to_string(const Term &t, const std::map<std::string, std::string> &display = {});

}  // namespace lmncc

#endif
