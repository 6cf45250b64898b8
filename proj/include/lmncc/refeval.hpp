#ifndef LMNCC_REFEVAL_HPP
#define LMNCC_REFEVAL_HPP

#include <string>

#include "lmncc/ccfl.hpp"

namespace lmncc::refeval {

enum class Mode { Cbv, Cbn };

// Substitution-based small-step evaluator, independent of the rewriting
// engine. Cbv picks the leftmost-innermost redex, Cbn the leftmost-outermost.
struct Result {
  enum class Kind { Value, Suspended, Diverged } kind;
  ccfl::ExprPtr value;  // the final expression
  int steps = 0;
};

Result evaluate(const ccfl::Program &p, const ccfl::ExprPtr &query, Mode mode,
                int budget = 100000);

// True when the expression is a ground data term (integers/constructors).
bool is_ground_value(const ccfl::Expr &e);

std::string value_to_string(const ccfl::Expr &e);

}  // namespace lmncc::refeval

#endif
