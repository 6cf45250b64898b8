#ifndef LMNCC_CODEGEN_HPP
#define LMNCC_CODEGEN_HPP

#include <map>
#include <set>
#include <string>
#include <vector>

#include "lmncc/ccfl.hpp"
#include "lmncc/graph.hpp"
#include "lmncc/strategy.hpp"

namespace lmncc::codegen {

struct CompileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One flat rewrite rule: head call atom (plus pattern atoms for constructor
// branches), a guard, and a destructured body — one operation per atom.
struct FlatRule {
  std::string name;
  AtomTemplate head;
  std::vector<AtomTemplate> patterns;
  Guard guard;
  std::vector<AtomTemplate> body;
  bool is_app_rule = false;
};

struct CompileOptions {
  bool inline_app = false;
};

struct Compiled {
  std::vector<FlatRule> rules;
  std::map<std::string, int> fn_arity;          // functions, by engine name
  std::set<std::string> constraint_fns;
  std::map<std::string, int> ctor_arity;        // engine name -> arity
  std::map<std::string, std::string> ctor_display;  // cons -> Cons

  bool is_fn(const std::string &n) const { return fn_arity.count(n) > 0; }
  bool is_constraint(const std::string &n) const { return constraint_fns.count(n) > 0; }
};

// Flat compilation: function definitions to rules (case branches become
// guards or pattern atoms), plus the application rule schema.
Compiled compile_flat(const ccfl::Program &p, const CompileOptions &opts = {});

// Destructures an expression; evaluating the atoms binds `result_var`.
std::vector<AtomTemplate> flatten_expr(const ccfl::Program &p, const Compiled &c,
                                       const ccfl::Expr &e, const std::string &result_var);

struct FlatQuery {
  std::vector<AtomTemplate> atoms;
  std::string result_var;  // empty for constraint queries
  std::vector<std::string> free_vars;
  bool is_constraint = false;
};
FlatQuery flatten_query(const ccfl::Program &p, Compiled &c, const ccfl::Query &q);

// Rule forms per strategy.
std::vector<RulePtr> rules_flat(const Compiled &c);
std::vector<RulePtr> rules_cbv(const Compiled &c);
struct OutermostRules {
  std::vector<RulePtr> bare;      // fire at the evaluation level
  std::vector<RulePtr> variants;  // one step on a lifted cell, then re-protect
};
OutermostRules rules_outermost(const Compiled &c);

enum class Strategy { Cbv, Outermost, Nondet };

// Builds the initial world for a query under the given strategy; the result
// link is the named free link "Res".
World build_world(const Compiled &c, const FlatQuery &q, Strategy s);

std::string emit_lmntal(const Compiled &c, const FlatQuery &q, Strategy s);

extern const char *k_result_link;

}  // namespace lmncc::codegen

#endif
