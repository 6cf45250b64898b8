#ifndef LMNCC_CCFL_HPP
#define LMNCC_CCFL_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lmncc::ccfl {

struct ParseError : std::runtime_error {
  int line, col;
  ParseError(const std::string &msg, int line_, int col_)
      : std::runtime_error(msg + " at " + std::to_string(line_) + ":" + std::to_string(col_)),
        line(line_),
        col(col_) {}
};

struct Pattern {
  enum class Kind { Int, Ctor, Var };
  Kind kind = Kind::Var;
  int64_t value = 0;                // Int
  std::string name;                 // Ctor name / Var name
  std::vector<std::string> binders; // Ctor argument variables (linear, shallow)
};

struct Expr;
using ExprPtr = std::shared_ptr<Expr>;

struct Expr {
  enum class Kind { Var, IntLit, CtorApp, App, Infix, Case, Let, With, Equality, Conjunction };
  Kind kind;
  std::string name;  // Var name, CtorApp constructor, Infix operator
  int64_t value = 0;
  std::vector<ExprPtr> kids;
  // App: kids[0] = function, kids[1..] = arguments
  // Case: kids[0] = scrutinee
  struct Branch {
    Pattern pat;
    ExprPtr body;
  };
  std::vector<Branch> branches;          // Case
  std::vector<std::string> let_names;    // Let: kids = bound exprs..., body last
  std::vector<std::string> with_vars;    // With: kids[0] = body conjunction
  int line = 0, col = 0;
};

ExprPtr make_var(std::string name);
ExprPtr make_int(int64_t v);
ExprPtr make_app(ExprPtr fn, std::vector<ExprPtr> args);

// A guarded alternative of a constraint abstraction: ask pattern -> body.
struct GuardedAlt {
  std::string ask_var;                    // matched variable (a parameter)
  std::string ask_ctor;                   // constructor it must match
  std::vector<std::string> ask_binders;   // pattern variables
  ExprPtr body;
};

struct FunDef {
  std::string name;
  std::vector<std::string> params;
  ExprPtr body;                     // empty when guarded alternatives are used
  std::vector<GuardedAlt> alts;
  bool is_constraint = false;       // declared result type C, or constraint body
  int line = 0, col = 0;
};

struct DataDecl {
  std::string name;
  std::vector<std::string> tyvars;
  struct Ctor {
    std::string name;
    int arity;
  };
  std::vector<Ctor> ctors;
};

struct Program {
  std::vector<DataDecl> datas;
  std::vector<FunDef> defs;
  std::vector<std::string> type_sigs;  // parsed and retained, never checked

  const FunDef *find_def(const std::string &name) const;
  std::optional<int> ctor_arity(const std::string &name) const;
  std::optional<int> fn_arity(const std::string &name) const;
};

struct Diagnostic {
  std::string message;
  int line = 0, col = 0;
};

Program parse_ccfl(const std::string &text);

struct Query {
  ExprPtr expr;
  std::vector<std::string> free_vars;  // in first-occurrence order
  bool is_constraint = false;
};
Query parse_query(const std::string &text, const Program &p);

std::vector<Diagnostic> check_ccfl(const Program &p);

// Appends fresh parameters to partial-application definitions until the body
// application is saturated. Other definitions are returned unchanged.
FunDef eta_enrich(const FunDef &d, const Program &p);
void eta_enrich_all(Program &p);

std::string pretty(const Expr &e);
std::string pretty_program(const Program &p);
bool expr_equal(const Expr &a, const Expr &b);

int expr_depth(const Expr &e);

}  // namespace lmncc::ccfl

#endif
