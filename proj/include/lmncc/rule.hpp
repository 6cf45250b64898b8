#ifndef LMNCC_RULE_HPP
#define LMNCC_RULE_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace lmncc {

// Integer expression over guard variables and constants, ops + - *.
// Appears in guards and in integer argument positions of rule templates.
struct IntExpr {
  enum class Kind { Const, Var, Add, Sub, Mul };
  Kind kind = Kind::Const;
  int64_t value = 0;   // Const
  std::string var;     // Var
  std::vector<IntExpr> kids;

  static IntExpr constant(int64_t v) {
    IntExpr e;
    e.kind = Kind::Const;
    e.value = v;
    return e;
  }
  static IntExpr variable(std::string name) {
    IntExpr e;
    e.kind = Kind::Var;
    e.var = std::move(name);
    return e;
  }
  static IntExpr binary(Kind k, IntExpr l, IntExpr r) {
    IntExpr e;
    e.kind = k;
    e.kids.push_back(std::move(l));
    e.kids.push_back(std::move(r));
    return e;
  }
  bool is_const() const { return kind == Kind::Const; }
  void collect_vars(std::vector<std::string> &out) const {
    if (kind == Kind::Var) out.push_back(var);
    for (const auto &k : kids) k.collect_vars(out);
  }
};

// Comparison operators usable in guards: =:= =\= > < >= =<
enum class CmpOp { Eq, Ne, Gt, Lt, Ge, Le };

struct GuardCmp {
  CmpOp op;
  IntExpr lhs, rhs;
};

// Conjunction of integer comparisons. Evaluates to true/false only when
// every variable is bound to a ground integer; otherwise it is suspended.
struct Guard {
  std::vector<GuardCmp> conjuncts;
  bool empty() const { return conjuncts.empty(); }
  std::vector<std::string> vars() const {
    std::vector<std::string> out;
    for (const auto &c : conjuncts) {
      c.lhs.collect_vars(out);
      c.rhs.collect_vars(out);
    }
    return out;
  }
};

enum class AtomKind { Plain, IntLit, Connector };

// One atom of a process template. Integer atoms carry an expression in
// `value_expr` (a constant when used as a pattern on the lhs; any guard
// expression when emitted on the rhs). `args` are link variable names.
struct AtomTemplate {
  std::string name;
  AtomKind kind = AtomKind::Plain;
  IntExpr value_expr;
  std::vector<std::string> args;
};

struct ProcessTemplate;

// Cell template: a membrane pattern. `plus_links`/`minus_links` declare
// free links that must cross this membrane's boundary (the +L / -L of the
// reorganization rules). The stable flag may only appear on the lhs.
struct CellTemplate {
  std::shared_ptr<ProcessTemplate> body;
  bool stable_flag = false;
  std::vector<std::string> plus_links;
  std::vector<std::string> minus_links;
};

// Process template: atoms, cells, contexts. A lhs cell carries at most one
// process context and one rule context; a rhs cell may splice several (the
// reorganization rules put $p and $q into one merged cell).
struct ProcessTemplate {
  std::vector<AtomTemplate> atoms;
  std::vector<CellTemplate> cells;
  std::vector<std::string> proc_contexts;  // $p
  std::vector<std::string> rule_contexts;  // @r
};

struct RewriteRule;
using RulePtr = std::shared_ptr<const RewriteRule>;

// lhs :- guard | rhs. Builtin rules (the outermost lift/merge rules) carry
// a tag and empty templates; the engine implements their matching directly.
struct RewriteRule {
  enum class Builtin { None, LiftC, MergeD };
  std::optional<std::string> name;
  ProcessTemplate lhs;
  Guard guard;
  ProcessTemplate rhs;
  Builtin builtin = Builtin::None;

  // Application rules consume a function-value atom; when its handle link is
  // shared (compiled variables are hyperlinks), the value is re-emitted for
  // the remaining users instead of disappearing.
  bool shared_value_patterns = false;

  std::string display_name() const { return name ? *name : "<anon>"; }
};

}  // namespace lmncc

#endif
