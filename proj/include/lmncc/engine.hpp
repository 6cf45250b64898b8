#ifndef LMNCC_ENGINE_HPP
#define LMNCC_ENGINE_HPP

#include <optional>
#include <string>
#include <vector>

#include "lmncc/match.hpp"

namespace lmncc {

struct StaleBinding : GraphError {
  using GraphError::GraphError;
};

// Deterministic mode always takes the first candidate in site order
// (membrane preorder, rule declaration order, matched-entity position).
// Seeded mode draws uniformly with splitmix64 so runs replay per seed.
struct SchedulingPolicy {
  enum class Mode { Deterministic, Seeded };
  Mode mode = Mode::Deterministic;
  uint64_t seed = 0;
  int max_steps = 10000;

  static SchedulingPolicy deterministic(int max_steps = 10000) {
    return SchedulingPolicy{Mode::Deterministic, 0, max_steps};
  }
  static SchedulingPolicy seeded(uint64_t seed, int max_steps = 10000) {
    return SchedulingPolicy{Mode::Seeded, seed, max_steps};
  }
};

struct TraceEvent {
  int step_index = 0;
  std::string rule_name;
  MembraneId site = k_none;
  std::string consumed;
  std::string produced;

  std::string to_line() const {
    return "#" + std::to_string(step_index) + " " + rule_name + " @m" + std::to_string(site) +
           " : " + consumed + " => " + produced;
  }
};

enum class RunStatus { NormalForm, BudgetExhausted, Suspended };

struct RunResult {
  std::vector<TraceEvent> trace;
  RunStatus status = RunStatus::NormalForm;
};

// One reduction possibility somewhere in the world.
struct Candidate {
  enum class Kind { Rule, Arith, StrictEq, LiftC, DissolveC, MergeD };
  Kind kind = Kind::Rule;
  // deterministic site order
  uint64_t mem_order = 0;
  uint64_t rule_index = 0;
  std::vector<uint64_t> pos;

  MatchBinding binding;               // Rule
  AtomId atom = k_none;               // Arith/StrictEq target; MergeD root; LiftC consumer
  MembraneId cell = k_none;           // LiftC: protected wrapper; DissolveC: cell; MergeD: root cell
  std::vector<MembraneId> producers;  // MergeD
};

// All candidates, sorted by site order. Includes built-in arithmetic and
// strict-equality reductions and the outermost lift/merge builtins.
std::vector<Candidate> collect_candidates(World &w);

TraceEvent apply_candidate(World &w, const Candidate &c, int step_index);

// Applies a previously found rule match; throws StaleBinding if the world
// changed since matching.
TraceEvent apply_match(World &w, const MatchBinding &b, int step_index);

// Performs one built-in arithmetic reduction if any applies.
std::optional<TraceEvent> reduce_arith(World &w, int step_index = 1);

std::optional<TraceEvent> step(World &w, const SchedulingPolicy &policy, int step_index,
                               uint64_t &prng_state);

RunResult run(World &w, const SchedulingPolicy &policy);

inline uint64_t splitmix64(uint64_t &state) {
  state += 0x9E3779B97F4A7C15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace lmncc

#endif
