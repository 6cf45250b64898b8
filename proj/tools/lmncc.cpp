#include <CLI11.hpp>
#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "lmncc/ccfl.hpp"
#include "lmncc/codegen.hpp"
#include "lmncc/engine.hpp"
#include "lmncc/refeval.hpp"
#include "lmncc/strategy.hpp"
#include "lmncc/text.hpp"

namespace {

using namespace lmncc;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSuspended = 2;
constexpr int kExitBudget = 3;

std::string read_file(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct CommonOpts {
  std::string strategy = "cbv";
  uint64_t seed = 0;
  int max_steps = 10000;
  std::string trace_path;
  std::string dot_path;
  bool inline_app = false;
  std::string query;
  std::vector<std::string> binds;
};

codegen::Strategy strategy_of(const std::string &s) {
  if (s == "cbv") return codegen::Strategy::Cbv;
  if (s == "outermost") return codegen::Strategy::Outermost;
  if (s == "nondet") return codegen::Strategy::Nondet;
  throw CLI::ValidationError("--strategy", "must be cbv, outermost or nondet");
}

SchedulingPolicy policy_of(const CommonOpts &o) {
  SchedulingPolicy p = o.seed == 0 ? SchedulingPolicy::deterministic(o.max_steps)
                                   : SchedulingPolicy::seeded(o.seed, o.max_steps);
  return p;
}

void write_trace(const std::string &path, const std::vector<TraceEvent> &trace) {
  std::ofstream out(path, std::ios::binary);
  for (const auto &ev : trace) out << ev.to_line() << "\n";
}

void apply_binds(World &w, const std::vector<std::string> &binds) {
  for (const auto &b : binds) {
    auto eq = b.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("--bind expects name=integer, got " + b);
    std::string name = b.substr(0, eq);
    int64_t value = std::stoll(b.substr(eq + 1));
    LinkId l = w.named_link(name);
    w.add_atom(w.root(), std::to_string(value), {l}, AtomKind::IntLit, value);
  }
}

struct Pipeline {
  ccfl::Program program;
  ccfl::Query query;
  codegen::Compiled compiled;
  codegen::FlatQuery flat;
};

int build_pipeline(const std::string &path, const CommonOpts &o, Pipeline &out) {
  out.program = ccfl::parse_ccfl(read_file(path));
  auto diags = ccfl::check_ccfl(out.program);
  if (!diags.empty()) {
    for (const auto &d : diags)
      std::cerr << path << ":" << d.line << ":" << d.col << ": error: " << d.message << "\n";
    return kExitUsage;
  }
  ccfl::eta_enrich_all(out.program);
  if (o.query.empty()) {
    std::cerr << "error: --query is required\n";
    return kExitUsage;
  }
  out.query = ccfl::parse_query(o.query, out.program);
  codegen::CompileOptions copts;
  copts.inline_app = o.inline_app;
  out.compiled = codegen::compile_flat(out.program, copts);
  out.flat = codegen::flatten_query(out.program, out.compiled, out.query);
  return kExitOk;
}

// True when an unfinished computation remains anywhere.
bool pending_work(const World &w, const codegen::Compiled &c) {
  for (MembraneId m : w.preorder()) {
    for (AtomId a : w.mem(m).atoms) {
      const Atom &at = w.atom(a);
      if (!at.alive || at.kind != AtomKind::Plain) continue;
      if (at.name == "eq_" || at.name == "app") return true;
      if (is_arith_atom(at)) return true;
      auto it = c.fn_arity.find(at.name);
      if (it != c.fn_arity.end()) {
        size_t call = static_cast<size_t>(it->second) + (c.is_constraint(at.name) ? 0 : 1);
        if (at.args.size() == call) return true;
      }
    }
  }
  return false;
}

int cmd_run(const std::string &path, const CommonOpts &o) {
  Pipeline pl;
  int rc = build_pipeline(path, o, pl);
  if (rc != kExitOk) return rc;

  World w = codegen::build_world(pl.compiled, pl.flat, strategy_of(o.strategy));
  apply_binds(w, o.binds);
  RunResult res = run(w, policy_of(o));
  if (!o.trace_path.empty()) write_trace(o.trace_path, res.trace);
  if (!o.dot_path.empty()) {
    std::ofstream out(o.dot_path);
    out << to_dot(w);
  }
  std::cerr << "steps: " << res.trace.size() << "\n";

  if (res.status == RunStatus::BudgetExhausted) {
    std::cout << "budget_exhausted\n";
    return kExitBudget;
  }
  if (world_has_fail(w)) {
    std::cout << "Fail\n";
    return kExitOk;
  }
  auto print_frees = [&]() {
    for (const auto &v : pl.flat.free_vars) {
      auto r = read_result(w, v);
      if (auto *t = std::get_if<Term>(&r))
        std::cout << v << " = " << term_to_string(*t, pl.compiled.ctor_display) << "\n";
      else
        std::cout << v << " = _\n";
    }
  };
  if (pl.flat.is_constraint) {
    if (pending_work(w, pl.compiled)) {
      std::cout << "suspended\n";
      print_frees();
      return kExitSuspended;
    }
    std::cout << "Success\n";
    print_frees();
    return kExitOk;
  }
  auto r = read_result(w, pl.flat.result_var);
  if (auto *t = std::get_if<Term>(&r)) {
    std::cout << term_to_string(*t, pl.compiled.ctor_display) << "\n";
    print_frees();
    return kExitOk;
  }
  std::cout << "suspended\n";
  print_frees();
  return kExitSuspended;
}

int cmd_compile(const std::string &path, const CommonOpts &o, const std::string &emit) {
  if (!emit.empty() && emit != "lmntal") {
    std::cerr << "error: unknown --emit format '" << emit << "'\n";
    return kExitUsage;
  }
  Pipeline pl;
  int rc = build_pipeline(path, o, pl);
  if (rc != kExitOk) return rc;
  std::cout << codegen::emit_lmntal(pl.compiled, pl.flat, strategy_of(o.strategy));
  return kExitOk;
}

int cmd_lmntal(const std::string &path, const CommonOpts &o) {
  World w = parse_world(read_file(path), World::LinkMode::Strict);
  RunResult res = run(w, policy_of(o));
  if (!o.trace_path.empty()) write_trace(o.trace_path, res.trace);
  if (!o.dot_path.empty()) {
    std::ofstream out(o.dot_path);
    out << to_dot(w);
  }
  std::cerr << "steps: " << res.trace.size() << "\n";
  std::cout << serialize_world(w) << "\n";
  return res.status == RunStatus::BudgetExhausted ? kExitBudget : kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"lmncc: hierarchical graph rewriting engine with a CCFL front end"};
  app.require_subcommand(1);

  CommonOpts o;
  std::string file;
  std::string emit;

  auto add_common = [&](CLI::App *cmd, bool wants_query) {
    cmd->add_option("file", file, "input file")->required();
    if (wants_query) {
      cmd->add_option("--query", o.query, "expression to evaluate");
      cmd->add_option("--strategy", o.strategy, "cbv|outermost|nondet (default cbv)");
      cmd->add_flag("--inline-app", o.inline_app, "inline application atoms statically");
      cmd->add_option("--bind", o.binds, "bind a free query variable, name=integer");
    }
    cmd->add_option("--seed", o.seed, "scheduler seed; 0 = deterministic site order");
    cmd->add_option("--max-steps", o.max_steps, "step budget (default 10000)");
    cmd->add_option("--trace", o.trace_path, "write the reduction trace to a file");
    cmd->add_option("--dot", o.dot_path, "write the final world as Graphviz DOT");
  };

  CLI::App *run_cmd = app.add_subcommand("run", "compile a CCFL program and run a query");
  add_common(run_cmd, true);
  CLI::App *compile_cmd =
      app.add_subcommand("compile", "compile a CCFL program and print the rewriting program");
  add_common(compile_cmd, true);
  compile_cmd->add_option("--emit", emit, "output format (lmntal)");
  CLI::App *lmn_cmd = app.add_subcommand("lmntal", "run a hand-written rewriting program");
  add_common(lmn_cmd, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(run_cmd)) return cmd_run(file, o);
    if (app.got_subcommand(compile_cmd)) return cmd_compile(file, o, emit);
    if (app.got_subcommand(lmn_cmd)) return cmd_lmntal(file, o);
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
