#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "mpicheck/benchmarks.hpp"
#include "mpicheck/explorer.hpp"
#include "mpicheck/json_io.hpp"
#include "mpicheck/models.hpp"

namespace {

using namespace mpicheck;

constexpr int kExitOk = 0;
constexpr int kExitNegative = 1;  // deadlock / violation / equivalence failure
constexpr int kExitUsage = 2;     // parse, config, or validation error

std::size_t max_states_default() {
  if (const char* env = std::getenv("MPICHECK_MAX_STATES")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    std::cerr << "warning: ignoring malformed MPICHECK_MAX_STATES='" << env << "'\n";
  }
  return ExploreBounds{}.max_states;
}

FreeBufferPolicy parse_fb(const std::string& s) {
  if (s == "explore") return FreeBufferPolicy::Explore;
  if (s == "eager") return FreeBufferPolicy::Eager;
  if (s == "never") return FreeBufferPolicy::Never;
  throw CLI::ValidationError("--free-buffer must be explore, eager, or never");
}

int verdict_exit(const Verdict& v) { return verdict_is_ok(v) ? kExitOk : kExitNegative; }

void print_verdict(const Verdict& v, const std::string& format) {
  if (format == "json") {
    std::cout << verdict_to_json(v).dump(2) << "\n";
  } else {
    std::cout << verdict_summary(v) << "\n";
  }
}

struct DotCollector {
  std::ofstream out;
  bool open(const std::string& path) {
    out.open(path);
    if (out) out << "digraph states {\n  node [shape=box, fontname=\"monospace\"];\n";
    return static_cast<bool>(out);
  }
  void edge(const Digest& from, const Digest& to, const std::string& label) {
    out << "  \"" << digest_hex(from, 6) << "\" -> \"" << digest_hex(to, 6) << "\" [label=\""
        << label << "\"];\n";
  }
  void close() {
    if (out) out << "}\n";
  }
};

int cmd_explore(const std::string& program_file, const std::string& spec_file, int n,
                const ExploreBounds& bounds, bool monitor, const std::string& dot_file,
                const std::string& format) {
  CommandPtr program = load_program_file(program_file);
  TopologySpec spec = load_spec_file(spec_file).compile();
  auto errors = validate_topology(spec, n, n);
  for (const auto& e : errors) std::cerr << spec_error_to_string(e) << "\n";
  if (has_errors(errors)) return kExitUsage;

  DotCollector dot;
  ExploreHooks hooks;
  const ExploreHooks* hooks_ptr = nullptr;
  if (!dot_file.empty()) {
    if (!dot.open(dot_file)) {
      std::cerr << "cannot open '" << dot_file << "' for writing\n";
      return kExitUsage;
    }
    hooks.on_edge = [&dot](const Digest& a, const Digest& b, const std::string& label) {
      dot.edge(a, b, label);
    };
    hooks_ptr = &hooks;
  }
  Verdict v = explore(program, spec, n, bounds, monitor, hooks_ptr);
  dot.close();
  print_verdict(v, format);
  return verdict_exit(v);
}

int cmd_run(const std::string& program_file, const std::string& spec_file, int n,
            std::uint64_t seed, bool monitor, const std::string& format) {
  CommandPtr program = load_program_file(program_file);
  TopologySpec spec = load_spec_file(spec_file).compile();
  auto errors = validate_topology(spec, n, n);
  for (const auto& e : errors) std::cerr << spec_error_to_string(e) << "\n";
  if (has_errors(errors)) return kExitUsage;

  auto [trace, verdict] = run_schedule(program, spec, n, seed, monitor);
  GlobalState final = replay_trace(trace, spec);

  if (format == "json") {
    json out;
    out["seed"] = seed;
    out["n"] = n;
    TraceFile tf{n, program, trace.steps};
    out["trace"] = trace_to_json(tf);
    out["verdict"] = verdict_to_json(verdict);
    json procs = json::array();
    for (const auto& p : final.procs) {
      json env;
      for (const auto& [k, v] : p.env) env[k] = v;
      procs.push_back(json{{"env", env},
                           {"last_tag", p.last_tag},
                           {"barriers_passed", p.barriers_passed},
                           {"terminated", p.cmd->kind == Command::Kind::Skip}});
    }
    out["terminal"] = std::move(procs);
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << verdict_summary(verdict) << "\n";
    std::cout << state_to_box(final, "terminal") << "\n";
  }
  return verdict_exit(verdict);
}

void dump_solution(const pde::BenchResult& r, const std::string& csv, const std::string& bin,
                   const std::string& gnuplot) {
  if (!csv.empty()) {
    std::ofstream out(csv);
    write_table(out, r.parallel, r.cols, ',');
  }
  if (!gnuplot.empty()) {
    std::ofstream out(gnuplot);
    write_table(out, r.parallel, r.cols, ' ');
  }
  if (!bin.empty()) {
    std::vector<std::size_t> dims;
    if (r.rows > 1) dims = {r.rows, r.cols};
    else dims = {r.cols};
    save_binary(bin, dims, r.parallel);
  }
}

int cmd_bench(const std::string& which, int n, const std::string& mode_str, std::uint64_t seed,
              bool check, const pde::ConvectionConfig& ccfg, const pde::PoissonConfig& pcfg,
              const pde::HeatConfig& hcfg, const std::string& format, const std::string& csv,
              const std::string& bin, const std::string& gnuplot, std::size_t eager_bytes) {
  pde::ExecMode mode = mode_str == "workers" ? pde::ExecMode::Workers : pde::ExecMode::Sim;

  pde::BenchResult r;
  if (which == "convection") {
    r = pde::run_convection(ccfg, n, mode, seed, eager_bytes);
  } else if (which == "poisson") {
    r = pde::run_poisson(pcfg, n, mode, seed, eager_bytes);
  } else {
    r = pde::run_heat(hcfg, n, mode, seed, eager_bytes);
  }

  json out;
  out["benchmark"] = which;
  out["n"] = n;
  out["mode"] = mode_str;
  out["seed"] = seed;
  bool pass = false;
  if (r.run.status != rt::RunResult::Status::Completed) {
    out["status"] = r.run.status == rt::RunResult::Status::Deadlock ? "deadlock" : "error";
    out["detail"] = r.run.status == rt::RunResult::Status::Deadlock ? r.run.deadlock_detail
                                                                    : r.run.error;
  } else {
    out["status"] = "completed";
    auto grid = pde::equivalence_check(r.parallel, r.sequential, pde::EquivalenceMode::Exact);
    out["grid_exact"] = grid.pass;
    out["max_rel_dev"] = grid.max_rel_dev;
    if (grid.first_mismatch >= 0) out["first_mismatch"] = grid.first_mismatch;
    pass = grid.pass;
    if (which == "poisson") {
      double denom = std::abs(r.seq_residual) > 0 ? std::abs(r.seq_residual) : 1.0;
      double rel = std::abs(r.par_residual - r.seq_residual) / denom;
      out["residual_seq"] = r.seq_residual;
      out["residual_par"] = r.par_residual;
      out["residual_rel_dev"] = rel;
      pass = pass && rel <= 1e-9;
    }
    out["pass"] = pass;
    out["digest"] = digest_hex(hash_doubles(r.parallel), 16);
    dump_solution(r, csv, bin, gnuplot);
  }

  if (format == "json") {
    std::cout << out.dump(2) << "\n";
  } else {
    std::cout << which << " n=" << n << " " << out["status"].get<std::string>();
    if (out.contains("pass")) std::cout << (pass ? " equivalent" : " NOT equivalent");
    std::cout << "\n";
  }
  if (r.run.status != rt::RunResult::Status::Completed) return kExitNegative;
  return (check && !pass) ? kExitNegative : kExitOk;
}

int cmd_trace(const std::string& trace_file, const std::string& spec_file) {
  TraceFile tf = load_trace_file(trace_file);
  TopologySpec spec = load_spec_file(spec_file).compile();
  auto errors = validate_topology(spec, tf.n, tf.n);
  for (const auto& e : errors) std::cerr << spec_error_to_string(e) << "\n";
  if (has_errors(errors)) return kExitUsage;

  Trace trace = tf.to_trace();
  GlobalState s = trace.initial;
  std::cout << state_to_box(s, "State 0") << "\n";
  for (std::size_t k = 0; k < trace.steps.size(); ++k) {
    const Transition& tr = trace.steps[k];
    if (!transition_enabled(s, tr, spec)) {
      std::cerr << "step " << k << " (" << transition_to_string(tr)
                << ") is not enabled in the preceding state\n";
      return kExitNegative;
    }
    s = apply_transition(s, tr, spec);
    std::cout << transition_to_string(tr) << "\n"
              << state_to_box(s, "State " + std::to_string(k + 1)) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator, runtime monitor, and bounded model explorer for a tag-ordered "
               "message-passing calculus, with PDE halo-exchange benchmarks"};
  app.require_subcommand(1);

  std::string program_file, spec_file, trace_file;
  std::string format = "json";
  std::string dot_file;
  int n = 2;
  std::uint64_t seed = 0;
  bool monitor = false;

  ExploreBounds bounds;
  bounds.max_states = max_states_default();
  std::string fb = "eager";
  bool no_compress = false;

  auto* explore_cmd = app.add_subcommand("explore", "exhaustively explore all schedules");
  explore_cmd->add_option("program", program_file, "program JSON file")->required();
  explore_cmd->add_option("spec", spec_file, "topology spec JSON file")->required();
  explore_cmd->add_option("--n", n, "number of processes")->check(CLI::Range(2, 1024));
  explore_cmd->add_option("--max-states", bounds.max_states, "visited-state bound");
  explore_cmd->add_option("--max-depth", bounds.max_depth, "schedule depth bound");
  explore_cmd->add_flag("--monitor", monitor, "check the axioms on every state");
  explore_cmd->add_option("--dot", dot_file, "write the explored state graph as DOT");
  explore_cmd->add_option("--free-buffer", fb, "free-buffer policy: explore|eager|never");
  explore_cmd->add_flag("--no-compress", no_compress, "disable local-step compression");
  explore_cmd->add_option("--format", format, "json|text");

  auto* run_cmd = app.add_subcommand("run", "run one seeded random schedule");
  run_cmd->add_option("program", program_file, "program JSON file")->required();
  run_cmd->add_option("spec", spec_file, "topology spec JSON file")->required();
  run_cmd->add_option("--n", n, "number of processes")->check(CLI::Range(2, 1024));
  run_cmd->add_option("--seed", seed, "schedule seed");
  run_cmd->add_flag("--monitor", monitor, "record axiom violations along the run");
  run_cmd->add_option("--format", format, "json|text");

  std::string bench_name, bench_mode = "sim";
  bool bench_check = false;
  std::string csv_file, bin_file, gnuplot_file;
  pde::ConvectionConfig ccfg;
  pde::PoissonConfig pcfg;
  pde::HeatConfig hcfg;
  int grid_nx = -1, grid_ny = -1, steps_nt = -1, iters = -1;
  std::size_t eager_bytes = 4096;

  auto* bench_cmd = app.add_subcommand("bench", "run a PDE benchmark, parallel vs sequential");
  bench_cmd->add_option("benchmark", bench_name, "convection|poisson|heat")
      ->required()
      ->check(CLI::IsMember({"convection", "poisson", "heat"}));
  bench_cmd->add_option("--n", n, "number of processes")->check(CLI::Range(1, 1024));
  bench_cmd->add_option("--mode", bench_mode, "sim|workers")
      ->check(CLI::IsMember({"sim", "workers"}));
  bench_cmd->add_option("--seed", seed, "sim-mode schedule seed");
  bench_cmd->add_flag("--check", bench_check, "exit 1 when equivalence fails");
  bench_cmd->add_option("--nx", grid_nx, "grid points in x");
  bench_cmd->add_option("--ny", grid_ny, "grid points in y (poisson/heat)");
  bench_cmd->add_option("--nt", steps_nt, "time steps (convection/heat)");
  bench_cmd->add_option("--iters", iters, "jacobi iterations (poisson)");
  bench_cmd->add_option("--dx", ccfg.dx, "convection spatial step");
  bench_cmd->add_option("--dt", ccfg.dt, "convection time step");
  bench_cmd->add_option("--wave-speed", ccfg.c, "convection wave speed");
  bench_cmd->add_option("--square-lo", ccfg.square_lo, "square wave start");
  bench_cmd->add_option("--square-hi", ccfg.square_hi, "square wave end");
  bench_cmd->add_option("--alpha", hcfg.alpha, "heat diffusivity");
  bench_cmd->add_option("--eager-bytes", eager_bytes,
                        "workers mode: payloads at most this many bytes buffer eagerly");
  bench_cmd->add_option("--dump-csv", csv_file, "write the root solution as CSV");
  bench_cmd->add_option("--dump-bin", bin_file, "write the root solution as flat binary");
  bench_cmd->add_option("--gnuplot", gnuplot_file, "write a gnuplot matrix dump");
  bench_cmd->add_option("--format", format, "json|text");

  auto* trace_cmd = app.add_subcommand("trace", "replay and pretty-print a trace");
  trace_cmd->add_option("trace", trace_file, "trace JSON file")->required();
  trace_cmd->add_option("spec", spec_file, "topology spec JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (explore_cmd->parsed()) {
      bounds.free_buffer_policy = parse_fb(fb);
      bounds.compress_local = !no_compress;
      return cmd_explore(program_file, spec_file, n, bounds, monitor, dot_file, format);
    }
    if (run_cmd->parsed()) {
      return cmd_run(program_file, spec_file, n, seed, monitor, format);
    }
    if (bench_cmd->parsed()) {
      if (grid_nx > 0) { ccfg.nx = grid_nx; pcfg.nx = grid_nx; hcfg.nx = grid_nx; }
      if (grid_ny > 0) { pcfg.ny = grid_ny; hcfg.ny = grid_ny; }
      if (steps_nt >= 0) { ccfg.nt = steps_nt; hcfg.nt = steps_nt; }
      if (iters >= 0) pcfg.iters = iters;
      return cmd_bench(bench_name, n, bench_mode, seed, bench_check, ccfg, pcfg, hcfg, format,
                       csv_file, bin_file, gnuplot_file, eager_bytes);
    }
    if (trace_cmd->parsed()) {
      return cmd_trace(trace_file, spec_file);
    }
  } catch (const JsonError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const pde::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const EvalError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return kExitNegative;
  } catch (const ReplayError& e) {
    std::cerr << "replay error: " << e.what() << "\n";
    return kExitNegative;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNegative;
  }
  return kExitUsage;
}
