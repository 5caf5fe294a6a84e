#include "qcl/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "qcl/analysis.hpp"
#include "qcl/io.hpp"
#include "qcl/regularized.hpp"
#include "qcl/scenarios.hpp"

namespace qcl::cli {

namespace fs = std::filesystem;

namespace {

/// Where a scenario comes from: a JSON file or a named builder.
struct ScenarioArgs {
  std::string path;
  std::string builder;
  int n = 3;
  double delta = 1.0;
  double a = 1.0;
  double b = 1.0;
  std::uint64_t seed = 1;
  double density = 0.3;
  bool symmetric = false;
  int graphs = 1;
  double dwell = 1.0;
  std::string policy = "default";
  std::optional<double> horizon;
  std::optional<long long> max_events;
};

void add_scenario_options(CLI::App& cmd, ScenarioArgs& s) {
  auto* file = cmd.add_option("--scenario", s.path, "Scenario JSON file");
  auto* builder = cmd.add_option("--builder", s.builder, "Built-in scenario: example1, example2, random")
                      ->check(CLI::IsMember({"example1", "example2", "random"}));
  file->excludes(builder);
  cmd.add_option("--n", s.n, "Agent count for builders");
  cmd.add_option("--delta", s.delta, "Quantizer precision for builders");
  cmd.add_option("--a", s.a, "Chain weight (example2)");
  cmd.add_option("--b", s.b, "Feedback weight (example2)");
  cmd.add_option("--seed", s.seed, "Seed (random)");
  cmd.add_option("--density", s.density, "Extra-edge probability (random)");
  cmd.add_flag("--symmetric", s.symmetric, "Mirror every edge (random)");
  cmd.add_option("--graphs", s.graphs, "Graphs in the periodic schedule (random)");
  cmd.add_option("--dwell", s.dwell, "Time each graph is held (random)");
  cmd.add_option("--policy", s.policy, "default, sliding, sequential_slow or fixed_alpha")
      ->check(CLI::IsMember({"default", "sliding", "sequential_slow", "fixed_alpha"}));
  cmd.add_option("--horizon", s.horizon, "Simulation horizon");
  cmd.add_option("--max-events", s.max_events, "Event safety limit");
}

void apply_policy(ScenarioConfig& cfg, const std::string& policy) {
  if (policy == "default") return;
  if (policy == "sliding") {
    cfg.policy = SlidingPolicy{};
  } else if (policy == "sequential_slow") {
    cfg.policy = SequentialSlowPolicy{};
  } else if (!std::holds_alternative<FixedAlphaPolicy<double>>(cfg.policy)) {
    throw InputError("fixed_alpha needs a scenario that prescribes alphas");
  }
}

ScenarioConfig build(const ScenarioArgs& s) {
  ScenarioConfig cfg;
  if (!s.path.empty()) {
    cfg = io::load_scenario(s.path);
  } else if (s.builder == "example1") {
    cfg = example1_line(s.n, s.delta);
  } else if (s.builder == "example2") {
    cfg = example2_sliding(s.n, s.a, s.b);
  } else if (s.builder == "random") {
    RandomScenarioOptions o;
    o.n = s.n;
    o.seed = s.seed;
    o.edge_density = s.density;
    o.delta = s.delta;
    o.symmetric = s.symmetric;
    if (s.graphs > 1) o.switching = std::make_pair(s.graphs, s.dwell);
    cfg = random_connected(o);
  } else {
    throw InputError("give either --scenario or --builder");
  }
  apply_policy(cfg, s.policy);
  if (s.horizon) {
    if (!(*s.horizon > 0.0)) throw InputError("horizon must be positive");
    cfg.horizon = *s.horizon;
  }
  if (const char* env = std::getenv("QCL_MAX_EVENTS")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) throw InputError("QCL_MAX_EVENTS must be a positive integer");
    cfg.max_events = static_cast<std::size_t>(v);
  }
  if (s.max_events) {
    if (*s.max_events < 1) throw InputError("--max-events must be positive");
    cfg.max_events = static_cast<std::size_t>(*s.max_events);
  }
  return cfg;
}

// --- run --------------------------------------------------------------------

struct RunArgs {
  ScenarioArgs scenario;
  std::string out_dir = ".";
  std::string format = "both";
  std::optional<double> stride;
  bool oracle = false;
  double eps = 1e-3;
  double h = 1e-5;
};

int cmd_run(const RunArgs& r, std::ostream& out) {
  const ScenarioConfig cfg = build(r.scenario);
  const Trajectory<double> traj = simulate<double>(cfg);
  const ConvergenceReport rep = analyze(cfg, traj);

  io::Json report = io::to_json(rep);
  report["scenario"] = cfg.name;
  report["policy"] = io::policy_name(cfg.policy);
  report["termination"] = traj.certified_equilibrium() ? "equilibrium" : "horizon";
  report["events"] = traj.events.size();
  const auto limit = limit_value_check(traj, cfg.schedule, cfg.quantizer);
  report["limit_check"] = {{"verdict", to_string(limit.verdict)}, {"detail", limit.detail}};
  if (r.oracle) {
    const double t_end = traj.end_time() > 0.0 ? traj.end_time() : 1.0;
    const double stride = std::max(r.h, t_end / 100.0);
    const auto samples = simulate_regularized<double>(cfg, r.eps, r.h, t_end, stride);
    report["oracle"] = {{"eps", r.eps}, {"h", r.h}, {"max_deviation", max_deviation(traj, samples)}};
  }

  fs::create_directories(r.out_dir);
  const fs::path dir(r.out_dir);
  if (r.format == "csv" || r.format == "both") {
    std::ofstream csv(dir / "trajectory.csv");
    io::write_trajectory_csv(csv, traj, r.stride);
  }
  if (r.format == "json" || r.format == "both") io::write_json_file((dir / "trajectory.json").string(), io::to_json(traj));
  io::write_json_file((dir / "report.json").string(), report);

  out << io::dump(report) << '\n';
  return rep.converged ? 0 : 2;
}

// --- bound ------------------------------------------------------------------

int cmd_bound(const ScenarioArgs& s, std::ostream& out) {
  const ScenarioConfig cfg = build(s);
  if (!cfg.schedule.has_time_invariant_topology()) throw UnsupportedError("bound requires time-invariant topology");
  const double bound = tcon_bound(cfg.schedule.n(), cfg.schedule.a_low(), cfg.schedule.a_high(), cfg.x0, cfg.quantizer);
  const double spread = quantized_spread(cfg.x0, cfg.quantizer);
  out << "bound " << io::format_double(bound) << '\n' << "spread " << io::format_double(spread) << '\n';
  out << io::dump({{"bound", bound}, {"spread", spread}, {"n", cfg.schedule.n()}}) << '\n';
  return 0;
}

// --- sweep ------------------------------------------------------------------

/// "3..8", "1,0.5,0.25", "3..5,8" or "" (empty axis).
std::vector<double> parse_axis(const std::string& spec, const char* name) {
  std::vector<double> out;
  std::stringstream ss(spec);
  std::string tok;
  auto num = [&](const std::string& t) {
    try {
      std::size_t used = 0;
      const double v = std::stod(t, &used);
      if (used != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw InputError(std::string("bad value \"") + t + "\" in --" + name);
    }
  };
  while (std::getline(ss, tok, ',')) {
    tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
    if (tok.empty()) continue;
    if (auto p = tok.find(".."); p != std::string::npos) {
      const double lo = num(tok.substr(0, p)), hi = num(tok.substr(p + 2));
      for (double v = lo; v <= hi; v += 1.0) out.push_back(v);
    } else {
      out.push_back(num(tok));
    }
  }
  return out;
}

struct SweepArgs {
  std::string builder = "example2";
  std::string n = "3";
  std::string delta = "1";
  std::string a = "1";
  std::string b = "1";
  std::string seed = "1";
  std::string policy = "default";
  double density = 0.3;
  bool symmetric = false;
  unsigned jobs = 0;
  std::string out;
};

struct Cell {
  int n;
  double delta, a, b;
  std::uint64_t seed;
  std::string policy;
};

std::string sweep_row(const SweepArgs& w, const Cell& c) {
  std::ostringstream row;
  row << c.n << ',' << io::format_double(c.delta) << ',' << io::format_double(c.a) << ','
      << io::format_double(c.b) << ',' << c.seed << ',' << c.policy << ',';
  try {
    ScenarioArgs s;
    s.builder = w.builder;
    s.n = c.n;
    s.delta = c.delta;
    s.a = c.a;
    s.b = c.b;
    s.seed = c.seed;
    s.density = w.density;
    s.symmetric = w.symmetric;
    s.policy = c.policy;
    const ScenarioConfig cfg = build(s);
    const auto traj = simulate<double>(cfg);
    const auto rep = analyze(cfg, traj);
    row << (rep.t_con ? io::format_double(*rep.t_con) : "") << ',' << (rep.bound ? io::format_double(*rep.bound) : "")
        << ',';
    if (rep.bound && rep.t_con) row << (*rep.t_con <= *rep.bound ? "true" : "false");
    row << ',' << io::format_double(rep.average_drift) << ',' << (rep.converged ? "converged" : "horizon");
    return row.str();
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), ',', ';');
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    row << ",,,,error: " << msg;
    return row.str();
  }
}

int cmd_sweep(const SweepArgs& w, std::ostream& out) {
  std::vector<std::string> policies;
  {
    std::stringstream ss(w.policy);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) policies.push_back(tok);
  }
  std::vector<Cell> cells;
  for (double n : parse_axis(w.n, "n"))
    for (double d : parse_axis(w.delta, "delta"))
      for (double a : parse_axis(w.a, "a"))
        for (double b : parse_axis(w.b, "b"))
          for (double s : parse_axis(w.seed, "seed"))
            for (const auto& p : policies)
              cells.push_back({static_cast<int>(n), d, a, b, static_cast<std::uint64_t>(s), p});

  std::vector<std::string> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k; (k = next.fetch_add(1)) < cells.size();) rows[k] = sweep_row(w, cells[k]);
  };
  const unsigned jobs = std::max(1u, std::min<unsigned>(w.jobs ? w.jobs : std::thread::hardware_concurrency(),
                                                        static_cast<unsigned>(std::max<std::size_t>(1, cells.size()))));
  std::vector<std::thread> pool;
  for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::ofstream file;
  if (!w.out.empty()) {
    file.open(w.out);
    if (!file) throw InputError("cannot write " + w.out);
  }
  std::ostream& sink = w.out.empty() ? out : file;
  sink << "n,delta,a,b,seed,policy,t_con,bound,bound_ok,avg_drift,status\n";
  bool failed = false;
  for (const auto& r : rows) {
    sink << r << '\n';
    failed = failed || r.find(",error: ") != std::string::npos;
  }
  return failed ? 2 : 0;
}

// --- check ------------------------------------------------------------------

struct CheckArgs {
  std::vector<std::string> suites;
  std::string fixtures;
  std::string corpus;
};

struct SuiteResult {
  std::size_t cases = 0;
  std::vector<std::string> failures;
};

std::vector<ScenarioConfig> reference_scenarios() {
  std::vector<ScenarioConfig> out;
  for (int n = 3; n <= 6; ++n) {
    auto line = example1_line(n, 1.0);
    line.policy = SlidingPolicy{};
    line.name += "-sliding";
    out.push_back(line);
    out.push_back(example1_line(n, 1.0));
    out.push_back(example2_sliding(n, 1.0, 1.0));
  }
  return out;
}

std::vector<ScenarioConfig> random_corpus(int count, bool symmetric, bool switching) {
  std::vector<ScenarioConfig> out;
  for (int s = 1; s <= count; ++s) {
    RandomScenarioOptions o;
    o.seed = static_cast<std::uint64_t>(s) + (symmetric ? 1000 : 0) + (switching ? 2000 : 0);
    o.n = 2 + s % 5;
    o.delta = s % 2 ? 1.0 : 0.25;
    o.symmetric = symmetric;
    if (switching) o.switching = std::make_pair(2 + s % 2, 0.5 + 0.25 * (s % 3));
    out.push_back(random_connected(o));
  }
  return out;
}

SuiteResult suite_envelope(const CheckArgs& c) {
  SuiteResult r;
  auto check = [&](const std::string& name, const Trajectory<double>& traj, const Quantizer<double>& q) {
    ++r.cases;
    const auto env = envelopes(traj, q);
    if (!env.ok())
      r.failures.push_back(name + ": envelope moved the wrong way at event " + std::to_string(*env.first_violation));
  };
  auto scenarios = reference_scenarios();
  for (auto& s : random_corpus(20, false, false)) scenarios.push_back(std::move(s));
  for (auto& s : random_corpus(10, false, true)) scenarios.push_back(std::move(s));
  if (!c.corpus.empty())
    for (const auto& entry : fs::directory_iterator(c.corpus))
      if (entry.path().extension() == ".json") scenarios.push_back(io::load_scenario(entry.path().string()));
  for (const auto& cfg : scenarios) check(cfg.name, simulate<double>(cfg), cfg.quantizer);
  if (!c.fixtures.empty()) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(c.fixtures))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const auto j = io::read_json_file(f.string());
      const auto q = io::quantizer_from_json(j.at("quantizer"));
      check(f.filename().string(), io::trajectory_from_json(j.at("trajectory"), q), q);
    }
  }
  return r;
}

SuiteResult suite_bounds() {
  SuiteResult r;
  for (const auto& cfg : random_corpus(50, false, false)) {
    ++r.cases;
    const auto rep = analyze(cfg, simulate<double>(cfg));
    if (!rep.converged || !rep.bound || *rep.t_con > *rep.bound)
      r.failures.push_back(cfg.name + ": t_con exceeds the bound or did not converge");
  }
  return r;
}

SuiteResult suite_conservation() {
  SuiteResult r;
  for (const auto& cfg : random_corpus(30, true, false)) {
    ++r.cases;
    const auto traj = simulate<double>(cfg);
    const double drift = average_conservation(traj);
    if (drift > 1e-9) r.failures.push_back(cfg.name + ": average drifted by " + io::format_double(drift));
    const auto limit = limit_value_check(traj, cfg.schedule, cfg.quantizer);
    if (limit.verdict != Verdict::pass) r.failures.push_back(cfg.name + ": limit value " + limit.detail);
  }
  return r;
}

SuiteResult suite_oracle() {
  SuiteResult r;
  std::vector<ScenarioConfig> refs;
  auto line = example1_line(3, 1.0);
  line.policy = SlidingPolicy{};
  refs.push_back(line);
  refs.push_back(example2_sliding(3, 1.0, 1.0));
  refs.push_back(example2_sliding(4, 1.0, 1.0));
  for (const auto& cfg : refs) {
    ++r.cases;
    const auto traj = simulate<double>(cfg);
    const double t_end = std::max(1.0, traj.end_time());
    const auto samples = simulate_regularized<double>(cfg, 1e-3, 1e-5, t_end, t_end / 50.0);
    const double dev = max_deviation(traj, samples);
    if (dev > 5e-3) r.failures.push_back(cfg.name + ": oracle deviation " + io::format_double(dev));
  }
  return r;
}

int cmd_check(const CheckArgs& c, std::ostream& out) {
  static const std::vector<std::string> all{"envelope", "bounds", "conservation", "oracle"};
  std::vector<std::string> wanted;
  for (const auto& s : c.suites) {
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) {
        if (std::find(all.begin(), all.end(), tok) == all.end()) throw InputError("unknown suite " + tok);
        wanted.push_back(tok);
      }
  }
  if (wanted.empty()) wanted = all;
  bool ok = true;
  for (const auto& name : all) {
    if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    SuiteResult r;
    try {
      if (name == "envelope") r = suite_envelope(c);
      if (name == "bounds") r = suite_bounds();
      if (name == "conservation") r = suite_conservation();
      if (name == "oracle") r = suite_oracle();
    } catch (const std::exception& e) {
      r.failures.push_back(std::string("suite aborted: ") + e.what());
    }
    const bool pass = r.failures.empty();
    ok = ok && pass;
    out << name << ": " << (pass ? "pass" : "FAIL") << " (" << r.cases << " cases)\n";
    for (const auto& f : r.failures) out << "  " << f << '\n';
  }
  return ok ? 0 : 1;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Exact simulation of quantized consensus on directed graphs", "qcl"};
  app.require_subcommand(1);

  RunArgs run_args;
  auto* run_cmd = app.add_subcommand("run", "Simulate a scenario and write trajectory and report");
  run_cmd->set_help_flag("--help", "Print this help message and exit");
  add_scenario_options(*run_cmd, run_args.scenario);
  run_cmd->add_option("--out", run_args.out_dir, "Output directory");
  run_cmd->add_option("--format", run_args.format, "csv, json or both")
      ->check(CLI::IsMember({"csv", "json", "both"}));
  run_cmd->add_option("--stride", run_args.stride, "Add sampled rows to the CSV every STRIDE time units");
  run_cmd->add_flag("--oracle", run_args.oracle, "Compare against the regularized integrator");
  run_cmd->add_option("--eps", run_args.eps, "Oracle regularization width");
  run_cmd->add_option("--h", run_args.h, "Oracle step size");

  ScenarioArgs bound_args;
  auto* bound_cmd = app.add_subcommand("bound", "Evaluate the convergence-time bound");
  add_scenario_options(*bound_cmd, bound_args);

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run a parameter grid and print a CSV table");
  sweep_cmd->add_option("--builder", sweep_args.builder)->check(CLI::IsMember({"example1", "example2", "random"}));
  sweep_cmd->add_option("--n", sweep_args.n, "List or range, e.g. 3..8");
  sweep_cmd->add_option("--delta", sweep_args.delta);
  sweep_cmd->add_option("--a", sweep_args.a);
  sweep_cmd->add_option("--b", sweep_args.b);
  sweep_cmd->add_option("--seed", sweep_args.seed);
  sweep_cmd->add_option("--policy", sweep_args.policy);
  sweep_cmd->add_option("--density", sweep_args.density);
  sweep_cmd->add_flag("--symmetric", sweep_args.symmetric);
  sweep_cmd->add_option("--jobs", sweep_args.jobs, "Concurrent cells (default: hardware threads)");
  sweep_cmd->add_option("--out", sweep_args.out, "Write the table here instead of stdout");

  CheckArgs check_args;
  auto* check_cmd = app.add_subcommand("check", "Run the invariant suites");
  check_cmd->add_option("--suite", check_args.suites, "envelope, bounds, conservation, oracle");
  check_cmd->add_option("--fixtures", check_args.fixtures, "Directory of trajectory fixtures")->check(CLI::ExistingDirectory);
  check_cmd->add_option("--corpus", check_args.corpus, "Directory of scenario files")->check(CLI::ExistingDirectory);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run_cmd->parsed()) return cmd_run(run_args, out);
    if (bound_cmd->parsed()) return cmd_bound(bound_args, out);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, out);
    if (check_cmd->parsed()) return cmd_check(check_args, out);
  } catch (const EventLimitExceeded<double>& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

} // namespace qcl::cli
