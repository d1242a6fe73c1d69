#include "common.hpp"

#include "orthnewton/cli.hpp"
#include "orthnewton/ica.hpp"
#include "orthnewton/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <iomanip>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace orthnewton::cli::detail {

namespace {

struct BenchOptions {
  CommonOptions common;
  int trials = 20;
  long samples = 10000;
  std::string sources = "uniform,laplace,twopoint";
  int fixed_iters = -1;
  bool near_solution = false;
  double perturbation = 0.03;
};

struct TrialResult {
  int trial = 0;
  std::uint64_t seed = 0;
  double crosstalk_percent = 0;
  int iterations = 0;
  Termination termination = Termination::max_iter;
  double wall_ms = 0;
  std::vector<double> step_norms;
  std::string error;
};

std::vector<SourceKind> parse_sources(const std::string &list) {
  std::vector<SourceKind> kinds;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    kinds.push_back(parse_source_kind(item));
  if (kinds.size() < 2)
    throw InvalidArgument("need at least 2 sources");
  return kinds;
}

/// Random rotation exp(Delta) with ||Delta||_F = size.
MatrixXd small_rotation(Eigen::Index n, double size, Rng &rng) {
  const MatrixXd g = rng.normal_matrix(n, n);
  auto delta = SkewCoordinates<double>::skew_part(g);
  delta = (size / delta.norm()) * delta;
  return expm_skew(delta);
}

TrialResult run_trial(const BenchOptions &opt, const std::vector<SourceKind> &kinds,
                      const OptimizerConfig &config, const Cost<double> &cost, int trial) {
  TrialResult r;
  r.trial = trial;
  r.seed = opt.common.seed + static_cast<std::uint64_t>(trial);
  const auto n = static_cast<Eigen::Index>(kinds.size());
  const MatrixXd S = synthetic_sources(kinds, opt.samples, r.seed);
  const MatrixXd A = make_mixing(n, r.seed).A;

  const auto start = std::chrono::steady_clock::now();
  IcaResult res;
  if (opt.near_solution) {
    OptimizerConfig lm;
    lm.mode = Mode::levenberg_marquardt;
    const IcaResult base = run_ica(A * S, cost, lm, A);
    Rng rng(derive_seed(r.seed, kStreamInit));
    const MatrixXd C0 = small_rotation(n, opt.perturbation, rng) * base.run.C_final;
    res = run_ica(A * S, cost, config, A, C0);
  } else {
    res = run_ica(A * S, cost, config, A);
  }
  const auto stop = std::chrono::steady_clock::now();

  r.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();
  r.crosstalk_percent = res.crosstalk->mean_percent;
  r.iterations = res.run.iterations();
  r.termination = res.run.termination;
  for (const auto &rec : res.run.trace)
    if (rec.t > 0)
      r.step_norms.push_back(rec.step_norm);
  return r;
}

double median(std::vector<double> v) {
  if (v.empty())
    return 0;
  std::sort(v.begin(), v.end());
  const auto m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

int bench(const BenchOptions &opt, Context &ctx) {
  if (opt.trials < 1)
    throw InvalidArgument("bench: --trials must be >= 1");
  if (opt.samples < 2)
    throw InvalidArgument("bench: --samples must be >= 2");
  CommonOptions common = opt.common;
  if (opt.fixed_iters >= 0) {
    common.max_iter = opt.fixed_iters;
    common.tol_step = 0;
    common.tol_cost = 0;
  }
  const OptimizerConfig config = make_config(common);
  const Cost<double> cost = make_cost(common.cost);
  const auto kinds = parse_sources(opt.sources);

  std::vector<TrialResult> results(static_cast<std::size_t>(opt.trials));
  std::atomic<int> next{0};
  const unsigned workers = std::min<unsigned>(worker_count(), static_cast<unsigned>(opt.trials));
  const auto t0 = std::chrono::steady_clock::now();
  auto work = [&] {
    for (int k = next++; k < opt.trials; k = next++) {
      try {
        results[static_cast<std::size_t>(k)] = run_trial(opt, kinds, config, cost, k);
      } catch (const std::exception &e) {
        results[static_cast<std::size_t>(k)].trial = k;
        results[static_cast<std::size_t>(k)].error = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w)
    pool.emplace_back(work);
  work();
  for (auto &th : pool)
    th.join();
  const double total_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  std::vector<double> xt;
  int converged = 0;
  bool failure = false;
  auto &os = ctx.out;
  os << "trial  seed          crosstalk%   iters  termination      wall_ms\n";
  for (const auto &r : results) {
    if (!r.error.empty()) {
      os << std::setw(5) << r.trial << "  error: " << r.error << '\n';
      failure = true;
      continue;
    }
    xt.push_back(r.crosstalk_percent);
    if (r.termination == Termination::step_tol || r.termination == Termination::cost_tol)
      ++converged;
    if (r.termination == Termination::lambda_overflow ||
        r.termination == Termination::solver_failure)
      failure = true;
    os << std::setw(5) << r.trial << "  " << std::setw(12) << std::left << r.seed << std::right
       << std::setw(12) << std::fixed << std::setprecision(4) << r.crosstalk_percent
       << std::setw(8) << r.iterations << "  " << std::setw(15) << std::left
       << to_string(r.termination) << std::right << std::setw(10) << std::setprecision(2)
       << r.wall_ms << '\n';
    os.unsetf(std::ios::floatfield);
    os << std::setprecision(6);
    if (opt.near_solution) {
      os << "       step norms:";
      for (double s : r.step_norms)
        os << ' ' << std::scientific << std::setprecision(3) << s;
      os.unsetf(std::ios::floatfield);
      os << std::setprecision(6) << '\n';
    }
  }
  const double mean =
      xt.empty() ? 0 : std::accumulate(xt.begin(), xt.end(), 0.0) / static_cast<double>(xt.size());
  os << "summary: trials=" << opt.trials << " mean_crosstalk%=" << mean
     << " median_crosstalk%=" << median(xt) << " converged=" << converged
     << " total_wall_s=" << total_s << " workers=" << workers << '\n';

  if (!opt.common.out.empty()) {
    const fs::path dir(opt.common.out);
    json j;
    j["summary"] = {{"trials", opt.trials},
                    {"mean_crosstalk_percent", mean},
                    {"median_crosstalk_percent", median(xt)},
                    {"converged", converged},
                    {"total_wall_s", total_s}};
    json rows = json::array();
    for (const auto &r : results) {
      json row{{"trial", r.trial},
               {"seed", r.seed},
               {"crosstalk_percent", r.crosstalk_percent},
               {"iterations", r.iterations},
               {"termination", to_string(r.termination)},
               {"wall_ms", r.wall_ms},
               {"step_norms", r.step_norms}};
      if (!r.error.empty())
        row["error"] = r.error;
      rows.push_back(std::move(row));
    }
    j["trials"] = std::move(rows);
    write_json(dir / "bench.json", j);

    json m = manifest("bench", ctx);
    m["config"] = config_json(config);
    m["cost"] = common.cost;
    m["sources"] = opt.sources;
    m["samples"] = opt.samples;
    m["seeds"] = {{"base", opt.common.seed}, {"trials", opt.trials}};
    m["near_solution"] = opt.near_solution;
    m["fixed_iters"] = opt.fixed_iters;
    m["outputs"] = {(dir / "bench.json").string()};
    write_json(dir / "manifest.json", m);
  }
  return failure ? kExitOptimizer : kExitOk;
}

} // namespace

void register_bench(CLI::App &app, Action &action, Context &ctx) {
  auto opt = std::make_shared<BenchOptions>();
  opt->common.seed = 7;
  auto *cmd = app.add_subcommand("bench", "Seeded synthetic separation trials");
  add_optimizer_options(*cmd, opt->common);
  cmd->add_option("--out", opt->common.out, "Directory for bench.json and manifest.json");
  cmd->add_option("--trials", opt->trials, "Number of trials (seeds seed, seed+1, ...)")
      ->capture_default_str();
  cmd->add_option("--samples", opt->samples, "Samples per source")->capture_default_str();
  cmd->add_option("--sources", opt->sources, "Comma-separated source kinds")
      ->capture_default_str();
  cmd->add_option("--fixed-iters", opt->fixed_iters,
                  "Run exactly this many iterations (convergence tests disabled)");
  cmd->add_flag("--near-solution", opt->near_solution,
                "Start from a small rotation away from an LM-converged solution");
  cmd->add_option("--perturbation", opt->perturbation,
                  "Frobenius norm of the starting perturbation for --near-solution")
      ->capture_default_str();
  cmd->callback([opt, &action, &ctx] { action = [opt, &ctx] { return bench(*opt, ctx); }; });
}

} // namespace orthnewton::cli::detail
