#include "common.hpp"

#include "orthnewton/cli.hpp"
#include "orthnewton/ica.hpp"
#include "orthnewton/io.hpp"

#include <cctype>
#include <memory>
#include <optional>

namespace orthnewton::cli::detail {

namespace {

struct SeparateOptions {
  CommonOptions common;
  std::vector<std::string> inputs;
  std::optional<std::uint64_t> mixing_seed;
  std::string mixing_file;
  std::string init = "identity";
};

bool is_wav(const std::string &p) {
  auto ext = fs::path(p).extension().string();
  for (auto &c : ext)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".wav";
}

json crosstalk_json(const CrosstalkReport &r) {
  json j;
  j["mean_percent"] = r.mean_percent;
  j["per_channel"] = std::vector<double>(r.per_channel.data(),
                                         r.per_channel.data() + r.per_channel.size());
  std::vector<long> perm(r.permutation.begin(), r.permutation.end());
  j["permutation"] = perm;
  j["permutation_is_bijection"] = r.permutation_is_bijection;
  j["amari_index"] = amari_index(r.G);
  j["G"] = matrix_json(r.G);
  return j;
}

int separate(const SeparateOptions &opt, Context &ctx) {
  const OptimizerConfig config = make_config(opt.common);
  const Cost<double> cost = make_cost(opt.common.cost);
  const fs::path out_dir(opt.common.out);

  io::SignalTable table;
  unsigned sample_rate = 44100;
  const bool wav_input = is_wav(opt.inputs.front());
  if (wav_input) {
    std::vector<fs::path> paths(opt.inputs.begin(), opt.inputs.end());
    table = io::read_wav_channels(paths, &sample_rate);
  } else {
    if (opt.inputs.size() != 1)
      throw io::IoError("separate: give one CSV file or one WAV file per channel");
    table = io::read_csv(opt.inputs.front());
  }
  const Eigen::Index n = table.data.rows();
  if (n < 2)
    throw InvalidArgument("separate: need at least 2 channels");

  std::optional<MatrixXd> A;
  if (!opt.mixing_file.empty()) {
    A = io::read_matrix_csv(opt.mixing_file);
    if (A->rows() != n || A->cols() != n)
      throw io::IoError(opt.mixing_file + ": mixing matrix must be " + std::to_string(n) + "x" +
                        std::to_string(n));
  } else if (opt.mixing_seed) {
    A = make_mixing(n, *opt.mixing_seed).A;
  }

  std::optional<MatrixXd> C0;
  if (opt.init == "random") {
    Rng rng(derive_seed(config.seed, kStreamInit));
    C0 = random_orthogonal(n, rng);
  }

  const IcaResult res = run_ica(table.data, cost, config, A, C0);

  io::SignalTable unmixed;
  unmixed.data = res.outputs;
  for (Eigen::Index i = 0; i < n; ++i)
    unmixed.names.push_back("y" + std::to_string(i + 1));

  std::vector<std::string> outputs;
  const auto emit = [&](const fs::path &p) { outputs.push_back(p.string()); };
  io::write_csv(out_dir / "unmixed.csv", unmixed);
  emit(out_dir / "unmixed.csv");
  io::write_trace(out_dir / "trace.jsonl", res.run.trace);
  emit(out_dir / "trace.jsonl");

  json report;
  report["termination"] = to_string(res.run.termination);
  report["message"] = res.run.message;
  report["iterations"] = res.run.iterations();
  report["final_cost"] = res.run.trace.back().F;
  report["gradient_norm"] = res.run.gradient_norm;
  report["C_final"] = matrix_json(res.run.C_final);
  report["whitening_matrix"] = matrix_json(res.whitening.matrix);
  report["whitening_mean"] = std::vector<double>(res.whitening.mean.data(),
                                                 res.whitening.mean.data() + n);
  if (res.crosstalk)
    report["crosstalk"] = crosstalk_json(*res.crosstalk);

  if (wav_input) {
    std::vector<double> scales;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double peak = res.outputs.row(i).cwiseAbs().maxCoeff();
      const double scale = peak > 0 ? 0.99 / peak : 1.0;
      scales.push_back(scale);
      const fs::path p = out_dir / ("unmixed_" + std::to_string(i + 1) + ".wav");
      io::write_wav(p, {sample_rate, (scale * res.outputs.row(i)).transpose()});
      emit(p);
    }
    report["wav_scales"] = scales;
  }
  write_json(out_dir / "report.json", report);
  emit(out_dir / "report.json");

  json m = manifest("separate", ctx);
  m["config"] = config_json(config);
  m["cost"] = opt.common.cost;
  m["inputs"] = opt.inputs;
  m["seeds"] = {{"seed", config.seed}};
  if (opt.mixing_seed)
    m["seeds"]["mixing_seed"] = *opt.mixing_seed;
  if (!opt.mixing_file.empty())
    m["mixing_file"] = opt.mixing_file;
  m["init"] = opt.init;
  m["outputs"] = outputs;
  write_json(out_dir / "manifest.json", m);

  ctx.out << "termination: " << to_string(res.run.termination) << '\n'
          << "iterations: " << res.run.iterations() << '\n'
          << "final cost: " << res.run.trace.back().F << '\n';
  if (res.crosstalk)
    ctx.out << "mean crosstalk: " << res.crosstalk->mean_percent << " %\n";
  ctx.out << "outputs: " << out_dir.string() << '\n';

  if (res.run.termination == Termination::lambda_overflow ||
      res.run.termination == Termination::solver_failure) {
    ctx.err << "optimizer failure: " << to_string(res.run.termination) << ": " << res.run.message
            << '\n';
    return kExitOptimizer;
  }
  return kExitOk;
}

} // namespace

void register_separate(CLI::App &app, Action &action, Context &ctx) {
  auto opt = std::make_shared<SeparateOptions>();
  auto *cmd = app.add_subcommand("separate", "Prewhiten and unmix a recording");
  cmd->add_option("--input", opt->inputs, "One CSV file, or one mono WAV file per channel")
      ->required();
  add_optimizer_options(*cmd, opt->common);
  cmd->add_option("--out", opt->common.out, "Output directory")->required();
  auto *ms = cmd->add_option("--mixing-seed", opt->mixing_seed,
                             "Regenerate the ground-truth mixing matrix from this seed");
  auto *mf = cmd->add_option("--mixing-file", opt->mixing_file, "Ground-truth mixing matrix CSV");
  ms->excludes(mf);
  cmd->add_option("--init", opt->init, "Starting rotation: identity or random (uses --seed)")
      ->check(CLI::IsMember({"identity", "random"}))
      ->capture_default_str();
  cmd->callback([opt, &action, &ctx] { action = [opt, &ctx] { return separate(*opt, ctx); }; });
}

} // namespace orthnewton::cli::detail
