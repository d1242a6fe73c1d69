#include "common.hpp"

#include "orthnewton/cli.hpp"
#include "orthnewton/ica.hpp"
#include "orthnewton/io.hpp"

#include <memory>
#include <sstream>

namespace orthnewton::cli::detail {

namespace {

struct MixOptions {
  std::string synthetic;
  std::vector<std::string> sources;
  long samples = 10000;
  std::uint64_t seed = 0;
  std::string out = "mixed";
};

io::SignalTable named(const MatrixXd &data, const std::string &prefix) {
  io::SignalTable t;
  t.data = data;
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    t.names.push_back(prefix + std::to_string(i + 1));
  return t;
}

int mix(const MixOptions &opt, Context &ctx) {
  MatrixXd S;
  unsigned sample_rate = 0;
  const bool wav = !opt.sources.empty();
  if (!wav && opt.synthetic.empty())
    throw InvalidArgument("mix: give --synthetic or --sources");
  if (wav) {
    std::vector<fs::path> paths(opt.sources.begin(), opt.sources.end());
    S = io::read_wav_channels(paths, &sample_rate).data;
  } else {
    if (opt.samples < 2)
      throw InvalidArgument("mix: --samples must be >= 2");
    std::vector<SourceKind> kinds;
    std::stringstream ss(opt.synthetic);
    std::string item;
    while (std::getline(ss, item, ','))
      kinds.push_back(parse_source_kind(item));
    S = synthetic_sources(kinds, opt.samples, opt.seed);
  }
  const Eigen::Index n = S.rows();
  if (n < 2)
    throw InvalidArgument("mix: need at least 2 sources");

  MatrixXd A = make_mixing(n, opt.seed).A;
  MatrixXd X = A * S;
  double wav_scale = 1.0;
  if (wav) {
    const double peak = X.cwiseAbs().maxCoeff();
    if (peak > 0.99) {
      wav_scale = 0.99 / peak;
      X *= wav_scale;
      A *= wav_scale;
    }
  }

  const fs::path out(opt.out);
  std::vector<std::string> outputs;
  fs::path manifest_path;
  if (!wav && out.extension() == ".csv") {
    const fs::path dir = out.parent_path();
    if (!dir.empty())
      fs::create_directories(dir);
    const std::string stem = out.stem().string();
    const fs::path a_path = dir / (stem + "_A.csv");
    const fs::path s_path = dir / (stem + "_sources.csv");
    io::write_csv(out, named(X, "x"));
    io::write_matrix_csv(a_path, A);
    io::write_csv(s_path, named(S, "s"));
    outputs = {out.string(), a_path.string(), s_path.string()};
    manifest_path = dir / (stem + ".manifest.json");
  } else {
    fs::create_directories(out);
    if (wav) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const fs::path p = out / ("mixed_" + std::to_string(i + 1) + ".wav");
        io::write_wav(p, {sample_rate, X.row(i).transpose()});
        outputs.push_back(p.string());
      }
    } else {
      io::write_csv(out / "mixed.csv", named(X, "x"));
      outputs.push_back((out / "mixed.csv").string());
    }
    io::write_matrix_csv(out / "A.csv", A);
    io::write_csv(out / "sources.csv", named(S, "s"));
    outputs.push_back((out / "A.csv").string());
    outputs.push_back((out / "sources.csv").string());
    manifest_path = out / "manifest.json";
  }

  json m = manifest("mix", ctx);
  m["seeds"] = {{"seed", opt.seed}};
  if (wav) {
    m["inputs"] = opt.sources;
    m["sample_rate"] = sample_rate;
    m["wav_scale"] = wav_scale;
  } else {
    m["synthetic"] = opt.synthetic;
    m["samples"] = opt.samples;
  }
  m["A"] = matrix_json(A);
  m["outputs"] = outputs;
  write_json(manifest_path, m);

  ctx.out << "mixed " << n << " sources, " << S.cols() << " samples\n";
  for (const auto &p : outputs)
    ctx.out << "wrote " << p << '\n';
  return kExitOk;
}

} // namespace

void register_mix(CLI::App &app, Action &action, Context &ctx) {
  auto opt = std::make_shared<MixOptions>();
  auto *cmd = app.add_subcommand("mix", "Mix synthetic or WAV sources with A = I + S");
  auto *syn = cmd->add_option("--synthetic", opt->synthetic,
                              "Comma-separated kinds: uniform, laplace, twopoint, gaussian");
  auto *src = cmd->add_option("--sources", opt->sources, "Mono WAV files, one per source");
  syn->excludes(src);
  cmd->add_option("--samples", opt->samples, "Samples per synthetic source")
      ->capture_default_str();
  cmd->add_option("--seed", opt->seed, "Seed for the mixing matrix and sources")
      ->capture_default_str();
  cmd->add_option("--out", opt->out, "Output .csv path or directory")->capture_default_str();
  cmd->callback([opt, &action, &ctx] { action = [opt, &ctx] { return mix(*opt, ctx); }; });
}

} // namespace orthnewton::cli::detail
