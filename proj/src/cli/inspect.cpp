#include "common.hpp"

#include "orthnewton/cli.hpp"
#include "orthnewton/io.hpp"
#include "orthnewton/newton.hpp"
#include "orthnewton/random.hpp"

#include <cstdio>
#include <fstream>
#include <memory>

namespace orthnewton::cli::detail {

namespace {

inline constexpr std::uint64_t kStreamInspect = 4;

struct InspectOptions {
  long n = 0;
  std::uint64_t seed = 0;
  std::string out;
};

/// Statistics with every entry drawn from N(0,1); U_i symmetrized.
CostEvaluation<double> random_statistics(Eigen::Index n, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kStreamInspect));
  CostEvaluation<double> e;
  e.R = rng.normal_matrix(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const MatrixXd g = rng.normal_matrix(n, n);
    e.U.push_back(0.5 * (g + g.transpose()));
  }
  return e;
}

int inspect(const InspectOptions &opt, Context &ctx) {
  const auto n = static_cast<Eigen::Index>(opt.n);
  const auto sys = assemble(random_statistics(n, opt.seed), 0.0);
  const SparsityReport rep = sparsity_report(sys);

  json j{{"n", rep.n},
         {"antisymmetric_block", rep.antisymmetric_block},
         {"symmetric_block", rep.symmetric_block},
         {"nnz_offdiag", rep.nnz_offdiag},
         {"bound", rep.bound},
         {"within_bound", rep.nnz_offdiag <= rep.bound},
         {"system_dim", n * n},
         {"system_nnz", sys.M_full.nonZeros()}};
  ctx.out << j.dump(2) << '\n';

  if (!opt.out.empty()) {
    const fs::path dir(opt.out);
    fs::create_directories(dir);
    const fs::path pattern = dir / "pattern.csv";
    std::ofstream os(pattern);
    if (!os)
      throw io::IoError("cannot open '" + pattern.string() + "' for writing");
    os << "row,col,value\n";
    char buf[64];
    for (Eigen::Index c = 0; c < sys.M_full.outerSize(); ++c)
      for (SparseOperator<double>::InnerIterator it(sys.M_full, c); it; ++it) {
        if (it.value() == 0.0)
          continue;
        std::snprintf(buf, sizeof buf, "%.17g", it.value());
        os << it.row() << ',' << it.col() << ',' << buf << '\n';
      }
    if (!os)
      throw io::IoError("write failed for '" + pattern.string() + "'");
    write_json(dir / "report.json", j);

    json m = manifest("inspect", ctx);
    m["n"] = opt.n;
    m["seeds"] = {{"seed", opt.seed}};
    m["outputs"] = {pattern.string(), (dir / "report.json").string()};
    write_json(dir / "manifest.json", m);
  }
  return kExitOk;
}

} // namespace

void register_inspect(CLI::App &app, Action &action, Context &ctx) {
  auto opt = std::make_shared<InspectOptions>();
  auto *cmd = app.add_subcommand("inspect", "Sparsity of the Newton system for random statistics");
  cmd->add_option("--n", opt->n, "Dimension")->required()->check(CLI::Range(2L, 200L));
  cmd->add_option("--seed", opt->seed, "Seed for the random statistics")->capture_default_str();
  cmd->add_option("--out", opt->out, "Directory for pattern.csv, report.json, manifest.json");
  cmd->callback([opt, &action, &ctx] { action = [opt, &ctx] { return inspect(*opt, ctx); }; });
}

} // namespace orthnewton::cli::detail
