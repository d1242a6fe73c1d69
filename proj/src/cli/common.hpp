#pragma once

#include "orthnewton/cost.hpp"
#include "orthnewton/optimizer.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

namespace orthnewton::cli::detail {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Context {
  std::vector<std::string> args;
  std::ostream &out;
  std::ostream &err;
};

/// Flags shared by the optimizing commands.
struct CommonOptions {
  std::string cost = "kurtosis2";
  std::string mode = "lm";
  double lambda0 = 50.0;
  double alpha = 10.0;
  int max_iter = 200;
  double tol_step = 1e-10;
  double tol_cost = 1e-12;
  std::uint64_t seed = 0;
  std::string out;
};

void add_optimizer_options(CLI::App &cmd, CommonOptions &o);

Mode parse_mode(const std::string &s);
Cost<double> make_cost(const std::string &name);
OptimizerConfig make_config(const CommonOptions &o);

json config_json(const OptimizerConfig &c);
json matrix_json(const MatrixXd &m);
json manifest(const std::string &command, const Context &ctx);
void write_json(const fs::path &path, const json &j);

/// Worker threads for fan-out: ORTHNEWTON_THREADS if set, else hardware
/// concurrency; at least 1.
unsigned worker_count();

using Action = std::function<int()>;

void register_separate(CLI::App &app, Action &action, Context &ctx);
void register_bench(CLI::App &app, Action &action, Context &ctx);
void register_inspect(CLI::App &app, Action &action, Context &ctx);
void register_mix(CLI::App &app, Action &action, Context &ctx);

} // namespace orthnewton::cli::detail
