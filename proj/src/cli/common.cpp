#include "common.hpp"

#include "orthnewton/cli.hpp"
#include "orthnewton/io.hpp"
#include "orthnewton/orthnewton.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace orthnewton::cli {

namespace detail {

void add_optimizer_options(CLI::App &cmd, CommonOptions &o) {
  cmd.add_option("--cost", o.cost, "Contrast: kurtosis (-kappa) or kurtosis2 (-kappa^2)")
      ->check(CLI::IsMember({"kurtosis", "kurtosis2"}))
      ->capture_default_str();
  cmd.add_option("--mode", o.mode, "newton (pure Newton) or lm (Levenberg-Marquardt)")
      ->check(CLI::IsMember({"newton", "pure-newton", "lm"}))
      ->capture_default_str();
  cmd.add_option("--lambda0", o.lambda0, "Initial damping")->capture_default_str();
  cmd.add_option("--alpha", o.alpha, "Damping factor (> 1)")->capture_default_str();
  cmd.add_option("--max-iter", o.max_iter, "Outer iteration limit")->capture_default_str();
  cmd.add_option("--tol-step", o.tol_step, "Stop when ||Delta||_F falls below")
      ->capture_default_str();
  cmd.add_option("--tol-cost", o.tol_cost, "Stop when |F_t - F_{t-1}| falls below")
      ->capture_default_str();
  cmd.add_option("--seed", o.seed, "64-bit seed for all randomness")->capture_default_str();
}

Mode parse_mode(const std::string &s) {
  if (s == "newton" || s == "pure-newton")
    return Mode::pure_newton;
  if (s == "lm")
    return Mode::levenberg_marquardt;
  throw InvalidArgument("unknown mode '" + s + "'");
}

Cost<double> make_cost(const std::string &name) {
  if (name == "kurtosis")
    return make_neg_kurtosis<double>();
  if (name == "kurtosis2")
    return make_neg_kurtosis_squared<double>();
  throw InvalidArgument("unknown cost '" + name + "'");
}

OptimizerConfig make_config(const CommonOptions &o) {
  OptimizerConfig c;
  c.lambda0 = o.lambda0;
  c.alpha = o.alpha;
  c.max_iter = o.max_iter;
  c.tol_step = o.tol_step;
  c.tol_cost = o.tol_cost;
  c.mode = parse_mode(o.mode);
  c.seed = o.seed;
  c.validate();
  return c;
}

json config_json(const OptimizerConfig &c) {
  return json{{"lambda0", c.lambda0},       {"alpha", c.alpha},
              {"lambda_min", c.lambda_min}, {"lambda_max", c.lambda_max},
              {"max_iter", c.max_iter},     {"max_inner", c.max_inner},
              {"tol_step", c.tol_step},     {"tol_cost", c.tol_cost},
              {"mode", to_string(c.mode)},  {"seed", c.seed}};
}

json matrix_json(const MatrixXd &m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json manifest(const std::string &command, const Context &ctx) {
  json j;
  j["tool"] = "orthnewton";
  j["version"] = kVersion;
  j["command"] = command;
  j["argv"] = ctx.args;
  j["prng"] = "mt19937_64; per-consumer streams via splitmix64(seed ^ splitmix64(stream))";
  return j;
}

void write_json(const fs::path &path, const json &j) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out)
    throw io::IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out)
    throw io::IoError("write failed for '" + path.string() + "'");
}

unsigned worker_count() {
  unsigned n = std::max(1u, std::thread::hardware_concurrency());
  if (const char *env = std::getenv("ORTHNEWTON_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v >= 1)
        n = static_cast<unsigned>(v);
    } catch (const std::exception &) {
      // unparsable value: keep the default
    }
  }
  return n;
}

} // namespace detail

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
  detail::Context ctx{args, out, err};
  CLI::App app{"Newton and Levenberg-Marquardt optimization on O(n) for ICA", "orthnewton"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  detail::Action action;
  detail::register_separate(app, action, ctx);
  detail::register_bench(app, action, ctx);
  detail::register_inspect(app, action, ctx);
  detail::register_mix(app, action, ctx);

  std::vector<const char *> argv{"orthnewton"};
  for (const auto &a : args)
    argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    return action ? action() : kExitUsage;
  } catch (const io::IoError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InvalidArgument &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RankDeficient &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DegenerateChannel &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error &e) {
    err << "optimizer error: " << e.what() << '\n';
    return kExitOptimizer;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

} // namespace orthnewton::cli
