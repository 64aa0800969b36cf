#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mannystrom/config.hpp"
#include "mannystrom/errors.hpp"
#include "mannystrom/experiments.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::string seed;  // empty means "use the config value"
  bool paper_scale = false;
};

void add_common(CLI::App* cmd, CommonOpts* opts,
                const std::string& default_out) {
  opts->out_dir = default_out;
  cmd->add_option("--config", opts->config_path,
                  "flat key=value configuration file");
  cmd->add_option("--seed", opts->seed, "master seed (overrides the config)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", opts->out_dir, "output directory");
  cmd->add_flag("--paper-scale", opts->paper_scale,
                "use the large experiment sizes instead of desk scale");
}

mannystrom::io::Config load_config(const CommonOpts& opts) {
  mannystrom::io::Config cfg;
  if (!opts.config_path.empty())
    cfg = mannystrom::io::Config::parse_file(opts.config_path);
  if (!opts.seed.empty()) cfg.set("seed", opts.seed);
  if (opts.paper_scale) cfg.set("paper_scale", "true");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace mannystrom;

  CLI::App app{"randomized Nystrom cubic Newton experiment runner"};
  app.require_subcommand(1);

  CommonOpts bench_opts, spd_opts, grass_opts, pga_opts;
  CLI::App* bench = app.add_subcommand(
      "bound-bench", "empirical approximation error against the a-priori bounds");
  add_common(bench, &bench_opts, "out_bound_bench");
  CLI::App* spd = app.add_subcommand(
      "optimize-spd", "regularized covariance estimation on the SPD manifold");
  add_common(spd, &spd_opts, "out_optimize_spd");
  CLI::App* grass = app.add_subcommand(
      "optimize-grassmann", "dominant-subspace trace maximization");
  add_common(grass, &grass_opts, "out_optimize_grassmann");
  CLI::App* pga_cmd = app.add_subcommand(
      "pga", "principal geodesic analysis with exact and compressed covariance");
  add_common(pga_cmd, &pga_opts, "out_pga");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (bench->parsed()) {
      io::Config cfg = load_config(bench_opts);
      experiments::run_bound_bench(cfg, bench_opts.out_dir,
                                   bench_opts.paper_scale);
    } else if (spd->parsed()) {
      io::Config cfg = load_config(spd_opts);
      experiments::run_optimize_spd(cfg, spd_opts.out_dir,
                                    spd_opts.paper_scale);
    } else if (grass->parsed()) {
      io::Config cfg = load_config(grass_opts);
      experiments::run_optimize_grassmann(cfg, grass_opts.out_dir,
                                          grass_opts.paper_scale);
    } else if (pga_cmd->parsed()) {
      io::Config cfg = load_config(pga_opts);
      experiments::run_pga(cfg, pga_opts.out_dir, pga_opts.paper_scale);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
