#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spt/discrete_measure.hpp"
#include "spt/experiment.hpp"
#include "spt/transport.hpp"
#include "spt/version.hpp"
#include "spt/wpp.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

// Shared --seed/--out/--threads flags; presence is resolved after parsing.
struct OverrideBinding {
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* threads_opt = nullptr;

  void attach(CLI::App* cmd) {
    seed_opt = cmd->add_option("--seed", seed, "Override the config seed");
    out_opt = cmd->add_option("--out", out, "Override the output directory");
    threads_opt =
        cmd->add_option("--threads", threads, "Worker threads (reserved)");
  }

  Overrides resolve() const {
    Overrides o;
    if (seed_opt->count()) o.seed = seed;
    if (out_opt->count()) o.out = out;
    if (threads_opt->count()) o.threads = threads;
    return o;
  }
};

void print_report(const spt::ExperimentReport& report) {
  std::printf("wrote %s/config.ini, rows.csv, summary.json\n",
              report.out_dir.c_str());
  std::printf("rows: %d (flagged: %d)\n", report.total_rows,
              report.flagged_rows);
  std::printf("wall: %.2fs\n", report.wall_seconds);
}

int run_bundle(const std::string& config_path,
               const std::set<std::string>& allowed_kinds,
               const std::string& subcommand, const Overrides& overrides) {
  spt::ExperimentConfig config = spt::load_experiment_config(config_path);
  if (!allowed_kinds.count(config.kind)) {
    std::string names;
    for (const std::string& k : allowed_kinds) {
      names += (names.empty() ? "" : ", ") + k;
    }
    std::fprintf(stderr,
                 "%s: kind '%s' does not belong to subcommand '%s' "
                 "(expected: %s)\n",
                 config_path.c_str(), config.kind.c_str(), subcommand.c_str(),
                 names.c_str());
    return 2;
  }
  spt::apply_overrides(config, overrides.seed, overrides.out,
                       overrides.threads);
  const spt::ExperimentReport report = spt::run(config);
  print_report(report);
  if (config.kind == "solve") {
    const auto summary = nlohmann::json::parse(report.summary_json);
    std::printf("cost = %.17g\n", summary.at("cost").get<double>());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wasserstein distance estimation for spiked transport models"};
  app.set_version_flag("--version", std::string(spt::kVersion));
  app.require_subcommand(1);

  // solve: direct query on two measure files, or a config-driven bundle.
  auto* solve = app.add_subcommand(
      "solve", "Exact optimal transport between two discrete measures");
  std::vector<std::string> solve_paths;
  std::string solve_config;
  double solve_p = 2.0;
  OverrideBinding solve_over;
  solve->add_option("measures", solve_paths,
                    "Two measure files (.csv or .json); prints the cost")
      ->expected(0, 2);
  auto* solve_cfg_opt =
      solve->add_option("--config", solve_config, "Run a solve bundle");
  auto* solve_p_opt =
      solve->add_option("--p", solve_p, "Order of the distance (direct mode)")
          ->check(CLI::Range(1.0, 64.0));
  solve_over.attach(solve);

  // wpp: direct projection-pursuit estimate on two measure files.
  auto* wpp = app.add_subcommand(
      "wpp", "Projected Wasserstein estimate maximized over k-frames");
  std::vector<std::string> wpp_paths;
  double wpp_p = 2.0;
  int wpp_k = 1;
  bool wpp_print_frame = false;
  spt::WppOptions wpp_opts;
  wpp->add_option("measures", wpp_paths, "Two measure files (.csv or .json)")
      ->expected(2);
  wpp->add_option("--p", wpp_p, "Order of the distance")
      ->check(CLI::Range(1.0, 64.0));
  wpp->add_option("--k", wpp_k, "Projection dimension")
      ->check(CLI::PositiveNumber);
  wpp->add_option("--restarts", wpp_opts.restarts, "Ascent restarts")
      ->check(CLI::PositiveNumber);
  wpp->add_option("--max-iters", wpp_opts.max_iters, "Iterations per restart")
      ->check(CLI::PositiveNumber);
  wpp->add_option("--tol", wpp_opts.tol, "Relative convergence tolerance");
  wpp->add_option("--seed", wpp_opts.seed, "Restart seed");
  wpp->add_flag("--frame", wpp_print_frame, "Also print the maximizing frame");

  // Config-driven experiment bundles.
  struct BundleCmd {
    CLI::App* cmd;
    std::string config;
    std::set<std::string> kinds;
    OverrideBinding over;
    bool config_required;
  };
  // Owned behind pointers: CLI11 keeps the bound addresses, so elements
  // must not move when the container grows.
  std::vector<std::unique_ptr<BundleCmd>> bundles;
  const auto add_bundle = [&](const char* name, const char* help,
                              std::set<std::string> kinds,
                              bool config_required) {
    auto b = std::make_unique<BundleCmd>();
    b->cmd = app.add_subcommand(name, help);
    b->kinds = std::move(kinds);
    b->config_required = config_required;
    auto* opt = b->cmd->add_option("--config", b->config,
                                   "Experiment configuration file");
    if (config_required) opt->required();
    b->over.attach(b->cmd);
    bundles.push_back(std::move(b));
  };
  add_bundle("rates", "Two-sample convergence rates (plug-in or WPP)",
             {"rates_plugin", "rates_wpp"}, true);
  add_bundle("spike", "Spike direction recovery angles", {"spike_recovery"},
             true);
  add_bundle("concentration", "Replicate spread of the empirical distance",
             {"concentration"}, true);
  add_bundle("hardness", "Moment-matched lower-bound constructions",
             {"hardness_suite"}, false);

  auto* describe = app.add_subcommand(
      "describe", "Print the resolved experiment plan without running it");
  std::string describe_config;
  OverrideBinding describe_over;
  describe->add_option("--config", describe_config, "Configuration file")
      ->required();
  describe_over.attach(describe);

  CLI11_PARSE(app, argc, argv);

  try {
    if (solve->parsed()) {
      if (solve_cfg_opt->count()) {
        if (!solve_paths.empty() || solve_p_opt->count()) {
          std::fprintf(stderr,
                       "solve: --config conflicts with positional measures "
                       "and --p (those belong to direct mode)\n");
          return 2;
        }
        return run_bundle(solve_config, {"solve"}, "solve",
                          solve_over.resolve());
      }
      if (solve_paths.size() != 2) {
        std::fprintf(stderr,
                     "solve: need two measure files (or --config)\n");
        return 2;
      }
      const Overrides o = solve_over.resolve();
      if (o.seed || o.out || o.threads) {
        std::fprintf(stderr,
                     "solve: --seed/--out/--threads only apply with "
                     "--config\n");
        return 2;
      }
      const spt::DiscreteMeasure mu = spt::read_measure(solve_paths[0]);
      const spt::DiscreteMeasure nu = spt::read_measure(solve_paths[1]);
      std::printf("%.17g\n", spt::wasserstein_discrete_cost(mu, nu, solve_p));
      return 0;
    }
    if (wpp->parsed()) {
      const spt::DiscreteMeasure mu = spt::read_measure(wpp_paths[0]);
      const spt::DiscreteMeasure nu = spt::read_measure(wpp_paths[1]);
      const spt::WppResult result =
          spt::wpp_estimate(mu, nu, wpp_p, wpp_k, wpp_opts);
      std::printf("%.17g\n", result.value);
      if (wpp_print_frame) {
        for (Eigen::Index i = 0; i < result.frame.rows.rows(); ++i) {
          std::string line;
          for (Eigen::Index j = 0; j < result.frame.rows.cols(); ++j) {
            char buf[40];
            std::snprintf(buf, sizeof(buf), "%.17g", result.frame.rows(i, j));
            line += (j ? " " : "") + std::string(buf);
          }
          std::printf("%s\n", line.c_str());
        }
      }
      return 0;
    }
    for (const auto& bp : bundles) {
      BundleCmd& b = *bp;
      if (!b.cmd->parsed()) continue;
      if (b.config.empty()) {
        // Only `hardness` gets here: every list has a usable default.
        spt::ExperimentConfig config;
        config.kind = "hardness_suite";
        spt::apply_overrides(config, b.over.resolve().seed,
                             b.over.resolve().out, b.over.resolve().threads);
        print_report(spt::run(config));
        return 0;
      }
      return run_bundle(b.config, b.kinds, b.cmd->get_name(),
                        b.over.resolve());
    }
    if (describe->parsed()) {
      spt::ExperimentConfig config =
          spt::load_experiment_config(describe_config);
      spt::apply_overrides(config, describe_over.resolve().seed,
                           describe_over.resolve().out,
                           describe_over.resolve().threads);
      std::fputs(spt::describe(config).c_str(), stdout);
      return 0;
    }
  } catch (const spt::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
