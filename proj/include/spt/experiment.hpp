#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "spt/wpp.hpp"

namespace spt {

// Config problems carry "path:line: message" so the offending key can be
// found in the file that was actually loaded.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, int line, const std::string& message)
      : std::runtime_error(path + ":" + std::to_string(line) + ": " + message),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// Fully resolved experiment description. Built by the config parser (or
// assembled directly in code); `echo_text` is written verbatim into the
// run directory so a run bundle reproduces itself.
struct ExperimentConfig {
  std::string kind;  // rates_plugin | rates_wpp | spike_recovery |
                     // concentration | hardness_suite | solve
  std::string config_path;
  std::string echo_text;

  // [generator]
  std::string family;
  int d = 1;
  double side = 2.0;        // uniform_cube edge length
  double beta = 1.0;        // spiked_gaussian on-spike variance excess
  int nodes = 4;            // mixture size m
  double noise_delta = -1.0;  // < 0 means the mixture default min(1/m, 1/2)
  Eigen::MatrixXd atoms;    // atomic / two_point support rows
  Eigen::VectorXd atom_weights;
  Eigen::VectorXd direction;  // optional spike direction, unit by the time
                              // the config validates

  // [run]
  double p = 2.0;
  int k = 1;
  std::vector<int> n_list;
  int replicates = 0;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir;

  // [wpp]
  WppOptions wpp;

  // [solve]
  std::string solve_a;
  std::string solve_b;

  // [hardness]
  std::vector<int> moment_orders = {1, 2, 3};
  std::vector<double> eps_list = {1.0 / 6.0, 1.0 / 12.0};
  std::vector<int> nodes_list = {2, 4, 8};
};

ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig parse_experiment_config_text(const std::string& text,
                                              const std::string& path_label);

// Record command-line overrides in the config and its echoed text.
void apply_overrides(ExperimentConfig& config,
                     const std::optional<std::uint64_t>& seed,
                     const std::optional<std::string>& out_dir,
                     const std::optional<int>& threads);

struct ExperimentReport {
  std::string kind;
  std::string out_dir;
  std::string rows_csv;      // header + body, body byte-stable per config
  std::string summary_json;
  double wall_seconds = 0.0;
  int total_rows = 0;
  int flagged_rows = 0;  // replicates that failed; never silently dropped
};

// Executes the experiment and writes config.ini, rows.csv, summary.json
// into out_dir (each file written to a temporary name and renamed, so a
// crash never leaves a truncated file). A `lock` file guards the
// directory: a second concurrent run fails instead of interleaving.
ExperimentReport run(const ExperimentConfig& config);

// Human-readable plan with resolved sizes; performs no file writes.
std::string describe(const ExperimentConfig& config);

}  // namespace spt
