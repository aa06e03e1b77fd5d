#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spt/discrete_measure.hpp"
#include "spt/stiefel.hpp"
#include "spt/transport.hpp"

namespace spt {

// Controls for the projection-pursuit maximization. Restarts draw
// independent initial frames from sub-streams of `seed`, so runs are
// reproducible and restarts could execute in parallel; the merge is a
// deterministic max with first-found tie-break by restart index.
struct WppOptions {
  int restarts = 16;
  int max_iters = 200;
  double step_init = 0.5;
  double step_decay = 0.5;  // backtracking factor
  double tol = 1e-6;        // relative objective improvement threshold
  // Exhaustive net search radius; honored only for k = 1, d <= 3 and when
  // the net stays under its size cap. The net's best value is appended to
  // per_restart_values as one extra entry when the search runs.
  std::optional<double> net_fallback;
  std::uint64_t seed = 0;
};

void validate_wpp_options(const WppOptions& opts);

struct WppResult {
  double value = 0.0;  // max of per_restart_values, = objective at frame
  StiefelFrame frame;
  std::vector<double> per_restart_values;
  std::vector<bool> converged_flags;
};

// Pushforward through x -> U x: points mapped, weights unchanged.
DiscreteMeasure project_measure(const DiscreteMeasure& mu,
                                const StiefelFrame& frame);

// Exact W_p of the two projected measures (1-D fast path when k = 1).
// Never exceeds the unprojected distance: projection is a contraction.
TransportResult projected_wasserstein(const DiscreteMeasure& mu,
                                      const DiscreteMeasure& nu,
                                      const StiefelFrame& frame, double p);

struct WppGradient {
  Eigen::MatrixXd grad;     // k x d
  bool degenerate = false;  // objective zero: the 1/p power has no gradient
};

// Gradient of (sum_ij pi_ij ||U(x_i - y_j)||^p)^{1/p} in U with the optimal
// coupling pi held fixed; a supergradient of the max-over-couplings
// objective at differentiable points. Atom pairs whose projections
// coincide contribute zero, which is the p = 1 subgradient convention.
WppGradient wpp_supergradient(const DiscreteMeasure& mu,
                              const DiscreteMeasure& nu,
                              const StiefelFrame& frame, double p);

// Multi-restart projected supergradient ascent with backtracking line
// search and QR retraction; per-restart objectives are non-decreasing.
// k = d short-circuits to the identity frame: square frames are
// isometries, so every frame attains the exact distance. Non-convergence
// within max_iters is reported through converged_flags, never an error.
WppResult wpp_estimate(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                       double p, int k, const WppOptions& opts = {});

// Maximizing frame of wpp_estimate; its span estimates the subspace the
// two distributions actually differ on.
StiefelFrame recover_spike(const DiscreteMeasure& mu,
                           const DiscreteMeasure& nu, double p, int k,
                           const WppOptions& opts = {});

std::string wpp_result_to_json_text(const WppResult& result);
WppResult wpp_result_from_json_text(const std::string& text);

}  // namespace spt
