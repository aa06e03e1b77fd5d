#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "spt/samplers.hpp"

namespace spt {

// One Monte Carlo statistic (e.g. a transport distance) replicated over
// independent seeds at a fixed sample size.
struct ReplicateSample {
  std::vector<double> values;
  int n = 0;
  std::string meta;  // generator description and seed range
};

// Throws unless there are at least two finite values.
void validate_replicate_sample(const ReplicateSample& sample);

// Smallest sigma^2 making the empirical moment generating function of the
// centered values satisfy E exp(l X) <= exp(l^2 sigma^2 / 2) across the
// fixed grid l in {+-2^j / sd : j = -2..4}. The grid is sd-relative, so
// rescaling the values by t rescales the estimate by t^2 exactly. A finite
// grid can only check finitely many l, and the empirical MGF understates
// heavy tails, so this is an upper-biased proxy near the grid and a lower
// bound beyond it. Constant values give 0. Requires >= 100 replicates.
double estimate_subgaussian_constant(const ReplicateSample& sample);

struct ScalingPoint {
  int n = 0;
  double sigma_sq_hat = 0.0;
  bool exact_reference = false;  // finite law used exactly, no proxy error
};

// For each n: replicate W_p(empirical(n), reference) and estimate its
// subgaussian constant. Finitely supported generators use their exact law
// as the reference; others use one fixed independent 20n-point proxy per
// n, whose own error is shared by every replicate at that n. Determined
// entirely by (generator, p, n_list, replicates, seed).
std::vector<ScalingPoint> subgaussian_scaling_check(
    const Sampler& generator, double p, const std::vector<int>& n_list,
    int replicates, std::uint64_t seed);

struct RateFit {
  std::vector<double> log_n;
  std::vector<double> log_err;
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

// Ordinary least squares of log error on log n. Requires >= 3 pairs with
// distinct positive n and positive errors; exact on noiseless power laws.
RateFit rate_fit(const std::vector<std::pair<double, double>>& pairs);

struct LipschitzWitnessReport {
  double max_constant = 0.0;
  double sigma_target = 0.0;
  double slack = 2.0;
  bool pass = false;
  std::vector<double> witness_constants;
};

// Estimates the subgaussian constant of f(X) for random 1-Lipschitz
// witnesses f (unit-direction linear maps alternating with distances to
// random anchor points) over a shared batch of draws; passes when the
// worst witness stays within slack * sigma_target.
LipschitzWitnessReport lipschitz_witness_check(const Sampler& sampler,
                                               double sigma_target,
                                               int trials,
                                               std::uint64_t seed);

// CSV emission: "n,replicate,value" and "n,mean_err,log_n,log_err" rows.
std::string replicate_sample_csv(const ReplicateSample& sample);
std::string rate_fit_csv(const RateFit& fit);
std::string rate_fit_json_text(const RateFit& fit);

}  // namespace spt
