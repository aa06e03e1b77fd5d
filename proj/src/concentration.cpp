#include "spt/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "spt/numeric.hpp"
#include "spt/rng.hpp"
#include "spt/transport.hpp"

namespace spt {
namespace {

std::string formatted(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

double distance_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                     double p) {
  if (mu.points.cols() == 1) return wasserstein_1d_cost(mu, nu, p);
  return wasserstein_discrete_cost(mu, nu, p);
}

// Exact finite law behind a sampler, when it has one.
bool finite_law(const Sampler& s, DiscreteMeasure* out) {
  if (s.family != Sampler::Family::kAtomic &&
      s.family != Sampler::Family::kTwoPoint) {
    return false;
  }
  out->points = s.atoms;
  out->weights = s.weights;
  return true;
}

const char* family_name(Sampler::Family f) {
  switch (f) {
    case Sampler::Family::kGaussian:
      return "gaussian";
    case Sampler::Family::kUniformCube:
      return "uniform_cube";
    case Sampler::Family::kTwoPoint:
      return "two_point";
    case Sampler::Family::kAtomic:
      return "atomic";
    case Sampler::Family::kGaussHermiteConvolved:
      return "gauss_hermite_convolved";
  }
  return "unknown";
}

}  // namespace

void validate_replicate_sample(const ReplicateSample& sample) {
  if (sample.values.size() < 2) {
    throw std::invalid_argument("replicate sample: need at least 2 values");
  }
  for (const double v : sample.values) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("replicate sample: values must be finite");
    }
  }
}

double estimate_subgaussian_constant(const ReplicateSample& sample) {
  validate_replicate_sample(sample);
  if (sample.values.size() < 100) {
    throw std::invalid_argument(
        "subgaussian constant: need at least 100 replicates");
  }
  const std::size_t count = sample.values.size();
  KahanAccumulator total;
  for (const double v : sample.values) total.add(v);
  const double mean = total.value() / static_cast<double>(count);

  KahanAccumulator sq;
  for (const double v : sample.values) sq.add((v - mean) * (v - mean));
  const double var = sq.value() / static_cast<double>(count - 1);
  if (!(var > 0.0)) return 0.0;
  const double sd = std::sqrt(var);

  double sigma_sq = 0.0;
  for (int j = -2; j <= 4; ++j) {
    for (const double sign : {1.0, -1.0}) {
      const double lambda = sign * std::ldexp(1.0, j) / sd;
      KahanAccumulator mgf;
      for (const double v : sample.values) {
        mgf.add(std::exp(lambda * (v - mean)));
      }
      const double log_mgf =
          std::log(mgf.value() / static_cast<double>(count));
      sigma_sq = std::max(sigma_sq, 2.0 * log_mgf / (lambda * lambda));
    }
  }
  return sigma_sq;
}

std::vector<ScalingPoint> subgaussian_scaling_check(
    const Sampler& generator, double p, const std::vector<int>& n_list,
    int replicates, std::uint64_t seed) {
  if (n_list.empty()) {
    throw std::invalid_argument("scaling check: n_list must be nonempty");
  }
  for (std::size_t i = 0; i + 1 < n_list.size(); ++i) {
    if (n_list[i] >= n_list[i + 1]) {
      throw std::invalid_argument(
          "scaling check: n_list must be strictly increasing");
    }
  }
  if (n_list.front() < 1) {
    throw std::invalid_argument("scaling check: sample sizes must be >= 1");
  }
  if (replicates < 200) {
    throw std::invalid_argument(
        "scaling check: need at least 200 replicates per n");
  }

  std::vector<ScalingPoint> out;
  out.reserve(n_list.size());
  DiscreteMeasure exact_ref;
  const bool have_exact = finite_law(generator, &exact_ref);
  for (std::size_t idx = 0; idx < n_list.size(); ++idx) {
    const int n = n_list[idx];
    const std::uint64_t n_seed = derive_seed(seed, idx);
    const DiscreteMeasure ref =
        have_exact ? exact_ref
                   : empirical(generator, 20 * n, derive_seed(n_seed, 0));
    ReplicateSample sample;
    sample.n = n;
    sample.meta = std::string("family=") + family_name(generator.family) +
                  " n=" + std::to_string(n) + " replicates=" +
                  std::to_string(replicates) + " seed=" + std::to_string(seed);
    sample.values.reserve(replicates);
    for (int r = 0; r < replicates; ++r) {
      const DiscreteMeasure mu_n =
          empirical(generator, n, derive_seed(n_seed, 1 + r));
      sample.values.push_back(distance_cost(mu_n, ref, p));
    }
    out.push_back(
        {n, estimate_subgaussian_constant(sample), have_exact});
  }
  return out;
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 3) {
    throw std::invalid_argument("rate_fit: need at least 3 points");
  }
  std::set<double> seen;
  RateFit fit;
  for (const auto& [n, err] : pairs) {
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw std::invalid_argument("rate_fit: sample sizes must be positive");
    }
    if (!(err > 0.0) || !std::isfinite(err)) {
      throw std::invalid_argument("rate_fit: errors must be positive");
    }
    if (!seen.insert(n).second) {
      throw std::invalid_argument("rate_fit: duplicate sample size");
    }
    fit.log_n.push_back(std::log(n));
    fit.log_err.push_back(std::log(err));
  }

  const double m = static_cast<double>(pairs.size());
  KahanAccumulator sx, sy;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    sx.add(fit.log_n[i]);
    sy.add(fit.log_err[i]);
  }
  const double xbar = sx.value() / m;
  const double ybar = sy.value() / m;
  KahanAccumulator sxx, sxy;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    sxx.add((fit.log_n[i] - xbar) * (fit.log_n[i] - xbar));
    sxy.add((fit.log_n[i] - xbar) * (fit.log_err[i] - ybar));
  }
  fit.slope = sxy.value() / sxx.value();
  fit.intercept = ybar - fit.slope * xbar;

  KahanAccumulator ssr;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double r = fit.log_err[i] - fit.intercept - fit.slope * fit.log_n[i];
    ssr.add(r * r);
  }
  fit.slope_stderr =
      std::sqrt(std::max(0.0, ssr.value() / (m - 2.0)) / sxx.value());
  return fit;
}

LipschitzWitnessReport lipschitz_witness_check(const Sampler& sampler,
                                               double sigma_target,
                                               int trials,
                                               std::uint64_t seed) {
  if (trials < 1) {
    throw std::invalid_argument("witness check: need at least one trial");
  }
  if (!(sigma_target > 0.0)) {
    throw std::invalid_argument("witness check: sigma_target must be positive");
  }
  const int d = sampler.dim;
  const int batch = 4000;
  const Eigen::MatrixXd draws =
      sample_matrix(sampler, batch, derive_seed(seed, 0));

  LipschitzWitnessReport report;
  report.sigma_target = sigma_target;
  Rng rng(derive_seed(seed, 1));
  for (int t = 0; t < trials; ++t) {
    ReplicateSample sample;
    sample.n = batch;
    sample.values.resize(batch);
    if (t % 2 == 0) {
      Eigen::VectorXd dir(d);
      for (int j = 0; j < d; ++j) dir[j] = rng.next_gaussian();
      dir /= dir.norm();
      sample.meta = "witness=linear";
      Eigen::Map<Eigen::VectorXd>(sample.values.data(), batch) = draws * dir;
    } else {
      // Anchor drawn from the law itself keeps the witness on-scale.
      const Eigen::RowVectorXd anchor =
          sample_matrix(sampler, 1, derive_seed(seed, 2 + t)).row(0);
      sample.meta = "witness=distance";
      for (int i = 0; i < batch; ++i) {
        sample.values[i] = (draws.row(i) - anchor).norm();
      }
    }
    report.witness_constants.push_back(estimate_subgaussian_constant(sample));
  }
  report.max_constant = *std::max_element(report.witness_constants.begin(),
                                          report.witness_constants.end());
  report.pass = report.max_constant <= report.slack * sigma_target;
  return report;
}

std::string replicate_sample_csv(const ReplicateSample& sample) {
  std::string csv = "n,replicate,value\n";
  for (std::size_t i = 0; i < sample.values.size(); ++i) {
    csv += std::to_string(sample.n) + ',' + std::to_string(i) + ',' +
           formatted(sample.values[i]) + '\n';
  }
  return csv;
}

std::string rate_fit_csv(const RateFit& fit) {
  std::string csv = "n,mean_err,log_n,log_err\n";
  for (std::size_t i = 0; i < fit.log_n.size(); ++i) {
    csv += formatted(std::exp(fit.log_n[i])) + ',' +
           formatted(std::exp(fit.log_err[i])) + ',' +
           formatted(fit.log_n[i]) + ',' + formatted(fit.log_err[i]) + '\n';
  }
  return csv;
}

std::string rate_fit_json_text(const RateFit& fit) {
  nlohmann::ordered_json j;
  j["slope"] = fit.slope;
  j["intercept"] = fit.intercept;
  j["slope_stderr"] = fit.slope_stderr;
  j["points"] = fit.log_n.size();
  return j.dump();
}

}  // namespace spt
