#include "spt/samplers.hpp"

#include <Eigen/Dense>
#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spt/laws.hpp"
#include "spt/rng.hpp"

namespace spt {
namespace {

// Symmetric square root via eigendecomposition; tolerates semidefinite
// inputs but rejects anything with a meaningfully negative eigenvalue.
Eigen::MatrixXd symmetric_root(const Eigen::MatrixXd& covariance) {
  const Eigen::Index d = covariance.rows();
  if (covariance.cols() != d) {
    throw std::invalid_argument("gaussian_sampler: covariance must be square");
  }
  if (!covariance.allFinite()) {
    throw std::invalid_argument("gaussian_sampler: covariance must be finite");
  }
  if (d == 0) return Eigen::MatrixXd(0, 0);
  const double asym =
      (covariance - covariance.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if (asym > 1e-10 * scale) {
    throw std::invalid_argument(
        "gaussian_sampler: covariance must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
      0.5 * (covariance + covariance.transpose()));
  Eigen::VectorXd lambda = eig.eigenvalues();
  if (lambda.minCoeff() < -1e-10 * scale) {
    throw std::invalid_argument(
        "gaussian_sampler: covariance must be positive semidefinite");
  }
  lambda = lambda.cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * lambda.asDiagonal() *
         eig.eigenvectors().transpose();
}

// Cumulative weights for categorical draws; last entry forced to 1 so
// rounding can never push a draw past the table.
Eigen::VectorXd cumulative_weights(const Eigen::VectorXd& weights) {
  Eigen::VectorXd cum(weights.size());
  double run = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    run += weights[i];
    cum[i] = run;
  }
  cum[weights.size() - 1] = 1.0;
  return cum;
}

Eigen::Index categorical_draw(const Eigen::VectorXd& cumulative, double u) {
  Eigen::Index lo = 0;
  Eigen::Index hi = cumulative.size() - 1;
  while (lo < hi) {
    const Eigen::Index mid = lo + (hi - lo) / 2;
    if (u < cumulative[mid]) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

}  // namespace

Sampler gaussian_sampler(const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& covariance) {
  if (mean.size() != covariance.rows()) {
    throw std::invalid_argument(
        "gaussian_sampler: mean and covariance dimensions disagree");
  }
  if (!mean.allFinite()) {
    throw std::invalid_argument("gaussian_sampler: mean must be finite");
  }
  Sampler s;
  s.family = Sampler::Family::kGaussian;
  s.dim = static_cast<int>(mean.size());
  s.mean = mean;
  s.covariance = covariance;
  s.covariance_root = symmetric_root(covariance);
  return s;
}

Sampler standard_gaussian_sampler(int dim) {
  if (dim < 0) {
    throw std::invalid_argument(
        "standard_gaussian_sampler: dimension must be >= 0");
  }
  return gaussian_sampler(Eigen::VectorXd::Zero(dim),
                          Eigen::MatrixXd::Identity(dim, dim));
}

Sampler uniform_cube_sampler(int dim, double side) {
  if (dim < 1) {
    throw std::invalid_argument("uniform_cube_sampler: dimension must be >= 1");
  }
  if (!(side > 0.0) || !std::isfinite(side)) {
    throw std::invalid_argument("uniform_cube_sampler: side must be positive");
  }
  Sampler s;
  s.family = Sampler::Family::kUniformCube;
  s.dim = dim;
  s.side = side;
  return s;
}

Sampler two_point_sampler(const Eigen::MatrixXd& locations,
                          const Eigen::Vector2d& probabilities) {
  if (locations.rows() != 2) {
    throw std::invalid_argument("two_point_sampler: need exactly two rows");
  }
  Eigen::VectorXd w = probabilities;
  Sampler s = atomic_sampler(locations, w);
  s.family = Sampler::Family::kTwoPoint;
  return s;
}

Sampler atomic_sampler(const Eigen::MatrixXd& points,
                       const Eigen::VectorXd& weights) {
  if (points.rows() < 1 || points.cols() < 1) {
    throw std::invalid_argument("atomic_sampler: need at least one atom");
  }
  if (points.rows() != weights.size()) {
    throw std::invalid_argument(
        "atomic_sampler: atom and weight counts disagree");
  }
  if (!points.allFinite() || !weights.allFinite()) {
    throw std::invalid_argument("atomic_sampler: entries must be finite");
  }
  if (weights.minCoeff() < 0.0) {
    throw std::invalid_argument("atomic_sampler: weights must be nonnegative");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-12) {
    throw std::invalid_argument("atomic_sampler: weights must sum to 1");
  }
  Sampler s;
  s.family = Sampler::Family::kAtomic;
  s.dim = static_cast<int>(points.cols());
  s.atoms = points;
  s.weights = weights;
  return s;
}

Sampler gauss_hermite_convolved_sampler(int m, double delta) {
  const ConvolvedLaw law = hard_distribution_A(m, delta);
  Sampler s;
  s.family = Sampler::Family::kGaussHermiteConvolved;
  s.dim = 1;
  s.atoms = law.base.atoms;
  s.weights = law.base.weights;
  s.nodes = m;
  s.noise_variance = law.noise_variance;
  return s;
}

Eigen::MatrixXd sample_matrix(const Sampler& sampler, int n,
                              std::uint64_t seed) {
  if (n < 1) {
    throw std::invalid_argument("sample_matrix: need n >= 1");
  }
  const int d = sampler.dim;
  Eigen::MatrixXd points(n, d);
  if (d == 0) return points;
  Rng rng(seed);
  switch (sampler.family) {
    case Sampler::Family::kGaussian: {
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd g(d);
        for (int j = 0; j < d; ++j) g[j] = rng.next_gaussian();
        points.row(i) =
            (sampler.mean + sampler.covariance_root * g).transpose();
      }
      break;
    }
    case Sampler::Family::kUniformCube: {
      const double half = 0.5 * sampler.side;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
          points(i, j) = (2.0 * rng.next_double() - 1.0) * half;
        }
      }
      break;
    }
    case Sampler::Family::kTwoPoint:
    case Sampler::Family::kAtomic: {
      const Eigen::VectorXd cum = cumulative_weights(sampler.weights);
      for (int i = 0; i < n; ++i) {
        points.row(i) = sampler.atoms.row(categorical_draw(cum, rng.next_double()));
      }
      break;
    }
    case Sampler::Family::kGaussHermiteConvolved: {
      const double sd = std::sqrt(sampler.noise_variance);
      const Eigen::VectorXd cum = cumulative_weights(sampler.weights);
      for (int i = 0; i < n; ++i) {
        const double atom = sampler.atoms(categorical_draw(cum, rng.next_double()), 0);
        points(i, 0) = atom + sd * rng.next_gaussian();
      }
      break;
    }
  }
  return points;
}

DiscreteMeasure empirical(const Sampler& sampler, int n, std::uint64_t seed) {
  if (sampler.dim < 1) {
    throw std::invalid_argument("empirical: sampler dimension must be >= 1");
  }
  DiscreteMeasure mu;
  mu.points = sample_matrix(sampler, n, seed);
  mu.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  validate_measure(mu);
  return mu;
}

void validate_spiked_spec(const SpikedPairSpec& spec) {
  const Eigen::Index d = spec.ambient_dim;
  const Eigen::Index k = spec.spike_frame.k();
  if (d < 1) {
    throw std::invalid_argument(
        "spiked pair: ambient dimension must be >= 1");
  }
  if (spec.spike_frame.d() != d) {
    throw std::invalid_argument(
        "spiked pair: frame width must match the ambient dimension");
  }
  if (k < 1 || k > d) {
    throw std::invalid_argument(
        "spiked pair: frame must have between 1 and d rows");
  }
  validate_frame(spec.spike_frame);
  if (spec.law_x1.dim != k || spec.law_x2.dim != k) {
    throw std::invalid_argument(
        "spiked pair: on-spike laws must have dimension k");
  }
  if (spec.law_z.dim != d - k) {
    throw std::invalid_argument(
        "spiked pair: complement law must have dimension d - k");
  }
  if (spec.relaxed_law_z2 && spec.relaxed_law_z2->dim != d - k) {
    throw std::invalid_argument(
        "spiked pair: relaxed complement law must have dimension d - k");
  }
}

Eigen::MatrixXd complement_basis(const StiefelFrame& frame) {
  validate_frame(frame);
  const Eigen::Index d = frame.d();
  const Eigen::Index k = frame.k();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(frame.rows.transpose());
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd basis = q.rightCols(d - k);
  // Guard against a rank-deficient frame slipping past validate_frame.
  if (d > k && (frame.rows * basis).cwiseAbs().maxCoeff() > 1e-10) {
    throw std::invalid_argument(
        "complement_basis: frame rows are not independent");
  }
  return basis;
}

std::pair<DiscreteMeasure, DiscreteMeasure> sample_spiked_pair(
    const SpikedPairSpec& spec, int n, std::uint64_t seed) {
  validate_spiked_spec(spec);
  if (n < 1) {
    throw std::invalid_argument("sample_spiked_pair: need n >= 1");
  }
  const Eigen::Index d = spec.ambient_dim;
  const Eigen::Index k = spec.spike_frame.k();
  const Eigen::MatrixXd basis = complement_basis(spec.spike_frame);

  const Eigen::MatrixXd x1 =
      sample_matrix(spec.law_x1, n, derive_seed(seed, 0));
  const Eigen::MatrixXd z1 = sample_matrix(spec.law_z, n, derive_seed(seed, 1));
  const Eigen::MatrixXd x2 =
      sample_matrix(spec.law_x2, n, derive_seed(seed, 2));
  const Sampler& law_z2 =
      spec.relaxed_law_z2 ? *spec.relaxed_law_z2 : spec.law_z;
  const Eigen::MatrixXd z2 = sample_matrix(law_z2, n, derive_seed(seed, 3));

  DiscreteMeasure mu;
  mu.points = x1 * spec.spike_frame.rows;
  if (d > k) mu.points += z1 * basis.transpose();
  mu.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  validate_measure(mu);

  DiscreteMeasure nu;
  nu.points = x2 * spec.spike_frame.rows;
  if (d > k) nu.points += z2 * basis.transpose();
  nu.weights = mu.weights;
  validate_measure(nu);
  return {std::move(mu), std::move(nu)};
}

SpikedPairSpec spiked_gaussian_spec(int d, const Eigen::VectorXd& u,
                                    double beta) {
  if (d < 1) {
    throw std::invalid_argument(
        "spiked_gaussian_spec: dimension must be >= 1");
  }
  if (u.size() != d) {
    throw std::invalid_argument(
        "spiked_gaussian_spec: direction length must match the dimension");
  }
  if (std::abs(u.norm() - 1.0) > 1e-10) {
    throw std::invalid_argument(
        "spiked_gaussian_spec: direction must be a unit vector");
  }
  if (!(beta >= 0.0) || !std::isfinite(beta)) {
    throw std::invalid_argument(
        "spiked_gaussian_spec: beta must be finite and >= 0");
  }
  SpikedPairSpec spec;
  spec.ambient_dim = d;
  spec.spike_frame.rows = u.transpose();
  spec.law_x1 = standard_gaussian_sampler(1);
  spec.law_x2 = gaussian_sampler(Eigen::VectorXd::Zero(1),
                                 Eigen::MatrixXd::Constant(1, 1, 1.0 + beta));
  spec.law_z = standard_gaussian_sampler(d - 1);
  validate_spiked_spec(spec);
  return spec;
}

SpikedPairSpec hard_instance_spec(int d, const Eigen::VectorXd& v, int m,
                                  double delta) {
  if (d < 1) {
    throw std::invalid_argument("hard_instance_spec: dimension must be >= 1");
  }
  if (v.size() != d) {
    throw std::invalid_argument(
        "hard_instance_spec: direction length must match the dimension");
  }
  if (std::abs(v.norm() - 1.0) > 1e-10) {
    throw std::invalid_argument(
        "hard_instance_spec: direction must be a unit vector");
  }
  SpikedPairSpec spec;
  spec.ambient_dim = d;
  spec.spike_frame.rows = v.transpose();
  spec.law_x1 = gauss_hermite_convolved_sampler(m, delta);
  spec.law_x2 = standard_gaussian_sampler(1);
  spec.law_z = standard_gaussian_sampler(d - 1);
  validate_spiked_spec(spec);
  return spec;
}

}  // namespace spt
