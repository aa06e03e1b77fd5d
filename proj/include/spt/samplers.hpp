#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <utility>

#include "spt/discrete_measure.hpp"
#include "spt/stiefel.hpp"

namespace spt {

// Descriptor of a samplable law on R^dim. Build through the factory
// functions, which validate parameters; sampling is a pure function of
// (descriptor, n, seed). Gaussian draws use Box-Muller, so outputs are
// bit-reproducible across runs of the same build.
struct Sampler {
  enum class Family {
    kGaussian,
    kUniformCube,
    kTwoPoint,
    kAtomic,
    kGaussHermiteConvolved,
  };

  Family family = Family::kGaussian;
  int dim = 0;

  // kGaussian: mean and a symmetric factor with root * root^T = covariance.
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  Eigen::MatrixXd covariance_root;

  // kUniformCube: coordinates uniform on [-side/2, side/2].
  double side = 0.0;

  // kTwoPoint / kAtomic: finitely supported laws, one atom per row.
  Eigen::MatrixXd atoms;
  Eigen::VectorXd weights;

  // kGaussHermiteConvolved: the 1-D moment-matching mixture A(nodes, delta).
  int nodes = 0;
  double noise_variance = 0.0;
};

// N(mean, covariance); covariance must be symmetric positive semidefinite.
// A zero-dimensional mean is allowed so spike complements can degenerate.
Sampler gaussian_sampler(const Eigen::VectorXd& mean,
                         const Eigen::MatrixXd& covariance);
Sampler standard_gaussian_sampler(int dim);
Sampler uniform_cube_sampler(int dim, double side);
// Two atoms with probabilities summing to 1; `locations` is 2 x dim.
Sampler two_point_sampler(const Eigen::MatrixXd& locations,
                          const Eigen::Vector2d& probabilities);
Sampler atomic_sampler(const Eigen::MatrixXd& points,
                       const Eigen::VectorXd& weights);
// 1-D law matching N(0,1) through order 2m-1 (see laws module).
Sampler gauss_hermite_convolved_sampler(int m, double delta);

// n i.i.d. draws as an n x dim matrix; dim may be 0.
Eigen::MatrixXd sample_matrix(const Sampler& sampler, int n,
                              std::uint64_t seed);
// Same draws wrapped as a uniform-weight measure; requires dim >= 1.
DiscreteMeasure empirical(const Sampler& sampler, int n, std::uint64_t seed);

// Pair of laws sharing a low-dimensional frame: each draw is
// frame^T (on-spike draw) + complement_basis (complement draw). Without
// relaxed_law_z2 both marginals use the one stored complement law, which
// is the strict shared-complement model; with it the second marginal
// draws its complement from relaxed_law_z2 instead.
struct SpikedPairSpec {
  int ambient_dim = 0;
  StiefelFrame spike_frame;  // k x d
  Sampler law_x1;            // k-dimensional
  Sampler law_x2;            // k-dimensional
  Sampler law_z;             // (d-k)-dimensional
  std::optional<Sampler> relaxed_law_z2;
};

void validate_spiked_spec(const SpikedPairSpec& spec);

// Orthonormal basis of the frame's orthogonal complement: the last d-k
// columns of the QR completion of frame^T, as a d x (d-k) matrix.
// Deterministic for a given frame.
Eigen::MatrixXd complement_basis(const StiefelFrame& frame);

// Independent empirical measures of size n from the two marginals. The
// four component draws (x1, z1, x2, z2) use sub-streams 0..3 of `seed`.
std::pair<DiscreteMeasure, DiscreteMeasure> sample_spiked_pair(
    const SpikedPairSpec& spec, int n, std::uint64_t seed);

// N(0, I_d) versus N(0, I_d + beta u u^T) written in spiked form: k = 1,
// on-spike laws N(0,1) and N(0, 1+beta), shared standard normal
// complement. Requires ||u|| = 1 within 1e-10 and beta >= 0.
SpikedPairSpec spiked_gaussian_spec(int d, const Eigen::VectorXd& u,
                                    double beta);

// law(X v + Z) versus N(0, I_d) with X the 1-D moment-matching mixture
// A(m, delta) and Z standard normal on the complement of v; k = 1. The
// second marginal is N(0, I_d) exactly because its on-spike law is N(0,1)
// and the complement is shared.
SpikedPairSpec hard_instance_spec(int d, const Eigen::VectorXd& v, int m,
                                  double delta);

}  // namespace spt
