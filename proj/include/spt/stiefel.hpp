#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spt {

// k x d matrix with orthonormal rows: an orthonormal basis of a
// k-dimensional subspace of R^d, stored row-major.
struct StiefelFrame {
  Eigen::MatrixXd rows;

  Eigen::Index k() const { return rows.rows(); }
  Eigen::Index d() const { return rows.cols(); }
};

inline constexpr double kFrameOrthoTol = 1e-10;

// Throws unless 1 <= k <= d and rows * rows^T = I within Frobenius tol.
void validate_frame(const StiefelFrame& frame, double tol = kFrameOrthoTol);

// Haar-uniform frame: QR of a Gaussian d x k matrix with the R diagonal
// sign-fixed so the distribution is exactly invariant and runs reproduce.
StiefelFrame random_frame(int d, int k, std::uint64_t seed);

// QR retraction of rows + step * tangent back onto the manifold. The R
// diagonal is sign-fixed, so step = 0 returns the frame unchanged.
// Throws if the perturbed frame loses rank.
StiefelFrame retract(const StiefelFrame& frame, const Eigen::MatrixXd& tangent, double step);

// Riemannian projection of an ambient gradient onto the tangent space at
// frame U: G - sym(U G^T) U with sym(M) = (M + M^T)/2. The result xi
// satisfies xi U^T + U xi^T = 0 and the projection is idempotent.
Eigen::MatrixXd project_tangent(const StiefelFrame& frame, const Eigen::MatrixXd& ambient_grad);

// Finite net on the manifold: every frame lies within operator-norm eps of
// some element. Rows are drawn from a sphere net (antipodal pair for d=1,
// angular grid for d=2, projected cube-surface lattice for d >= 3), k-fold
// products are re-orthonormalized through their polar factor, and near
// duplicates are dropped. Throws if the size would exceed max_size.
std::vector<StiefelFrame> epsilon_net(int d, int k, double eps,
                                      std::size_t max_size = 1000000);

// Largest principal angle surrogate used for subspace recovery: the minimal
// angle arccos(sigma_max(U1 U2^T)), clamped into [0, pi/2].
double minimal_angle(const StiefelFrame& u1, const StiefelFrame& u2);

// 1 - sigma_max(U1 U2^T)^2 = sin^2 of the minimal angle.
double sin_squared_angle(const StiefelFrame& u1, const StiefelFrame& u2);

// Row-major JSON array serialization.
std::string frame_to_json_text(const StiefelFrame& frame);
StiefelFrame frame_from_json_text(const std::string& text);

}  // namespace spt
