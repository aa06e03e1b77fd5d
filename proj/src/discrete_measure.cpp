#include "spt/discrete_measure.hpp"

#include <cmath>
#include <stdexcept>

#include "spt/numeric.hpp"

namespace spt {

void validate_measure(const DiscreteMeasure& mu, double tol) {
  if (mu.points.rows() < 1) throw std::invalid_argument("measure: empty support");
  if (mu.points.cols() < 1) throw std::invalid_argument("measure: dimension must be >= 1");
  if (mu.weights.size() != mu.points.rows())
    throw std::invalid_argument("measure: weight count does not match atom count");
  if (!mu.points.allFinite()) throw std::invalid_argument("measure: non-finite coordinate");
  for (Eigen::Index i = 0; i < mu.weights.size(); ++i) {
    const double w = mu.weights[i];
    if (!std::isfinite(w)) throw std::invalid_argument("measure: non-finite weight");
    if (w < 0.0) throw std::invalid_argument("measure: negative weight");
  }
  const double total = kahan_sum(mu.weights);
  if (std::abs(total - 1.0) > tol)
    throw std::invalid_argument("measure: weights sum to " + std::to_string(total) +
                                ", expected 1 within tolerance");
}

DiscreteMeasure make_measure(Eigen::MatrixXd points, Eigen::VectorXd weights) {
  DiscreteMeasure mu{std::move(points), std::move(weights)};
  validate_measure(mu);
  return mu;
}

DiscreteMeasure uniform_measure(Eigen::MatrixXd points) {
  const Eigen::Index n = points.rows();
  return make_measure(std::move(points), Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

DiscreteMeasure dirac_measure(const Eigen::VectorXd& point) {
  Eigen::MatrixXd pts(1, point.size());
  pts.row(0) = point.transpose();
  return make_measure(std::move(pts), Eigen::VectorXd::Ones(1));
}

}  // namespace spt
