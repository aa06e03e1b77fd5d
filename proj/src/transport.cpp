#include "spt/transport.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "spt/numeric.hpp"
#include "transport_solvers.hpp"

namespace spt {

Eigen::VectorXd Coupling::row_sums() const {
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(rows);
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(rows);
  for (const auto& e : entries) {
    const double y = e.mass - carry[e.i];
    const double t = sums[e.i] + y;
    carry[e.i] = (t - sums[e.i]) - y;
    sums[e.i] = t;
  }
  return sums;
}

Eigen::VectorXd Coupling::col_sums() const {
  Eigen::VectorXd carry = Eigen::VectorXd::Zero(cols);
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(cols);
  for (const auto& e : entries) {
    const double y = e.mass - carry[e.j];
    const double t = sums[e.j] + y;
    carry[e.j] = (t - sums[e.j]) - y;
    sums[e.j] = t;
  }
  return sums;
}

Eigen::MatrixXd Coupling::dense() const {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, cols);
  for (const auto& e : entries) m(e.i, e.j) += e.mass;
  return m;
}

void validate_coupling(const Coupling& c, double tol) {
  if (c.rows < 1 || c.cols < 1) throw std::invalid_argument("coupling: empty shape");
  if (c.row_marginal.size() != c.rows || c.col_marginal.size() != c.cols)
    throw std::invalid_argument("coupling: marginal size mismatch");
  for (const auto& e : c.entries) {
    if (e.i < 0 || e.i >= c.rows || e.j < 0 || e.j >= c.cols)
      throw std::invalid_argument("coupling: entry out of range");
    if (!(e.mass >= 0.0)) throw std::invalid_argument("coupling: negative mass");
  }
  const Eigen::VectorXd rs = c.row_sums();
  const Eigen::VectorXd cs = c.col_sums();
  const double row_dev = (rs - c.row_marginal).cwiseAbs().maxCoeff();
  const double col_dev = (cs - c.col_marginal).cwiseAbs().maxCoeff();
  if (row_dev > tol || col_dev > tol)
    throw std::invalid_argument("coupling: marginal deviation " +
                                std::to_string(std::max(row_dev, col_dev)) + " exceeds tolerance");
}

double transport_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const Coupling& c,
                      double p) {
  KahanAccumulator acc;
  for (const auto& e : c.entries) {
    const double dist = (mu.points.row(e.i) - nu.points.row(e.j)).norm();
    acc.add(e.mass * pow_dist(dist, p));
  }
  return root_p(acc.value(), p);
}

namespace {

void check_discrete_inputs(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  validate_measure(mu);
  validate_measure(nu);
  if (mu.dim() != nu.dim())
    throw std::invalid_argument("wasserstein_discrete: dimension mismatch");
  if (!(p >= 1.0) || !std::isfinite(p))
    throw std::invalid_argument("wasserstein_discrete: p must be a finite value >= 1");
}

bool uniform_weights(const Eigen::VectorXd& w) {
  for (Eigen::Index i = 1; i < w.size(); ++i)
    if (w[i] != w[0]) return false;
  return true;
}

// Atoms with zero weight never carry mass; strip them so the simplex solver
// sees strictly positive supplies.
DiscreteMeasure strip_zeros(const DiscreteMeasure& mu, std::vector<int>& map) {
  map.clear();
  for (Eigen::Index i = 0; i < mu.n(); ++i)
    if (mu.weights[i] > 0.0) map.push_back(static_cast<int>(i));
  if (static_cast<Eigen::Index>(map.size()) == mu.n()) return mu;
  if (map.empty()) throw std::invalid_argument("wasserstein_discrete: measure with no mass");
  DiscreteMeasure out;
  out.points.resize(static_cast<Eigen::Index>(map.size()), mu.dim());
  out.weights.resize(static_cast<Eigen::Index>(map.size()));
  for (size_t t = 0; t < map.size(); ++t) {
    out.points.row(static_cast<Eigen::Index>(t)) = mu.points.row(map[t]);
    out.weights[static_cast<Eigen::Index>(t)] = mu.weights[map[t]];
  }
  return out;
}

}  // namespace

TransportResult wasserstein_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     double p) {
  check_discrete_inputs(mu, nu, p);
  std::vector<int> map_a, map_b;
  const DiscreteMeasure a = strip_zeros(mu, map_a);
  const DiscreteMeasure b = strip_zeros(nu, map_b);

  TransportResult r;
  if (a.n() == b.n() && uniform_weights(a.weights) && uniform_weights(b.weights) &&
      a.weights[0] == b.weights[0]) {
    r = detail::solve_assignment(a, b, p);
  } else {
    r = detail::solve_network_simplex(a, b, p);
  }

  // Map entries back to original atom indices if zero-weight atoms were cut.
  const bool remap = static_cast<Eigen::Index>(map_a.size()) != mu.n() ||
                     static_cast<Eigen::Index>(map_b.size()) != nu.n();
  if (remap) {
    for (auto& e : r.coupling.entries) {
      e.i = map_a[static_cast<size_t>(e.i)];
      e.j = map_b[static_cast<size_t>(e.j)];
    }
    r.coupling.rows = static_cast<int>(mu.n());
    r.coupling.cols = static_cast<int>(nu.n());
    r.coupling.row_marginal = mu.weights;
    r.coupling.col_marginal = nu.weights;
  }
  return r;
}

double wasserstein_discrete_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  return wasserstein_discrete(mu, nu, p).cost;
}

}  // namespace spt
