#include "spt/partition.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "spt/numeric.hpp"
#include "spt/rng.hpp"

namespace spt {

std::vector<int> greedy_packing(const Eigen::MatrixXd& candidates, double separation) {
  if (candidates.rows() == 0) throw std::invalid_argument("greedy_packing: no candidates");
  if (!(separation > 0.0)) throw std::invalid_argument("greedy_packing: separation must be > 0");
  std::vector<int> chosen;
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    bool fits = true;
    for (int s : chosen) {
      if ((candidates.row(i) - candidates.row(s)).norm() < separation) {
        fits = false;
        break;
      }
    }
    if (fits) chosen.push_back(static_cast<int>(i));
  }
  return chosen;
}

PartitionTree::PartitionTree(const Eigen::MatrixXd& points, int depth) {
  if (points.rows() == 0 || points.cols() == 0)
    throw std::invalid_argument("PartitionTree: empty point set");
  if (!points.allFinite()) throw std::invalid_argument("PartitionTree: nonfinite point");
  if (depth < 0 || depth > 19)
    throw std::invalid_argument("PartitionTree: depth must lie in [0, 19]");
  origin_ = points.colwise().minCoeff();
  side_ = (points.colwise().maxCoeff() - origin_).maxCoeff();
  depth_ = depth;
}

double PartitionTree::diameter() const {
  return side_ * std::sqrt(static_cast<double>(dim()));
}

bool PartitionTree::covers(const Eigen::MatrixXd& points) const {
  if (points.cols() != origin_.size()) return false;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    for (Eigen::Index j = 0; j < points.cols(); ++j) {
      const double t = points(i, j) - origin_[j];
      if (!(t >= 0.0 && t <= side_)) return false;
    }
  return true;
}

Eigen::MatrixXi PartitionTree::cell_index(const Eigen::MatrixXd& points, int level) const {
  if (level < 0 || level > depth_)
    throw std::invalid_argument("PartitionTree: level out of range");
  if (!covers(points)) throw std::invalid_argument("PartitionTree: point outside the root cube");
  const Eigen::Index n = points.rows(), d = points.cols();
  Eigen::MatrixXi cells = Eigen::MatrixXi::Zero(n, d);
  if (level == 0 || side_ == 0.0) return cells;
  const std::int32_t grid = static_cast<std::int32_t>(std::lround(std::pow(3.0, level)));
  const double mesh = side_ / grid;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) {
      auto c = static_cast<std::int32_t>(std::floor((points(i, j) - origin_[j]) / mesh));
      cells(i, j) = std::clamp(c, 0, grid - 1);
    }
  return cells;
}

namespace {

// sum_cells |mu(Q) - nu(Q)| at one level: pool the atoms with signed masses,
// group them by cell coordinates, and add up absolute group totals.
double level_discrepancy(const Eigen::MatrixXi& cells_mu, const Eigen::VectorXd& w_mu,
                         const Eigen::MatrixXi& cells_nu, const Eigen::VectorXd& w_nu) {
  const Eigen::Index n = cells_mu.rows(), m = cells_nu.rows(), d = cells_mu.cols();
  std::vector<int> order(static_cast<size_t>(n + m));
  std::iota(order.begin(), order.end(), 0);
  auto row = [&](int a, Eigen::Index j) {
    return a < n ? cells_mu(a, j) : cells_nu(a - n, j);
  };
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (Eigen::Index j = 0; j < d; ++j) {
      if (row(a, j) != row(b, j)) return row(a, j) < row(b, j);
    }
    return false;
  });
  auto same_cell = [&](int a, int b) {
    for (Eigen::Index j = 0; j < d; ++j)
      if (row(a, j) != row(b, j)) return false;
    return true;
  };
  KahanAccumulator total;
  size_t g = 0;
  while (g < order.size()) {
    KahanAccumulator cell;
    size_t h = g;
    while (h < order.size() && same_cell(order[g], order[h])) {
      const int a = order[h];
      cell.add(a < n ? w_mu[a] : -w_nu[a - n]);
      ++h;
    }
    total.add(std::abs(cell.value()));
    g = h;
  }
  return total.value();
}

}  // namespace

double dyadic_upper_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                          const PartitionTree& tree) {
  validate_measure(mu);
  validate_measure(nu);
  if (mu.dim() != nu.dim() || mu.dim() != tree.dim())
    throw std::invalid_argument("dyadic_upper_bound: dimension mismatch");
  if (!(p >= 1.0) || !std::isfinite(p))
    throw std::invalid_argument("dyadic_upper_bound: p must be a finite value >= 1");
  if (!tree.covers(mu.points) || !tree.covers(nu.points))
    throw std::invalid_argument("dyadic_upper_bound: tree does not cover all atoms");
  const double diam_p = pow_dist(tree.diameter(), p);
  KahanAccumulator bound;
  bound.add(std::pow(3.0, -tree.depth() * p) * diam_p);
  for (int k = 1; k <= tree.depth(); ++k) {
    const double disc = level_discrepancy(tree.cell_index(mu.points, k), mu.weights,
                                          tree.cell_index(nu.points, k), nu.weights);
    bound.add(std::pow(3.0, -(k - 1) * p) * diam_p * disc);
  }
  return bound.value();
}

std::vector<int> random_injection(int m, const Eigen::MatrixXd& packed_points,
                                  std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("random_injection: m must be >= 1");
  if (packed_points.rows() != m)
    throw std::invalid_argument("random_injection: point count does not match m");
  std::vector<int> perm(static_cast<size_t>(m));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  for (int i = m - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(j)]);
  }
  return perm;
}

DiscreteMeasure pushforward_measure(const Eigen::VectorXd& q, const std::vector<int>& bijection,
                                    const Eigen::MatrixXd& packed_points) {
  const auto m = static_cast<Eigen::Index>(bijection.size());
  if (q.size() != m || packed_points.rows() != m)
    throw std::invalid_argument("pushforward_measure: size mismatch");
  Eigen::MatrixXd pts(m, packed_points.cols());
  for (Eigen::Index i = 0; i < m; ++i) pts.row(i) = packed_points.row(bijection[static_cast<size_t>(i)]);
  return make_measure(pts, q);
}

}  // namespace spt
