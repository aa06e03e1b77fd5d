#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "spt/discrete_measure.hpp"

namespace spt {

// Maximal subset of candidate rows with pairwise distance >= separation.
// Greedy first-fit in row order, so every rejected candidate lies within
// separation of an earlier selected one (the returned set is a covering
// at radius separation as well as a packing).
std::vector<int> greedy_packing(const Eigen::MatrixXd& candidates, double separation);

// Nested axis-aligned grids over a bounding cube, one level per scale, with
// the mesh shrinking by 1/3 each level. A level-k cell is a box of edge
// side/3^k, so its diameter is exactly 3^{-k} times the root diameter and
// level k+1 refines level k cell by cell.
class PartitionTree {
 public:
  // Bounding cube of the rows of points, subdivided depth times.
  // depth must lie in [0, 19] (3^19 fits in a 32-bit cell coordinate).
  PartitionTree(const Eigen::MatrixXd& points, int depth);

  int depth() const { return depth_; }
  int dim() const { return static_cast<int>(origin_.size()); }
  double side() const { return side_; }

  // Diameter of the root cube; the set diameter is at most this.
  double diameter() const;

  // True if every row lies inside the root cube.
  bool covers(const Eigen::MatrixXd& points) const;

  // Integer cell coordinates at a level, one row per point, entries in
  // [0, 3^level). Points must be covered; level 0 is the single root cell.
  Eigen::MatrixXi cell_index(const Eigen::MatrixXd& points, int level) const;

 private:
  Eigen::RowVectorXd origin_;
  double side_ = 0.0;
  int depth_ = 0;
};

// Hierarchical transport bound
//   3^{-Kp} diam^p + sum_{k=1}^{K} 3^{-(k-1)p} diam^p sum_cells |mu(Q) - nu(Q)|
// with K = tree.depth() and diam = tree.diameter(). Mass that the level-k
// grid separates travels at most a level-(k-1) cell diameter, so the value
// always dominates the exact p-th power transport cost.
double dyadic_upper_bound(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                          const PartitionTree& tree);

// Uniformly random bijection [m] -> rows of packed_points, as an index array.
std::vector<int> random_injection(int m, const Eigen::MatrixXd& packed_points,
                                  std::uint64_t seed);

// Measure placing mass q[i] at packed_points.row(bijection[i]).
DiscreteMeasure pushforward_measure(const Eigen::VectorXd& q, const std::vector<int>& bijection,
                                    const Eigen::MatrixXd& packed_points);

}  // namespace spt
