#pragma once

// Exhaustive reference computations for small transport instances.
// These deliberately avoid every code path used by the library solvers:
// costs are minimised by enumerating permutations or polytope vertices.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Dense>

#include "spt/discrete_measure.hpp"
#include "spt/numeric.hpp"

namespace oracle {

inline double pair_cost(const Eigen::MatrixXd& xa, const Eigen::MatrixXd& xb,
                        int i, int j, double p) {
  const double d = (xa.row(i) - xb.row(j)).norm();
  return spt::pow_dist(d, p);
}

// Minimum of sum_i cost(i, sigma(i)) / n over all permutations sigma,
// for uniform measures with equal support sizes. Returns the p-th root.
inline double assignment_bruteforce(const Eigen::MatrixXd& xa,
                                    const Eigen::MatrixXd& xb, double p) {
  const int n = static_cast<int>(xa.rows());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    spt::KahanAccumulator acc;
    for (int i = 0; i < n; ++i) acc.add(pair_cost(xa, xb, i, perm[i], p));
    best = std::min(best, acc.value());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return spt::root_p(best / n, p);
}

// Solves the flow on a candidate spanning tree of the bipartite support
// graph by repeatedly peeling leaves. Returns false if the tree is
// disconnected or forces negative mass beyond round-off.
inline bool tree_flow(const std::vector<std::pair<int, int>>& cells, int n,
                      int m, const Eigen::VectorXd& wa,
                      const Eigen::VectorXd& wb, std::vector<double>& flow) {
  const int nodes = n + m;
  std::vector<std::vector<int>> incident(nodes);
  for (int e = 0; e < static_cast<int>(cells.size()); ++e) {
    incident[cells[e].first].push_back(e);
    incident[n + cells[e].second].push_back(e);
  }
  std::vector<double> balance(nodes);
  for (int i = 0; i < n; ++i) balance[i] = wa[i];
  for (int j = 0; j < m; ++j) balance[n + j] = wb[j];
  std::vector<int> degree(nodes);
  for (int v = 0; v < nodes; ++v) degree[v] = static_cast<int>(incident[v].size());
  std::vector<bool> edge_done(cells.size(), false);
  std::vector<bool> node_done(nodes, false);
  flow.assign(cells.size(), 0.0);
  for (int step = 0; step + 1 < nodes; ++step) {
    int leaf = -1;
    for (int v = 0; v < nodes; ++v) {
      if (!node_done[v] && degree[v] == 1) {
        leaf = v;
        break;
      }
    }
    if (leaf < 0) return false;  // cycle or disconnected remainder
    int edge = -1;
    for (int e : incident[leaf]) {
      if (!edge_done[e]) {
        edge = e;
        break;
      }
    }
    if (edge < 0) return false;
    flow[edge] = balance[leaf];
    if (flow[edge] < -1e-12) return false;
    flow[edge] = std::max(flow[edge], 0.0);
    const int other = leaf < n ? n + cells[edge].second : cells[edge].first;
    balance[other] -= balance[leaf];
    node_done[leaf] = true;
    edge_done[edge] = true;
    --degree[leaf];
    --degree[other];
  }
  int open = 0;
  for (int v = 0; v < nodes; ++v)
    if (!node_done[v]) ++open;
  return open == 1;
}

// Minimum transport cost over all vertices of the transportation polytope.
// Every vertex is supported on a spanning tree of the bipartite graph, so
// enumerating the (n*m choose n+m-1) candidate trees covers all of them.
// Practical only for n, m <= 4. Returns the p-th root of the cost.
inline double vertex_enumeration(const spt::DiscreteMeasure& mu,
                                 const spt::DiscreteMeasure& nu, double p) {
  const int n = static_cast<int>(mu.n());
  const int m = static_cast<int>(nu.n());
  const int cells = n * m;
  const int basis = n + m - 1;
  std::vector<double> cost(cells);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      cost[i * m + j] = pair_cost(mu.points, nu.points, i, j, p);

  std::vector<int> pick(basis);
  std::iota(pick.begin(), pick.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<double> flow;
  std::vector<std::pair<int, int>> tree(basis);
  while (true) {
    for (int k = 0; k < basis; ++k) tree[k] = {pick[k] / m, pick[k] % m};
    if (tree_flow(tree, n, m, mu.weights, nu.weights, flow)) {
      spt::KahanAccumulator acc;
      for (int k = 0; k < basis; ++k) acc.add(flow[k] * cost[pick[k]]);
      best = std::min(best, acc.value());
    }
    int slot = basis - 1;
    while (slot >= 0 && pick[slot] == cells - basis + slot) --slot;
    if (slot < 0) break;
    ++pick[slot];
    for (int k = slot + 1; k < basis; ++k) pick[k] = pick[k - 1] + 1;
  }
  return spt::root_p(best, p);
}

}  // namespace oracle
