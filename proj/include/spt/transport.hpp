#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "spt/discrete_measure.hpp"

namespace spt {

// One coupling entry: mass moved from atom i of mu to atom j of nu.
struct CouplingEntry {
  int i;
  int j;
  double mass;
};

// Coupling between two finitely supported measures, stored as sparse entries
// (optimal couplings are tree-sparse: at most n+m-1 of them). Marginals are
// kept alongside so the object certifies itself.
struct Coupling {
  int rows = 0;
  int cols = 0;
  std::vector<CouplingEntry> entries;  // nonnegative mass, lexicographic (i, j)
  Eigen::VectorXd row_marginal;        // prescribed: weights of mu
  Eigen::VectorXd col_marginal;        // prescribed: weights of nu

  Eigen::VectorXd row_sums() const;
  Eigen::VectorXd col_sums() const;
  Eigen::MatrixXd dense() const;
};

inline constexpr double kMarginalTol = 1e-9;

// Throws if any mass is negative or a row/column sum deviates from the
// prescribed marginal by more than tol.
void validate_coupling(const Coupling& c, double tol = kMarginalTol);

struct TransportResult {
  double cost = 0.0;   // ( sum pi_ij |x_i - y_j|^p )^(1/p)
  double p = 1.0;
  Coupling coupling;
  // Solver diagnostics. dual_violation is max(0, -min reduced cost) at the
  // returned basis; exact solvers keep it below 1e-7 * cost scale.
  std::int64_t pivots = 0;
  double dual_violation = 0.0;
};

// Recompute transport cost of an explicit coupling (compensated sum).
double transport_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const Coupling& c,
                      double p);

// Exact W_p on the line via the monotone (quantile) coupling. Ties in the
// support are broken by original index, which keeps the entry order stable.
TransportResult wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

// Cost-only variant, no coupling materialization; used in inner loops.
double wasserstein_1d_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

// Exact W_p in any dimension: network simplex on the complete bipartite
// transportation polytope; uniform equal-size inputs take the assignment
// reduction. Optimality is certified by complementary slackness.
TransportResult wasserstein_discrete(const DiscreteMeasure& mu, const DiscreteMeasure& nu,
                                     double p);

double wasserstein_discrete_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p);

}  // namespace spt
