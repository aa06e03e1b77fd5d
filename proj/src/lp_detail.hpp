#pragma once

#include <Eigen/Core>

namespace spt::detail {

// Dense two-phase primal simplex for max c.x s.t. A x = b, x >= 0.
// Bland's rule throughout, so it terminates on degenerate instances.
// Sized for small problems (hundreds of columns, a handful of rows).
struct LpResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  bool feasible = false;
  bool bounded = false;
  int iterations = 0;
};

LpResult solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c);

}  // namespace spt::detail
