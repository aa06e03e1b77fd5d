#include <Eigen/Core>

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lp_detail.hpp"
#include "spt/laws.hpp"
#include "spt/numeric.hpp"

namespace spt {

namespace detail {

namespace {

constexpr double kReducedCostTol = 1e-10;
constexpr double kPivotTol = 1e-11;
constexpr int kIterationCap = 200000;

void pivot(Eigen::MatrixXd& t, std::vector<Eigen::Index>& basis,
           Eigen::Index row, Eigen::Index col) {
  t.row(row) /= t(row, col);
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    if (i == row) continue;
    const double factor = t(i, col);
    if (factor != 0.0) t.row(i) -= factor * t.row(row);
  }
  basis[row] = col;
}

// Primal simplex on a canonical tableau. Bland's rule (first improving
// column, smallest basic index among tied leaving rows) guarantees
// termination under degeneracy. Returns false when unbounded.
bool run_simplex(Eigen::MatrixXd& t, std::vector<Eigen::Index>& basis,
                 const Eigen::VectorXd& cost, Eigen::Index ncols,
                 int& iterations) {
  const Eigen::Index m = t.rows();
  const Eigen::Index rhs = t.cols() - 1;
  while (true) {
    if (++iterations > kIterationCap) {
      throw std::runtime_error("solve_lp: iteration cap exceeded");
    }
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < ncols && enter < 0; ++j) {
      double reduced = cost[j];
      for (Eigen::Index i = 0; i < m; ++i) reduced -= cost[basis[i]] * t(i, j);
      if (reduced > kReducedCostTol) enter = j;
    }
    if (enter < 0) return true;
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      if (t(i, enter) > kPivotTol) {
        best = std::min(best, t(i, rhs) / t(i, enter));
      }
    }
    if (!std::isfinite(best)) return false;
    Eigen::Index leave = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (t(i, enter) > kPivotTol &&
          t(i, rhs) / t(i, enter) <= best + 1e-12 &&
          (leave < 0 || basis[i] < basis[leave])) {
        leave = i;
      }
    }
    pivot(t, basis, leave, enter);
  }
}

}  // namespace

LpResult solve_lp(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                  const Eigen::VectorXd& c) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (m < 1 || n < 1 || b.size() != m || c.size() != n) {
    throw std::invalid_argument("solve_lp: dimension mismatch");
  }
  if (!a.allFinite() || !b.allFinite() || !c.allFinite()) {
    throw std::invalid_argument("solve_lp: non-finite input");
  }

  // Tableau [A | I | b] with an artificial basis; rows flipped so b >= 0.
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, n + m + 1);
  t.leftCols(n) = a;
  t.col(n + m) = b;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (t(i, n + m) < 0.0) t.row(i) = -t.row(i);
    t(i, n + i) = 1.0;
  }
  std::vector<Eigen::Index> basis(m);
  for (Eigen::Index i = 0; i < m; ++i) basis[i] = n + i;

  LpResult result;

  // Phase 1: maximize minus the artificial mass; zero means feasible.
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n + m);
  phase1.tail(m).setConstant(-1.0);
  run_simplex(t, basis, phase1, n + m, result.iterations);
  double artificial_mass = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[i] >= n) artificial_mass += t(i, n + m);
  }
  if (artificial_mass > 1e-8 * (1.0 + b.cwiseAbs().maxCoeff())) {
    return result;
  }
  result.feasible = true;

  // Drive residual artificials out of the basis; rows that admit no real
  // pivot are redundant constraints and are dropped.
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[i] < n) {
      keep.push_back(i);
      continue;
    }
    Eigen::Index col = -1;
    for (Eigen::Index j = 0; j < n && col < 0; ++j) {
      if (std::abs(t(i, j)) > kPivotTol) col = j;
    }
    if (col >= 0) {
      pivot(t, basis, i, col);
      keep.push_back(i);
    }
  }
  if (keep.size() < static_cast<std::size_t>(m)) {
    Eigen::MatrixXd compact(static_cast<Eigen::Index>(keep.size()), t.cols());
    std::vector<Eigen::Index> compact_basis;
    for (std::size_t r = 0; r < keep.size(); ++r) {
      compact.row(static_cast<Eigen::Index>(r)) = t.row(keep[r]);
      compact_basis.push_back(basis[keep[r]]);
    }
    t.swap(compact);
    basis.swap(compact_basis);
  }

  // Phase 2 over the real columns only; artificials can never re-enter.
  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n + m);
  phase2.head(n) = c;
  result.bounded = run_simplex(t, basis, phase2, n, result.iterations);

  result.x = Eigen::VectorXd::Zero(n);
  for (std::size_t i = 0; i < basis.size(); ++i) {
    if (basis[i] < n) {
      result.x[basis[i]] =
          std::max(0.0, t(static_cast<Eigen::Index>(i), n + m));
    }
  }
  result.objective = c.dot(result.x);
  return result;
}

}  // namespace detail

namespace {

AtomicLaw pruned_law(const Eigen::VectorXd& grid, const Eigen::VectorXd& raw) {
  std::vector<double> atoms;
  std::vector<double> weights;
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    if (raw[i] > 1e-12) {
      atoms.push_back(grid[i]);
      weights.push_back(raw[i]);
    }
  }
  AtomicLaw law;
  law.atoms = Eigen::Map<const Eigen::VectorXd>(
      atoms.data(), static_cast<Eigen::Index>(atoms.size()));
  law.weights = Eigen::Map<const Eigen::VectorXd>(
      weights.data(), static_cast<Eigen::Index>(weights.size()));
  law.weights /= kahan_sum(law.weights);
  validate_atomic_law(law);
  return law;
}

double mean_inverse(const AtomicLaw& law) {
  KahanAccumulator acc;
  for (Eigen::Index i = 0; i < law.size(); ++i) {
    acc.add(law.weights[i] / law.atoms[i]);
  }
  return acc.value();
}

}  // namespace

ExtremalPair extremal_pair_lp(int moment_order, const Eigen::VectorXd& grid) {
  if (moment_order < 1) {
    throw std::invalid_argument("extremal_pair_lp: moment order must be >= 1");
  }
  const Eigen::Index k = grid.size();
  if (k < std::max<Eigen::Index>(2, moment_order)) {
    throw std::invalid_argument(
        "extremal_pair_lp: grid needs at least max(2, L) points");
  }
  if (!grid.allFinite()) {
    throw std::invalid_argument("extremal_pair_lp: non-finite grid");
  }
  for (Eigen::Index i = 0; i + 1 < k; ++i) {
    if (!(grid[i] < grid[i + 1])) {
      throw std::invalid_argument("extremal_pair_lp: grid not increasing");
    }
  }
  const double hi = 16.0 * moment_order * moment_order;
  if (grid[0] < 1.0 - 1e-12 || grid[k - 1] > hi * (1.0 + 1e-12)) {
    throw std::invalid_argument("extremal_pair_lp: grid outside [1, 16 L^2]");
  }

  // Variables (w, w'); simplex row per block, then matched raw moments of
  // order 1..L-1 on grid powers normalized by the grid maximum.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(moment_order + 1, 2 * k);
  a.row(0).head(k).setOnes();
  a.row(1).segment(k, k).setOnes();
  const Eigen::VectorXd scaled = grid / grid[k - 1];
  Eigen::VectorXd power = scaled;
  for (int j = 1; j < moment_order; ++j) {
    a.row(1 + j).head(k) = power.transpose();
    a.row(1 + j).segment(k, k) = -power.transpose();
    power = power.cwiseProduct(scaled);
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(moment_order + 1);
  b[0] = 1.0;
  b[1] = 1.0;
  Eigen::VectorXd c(2 * k);
  c.head(k) = grid.cwiseInverse();
  c.tail(k) = -grid.cwiseInverse();

  const detail::LpResult lp = detail::solve_lp(a, b, c);
  if (!lp.feasible || !lp.bounded) {
    throw std::runtime_error("extremal_pair_lp: solver failed on a feasible bounded program");
  }

  ExtremalPair pair;
  pair.x = pruned_law(grid, lp.x.head(k));
  pair.x_prime = pruned_law(grid, lp.x.tail(k));
  pair.objective = mean_inverse(pair.x) - mean_inverse(pair.x_prime);
  if (pair.objective < 0.5) {
    char msg[160];
    std::snprintf(msg, sizeof(msg),
                  "achieved inverse-moment gap %.6f is below the 1/2 target "
                  "the prior construction assumes",
                  pair.objective);
    pair.warning = msg;
  }
  return pair;
}

ExtremalPair extremal_pair_lp(int moment_order) {
  if (moment_order < 1) {
    throw std::invalid_argument("extremal_pair_lp: moment order must be >= 1");
  }
  return extremal_pair_lp(
      moment_order,
      geometric_grid(1.0, 16.0 * moment_order * moment_order, 512));
}

PriorPair build_priors(const AtomicLaw& x, const AtomicLaw& x_prime,
                       double eps, int moment_order) {
  validate_atomic_law(x);
  validate_atomic_law(x_prime);
  if (!(eps > 0.0) || eps > 1.0 / 6.0 + 1e-15) {
    throw std::invalid_argument("build_priors: eps must lie in (0, 1/6]");
  }
  if (moment_order < 1) {
    throw std::invalid_argument("build_priors: moment order must be >= 1");
  }
  if (x.atoms[0] < 1.0 - 1e-9 || x_prime.atoms[0] < 1.0 - 1e-9) {
    throw std::invalid_argument("build_priors: supports must lie in [1, inf)");
  }
  const Eigen::VectorXd mx = law_moments(x, moment_order - 1);
  const Eigen::VectorXd mxp = law_moments(x_prime, moment_order - 1);
  for (int j = 0; j < moment_order; ++j) {
    if (std::abs(mx[j] - mxp[j]) > 1e-8 * std::max(1.0, std::abs(mx[j]))) {
      throw std::invalid_argument(
          "build_priors: input moments below the stated order do not match");
    }
  }
  if (mean_inverse(x) - mean_inverse(x_prime) < 0.5 - 1e-9) {
    throw std::invalid_argument(
        "build_priors: inverse-moment gap of the inputs is below 1/2");
  }

  const Eigen::VectorXd y = x.atoms / eps;
  const Eigen::VectorXd yp = x_prime.atoms / eps;
  KahanAccumulator delta_acc, delta_prime_acc, z_pos, z_neg;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    delta_acc.add(x.weights[i] / ((y[i] - 1.0) * (y[i] - 2.0)));
    z_pos.add(x.weights[i] / (y[i] - 2.0));
  }
  for (Eigen::Index i = 0; i < yp.size(); ++i) {
    delta_prime_acc.add(x_prime.weights[i] / ((yp[i] - 1.0) * (yp[i] - 2.0)));
    z_neg.add(x_prime.weights[i] / (yp[i] - 1.0));
  }
  PriorPair pair;
  pair.delta_eps = delta_acc.value();
  pair.delta_eps_prime = delta_prime_acc.value();
  pair.z_eps = z_pos.value() - z_neg.value();
  if (pair.z_eps < 0.3 * eps * (1.0 - 1e-9)) {
    char msg[128];
    std::snprintf(msg, sizeof(msg),
                  "build_priors: gap functional %.9g fell below its floor "
                  "(3/10) eps = %.9g",
                  pair.z_eps, 0.3 * eps);
    throw std::runtime_error(msg);
  }

  // Y mixes the anchor atom 1 with the rescaled X-atoms; the reweighting
  // makes the anchor weight absorb exactly the mass the kernel removes,
  // so the total is 1 by construction.
  AtomicLaw law_y;
  law_y.atoms.resize(y.size() + 1);
  law_y.weights.resize(y.size() + 1);
  law_y.atoms[0] = 1.0;
  law_y.weights[0] = 1.0 - pair.delta_eps / pair.z_eps;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    law_y.atoms[i + 1] = y[i];
    law_y.weights[i + 1] =
        x.weights[i] / ((y[i] - 1.0) * (y[i] - 2.0)) / pair.z_eps;
  }
  AtomicLaw law_yp;
  law_yp.atoms.resize(yp.size() + 1);
  law_yp.weights.resize(yp.size() + 1);
  law_yp.atoms[0] = 2.0;
  law_yp.weights[0] = 1.0 - pair.delta_eps_prime / pair.z_eps;
  for (Eigen::Index i = 0; i < yp.size(); ++i) {
    law_yp.atoms[i + 1] = yp[i];
    law_yp.weights[i + 1] =
        x_prime.weights[i] / ((yp[i] - 1.0) * (yp[i] - 2.0)) / pair.z_eps;
  }
  validate_atomic_law(law_y);
  validate_atomic_law(law_yp);
  pair.y = std::move(law_y);
  pair.y_prime = std::move(law_yp);

  // Contract bullets, revalidated from the constructed laws rather than
  // trusted from the algebra.
  const double eps_sq_cap = 1.8 * eps * eps + 1e-12;
  if (pair.delta_eps < -1e-15 || pair.delta_eps > eps_sq_cap ||
      pair.delta_eps_prime < -1e-15 || pair.delta_eps_prime > eps_sq_cap) {
    throw std::runtime_error("build_priors: kernel mass outside [0, (9/5) eps^2]");
  }
  const Eigen::VectorXd my = law_moments(pair.y, std::max(1, moment_order - 1));
  const Eigen::VectorXd myp =
      law_moments(pair.y_prime, std::max(1, moment_order - 1));
  for (int j = 0; j < moment_order; ++j) {
    if (std::abs(my[j] - myp[j]) > 1e-8 * std::max(1.0, std::abs(my[j]))) {
      throw std::runtime_error("build_priors: output moments fail to match");
    }
  }
  const double support_cap =
      16.0 * moment_order * moment_order / eps * (1.0 + 1e-12);
  if (pair.y.atoms[pair.y.size() - 1] > support_cap ||
      pair.y_prime.atoms[pair.y_prime.size() - 1] > support_cap) {
    throw std::runtime_error("build_priors: support escapes [1, 16 L^2 / eps]");
  }
  if (std::abs(my[1] - myp[1]) > 1e-10 || my[1] > 6.0 + 1e-9) {
    throw std::runtime_error("build_priors: mean condition E Y = E Y' <= 6 failed");
  }
  if (mean_inverse(pair.y) < 1.0 - 6.0 * eps - 1e-9 ||
      mean_inverse(pair.y_prime) > 0.5 + 1e-12) {
    throw std::runtime_error("build_priors: inverse-moment conditions failed");
  }
  return pair;
}

}  // namespace spt
