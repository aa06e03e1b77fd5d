#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "spt/numeric.hpp"
#include "transport_solvers.hpp"

namespace spt::detail {

namespace {

// Dense Jonker-Volgenant: column reduction followed by shortest augmenting
// paths with dual prices. Exact for real-valued costs; the returned prices
// satisfy complementary slackness up to accumulated rounding.
class Assignment {
 public:
  Assignment(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p)
      : n_(static_cast<int>(mu.n())), d_(static_cast<int>(mu.dim())), p_(p) {
    copy_points(mu.points, xa_);
    copy_points(nu.points, xb_);
    const std::int64_t cells = static_cast<std::int64_t>(n_) * n_;
    if (cells <= (std::int64_t{1} << 24)) {
      cache_.resize(static_cast<size_t>(cells));
      for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j) cache_[static_cast<size_t>(i) * n_ + j] = compute_cost(i, j);
      cached_ = true;
    }
  }

  // Returns row -> column matching; prices in v_, duals implied.
  std::vector<int> solve() {
    x_.assign(n_, -1);
    y_.assign(n_, -1);
    v_.assign(n_, 0.0);

    column_reduction();

    std::vector<int> free_rows;
    for (int i = 0; i < n_; ++i)
      if (x_[i] < 0) free_rows.push_back(i);
    for (const int f : free_rows) augment(f);
    return x_;
  }

  double cost(int i, int j) const {
    return cached_ ? cache_[static_cast<size_t>(i) * n_ + j] : compute_cost(i, j);
  }

  // Max complementary-slackness violation over all cells (full scan).
  double dual_violation() const {
    std::vector<double> u(static_cast<size_t>(n_));
    for (int i = 0; i < n_; ++i) u[static_cast<size_t>(i)] = cost(i, x_[i]) - v_[x_[i]];
    double worst = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        worst = std::max(worst, u[static_cast<size_t>(i)] + v_[j] - cost(i, j));
    return worst;
  }

 private:
  void copy_points(const Eigen::MatrixXd& pts, std::vector<double>& out) {
    out.resize(static_cast<size_t>(pts.rows()) * pts.cols());
    for (Eigen::Index i = 0; i < pts.rows(); ++i)
      for (Eigen::Index j = 0; j < pts.cols(); ++j)
        out[static_cast<size_t>(i) * pts.cols() + j] = pts(i, j);
  }

  double compute_cost(int i, int j) const {
    const double* a = &xa_[static_cast<size_t>(i) * d_];
    const double* b = &xb_[static_cast<size_t>(j) * d_];
    double s = 0.0;
    for (int k = 0; k < d_; ++k) {
      const double t = a[k] - b[k];
      s += t * t;
    }
    if (s <= 0.0) return 0.0;
    if (p_ == 2.0) return s;
    if (p_ == 1.0) return std::sqrt(s);
    return std::exp(0.5 * p_ * std::log(s));
  }

  void column_reduction() {
    for (int j = n_ - 1; j >= 0; --j) {
      double best = cost(0, j);
      int bi = 0;
      for (int i = 1; i < n_; ++i) {
        const double c = cost(i, j);
        if (c < best) {
          best = c;
          bi = i;
        }
      }
      v_[j] = best;
      if (x_[bi] < 0) {
        x_[bi] = j;
        y_[j] = bi;
      }
    }
  }

  // Shortest augmenting path from free row f over reduced costs c - v.
  void augment(int f) {
    auto& d = d_scratch_;
    auto& pred = pred_;
    auto& col = col_;
    d.resize(static_cast<size_t>(n_));
    pred.assign(static_cast<size_t>(n_), f);
    col.resize(static_cast<size_t>(n_));
    std::iota(col.begin(), col.end(), 0);
    for (int j = 0; j < n_; ++j) d[static_cast<size_t>(j)] = cost(f, j) - v_[j];

    int low = 0, up = 0, last = 0;
    int endofpath = -1;
    double minval = 0.0;
    while (endofpath < 0) {
      if (low == up) {
        last = low;
        minval = d[static_cast<size_t>(col[static_cast<size_t>(up)])];
        for (int k = up + 1; k < n_; ++k) minval = std::min(minval, d[static_cast<size_t>(col[static_cast<size_t>(k)])]);
        for (int k = up; k < n_; ++k) {
          const int j = col[static_cast<size_t>(k)];
          if (d[static_cast<size_t>(j)] <= minval) {
            std::swap(col[static_cast<size_t>(k)], col[static_cast<size_t>(up)]);
            ++up;
          }
        }
        for (int k = low; k < up; ++k) {
          const int j = col[static_cast<size_t>(k)];
          if (y_[j] < 0) {
            endofpath = j;
            break;
          }
        }
      }
      if (endofpath >= 0) break;

      const int j1 = col[static_cast<size_t>(low)];
      ++low;
      const int i = y_[j1];
      const double u1 = cost(i, j1) - v_[j1] - minval;
      for (int k = up; k < n_; ++k) {
        const int j = col[static_cast<size_t>(k)];
        const double alt = cost(i, j) - v_[j] - u1;
        if (alt < d[static_cast<size_t>(j)]) {
          d[static_cast<size_t>(j)] = alt;
          pred[static_cast<size_t>(j)] = i;
          if (alt <= minval) {
            if (y_[j] < 0) {
              endofpath = j;
              break;
            }
            std::swap(col[static_cast<size_t>(k)], col[static_cast<size_t>(up)]);
            ++up;
          }
        }
      }
    }

    // Price update on scanned columns, then flip the alternating path.
    for (int k = 0; k < last; ++k) {
      const int j = col[static_cast<size_t>(k)];
      v_[j] += d[static_cast<size_t>(j)] - minval;
    }
    int j = endofpath;
    while (true) {
      const int i = pred[static_cast<size_t>(j)];
      y_[j] = i;
      std::swap(x_[i], j);
      if (i == f) break;
    }
  }

  int n_, d_;
  double p_;
  std::vector<double> xa_, xb_, cache_, v_;
  std::vector<int> x_, y_;
  std::vector<double> d_scratch_;
  std::vector<int> pred_, col_;
  bool cached_ = false;
};

}  // namespace

TransportResult solve_assignment(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  const int n = static_cast<int>(mu.n());
  Assignment solver(mu, nu, p);
  const std::vector<int> match = solver.solve();

  TransportResult r;
  r.p = p;
  r.coupling.rows = n;
  r.coupling.cols = n;
  r.coupling.row_marginal = mu.weights;
  r.coupling.col_marginal = nu.weights;
  const double mass = 1.0 / static_cast<double>(n);
  KahanAccumulator acc;
  for (int i = 0; i < n; ++i) {
    r.coupling.entries.push_back({i, match[i], mass});
    acc.add(mass * solver.cost(i, match[i]));
  }
  std::sort(r.coupling.entries.begin(), r.coupling.entries.end(),
            [](const CouplingEntry& a, const CouplingEntry& b) { return a.j < b.j; });
  std::sort(r.coupling.entries.begin(), r.coupling.entries.end(),
            [](const CouplingEntry& a, const CouplingEntry& b) { return a.i < b.i; });
  r.cost = root_p(acc.value(), p);
  r.dual_violation = solver.dual_violation();
  return r;
}

}  // namespace spt::detail
