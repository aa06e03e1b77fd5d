#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "spt/numeric.hpp"
#include "spt/transport.hpp"

namespace spt {

namespace {

void check_1d_inputs(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  validate_measure(mu);
  validate_measure(nu);
  if (mu.dim() != 1 || nu.dim() != 1)
    throw std::invalid_argument("wasserstein_1d: supports must be one-dimensional");
  if (!(p >= 1.0) || !std::isfinite(p))
    throw std::invalid_argument("wasserstein_1d: p must be a finite value >= 1");
}

// Indices sorted by (coordinate, original index); the index tie-break makes
// the monotone coupling unique and runs reproducible.
std::vector<int> sorted_order(const Eigen::VectorXd& x) {
  std::vector<int> idx(static_cast<size_t>(x.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (x[a] != x[b]) return x[a] < x[b];
    return a < b;
  });
  return idx;
}

// Walk the two sorted supports moving the smaller remaining mass; optionally
// record coupling entries. This is the quantile coupling, optimal for every
// convex cost |x-y|^p, p >= 1.
double monotone_sweep(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p,
                      std::vector<CouplingEntry>* entries) {
  const auto oi = sorted_order(mu.points.col(0));
  const auto oj = sorted_order(nu.points.col(0));
  const Eigen::Index n = mu.n(), m = nu.n();
  KahanAccumulator acc;
  Eigen::Index a = 0, b = 0;
  double ra = mu.weights[oi[0]];
  double rb = nu.weights[oj[0]];
  while (a < n && b < m) {
    const double mass = std::min(ra, rb);
    if (mass > 0.0) {
      const double dist = std::abs(mu.points(oi[a], 0) - nu.points(oj[b], 0));
      acc.add(mass * pow_dist(dist, p));
      if (entries) entries->push_back({oi[a], oj[b], mass});
    }
    ra -= mass;
    rb -= mass;
    // min() zeroes at least one side exactly; exhausted sides advance.
    if (ra <= 0.0) {
      ++a;
      if (a < n) ra = mu.weights[oi[a]];
    }
    if (rb <= 0.0) {
      ++b;
      if (b < m) rb = nu.weights[oj[b]];
    }
  }
  return acc.value();
}

}  // namespace

double wasserstein_1d_cost(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  check_1d_inputs(mu, nu, p);
  return root_p(monotone_sweep(mu, nu, p, nullptr), p);
}

TransportResult wasserstein_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double p) {
  check_1d_inputs(mu, nu, p);
  TransportResult r;
  r.p = p;
  r.coupling.rows = static_cast<int>(mu.n());
  r.coupling.cols = static_cast<int>(nu.n());
  r.coupling.row_marginal = mu.weights;
  r.coupling.col_marginal = nu.weights;
  const double total = monotone_sweep(mu, nu, p, &r.coupling.entries);
  std::sort(r.coupling.entries.begin(), r.coupling.entries.end(),
            [](const CouplingEntry& u, const CouplingEntry& v) {
              if (u.i != v.i) return u.i < v.i;
              return u.j < v.j;
            });
  r.cost = root_p(total, p);
  return r;
}

}  // namespace spt
