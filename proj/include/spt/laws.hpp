#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>

namespace spt {

// Finitely supported law on the real line. Atoms strictly increasing and
// finite; weights on the simplex within 1e-12.
struct AtomicLaw {
  Eigen::VectorXd atoms;
  Eigen::VectorXd weights;

  Eigen::Index size() const { return atoms.size(); }
};

void validate_atomic_law(const AtomicLaw& law, double tol = 1e-12);

// Gaussian mixture: `base` convolved with a centered normal of variance
// `noise_variance` (> 0). Density and CDF are finite sums of shifted
// Gaussian kernels.
struct ConvolvedLaw {
  AtomicLaw base;
  double noise_variance = 0.0;

  double density(double x) const;
  double cdf(double x) const;
};

void validate_convolved_law(const ConvolvedLaw& law);

// Standard normal CDF via erfc; accurate in both tails.
double normal_cdf(double x);

// m-point quadrature of N(0, variance): the unique atomic law on m nodes
// whose moments agree with the Gaussian's through order 2m-1. Nodes and
// weights come from the eigen-decomposition of the Jacobi matrix of the
// Hermite recurrence; results are exactly symmetric about 0.
// Throws std::invalid_argument for m < 1 or m > kGaussHermiteMaxNodes.
inline constexpr int kGaussHermiteMaxNodes = 30;
AtomicLaw gauss_hermite_measure(int m, double variance);

// Moment-matching mixture: gauss_hermite_measure(m, 1 - delta) convolved
// with N(0, delta). Matches N(0, 1) through order 2m-1 while staying at
// positive 1-D transport distance from it. Requires delta in (0, 1).
ConvolvedLaw hard_distribution_A(int m, double delta);
// Default noise level min(1/m, 1/2).
ConvolvedLaw hard_distribution_A(int m);

// Raw moments E X^j for j = 0..order (entry j at index j).
Eigen::VectorXd gaussian_moments(int order, double variance);
Eigen::VectorXd law_moments(const AtomicLaw& law, int order);
// Convolution moments by binomial expansion: E (X+N)^j =
// sum_i C(j,i) E X^(j-i) E N^i; independent of the density evaluation.
Eigen::VectorXd law_moments(const ConvolvedLaw& law, int order);

// Side-by-side comparison of two moment sequences through order `order`.
struct MomentReport {
  int order = 0;
  Eigen::VectorXd target_moments;    // length order + 1
  Eigen::VectorXd achieved_moments;  // length order + 1
  double max_abs_deviation = 0.0;
};

MomentReport moment_report(const Eigen::VectorXd& target,
                           const Eigen::VectorXd& achieved);
// CSV rows "order,target,achieved,deviation" with a header line.
std::string moment_report_csv(const MomentReport& report);

// Evaluable 1-D law for quadrature: right-continuous CDF, a window
// [lo, hi] outside which the law's mass is negligible at double precision,
// and the sorted jump locations quadrature intervals must not straddle.
struct Cdf1D {
  std::function<double(double)> cdf;
  double lo = 0.0;
  double hi = 0.0;
  Eigen::VectorXd breakpoints;  // sorted, may be empty
};

Cdf1D gaussian_cdf(double mean, double variance);
Cdf1D atomic_cdf(const AtomicLaw& law);
Cdf1D convolved_cdf(const ConvolvedLaw& law);

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
};

// 1-D Wasserstein-1 distance as the area between CDFs: integral of
// |F_a - F_b| over the union window, split at all breakpoints, by adaptive
// two-point Gauss-Legendre (open rule, so jump laws integrate exactly
// between their atoms). Throws std::runtime_error if the estimated error
// cannot be driven below tol.
QuadratureResult quantile_w1(const Cdf1D& a, const Cdf1D& b,
                             double tol = 1e-9);

// Chi-square divergence of a Gaussian mixture from N(0, 1):
// integral of (a(x)/phi(x) - 1)^2 phi(x) dx over [-W, W] with
// W = max(8, 4 sqrt(m)); truncation_error bounds the discarded tails.
// Throws std::runtime_error when the integrand still grows at the window
// edge (noise variance too small for the window).
struct ChiSquareResult {
  double value = 0.0;
  double quadrature_error = 0.0;
  double truncation_error = 0.0;
};

ChiSquareResult chi_square_1d(const ConvolvedLaw& a);

// Geometric grid of `size` points from lo to hi inclusive, strictly
// increasing. Requires 0 < lo < hi, size >= 2.
Eigen::VectorXd geometric_grid(double lo, double hi, int size);

// Pair of laws on a grid in [1, 16 L^2] maximizing E 1/X - E 1/X' subject
// to equal raw moments of order j for 0 <= j < L. Solved as a dense LP
// over the two weight vectors; `objective` is the achieved gap, and
// `warning` is nonempty when it falls short of the 1/2 target the
// downstream prior construction assumes.
struct ExtremalPair {
  AtomicLaw x;
  AtomicLaw x_prime;
  double objective = 0.0;
  std::string warning;
};

ExtremalPair extremal_pair_lp(int moment_order, const Eigen::VectorXd& grid);
// Default 512-point geometric grid on [1, 16 L^2].
ExtremalPair extremal_pair_lp(int moment_order);

// Two-point-anchored reweighting of the rescaled pair (X/eps, X'/eps):
// Y mixes an atom at 1 with the X-grid reweighted by 1/((y-1)(y-2)), and
// Y' mixes an atom at 2 with the X'-grid likewise, normalized by the gap
// functional z_eps. Requires eps in (0, 1/6], inputs supported in
// [1, infinity) with matching moments below `moment_order` and inverse-
// moment gap >= 1/2. The constructor validates the four contract bullets:
// matching moments below moment_order (1e-8), supports in
// [1, 16 L^2 / eps], E Y = E Y' <= 6, and E 1/Y >= 1 - 6 eps with
// E 1/Y' <= 1/2. Throws std::runtime_error if z_eps falls below its
// guaranteed floor (3/10) eps or any bullet fails.
struct PriorPair {
  AtomicLaw y;
  AtomicLaw y_prime;
  double delta_eps = 0.0;        // in [0, (9/5) eps^2]
  double delta_eps_prime = 0.0;  // in [0, (9/5) eps^2]
  double z_eps = 0.0;            // >= (3/10) eps
};

PriorPair build_priors(const AtomicLaw& x, const AtomicLaw& x_prime,
                       double eps, int moment_order);

// JSON round trip: {"atoms": [...], "weights": [...]} and
// {"base": {...}, "noise_variance": v}.
std::string atomic_law_to_json_text(const AtomicLaw& law);
AtomicLaw atomic_law_from_json_text(const std::string& text);
std::string convolved_law_to_json_text(const ConvolvedLaw& law);
ConvolvedLaw convolved_law_from_json_text(const std::string& text);

}  // namespace spt
