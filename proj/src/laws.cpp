#include "spt/laws.hpp"

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "spt/numeric.hpp"

namespace spt {

namespace {

using json = nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;

double normal_density(double x, double mean, double variance) {
  const double z = (x - mean) / std::sqrt(variance);
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * kPi * variance);
}

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

void validate_atomic_law(const AtomicLaw& law, double tol) {
  if (law.atoms.size() == 0) {
    throw std::invalid_argument("atomic law: empty support");
  }
  if (law.atoms.size() != law.weights.size()) {
    throw std::invalid_argument("atomic law: atom/weight size mismatch");
  }
  if (!law.atoms.allFinite() || !law.weights.allFinite()) {
    throw std::invalid_argument("atomic law: non-finite entry");
  }
  for (Eigen::Index i = 0; i + 1 < law.atoms.size(); ++i) {
    if (!(law.atoms[i] < law.atoms[i + 1])) {
      throw std::invalid_argument("atomic law: atoms not strictly increasing");
    }
  }
  if ((law.weights.array() < 0.0).any()) {
    throw std::invalid_argument("atomic law: negative weight");
  }
  if (std::abs(kahan_sum(law.weights) - 1.0) > tol) {
    throw std::invalid_argument("atomic law: weights do not sum to 1");
  }
}

void validate_convolved_law(const ConvolvedLaw& law) {
  validate_atomic_law(law.base);
  if (!(law.noise_variance > 0.0) || !std::isfinite(law.noise_variance)) {
    throw std::invalid_argument("convolved law: noise variance must be > 0");
  }
}

double ConvolvedLaw::density(double x) const {
  KahanAccumulator acc;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    acc.add(base.weights[i] * normal_density(x, base.atoms[i], noise_variance));
  }
  return acc.value();
}

double ConvolvedLaw::cdf(double x) const {
  const double sd = std::sqrt(noise_variance);
  KahanAccumulator acc;
  for (Eigen::Index i = 0; i < base.size(); ++i) {
    acc.add(base.weights[i] * normal_cdf((x - base.atoms[i]) / sd));
  }
  return acc.value();
}

AtomicLaw gauss_hermite_measure(int m, double variance) {
  if (m < 1 || m > kGaussHermiteMaxNodes) {
    throw std::invalid_argument("gauss_hermite_measure: node count out of [1, 30]");
  }
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw std::invalid_argument("gauss_hermite_measure: variance must be > 0");
  }
  if (m == 1) {
    AtomicLaw law;
    law.atoms = Eigen::VectorXd::Zero(1);
    law.weights = Eigen::VectorXd::Ones(1);
    return law;
  }
  // Jacobi matrix of the monic Hermite recurrence for N(0,1): zero
  // diagonal, off-diagonal sqrt(k). Eigenvalues are the nodes; squared
  // first eigenvector components are the weights.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) {
    const double beta = std::sqrt(static_cast<double>(k));
    jacobi(k, k - 1) = beta;
    jacobi(k - 1, k) = beta;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  if (eig.info() != Eigen::Success) {
    throw std::runtime_error("gauss_hermite_measure: eigen-decomposition failed");
  }

  // Eigenvalues locate the roots to ~1e-14, which is not enough for the
  // top moments at m near the cap. Polish each root with Newton steps on
  // the monic three-term recurrence in extended precision, then take the
  // weights from the closed form (m-1)! / (m He_{m-1}(x)^2).
  const auto hermite_pair = [m](long double x) {
    long double prev = 1.0L, cur = x;
    for (int k = 1; k < m; ++k) {
      const long double next = x * cur - static_cast<long double>(k) * prev;
      prev = cur;
      cur = next;
    }
    return std::pair<long double, long double>(cur, prev);
  };
  long double factorial = 1.0L;
  for (int k = 2; k < m; ++k) factorial *= static_cast<long double>(k);
  Eigen::VectorXd atoms(m), weights(m);
  for (int i = 0; i < m; ++i) {
    long double x = static_cast<long double>(eig.eigenvalues()[i]);
    long double below = 0.0L;
    for (int step = 0; step < 8; ++step) {
      const auto [value, lower] = hermite_pair(x);
      below = lower;
      const long double derivative = static_cast<long double>(m) * lower;
      const long double shift = value / derivative;
      x -= shift;
      if (std::abs(static_cast<double>(shift)) <
          1e-18 * (1.0 + std::abs(static_cast<double>(x)))) {
        below = hermite_pair(x).second;
        break;
      }
    }
    atoms[i] = static_cast<double>(x);
    weights[i] =
        static_cast<double>(factorial / (static_cast<long double>(m) * below * below));
  }
  atoms *= std::sqrt(variance);
  // The spectrum is symmetric about 0; average mirrored entries so the
  // output is exactly symmetric and odd moments vanish by cancellation.
  for (int i = 0, j = m - 1; i < j; ++i, --j) {
    const double node = 0.5 * (atoms[i] - atoms[j]);
    atoms[i] = node;
    atoms[j] = -node;
    const double w = 0.5 * (weights[i] + weights[j]);
    weights[i] = w;
    weights[j] = w;
  }
  if (m % 2 == 1) atoms[m / 2] = 0.0;
  weights /= kahan_sum(weights);
  AtomicLaw law{std::move(atoms), std::move(weights)};
  validate_atomic_law(law);
  return law;
}

ConvolvedLaw hard_distribution_A(int m, double delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("hard_distribution_A: delta must lie in (0, 1)");
  }
  return ConvolvedLaw{gauss_hermite_measure(m, 1.0 - delta), delta};
}

ConvolvedLaw hard_distribution_A(int m) {
  return hard_distribution_A(m, std::min(1.0 / m, 0.5));
}

Eigen::VectorXd gaussian_moments(int order, double variance) {
  if (order < 0) throw std::invalid_argument("gaussian_moments: negative order");
  Eigen::VectorXd moments = Eigen::VectorXd::Zero(order + 1);
  moments[0] = 1.0;
  // E N^j = (j-1)!! v^(j/2) for even j via the recursion M_j = (j-1) v M_{j-2}.
  for (int j = 2; j <= order; j += 2) {
    moments[j] = (j - 1) * variance * moments[j - 2];
  }
  return moments;
}

namespace {

// Extended-precision compensated sum. High-order power sums of symmetric
// laws cancel almost completely; the residue of a double-precision sum
// (machine epsilon times the absolute-value sum) would already exceed the
// 1e-10 contract at order 15.
class ExtendedAccumulator {
 public:
  void add(long double x) {
    const long double y = x - carry_;
    const long double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return static_cast<double>(sum_); }

 private:
  long double sum_ = 0.0L;
  long double carry_ = 0.0L;
};

}  // namespace

Eigen::VectorXd law_moments(const AtomicLaw& law, int order) {
  if (order < 0) throw std::invalid_argument("law_moments: negative order");
  Eigen::VectorXd moments(order + 1);
  std::vector<long double> powers(law.size(), 1.0L);
  for (int j = 0; j <= order; ++j) {
    ExtendedAccumulator acc;
    for (Eigen::Index i = 0; i < law.size(); ++i) {
      acc.add(static_cast<long double>(law.weights[i]) * powers[i]);
    }
    moments[j] = acc.value();
    for (Eigen::Index i = 0; i < law.size(); ++i) {
      powers[i] *= static_cast<long double>(law.atoms[i]);
    }
  }
  return moments;
}

Eigen::VectorXd law_moments(const ConvolvedLaw& law, int order) {
  const Eigen::VectorXd base = law_moments(law.base, order);
  const Eigen::VectorXd noise = gaussian_moments(order, law.noise_variance);
  Eigen::VectorXd moments(order + 1);
  for (int j = 0; j <= order; ++j) {
    // Binomial expansion of E (X + N)^j with X, N independent.
    long double binom = 1.0L;
    ExtendedAccumulator acc;
    for (int i = 0; i <= j; ++i) {
      acc.add(binom * static_cast<long double>(base[j - i]) *
              static_cast<long double>(noise[i]));
      binom = binom * (j - i) / (i + 1);
    }
    moments[j] = acc.value();
  }
  return moments;
}

MomentReport moment_report(const Eigen::VectorXd& target,
                           const Eigen::VectorXd& achieved) {
  if (target.size() != achieved.size() || target.size() == 0) {
    throw std::invalid_argument("moment_report: length mismatch");
  }
  MomentReport report;
  report.order = static_cast<int>(target.size()) - 1;
  report.target_moments = target;
  report.achieved_moments = achieved;
  report.max_abs_deviation = (target - achieved).cwiseAbs().maxCoeff();
  return report;
}

std::string moment_report_csv(const MomentReport& report) {
  std::ostringstream out;
  out << "order,target,achieved,deviation\n";
  char line[128];
  for (int j = 0; j <= report.order; ++j) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", j,
                  report.target_moments[j], report.achieved_moments[j],
                  report.achieved_moments[j] - report.target_moments[j]);
    out << line;
  }
  return out.str();
}

Cdf1D gaussian_cdf(double mean, double variance) {
  if (!(variance > 0.0) || !std::isfinite(variance) || !std::isfinite(mean)) {
    throw std::invalid_argument("gaussian_cdf: invalid parameters");
  }
  const double sd = std::sqrt(variance);
  Cdf1D law;
  law.cdf = [mean, sd](double x) { return normal_cdf((x - mean) / sd); };
  // 10 standard deviations leave tail mass ~1e-24.
  law.lo = mean - 10.0 * sd;
  law.hi = mean + 10.0 * sd;
  return law;
}

Cdf1D atomic_cdf(const AtomicLaw& law) {
  validate_atomic_law(law);
  Cdf1D out;
  const AtomicLaw copy = law;
  out.cdf = [copy](double x) {
    double mass = 0.0;
    for (Eigen::Index i = 0; i < copy.size() && copy.atoms[i] <= x; ++i) {
      mass += copy.weights[i];
    }
    return mass;
  };
  out.lo = law.atoms[0];
  out.hi = law.atoms[law.atoms.size() - 1];
  out.breakpoints = law.atoms;
  return out;
}

Cdf1D convolved_cdf(const ConvolvedLaw& law) {
  validate_convolved_law(law);
  const double sd = std::sqrt(law.noise_variance);
  Cdf1D out;
  const ConvolvedLaw copy = law;
  out.cdf = [copy](double x) { return copy.cdf(x); };
  out.lo = law.base.atoms.minCoeff() - 10.0 * sd;
  out.hi = law.base.atoms.maxCoeff() + 10.0 * sd;
  return out;
}

namespace {

// Two-point Gauss-Legendre estimate on [a, b]; open rule, never touches
// the endpoints, so step discontinuities at interval boundaries are safe.
template <typename F>
double gl2(const F& f, double a, double b) {
  const double h = 0.5 * (b - a);
  const double c = 0.5 * (a + b);
  const double r = h / std::sqrt(3.0);
  return h * (f(c - r) + f(c + r));
}

struct AdaptiveState {
  double value = 0.0;
  double error = 0.0;
  long evaluations = 0;
};

// Richardson-style refinement: both estimates are O(h^5)-accurate locally,
// so |whole - halves| / 15 tracks the finer estimate's error.
template <typename F>
void adaptive_gl2(const F& f, double a, double b, double whole, double tol,
                  int depth, AdaptiveState& state) {
  const double mid = 0.5 * (a + b);
  const double left = gl2(f, a, mid);
  const double right = gl2(f, mid, b);
  const double refined = left + right;
  const double err = std::abs(refined - whole) / 15.0;
  state.evaluations += 4;
  if (depth >= 48 || err <= tol || state.evaluations > 4000000) {
    state.value += refined;
    state.error += err;
    return;
  }
  adaptive_gl2(f, a, mid, left, 0.5 * tol, depth + 1, state);
  adaptive_gl2(f, mid, b, right, 0.5 * tol, depth + 1, state);
}

template <typename F>
QuadratureResult integrate_pieces(const F& f, const std::vector<double>& cuts,
                                  double tol) {
  AdaptiveState state;
  const double pieces = static_cast<double>(cuts.size() - 1);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double a = cuts[i];
    const double b = cuts[i + 1];
    if (!(b > a)) continue;
    adaptive_gl2(f, a, b, gl2(f, a, b), tol / pieces, 0, state);
  }
  return QuadratureResult{state.value, state.error};
}

std::vector<double> merged_cuts(const Cdf1D& a, const Cdf1D& b) {
  const double lo = std::min(a.lo, b.lo);
  const double hi = std::max(a.hi, b.hi);
  if (!(hi >= lo) || !std::isfinite(lo) || !std::isfinite(hi)) {
    throw std::invalid_argument("quantile_w1: invalid integration window");
  }
  std::vector<double> cuts;
  cuts.push_back(lo);
  for (const Eigen::VectorXd* bp : {&a.breakpoints, &b.breakpoints}) {
    for (Eigen::Index i = 0; i < bp->size(); ++i) {
      if ((*bp)[i] > lo && (*bp)[i] < hi) cuts.push_back((*bp)[i]);
    }
  }
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  return cuts;
}

}  // namespace

QuadratureResult quantile_w1(const Cdf1D& a, const Cdf1D& b, double tol) {
  if (!a.cdf || !b.cdf) {
    throw std::invalid_argument("quantile_w1: missing CDF");
  }
  if (!(tol > 0.0)) {
    throw std::invalid_argument("quantile_w1: tolerance must be > 0");
  }
  const auto integrand = [&a, &b](double x) {
    return std::abs(a.cdf(x) - b.cdf(x));
  };
  const std::vector<double> cuts = merged_cuts(a, b);
  if (cuts.size() < 2) return QuadratureResult{0.0, 0.0};
  QuadratureResult result = integrate_pieces(integrand, cuts, tol);
  if (!(result.error_estimate <= std::max(tol, 1e-12 * std::abs(result.value))) ||
      !std::isfinite(result.value)) {
    throw std::runtime_error("quantile_w1: quadrature failed to converge");
  }
  return result;
}

ChiSquareResult chi_square_1d(const ConvolvedLaw& a) {
  validate_convolved_law(a);
  const double m = static_cast<double>(a.base.size());
  const double window = std::max(8.0, 4.0 * std::sqrt(m));
  const auto integrand = [&a](double x) {
    const double phi = normal_density(x, 0.0, 1.0);
    const double ratio = a.density(x) / phi - 1.0;
    return ratio * ratio * phi;
  };
  // The ratio density a^2/phi decays only when the noise variance is
  // below 2; the mixture construction keeps it in (0, 1). Still, treat a
  // rising integrand at the window edge as divergence for this window.
  const double edge = std::max(integrand(window), integrand(-window));
  const double inner = std::max(integrand(0.9 * window), integrand(-0.9 * window));
  if (!std::isfinite(edge) || (edge > 1e-6 && edge > inner)) {
    throw std::runtime_error(
        "chi_square_1d: integrand not decaying at the truncation window");
  }
  std::vector<double> cuts;
  // Atoms as quadrature cuts: the integrand peaks sharply near each when
  // the noise variance is small.
  cuts.push_back(-window);
  for (Eigen::Index i = 0; i < a.base.size(); ++i) {
    if (a.base.atoms[i] > -window && a.base.atoms[i] < window) {
      cuts.push_back(a.base.atoms[i]);
    }
  }
  cuts.push_back(window);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  const QuadratureResult quad = integrate_pieces(integrand, cuts, 1e-10);
  ChiSquareResult result;
  result.value = std::max(0.0, quad.value);
  result.quadrature_error = quad.error_estimate;
  // Beyond the window both tails fall at least like exp(-x^2/2) scaled by
  // the edge value; a unit decay length is a generous overestimate.
  result.truncation_error = edge + integrand(-window) + integrand(window);
  return result;
}

Eigen::VectorXd geometric_grid(double lo, double hi, int size) {
  if (!(lo > 0.0) || !(hi > lo) || size < 2) {
    throw std::invalid_argument("geometric_grid: need 0 < lo < hi, size >= 2");
  }
  Eigen::VectorXd grid(size);
  const double step = std::log(hi / lo) / (size - 1);
  for (int i = 0; i < size; ++i) {
    grid[i] = lo * std::exp(step * i);
  }
  grid[0] = lo;
  grid[size - 1] = hi;
  return grid;
}

std::string atomic_law_to_json_text(const AtomicLaw& law) {
  validate_atomic_law(law);
  json out;
  out["atoms"] = std::vector<double>(law.atoms.begin(), law.atoms.end());
  out["weights"] = std::vector<double>(law.weights.begin(), law.weights.end());
  return out.dump(2) + "\n";
}

AtomicLaw atomic_law_from_json_text(const std::string& text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::parse_error& err) {
    throw std::runtime_error(std::string("atomic law JSON: ") + err.what());
  }
  if (!in.is_object() || !in.contains("atoms") || !in.contains("weights")) {
    throw std::runtime_error("atomic law JSON: need object with atoms and weights");
  }
  const auto atoms = in["atoms"].get<std::vector<double>>();
  const auto weights = in["weights"].get<std::vector<double>>();
  AtomicLaw law;
  law.atoms = Eigen::Map<const Eigen::VectorXd>(atoms.data(), atoms.size());
  law.weights = Eigen::Map<const Eigen::VectorXd>(weights.data(), weights.size());
  validate_atomic_law(law);
  return law;
}

std::string convolved_law_to_json_text(const ConvolvedLaw& law) {
  validate_convolved_law(law);
  json out;
  out["base"] = json::parse(atomic_law_to_json_text(law.base));
  out["noise_variance"] = law.noise_variance;
  return out.dump(2) + "\n";
}

ConvolvedLaw convolved_law_from_json_text(const std::string& text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::parse_error& err) {
    throw std::runtime_error(std::string("convolved law JSON: ") + err.what());
  }
  if (!in.is_object() || !in.contains("base") || !in.contains("noise_variance")) {
    throw std::runtime_error(
        "convolved law JSON: need object with base and noise_variance");
  }
  ConvolvedLaw law;
  law.base = atomic_law_from_json_text(in["base"].dump());
  law.noise_variance = in["noise_variance"].get<double>();
  validate_convolved_law(law);
  return law;
}

}  // namespace spt
