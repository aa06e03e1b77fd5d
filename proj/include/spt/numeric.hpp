#pragma once

#include <Eigen/Core>
#include <cmath>

namespace spt {

// Compensated (Kahan) sum; keeps simplex/marginal checks meaningful for
// weight vectors with 1e5+ entries where a naive sum drifts past 1e-12.
inline double kahan_sum(const Eigen::Ref<const Eigen::VectorXd>& v) {
  double sum = 0.0, carry = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double y = v[i] - carry;
    const double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  return sum;
}

class KahanAccumulator {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// dist^p with a hard branch at zero so fractional p never sees log(0).
inline double pow_dist(double dist, double p) {
  if (dist <= 0.0) return 0.0;
  if (p == 1.0) return dist;
  if (p == 2.0) return dist * dist;
  return std::exp(p * std::log(dist));
}

// s^(1/p) for s >= 0, same zero branch as pow_dist.
inline double root_p(double s, double p) {
  if (s <= 0.0) return 0.0;
  if (p == 1.0) return s;
  if (p == 2.0) return std::sqrt(s);
  return std::exp(std::log(s) / p);
}

}  // namespace spt
