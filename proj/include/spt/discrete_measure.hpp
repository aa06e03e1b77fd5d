#pragma once

#include <Eigen/Core>
#include <string>

namespace spt {

// Finitely supported probability measure on R^d: one atom per row of
// `points`, weights on the simplex. Weights must be nonnegative and sum to 1
// within 1e-12 (compensated sum); construction through make_measure or any
// library routine validates this.
struct DiscreteMeasure {
  Eigen::MatrixXd points;   // n x d
  Eigen::VectorXd weights;  // n, nonnegative, sums to 1

  Eigen::Index n() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

inline constexpr double kWeightSumTol = 1e-12;

// Throws std::invalid_argument on empty support, dimension mismatch,
// negative weight, non-finite entries, or weight sum off by more than tol.
void validate_measure(const DiscreteMeasure& mu, double tol = kWeightSumTol);

DiscreteMeasure make_measure(Eigen::MatrixXd points, Eigen::VectorXd weights);

// Uniform weights 1/n on the given points.
DiscreteMeasure uniform_measure(Eigen::MatrixXd points);

DiscreteMeasure dirac_measure(const Eigen::VectorXd& point);

// CSV with header "w,x1,...,xd"; one atom per row.
DiscreteMeasure read_measure_csv(const std::string& path);
void write_measure_csv(const DiscreteMeasure& mu, const std::string& path);

// JSON object {"points": [[...], ...], "weights": [...]}.
DiscreteMeasure measure_from_json_text(const std::string& text);
std::string measure_to_json_text(const DiscreteMeasure& mu);
DiscreteMeasure read_measure_json(const std::string& path);
void write_measure_json(const DiscreteMeasure& mu, const std::string& path);

// Dispatch on file extension: ".csv" or ".json".
DiscreteMeasure read_measure(const std::string& path);

}  // namespace spt
