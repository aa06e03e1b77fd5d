#include "spt/stiefel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>
#include <json.hpp>

#include "spt/rng.hpp"

namespace spt {

void validate_frame(const StiefelFrame& frame, double tol) {
  const auto k = frame.k(), d = frame.d();
  if (k < 1 || k > d)
    throw std::invalid_argument("StiefelFrame: need 1 <= k <= d");
  if (!frame.rows.allFinite())
    throw std::invalid_argument("StiefelFrame: nonfinite entry");
  const double residual =
      (frame.rows * frame.rows.transpose() - Eigen::MatrixXd::Identity(k, k)).norm();
  if (!(residual <= tol))
    throw std::invalid_argument("StiefelFrame: rows are not orthonormal (residual " +
                                std::to_string(residual) + ")");
}

namespace {

// Thin QR with the R diagonal forced positive, so the Q factor of an already
// orthonormal input is the input itself and the map is deterministic.
// Columns of the returned matrix are orthonormal.
Eigen::MatrixXd signed_qr_q(const Eigen::MatrixXd& a) {
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(a.rows(), a.cols());
  const Eigen::MatrixXd r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  const double scale = a.norm();
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double rjj = r(j, j);
    if (std::abs(rjj) <= 1e-13 * (1.0 + scale))
      throw std::runtime_error("retraction failed: rank collapse");
    if (rjj < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

// Orthonormal frame nearest to the rows of a in every unitarily invariant
// norm: the polar factor from the thin SVD.
Eigen::MatrixXd polar_rows(const Eigen::MatrixXd& a) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return svd.matrixU() * svd.matrixV().transpose();
}

// Unit vectors with chordal resolution delta: every unit vector of R^d lies
// within Euclidean distance delta of some element.
// Element count of sphere_net(d, delta) without materializing it.
double sphere_net_count(int d, double delta) {
  if (d == 1) return 2.0;
  if (d == 2) {
    const double t = 2.0 * std::asin(std::min(1.0, delta / 2.0));
    return std::ceil(2.0 * std::numbers::pi / t);
  }
  const double h = delta / std::sqrt(static_cast<double>(d - 1));
  const double steps = std::max(1.0, std::ceil(2.0 / h));
  return 2.0 * d * std::pow(steps, d - 1);
}

std::vector<Eigen::VectorXd> sphere_net(int d, double delta) {
  std::vector<Eigen::VectorXd> net;
  if (d == 1) {
    Eigen::VectorXd v(1);
    v << 1.0;
    net.push_back(v);
    v << -1.0;
    net.push_back(v);
    return net;
  }
  if (d == 2) {
    // Chord between neighbors at angular spacing t is 2 sin(t/2) <= delta.
    const double t = 2.0 * std::asin(std::min(1.0, delta / 2.0));
    const int count = static_cast<int>(std::ceil(2.0 * std::numbers::pi / t));
    for (int i = 0; i < count; ++i) {
      const double a = 2.0 * std::numbers::pi * i / count;
      Eigen::VectorXd v(2);
      v << std::cos(a), std::sin(a);
      net.push_back(v);
    }
    return net;
  }
  // Lattice on the surface of the cube [-1,1]^d, projected radially. A unit
  // vector scaled onto the cube lands on some face within h/2 per free
  // coordinate, and projection back is 2-Lipschitz there, so pitch
  // h = delta / sqrt(d - 1) gives chordal resolution delta.
  const double h = delta / std::sqrt(static_cast<double>(d - 1));
  const int steps = std::max(1, static_cast<int>(std::ceil(2.0 / h)));
  std::vector<int> idx(static_cast<size_t>(d - 1), 0);
  for (int axis = 0; axis < d; ++axis) {
    for (const double face : {-1.0, 1.0}) {
      std::fill(idx.begin(), idx.end(), 0);
      while (true) {
        Eigen::VectorXd v(d);
        int t = 0;
        for (int j = 0; j < d; ++j) {
          if (j == axis)
            v[j] = face;
          else
            v[j] = -1.0 + 2.0 * (idx[t++] + 0.5) / steps;
        }
        net.push_back(v.normalized());
        int carry = d - 2;
        while (carry >= 0 && ++idx[carry] == steps) idx[carry--] = 0;
        if (carry < 0) break;
      }
    }
  }
  return net;
}

std::string frame_key(const Eigen::MatrixXd& rows) {
  std::string key;
  key.reserve(static_cast<size_t>(rows.size()) * 8);
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      const auto q = static_cast<long long>(std::llround(rows(i, j) * 1e6));
      key.append(reinterpret_cast<const char*>(&q), sizeof(q));
    }
  return key;
}

}  // namespace

StiefelFrame random_frame(int d, int k, std::uint64_t seed) {
  if (k < 1 || k > d) throw std::invalid_argument("random_frame: need 1 <= k <= d");
  Rng rng(seed);
  Eigen::MatrixXd g(d, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < d; ++i) g(i, j) = rng.next_gaussian();
  return {signed_qr_q(g).transpose()};
}

StiefelFrame retract(const StiefelFrame& frame, const Eigen::MatrixXd& tangent, double step) {
  validate_frame(frame);
  if (tangent.rows() != frame.k() || tangent.cols() != frame.d())
    throw std::invalid_argument("retract: tangent shape mismatch");
  const Eigen::MatrixXd moved = frame.rows + step * tangent;
  return {signed_qr_q(moved.transpose()).transpose()};
}

Eigen::MatrixXd project_tangent(const StiefelFrame& frame, const Eigen::MatrixXd& ambient_grad) {
  if (ambient_grad.rows() != frame.k() || ambient_grad.cols() != frame.d())
    throw std::invalid_argument("project_tangent: gradient shape mismatch");
  const Eigen::MatrixXd ug = frame.rows * ambient_grad.transpose();
  const Eigen::MatrixXd sym = 0.5 * (ug + ug.transpose());
  return ambient_grad - sym * frame.rows;
}

std::vector<StiefelFrame> epsilon_net(int d, int k, double eps, std::size_t max_size) {
  if (k < 1 || k > d) throw std::invalid_argument("epsilon_net: need 1 <= k <= d");
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon_net: eps must be in (0, 1]");

  // Row resolution: the polar projection of a row-wise snapped frame at most
  // doubles the error, so delta = eps / (2 sqrt(k)) covers at operator eps.
  // For k = 1 no re-orthonormalization happens and delta = eps suffices.
  const double delta = k == 1 ? eps : eps / (2.0 * std::sqrt(static_cast<double>(k)));
  const double projected = std::pow(sphere_net_count(d, delta), k);
  if (!(projected <= static_cast<double>(max_size))) {
    const double entropy =
        d * k * std::log(9.0 * std::sqrt(static_cast<double>(k)) / eps);
    throw std::runtime_error(
        "epsilon_net: size " + std::to_string(projected) + " exceeds cap " +
        std::to_string(max_size) + " (metric entropy scale d*k*log(9*sqrt(k)/eps) = " +
        std::to_string(entropy) + ")");
  }

  const auto rows = sphere_net(d, delta);
  std::vector<StiefelFrame> net;
  std::set<std::string> seen;
  std::vector<size_t> pick(static_cast<size_t>(k), 0);
  while (true) {
    Eigen::MatrixXd cand(k, d);
    for (int j = 0; j < k; ++j) cand.row(j) = rows[pick[static_cast<size_t>(j)]].transpose();
    bool usable = true;
    Eigen::MatrixXd ortho;
    if (k == 1) {
      ortho = cand;
    } else {
      const Eigen::JacobiSVD<Eigen::MatrixXd> svd(cand);
      // Rows too close to parallel cannot approximate any frame; skip them.
      usable = svd.singularValues().minCoeff() > 1e-9;
      if (usable) ortho = polar_rows(cand);
    }
    if (usable) {
      const auto key = frame_key(ortho);
      if (seen.insert(key).second) {
        net.push_back({ortho});
      }
    }
    int carry = k - 1;
    while (carry >= 0 && ++pick[static_cast<size_t>(carry)] == rows.size())
      pick[static_cast<size_t>(carry--)] = 0;
    if (carry < 0) break;
  }
  return net;
}

double minimal_angle(const StiefelFrame& u1, const StiefelFrame& u2) {
  validate_frame(u1);
  validate_frame(u2);
  if (u1.d() != u2.d()) throw std::invalid_argument("minimal_angle: ambient dimension mismatch");
  const Eigen::MatrixXd prod = u1.rows * u2.rows.transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(prod);
  const double sigma = std::clamp(svd.singularValues().maxCoeff(), 0.0, 1.0);
  return std::acos(sigma);
}

double sin_squared_angle(const StiefelFrame& u1, const StiefelFrame& u2) {
  const double s = std::sin(minimal_angle(u1, u2));
  return s * s;
}

std::string frame_to_json_text(const StiefelFrame& frame) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < frame.k(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < frame.d(); ++j) row.push_back(frame.rows(i, j));
    rows.push_back(std::move(row));
  }
  return rows.dump();
}

StiefelFrame frame_from_json_text(const std::string& text) {
  nlohmann::json rows;
  try {
    rows = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("frame json: ") + e.what());
  }
  if (!rows.is_array() || rows.empty() || !rows[0].is_array() || rows[0].empty())
    throw std::runtime_error("frame json: need a nonempty array of rows");
  const auto k = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows[0].size());
  StiefelFrame frame{Eigen::MatrixXd(k, d)};
  for (Eigen::Index i = 0; i < k; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != d)
      throw std::runtime_error("frame json: ragged rows");
    for (Eigen::Index j = 0; j < d; ++j) frame.rows(i, j) = rows[i][static_cast<size_t>(j)].get<double>();
  }
  validate_frame(frame, 1e-8);
  return frame;
}

}  // namespace spt
