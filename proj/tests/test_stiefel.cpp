#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "spt/rng.hpp"
#include "spt/stiefel.hpp"

namespace {

double ortho_residual(const spt::StiefelFrame& f) {
  return (f.rows * f.rows.transpose() -
          Eigen::MatrixXd::Identity(f.k(), f.k()))
      .norm();
}

}  // namespace

TEST_CASE("random frames are orthonormal and reproducible") {
  for (const auto [d, k] : std::vector<std::pair<int, int>>{{1, 1}, {3, 1}, {5, 3}, {4, 4}}) {
    const auto f = spt::random_frame(d, k, 77);
    CHECK(f.k() == k);
    CHECK(f.d() == d);
    CHECK(ortho_residual(f) < 1e-10);
    const auto again = spt::random_frame(d, k, 77);
    CHECK((f.rows - again.rows).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK_THROWS_AS(spt::random_frame(2, 3, 0), std::invalid_argument);
}

TEST_CASE("random unit vectors are centered on the sphere") {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  const int trials = 10000;
  for (int i = 0; i < trials; ++i)
    mean += spt::random_frame(3, 1, spt::derive_seed(5, i)).rows.row(0).transpose();
  mean /= trials;
  CHECK(mean.norm() < 0.05);
}

TEST_CASE("retraction stays on the manifold and fixes the zero step") {
  spt::Rng rng(13);
  const auto f = spt::random_frame(6, 2, 42);
  Eigen::MatrixXd tangent(2, 6);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 6; ++j) tangent(i, j) = rng.next_gaussian();

  const auto fixed = spt::retract(f, tangent, 0.0);
  CHECK((fixed.rows - f.rows).cwiseAbs().maxCoeff() < 1e-12);
  for (const double step : {1e-3, 0.1, 1.0, 10.0}) {
    const auto moved = spt::retract(f, tangent, step);
    CHECK(ortho_residual(moved) < 1e-10);
  }
}

TEST_CASE("sphere retraction is plain normalization") {
  spt::Rng rng(3);
  Eigen::MatrixXd u(1, 4), g(1, 4);
  for (int j = 0; j < 4; ++j) {
    u(0, j) = rng.next_gaussian();
    g(0, j) = rng.next_gaussian();
  }
  u /= u.norm();
  const spt::StiefelFrame f{u};
  const double step = 0.37;
  const auto moved = spt::retract(f, g, step);
  const Eigen::MatrixXd expected = (u + step * g).normalized();
  CHECK((moved.rows - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("retraction reports rank collapse") {
  Eigen::MatrixXd u(1, 2);
  u << 1.0, 0.0;
  const spt::StiefelFrame f{u};
  Eigen::MatrixXd minus = -u;
  CHECK_THROWS_AS(spt::retract(f, minus, 1.0), std::runtime_error);
}

TEST_CASE("tangent projection kills the normal component") {
  const auto f = spt::random_frame(7, 3, 99);
  // The frame itself is a pure normal direction.
  CHECK(spt::project_tangent(f, f.rows).cwiseAbs().maxCoeff() < 1e-12);

  spt::Rng rng(1);
  Eigen::MatrixXd g(3, 7);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 7; ++j) g(i, j) = rng.next_gaussian();
  const Eigen::MatrixXd xi = spt::project_tangent(f, g);
  // Tangency: xi U^T + U xi^T = 0.
  const Eigen::MatrixXd skew = xi * f.rows.transpose() + f.rows * xi.transpose();
  CHECK(skew.cwiseAbs().maxCoeff() < 1e-9);
  // Idempotence.
  CHECK((spt::project_tangent(f, xi) - xi).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("sphere tangent projection matches the closed form") {
  spt::Rng rng(8);
  Eigen::MatrixXd u(1, 5), g(1, 5);
  for (int j = 0; j < 5; ++j) {
    u(0, j) = rng.next_gaussian();
    g(0, j) = rng.next_gaussian();
  }
  u /= u.norm();
  const Eigen::MatrixXd xi = spt::project_tangent({u}, g);
  const Eigen::MatrixXd expected = g - (u * g.transpose())(0, 0) * u;
  CHECK((xi - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("net on the 0-sphere is the antipodal pair") {
  const auto net = spt::epsilon_net(1, 1, 0.5);
  REQUIRE(net.size() == 2);
  CHECK(std::abs(std::abs(net[0].rows(0, 0)) - 1.0) < 1e-12);
  CHECK(net[0].rows(0, 0) == -net[1].rows(0, 0));
}

TEST_CASE("net on the circle is an even angular grid") {
  const double eps = 0.1;
  const auto net = spt::epsilon_net(2, 1, eps);
  const double max_gap = 2.0 * std::asin(eps / 2.0);
  const int expected = static_cast<int>(std::ceil(2.0 * std::numbers::pi / max_gap));
  CHECK(net.size() == static_cast<size_t>(expected));
  for (const auto& f : net) CHECK(std::abs(f.rows.norm() - 1.0) < 1e-12);
  // Neighboring chord length stays below eps.
  double worst = 0.0;
  for (size_t i = 0; i < net.size(); ++i) {
    double nearest = 1e300;
    for (size_t j = 0; j < net.size(); ++j) {
      if (i == j) continue;
      nearest = std::min(nearest, (net[i].rows - net[j].rows).norm());
    }
    worst = std::max(worst, nearest);
  }
  CHECK(worst <= eps + 1e-12);
}

TEST_CASE("sampled covering of the 2-sphere") {
  const double eps = 0.2;
  const auto net = spt::epsilon_net(3, 1, eps);
  REQUIRE(net.size() > 10);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto u = spt::random_frame(3, 1, spt::derive_seed(321, trial));
    double best = 1e300;
    for (const auto& v : net) best = std::min(best, (u.rows - v.rows).norm());
    worst = std::max(worst, best);
  }
  CHECK(worst <= eps);
}

TEST_CASE("sampled covering of two-frames in operator norm") {
  const double eps = 0.9;
  const auto net = spt::epsilon_net(3, 2, eps, 2000000);
  REQUIRE(net.size() > 10);
  for (size_t i = 0; i < net.size(); i += 97) CHECK(ortho_residual(net[i]) < 1e-10);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto u = spt::random_frame(3, 2, spt::derive_seed(654, trial));
    double best = 1e300;
    for (const auto& v : net) {
      const double dist = (u.rows - v.rows).jacobiSvd().singularValues().maxCoeff();
      best = std::min(best, dist);
      if (best <= eps) break;
    }
    worst = std::max(worst, best);
  }
  CHECK(worst <= eps);
}

TEST_CASE("net size cap raises a descriptive error") {
  try {
    spt::epsilon_net(6, 3, 0.01, 1000);
    FAIL("expected a size error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cap") != std::string::npos);
    CHECK(msg.find("entropy") != std::string::npos);
  }
}

TEST_CASE("minimal angle basics") {
  Eigen::MatrixXd e1(1, 3), e2(1, 3);
  e1 << 1, 0, 0;
  e2 << 0, 1, 0;
  CHECK(spt::minimal_angle({e1}, {e1}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(spt::minimal_angle({e1}, {e2}) ==
        doctest::Approx(std::numbers::pi / 2).epsilon(1e-12));

  const double theta = 0.3;
  Eigen::MatrixXd rot(1, 3);
  rot << std::cos(theta), std::sin(theta), 0.0;
  CHECK(spt::minimal_angle({e1}, {rot}) == doctest::Approx(theta).epsilon(1e-12));
  CHECK(spt::sin_squared_angle({e1}, {rot}) ==
        doctest::Approx(std::sin(theta) * std::sin(theta)).epsilon(1e-12));
}

TEST_CASE("minimal angle is symmetric and basis independent") {
  spt::Rng rng(17);
  const auto u = spt::random_frame(5, 2, 1);
  const auto v = spt::random_frame(5, 2, 2);
  const double a = spt::minimal_angle(u, v);
  CHECK(std::abs(a - spt::minimal_angle(v, u)) < 1e-12);

  // Rotate the basis of u within its own span.
  const double t = 1.1;
  Eigen::Matrix2d q;
  q << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  const spt::StiefelFrame u2{q * u.rows};
  CHECK(std::abs(spt::minimal_angle(u2, v) - a) < 1e-9);

  // Unit-vector case reduces to the absolute inner product.
  const auto x = spt::random_frame(4, 1, 3);
  const auto y = spt::random_frame(4, 1, 4);
  const double dot = std::abs((x.rows * y.rows.transpose())(0, 0));
  CHECK(spt::minimal_angle(x, y) ==
        doctest::Approx(std::acos(std::min(1.0, dot))).epsilon(1e-12));
}

TEST_CASE("frame json round trip") {
  const auto f = spt::random_frame(4, 2, 2026);
  const auto text = spt::frame_to_json_text(f);
  const auto back = spt::frame_from_json_text(text);
  CHECK((back.rows - f.rows).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(spt::frame_from_json_text("{"), std::runtime_error);
  CHECK_THROWS_AS(spt::frame_from_json_text("[[0.5,0.5]]"), std::invalid_argument);
}
