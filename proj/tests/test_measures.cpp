#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <Eigen/Dense>

#include "spt/discrete_measure.hpp"
#include "spt/rng.hpp"

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("measure validation rejects malformed inputs") {
  Eigen::MatrixXd pts(2, 1);
  pts << 0.0, 1.0;
  Eigen::VectorXd w(2);

  w << 0.5, 0.5;
  CHECK_NOTHROW(spt::make_measure(pts, w));

  w << 0.7, 0.4;
  CHECK_THROWS_AS(spt::make_measure(pts, w), std::invalid_argument);

  w << -0.1, 1.1;
  CHECK_THROWS_AS(spt::make_measure(pts, w), std::invalid_argument);

  w << 0.5, std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(spt::make_measure(pts, w), std::invalid_argument);

  Eigen::VectorXd w3(3);
  w3 << 0.3, 0.3, 0.4;
  CHECK_THROWS_AS(spt::make_measure(pts, w3), std::invalid_argument);

  Eigen::MatrixXd empty(0, 1);
  Eigen::VectorXd w0(0);
  CHECK_THROWS_AS(spt::make_measure(empty, w0), std::invalid_argument);

  Eigen::MatrixXd bad(1, 1);
  bad << std::numeric_limits<double>::infinity();
  Eigen::VectorXd w1(1);
  w1 << 1.0;
  CHECK_THROWS_AS(spt::make_measure(bad, w1), std::invalid_argument);
}

TEST_CASE("weight normalisation check uses compensated summation") {
  // 1e5 equal weights stress the tolerance: a naive sum drifts by more
  // than 1e-12 while the compensated sum stays exact.
  const int n = 100000;
  Eigen::MatrixXd pts = Eigen::MatrixXd::Zero(n, 1);
  for (int i = 0; i < n; ++i) pts(i, 0) = i;
  Eigen::VectorXd w = Eigen::VectorXd::Constant(n, 1.0 / n);
  CHECK_NOTHROW(spt::make_measure(pts, w));
}

TEST_CASE("uniform and dirac constructors") {
  Eigen::MatrixXd pts(3, 2);
  pts << 0, 0, 1, 0, 0, 1;
  const auto mu = spt::uniform_measure(pts);
  CHECK(mu.n() == 3);
  CHECK(mu.dim() == 2);
  CHECK(mu.weights[0] == doctest::Approx(1.0 / 3).epsilon(1e-15));

  Eigen::VectorXd x(2);
  x << 3.0, -4.0;
  const auto delta = spt::dirac_measure(x);
  CHECK(delta.n() == 1);
  CHECK(delta.weights[0] == 1.0);
  CHECK(delta.points(0, 1) == -4.0);
}

TEST_CASE("csv round trip preserves every bit") {
  spt::Rng rng(99);
  Eigen::MatrixXd pts(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) pts(i, j) = rng.next_gaussian();
  Eigen::VectorXd w(5);
  for (int i = 0; i < 5; ++i) w[i] = rng.next_double() + 0.1;
  w /= w.sum();
  w[4] = 1.0 - w.head(4).sum();
  const auto mu = spt::make_measure(pts, w);

  const auto path = temp_file("spt_roundtrip.csv");
  spt::write_measure_csv(mu, path.string());
  const auto back = spt::read_measure_csv(path.string());
  CHECK(back.n() == mu.n());
  CHECK(back.dim() == mu.dim());
  CHECK((back.points - mu.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.weights - mu.weights).cwiseAbs().maxCoeff() == 0.0);

  // Writing the parsed measure again yields byte-identical output.
  const auto path2 = temp_file("spt_roundtrip2.csv");
  spt::write_measure_csv(back, path2.string());
  std::ifstream f1(path), f2(path2);
  const std::string s1((std::istreambuf_iterator<char>(f1)), {});
  const std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST_CASE("csv reader reports malformed files with line numbers") {
  const auto path = temp_file("spt_bad.csv");
  {
    std::ofstream out(path);
    out << "w,x1\n0.5,0.0\n0.5,zebra\n";
  }
  try {
    spt::read_measure_csv(path.string());
    FAIL("expected a parse error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find(":3") != std::string::npos);
  }
  {
    std::ofstream out(path);
    out << "weight,x1\n1.0,0.0\n";
  }
  CHECK_THROWS_AS(spt::read_measure_csv(path.string()), std::runtime_error);
  {
    std::ofstream out(path);
    out << "w,x1\n1.0\n";
  }
  CHECK_THROWS_AS(spt::read_measure_csv(path.string()), std::runtime_error);
  std::filesystem::remove(path);
}

TEST_CASE("json round trip preserves every bit") {
  spt::Rng rng(123);
  Eigen::MatrixXd pts(4, 2);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 2; ++j) pts(i, j) = rng.next_gaussian() * 1e-3;
  Eigen::VectorXd w(4);
  w << 0.25, 0.25, 0.25, 0.25;
  const auto mu = spt::make_measure(pts, w);

  const auto text = spt::measure_to_json_text(mu);
  const auto back = spt::measure_from_json_text(text);
  CHECK((back.points - mu.points).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.weights - mu.weights).cwiseAbs().maxCoeff() == 0.0);

  const auto path = temp_file("spt_roundtrip.json");
  spt::write_measure_json(mu, path.string());
  const auto from_disk = spt::read_measure_json(path.string());
  CHECK((from_disk.points - mu.points).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("read_measure dispatches on extension") {
  Eigen::MatrixXd pts(1, 1);
  pts << 2.5;
  Eigen::VectorXd w(1);
  w << 1.0;
  const auto mu = spt::make_measure(pts, w);
  const auto csv = temp_file("spt_dispatch.csv");
  const auto json = temp_file("spt_dispatch.json");
  spt::write_measure_csv(mu, csv.string());
  spt::write_measure_json(mu, json.string());
  CHECK(spt::read_measure(csv.string()).points(0, 0) == 2.5);
  CHECK(spt::read_measure(json.string()).points(0, 0) == 2.5);
  CHECK_THROWS_AS(spt::read_measure("measure.xml"), std::runtime_error);
  std::filesystem::remove(csv);
  std::filesystem::remove(json);
}
