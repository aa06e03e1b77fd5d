#include <doctest.h>

#include <cmath>

#include "lp_detail.hpp"
#include "spt/laws.hpp"

namespace {

double mean_inverse(const spt::AtomicLaw& law) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < law.size(); ++i) {
    s += law.weights[i] / law.atoms[i];
  }
  return s;
}

}  // namespace

TEST_CASE("dense simplex solves small programs") {
  // max x + y on the segment x + y = 1.
  Eigen::MatrixXd a(1, 2);
  a << 1.0, 1.0;
  Eigen::VectorXd b = Eigen::VectorXd::Ones(1);
  Eigen::VectorXd c(2);
  c << 1.0, 1.0;
  auto r = spt::detail::solve_lp(a, b, c);
  CHECK(r.feasible);
  CHECK(r.bounded);
  CHECK(r.objective == doctest::Approx(1.0).epsilon(1e-12));

  // max 3x + y with x + 2y = 2: optimum puts everything on x.
  c << 3.0, 1.0;
  a << 1.0, 2.0;
  b << 2.0;
  r = spt::detail::solve_lp(a, b, c);
  CHECK(r.objective == doctest::Approx(6.0).epsilon(1e-12));
  CHECK(r.x[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.x[1] == doctest::Approx(0.0));

  // Negative right-hand side is handled by row reflection.
  a << -1.0, -2.0;
  b << -2.0;
  r = spt::detail::solve_lp(a, b, c);
  CHECK(r.feasible);
  CHECK(r.objective == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("dense simplex flags infeasible and unbounded programs") {
  // x1 + x2 = -1 has no nonnegative solution.
  Eigen::MatrixXd a(1, 2);
  a << 1.0, 1.0;
  Eigen::VectorXd b(1);
  b << -1.0;
  Eigen::VectorXd c = Eigen::VectorXd::Ones(2);
  auto r = spt::detail::solve_lp(a, b, c);
  CHECK_FALSE(r.feasible);

  // y = 1 leaves x free to grow.
  a << 0.0, 1.0;
  b << 1.0;
  c << 1.0, 0.0;
  r = spt::detail::solve_lp(a, b, c);
  CHECK(r.feasible);
  CHECK_FALSE(r.bounded);

  // Redundant duplicate rows collapse to one constraint.
  Eigen::MatrixXd a2(2, 2);
  a2 << 1.0, 1.0, 1.0, 1.0;
  Eigen::VectorXd b2 = Eigen::VectorXd::Ones(2);
  c << 2.0, 1.0;
  r = spt::detail::solve_lp(a2, b2, c);
  CHECK(r.feasible);
  CHECK(r.bounded);
  CHECK(r.objective == doctest::Approx(2.0).epsilon(1e-12));

  CHECK_THROWS_AS(
      spt::detail::solve_lp(a2, Eigen::VectorXd::Ones(3), c),
      std::invalid_argument);
}

TEST_CASE("extremal pair on the two-point grid is the hand solution") {
  Eigen::VectorXd grid(2);
  grid << 1.0, 16.0;
  const spt::ExtremalPair pair = spt::extremal_pair_lp(1, grid);
  REQUIRE(pair.x.size() == 1);
  REQUIRE(pair.x_prime.size() == 1);
  CHECK(pair.x.atoms[0] == 1.0);
  CHECK(pair.x_prime.atoms[0] == 16.0);
  CHECK(pair.x.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(pair.objective == doctest::Approx(15.0 / 16.0).epsilon(1e-10));
  CHECK(pair.warning.empty());
}

TEST_CASE("extremal pair matches moments and clears the gap target") {
  for (const int order : {1, 2, 3}) {
    CAPTURE(order);
    const spt::ExtremalPair pair = spt::extremal_pair_lp(order);
    const double hi = 16.0 * order * order;
    CHECK(pair.x.atoms.minCoeff() >= 1.0);
    CHECK(pair.x.atoms.maxCoeff() <= hi);
    CHECK(pair.x_prime.atoms.minCoeff() >= 1.0);
    CHECK(pair.x_prime.atoms.maxCoeff() <= hi);
    // Independent moment oracle on the returned laws.
    const Eigen::VectorXd mx = spt::law_moments(pair.x, order - 1);
    const Eigen::VectorXd mxp = spt::law_moments(pair.x_prime, order - 1);
    for (int j = 0; j < order; ++j) {
      CAPTURE(j);
      CHECK(std::abs(mx[j] - mxp[j]) <= 1e-8 * std::max(1.0, std::abs(mx[j])));
    }
    CHECK(pair.objective ==
          doctest::Approx(mean_inverse(pair.x) - mean_inverse(pair.x_prime))
              .epsilon(1e-12));
    // The default 512-point grid reaches the 1/2 gap for these orders.
    CHECK(pair.objective >= 0.5);
    CHECK(pair.warning.empty());
  }
}

TEST_CASE("extremal objective shrinks as the matched order grows") {
  const Eigen::VectorXd grid = spt::geometric_grid(1.0, 16.0, 128);
  double prev = 1.0;
  for (const int order : {1, 2, 3}) {
    CAPTURE(order);
    const spt::ExtremalPair pair = spt::extremal_pair_lp(order, grid);
    CHECK(pair.objective <= prev + 1e-12);
    prev = pair.objective;
  }
  // Three matched moments on a grid capped at 16 cannot reach the target.
  const spt::ExtremalPair tight = spt::extremal_pair_lp(3, grid);
  CHECK(tight.objective < 0.5);
  CHECK_FALSE(tight.warning.empty());
  CHECK(tight.warning.find("1/2") != std::string::npos);
}

TEST_CASE("extremal pair rejects malformed grids") {
  Eigen::VectorXd grid = spt::geometric_grid(1.0, 16.0, 8);
  CHECK_THROWS_AS(spt::extremal_pair_lp(0, grid), std::invalid_argument);
  CHECK_THROWS_AS(spt::extremal_pair_lp(1, grid.head(1)), std::invalid_argument);
  CHECK_THROWS_AS(spt::extremal_pair_lp(3, grid.head(2)), std::invalid_argument);

  Eigen::VectorXd unsorted = grid;
  std::swap(unsorted[2], unsorted[3]);
  CHECK_THROWS_AS(spt::extremal_pair_lp(1, unsorted), std::invalid_argument);

  Eigen::VectorXd low = grid;
  low[0] = 0.5;
  CHECK_THROWS_AS(spt::extremal_pair_lp(1, low), std::invalid_argument);

  Eigen::VectorXd high = spt::geometric_grid(1.0, 32.0, 8);
  CHECK_THROWS_AS(spt::extremal_pair_lp(1, high), std::invalid_argument);
}

TEST_CASE("prior construction reproduces the exact rational oracle") {
  // Inputs: the L=1 hand solution, point masses at 1 and 16, eps = 1/6.
  // Rescaling puts the atoms at 6 and 96; every derived quantity below is
  // an exact rational evaluated by hand.
  spt::AtomicLaw x{Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Ones(1)};
  spt::AtomicLaw xp{Eigen::VectorXd::Constant(1, 16.0), Eigen::VectorXd::Ones(1)};
  const spt::PriorPair pair = spt::build_priors(x, xp, 1.0 / 6.0, 1);

  CHECK(pair.delta_eps == doctest::Approx(1.0 / 20.0).epsilon(1e-14));
  CHECK(pair.delta_eps_prime == doctest::Approx(1.0 / 8930.0).epsilon(1e-14));
  CHECK(pair.z_eps == doctest::Approx(91.0 / 380.0).epsilon(1e-14));

  REQUIRE(pair.y.size() == 2);
  CHECK(pair.y.atoms[0] == 1.0);
  CHECK(pair.y.atoms[1] == doctest::Approx(6.0).epsilon(1e-14));
  CHECK(pair.y.weights[0] == doctest::Approx(72.0 / 91.0).epsilon(1e-14));
  CHECK(pair.y.weights[1] == doctest::Approx(19.0 / 91.0).epsilon(1e-14));

  REQUIRE(pair.y_prime.size() == 2);
  CHECK(pair.y_prime.atoms[0] == 2.0);
  CHECK(pair.y_prime.atoms[1] == doctest::Approx(96.0).epsilon(1e-14));
  CHECK(pair.y_prime.weights[0] ==
        doctest::Approx(81225.0 / 81263.0).epsilon(1e-14));
  CHECK(pair.y_prime.weights[1] ==
        doctest::Approx(38.0 / 81263.0).epsilon(1e-14));

  // Means cancel exactly: both equal 186/91.
  const double ey = spt::law_moments(pair.y, 1)[1];
  const double eyp = spt::law_moments(pair.y_prime, 1)[1];
  CHECK(ey == doctest::Approx(186.0 / 91.0).epsilon(1e-14));
  CHECK(std::abs(ey - eyp) <= 1e-10);
}

TEST_CASE("prior construction validates its contract across orders") {
  for (const int order : {1, 2, 3}) {
    const spt::ExtremalPair pair = spt::extremal_pair_lp(order);
    REQUIRE(pair.objective >= 0.5);
    for (const double eps : {1.0 / 6.0, 1.0 / 12.0}) {
      CAPTURE(order);
      CAPTURE(eps);
      const spt::PriorPair priors =
          spt::build_priors(pair.x, pair.x_prime, eps, order);

      // Bullet 1: matching moments below the order.
      const Eigen::VectorXd my = spt::law_moments(priors.y, order - 1);
      const Eigen::VectorXd myp = spt::law_moments(priors.y_prime, order - 1);
      for (int j = 0; j < order; ++j) {
        CHECK(std::abs(my[j] - myp[j]) <=
              1e-8 * std::max(1.0, std::abs(my[j])));
      }
      // Bullet 2: supports inside [1, 16 L^2 / eps].
      CHECK(priors.y.atoms.minCoeff() >= 1.0);
      CHECK(priors.y.atoms.maxCoeff() <= 16.0 * order * order / eps + 1e-9);
      CHECK(priors.y_prime.atoms.minCoeff() >= 1.0);
      CHECK(priors.y_prime.atoms.maxCoeff() <=
            16.0 * order * order / eps + 1e-9);
      // Bullet 3: equal means bounded by 6.
      const double ey = spt::law_moments(priors.y, 1)[1];
      CHECK(std::abs(ey - spt::law_moments(priors.y_prime, 1)[1]) <= 1e-10);
      CHECK(ey <= 6.0 + 1e-9);
      // Bullet 4: inverse moments split across 1 - 6 eps and 1/2.
      CHECK(mean_inverse(priors.y) >= 1.0 - 6.0 * eps - 1e-9);
      CHECK(mean_inverse(priors.y_prime) <= 0.5 + 1e-12);

      // Normalizer floor and kernel-mass caps.
      CHECK(priors.z_eps >= 0.3 * eps);
      CHECK(priors.delta_eps >= 0.0);
      CHECK(priors.delta_eps <= 1.8 * eps * eps + 1e-12);
      CHECK(priors.delta_eps_prime >= 0.0);
      CHECK(priors.delta_eps_prime <= 1.8 * eps * eps + 1e-12);
    }
  }
}

TEST_CASE("prior construction rejects inputs off the contract") {
  spt::AtomicLaw x{Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Ones(1)};
  spt::AtomicLaw xp{Eigen::VectorXd::Constant(1, 16.0), Eigen::VectorXd::Ones(1)};

  CHECK_THROWS_AS(spt::build_priors(x, xp, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(spt::build_priors(x, xp, 0.2, 1), std::invalid_argument);
  CHECK_THROWS_AS(spt::build_priors(x, xp, 1.0 / 6.0, 0), std::invalid_argument);

  // Identical inputs have zero inverse-moment gap.
  CHECK_THROWS_AS(spt::build_priors(x, x, 1.0 / 6.0, 1), std::invalid_argument);

  // Support dipping below 1.
  spt::AtomicLaw low{Eigen::VectorXd::Constant(1, 0.5),
                     Eigen::VectorXd::Ones(1)};
  CHECK_THROWS_AS(spt::build_priors(low, xp, 1.0 / 6.0, 1),
                  std::invalid_argument);

  // Mismatched means at order 2.
  spt::AtomicLaw shifted{Eigen::VectorXd::Constant(1, 4.0),
                         Eigen::VectorXd::Ones(1)};
  CHECK_THROWS_AS(spt::build_priors(x, shifted, 1.0 / 6.0, 2),
                  std::invalid_argument);
}
