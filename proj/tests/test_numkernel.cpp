#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles/oracles.hpp"
#include "sisda/numkernel.hpp"
#include "sisda/truncated_normal.hpp"

using namespace sisda;

namespace {

Matrix random_matrix(std::mt19937_64& rng, int r, int c) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("rss examples") {
  Matrix e1(2, 1);
  e1 << 1, 0;
  CHECK(rss(vec({1, 2}), e1) == doctest::Approx(4.0));

  std::mt19937_64 rng(3);
  const Matrix X = random_matrix(rng, 6, 2);
  CHECK(rss(X * vec({0.5, -1.5}), X) == doctest::Approx(0.0).epsilon(1e-12));

  Matrix c(3, 1);
  c << 1, 2, 3;
  const double expected = oracle::rss_normal_equations(vec({1, 1, 1}), c);
  CHECK(expected == doctest::Approx(3.0 - 36.0 / 14.0));
  CHECK(rss(vec({1, 1, 1}), c) == doctest::Approx(0.4285714).epsilon(1e-6));
  CHECK(rss(vec({1, 1, 1}), c) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("rss rejects a rank-deficient design and names the columns") {
  Matrix X(4, 2);
  X << 1, 2, 2, 4, 3, 6, 4, 8;
  try {
    rss(vec({1, 2, 3, 4}), X, {1, 3});
    FAIL("expected a rank-deficiency error");
  } catch (const RankDeficiencyError& e) {
    CHECK(e.columns() == FeatureSet{1, 3});
    CHECK(std::string(e.what()).find("{1,3}") != std::string::npos);
  }
  Matrix wide(1, 2);
  wide << 1, 1;
  CHECK_THROWS_AS(rss(vec({1}), wide), RankDeficiencyError);
}

TEST_CASE("residual_operator examples") {
  CHECK(residual_operator(Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(residual_operator(Matrix(4, 0)).isApprox(Matrix::Identity(4, 4)));
  Matrix ones(2, 1);
  ones << 1, 1;
  Matrix expected(2, 2);
  expected << 0.5, -0.5, -0.5, 0.5;
  CHECK((residual_operator(ones) - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("residual_operator is a symmetric idempotent on random designs") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 25; ++t) {
    const Matrix X = random_matrix(rng, 9, 1 + t % 5);
    const Matrix P = residual_operator(X);
    CHECK((P * P - P).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((P - P.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("adding a column never increases rss") {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const Matrix X = random_matrix(rng, 10, 5);
    const Vector y = random_matrix(rng, 10, 1).col(0);
    FeatureSet M{t % 5};
    const double base = rss(y, select_columns(X, M));
    for (int j = 0; j < 5; ++j) {
      if (j == M[0]) continue;
      CHECK(rss(y, select_columns(X, {M[0], j})) <= base + 1e-8);
    }
  }
}

TEST_CASE("solve_quad_system examples") {
  auto solve = [](std::vector<QuadInequality> sys) { return solve_quad_system(sys); };
  CHECK(solve({{-1, 0, 1, Sense::kLessEqualZero}}) == IntervalSet::single(-1, 1));
  CHECK(solve({{1, 0, 1, Sense::kLessEqualZero}}).is_empty());
  CHECK(solve({{0, 0, 0, Sense::kLessEqualZero}}) == IntervalSet::whole());
  CHECK(solve({{-4, 0, 1, Sense::kLessEqualZero}, {0, 1, 0, Sense::kGreaterEqualZero}}) ==
        IntervalSet::single(0, 2));
}

TEST_CASE("solve_quad degenerate coefficients") {
  // Coefficients below tolerance are treated as zero.
  CHECK(solve_quad({-1, 1e-13, 1e-14, Sense::kLessEqualZero}) == IntervalSet::whole());
  CHECK(solve_quad({1, 0, 1e-14, Sense::kLessEqualZero}).is_empty());
  // Double root: (z - 1)^2 <= 0 only at z = 1.
  const auto dbl = solve_quad({1, -2, 1, Sense::kLessEqualZero});
  REQUIRE(dbl.size() == 1);
  CHECK(dbl[0].lo == doctest::Approx(1.0));
  CHECK(dbl[0].hi == doctest::Approx(1.0));
  // Concave: -(z^2) + 1 >= 0 is [-1, 1]; -(z^2) + 1 <= 0 is two rays.
  CHECK(solve_quad({1, 0, -1, Sense::kGreaterEqualZero}) == IntervalSet::single(-1, 1));
  const auto rays = solve_quad({1, 0, -1, Sense::kLessEqualZero});
  REQUIRE(rays.size() == 2);
  CHECK(rays[0].lo == -kInf);
  CHECK(rays[0].hi == doctest::Approx(-1.0));
  CHECK(rays[1].lo == doctest::Approx(1.0));
  CHECK(rays[1].hi == kInf);
}

TEST_CASE("solve_quad_system agrees with a dense sign check") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 20; ++t) {
    std::vector<QuadInequality> sys;
    const int count = 1 + t % 3;
    for (int i = 0; i < count; ++i) {
      QuadInequality q{u(rng) * 20, u(rng) * 4, u(rng) / 5,
                       coin(rng) ? Sense::kLessEqualZero : Sense::kGreaterEqualZero};
      if (t % 7 == 0) q.o = 0.0;
      sys.push_back(q);
    }
    const IntervalSet set = solve_quad_system(sys);
    std::vector<double> ends;
    for (const auto& iv : set) {
      ends.push_back(iv.lo);
      ends.push_back(iv.hi);
    }
    int bad = 0;
    const int points = 100000;
    for (int g = 0; g < points; ++g) {
      const double z = -100.0 + 200.0 * g / (points - 1);
      bool near = false;
      for (double e : ends) near = near || std::abs(z - e) < 1e-6;
      if (near) continue;
      bool truth = true;
      for (const auto& q : sys) truth = truth && q.holds(z);
      bad += truth != set.contains(z);
    }
    CHECK(bad == 0);
  }
}

TEST_CASE("quad_form_coeffs examples and direct evaluation") {
  const Matrix I = Matrix::Identity(2, 2);
  auto c = quad_form_coeffs(Vector::Zero(2), vec({1, 0}), I);
  CHECK(c.w == 0.0);
  CHECK(c.r == 0.0);
  CHECK(c.o == 1.0);
  c = quad_form_coeffs(vec({1, 0}), Vector::Zero(2), I);
  CHECK(c.w == 1.0);
  CHECK(c.r == 0.0);
  CHECK(c.o == 0.0);
  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  c = quad_form_coeffs(vec({1, 0}), vec({0, 1}), swap);
  CHECK(c.w == 0.0);
  CHECK(c.r == 2.0);
  CHECK(c.o == 0.0);

  std::mt19937_64 rng(23);
  for (int t = 0; t < 20; ++t) {
    const Vector a = random_matrix(rng, 6, 1).col(0), b = random_matrix(rng, 6, 1).col(0);
    const Matrix L = random_matrix(rng, 6, 6);
    const auto q = quad_form_coeffs(a, b, L);
    for (double z : {-3.0, -0.4, 0.0, 1.7, 12.0}) {
      const Vector y = a + b * z;
      const double direct = y.dot(L * y);
      CHECK(q(z) == doctest::Approx(direct).epsilon(1e-8));
    }
  }
}

TEST_CASE("IntervalSet construction, merge and set algebra") {
  const IntervalSet s({{3, 4}, {0, 1}, {1 + 1e-12, 2}, {5, 4}});
  REQUIRE(s.size() == 2);
  CHECK(s[0] == Interval{0, 2});
  CHECK(s[1] == Interval{3, 4});
  CHECK(s.measure() == doctest::Approx(3.0));
  CHECK(s.contains(3.5));
  CHECK_FALSE(s.contains(2.5));
  CHECK(s.component_containing(1.5).value() == Interval{0, 2});
  CHECK_FALSE(s.component_containing(2.5).has_value());

  const IntervalSet t({{1.5, 3.5}});
  CHECK(s.intersect(t) == IntervalSet({{1.5, 2}, {3, 3.5}}));
  CHECK(s.unite(t) == IntervalSet::single(0, 4));
  CHECK(s.clip(-kInf, 0.5) == IntervalSet::single(0, 0.5));
  CHECK(IntervalSet::whole().intersect(IntervalSet::empty()).is_empty());
  CHECK(s.to_string() == "[0, 2] u [3, 4]");
}

TEST_CASE("normal tail arithmetic") {
  CHECK(std::exp(log_normal_sf(0.0)) == doctest::Approx(0.5));
  CHECK(std::exp(log_normal_sf(1.959963985)) == doctest::Approx(0.025).epsilon(1e-8));
  // Continuity across the switch to the continued fraction.
  CHECK(log_normal_sf(8.0 - 1e-9) == doctest::Approx(log_normal_sf(8.0)).epsilon(1e-8));
  // Far tail: log sf(40) = -800 - log(40 sqrt(2 pi)) + O(1/1600).
  CHECK(log_normal_sf(40.0) ==
        doctest::Approx(-800.0 - std::log(40.0 * std::sqrt(2.0 * M_PI)) - 1.0 / 1600.0 +
                        2.5 / 2560000.0)
            .epsilon(1e-9));
  const double m = std::exp(log_normal_interval_mass(-1.0, 2.0));
  CHECK(m == doctest::Approx(oracle::normal_mass_simpson(-1.0, 2.0)).epsilon(1e-10));
  CHECK(log_normal_interval_mass(2.0, 2.0) == -kInf);
  const double far = log_normal_interval_mass(30.0, 31.0);
  CHECK(far == doctest::Approx(log_normal_sf(30.0)).epsilon(1e-9));
}
