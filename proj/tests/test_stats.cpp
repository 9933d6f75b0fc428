#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "linewalk/errors.hpp"
#include "linewalk/rng.hpp"
#include "linewalk/stats.hpp"

using namespace linewalk;

namespace {

EnvironmentSpec constant_env(double h, double v) {
  EnvironmentSpec spec;
  spec.h_mode = HMode::constant;
  spec.v_mode = VMode::constant;
  spec.h_floor = h;
  spec.v_floor = v;
  return spec;
}

double uniform_cdf(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

}  // namespace

TEST_CASE("epsilon and gamma by hand") {
  CHECK(epsilon_of(2.0) == 0.0);
  CHECK(epsilon_of(1.0) == 0.0);
  CHECK(epsilon_of(0.5) == doctest::Approx(0.5));
  CHECK(epsilon_of(0.25) == doctest::Approx(1.5));

  const auto p = scaling_params(0.6, 0.6);
  CHECK(p.eps1 == doctest::Approx(1.0 / 3.0));
  CHECK(p.gamma1() == doctest::Approx(0.75));
  CHECK(p.gamma2() == doctest::Approx(0.75));
  CHECK(p.overscaling_threshold(1) == doctest::Approx(1.5));
  CHECK(p.A1 == doctest::Approx(1.5));

  const auto d = scaling_params(2.0, 2.0);
  CHECK(d.gamma1() == doctest::Approx(0.5));
  CHECK(d.gamma2() == doctest::Approx(0.5));

  const auto c2 = scaling_params(0.5, 1.5);
  CHECK(c2.delta == doctest::Approx(1.5));
  CHECK(c2.gamma1() == doctest::Approx(0.75));
  CHECK(c2.gamma2() == doctest::Approx(0.5));

  const auto super = scaling_params(0.25, 0.3);
  CHECK(super.supercritical);
  CHECK_THROWS_AS(super.gamma1(), DomainError);
}

TEST_CASE("scaling parameters are symmetric under swapping the axes") {
  for (double a : {0.3, 0.6, 0.9, 1.5})
    for (double b : {0.4, 0.7, 2.0}) {
      const auto p = scaling_params(a, b);
      const auto q = scaling_params(b, a);
      CHECK(p.eps_product == doctest::Approx(q.eps_product));
      if (!p.supercritical) {
        CHECK(p.gamma1() == doctest::Approx(q.gamma2()));
        CHECK(p.gamma2() == doctest::Approx(q.gamma1()));
      }
    }
}

TEST_CASE("ks distances") {
  const std::vector<double> a = {1, 2, 3, 4};
  CHECK(ks_two_sample(a, a).statistic == 0.0);
  const std::vector<double> b = {10, 11, 12, 13};
  CHECK(ks_two_sample(a, b).statistic == 1.0);
  const auto ab = ks_two_sample(a, b);
  const auto ba = ks_two_sample(b, a);
  CHECK(ab.statistic == ba.statistic);
  CHECK(ab.critical == doctest::Approx(1.628 * std::sqrt(8.0 / 16.0)));
}

TEST_CASE("two-sample ks rejects at roughly its nominal rate under the null") {
  int rejected = 0;
  for (std::uint64_t r = 0; r < 300; ++r) {
    const std::uint64_t key = derive_key(41, r);
    std::vector<double> a(400), b(400);
    for (std::size_t i = 0; i < 400; ++i) {
      a[i] = uniform_at(key, i);
      b[i] = uniform_at(key, 400 + i);
    }
    if (ks_two_sample(a, b).rejected()) ++rejected;
  }
  CHECK(rejected <= 10);
}

TEST_CASE("one-sample ks against the uniform law") {
  std::vector<double> u(10000);
  const std::uint64_t key = derive_key(42, 0);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = uniform_at(key, i);
  CHECK(ks_one_sample(u, &uniform_cdf) <= 0.02);
  const std::vector<double> half = {0.0, 0.0, 0.0, 0.0};
  CHECK(ks_one_sample(half, &uniform_cdf) == doctest::Approx(1.0));
}

TEST_CASE("order statistics") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), DomainError);
  CHECK(quantile({0.0, 1.0, 2.0, 3.0, 4.0}, 0.25) == doctest::Approx(1.0));
  CHECK(interquartile_range({0.0, 1.0, 2.0, 3.0, 4.0}) == doctest::Approx(2.0));
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(median({1.0, inf, inf}) == inf);
  CHECK(median({1.0, 2.0, inf, inf}) == inf);
}

TEST_CASE("power-law fit is exact on a power law") {
  const std::vector<double> s = {1, 10, 100, 1000};
  std::vector<double> y;
  for (double x : s) y.push_back(3.0 * std::pow(x, 0.7));
  const auto f = fit_power_law(s, y);
  CHECK(f.slope == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(std::exp(f.intercept) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(f.r_squared == doctest::Approx(1.0));
  CHECK(f.reportable);
  const std::vector<double> narrow = {1, 2, 4, 8};
  CHECK_FALSE(fit_power_law(narrow, std::vector<double>{1, 2, 3, 4}).reportable);
}

TEST_CASE("exponent fit argument errors") {
  ExponentFitRequest req;
  req.kind = WalkKind::vsrw();
  req.T_grid = {16, 64, 256};
  CHECK_THROWS_AS(exponent_fit(req, 1), ConfigError);
  req.T_grid = {16, 64, 32, 256};
  CHECK_THROWS_AS(exponent_fit(req, 1), ConfigError);
  req.T_grid = {16, 64, 256, 1024};
  req.runs = 0;
  CHECK_THROWS_AS(exponent_fit(req, 1), ConfigError);
}

TEST_CASE("exponent fit refuses heavily truncated ensembles") {
  ExponentFitRequest req;
  req.env = constant_env(1.0, 1.0);
  req.kind = WalkKind::vsrw();
  req.T_grid = {16, 64, 256, 1024};
  req.runs = 20;
  req.max_jumps = 10;
  const auto rep = exponent_fit(req, 1);
  CHECK(rep.refused);
  CHECK(rep.exclusion_rate > 0.1);
}

TEST_CASE("diffusive exponents in the constant environment") {
  ExponentFitRequest req;
  req.env = constant_env(1.0, 1.0);
  req.kind = WalkKind::vsrw();
  req.T_grid = {64, 256, 1024, 4096, 16384};
  req.runs = 300;
  const auto rep = exponent_fit(req, 1);
  REQUIRE_FALSE(rep.refused);
  CHECK(std::abs(rep.fit1.slope - 0.5) <= 0.05);
  CHECK(std::abs(rep.fit2.slope - 0.5) <= 0.05);
}

TEST_CASE("ratio statistic is one when V is identically one") {
  EnvironmentSpec spec;
  spec.alpha1 = 0.5;
  spec.h_mode = HMode::stable_increments;
  spec.v_mode = VMode::constant;
  spec.v_floor = 1.0;
  spec.mesh = 1.0 / 16.0;
  for (double r : ratio_statistic(spec, 256.0, 10, 1)) CHECK(r == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ergodic and column averages in constant environments") {
  const Environment env(constant_env(2.0, 5.0));
  CHECK(ergodic_average(env, WalkKind::vsrw(), 100.0, LineWeight::h(), 1) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(column_average(env, 100.0, 1) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("pareto moments") {
  CHECK(pareto_moment(2.0, 1.0, 1.0) == doctest::Approx(2.0));
  CHECK(pareto_moment(1.5, 1.0 / 3.0, 1.0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(pareto_moment(1.0, 1.0, 1.0), DomainError);
}

TEST_CASE("over-scaled supremum decays at the predicted rate") {
  // Threshold is 1 in the constant environment; a = 1.2 leaves T^{-0.1}.
  const auto rep = overscaling_study(constant_env(1.0, 1.0), 1.2, 1.2,
                                     {64, 256, 1024, 4096, 16384}, 300, 1, 1);
  CHECK(rep.warnings.empty());
  std::vector<double> T, s1, s2;
  for (const auto& r : rep.rows) {
    CHECK(r.truncated == 0);
    CHECK(r.median_stat1 == r.median_stat1_upper);
    T.push_back(r.T);
    s1.push_back(r.median_stat1);
    s2.push_back(r.median_stat2);
  }
  CHECK(std::abs(fit_power_law(T, s1).slope + 0.1) <= 0.03);
  CHECK(std::abs(fit_power_law(T, s2).slope + 0.1) <= 0.03);

  const auto low = overscaling_study(constant_env(1.0, 1.0), 0.9, 1.2, {64, 256}, 5, 1, 1);
  CHECK(low.warnings.size() == 1);
}

TEST_CASE("conjecture targets and regimes") {
  EnvironmentSpec spec;
  spec.alpha1 = 0.6;
  spec.alpha2 = 0.6;
  const auto rep = conjecture_explorer(spec, {16, 64, 256, 1024}, 10, 10, 1);
  CHECK(rep.regime == "case1");
  CHECK(rep.target1 == doctest::Approx(0.75));
  CHECK(rep.target2 == doctest::Approx(0.75));
  EnvironmentSpec super;
  super.alpha1 = 0.25;
  super.alpha2 = 0.3;
  CHECK_THROWS_AS(conjecture_explorer(super, {16, 64, 256, 1024}, 10, 10, 1), ConfigError);
}
