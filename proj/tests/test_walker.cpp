#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "linewalk/envgen.hpp"
#include "linewalk/errors.hpp"
#include "linewalk/parallel.hpp"
#include "linewalk/stats.hpp"
#include "linewalk/walker.hpp"

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

constexpr double kInf = std::numeric_limits<double>::infinity();

struct DirectionCounter {
  Point last{};
  std::size_t vertical = 0;
  std::size_t total = 0;
  void hold(double, const Point&, double, double, double) {}
  void jump(double, const Point& to) {
    if (to.x1 == last.x1) ++vertical;
    ++total;
    last = to;
  }
  void end(double, const Point&) {}
};

struct HoldCollector {
  std::vector<double> holds;
  void hold(double, const Point&, double, double, double d) { holds.push_back(d); }
  void jump(double, const Point&) {}
  void end(double, const Point&) {}
};

bool nearest_neighbour(const Trajectory& t) {
  for (std::size_t i = 1; i < t.positions.size(); ++i) {
    const auto d = std::abs(t.positions[i].x1 - t.positions[i - 1].x1) +
                   std::abs(t.positions[i].x2 - t.positions[i - 1].x2);
    if (d != 1) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("rates of the four walks") {
  const Environment one(constant_env(1.0, 1.0));
  const Rates r = rates_at(one, WalkKind::vsrw(), {3, -2});
  CHECK(r.horizontal == 1.0);
  CHECK(r.vertical == 1.0);
  CHECK(r.total() == 4.0);

  const Rates c = rates_from_lines(WalkKind::csrw(), 2.5, 0.7);
  CHECK(c.horizontal + c.vertical == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.total() == doctest::Approx(2.0).epsilon(1e-15));

  const Environment y_env(constant_env(3.0, 1.0));
  const Rates y = rates_at(y_env, WalkKind::y(), {0, 0});
  CHECK(y.horizontal == 3.0);
  CHECK(y.vertical == 1.0);
  CHECK(y.total() == 8.0);

  const Rates x = rates_from_lines(WalkKind::xstar(0.5, 0.25), 4.0, 16.0);
  CHECK(x.horizontal == doctest::Approx(std::pow(4.0, 0.5) * std::pow(16.0, -0.25)));
  CHECK(x.vertical == doctest::Approx(std::pow(4.0, -0.5) * std::pow(16.0, 0.75)));
}

TEST_CASE("x-star exponents must lie below alpha") {
  EnvironmentSpec spec;
  spec.alpha1 = 0.6;
  spec.alpha2 = 0.9;
  CHECK_THROWS_AS(WalkKind::xstar(0.7, 0.5).validate(spec), ConfigError);
  CHECK_NOTHROW(WalkKind::xstar(0.3, 0.45).validate(spec));
}

TEST_CASE("second moment in the constant environment") {
  const Environment env(constant_env(1.0, 1.0));
  const std::size_t n = 10000;
  std::vector<double> sq(n), x1(n), x2(n), counts(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = simulate(env, WalkKind::vsrw(), {}, StopRule{1.0, 1000}, i);
    const Point p = t.position_at(1.0);
    sq[i] = static_cast<double>(p.x1 * p.x1);
    x1[i] = static_cast<double>(p.x1);
    x2[i] = static_cast<double>(p.x2);
    counts[i] = static_cast<double>(jump_count(t, 1.0));
  }
  const double root = std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean(sq) - 2.0) <= 3.0 * sample_sd(sq) / root);
  CHECK(std::abs(mean(counts) - 4.0) <= 3.0 * sample_sd(counts) / root);
  // No drift.
  CHECK(std::abs(mean(x1)) <= 3.0 * sample_sd(x1) / root);
  CHECK(std::abs(mean(x2)) <= 3.0 * sample_sd(x2) / root);
}

TEST_CASE("direction choice follows the rate ratio") {
  const Environment env(constant_env(1.0, 100.0));
  DirectionCounter c;
  run_walk(env, WalkKind::vsrw(), {}, StopRule{kInf, 10000}, walk_stream_key(env.spec().seed, 0), c);
  CHECK(c.total == 10000);
  CHECK(std::abs(static_cast<double>(c.vertical) / 10000.0 - 100.0 / 101.0) <= 0.01);
}

TEST_CASE("simulation is deterministic in (seed, stream)") {
  EnvironmentSpec spec;
  const Environment env(spec);
  const auto a = simulate(env, WalkKind::vsrw(), {}, StopRule{5.0, 100000}, 17);
  const auto b = simulate(Environment(spec), WalkKind::vsrw(), {}, StopRule{5.0, 100000}, 17);
  const auto c = simulate(env, WalkKind::vsrw(), {}, StopRule{5.0, 100000}, 18);
  CHECK(a.jump_times == b.jump_times);
  CHECK(a.positions == b.positions);
  CHECK(a.positions != c.positions);
  CHECK(nearest_neighbour(a));
  for (std::size_t i = 1; i < a.jump_times.size(); ++i) CHECK(a.jump_times[i] > a.jump_times[i - 1]);
}

TEST_CASE("jump budget truncates instead of looping") {
  EnvironmentSpec spec;
  const Environment env(spec);
  const auto t = simulate(env, WalkKind::vsrw(), {}, StopRule{1e9, 50}, 1);
  CHECK(t.truncated);
  CHECK(t.jump_count() == 50);
  CHECK(t.positions.size() == 51);
  const auto u = simulate(env, WalkKind::vsrw(), {}, StopRule{kInf, 100}, 1);
  CHECK_FALSE(u.truncated);
  CHECK(u.jump_count() == 100);
  CHECK_THROWS_AS(simulate(env, WalkKind::vsrw(), {}, StopRule{0.0, 10}, 1), DomainError);
}

TEST_CASE("jump_count before the first jump") {
  const Environment env(constant_env(1.0, 1.0));
  const auto t = simulate(env, WalkKind::vsrw(), {}, StopRule{2.0, 1000}, 3);
  REQUIRE(t.jump_count() > 0);
  CHECK(jump_count(t, t.jump_times.front() / 2.0) == 0);
  CHECK(jump_count(t, 2.0) == t.jump_count());
  CHECK_THROWS_AS(jump_count(t, 3.0), RangeError);
}

TEST_CASE("additive functional hand sums") {
  Trajectory t;
  t.jump_times = {0.3};
  t.positions = {{0, 0}, {0, 1}};
  t.horizon = 1.0;
  const SiteWeight one = [](const Point&) { return 1.0; };
  const auto id = additive_functional(t, one);
  for (double s : {0.0, 0.1, 0.3, 0.77, 1.0}) CHECK(id(s) == doctest::Approx(s).epsilon(1e-15));
  const SiteWeight w = [](const Point& p) { return p.x2 == 0 ? 2.0 : 5.0; };
  CHECK(additive_functional(t, w).final_value() == doctest::Approx(4.1).epsilon(1e-15));
  CHECK_THROWS_AS(additive_functional(t, w, 1.0, 1.0, 2.0), TruncatedError);
}

TEST_CASE("clock inversion") {
  Trajectory t;
  t.jump_times = {0.4};
  t.positions = {{0, 0}, {1, 0}};
  t.horizon = 2.0;
  const auto id = additive_functional(t, [](const Point&) { return 1.0; });
  CHECK(invert_clock(id, 0.7) == doctest::Approx(0.7).epsilon(1e-15));
  const auto twice = additive_functional(t, [](const Point&) { return 2.0; });
  CHECK(invert_clock(twice, 1.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(invert_clock(twice, 4.5), RangeError);

  EnvironmentSpec spec;
  const Environment env(spec);
  const auto traj = simulate(env, WalkKind::vsrw(), {}, StopRule{3.0, 1000000}, 2);
  const auto clock = additive_functional(traj, site_weight(env, LineWeight::h_plus_v()));
  Stream s(5);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double u = s.uniform() * clock.final_value();
    worst = std::max(worst, std::abs(clock(invert_clock(clock, u)) - u) / clock.final_value());
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("time change round trip") {
  EnvironmentSpec spec;
  const Environment env(spec);
  const auto traj = simulate(env, WalkKind::vsrw(), {}, StopRule{2.0, 1000000}, 4);
  const auto id = additive_functional(traj, [](const Point&) { return 1.0; });
  const auto same = time_change(traj, id);
  CHECK(same.positions == traj.positions);
  for (std::size_t i = 0; i < traj.jump_times.size(); ++i)
    CHECK(same.jump_times[i] == doctest::Approx(traj.jump_times[i]).epsilon(1e-15));

  const auto clock = additive_functional(traj, site_weight(env, LineWeight::h_plus_v()));
  const auto changed = time_change(traj, clock);
  const auto back = time_change(changed, clock.inverse());
  CHECK(back.positions == traj.positions);
  double worst = 0.0;
  for (std::size_t i = 0; i < traj.jump_times.size(); ++i)
    worst = std::max(worst, std::abs(back.jump_times[i] - traj.jump_times[i]) / traj.jump_times[i]);
  CHECK(worst <= 1e-12);

  Trajectory other = traj;
  other.jump_times.pop_back();
  other.positions.pop_back();
  CHECK_THROWS_AS(time_change(other, clock), DomainError);
}

TEST_CASE("time-changed VSRW has the law of the CSRW") {
  EnvironmentSpec spec;
  const Environment env(spec);
  const std::size_t n = 2000;
  std::vector<double> via_clock(n), direct(n);
  for (std::size_t i = 0; i < n; ++i) {
    // H + V >= 2, so the clock passes 1 before time 1/2.
    const auto x = simulate(env, WalkKind::vsrw(), {}, StopRule{0.5, 10000000}, i);
    const auto j = additive_functional(x, site_weight(env, LineWeight::h_plus_v()));
    via_clock[i] = static_cast<double>(time_change(x, j).position_at(1.0).x2);
    const auto c = simulate(env, WalkKind::csrw(), {}, StopRule{1.0, 10000000}, n + i);
    direct[i] = static_cast<double>(c.position_at(1.0).x2);
  }
  CHECK(ks_two_sample(via_clock, direct).statistic <= 0.08);
}

TEST_CASE("CSRW holding times have mean one half") {
  EnvironmentSpec spec;
  const Environment env(spec);
  HoldCollector h;
  run_walk(env, WalkKind::csrw(), {}, StopRule{kInf, 100000}, 9, h);
  REQUIRE(h.holds.size() >= 99999);
  CHECK(std::abs(mean(h.holds) - 0.5) <= 0.01);
}

TEST_CASE("local times: mass identity and unvisited sites") {
  EnvironmentSpec spec;
  spec.alpha1 = 2.0;
  spec.alpha2 = 2.0;
  const Environment env(spec);
  const double T = 1024.0;
  const auto traj = simulate(env, WalkKind::vsrw(), {}, StopRule{2.0 * T, 100000000}, 6);
  const auto lt = local_times(traj, 2, T, {0.25, 1.0, 2.0});
  for (std::size_t j = 0; j < lt.t_grid().size(); ++j) {
    const double expect = std::sqrt(T) * lt.t_grid()[j];
    CHECK(std::abs(lt.mass(j) - expect) <= 1e-12 * expect);
  }
  CHECK(lt.ell_site(2, lt.max_site() + 5) == 0.0);
  CHECK(lt.ell_site(2, lt.min_site() - 1) == 0.0);
  // Monotone in t.
  for (std::int64_t s = lt.min_site(); s <= lt.max_site(); ++s) {
    CHECK(lt.site_time(0, s) <= lt.site_time(1, s));
    CHECK(lt.site_time(1, s) <= lt.site_time(2, s));
  }
  // Interpolation is exact at grid points and linear between them.
  const double root = std::sqrt(T);
  const double x0 = 0.0, x1 = 1.0 / root;
  CHECK(lt.ell_interpolated(2, x0) == doctest::Approx(lt.ell_site(2, 0)));
  CHECK(lt.ell_interpolated(2, 0.5 * (x0 + x1)) ==
        doctest::Approx(0.5 * (lt.ell_site(2, 0) + lt.ell_site(2, 1))));
}

TEST_CASE("D^T via the clock equals D^T via local times") {
  EnvironmentSpec spec;
  spec.alpha1 = 0.5;
  spec.h_mode = HMode::stable_increments;
  spec.v_mode = VMode::constant;
  spec.v_floor = 1.0;
  spec.mesh = 1.0 / 32.0;
  const double T = 256.0;
  const double delta = 0.5 * (1.0 + 1.0 / spec.alpha1);
  const Environment env(spec, T);
  const auto traj = simulate(env, WalkKind::y(), {}, StopRule{T, 2000000000ULL}, 1);
  REQUIRE_FALSE(traj.truncated);
  const auto clock =
      additive_functional(traj, site_weight(env, LineWeight::h()), T, std::pow(T, -delta), 1.0);
  const double via_clock = clock(1.0);

  const auto lt = local_times(traj, 2, T, {1.0});
  const SubordinatorPath& path = *env.h.subordinator();
  const std::int64_t m = path.cells_per_site(T);
  double via_lt = 0.0;
  for (std::int64_t x = lt.min_site(); x <= lt.max_site(); ++x)
    via_lt += lt.ell_site(0, x) * path.aggregate(x * m, m);
  CHECK(std::abs(via_clock - via_lt) <= 1e-12 * via_lt);
}

TEST_CASE("quadratic variation identity") {
  EnvironmentSpec spec;
  spec.alpha1 = 2.0;
  spec.alpha2 = 2.0;
  EnsembleSpec es;
  es.env = spec;
  es.kind = WalkKind::vsrw();
  es.checkpoints = {1.0};
  es.weights = {LineWeight::h()};
  es.runs = 10000;
  const auto recs = run_ensemble(es, 0);
  std::vector<double> d;
  for (const auto& r : recs) {
    const auto& rec = r.records.front();
    const double x = static_cast<double>(rec.position.x1);
    d.push_back(x * x - 2.0 * rec.integrals[0]);
  }
  CHECK(std::abs(mean(d)) <= 3.0 * sample_sd(d) / std::sqrt(static_cast<double>(d.size())));
}

TEST_CASE("ensembles do not depend on the worker count") {
  EnvironmentSpec spec;
  EnsembleSpec es;
  es.env = spec;
  es.kind = WalkKind::vsrw();
  es.checkpoints = {1.0, 4.0};
  es.weights = {LineWeight::h(), LineWeight::v()};
  es.runs = 64;
  es.environments = 8;
  const auto a = run_ensemble(es, 1);
  const auto b = run_ensemble(es, 4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].jumps == b[i].jumps);
    CHECK(a[i].records.back().position == b[i].records.back().position);
    CHECK(a[i].records.back().integrals == b[i].records.back().integrals);
  }
}

TEST_CASE("explosion probe in the subcritical regime") {
  // alpha = 0.6 on both lines: eps1 * eps2 = 1/9.
  EnvironmentSpec spec;
  spec.alpha1 = 0.6;
  spec.alpha2 = 0.6;
  int truncated = 0;
  for (std::uint64_t e = 0; e < 100; ++e) {
    const Environment env(spec.with_seed(derive_key(spec.seed, 77, e)));
    if (explosion_probe(env, WalkKind::vsrw(), 1.0, 10000000, 0) == ProbeResult::truncated)
      ++truncated;
  }
  MESSAGE("truncated probes: " << truncated << "/100");
  CHECK(truncated <= 5);
}

TEST_CASE("trajectory export formats") {
  EnvironmentSpec spec;
  const auto t = simulate(Environment(spec), WalkKind::vsrw(), {}, StopRule{kInf, 20}, 0);
  std::ostringstream csv;
  write_trajectory_csv(csv, t);
  CHECK(csv.str().rfind("time,x1,x2\n0,0,0\n", 0) == 0);

  std::stringstream bin;
  write_trajectory_binary(bin, t);
  CHECK(bin.str().size() == 8 + 21 * 16);
  const auto back = read_trajectory_binary(bin);
  CHECK(back.positions == t.positions);
  CHECK(back.jump_times == t.jump_times);

  Trajectory c;
  c.jump_times = {0.5};
  c.positions = {{0, 0}, {1, 0}};
  c.horizon = 1.0;
  std::ostringstream clock_csv;
  write_clock_csv(clock_csv, additive_functional(c, [](const Point&) { return 2.0; }));
  CHECK(clock_csv.str() == "time,value\n0,0\n0.5,1\n1,2\n");
}
