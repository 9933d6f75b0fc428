#pragma once

// Continuous-time nearest-neighbour walks on Z^2 in a line environment.
//
// Convention: clocks built from H or V carry no factor 2. The quadratic
// variation of X_1 is 2 * int H(X_2(s)) ds, and callers apply the factor 2
// where a quadratic variation is meant.

#include <cmath>
#include <compare>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <span>
#include <string_view>
#include <vector>

#include "linewalk/envgen.hpp"
#include "linewalk/rng.hpp"

namespace linewalk {

struct Point {
  std::int64_t x1 = 0;
  std::int64_t x2 = 0;
  auto operator<=>(const Point&) const = default;
  std::int64_t component(int i) const { return i == 1 ? x1 : x2; }
};

enum class WalkTag { vsrw, csrw, y, xstar };

std::string_view to_string(WalkTag t);
WalkTag parse_walk_tag(std::string_view s);

struct WalkKind {
  WalkTag tag = WalkTag::vsrw;
  /// Exponents of the X* time change; only read for WalkTag::xstar.
  double alpha1_minus = 0.0;
  double alpha2_minus = 0.0;

  static WalkKind vsrw() { return {WalkTag::vsrw}; }
  static WalkKind csrw() { return {WalkTag::csrw}; }
  static WalkKind y() { return {WalkTag::y}; }
  static WalkKind xstar(double a1_minus, double a2_minus) {
    return {WalkTag::xstar, a1_minus, a2_minus};
  }

  /// X* needs 0 < alpha_i_minus < alpha_i of the environment.
  void validate(const EnvironmentSpec& spec) const;
};

/// Per-direction jump rates: each of x +- e1 at `horizontal`, each of x +- e2 at `vertical`.
struct Rates {
  double horizontal;
  double vertical;
  double total() const noexcept { return 2.0 * (horizontal + vertical); }
};

inline Rates rates_from_lines(const WalkKind& kind, double h, double v) noexcept {
  switch (kind.tag) {
    case WalkTag::vsrw: return {h, v};
    case WalkTag::csrw: return {h / (h + v), v / (h + v)};
    case WalkTag::y: return {h / v, 1.0};
    case WalkTag::xstar:
      return {std::pow(h, 1.0 - kind.alpha1_minus) * std::pow(v, -kind.alpha2_minus),
              std::pow(h, -kind.alpha1_minus) * std::pow(v, 1.0 - kind.alpha2_minus)};
  }
  return {h, v};
}

inline Rates rates_at(const Environment& env, const WalkKind& kind, Point x) {
  return rates_from_lines(kind, env.H(x.x2), env.V(x.x1));
}

struct StopRule {
  double horizon = std::numeric_limits<double>::infinity();
  std::uint64_t max_jumps = 10'000'000;
};

struct WalkOutcome {
  double end_time = 0.0;
  std::uint64_t jumps = 0;
  /// Jump budget exhausted before a finite horizon (explosion suspect).
  bool truncated = false;
  Point final_position;
};

/// Key of the random stream used by walk number `stream` in an environment with seed `env_seed`.
inline std::uint64_t walk_stream_key(std::uint64_t env_seed, std::uint64_t stream) {
  return derive_key(env_seed, tag(Domain::walk), stream);
}

struct NullObserver {
  void hold(double, const Point&, double, double, double) noexcept {}
  void jump(double, const Point&) noexcept {}
  void end(double, const Point&) noexcept {}
};

/// Gillespie simulation. Per step: one exponential holding time, then one
/// uniform picking the direction, both from the same stream.
///
/// Observer protocol:
///   hold(t_start, site, H(site.x2), V(site.x1), duration)
///   jump(time, new_site)
///   end(time, site)   once, after the last hold
template <class Observer>
WalkOutcome run_walk(const Environment& env, const WalkKind& kind, Point start,
                     const StopRule& stop, std::uint64_t stream_key, Observer& obs) {
  Stream rng(stream_key);
  Point x = start;
  double h = env.H(x.x2);
  double v = env.V(x.x1);
  double t = 0.0;
  std::uint64_t jumps = 0;
  bool truncated = false;
  for (;;) {
    if (jumps >= stop.max_jumps) {
      truncated = std::isfinite(stop.horizon);
      break;
    }
    const Rates r = rates_from_lines(kind, h, v);
    const double half = r.horizontal + r.vertical;
    const double dt = rng.exponential() / (2.0 * half);
    if (t + dt >= stop.horizon) {
      obs.hold(t, x, h, v, stop.horizon - t);
      t = stop.horizon;
      break;
    }
    obs.hold(t, x, h, v, dt);
    t += dt;
    const double pick = rng.uniform() * 2.0 * half;
    if (pick < 2.0 * r.horizontal) {
      x.x1 += pick < r.horizontal ? 1 : -1;
      v = env.V(x.x1);
    } else {
      x.x2 += pick < 2.0 * r.horizontal + r.vertical ? 1 : -1;
      h = env.H(x.x2);
    }
    ++jumps;
    obs.jump(t, x);
  }
  obs.end(t, x);
  return {t, jumps, truncated, x};
}

/// Rate-1-per-direction simple random walk on Z started at 0, run to `horizon`.
/// Observer protocol: hold(t_start, site, duration), end(time, site).
template <class Observer>
std::int64_t run_srw(double horizon, std::uint64_t stream_key, Observer& obs) {
  Stream rng(stream_key);
  std::int64_t x = 0;
  double t = 0.0;
  for (;;) {
    const double dt = 0.5 * rng.exponential();
    if (t + dt >= horizon) {
      obs.hold(t, x, horizon - t);
      t = horizon;
      break;
    }
    obs.hold(t, x, dt);
    t += dt;
    x += rng.uniform() < 0.5 ? 1 : -1;
  }
  obs.end(t, x);
  return x;
}

// ---------------------------------------------------------------------------

/// Piecewise-constant path on Z^2: positions[i] holds on [jump_times[i-1], jump_times[i]).
struct Trajectory {
  std::vector<double> jump_times;
  std::vector<Point> positions;
  double horizon = 0.0;
  bool truncated = false;

  std::size_t jump_count() const noexcept { return jump_times.size(); }
  /// Position at time t in [0, horizon]; throws RangeError outside.
  Point position_at(double t) const;
};

/// Records a full trajectory; jump times are nudged up by one ulp when a
/// holding time is below the resolution of the running time, so that they
/// stay strictly increasing.
class TrajectoryRecorder {
 public:
  explicit TrajectoryRecorder(Point start) { traj_.positions.push_back(start); }
  void hold(double, const Point&, double, double, double) noexcept {}
  void jump(double time, const Point& to) {
    if (!traj_.jump_times.empty() && !(time > traj_.jump_times.back()))
      time = std::nextafter(traj_.jump_times.back(), std::numeric_limits<double>::infinity());
    traj_.jump_times.push_back(time);
    traj_.positions.push_back(to);
  }
  void end(double time, const Point&) noexcept { end_ = time; }
  Trajectory take(bool truncated);

 private:
  Trajectory traj_;
  double end_ = 0.0;
};

Trajectory simulate(const Environment& env, const WalkKind& kind, Point start,
                    const StopRule& stop, std::uint64_t stream);

std::uint64_t jump_count(const Trajectory& traj, double t);

enum class ProbeResult { completed, truncated };

/// Runs the walk to time t without storing it; `truncated` if the jump cap hits first.
ProbeResult explosion_probe(const Environment& env, const WalkKind& kind, double t,
                            std::uint64_t jump_cap, std::uint64_t stream);

// ---------------------------------------------------------------------------

/// Integrands of the additive functionals, as functions of (H(x2), V(x1)) at the current site.
struct LineWeight {
  enum class Kind { one, h, v, h_over_v, h_plus_v, power_product };
  Kind kind = Kind::one;
  double h_exponent = 0.0;
  double v_exponent = 0.0;

  static LineWeight one() { return {Kind::one}; }
  static LineWeight h() { return {Kind::h}; }
  static LineWeight v() { return {Kind::v}; }
  static LineWeight h_over_v() { return {Kind::h_over_v}; }
  static LineWeight h_plus_v() { return {Kind::h_plus_v}; }
  /// H^a * V^b.
  static LineWeight power_product(double a, double b) { return {Kind::power_product, a, b}; }

  double operator()(double h, double v) const noexcept {
    switch (kind) {
      case Kind::one: return 1.0;
      case Kind::h: return h;
      case Kind::v: return v;
      case Kind::h_over_v: return h / v;
      case Kind::h_plus_v: return h + v;
      case Kind::power_product: return std::pow(h, h_exponent) * std::pow(v, v_exponent);
    }
    return 1.0;
  }
};

using SiteWeight = std::function<double(const Point&)>;

/// Site weight reading the environment.
SiteWeight site_weight(const Environment& env, LineWeight w);

/// Piecewise-linear, continuous, strictly increasing clock
/// c(t) = scale_post * int_0^{scale_pre t} w(X(s)) ds.
/// Knots are 0, the (rescaled) jump times, and the horizon.
struct ClockSample {
  std::vector<double> knot_times;
  std::vector<double> values;
  std::vector<double> slopes;

  double horizon() const { return knot_times.back(); }
  double final_value() const { return values.back(); }
  double operator()(double t) const;
  /// The inverse function as a clock (knots and values swapped).
  ClockSample inverse() const;
};

/// Exact additive functional of `traj`. When `required_time` > 0 the trajectory
/// must reach scale_pre * required_time, otherwise TruncatedError.
ClockSample additive_functional(const Trajectory& traj, const SiteWeight& weight,
                                double scale_pre = 1.0, double scale_post = 1.0,
                                double required_time = 0.0);

/// Closed-form inverse on the containing segment; RangeError outside [0, final value].
double invert_clock(const ClockSample& clock, double u);

/// t -> X(clock^{-1}(t)): same positions, jump times mapped through the clock.
Trajectory time_change(const Trajectory& traj, const ClockSample& clock);

// ---------------------------------------------------------------------------

/// Accumulates the occupation times of one coordinate of a walk at a grid of
/// absolute checkpoint times. Sites form a contiguous range (nearest-neighbour
/// moves), stored densely.
class OccupationRecorder {
 public:
  explicit OccupationRecorder(std::vector<double> checkpoints, int component = 2);

  void hold(double t_start, const Point& at, double, double, double duration) {
    add(t_start, at.component(component_), duration);
  }
  void hold(double t_start, std::int64_t site, double duration) { add(t_start, site, duration); }
  void jump(double, const Point&) noexcept {}
  void end(double time, const Point& at) { finish(time, at.component(component_)); }
  void end(double time, std::int64_t site) { finish(time, site); }

  const std::vector<double>& checkpoints() const noexcept { return checkpoints_; }
  std::size_t snapshots_taken() const noexcept { return snapshots_.size(); }
  std::int64_t min_site() const noexcept { return min_site_; }
  /// Occupation of `site` up to checkpoint j (0 if unvisited).
  double occupation(std::size_t j, std::int64_t site) const;
  const std::vector<double>& snapshot(std::size_t j) const { return snapshots_.at(j); }
  std::int64_t snapshot_min(std::size_t j) const { return snapshot_min_.at(j); }

 private:
  void add(double t_start, std::int64_t site, double duration);
  void finish(double time, std::int64_t site);
  void credit(std::int64_t site, double amount);
  void take_snapshot();

  std::vector<double> checkpoints_;
  int component_;
  std::size_t next_ = 0;
  std::int64_t min_site_ = 0;
  std::vector<double> current_;
  // Each snapshot is aligned with min_site_ at the time it was taken; shifts recorded alongside.
  std::vector<std::vector<double>> snapshots_;
  std::vector<std::int64_t> snapshot_min_;
};

/// Local times of one coordinate at scale T:
///   ell^T_t(x) = T^{-1/2} * (time spent at site floor(sqrt(T) x) up to T t),
/// plus the linear interpolation in x between neighbouring sites.
class LocalTimeField {
 public:
  LocalTimeField(double T, std::vector<double> t_grid, OccupationRecorder recorder);

  double T() const noexcept { return T_; }
  const std::vector<double>& t_grid() const noexcept { return t_grid_; }
  /// Raw holding time at an integer site up to time T * t_grid[j].
  double site_time(std::size_t j, std::int64_t site) const { return rec_.occupation(j, site); }
  /// ell^T_{t_j}(x).
  double ell(std::size_t j, double x) const;
  /// ell^T_{t_j} at the grid point site / sqrt(T).
  double ell_site(std::size_t j, std::int64_t site) const;
  /// Interpolated field, linear between grid points.
  double ell_interpolated(std::size_t j, double x) const;
  /// Sum over all sites of ell^T_{t_j}(site / sqrt(T)); equals sqrt(T) * t_j.
  double mass(std::size_t j) const;
  std::int64_t min_site() const;
  std::int64_t max_site() const;

 private:
  double T_;
  std::vector<double> t_grid_;
  OccupationRecorder rec_;
};

/// Local times of coordinate `component` (1 or 2) of `traj` at scale T.
LocalTimeField local_times(const Trajectory& traj, int component, double T,
                           std::vector<double> t_grid);

// ---------------------------------------------------------------------------

/// Records, at each checkpoint time, the position, the running sup of |x_i|,
/// and the integrals of a set of line weights.
class CheckpointObserver {
 public:
  struct Record {
    Point position;
    std::int64_t sup_abs1 = 0;
    std::int64_t sup_abs2 = 0;
    std::vector<double> integrals;
  };

  CheckpointObserver(std::vector<double> checkpoints, std::vector<LineWeight> weights,
                     Point start = {});

  void hold(double t_start, const Point& at, double h, double v, double duration);
  void jump(double, const Point& to) noexcept {
    sup1_ = std::max(sup1_, to.x1 < 0 ? -to.x1 : to.x1);
    sup2_ = std::max(sup2_, to.x2 < 0 ? -to.x2 : to.x2);
  }
  void end(double time, const Point& at);

  const std::vector<Record>& records() const noexcept { return records_; }
  bool complete() const noexcept { return records_.size() == checkpoints_.size(); }
  /// Running suprema, also meaningful after a truncated run.
  std::int64_t sup_abs1() const noexcept { return sup1_; }
  std::int64_t sup_abs2() const noexcept { return sup2_; }

 private:
  void record(const Point& at);

  std::vector<double> checkpoints_;
  std::vector<LineWeight> weights_;
  std::vector<double> running_;
  std::vector<Record> records_;
  std::int64_t sup1_ = 0;
  std::int64_t sup2_ = 0;
};

// ---------------------------------------------------------------------------

/// CSV rows "time,x1,x2": the start at time 0, then one row per jump.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);
/// Little-endian: u64 record count, then per record f64 time, i32 x1, i32 x2.
/// The first record is the start position at time 0.
void write_trajectory_binary(std::ostream& out, const Trajectory& traj);
Trajectory read_trajectory_binary(std::istream& in);
/// CSV rows "time,value" at the clock knots.
void write_clock_csv(std::ostream& out, const ClockSample& clock);

}  // namespace linewalk
