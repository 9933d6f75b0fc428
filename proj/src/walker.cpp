#include "linewalk/walker.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "linewalk/errors.hpp"
#include "linewalk/io.hpp"

namespace linewalk {

std::string_view to_string(WalkTag t) {
  switch (t) {
    case WalkTag::vsrw: return "vsrw";
    case WalkTag::csrw: return "csrw";
    case WalkTag::y: return "y";
    case WalkTag::xstar: return "xstar";
  }
  return "?";
}

WalkTag parse_walk_tag(std::string_view s) {
  if (s == "vsrw") return WalkTag::vsrw;
  if (s == "csrw") return WalkTag::csrw;
  if (s == "y") return WalkTag::y;
  if (s == "xstar") return WalkTag::xstar;
  throw ConfigError("unknown walk kind '" + std::string(s) + "'", "walk");
}

void WalkKind::validate(const EnvironmentSpec& spec) const {
  if (tag != WalkTag::xstar) return;
  if (!(alpha1_minus > 0.0 && alpha1_minus < spec.alpha1))
    throw ConfigError("alpha1_minus must lie in (0, alpha1)", "alpha1_minus");
  if (!(alpha2_minus > 0.0 && alpha2_minus < spec.alpha2))
    throw ConfigError("alpha2_minus must lie in (0, alpha2)", "alpha2_minus");
}

Point Trajectory::position_at(double t) const {
  if (!(t >= 0.0 && t <= horizon))
    throw RangeError("position_at: time outside [0, horizon]");
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return positions[static_cast<std::size_t>(it - jump_times.begin())];
}

Trajectory TrajectoryRecorder::take(bool truncated) {
  traj_.horizon = traj_.jump_times.empty() ? end_ : std::max(end_, traj_.jump_times.back());
  traj_.truncated = truncated;
  return std::move(traj_);
}

Trajectory simulate(const Environment& env, const WalkKind& kind, Point start,
                    const StopRule& stop, std::uint64_t stream) {
  if (!(stop.horizon > 0.0) || stop.max_jumps == 0)
    throw DomainError("simulate: stop rule must be positive");
  kind.validate(env.spec());
  TrajectoryRecorder rec(start);
  const WalkOutcome out =
      run_walk(env, kind, start, stop, walk_stream_key(env.spec().seed, stream), rec);
  return rec.take(out.truncated);
}

std::uint64_t jump_count(const Trajectory& traj, double t) {
  if (t > traj.horizon) throw RangeError("jump_count: time beyond the trajectory horizon");
  return static_cast<std::uint64_t>(
      std::upper_bound(traj.jump_times.begin(), traj.jump_times.end(), t) -
      traj.jump_times.begin());
}

ProbeResult explosion_probe(const Environment& env, const WalkKind& kind, double t,
                            std::uint64_t jump_cap, std::uint64_t stream) {
  NullObserver obs;
  const WalkOutcome out = run_walk(env, kind, {}, StopRule{t, jump_cap},
                                   walk_stream_key(env.spec().seed, stream), obs);
  return out.truncated ? ProbeResult::truncated : ProbeResult::completed;
}

// ---------------------------------------------------------------------------

SiteWeight site_weight(const Environment& env, LineWeight w) {
  return [&env, w](const Point& p) { return w(env.H(p.x2), env.V(p.x1)); };
}

double ClockSample::operator()(double t) const {
  if (!(t >= 0.0 && t <= horizon())) throw RangeError("clock evaluated outside [0, horizon]");
  auto it = std::upper_bound(knot_times.begin(), knot_times.end(), t);
  std::size_t i = static_cast<std::size_t>(it - knot_times.begin());
  if (i == 0) return values.front();
  --i;
  if (i >= slopes.size()) return values.back();
  return values[i] + slopes[i] * (t - knot_times[i]);
}

ClockSample ClockSample::inverse() const {
  ClockSample inv;
  inv.knot_times = values;
  inv.values = knot_times;
  inv.slopes.reserve(slopes.size());
  for (double s : slopes) inv.slopes.push_back(1.0 / s);
  return inv;
}

ClockSample additive_functional(const Trajectory& traj, const SiteWeight& weight,
                                double scale_pre, double scale_post, double required_time) {
  if (!(scale_pre > 0.0) || !(scale_post > 0.0))
    throw DomainError("additive_functional: scale factors must be > 0");
  if (required_time > 0.0 && traj.horizon < scale_pre * required_time)
    throw TruncatedError("trajectory ends before the requested time", traj.horizon / scale_pre);

  ClockSample c;
  const std::size_t n = traj.jump_times.size();
  c.knot_times.reserve(n + 2);
  c.values.reserve(n + 2);
  c.slopes.reserve(n + 1);
  c.knot_times.push_back(0.0);
  c.values.push_back(0.0);
  double prev = 0.0;
  double acc = 0.0;
  for (std::size_t i = 0; i <= n; ++i) {
    const double next = i < n ? traj.jump_times[i] : traj.horizon;
    const double w = weight(traj.positions[i]);
    if (!(w > 0.0)) throw DomainError("additive_functional: weight must be > 0 on visited sites");
    acc += w * (next - prev);
    c.knot_times.push_back(next / scale_pre);
    c.values.push_back(scale_post * acc);
    c.slopes.push_back(scale_post * scale_pre * w);
    prev = next;
  }
  return c;
}

double invert_clock(const ClockSample& clock, double u) {
  if (!(u >= 0.0 && u <= clock.final_value()))
    throw RangeError("invert_clock: value outside the attained range of the clock");
  auto it = std::lower_bound(clock.values.begin(), clock.values.end(), u);
  std::size_t i = static_cast<std::size_t>(it - clock.values.begin());
  if (i == 0) return clock.knot_times.front();
  --i;  // values[i] < u <= values[i + 1]
  const double t = clock.knot_times[i] + (u - clock.values[i]) / clock.slopes[i];
  return std::min(t, clock.knot_times[i + 1]);
}

Trajectory time_change(const Trajectory& traj, const ClockSample& clock) {
  if (clock.knot_times.size() != traj.jump_times.size() + 2)
    throw DomainError("time_change: clock was not built from this trajectory");
  Trajectory out;
  out.positions = traj.positions;
  out.truncated = traj.truncated;
  out.jump_times.reserve(traj.jump_times.size());
  for (std::size_t i = 0; i < traj.jump_times.size(); ++i) {
    double t = clock.values[i + 1];
    if (!out.jump_times.empty() && !(t > out.jump_times.back()))
      t = std::nextafter(out.jump_times.back(), std::numeric_limits<double>::infinity());
    out.jump_times.push_back(t);
  }
  out.horizon = clock.final_value();
  return out;
}

// ---------------------------------------------------------------------------

OccupationRecorder::OccupationRecorder(std::vector<double> checkpoints, int component)
    : checkpoints_(std::move(checkpoints)), component_(component) {
  if (component != 1 && component != 2) throw DomainError("component must be 1 or 2");
  if (!std::is_sorted(checkpoints_.begin(), checkpoints_.end()))
    throw DomainError("checkpoint times must be nondecreasing");
}

void OccupationRecorder::credit(std::int64_t site, double amount) {
  if (current_.empty()) {
    min_site_ = site;
    current_.push_back(0.0);
  } else if (site < min_site_) {
    const auto grow = static_cast<std::size_t>(min_site_ - site);
    current_.insert(current_.begin(), grow, 0.0);
    min_site_ = site;
  } else if (site >= min_site_ + static_cast<std::int64_t>(current_.size())) {
    current_.resize(static_cast<std::size_t>(site - min_site_ + 1), 0.0);
  }
  current_[static_cast<std::size_t>(site - min_site_)] += amount;
}

void OccupationRecorder::take_snapshot() {
  snapshots_.push_back(current_);
  snapshot_min_.push_back(min_site_);
  ++next_;
}

void OccupationRecorder::add(double t_start, std::int64_t site, double duration) {
  const double end = t_start + duration;
  double t = t_start;
  while (next_ < checkpoints_.size() && checkpoints_[next_] <= end) {
    credit(site, std::max(checkpoints_[next_] - t, 0.0));
    t = std::max(t, checkpoints_[next_]);
    take_snapshot();
  }
  credit(site, end - t);
}

void OccupationRecorder::finish(double time, std::int64_t site) {
  while (next_ < checkpoints_.size() &&
         checkpoints_[next_] <= time * (1.0 + 1e-12)) {
    if (current_.empty()) credit(site, 0.0);
    take_snapshot();
  }
}

double OccupationRecorder::occupation(std::size_t j, std::int64_t site) const {
  const auto& snap = snapshots_.at(j);
  const std::int64_t i = site - snapshot_min_[j];
  if (i < 0 || i >= static_cast<std::int64_t>(snap.size())) return 0.0;
  return snap[static_cast<std::size_t>(i)];
}

LocalTimeField::LocalTimeField(double T, std::vector<double> t_grid, OccupationRecorder recorder)
    : T_(T), t_grid_(std::move(t_grid)), rec_(std::move(recorder)) {
  if (rec_.snapshots_taken() != t_grid_.size())
    throw TruncatedError("local times: walk ended before the last requested time",
                         rec_.snapshots_taken() == 0
                             ? 0.0
                             : t_grid_[rec_.snapshots_taken() - 1]);
}

double LocalTimeField::ell_site(std::size_t j, std::int64_t site) const {
  return rec_.occupation(j, site) / std::sqrt(T_);
}

double LocalTimeField::ell(std::size_t j, double x) const {
  return ell_site(j, static_cast<std::int64_t>(std::floor(std::sqrt(T_) * x)));
}

double LocalTimeField::ell_interpolated(std::size_t j, double x) const {
  const double y = std::sqrt(T_) * x;
  const double k = std::floor(y);
  const double frac = y - k;
  const auto site = static_cast<std::int64_t>(k);
  return (1.0 - frac) * ell_site(j, site) + frac * ell_site(j, site + 1);
}

double LocalTimeField::mass(std::size_t j) const {
  double sum = 0.0;
  for (double v : rec_.snapshot(j)) sum += v;
  return sum / std::sqrt(T_);
}

std::int64_t LocalTimeField::min_site() const { return rec_.snapshot_min(t_grid_.size() - 1); }

std::int64_t LocalTimeField::max_site() const {
  return min_site() + static_cast<std::int64_t>(rec_.snapshot(t_grid_.size() - 1).size()) - 1;
}

LocalTimeField local_times(const Trajectory& traj, int component, double T,
                           std::vector<double> t_grid) {
  if (!(T >= 1.0)) throw DomainError("local_times: T must be >= 1");
  std::vector<double> checkpoints;
  checkpoints.reserve(t_grid.size());
  for (double t : t_grid) checkpoints.push_back(T * t);
  OccupationRecorder rec(std::move(checkpoints), component);
  double prev = 0.0;
  const std::size_t n = traj.jump_times.size();
  for (std::size_t i = 0; i <= n; ++i) {
    const double next = i < n ? traj.jump_times[i] : traj.horizon;
    rec.hold(prev, traj.positions[i], 0.0, 0.0, next - prev);
    prev = next;
  }
  rec.end(traj.horizon, traj.positions.back());
  return LocalTimeField(T, std::move(t_grid), std::move(rec));
}

// ---------------------------------------------------------------------------

CheckpointObserver::CheckpointObserver(std::vector<double> checkpoints,
                                       std::vector<LineWeight> weights, Point start)
    : checkpoints_(std::move(checkpoints)),
      weights_(std::move(weights)),
      running_(weights_.size(), 0.0),
      sup1_(start.x1 < 0 ? -start.x1 : start.x1),
      sup2_(start.x2 < 0 ? -start.x2 : start.x2) {
  records_.reserve(checkpoints_.size());
}

void CheckpointObserver::record(const Point& at) {
  records_.push_back({at, sup1_, sup2_, running_});
}

void CheckpointObserver::hold(double t_start, const Point& at, double h, double v,
                              double duration) {
  const double end = t_start + duration;
  double t = t_start;
  while (records_.size() < checkpoints_.size() && checkpoints_[records_.size()] <= end) {
    const double upto = checkpoints_[records_.size()];
    for (std::size_t k = 0; k < weights_.size(); ++k)
      running_[k] += weights_[k](h, v) * std::max(upto - t, 0.0);
    t = std::max(t, upto);
    record(at);
  }
  if (end > t)
    for (std::size_t k = 0; k < weights_.size(); ++k) running_[k] += weights_[k](h, v) * (end - t);
}

void CheckpointObserver::end(double time, const Point& at) {
  while (records_.size() < checkpoints_.size() &&
         checkpoints_[records_.size()] <= time * (1.0 + 1e-12))
    record(at);
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts are not supported");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.write(buf, sizeof(T));
}

template <class T>
T get_le(std::istream& in) {
  char buf[sizeof(T)];
  if (!in.read(buf, sizeof(T))) throw DomainError("binary trajectory: unexpected end of data");
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

std::int32_t narrow_coordinate(std::int64_t x) {
  if (x < std::numeric_limits<std::int32_t>::min() || x > std::numeric_limits<std::int32_t>::max())
    throw RangeError("binary trajectory: coordinate does not fit in 32 bits");
  return static_cast<std::int32_t>(x);
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "time,x1,x2\n";
  for (std::size_t i = 0; i < traj.positions.size(); ++i) {
    const double t = i == 0 ? 0.0 : traj.jump_times[i - 1];
    out << format_double(t) << ',' << traj.positions[i].x1 << ',' << traj.positions[i].x2 << '\n';
  }
}

void write_trajectory_binary(std::ostream& out, const Trajectory& traj) {
  put_le<std::uint64_t>(out, traj.positions.size());
  for (std::size_t i = 0; i < traj.positions.size(); ++i) {
    put_le<double>(out, i == 0 ? 0.0 : traj.jump_times[i - 1]);
    put_le<std::int32_t>(out, narrow_coordinate(traj.positions[i].x1));
    put_le<std::int32_t>(out, narrow_coordinate(traj.positions[i].x2));
  }
}

Trajectory read_trajectory_binary(std::istream& in) {
  const auto count = get_le<std::uint64_t>(in);
  if (count == 0) throw DomainError("binary trajectory: empty record list");
  Trajectory traj;
  traj.positions.reserve(count);
  traj.jump_times.reserve(count - 1);
  for (std::uint64_t i = 0; i < count; ++i) {
    const double t = get_le<double>(in);
    const auto x1 = get_le<std::int32_t>(in);
    const auto x2 = get_le<std::int32_t>(in);
    if (i > 0) traj.jump_times.push_back(t);
    traj.positions.push_back({x1, x2});
  }
  traj.horizon = traj.jump_times.empty() ? 0.0 : traj.jump_times.back();
  return traj;
}

void write_clock_csv(std::ostream& out, const ClockSample& clock) {
  out << "time,value\n";
  for (std::size_t i = 0; i < clock.knot_times.size(); ++i)
    out << format_double(clock.knot_times[i]) << ',' << format_double(clock.values[i]) << '\n';
}

}  // namespace linewalk
