#include "linewalk/limits.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "linewalk/errors.hpp"
#include "linewalk/io.hpp"
#include "linewalk/rng.hpp"
#include "linewalk/walker.hpp"

namespace linewalk {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

void check_grid(std::span<const double> t_grid) {
  if (t_grid.empty() || t_grid.front() != 0.0)
    throw DomainError("time grid must start at 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw DomainError("time grid must be strictly increasing");
}

/// Memoised measure of each lattice site (or bin): the subordinator increment over it.
class SiteMeasure {
 public:
  SiteMeasure(const SubordinatorPath& path, std::int64_t cells) : path_(path), cells_(cells) {}

  double operator()(std::int64_t k) {
    if (values_.empty()) {
      lo_ = k;
      values_.push_back(compute(k));
      return values_.front();
    }
    if (k < lo_) {
      const auto grow = static_cast<std::size_t>(lo_ - k);
      values_.insert(values_.begin(), grow, -1.0);
      lo_ = k;
    } else if (k >= lo_ + static_cast<std::int64_t>(values_.size())) {
      values_.resize(static_cast<std::size_t>(k - lo_ + 1), -1.0);
    }
    double& slot = values_[static_cast<std::size_t>(k - lo_)];
    if (slot < 0.0) slot = compute(k);
    return slot;
  }

 private:
  double compute(std::int64_t k) const { return path_.aggregate(k * cells_, cells_); }

  const SubordinatorPath& path_;
  std::int64_t cells_;
  std::int64_t lo_ = 0;
  std::vector<double> values_;
};

std::int64_t cells_per_bin(const SubordinatorPath& path, double width) {
  const double ratio = width / path.mesh();
  const auto cells = std::llround(ratio);
  if (cells < 1 || std::abs(ratio - static_cast<double>(cells)) > 1e-9 * ratio)
    throw ConfigError("bin width must be an integer multiple of the subordinator mesh",
                      "bin_width");
  return cells;
}

struct CoreResult {
  std::vector<double> delta;
  std::vector<double> b2;
};

// Position of the SRW (or Brownian path) at each checkpoint, alongside the occupation recorder.
class SitePositions {
 public:
  explicit SitePositions(const std::vector<double>& checkpoints) : checkpoints_(checkpoints) {}
  void hold(double t_start, std::int64_t site, double duration) {
    const double end = t_start + duration;
    while (sites_.size() < checkpoints_.size() && checkpoints_[sites_.size()] <= end)
      sites_.push_back(site);
  }
  void end(double time, std::int64_t site) {
    while (sites_.size() < checkpoints_.size() &&
           checkpoints_[sites_.size()] <= time * (1.0 + 1e-12))
      sites_.push_back(site);
  }
  const std::vector<std::int64_t>& sites() const { return sites_; }

 private:
  const std::vector<double>& checkpoints_;
  std::vector<std::int64_t> sites_;
};

struct SrwTee {
  OccupationRecorder& occ;
  SitePositions& pos;
  void hold(double t, std::int64_t site, double d) {
    occ.hold(t, site, d);
    pos.hold(t, site, d);
  }
  void end(double t, std::int64_t site) {
    occ.end(t, site);
    pos.end(t, site);
  }
};

// Local-time route: snapshots of the occupation field at every grid time.
CoreResult srw_core_local_times(const SubordinatorPath& path, double T,
                                std::span<const double> t_grid, std::uint64_t stream_key) {
  const std::int64_t m = path.cells_per_site(T);
  std::vector<double> checkpoints;
  for (double t : t_grid) checkpoints.push_back(T * t);
  OccupationRecorder occ(checkpoints, 2);
  SitePositions pos(checkpoints);
  SrwTee tee{occ, pos};
  run_srw(checkpoints.back(), derive_key(stream_key, tag(Domain::ks_srw)), tee);

  const double root = std::sqrt(T);
  LocalTimeField field(T, std::vector<double>(t_grid.begin(), t_grid.end()), std::move(occ));
  SiteMeasure mu(path, m);
  CoreResult out;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    double sum = 0.0;
    if (t_grid[j] > 0.0)
      for (std::int64_t k = field.min_site(); k <= field.max_site(); ++k) {
        const double ell = field.ell_site(j, k);
        if (ell > 0.0) sum += ell * mu(k);
      }
    out.delta.push_back(sum);
    out.b2.push_back(static_cast<double>(pos.sites()[j]) / root);
  }
  return out;
}

// Clock route: the same quantity accumulated as (1/sqrt T) int mu(S(s)) ds.
struct SrwClock {
  SiteMeasure& mu;
  const std::vector<double>& checkpoints;
  double scale;
  std::vector<double> delta;
  std::vector<std::int64_t> sites;
  double acc = 0.0;

  void hold(double t_start, std::int64_t site, double duration) {
    const double rate = mu(site);
    const double end = t_start + duration;
    double t = t_start;
    while (delta.size() < checkpoints.size() && checkpoints[delta.size()] <= end) {
      const double upto = checkpoints[delta.size()];
      acc += rate * std::max(upto - t, 0.0);
      t = std::max(t, upto);
      delta.push_back(acc * scale);
      sites.push_back(site);
    }
    acc += rate * (end - t);
  }
  void end(double time, std::int64_t site) {
    while (delta.size() < checkpoints.size() && checkpoints[delta.size()] <= time * (1.0 + 1e-12)) {
      delta.push_back(acc * scale);
      sites.push_back(site);
    }
  }
};

CoreResult srw_core_clock(const SubordinatorPath& path, double T, std::span<const double> t_grid,
                          std::uint64_t stream_key) {
  const std::int64_t m = path.cells_per_site(T);
  std::vector<double> checkpoints;
  for (double t : t_grid) checkpoints.push_back(T * t);
  SiteMeasure mu(path, m);
  SrwClock clock{mu, checkpoints, 1.0 / std::sqrt(T), {}, {}};
  run_srw(checkpoints.back(), derive_key(stream_key, tag(Domain::ks_srw)), clock);
  CoreResult out;
  out.delta = std::move(clock.delta);
  const double root = std::sqrt(T);
  for (auto s : clock.sites) out.b2.push_back(static_cast<double>(s) / root);
  return out;
}

// Brownian route: Euler path with sigma = sqrt 2, occupation density estimated on bins.
CoreResult bm_core(const SubordinatorPath& path, const KSOptions& opts,
                   std::span<const double> t_grid, std::uint64_t stream_key) {
  const double w = opts.bin_width;
  if (!(w > 0.0)) throw ConfigError("bin width must be > 0", "bin_width");
  if (!(opts.bm_step_fraction > 0.0)) throw ConfigError("Brownian step must be > 0", "bm_step");
  const std::int64_t cb = cells_per_bin(path, w);
  const double sd = w * opts.bm_step_fraction;
  const double dt = sd * sd / 2.0;
  SiteMeasure mu(path, cb);
  Stream rng(derive_key(stream_key, tag(Domain::brownian), 2));

  CoreResult out;
  double b = 0.0;
  double t = 0.0;
  double acc = 0.0;
  for (double target : t_grid) {
    while (t < target) {
      const double h = std::min(dt, target - t);
      const auto bin = static_cast<std::int64_t>(std::floor(b / w));
      acc += mu(bin) / w * h;
      b += std::sqrt(2.0 * h) * rng.normal();
      t = h == dt ? t + dt : target;
    }
    out.delta.push_back(acc);
    out.b2.push_back(b);
  }
  return out;
}

CoreResult run_core(const SubordinatorPath& path, const KSOptions& opts,
                    std::span<const double> t_grid, std::uint64_t stream_key, bool clock_form) {
  if (opts.route == KSRoute::binned_bm) return bm_core(path, opts, t_grid, stream_key);
  return clock_form ? srw_core_clock(path, opts.t_proxy, t_grid, stream_key)
                    : srw_core_local_times(path, opts.t_proxy, t_grid, stream_key);
}

bool coarse(const std::vector<double>& values) {
  const double top = values.back();
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] - values[i - 1] >= 0.05 * top) return true;
  return false;
}

SubordinatorPath annealed_path(double alpha, const KSOptions& opts, std::uint64_t stream_key) {
  return SubordinatorPath(alpha, ks_default_mesh(opts), ks_path_key(stream_key));
}

}  // namespace

std::string_view to_string(KSRoute r) { return r == KSRoute::srw ? "srw" : "binned_bm"; }

std::vector<double> brownian_path(double sigma, std::span<const double> t_grid,
                                  std::uint64_t stream_key) {
  check_grid(t_grid);
  if (!(sigma >= 0.0)) throw DomainError("brownian_path: sigma must be >= 0");
  Stream rng(stream_key);
  std::vector<double> out(t_grid.size(), 0.0);
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    out[i] = out[i - 1] + sigma * std::sqrt(t_grid[i] - t_grid[i - 1]) * rng.normal();
  return out;
}

std::uint64_t ks_path_key(std::uint64_t stream_key) {
  return derive_key(stream_key, tag(Domain::subordinator));
}

double ks_default_mesh(const KSOptions& opts) {
  if (!(opts.t_proxy >= 1.0)) throw ConfigError("t_proxy must be >= 1", "t_proxy");
  const double mesh = 1.0 / std::sqrt(opts.t_proxy);
  if (opts.route == KSRoute::binned_bm && opts.bin_width < mesh) return opts.bin_width;
  return mesh;
}

KSProcessSample ks_sample(const SubordinatorPath& path, const KSOptions& opts,
                          std::span<const double> t_grid, std::uint64_t stream_key) {
  check_grid(t_grid);
  CoreResult core = run_core(path, opts, t_grid, stream_key, false);
  KSProcessSample s;
  s.t_grid.assign(t_grid.begin(), t_grid.end());
  s.values = std::move(core.delta);
  s.alpha = path.alpha();
  s.route = opts.route;
  s.coarse_grid = s.values.size() > 1 && coarse(s.values);
  return s;
}

KSProcessSample ks_sample(double alpha, const KSOptions& opts, std::span<const double> t_grid,
                          std::uint64_t stream_key) {
  return ks_sample(annealed_path(alpha, opts, stream_key), opts, t_grid, stream_key);
}

double invert_ks(const KSProcessSample& sample, double u) {
  const auto& v = sample.values;
  if (!(u >= 0.0 && u <= v.back())) throw RangeError("invert_ks: value outside [0, Delta(t_max)]");
  const auto it = std::lower_bound(v.begin(), v.end(), u);
  const auto i = static_cast<std::size_t>(it - v.begin());
  if (i == 0) return sample.t_grid.front();
  const double frac = (u - v[i - 1]) / (v[i] - v[i - 1]);
  return sample.t_grid[i - 1] + frac * (sample.t_grid[i] - sample.t_grid[i - 1]);
}

LimitPairSample limit_pair(const SubordinatorPath& path, const KSOptions& opts,
                           std::span<const double> t_grid, std::uint64_t stream_key) {
  check_grid(t_grid);
  CoreResult core = run_core(path, opts, t_grid, stream_key, true);
  LimitPairSample p;
  p.kind = PairKind::conv;
  p.t_grid.assign(t_grid.begin(), t_grid.end());
  p.first = brownian_path(kSqrt2, core.delta, derive_key(stream_key, tag(Domain::brownian), 1));
  p.second = std::move(core.b2);
  p.clock = std::move(core.delta);
  return p;
}

LimitPairSample limit_pair(double alpha, const KSOptions& opts, std::span<const double> t_grid,
                           std::uint64_t stream_key) {
  return limit_pair(annealed_path(alpha, opts, stream_key), opts, t_grid, stream_key);
}

LimitPairSample fin_pair(const SubordinatorPath& path, const KSOptions& opts,
                         std::span<const double> t_grid, std::uint64_t stream_key,
                         int fine_steps) {
  check_grid(t_grid);
  if (fine_steps < 1) throw DomainError("fin_pair: fine_steps must be >= 1");
  const double target = t_grid.back();
  double s_max = 1.0;
  CoreResult core;
  std::vector<double> fine;
  // The proxy walk is a fixed function of the stream, so extending the
  // horizon only appends to the same path.
  for (;;) {
    const auto n = static_cast<std::size_t>(std::llround(s_max * fine_steps));
    fine.resize(n + 1);
    for (std::size_t k = 0; k <= n; ++k) fine[k] = static_cast<double>(k) / fine_steps;
    core = run_core(path, opts, fine, stream_key, true);
    if (core.delta.back() >= target) break;
    if (s_max >= 1048576.0) throw RangeError("fin_pair: Delta did not reach the requested time");
    s_max *= 2.0;
  }
  KSProcessSample delta;
  delta.t_grid = fine;
  delta.values = core.delta;

  LimitPairSample p;
  p.kind = PairKind::fin;
  p.t_grid.assign(t_grid.begin(), t_grid.end());
  p.first = brownian_path(kSqrt2, t_grid, derive_key(stream_key, tag(Domain::brownian), 1));
  for (double t : t_grid) {
    const double s = invert_ks(delta, t);
    const double pos = s * fine_steps;
    const auto k = std::min(static_cast<std::size_t>(pos), fine.size() - 2);
    const double frac = pos - static_cast<double>(k);
    p.clock.push_back(s);
    p.second.push_back((1.0 - frac) * core.b2[k] + frac * core.b2[k + 1]);
  }
  return p;
}

LimitPairSample fin_pair(double alpha, const KSOptions& opts, std::span<const double> t_grid,
                         std::uint64_t stream_key, int fine_steps) {
  return fin_pair(annealed_path(alpha, opts, stream_key), opts, t_grid, stream_key, fine_steps);
}

void write_path_csv(std::ostream& out, std::span<const double> t, std::span<const double> values) {
  out << "t,value\n";
  for (std::size_t i = 0; i < t.size() && i < values.size(); ++i)
    out << format_double(t[i]) << ',' << format_double(values[i]) << '\n';
}

void write_pair_csv(std::ostream& out, const LimitPairSample& pair) {
  out << "t,first,second\n";
  for (std::size_t i = 0; i < pair.t_grid.size(); ++i)
    out << format_double(pair.t_grid[i]) << ',' << format_double(pair.first[i]) << ','
        << format_double(pair.second[i]) << '\n';
}

}  // namespace linewalk
