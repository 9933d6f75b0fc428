#include "linewalk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "linewalk/errors.hpp"
#include "linewalk/parallel.hpp"

namespace linewalk {

double epsilon_of(double alpha) {
  if (!(alpha > 0.0)) throw DomainError("alpha must be > 0");
  return std::max(0.5 * (1.0 / alpha - 1.0), 0.0);
}

double ScalingParams::gamma1() const {
  if (supercritical) throw DomainError("gamma is undefined: eps1 * eps2 >= 1 (supercritical)");
  return (1.0 + eps1) / (2.0 * (1.0 - eps_product));
}

double ScalingParams::gamma2() const {
  if (supercritical) throw DomainError("gamma is undefined: eps1 * eps2 >= 1 (supercritical)");
  return (1.0 + eps2) / (2.0 * (1.0 - eps_product));
}

ScalingParams scaling_params(double alpha1, double alpha2, std::optional<double> alpha1_minus,
                             std::optional<double> alpha2_minus) {
  ScalingParams p;
  p.alpha1 = alpha1;
  p.alpha2 = alpha2;
  p.eps1 = epsilon_of(alpha1);
  p.eps2 = epsilon_of(alpha2);
  p.eps_product = p.eps1 * p.eps2;
  p.supercritical = p.eps_product >= 1.0;
  p.delta = 0.5 * (1.0 + 1.0 / alpha1);
  if (alpha1_minus) {
    if (!(*alpha1_minus > 0.0 && *alpha1_minus < alpha1))
      throw DomainError("alpha1_minus must lie in (0, alpha1)");
  }
  if (alpha2_minus) {
    if (!(*alpha2_minus > 0.0 && *alpha2_minus < alpha2))
      throw DomainError("alpha2_minus must lie in (0, alpha2)");
  }
  p.eps1_plus = alpha1_minus ? epsilon_of(*alpha1_minus) : p.eps1;
  p.eps2_plus = alpha2_minus ? epsilon_of(*alpha2_minus) : p.eps2;
  const double prod = p.eps1_plus * p.eps2_plus;
  p.A_defined = prod < 1.0;
  if (p.A_defined) {
    p.A1 = (1.0 + p.eps1_plus) / (1.0 - prod);
    p.A2 = (1.0 + p.eps2_plus) / (1.0 - prod);
  }
  return p;
}

// ---------------------------------------------------------------------------

KSResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double n = static_cast<double>(x.size());
  const double m = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  return {d, 1.628 * std::sqrt((n + m) / (n * m))};
}

double ks_one_sample(std::span<const double> a, double (*cdf)(double)) {
  if (a.empty()) throw DomainError("ks_one_sample: empty sample");
  std::vector<double> x(a.begin(), a.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

double median(std::vector<double> v) { return quantile(std::move(v), 0.5); }

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw DomainError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  // Linear interpolation between order statistics (type 7).
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto k = static_cast<std::size_t>(std::floor(pos));
  if (k + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(k);
  if (frac == 0.0 || v[k] == v[k + 1]) return v[k];
  return v[k] + frac * (v[k + 1] - v[k]);
}

double interquartile_range(std::vector<double> v) {
  return quantile(v, 0.75) - quantile(v, 0.25);
}

double mean(std::span<const double> v) {
  if (v.empty()) throw DomainError("mean of an empty sample");
  // Sequential sum in index order: the order is fixed by run index, not by thread.
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) throw DomainError("standard deviation needs at least 2 values");
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

ExponentFit fit_power_law(std::span<const double> scales, std::span<const double> statistics) {
  if (scales.size() != statistics.size() || scales.size() < 2)
    throw DomainError("fit_power_law: need at least two (scale, statistic) pairs");
  ExponentFit f;
  f.scales.assign(scales.begin(), scales.end());
  f.statistics.assign(statistics.begin(), statistics.end());
  const std::size_t n = scales.size();
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(scales[i] > 0.0) || !(statistics[i] > 0.0))
      throw DomainError("fit_power_law: scales and statistics must be > 0");
    x[i] = std::log(scales[i]);
    y[i] = std::log(statistics[i]);
  }
  const double mx = mean(x);
  const double my = mean(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit_power_law: scales must not all be equal");
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    sse += r * r;
  }
  f.r_squared = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  f.stderr_slope = n > 2 ? std::sqrt(sse / static_cast<double>(n - 2) / sxx) : 0.0;
  const auto [lo, hi] = std::minmax_element(scales.begin(), scales.end());
  f.reportable = n >= 4 && std::log10(*hi / *lo) >= 2.0 - 1e-12;
  return f;
}

// ---------------------------------------------------------------------------

std::uint64_t ensemble_env_seed(std::uint64_t seed, std::size_t j, std::size_t environments) {
  if (environments <= 1) return seed;
  return derive_key(seed, tag(Domain::ensemble), j);
}

std::vector<RunRecord> run_ensemble(const EnsembleSpec& spec, unsigned workers) {
  if (spec.checkpoints.empty()) throw ConfigError("ensemble needs at least one checkpoint time");
  if (spec.environments == 0) throw ConfigError("environments must be >= 1", "environments");
  spec.env.validate();
  spec.kind.validate(spec.env);
  const double horizon = spec.checkpoints.back();
  struct NoState {};
  return parallel_map<RunRecord>(
      spec.runs, workers, [] { return NoState{}; },
      [&](NoState&, std::size_t i) {
        const std::size_t j = i % spec.environments;
        const EnvironmentSpec es =
            spec.env.with_seed(ensemble_env_seed(spec.env.seed, j, spec.environments));
        const Environment env(es, spec.env_scale);
        CheckpointObserver obs(spec.checkpoints, spec.weights);
        const WalkOutcome out = run_walk(env, spec.kind, {}, StopRule{horizon, spec.max_jumps},
                                         walk_stream_key(es.seed, spec.stream_base + i), obs);
        RunRecord r;
        r.records = obs.records();
        r.jumps = out.jumps;
        r.truncated = out.truncated;
        r.environment = j;
        r.sup_abs1 = obs.sup_abs1();
        r.sup_abs2 = obs.sup_abs2();
        return r;
      });
}

ExponentFitReport exponent_fit(const ExponentFitRequest& req, unsigned workers) {
  if (req.T_grid.size() < 4)
    throw ConfigError("exponent fit needs a T grid of at least 4 scales", "T_grid");
  if (req.runs == 0) throw ConfigError("runs must be >= 1", "runs");
  for (std::size_t i = 0; i < req.T_grid.size(); ++i) {
    if (!(req.T_grid[i] >= 1.0)) throw ConfigError("T values must be >= 1", "T_grid");
    if (i > 0 && !(req.T_grid[i] > req.T_grid[i - 1]))
      throw ConfigError("T grid must be increasing", "T_grid");
  }

  ExponentFitReport rep;
  std::size_t total = 0, excluded = 0;
  for (std::size_t ti = 0; ti < req.T_grid.size(); ++ti) {
    const double T = req.T_grid[ti];
    EnsembleSpec es;
    es.env = req.env;
    es.env_scale = std::pow(T, req.env_scale_power);
    es.kind = req.kind;
    es.checkpoints = {T};
    es.runs = req.runs;
    es.environments = req.environments;
    es.stream_base = static_cast<std::uint64_t>(ti) << 32;
    es.max_jumps = req.max_jumps;
    const auto records = run_ensemble(es, workers);

    ScaleRow row;
    row.T = T;
    row.env_scale = es.env_scale;
    row.runs = records.size();
    for (const auto& r : records) {
      if (r.truncated || r.records.empty()) {
        ++row.excluded;
        continue;
      }
      const Point x = r.records.back().position;
      row.abs1.push_back(std::abs(static_cast<double>(x.x1)));
      row.abs2.push_back(std::abs(static_cast<double>(x.x2)));
    }
    total += row.runs;
    excluded += row.excluded;
    if (!row.abs1.empty()) {
      row.median_abs1 = median(row.abs1);
      row.median_abs2 = median(row.abs2);
    }
    rep.rows.push_back(std::move(row));
  }
  rep.exclusion_rate = static_cast<double>(excluded) / static_cast<double>(total);
  if (rep.exclusion_rate > 0.10) {
    rep.refused = true;
    std::ostringstream os;
    os << "fit refused: " << excluded << " of " << total << " runs truncated (> 10%)";
    rep.refusal = os.str();
    return rep;
  }
  std::vector<double> Ts, m1, m2;
  for (const auto& row : rep.rows) {
    if (!(row.median_abs1 > 0.0) || !(row.median_abs2 > 0.0)) {
      rep.refused = true;
      rep.refusal = "fit refused: a median displacement is zero; use larger T";
      return rep;
    }
    Ts.push_back(row.T);
    m1.push_back(row.median_abs1);
    m2.push_back(row.median_abs2);
  }
  rep.fit1 = fit_power_law(Ts, m1);
  rep.fit2 = fit_power_law(Ts, m2);
  return rep;
}

std::vector<double> ratio_statistic(const EnvironmentSpec& env, double T, std::size_t runs,
                                    unsigned workers) {
  EnsembleSpec es;
  es.env = env;
  es.env_scale = T;
  es.kind = WalkKind::y();
  es.checkpoints = {T};
  es.weights = {LineWeight::h_over_v(), LineWeight::h()};
  es.runs = runs;
  const auto records = run_ensemble(es, workers);
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (r.truncated || r.records.empty())
      throw TruncatedError("ratio statistic: Y walk hit the jump budget", 0.0);
    const auto& integ = r.records.back().integrals;
    out.push_back(integ[0] / integ[1]);
  }
  return out;
}

double ergodic_average(const Environment& env, const WalkKind& kind, double T, LineWeight weight,
                       std::uint64_t stream) {
  if (!(T > 0.0)) throw DomainError("ergodic_average: T must be > 0");
  CheckpointObserver obs({T}, {weight});
  const WalkOutcome out = run_walk(env, kind, {}, StopRule{T, 20'000'000'000ULL},
                                   walk_stream_key(env.spec().seed, stream), obs);
  if (out.truncated || !obs.complete())
    throw TruncatedError("ergodic_average: walk hit the jump budget", out.end_time);
  return obs.records().back().integrals[0] / T;
}

namespace {
struct ColumnIntegral {
  const Environment& env;
  double acc = 0.0;
  void hold(double, std::int64_t site, double duration) { acc += env.V(site) * duration; }
  void end(double, std::int64_t) {}
};
}  // namespace

double column_average(const Environment& env, double T, std::uint64_t stream) {
  if (!(T > 0.0)) throw DomainError("column_average: T must be > 0");
  ColumnIntegral obs{env};
  run_srw(T, derive_key(walk_stream_key(env.spec().seed, stream), tag(Domain::ks_srw)), obs);
  return obs.acc / T;
}

double pareto_moment(double alpha, double floor, double beta) {
  if (!(beta < alpha)) throw DomainError("pareto_moment: needs beta < alpha");
  return alpha * std::pow(floor, beta) / (alpha - beta);
}

OverscalingReport overscaling_study(const EnvironmentSpec& env, double a1, double a2,
                                    const std::vector<double>& T_grid, std::size_t runs,
                                    std::size_t environments, unsigned workers,
                                    std::uint64_t max_jumps) {
  // A constant line has every moment, so it contributes eps = 0.
  constexpr double all_moments = std::numeric_limits<double>::infinity();
  const ScalingParams p =
      scaling_params(env.h_mode == HMode::constant ? all_moments : env.alpha1,
                     env.v_mode == VMode::constant ? all_moments : env.alpha2);
  if (p.supercritical)
    throw ConfigError("over-scaling study needs eps1 * eps2 < 1", "alpha1");
  OverscalingReport rep;
  rep.a1 = a1;
  rep.a2 = a2;
  rep.threshold1 = p.overscaling_threshold(1);
  rep.threshold2 = p.overscaling_threshold(2);
  if (!(a1 > rep.threshold1))
    rep.warnings.push_back("a1 is not above (1+eps1)/(1-eps1 eps2); the statistic need not vanish");
  if (!(a2 > rep.threshold2))
    rep.warnings.push_back("a2 is not above (1+eps2)/(1-eps1 eps2); the statistic need not vanish");

  for (std::size_t ti = 0; ti < T_grid.size(); ++ti) {
    const double T = T_grid[ti];
    EnsembleSpec es;
    es.env = env;
    es.env_scale = T;
    es.kind = WalkKind::vsrw();
    es.checkpoints = {T};
    es.runs = runs;
    es.environments = environments;
    es.stream_base = static_cast<std::uint64_t>(ti) << 32;
    es.max_jumps = max_jumps;
    const auto records = run_ensemble(es, workers);
    OverscalingRow row;
    row.T = T;
    row.runs = records.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> lo1, lo2, hi1, hi2;
    for (const auto& r : records) {
      const double v1 = std::pow(T, -a1 / 2.0) * static_cast<double>(r.sup_abs1);
      const double v2 = std::pow(T, -a2 / 2.0) * static_cast<double>(r.sup_abs2);
      lo1.push_back(v1);
      lo2.push_back(v2);
      hi1.push_back(r.truncated ? inf : v1);
      hi2.push_back(r.truncated ? inf : v2);
      if (r.truncated) ++row.truncated;
    }
    if (!records.empty()) {
      row.median_stat1 = median(lo1);
      row.median_stat2 = median(lo2);
      row.median_stat1_upper = median(hi1);
      row.median_stat2_upper = median(hi2);
    }
    rep.rows.push_back(row);
  }
  return rep;
}

ConjectureReport conjecture_explorer(const EnvironmentSpec& env, const std::vector<double>& T_grid,
                                     std::size_t runs, std::size_t environments,
                                     unsigned workers) {
  ConjectureReport rep;
  rep.params = scaling_params(env.alpha1, env.alpha2);
  if (rep.params.supercritical)
    throw ConfigError("conjecture explorer needs eps1 * eps2 < 1", "alpha1");
  rep.target1 = rep.params.gamma1();
  rep.target2 = rep.params.gamma2();
  if (env.alpha1 < 1.0 && env.alpha2 < 1.0) rep.regime = "case1";
  else if (env.alpha1 < 1.0 || env.alpha2 < 1.0) rep.regime = "case2";
  else rep.regime = "diffusive";
  ExponentFitRequest req;
  req.env = env;
  req.kind = WalkKind::vsrw();
  req.T_grid = T_grid;
  req.runs = runs;
  req.environments = environments;
  rep.fit = exponent_fit(req, workers);
  return rep;
}

}  // namespace linewalk
