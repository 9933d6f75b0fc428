#include "linewalk/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "linewalk/envgen.hpp"
#include "linewalk/errors.hpp"
#include "linewalk/limits.hpp"
#include "linewalk/parallel.hpp"
#include "linewalk/rng.hpp"
#include "linewalk/stats.hpp"
#include "linewalk/walker.hpp"

namespace linewalk {

double DiffIneqCase::B2() const {
  if (!(eps2_plus > 0.0)) throw DomainError("B2 needs eps2_plus > 0");
  return A2() / eps2_plus;
}

void DiffIneqCase::validate(DiffSystem system) const {
  if (!(C >= 0.0) || !(kappa >= 0.0)) throw DomainError("C and kappa must be >= 0");
  if (!(eps1_plus >= 0.0) || !(eps2_plus >= 0.0)) throw DomainError("eps_plus must be >= 0");
  if (!(eps1_plus * eps2_plus < 1.0)) throw DomainError("eps1_plus * eps2_plus must be < 1");
  if (system == DiffSystem::second && !(eps2_plus > 0.0))
    throw DomainError("the second system needs eps2_plus > 0");
}

namespace {

struct Fraction {
  __int128 num = 0;
  __int128 den = 1;
};

__int128 gcd128(__int128 a, __int128 b) {
  if (a < 0) a = -a;
  if (b < 0) b = -b;
  while (b != 0) {
    const __int128 r = a % b;
    a = b;
    b = r;
  }
  return a == 0 ? 1 : a;
}

Fraction reduce(__int128 n, __int128 d) {
  if (d == 0) throw DomainError("fraction with zero denominator");
  if (d < 0) n = -n, d = -d;
  const __int128 g = gcd128(n, d);
  return {n / g, d / g};
}

Fraction operator+(Fraction a, Fraction b) { return reduce(a.num * b.den + b.num * a.den, a.den * b.den); }
Fraction operator-(Fraction a, Fraction b) { return reduce(a.num * b.den - b.num * a.den, a.den * b.den); }
Fraction operator*(Fraction a, Fraction b) { return reduce(a.num * b.num, a.den * b.den); }
Fraction operator/(Fraction a, Fraction b) { return reduce(a.num * b.den, a.den * b.num); }
bool operator==(Fraction a, Fraction b) { return a.num == b.num && a.den == b.den; }

Fraction from_decimal(double x) {
  constexpr long long den = 1'000'000;
  const long long n = std::llround(x * static_cast<double>(den));
  if (std::abs(static_cast<double>(n) / static_cast<double>(den) - x) > 1e-15 * std::max(1.0, std::abs(x)))
    throw DomainError("exact identity check needs a decimal with at most 6 places");
  return reduce(n, den);
}

}  // namespace

bool a_identities_exact(double eps1_plus, double eps2_plus) {
  const Fraction e1 = from_decimal(eps1_plus), e2 = from_decimal(eps2_plus), one{1, 1};
  const Fraction denom = one - e1 * e2;
  if (denom.num <= 0) throw DomainError("eps1_plus * eps2_plus must be < 1");
  const Fraction a1 = (one + e1) / denom;
  const Fraction a2 = (one + e2) / denom;
  return a1 - one == e1 * a2 && a2 - one == e2 * a1;
}

XY diffineq_closed_form(const DiffIneqCase& c, double t, DiffSystem system) {
  c.validate(system);
  const double ck = c.C * c.kappa;
  const double a1 = c.A1();
  const double b = system == DiffSystem::first ? c.A2() : c.B2();
  return {std::pow(std::pow(ck, 1.0 / a1) + c.C * t, a1),
          std::pow(std::pow(ck, 1.0 / b) + c.C * t, b)};
}

namespace {

XY rhs(const DiffIneqCase& c, DiffSystem system, XY s) {
  if (system == DiffSystem::first)
    return {c.C * c.A1() * std::pow(s.y, c.eps1_plus), c.C * c.A2() * std::pow(s.x, c.eps2_plus)};
  return {c.C * c.A1() * std::pow(s.y, c.eps1_plus * c.eps2_plus),
          c.C * c.B2() * std::pow(s.x, c.eps2_plus) * std::pow(s.y, 1.0 - c.eps2_plus)};
}

std::vector<XY> rk4(const DiffIneqCase& c, DiffSystem system, const std::vector<double>& t_grid,
                    double step) {
  std::vector<long long> marks;
  for (double t : t_grid) {
    const double r = t / step;
    const auto k = std::llround(r);
    if (k < 0 || std::abs(r - static_cast<double>(k)) > 1e-6)
      throw DomainError("diffineq_integrate: grid times must be nonnegative multiples of the step");
    marks.push_back(k);
  }
  if (!std::is_sorted(marks.begin(), marks.end()))
    throw DomainError("diffineq_integrate: grid must be sorted");

  std::vector<XY> out;
  out.reserve(t_grid.size());
  const double ck = c.C * c.kappa;
  XY s{ck, ck};
  if (ck == 0.0) {
    out.assign(t_grid.size(), XY{0.0, 0.0});
    return out;
  }
  long long k = 0;
  std::size_t next = 0;
  const double h = step;
  while (next < marks.size()) {
    while (next < marks.size() && marks[next] == k) out.push_back(s), ++next;
    if (next == marks.size()) break;
    const XY k1 = rhs(c, system, s);
    const XY k2 = rhs(c, system, {s.x + 0.5 * h * k1.x, s.y + 0.5 * h * k1.y});
    const XY k3 = rhs(c, system, {s.x + 0.5 * h * k2.x, s.y + 0.5 * h * k2.y});
    const XY k4 = rhs(c, system, {s.x + h * k3.x, s.y + h * k3.y});
    const XY n{s.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
               s.y + h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y)};
    if (!(n.x >= s.x) || !(n.y >= s.y) || !std::isfinite(n.x) || !std::isfinite(n.y))
      throw DomainError("diffineq_integrate: solution stopped increasing; step too large");
    s = n;
    ++k;
  }
  return out;
}

double rel_gap(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

DiffIntegration diffineq_integrate(const DiffIneqCase& c, DiffSystem system,
                                   const std::vector<double>& t_grid, double step) {
  c.validate(system);
  if (!(step > 0.0)) throw DomainError("diffineq_integrate: step must be > 0");
  DiffIntegration out;
  out.t = t_grid;
  out.values = rk4(c, system, t_grid, step);
  const auto half = rk4(c, system, t_grid, step / 2.0);
  for (std::size_t i = 0; i < half.size(); ++i) {
    if (half[i].x == 0.0 && out.values[i].x == 0.0) continue;
    out.richardson_gap = std::max({out.richardson_gap, rel_gap(out.values[i].x, half[i].x),
                                   rel_gap(out.values[i].y, half[i].y)});
  }
  return out;
}

DominationResult check_domination(const DiffIneqCase& c, DiffSystem system,
                                  const DiffIntegration& numeric) {
  constexpr double slack = 1e-8;
  DominationResult r;
  for (std::size_t i = 0; i < numeric.t.size(); ++i) {
    const XY cf = diffineq_closed_form(c, numeric.t[i], system);
    const XY nu = numeric.values[i];
    const double ex = nu.x - cf.x - slack * (1.0 + std::abs(cf.x));
    const double ey = nu.y - cf.y - slack * (1.0 + std::abs(cf.y));
    r.worst_excess_x = std::max(r.worst_excess_x, ex);
    r.worst_excess_y = std::max(r.worst_excess_y, ey);
    if ((ex > 0.0 || ey > 0.0) && r.dominates) {
      r.dominates = false;
      r.first_violation_t = numeric.t[i];
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

MaxBoundResult max_bound_check(double alpha, double alpha_minus, const std::vector<double>& k_grid,
                               std::size_t seeds, std::uint64_t seed, bool bounded, double scale) {
  if (!(alpha > 0.0)) throw DomainError("max_bound_check: alpha must be > 0");
  if (!(alpha_minus > 0.0 && alpha_minus < alpha))
    throw DomainError("max_bound_check: alpha_minus must lie in (0, alpha)");
  if (k_grid.size() < 2 || !std::is_sorted(k_grid.begin(), k_grid.end()) || !(k_grid.front() >= 1.0))
    throw DomainError("max_bound_check: k grid must be sorted, >= 1, with >= 2 points");
  if (seeds == 0) throw DomainError("max_bound_check: seeds must be >= 1");

  MaxBoundResult r;
  r.k_grid = k_grid;
  std::vector<std::vector<double>> maxima(k_grid.size());
  for (std::size_t s = 0; s < seeds; ++s) {
    const std::uint64_t key = derive_key(seed, tag(Domain::oracle), s);
    auto z = [&](std::int64_t i) {
      return bounded ? scale : scale * sample_pareto_floor(alpha, 1.0, uniform_at(key, zigzag(i)));
    };
    double running = z(0);
    std::int64_t reached = 0;
    std::vector<double> per_k;
    for (double kd : k_grid) {
      const auto k = static_cast<std::int64_t>(kd);
      for (std::int64_t i = reached + 1; i <= k; ++i) running = std::max({running, z(i), z(-i)});
      reached = std::max(reached, k);
      per_k.push_back(running);
    }
    const double k0 = k_grid.front();
    const double C = per_k.front() / (1.0 + std::pow(k0, 1.0 / alpha_minus));
    int v = 0;
    for (std::size_t j = 0; j < k_grid.size(); ++j) {
      maxima[j].push_back(per_k[j]);
      if (k_grid[j] >= 1024.0 && per_k[j] > C * (1.0 + std::pow(k_grid[j], 1.0 / alpha_minus))) ++v;
    }
    r.violations.push_back(v);
    r.total_violations += v;
  }
  for (auto& m : maxima) r.median_max.push_back(median(m));
  r.slope = fit_power_law(r.k_grid, r.median_max).slope;
  return r;
}

namespace {
struct SiteZeroTime {
  const std::vector<double>& checkpoints;
  std::vector<double> at;
  double acc = 0.0;
  void hold(double t_start, std::int64_t site, double duration) {
    const double end = t_start + duration;
    const double rate = site == 0 ? 1.0 : 0.0;
    double t = t_start;
    while (at.size() < checkpoints.size() && checkpoints[at.size()] <= end) {
      acc += rate * std::max(checkpoints[at.size()] - t, 0.0);
      t = std::max(t, checkpoints[at.size()]);
      at.push_back(acc);
    }
    acc += rate * (end - t);
  }
  void end(double time, std::int64_t) {
    while (at.size() < checkpoints.size() && checkpoints[at.size()] <= time * (1.0 + 1e-12))
      at.push_back(acc);
  }
};
}  // namespace

MomentResult lt_moment_check(double T, const std::vector<double>& t_grid, std::size_t runs,
                             int order, std::uint64_t seed, unsigned workers) {
  if (!(T >= 1.0)) throw DomainError("lt_moment_check: T must be >= 1");
  if (t_grid.size() < 2 || !std::is_sorted(t_grid.begin(), t_grid.end()) || !(t_grid.front() > 0.0))
    throw DomainError("lt_moment_check: t grid must be positive and increasing");
  if (runs < 2 || order < 1) throw DomainError("lt_moment_check: need runs >= 2 and order >= 1");
  std::vector<double> checkpoints;
  for (double t : t_grid) checkpoints.push_back(T * t);
  const double root = std::sqrt(T);
  struct NoState {};
  const auto samples = parallel_map<std::vector<double>>(
      runs, workers, [] { return NoState{}; },
      [&](NoState&, std::size_t i) {
        SiteZeroTime obs{checkpoints, {}};
        run_srw(checkpoints.back(), derive_key(seed, tag(Domain::oracle), 1, i), obs);
        std::vector<double> ell;
        for (double a : obs.at) ell.push_back(a / root);
        return ell;
      });
  MomentResult r;
  r.t_grid = t_grid;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    std::vector<double> p;
    p.reserve(runs);
    for (const auto& s : samples) p.push_back(std::pow(s[j], order));
    r.moments.push_back(mean(p));
    r.standard_errors.push_back(sample_sd(p) / std::sqrt(static_cast<double>(runs)));
  }
  r.slope = fit_power_law(r.t_grid, r.moments).slope;
  return r;
}

ClockMomentResult dclock_second_moment(double alpha, const std::vector<double>& T_grid,
                                       std::size_t runs, double t, std::uint64_t seed,
                                       unsigned workers) {
  if (T_grid.empty()) throw DomainError("dclock_second_moment: empty T grid");
  if (runs < 2) throw DomainError("dclock_second_moment: runs must be >= 2");
  const double t_max = *std::max_element(T_grid.begin(), T_grid.end());
  const std::uint64_t path_key = derive_key(seed, tag(Domain::subordinator));
  const double mesh = 1.0 / std::sqrt(t_max);
  const std::vector<double> grid{0.0, t};

  ClockMomentResult r;
  for (std::size_t ti = 0; ti < T_grid.size(); ++ti) {
    KSOptions opts;
    opts.t_proxy = T_grid[ti];
    const auto d = parallel_map<double>(
        runs, workers, [&] { return SubordinatorPath(alpha, mesh, path_key); },
        [&](SubordinatorPath& path, std::size_t i) {
          const auto s = ks_sample(path, opts, grid, derive_key(seed, tag(Domain::oracle), 2, ti, i));
          return s.values.back() * s.values.back();
        });
    r.rows.push_back({T_grid[ti], mean(d), sample_sd(d) / std::sqrt(static_cast<double>(runs))});
  }
  double lo = 0.0, hi = 0.0;
  bool any = false;
  for (const auto& row : r.rows) {
    if (row.T < 1024.0) continue;
    lo = any ? std::min(lo, row.second_moment) : row.second_moment;
    hi = any ? std::max(hi, row.second_moment) : row.second_moment;
    any = true;
  }
  r.spread = any ? hi / lo : 1.0;
  return r;
}

ClockScalingResult dclock_t_scaling(double alpha, double T, const std::vector<double>& t_grid,
                                    std::size_t runs, std::size_t paths, std::uint64_t seed,
                                    unsigned workers) {
  if (t_grid.size() < 2 || !(t_grid.front() > 0.0))
    throw DomainError("dclock_t_scaling: need >= 2 positive times");
  std::vector<double> grid{0.0};
  grid.insert(grid.end(), t_grid.begin(), t_grid.end());
  KSOptions opts;
  opts.t_proxy = T;
  ClockScalingResult r;
  std::vector<std::vector<double>> per_time(t_grid.size());
  for (std::size_t p = 0; p < paths; ++p) {
    const std::uint64_t path_key = derive_key(seed, tag(Domain::subordinator), p);
    const auto samples = parallel_map<std::vector<double>>(
        runs, workers, [&] { return SubordinatorPath(alpha, 1.0 / std::sqrt(T), path_key); },
        [&](SubordinatorPath& path, std::size_t i) {
          return ks_sample(path, opts, grid, derive_key(seed, tag(Domain::oracle), 3, p, i)).values;
        });
    std::vector<double> m;
    for (std::size_t j = 1; j < grid.size(); ++j) {
      double s = 0.0;
      for (const auto& v : samples) s += v[j] * v[j];
      m.push_back(s / static_cast<double>(runs));
      per_time[j - 1].push_back(m.back());
    }
    r.path_slopes.push_back(fit_power_law(t_grid, m).slope);
  }
  r.median_slope = median(r.path_slopes);
  // A single path is not self-similar in t; only the law across paths is.
  for (auto& col : per_time) r.median_moments.push_back(median(col));
  r.slope = fit_power_law(t_grid, r.median_moments).slope;
  return r;
}

// ---------------------------------------------------------------------------

std::vector<LaplaceRow> stable_laplace_check(const std::vector<double>& alphas,
                                             const std::vector<double>& lambdas,
                                             std::size_t draws, std::uint64_t seed) {
  if (draws < 2) throw DomainError("stable_laplace_check: draws must be >= 2");
  std::vector<LaplaceRow> rows;
  for (std::size_t a = 0; a < alphas.size(); ++a) {
    const std::uint64_t key = derive_key(seed, tag(Domain::oracle), 4, a);
    std::vector<double> s(draws);
    for (std::size_t i = 0; i < draws; ++i) {
      const double u = std::numbers::pi * (uniform_at(key, 2 * i) - 0.5);
      const double e = -std::log(uniform_at(key, 2 * i + 1));
      s[i] = sample_positive_stable(alphas[a], u, e);
    }
    for (double lambda : lambdas) {
      std::vector<double> v(draws);
      for (std::size_t i = 0; i < draws; ++i) v[i] = std::exp(-lambda * s[i]);
      rows.push_back({alphas[a], lambda, mean(v), std::exp(-std::pow(lambda, alphas[a])),
                      sample_sd(v) / std::sqrt(static_cast<double>(draws))});
    }
  }
  return rows;
}

namespace {
double levy_cdf(double x) { return x <= 0.0 ? 0.0 : std::erfc(1.0 / (2.0 * std::sqrt(x))); }
}  // namespace

double levy_cdf_ks(std::size_t draws, std::uint64_t seed) {
  if (draws == 0) throw DomainError("levy_cdf_ks: draws must be >= 1");
  const std::uint64_t key = derive_key(seed, tag(Domain::oracle), 5);
  std::vector<double> s(draws);
  for (std::size_t i = 0; i < draws; ++i) {
    const double u = std::numbers::pi * (uniform_at(key, 2 * i) - 0.5);
    const double e = -std::log(uniform_at(key, 2 * i + 1));
    s[i] = sample_positive_stable(0.5, u, e);
  }
  return ks_one_sample(s, &levy_cdf);
}

}  // namespace linewalk
