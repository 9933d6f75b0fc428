#pragma once

// Scaling exponents, distribution tests, exponent fits and the Monte Carlo
// studies built on walk ensembles.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "linewalk/envgen.hpp"
#include "linewalk/walker.hpp"

namespace linewalk {

/// eps_i = max((1/alpha_i - 1)/2, 0).
double epsilon_of(double alpha);

struct ScalingParams {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  double eps_product = 0.0;
  /// eps1 * eps2 >= 1: no gamma, and the walk may explode.
  bool supercritical = false;
  double delta = 0.0;
  /// Moment-growth exponents, from eps_i^+ (of the minus exponents when given, else eps_i).
  double eps1_plus = 0.0;
  double eps2_plus = 0.0;
  double A1 = 0.0;
  double A2 = 0.0;
  bool A_defined = false;

  /// (1 + eps_i) / (2 (1 - eps1 eps2)); throws DomainError when supercritical.
  double gamma1() const;
  double gamma2() const;
  double gamma(int i) const { return i == 1 ? gamma1() : gamma2(); }
  /// Over-scaling threshold (1 + eps_i) / (1 - eps1 eps2) = 2 gamma_i.
  double overscaling_threshold(int i) const { return 2.0 * gamma(i); }
};

ScalingParams scaling_params(double alpha1, double alpha2,
                             std::optional<double> alpha1_minus = std::nullopt,
                             std::optional<double> alpha2_minus = std::nullopt);

struct KSResult {
  double statistic = 0.0;
  /// 1% asymptotic critical value 1.628 sqrt((n+m)/(nm)).
  double critical = 0.0;
  bool rejected() const { return statistic > critical; }
};

KSResult ks_two_sample(std::span<const double> a, std::span<const double> b);
/// One-sample KS distance against a continuous CDF.
double ks_one_sample(std::span<const double> a, double (*cdf)(double));

/// Median (mean of the two middle values for even sizes); DomainError on empty input.
double median(std::vector<double> v);
double mean(std::span<const double> v);
/// Sample standard deviation (n - 1 denominator).
double sample_sd(std::span<const double> v);
double quantile(std::vector<double> v, double q);
double interquartile_range(std::vector<double> v);

struct ExponentFit {
  std::vector<double> scales;
  std::vector<double> statistics;
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_slope = 0.0;
  double r_squared = 0.0;
  /// >= 4 scales spanning >= 2 decades.
  bool reportable = false;
};

/// Least squares of log(statistic) on log(scale).
ExponentFit fit_power_law(std::span<const double> scales, std::span<const double> statistics);

// ---------------------------------------------------------------------------
// Walk ensembles

struct EnsembleSpec {
  EnvironmentSpec env;
  /// Scale of H^(T) in stable mode; ignored by the other modes.
  double env_scale = 1.0;
  WalkKind kind;
  /// Absolute times at which each run is recorded; the last one is the horizon.
  std::vector<double> checkpoints;
  std::vector<LineWeight> weights;
  std::size_t runs = 0;
  /// Runs cycle through this many environments (1: the environment of env.seed itself).
  std::size_t environments = 1;
  /// Added to the run index to form the walk stream id.
  std::uint64_t stream_base = 0;
  std::uint64_t max_jumps = 20'000'000'000ULL;
};

struct RunRecord {
  std::vector<CheckpointObserver::Record> records;
  std::uint64_t jumps = 0;
  bool truncated = false;
  std::size_t environment = 0;
  /// sup |X_i| over the whole run, up to the truncation point if there was one.
  std::int64_t sup_abs1 = 0;
  std::int64_t sup_abs2 = 0;
};

/// Seed of environment j of an ensemble whose base seed is `seed`.
std::uint64_t ensemble_env_seed(std::uint64_t seed, std::size_t j, std::size_t environments);

std::vector<RunRecord> run_ensemble(const EnsembleSpec& spec, unsigned workers);

// ---------------------------------------------------------------------------
// Studies

struct ScaleRow {
  double T = 0.0;
  double env_scale = 0.0;
  double median_abs1 = 0.0;
  double median_abs2 = 0.0;
  std::size_t runs = 0;
  std::size_t excluded = 0;
  std::vector<double> abs1;
  std::vector<double> abs2;
};

struct ExponentFitRequest {
  EnvironmentSpec env;
  WalkKind kind;
  std::vector<double> T_grid;
  std::size_t runs = 200;
  std::size_t environments = 1;
  /// The environment of scale T is built at T^env_scale_power (CSRW needs 1/delta).
  double env_scale_power = 1.0;
  std::uint64_t max_jumps = 20'000'000'000ULL;
};

struct ExponentFitReport {
  std::vector<ScaleRow> rows;
  ExponentFit fit1;
  ExponentFit fit2;
  double exclusion_rate = 0.0;
  bool refused = false;
  std::string refusal;
};

/// Fits median |X_i(T)| ~ T^slope over the T grid. ConfigError for fewer than
/// 4 scales; the fit is refused (not thrown) when more than 10% of runs truncate.
ExponentFitReport exponent_fit(const ExponentFitRequest& req, unsigned workers);

/// Per-run D^{V,T}(1) / D^T(1) = int H/V / int H along a Y walk in the environment of scale T.
std::vector<double> ratio_statistic(const EnvironmentSpec& env, double T, std::size_t runs,
                                    unsigned workers);

/// (1/T) int_0^T weight(walk(s)) ds for one run.
double ergodic_average(const Environment& env, const WalkKind& kind, double T, LineWeight weight,
                       std::uint64_t stream);
/// (1/T) int_0^T V(S(s)) ds for a rate-1 SRW S on the columns.
double column_average(const Environment& env, double T, std::uint64_t stream);
/// E[X^beta] for a Pareto law with exponent alpha and the given floor (beta < alpha).
double pareto_moment(double alpha, double floor, double beta);

struct OverscalingRow {
  double T = 0.0;
  /// Truncated runs bracket the median: the lower value counts their partial
  /// suprema, the upper one treats them as infinite. Equal without truncation.
  double median_stat1 = 0.0;
  double median_stat2 = 0.0;
  double median_stat1_upper = 0.0;
  double median_stat2_upper = 0.0;
  std::size_t runs = 0;
  std::size_t truncated = 0;
};

struct OverscalingReport {
  double a1 = 0.0;
  double a2 = 0.0;
  double threshold1 = 0.0;
  double threshold2 = 0.0;
  std::vector<std::string> warnings;
  std::vector<OverscalingRow> rows;
};

/// Median over runs of sup_{s <= 1} T^{-a_i/2} |X_i(T s)| for each T.
OverscalingReport overscaling_study(const EnvironmentSpec& env, double a1, double a2,
                                    const std::vector<double>& T_grid, std::size_t runs,
                                    std::size_t environments, unsigned workers,
                                    std::uint64_t max_jumps = 20'000'000'000ULL);

struct ConjectureReport {
  ScalingParams params;
  std::string regime;
  double target1 = 0.0;
  double target2 = 0.0;
  ExponentFitReport fit;
};

/// VSRW in a Pareto environment; fitted exponents alongside the formula values.
ConjectureReport conjecture_explorer(const EnvironmentSpec& env, const std::vector<double>& T_grid,
                                     std::size_t runs, std::size_t environments, unsigned workers);

}  // namespace linewalk
