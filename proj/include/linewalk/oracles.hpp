#pragma once

// Independent checks behind the moment bounds: the coupled differential
// system, maxima of heavy-tailed variables, SRW local-time moments and the
// second moment of the finite-T clock.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace linewalk {

enum class DiffSystem { first, second };

struct DiffIneqCase {
  double C = 1.0;
  double kappa = 1.0;
  double eps1_plus = 0.0;
  double eps2_plus = 0.0;

  double A1() const { return (1.0 + eps1_plus) / (1.0 - eps1_plus * eps2_plus); }
  double A2() const { return (1.0 + eps2_plus) / (1.0 - eps1_plus * eps2_plus); }
  /// A2 / eps2_plus; the second system only.
  double B2() const;
  /// Throws DomainError for negative inputs or eps1_plus * eps2_plus >= 1.
  void validate(DiffSystem system) const;
};

struct XY {
  double x = 0.0;
  double y = 0.0;
};

/// A1 - 1 == eps1 A2 and A2 - 1 == eps2 A1, evaluated in exact rational arithmetic.
/// The inputs must be short decimals (denominator dividing 10^6); DomainError otherwise.
bool a_identities_exact(double eps1_plus, double eps2_plus);

/// x(t) = [(C kappa)^{1/A1} + C t]^{A1}; y(t) the same with A2 (first system) or B2 (second).
XY diffineq_closed_form(const DiffIneqCase& c, double t, DiffSystem system = DiffSystem::first);

struct DiffIntegration {
  std::vector<double> t;
  std::vector<XY> values;
  /// max relative difference between step h and step h/2 at the grid points.
  double richardson_gap = 0.0;
};

/// Classical RK4 with fixed step for
///   first:  x' = C A1 y^{eps1},         y' = C A2 x^{eps2}
///   second: x' = C A1 y^{eps1 eps2},    y' = C B2 x^{eps2} y^{1 - eps2}
/// with x(0) = y(0) = C kappa, recorded at t_grid (which must be multiples of the step).
/// DomainError if x or y ever decreases (step too large for this system).
DiffIntegration diffineq_integrate(const DiffIneqCase& c, DiffSystem system,
                                   const std::vector<double>& t_grid, double step = 1e-4);

struct DominationResult {
  bool dominates = true;
  /// Largest amount by which the numeric solution exceeds the closed form, net of the slack.
  double worst_excess_x = 0.0;
  double worst_excess_y = 0.0;
  double first_violation_t = -1.0;
};

/// closed form >= numeric at every grid point, within 1e-8 absolute-plus-relative slack.
DominationResult check_domination(const DiffIneqCase& c, DiffSystem system,
                                  const DiffIntegration& numeric);

struct MaxBoundResult {
  std::vector<double> k_grid;
  /// Median over seeds of max_{|i| <= k} Z_i.
  std::vector<double> median_max;
  double slope = 0.0;
  /// Per seed: number of k >= 2^10 with max > C (1 + k^{1/alpha_minus}), C fitted at the smallest k.
  std::vector<int> violations;
  int total_violations = 0;
};

/// Z_i Pareto(alpha, floor 1) times `scale`, or identically `scale` when bounded is set.
MaxBoundResult max_bound_check(double alpha, double alpha_minus, const std::vector<double>& k_grid,
                               std::size_t seeds, std::uint64_t seed, bool bounded = false,
                               double scale = 1.0);

struct MomentResult {
  std::vector<double> t_grid;
  std::vector<double> moments;
  std::vector<double> standard_errors;
  double slope = 0.0;
};

/// E[ell^T_t(0)^order] for a rate-1 SRW, with the log-log slope in t.
MomentResult lt_moment_check(double T, const std::vector<double>& t_grid, std::size_t runs,
                             int order, std::uint64_t seed, unsigned workers);

struct ClockMomentRow {
  double T = 0.0;
  double second_moment = 0.0;
  double standard_error = 0.0;
};

struct ClockMomentResult {
  std::vector<ClockMomentRow> rows;
  /// max / min of the second moments over rows with T >= 2^10.
  double spread = 0.0;
};

/// E[(D^T(t))^2] for each T on one quenched subordinator path of mesh 1/sqrt(max T).
/// D^T does not involve V: its driving walk is the vertical SRW component of Y.
ClockMomentResult dclock_second_moment(double alpha, const std::vector<double>& T_grid,
                                       std::size_t runs, double t, std::uint64_t seed,
                                       unsigned workers);

struct ClockScalingResult {
  std::vector<double> path_slopes;
  double median_slope = 0.0;
  /// Median over paths of the quenched second moment at each t.
  std::vector<double> median_moments;
  /// Log-log slope in t of median_moments.
  double slope = 0.0;
};

/// Quenched E[(D^T(t))^2] on several paths. Per-path slopes are reported, but
/// the scaling statement is about the across-path medians.
ClockScalingResult dclock_t_scaling(double alpha, double T, const std::vector<double>& t_grid,
                                    std::size_t runs, std::size_t paths, std::uint64_t seed,
                                    unsigned workers);

struct LaplaceRow {
  double alpha = 0.0;
  double lambda = 0.0;
  double estimate = 0.0;
  double exact = 0.0;
  double standard_error = 0.0;
  bool within(double k = 3.0) const { return std::abs(estimate - exact) <= k * standard_error; }
};

/// Empirical E[exp(-lambda S)] of `draws` positive stable draws against exp(-lambda^alpha).
std::vector<LaplaceRow> stable_laplace_check(const std::vector<double>& alphas,
                                             const std::vector<double>& lambdas,
                                             std::size_t draws, std::uint64_t seed);

/// KS distance of alpha = 1/2 stable draws from the Levy CDF erfc(1 / (2 sqrt x)).
double levy_cdf_ks(std::size_t draws, std::uint64_t seed);

}  // namespace linewalk
