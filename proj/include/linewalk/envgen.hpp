#pragma once

// Quenched line environment: horizontal conductances H(k) constant along row
// k, vertical conductances V(k) constant along column k.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "linewalk/rng.hpp"

namespace linewalk {

inline constexpr std::uint64_t kDefaultSeed = 20240611;

enum class HMode { pareto_floor, stable_increments, constant };
enum class VMode { pareto_floor, constant };
enum class Axis { horizontal, vertical };

/// How stable-mode H values at different scales T relate to each other.
/// quenched: every T aggregates the same subordinator path.
/// annealed: each T gets freshly sampled increments.
enum class Consistency { quenched, annealed };

struct EnvironmentSpec {
  double alpha1 = 0.6;
  double alpha2 = 0.9;
  HMode h_mode = HMode::pareto_floor;
  VMode v_mode = VMode::pareto_floor;
  /// Pareto floor, or the value itself in constant mode. Ignored in stable mode.
  double h_floor = 1.0;
  double v_floor = 1.0;
  /// Target mean of V; 0 means unset. When set in pareto mode (alpha2 > 1) the
  /// floor becomes v_mean * (alpha2 - 1) / alpha2; in constant mode V == v_mean.
  double v_mean = 0.0;
  /// Subordinator mesh (spatial cell width) for stable mode.
  double mesh = 1.0 / 256.0;
  Consistency consistency = Consistency::quenched;
  std::uint64_t seed = kDefaultSeed;

  /// Throws ConfigError naming the offending field.
  void validate() const;
  double effective_v_floor() const;
  /// Same spec with a different seed.
  EnvironmentSpec with_seed(std::uint64_t s) const;
};

std::string_view to_string(HMode m);
std::string_view to_string(VMode m);
std::string_view to_string(Consistency c);
HMode parse_h_mode(std::string_view s);
VMode parse_v_mode(std::string_view s);
Consistency parse_consistency(std::string_view s);

/// Inverse-CDF Pareto draw: floor * u^(-1/alpha), so P(value > L) = (floor/L)^alpha for L >= floor.
double sample_pareto_floor(double alpha, double floor, double u);

/// Kanter / Chambers-Mallows-Stuck draw of a standard positive alpha-stable
/// variable (Laplace transform exp(-lambda^alpha)). u is uniform on
/// (-pi/2, pi/2), e is a unit-mean exponential.
double sample_positive_stable(double alpha, double u, double e);

/// One realisation of a two-sided alpha-stable subordinator, sampled lazily on
/// the cells [c*mesh, (c+1)*mesh), c in Z. Cell increments have the law of
/// mesh^(1/alpha) * S and are pure functions of (key, c). The path is anchored
/// at zero and increasing on both sides of the origin.
///
/// Memoisation is per object and unsynchronised: give each worker its own copy.
class SubordinatorPath {
 public:
  SubordinatorPath(double alpha, double mesh, std::uint64_t key);

  double alpha() const noexcept { return alpha_; }
  double mesh() const noexcept { return mesh_; }
  std::uint64_t key() const noexcept { return key_; }

  double increment(std::int64_t cell) const;
  /// Sum of `count` consecutive increments starting at `first_cell`.
  double aggregate(std::int64_t first_cell, std::int64_t count) const;
  /// Path value at cell boundary c * mesh (zero at c = 0, negative for c < 0).
  double cumulative(std::int64_t cell) const;

  /// Number of mesh cells per lattice site at scale T, i.e. 1/(sqrt(T) * mesh).
  /// Throws ConfigError when that is not a positive integer.
  std::int64_t cells_per_site(double T) const;

 private:
  double alpha_;
  double mesh_;
  std::uint64_t key_;
  double cell_scale_;
  mutable std::vector<double> nonneg_;
  mutable std::vector<double> neg_;
};

/// Smallest admissible scale >= T for the given mesh (sqrt(T) * mesh divides 1).
double snap_to_admissible(double T, double mesh);
bool is_admissible(double T, double mesh);

/// T^(1/(2 alpha)) * (H((x+1)/sqrt(T)) - H(x/sqrt(T))), aggregated from mesh cells.
double rescaled_H(const SubordinatorPath& path, double T, std::int64_t x);

/// A lazily materialised line of rates. value(k) is a pure function of
/// (seed, axis, k, scale) and is memoised per object (not thread-safe).
class LineField {
 public:
  LineField(const EnvironmentSpec& spec, Axis axis, double scale = 1.0);

  double value(std::int64_t k) const {
    if (k >= 0) {
      const auto i = static_cast<std::size_t>(k);
      if (i < nonneg_.size() && nonneg_[i] > 0.0) return nonneg_[i];
    } else {
      const auto i = static_cast<std::size_t>(-(k + 1));
      if (i < neg_.size() && neg_[i] > 0.0) return neg_[i];
    }
    return materialize(k);
  }

  Axis axis() const noexcept { return axis_; }
  double scale() const noexcept { return scale_; }
  const EnvironmentSpec& spec() const noexcept { return spec_; }
  /// Underlying subordinator for stable-mode horizontal fields.
  const std::optional<SubordinatorPath>& subordinator() const noexcept { return path_; }

 private:
  double materialize(std::int64_t k) const;
  double draw(std::int64_t k) const;

  EnvironmentSpec spec_;
  Axis axis_;
  double scale_;
  std::uint64_t key_;
  double constant_ = 0.0;
  double alpha_ = 1.0;
  double floor_ = 1.0;
  std::optional<SubordinatorPath> path_;
  std::int64_t cells_per_site_ = 1;
  double prefactor_ = 1.0;
  mutable std::vector<double> nonneg_;
  mutable std::vector<double> neg_;
};

inline double line_value(const LineField& field, std::int64_t k) { return field.value(k); }

/// The pair (H, V) at one scale. H at scale T is the rescaled field H^(T) in
/// stable mode; pareto and constant fields do not depend on the scale.
struct Environment {
  explicit Environment(const EnvironmentSpec& spec, double scale = 1.0)
      : h(spec, Axis::horizontal, scale), v(spec, Axis::vertical, scale) {}

  double H(std::int64_t row) const { return h.value(row); }
  double V(std::int64_t column) const { return v.value(column); }
  const EnvironmentSpec& spec() const noexcept { return h.spec(); }

  LineField h;
  LineField v;
};

/// CSV dump of k, H(k), V(k) for k in [k_min, k_max].
void write_environment_csv(std::ostream& out, const Environment& env, std::int64_t k_min,
                           std::int64_t k_max);

}  // namespace linewalk
