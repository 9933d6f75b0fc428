#include "linewalk/envgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "linewalk/errors.hpp"
#include "linewalk/io.hpp"

namespace linewalk {

namespace {

bool positive_finite(double x) { return std::isfinite(x) && x > 0.0; }

std::string describe_scale(double T) {
  std::ostringstream os;
  os << T;
  return os.str();
}

}  // namespace

std::string_view to_string(HMode m) {
  switch (m) {
    case HMode::pareto_floor: return "pareto_floor";
    case HMode::stable_increments: return "stable_increments";
    case HMode::constant: return "constant";
  }
  return "?";
}

std::string_view to_string(VMode m) {
  switch (m) {
    case VMode::pareto_floor: return "pareto_floor";
    case VMode::constant: return "constant";
  }
  return "?";
}

std::string_view to_string(Consistency c) {
  return c == Consistency::quenched ? "quenched" : "annealed";
}

HMode parse_h_mode(std::string_view s) {
  if (s == "pareto_floor") return HMode::pareto_floor;
  if (s == "stable_increments") return HMode::stable_increments;
  if (s == "constant") return HMode::constant;
  throw ConfigError("unknown h_mode '" + std::string(s) + "'", "h_mode");
}

VMode parse_v_mode(std::string_view s) {
  if (s == "pareto_floor") return VMode::pareto_floor;
  if (s == "constant") return VMode::constant;
  if (s == "stable_increments")
    throw ConfigError("stable_increments is only available on the horizontal axis", "v_mode");
  throw ConfigError("unknown v_mode '" + std::string(s) + "'", "v_mode");
}

Consistency parse_consistency(std::string_view s) {
  if (s == "quenched") return Consistency::quenched;
  if (s == "annealed") return Consistency::annealed;
  throw ConfigError("unknown consistency '" + std::string(s) + "'", "consistency");
}

void EnvironmentSpec::validate() const {
  if (!positive_finite(alpha1)) throw ConfigError("alpha1 must be > 0", "alpha1");
  if (!positive_finite(alpha2)) throw ConfigError("alpha2 must be > 0", "alpha2");
  switch (h_mode) {
    case HMode::pareto_floor:
    case HMode::constant:
      if (!positive_finite(h_floor)) throw ConfigError("h_floor must be > 0", "h_floor");
      break;
    case HMode::stable_increments:
      if (!(alpha1 < 1.0))
        throw ConfigError("stable_increments needs alpha1 in (0,1)", "alpha1");
      if (!positive_finite(mesh)) throw ConfigError("mesh must be > 0", "mesh");
      break;
  }
  if (v_mean != 0.0) {
    if (!positive_finite(v_mean)) throw ConfigError("v_mean must be > 0 when set", "v_mean");
    if (v_mode == VMode::pareto_floor && !(alpha2 > 1.0))
      throw ConfigError("v_mean requires alpha2 > 1 (the Pareto mean is infinite otherwise)",
                        "v_mean");
  } else if (!positive_finite(v_floor)) {
    throw ConfigError("v_floor must be > 0", "v_floor");
  }
}

double EnvironmentSpec::effective_v_floor() const {
  if (v_mean == 0.0) return v_floor;
  if (v_mode == VMode::constant) return v_mean;
  return v_mean * (alpha2 - 1.0) / alpha2;
}

EnvironmentSpec EnvironmentSpec::with_seed(std::uint64_t s) const {
  EnvironmentSpec out = *this;
  out.seed = s;
  return out;
}

double sample_pareto_floor(double alpha, double floor, double u) {
  if (!positive_finite(alpha)) throw DomainError("pareto: alpha must be > 0");
  if (!positive_finite(floor)) throw DomainError("pareto: floor must be > 0");
  if (!(u > 0.0 && u < 1.0)) throw DomainError("pareto: u must lie in (0,1)");
  return floor * std::pow(u, -1.0 / alpha);
}

double sample_positive_stable(double alpha, double u, double e) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("stable: alpha must lie in (0,1)");
  const double shifted = alpha * (u + std::numbers::pi / 2.0);
  const double first = std::sin(shifted) / std::pow(std::cos(u), 1.0 / alpha);
  const double second = std::pow(std::cos(u - shifted) / e, (1.0 - alpha) / alpha);
  return first * second;
}

// ---------------------------------------------------------------------------

SubordinatorPath::SubordinatorPath(double alpha, double mesh, std::uint64_t key)
    : alpha_(alpha), mesh_(mesh), key_(key), cell_scale_(std::pow(mesh, 1.0 / alpha)) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("subordinator: alpha must lie in (0,1)");
  if (!positive_finite(mesh)) throw DomainError("subordinator: mesh must be > 0");
}

double SubordinatorPath::increment(std::int64_t cell) const {
  auto& store = cell >= 0 ? nonneg_ : neg_;
  const auto i = static_cast<std::size_t>(cell >= 0 ? cell : -(cell + 1));
  if (i < store.size() && store[i] > 0.0) return store[i];
  if (i >= store.size()) store.resize(std::max<std::size_t>(i + 1, 2 * store.size()), 0.0);

  const std::uint64_t c = 2 * zigzag(cell);
  const double u = std::numbers::pi * (uniform_at(key_, c) - 0.5);
  const double e = -std::log(uniform_at(key_, c + 1));
  double value = cell_scale_ * sample_positive_stable(alpha_, u, e);
  // Subnormal underflow would break strict monotonicity.
  if (!(value > 0.0)) value = std::numeric_limits<double>::min();
  store[i] = value;
  return value;
}

double SubordinatorPath::aggregate(std::int64_t first_cell, std::int64_t count) const {
  double sum = 0.0;
  for (std::int64_t c = first_cell; c < first_cell + count; ++c) sum += increment(c);
  return sum;
}

double SubordinatorPath::cumulative(std::int64_t cell) const {
  if (cell >= 0) return aggregate(0, cell);
  return -aggregate(cell, -cell);
}

std::int64_t SubordinatorPath::cells_per_site(double T) const {
  if (!positive_finite(T)) throw ConfigError("scale T must be > 0", "T");
  const double ratio = 1.0 / (std::sqrt(T) * mesh_);
  const auto m = std::llround(ratio);
  if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-9 * ratio) {
    std::string hint;
    try {
      hint = "; nearest admissible scale above is " + describe_scale(snap_to_admissible(T, mesh_));
    } catch (const ConfigError&) {
      hint = "; decrease the mesh";
    }
    throw ConfigError("scale T=" + describe_scale(T) + " is not admissible for subordinator mesh " +
                          describe_scale(mesh_) + " (1/(sqrt(T)*mesh) must be an integer)" + hint,
                      "T");
  }
  return m;
}

bool is_admissible(double T, double mesh) {
  if (!positive_finite(T) || !positive_finite(mesh)) return false;
  const double ratio = 1.0 / (std::sqrt(T) * mesh);
  const auto m = std::llround(ratio);
  return m >= 1 && std::abs(ratio - static_cast<double>(m)) <= 1e-9 * ratio;
}

double snap_to_admissible(double T, double mesh) {
  if (!positive_finite(T) || !positive_finite(mesh))
    throw ConfigError("snap: T and mesh must be > 0", "T");
  if (is_admissible(T, mesh)) return T;
  const double m = std::floor(1.0 / (std::sqrt(T) * mesh));
  if (m < 1.0)
    throw ConfigError("scale T=" + describe_scale(T) + " exceeds the finest scale 1/mesh^2", "T");
  return 1.0 / ((m * mesh) * (m * mesh));
}

double rescaled_H(const SubordinatorPath& path, double T, std::int64_t x) {
  const std::int64_t m = path.cells_per_site(T);
  return std::pow(T, 1.0 / (2.0 * path.alpha())) * path.aggregate(x * m, m);
}

// ---------------------------------------------------------------------------

LineField::LineField(const EnvironmentSpec& spec, Axis axis, double scale)
    : spec_(spec), axis_(axis), scale_(scale) {
  spec_.validate();
  if (!positive_finite(scale)) throw ConfigError("environment scale must be > 0", "T");
  const bool horizontal = axis == Axis::horizontal;
  key_ = derive_key(spec.seed, tag(horizontal ? Domain::horizontal_line : Domain::vertical_line));
  if (horizontal) {
    alpha_ = spec.alpha1;
    switch (spec.h_mode) {
      case HMode::constant: constant_ = spec.h_floor; break;
      case HMode::pareto_floor: floor_ = spec.h_floor; break;
      case HMode::stable_increments: {
        std::uint64_t path_key = derive_key(spec.seed, tag(Domain::subordinator));
        if (spec.consistency == Consistency::annealed)
          path_key = derive_key(path_key, double_bits(scale));
        path_.emplace(spec.alpha1, spec.mesh, path_key);
        cells_per_site_ = path_->cells_per_site(scale);
        prefactor_ = std::pow(scale, 1.0 / (2.0 * spec.alpha1));
        break;
      }
    }
  } else {
    alpha_ = spec.alpha2;
    if (spec.v_mode == VMode::constant) constant_ = spec.effective_v_floor();
    else floor_ = spec.effective_v_floor();
  }
}

double LineField::draw(std::int64_t k) const {
  if (constant_ > 0.0) return constant_;
  if (path_) return prefactor_ * path_->aggregate(k * cells_per_site_, cells_per_site_);
  return sample_pareto_floor(alpha_, floor_, uniform_at(key_, zigzag(k)));
}

double LineField::materialize(std::int64_t k) const {
  auto& store = k >= 0 ? nonneg_ : neg_;
  const auto i = static_cast<std::size_t>(k >= 0 ? k : -(k + 1));
  if (i >= store.size()) store.resize(std::max<std::size_t>(i + 1, 2 * store.size()), 0.0);
  const double value = draw(k);
  store[i] = value;
  return value;
}

void write_environment_csv(std::ostream& out, const Environment& env, std::int64_t k_min,
                           std::int64_t k_max) {
  out << "k,H,V\n";
  for (std::int64_t k = k_min; k <= k_max; ++k)
    out << k << ',' << format_double(env.H(k)) << ',' << format_double(env.V(k)) << '\n';
}

}  // namespace linewalk
