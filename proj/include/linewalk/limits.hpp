#pragma once

// Samplers for the limit objects: Brownian motion, the Kesten-Spitzer clock
// Delta(t) = int L^{B_2}(t, x) dH(x), its inverse, and the two limit pairs.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "linewalk/envgen.hpp"

namespace linewalk {

/// Brownian path with diffusion coefficient sigma (variance sigma^2 per unit
/// time) at the times of t_grid, which must start at 0 and increase.
std::vector<double> brownian_path(double sigma, std::span<const double> t_grid,
                                  std::uint64_t stream_key);

enum class KSRoute { srw, binned_bm };
std::string_view to_string(KSRoute r);

struct KSOptions {
  /// Discretisation scale: local times of a rate-1 SRW at scale t_proxy.
  double t_proxy = 16384.0;
  KSRoute route = KSRoute::srw;
  /// Spatial bin width of the Brownian occupation-density estimate (binned_bm only).
  double bin_width = 1.0 / 64.0;
  /// Brownian step as a fraction of the bin width, in standard deviations (binned_bm only).
  double bm_step_fraction = 1.0 / 8.0;
};

struct KSProcessSample {
  std::vector<double> t_grid;
  std::vector<double> values;
  double alpha = 0.5;
  KSRoute route = KSRoute::srw;
  /// Some grid step carries >= 5% of Delta(t_max): linear inversion is coarse.
  bool coarse_grid = false;
};

/// One sample of Delta on t_grid (t_grid[0] must be 0), integrating local
/// times against the increments of `path`. The srw route is the finite-T
/// clock D^T with V == 1: sum_k T^{-1/2} occ_k(T t) * (H((k+1)/sqrt T) - H(k/sqrt T)).
KSProcessSample ks_sample(const SubordinatorPath& path, const KSOptions& opts,
                          std::span<const double> t_grid, std::uint64_t stream_key);

/// Annealed version: a fresh subordinator path (mesh 1/sqrt(t_proxy), or
/// bin_width/2 if finer for the binned route) keyed by the stream.
KSProcessSample ks_sample(double alpha, const KSOptions& opts, std::span<const double> t_grid,
                          std::uint64_t stream_key);

/// Key of the annealed subordinator path used by ks_sample(alpha, ...).
std::uint64_t ks_path_key(std::uint64_t stream_key);
double ks_default_mesh(const KSOptions& opts);

/// Linear-interpolation inverse of a sampled Delta; RangeError outside [0, Delta(t_max)].
double invert_ks(const KSProcessSample& sample, double u);

enum class PairKind { conv, fin };

struct LimitPairSample {
  std::vector<double> t_grid;
  std::vector<double> first;
  std::vector<double> second;
  PairKind kind = PairKind::conv;
  /// Delta on t_grid (conv kind) or Delta^{-1} on t_grid (fin kind).
  std::vector<double> clock;
};

/// (B_1(Delta(t)), B_2(t)): B_2 is the rescaled proxy SRW whose local times build Delta,
/// B_1 an independent Brownian motion with sigma = sqrt 2 read at the times Delta(t).
LimitPairSample limit_pair(const SubordinatorPath& path, const KSOptions& opts,
                           std::span<const double> t_grid, std::uint64_t stream_key);
LimitPairSample limit_pair(double alpha, const KSOptions& opts, std::span<const double> t_grid,
                           std::uint64_t stream_key);

/// (B_1(t), B_2(Delta^{-1}(t))), with Delta resolved on a fine internal grid of
/// `fine_steps` per unit time until it exceeds the last requested time.
LimitPairSample fin_pair(const SubordinatorPath& path, const KSOptions& opts,
                         std::span<const double> t_grid, std::uint64_t stream_key,
                         int fine_steps = 512);
LimitPairSample fin_pair(double alpha, const KSOptions& opts, std::span<const double> t_grid,
                         std::uint64_t stream_key, int fine_steps = 512);

void write_path_csv(std::ostream& out, std::span<const double> t, std::span<const double> values);
void write_pair_csv(std::ostream& out, const LimitPairSample& pair);

}  // namespace linewalk
