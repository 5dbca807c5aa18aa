#pragma once

// Photometric (brightness/contrast) augmentation and the MI-matched search
// for per-group augmentation intensities.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pixinfo/error.hpp"
#include "pixinfo/imaging.hpp"
#include "pixinfo/infometrics.hpp"
#include "pixinfo/parallel.hpp"
#include "pixinfo/random.hpp"

namespace pixinfo {

/// Half-ranges of the brightness offset and the contrast factor.
struct AugmentParams {
  double a_br = 0.0;
  double a_ct = 0.0;

  void validate() const {
    if (!(a_br >= 0.0 && a_br <= 1.0)) fail(ErrorKind::parameter, "a_br must lie in [0, 1]");
    if (!(a_ct >= 0.0 && a_ct < 1.0)) fail(ErrorKind::parameter, "a_ct must lie in [0, 1)");
  }

  bool is_identity() const noexcept { return a_br == 0.0 && a_ct == 0.0; }

  friend bool operator==(const AugmentParams&, const AugmentParams&) = default;
};

/// One realized augmentation: offset b and contrast factor c.
struct PhotometricDraw {
  double brightness = 0.0;
  double contrast = 1.0;
};

inline PhotometricDraw draw_photometric(const AugmentParams& a, std::uint64_t seed) {
  Rng rng(seed);
  const double u_br = 2.0 * rng.uniform() - 1.0;
  const double u_ct = 2.0 * rng.uniform() - 1.0;
  return {a.a_br * u_br, 1.0 + a.a_ct * u_ct};
}

inline double patch_mean(const Patch& patch) {
  const auto [lo, hi] = std::minmax_element(patch.data.begin(), patch.data.end());
  double sum = 0.0;
  for (double v : patch.data) sum += v;
  // Clamping keeps the mean of a constant patch equal to its value exactly.
  return std::clamp(sum / static_cast<double>(patch.data.size()), *lo, *hi);
}

/// clamp(c (v - mu) + mu + b, 0, 1), written as v + (c - 1)(v - mu) + b so the
/// identity draw reproduces the input bit for bit.
inline Patch apply_photometric(const Patch& patch, const PhotometricDraw& d) {
  Patch out = patch;
  const double mu = patch_mean(patch);
  for (double& v : out.data) v = std::clamp(v + (d.contrast - 1.0) * (v - mu) + d.brightness, 0.0, 1.0);
  return out;
}

inline Patch apply_photometric(const Patch& patch, const AugmentParams& a, std::uint64_t seed) {
  a.validate();
  return apply_photometric(patch, draw_photometric(a, seed));
}

/// Monte-Carlo mean of I[v; tau(v, A)]. Draw i uses derive_seed(seed, i), so
/// two calls with the same seed and different A share their uniforms.
inline double expected_pair_mi(const Patch& patch, const AugmentParams& a, int draws, int bins, std::uint64_t seed,
                               double log_base = natural_log_base) {
  if (draws < 1) fail(ErrorKind::parameter, "draws must be at least 1");
  a.validate();
  if (a.is_identity()) return mutual_information(patch, patch, bins, log_base);
  double sum = 0.0;
  for (int i = 0; i < draws; ++i)
    sum += mutual_information(patch, apply_photometric(patch, draw_photometric(a, derive_seed(seed, i))), bins, log_base);
  return sum / draws;
}

struct MiTarget {
  double value = 0.0;
  Category group = Category::invalid;
  double alpha_hat = 1.0;
  int n_images = 0;
  int k_points = 0;
};

/// Maps a key point on images[0] to its counterpart on images[i] (i >= 1).
using Correspondence = std::function<std::optional<Pixel>(Pixel key_point, std::size_t image_index)>;

/// alpha_hat times the mean MI between each key point's patch on images[0]
/// and the corresponding patch on every other image.
inline MiTarget estimate_target_mi(std::span<const GrayImage> images, std::span<const Pixel> key_points,
                                   const Correspondence& correspondence, int k_patch, int bins, double alpha_hat,
                                   Category group = Category::invalid, double log_base = natural_log_base) {
  if (images.size() < 2) fail(ErrorKind::parameter, "target MI needs at least two images");
  if (key_points.empty()) fail(ErrorKind::parameter, "target MI needs at least one key point");
  if (!(alpha_hat > 0.0)) fail(ErrorKind::parameter, "alpha_hat must be positive");
  const GrayImage& ref = images[0];
  double sum = 0.0;
  for (std::size_t j = 0; j < key_points.size(); ++j) {
    const Pixel kp = key_points[j];
    if (!in_valid_region(ref, kp, k_patch)) fail(ErrorKind::border, "key point " + to_string(kp) + " in border band");
    const Patch source = extract_patch(ref, kp, k_patch);
    for (std::size_t i = 1; i < images.size(); ++i) {
      const auto match = correspondence(kp, i);
      if (!match || !in_valid_region(images[i], *match, k_patch))
        fail(ErrorKind::correspondence, "key point " + std::to_string(j) + " " + to_string(kp) +
                                            " has no valid match in image " + std::to_string(i));
      sum += mutual_information(source, extract_patch(images[i], *match, k_patch), bins, log_base);
    }
  }
  const int n = static_cast<int>(images.size() - 1);
  const int k = static_cast<int>(key_points.size());
  return {alpha_hat * sum / (static_cast<double>(n) * k), group, alpha_hat, n, k};
}

/// Search ray t * (a_br_max, a_ct_max), t in [0, 1].
struct AugmentSearch {
  double a_br_max = 0.8;
  double a_ct_max = 0.8;
  int steps = 50;
  int refinements = 3;

  AugmentParams at(double t) const { return {t * a_br_max, t * a_ct_max}; }

  void validate() const {
    if (steps < 1) fail(ErrorKind::parameter, "search needs at least one grid step");
    if (refinements < 0) fail(ErrorKind::parameter, "refinement count must be non-negative");
    at(1.0).validate();
  }
};

struct AugEstimate {
  AugmentParams params;
  double t = 0.0;
  double achieved_mi = 0.0;  // pool-mean expected MI at the returned t
  double gap = 0.0;          // |target - achieved_mi|
  bool unreachable = false;
};

/// Pool-mean expected pair MI at ray position t. Patch i always uses
/// derive_seed(seed, i), giving common random numbers across t.
inline double pool_expected_mi(std::span<const Patch> pool, const AugmentSearch& search, double t, int draws,
                               int bins, std::uint64_t seed, double log_base = natural_log_base,
                               unsigned workers = 1) {
  std::vector<double> per(pool.size());
  const AugmentParams a = search.at(t);
  parallel_for(pool.size(), workers, [&](std::size_t i) {
    per[i] = expected_pair_mi(pool[i], a, draws, bins, derive_seed(seed, i), log_base);
  });
  double sum = 0.0;
  for (double v : per) sum += v;
  return sum / static_cast<double>(pool.size());
}

/// Minimizes |target - E I[v; tau(v, A)]| along the search ray: a full grid
/// scan, then `refinements` passes probing +-h around the incumbent with h
/// halving each pass. Ties keep the smaller t.
inline AugEstimate estimate_aug_params(std::span<const Patch> pool, const MiTarget& target,
                                       const AugmentSearch& search, int draws, std::uint64_t seed, int bins = 32,
                                       double log_base = natural_log_base, unsigned workers = 1) {
  if (pool.empty()) fail(ErrorKind::parameter, "augmentation search needs a non-empty patch pool");
  search.validate();
  if (draws < 1) fail(ErrorKind::parameter, "draws must be at least 1");

  const double identity_mi = pool_expected_mi(pool, search, 0.0, draws, bins, seed, log_base, workers);
  // Slack absorbs the round-off between self-MI and entropy evaluations.
  if (target.value > identity_mi + 1e-9) return {{0.0, 0.0}, 0.0, identity_mi, target.value - identity_mi, true};

  auto gap_at = [&](double t, double& mi) {
    mi = pool_expected_mi(pool, search, t, draws, bins, seed, log_base, workers);
    return std::abs(target.value - mi);
  };

  double best_t = 0.0, best_mi = identity_mi;
  double best_gap = std::abs(target.value - identity_mi);
  for (int g = 1; g <= search.steps; ++g) {
    const double t = static_cast<double>(g) / search.steps;
    double mi = 0.0;
    const double gap = gap_at(t, mi);
    if (gap < best_gap) best_t = t, best_gap = gap, best_mi = mi;
  }

  double h = 1.0 / search.steps;
  for (int r = 0; r < search.refinements; ++r) {
    h *= 0.5;
    const double centre = best_t;
    for (double t : {centre - h, centre + h}) {
      if (t < 0.0 || t > 1.0) continue;
      double mi = 0.0;
      const double gap = gap_at(t, mi);
      if (gap < best_gap || (gap == best_gap && t < best_t)) best_t = t, best_gap = gap, best_mi = mi;
    }
  }
  return {search.at(best_t), best_t, best_mi, best_gap, false};
}

}  // namespace pixinfo
