#pragma once

// Patch entropy (IIE), plug-in mutual information, per-pixel entropy maps,
// three-way categorization and the sampling weight maps built on them.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "pixinfo/error.hpp"
#include "pixinfo/imaging.hpp"
#include "pixinfo/parallel.hpp"
#include "pixinfo/random.hpp"

namespace pixinfo {

inline constexpr double natural_log_base = std::numbers::e;

/// Factor turning nats into the requested base.
inline double log_scale(double log_base) {
  if (!(log_base > 0.0) || log_base == 1.0) fail(ErrorKind::parameter, "log base must be positive and not 1");
  return log_base == natural_log_base ? 1.0 : 1.0 / std::log(log_base);
}

/// -sum p ln p over occupied bins, with 0 ln 0 = 0.
inline double entropy_from_counts(std::span<const std::int64_t> counts, std::int64_t total,
                                  double log_base = natural_log_base) {
  double h = 0.0;
  const double n = static_cast<double>(total);
  for (std::int64_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log(p);
  }
  return h * log_scale(log_base);
}

inline double iie(const Patch& patch, int bins, double log_base = natural_log_base) {
  const Histogram h = gray_histogram(patch, bins);
  return entropy_from_counts(h.counts, h.total, log_base);
}

inline double mutual_information(const JointHistogram& joint, double log_base = natural_log_base) {
  const auto px = joint.row_marginal();
  const auto py = joint.col_marginal();
  const double n = static_cast<double>(joint.total);
  double mi = 0.0;
  for (int x = 0; x < joint.bins; ++x) {
    if (px[x] == 0) continue;
    for (int y = 0; y < joint.bins; ++y) {
      const std::int64_t c = joint.at(x, y);
      if (c == 0) continue;
      // (c/n) ln(c n / (a b)), arranged so the diagonal of a self-pairing
      // reduces to the same -p ln p term the entropy uses.
      const double p = static_cast<double>(c) / n;
      const double ratio = (static_cast<double>(c) / static_cast<double>(px[x])) *
                           (n / static_cast<double>(py[y]));
      mi += p * std::log(ratio);
    }
  }
  return mi * log_scale(log_base);
}

inline double mutual_information(const Patch& p, const Patch& q, int bins, double log_base = natural_log_base) {
  return mutual_information(joint_histogram(p, q, bins), log_base);
}

/// Per-pixel IIE; pixels in the floor(k/2) border band hold `invalid`.
struct EntropyMap {
  static constexpr double invalid = -1.0;

  int width = 0;
  int height = 0;
  int patch_side = 0;
  int bins = 0;
  double log_base = natural_log_base;
  std::vector<double> values;

  double at(int row, int col) const { return values[static_cast<std::size_t>(row) * width + col]; }
  double at(Pixel p) const { return at(p.row, p.col); }
  bool valid(Pixel p) const { return in_valid_region(width, height, p, patch_side); }
};

inline EntropyMap entropy_map(const GrayImage& img, int k, int bins, double log_base = natural_log_base,
                              unsigned workers = 1) {
  if (k < 1) fail(ErrorKind::parameter, "patch side must be positive");
  if (bins < 2) fail(ErrorKind::parameter, "histogram needs at least 2 bins");
  if (img.width() < k || img.height() < k) fail(ErrorKind::size, "image smaller than the entropy patch");
  log_scale(log_base);

  EntropyMap map{img.width(), img.height(), k, bins, log_base,
                 std::vector<double>(static_cast<std::size_t>(img.width()) * img.height(), EntropyMap::invalid)};
  const int half = k / 2;
  const int row_lo = half, row_hi = img.height() - 1 - half;
  const int col_lo = half, col_hi = img.width() - 1 - half;
  if (row_lo > row_hi || col_lo > col_hi) return map;

  std::vector<int> binned(img.data().size());
  for (std::size_t i = 0; i < binned.size(); ++i) binned[i] = bin_index(img.data()[i], bins);
  const std::int64_t total = static_cast<std::int64_t>(k) * k;

  // One sliding-window histogram per row: each step right swaps one column.
  parallel_for(static_cast<std::size_t>(row_hi - row_lo + 1), workers, [&](std::size_t i) {
    const int row = row_lo + static_cast<int>(i);
    const int top = row - half;
    std::vector<std::int64_t> counts(bins, 0);
    for (int r = top; r < top + k; ++r)
      for (int c = col_lo - half; c < col_lo - half + k; ++c) ++counts[binned[static_cast<std::size_t>(r) * img.width() + c]];
    for (int col = col_lo;; ++col) {
      map.values[static_cast<std::size_t>(row) * img.width() + col] = entropy_from_counts(counts, total, log_base);
      if (col == col_hi) break;
      const int drop = col - half, add = col - half + k;
      for (int r = top; r < top + k; ++r) {
        --counts[binned[static_cast<std::size_t>(r) * img.width() + drop]];
        ++counts[binned[static_cast<std::size_t>(r) * img.width() + add]];
      }
    }
  });
  return map;
}

enum class Category : std::uint8_t { invalid = 0, low = 1, medium = 2, high = 3 };

inline const char* to_string(Category c) {
  switch (c) {
    case Category::low: return "low";
    case Category::medium: return "medium";
    case Category::high: return "high";
    case Category::invalid: break;
  }
  return "invalid";
}

inline constexpr Category info_groups[] = {Category::low, Category::medium, Category::high};

struct CategoryMap {
  int width = 0;
  int height = 0;
  double t_lm = 2.0;
  double t_mh = 4.0;
  std::vector<Category> labels;

  Category at(int row, int col) const { return labels[static_cast<std::size_t>(row) * width + col]; }
  Category at(Pixel p) const { return at(p.row, p.col); }
};

inline Category classify(double h, double t_lm, double t_mh) {
  if (h < 0.0) return Category::invalid;
  if (h >= t_mh) return Category::high;
  if (h >= t_lm) return Category::medium;
  return Category::low;
}

inline CategoryMap categorize(const EntropyMap& em, double t_lm, double t_mh) {
  if (!(t_lm >= 0.0) || !(t_lm < t_mh)) fail(ErrorKind::threshold, "thresholds must satisfy 0 <= t_lm < t_mh");
  CategoryMap cm{em.width, em.height, t_lm, t_mh, std::vector<Category>(em.values.size(), Category::invalid)};
  for (int r = 0; r < em.height; ++r)
    for (int c = 0; c < em.width; ++c)
      if (em.valid({r, c})) cm.labels[static_cast<std::size_t>(r) * em.width + c] = classify(em.at(r, c), t_lm, t_mh);
  return cm;
}

/// Per-pixel sampling density. Invalid pixels always carry weight 0.
struct WeightMap {
  int width = 0;
  int height = 0;
  std::vector<double> weights;
  bool normalized = false;
  double total = 0.0;

  double at(int row, int col) const { return weights[static_cast<std::size_t>(row) * width + col]; }
  double at(Pixel p) const { return at(p.row, p.col); }

  WeightMap normalized_copy() const {
    if (!(total > 0.0)) fail(ErrorKind::empty_support, "weight map has no support");
    WeightMap out = *this;
    for (double& w : out.weights) w /= total;
    out.normalized = true;
    out.total = 1.0;
    return out;
  }

  void recompute_total() {
    total = 0.0;
    for (double w : weights) total += w;
  }
};

namespace detail {

template <typename Rule>
WeightMap build_weight_map(const EntropyMap& em, Rule rule) {
  WeightMap wm{em.width, em.height, std::vector<double>(em.values.size(), 0.0), false, 0.0};
  for (int r = 0; r < em.height; ++r)
    for (int c = 0; c < em.width; ++c)
      if (em.valid({r, c})) wm.weights[static_cast<std::size_t>(r) * em.width + c] = rule(em.at(r, c));
  wm.recompute_total();
  return wm;
}

}  // namespace detail

/// rho = H^gamma, with 0^0 = 1 so gamma = 0 is the uniform baseline.
inline WeightMap exp_weight_map(const EntropyMap& em, double gamma) {
  if (!(gamma >= 0.0)) fail(ErrorKind::parameter, "gamma must be non-negative");
  return detail::build_weight_map(em, [gamma](double h) { return gamma == 0.0 ? 1.0 : std::pow(h, gamma); });
}

/// rho = 1[H >= d].
inline WeightMap piecewise_weight_map(const EntropyMap& em, double d) {
  if (!(d >= 0.0)) fail(ErrorKind::parameter, "cutoff d must be non-negative");
  return detail::build_weight_map(em, [d](double h) { return h >= d ? 1.0 : 0.0; });
}

/// Zeroes every pixel outside the band where a side x side window fits.
inline WeightMap restrict_to_valid(const WeightMap& wm, int side) {
  WeightMap out = wm;
  for (int r = 0; r < wm.height; ++r)
    for (int c = 0; c < wm.width; ++c)
      if (!in_valid_region(wm.width, wm.height, {r, c}, side))
        out.weights[static_cast<std::size_t>(r) * wm.width + c] = 0.0;
  out.recompute_total();
  out.normalized = false;
  return out;
}

/// Inverse-CDF sampler over a weight map; draws are i.i.d. and a pure
/// function of the seed.
class PixelSampler {
 public:
  explicit PixelSampler(const WeightMap& wm) : width_(wm.width) {
    cdf_.reserve(wm.weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < wm.weights.size(); ++i) {
      if (wm.weights[i] < 0.0) fail(ErrorKind::parameter, "negative weight in weight map");
      if (wm.weights[i] > 0.0) {
        acc += wm.weights[i];
        cdf_.push_back(acc);
        index_.push_back(i);
      }
    }
    if (!(acc > 0.0)) fail(ErrorKind::empty_support, "weight map has zero total weight");
  }

  Pixel draw(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    if (it == cdf_.end()) --it;
    const std::size_t flat = index_[static_cast<std::size_t>(it - cdf_.begin())];
    return {static_cast<int>(flat / width_), static_cast<int>(flat % width_)};
  }

 private:
  int width_;
  std::vector<double> cdf_;
  std::vector<std::size_t> index_;
};

inline std::vector<Pixel> sample_pixels(const WeightMap& wm, std::size_t n, std::uint64_t seed) {
  PixelSampler sampler(wm);
  Rng rng(seed);
  std::vector<Pixel> out(n);
  for (auto& p : out) p = sampler.draw(rng);
  return out;
}

struct LabeledPixel {
  Pixel pixel;
  Category category = Category::invalid;
};

/// Same draw sequence as the unlabeled overload, tagged with each pixel's group.
inline std::vector<LabeledPixel> sample_pixels(const WeightMap& wm, const CategoryMap& cm, std::size_t n,
                                               std::uint64_t seed) {
  if (cm.width != wm.width || cm.height != wm.height) fail(ErrorKind::shape, "category map does not match weight map");
  std::vector<LabeledPixel> out;
  out.reserve(n);
  for (Pixel p : sample_pixels(wm, n, seed)) out.push_back({p, cm.at(p)});
  return out;
}

}  // namespace pixinfo
