#pragma once

// Grayscale rasters, patch windows and the gray-level histograms that every
// entropy and mutual-information estimate is built from.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pixinfo/error.hpp"

namespace pixinfo {

struct Pixel {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

inline std::string to_string(Pixel p) {
  return "(" + std::to_string(p.row) + ", " + std::to_string(p.col) + ")";
}

/// Row-major image with intensities normalized to [0, 1].
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(int width, int height, double fill = 0.0, double spacing = 1.0)
      : width_(width), height_(height), spacing_(spacing) {
    if (width < 1 || height < 1) fail(ErrorKind::size, "image dimensions must be positive");
    if (fill < 0.0 || fill > 1.0) fail(ErrorKind::invalid_range, "fill intensity outside [0, 1]");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  GrayImage(int width, int height, std::vector<double> data, double spacing = 1.0)
      : width_(width), height_(height), spacing_(spacing), data_(std::move(data)) {
    if (width < 1 || height < 1) fail(ErrorKind::size, "image dimensions must be positive");
    if (data_.size() != static_cast<std::size_t>(width) * height)
      fail(ErrorKind::size, "pixel buffer does not match width x height");
    for (double v : data_)
      if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::invalid_range, "intensity outside [0, 1]");
    if (!(spacing > 0.0)) fail(ErrorKind::invalid_range, "spacing must be positive");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double spacing() const noexcept { return spacing_; }
  void set_spacing(double s) {
    if (!(s > 0.0)) fail(ErrorKind::invalid_range, "spacing must be positive");
    spacing_ = s;
  }

  bool contains(Pixel p) const noexcept { return p.row >= 0 && p.col >= 0 && p.row < height_ && p.col < width_; }

  double at(int row, int col) const { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  double at(Pixel p) const { return at(p.row, p.col); }

  /// Unchecked write; callers keep values in [0, 1].
  void set(int row, int col, double v) { data_[static_cast<std::size_t>(row) * width_ + col] = v; }

  std::span<const double> data() const noexcept { return data_; }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  double spacing_ = 1.0;
  std::vector<double> data_;
};

/// k x k window. For even k the center sits at offset k/2, so the window spans
/// rows [r - k/2, r + k/2 - 1].
struct Patch {
  int side = 0;
  Pixel center;
  std::vector<double> data;

  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * side + c]; }
  std::size_t size() const noexcept { return data.size(); }
};

/// True when p lies outside the symmetric floor(k/2)-wide border band, which
/// also guarantees the k x k window fits inside the image.
inline bool in_valid_region(int width, int height, Pixel p, int k) {
  const int half = k / 2;
  return p.row >= half && p.col >= half && p.row <= height - 1 - half && p.col <= width - 1 - half;
}

inline bool in_valid_region(const GrayImage& img, Pixel p, int k) {
  return in_valid_region(img.width(), img.height(), p, k);
}

inline GrayImage normalize_intensity(int width, int height, std::span<const double> raw, double clip_lo,
                                     double clip_hi, double spacing = 1.0) {
  if (!(clip_lo < clip_hi)) fail(ErrorKind::invalid_range, "clip_lo must be below clip_hi");
  if (raw.size() != static_cast<std::size_t>(width) * height)
    fail(ErrorKind::size, "raw raster does not match width x height");
  std::vector<double> out(raw.size());
  const double span = clip_hi - clip_lo;
  std::transform(raw.begin(), raw.end(), out.begin(),
                 [&](double v) { return (std::clamp(v, clip_lo, clip_hi) - clip_lo) / span; });
  return GrayImage(width, height, std::move(out), spacing);
}

inline Patch extract_patch(const GrayImage& img, Pixel p, int k) {
  if (k < 1) fail(ErrorKind::parameter, "patch side must be positive");
  const int top = p.row - k / 2;
  const int left = p.col - k / 2;
  if (top < 0 || left < 0 || top + k > img.height() || left + k > img.width())
    fail(ErrorKind::border, "patch of side " + std::to_string(k) + " at " + to_string(p) + " leaves the image");
  Patch patch{k, p, {}};
  patch.data.resize(static_cast<std::size_t>(k) * k);
  for (int r = 0; r < k; ++r)
    for (int c = 0; c < k; ++c) patch.data[static_cast<std::size_t>(r) * k + c] = img.at(top + r, left + c);
  return patch;
}

/// Bin of a normalized intensity; v = 1 falls in the last bin.
inline int bin_index(double v, int bins) {
  const int b = static_cast<int>(std::floor(v * bins));
  return std::clamp(b, 0, bins - 1);
}

struct Histogram {
  int bins = 0;
  std::vector<std::int64_t> counts;
  std::int64_t total = 0;

  std::vector<double> normalized() const {
    std::vector<double> p(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) p[i] = static_cast<double>(counts[i]) / total;
    return p;
  }
};

struct JointHistogram {
  int bins = 0;
  std::vector<std::int64_t> counts;  // row-major, counts[x * bins + y]
  std::int64_t total = 0;

  std::int64_t at(int x, int y) const { return counts[static_cast<std::size_t>(x) * bins + y]; }

  std::vector<std::int64_t> row_marginal() const {
    std::vector<std::int64_t> m(bins, 0);
    for (int x = 0; x < bins; ++x)
      for (int y = 0; y < bins; ++y) m[x] += at(x, y);
    return m;
  }

  std::vector<std::int64_t> col_marginal() const {
    std::vector<std::int64_t> m(bins, 0);
    for (int x = 0; x < bins; ++x)
      for (int y = 0; y < bins; ++y) m[y] += at(x, y);
    return m;
  }
};

inline Histogram gray_histogram(std::span<const double> values, int bins) {
  if (bins < 2) fail(ErrorKind::parameter, "histogram needs at least 2 bins");
  Histogram h{bins, std::vector<std::int64_t>(bins, 0), static_cast<std::int64_t>(values.size())};
  for (double v : values) ++h.counts[bin_index(v, bins)];
  return h;
}

inline Histogram gray_histogram(const Patch& patch, int bins) { return gray_histogram(patch.data, bins); }

inline JointHistogram joint_histogram(const Patch& p, const Patch& q, int bins) {
  if (p.side != q.side || p.data.size() != q.data.size())
    fail(ErrorKind::shape, "joint histogram needs patches of equal side");
  if (bins < 2) fail(ErrorKind::parameter, "histogram needs at least 2 bins");
  JointHistogram j{bins, std::vector<std::int64_t>(static_cast<std::size_t>(bins) * bins, 0),
                   static_cast<std::int64_t>(p.data.size())};
  for (std::size_t i = 0; i < p.data.size(); ++i)
    ++j.counts[static_cast<std::size_t>(bin_index(p.data[i], bins)) * bins + bin_index(q.data[i], bins)];
  return j;
}

}  // namespace pixinfo
