#pragma once

// Synthetic corpora with exact ground truth: every subject is an affine
// deformation of one base scene, so landmarks and dense correspondences are
// known in closed form.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pixinfo/error.hpp"
#include "pixinfo/imaging.hpp"
#include "pixinfo/landmarks.hpp"
#include "pixinfo/random.hpp"

namespace pixinfo {

/// p' = A p + t on (row, col) coordinates.
struct Affine2 {
  double a00 = 1.0, a01 = 0.0, a10 = 0.0, a11 = 1.0;
  double t0 = 0.0, t1 = 0.0;

  Point2 apply(Point2 p) const { return {a00 * p.row + a01 * p.col + t0, a10 * p.row + a11 * p.col + t1}; }

  Affine2 inverse() const {
    const double det = a00 * a11 - a01 * a10;
    if (std::abs(det) < 1e-12) fail(ErrorKind::spec, "singular affine transform");
    Affine2 inv{a11 / det, -a01 / det, -a10 / det, a00 / det, 0.0, 0.0};
    inv.t0 = -(inv.a00 * t0 + inv.a01 * t1);
    inv.t1 = -(inv.a10 * t0 + inv.a11 * t1);
    return inv;
  }

  bool is_identity() const { return a00 == 1.0 && a01 == 0.0 && a10 == 0.0 && a11 == 1.0 && t0 == 0.0 && t1 == 0.0; }
};

enum class BackgroundKind { flat, gradient };

struct SynthSpec {
  int size = 64;
  int subjects = 10;
  int polygons = 3;
  int textured_polygons = 1;
  int ellipses = 1;
  BackgroundKind background = BackgroundKind::flat;
  double background_level = 0.2;
  double gradient_amplitude = 0.15;
  double noise_sigma = 0.004;
  double rotation_deg = 8.0;
  double scale = 0.06;
  double translation = 3.0;
  double gain_jitter = 0.1;
  double offset_jitter = 0.05;
  int margin = 12;
  int supersample = 4;
  std::uint64_t seed = 1;

  void validate() const {
    if (subjects < 2) fail(ErrorKind::spec, "a corpus needs at least two subjects");
    if (size < 2 * margin + 8) fail(ErrorKind::spec, "image too small for the landmark margin");
    if (polygons < 1) fail(ErrorKind::spec, "need at least one polygon for landmarks");
    if (textured_polygons < 0 || textured_polygons > polygons) fail(ErrorKind::spec, "textured_polygons out of range");
    if (ellipses < 0 || supersample < 1 || margin < 0) fail(ErrorKind::spec, "invalid shape counts");
    if (noise_sigma < 0.0 || rotation_deg < 0.0 || scale < 0.0 || scale >= 1.0 || translation < 0.0 ||
        gain_jitter < 0.0 || gain_jitter >= 1.0 || offset_jitter < 0.0)
      fail(ErrorKind::spec, "deformation ranges must be non-negative (scale, gain below 1)");
    if (background_level < 0.0 || background_level > 1.0) fail(ErrorKind::spec, "background level outside [0, 1]");
  }
};

struct SynthSubject {
  Affine2 transform;  // image 0 -> this subject
  double gain = 1.0;
  double offset = 0.0;
};

struct SynthCorpus {
  std::vector<GrayImage> images;
  std::vector<LandmarkSet> landmarks;
  std::vector<SynthSubject> subjects;

  /// Nearest-pixel image of key point p (on image 0) in image i.
  std::optional<Pixel> correspond(Pixel p, std::size_t i) const {
    const Pixel q = subjects.at(i).transform.apply(to_point(p)).rounded();
    if (!images.at(i).contains(q)) return std::nullopt;
    return q;
  }
};

namespace detail {

/// Smooth periodic fill defined in base-scene coordinates, so it deforms
/// with the subject.
struct Fill {
  double level = 0.5;
  double texture = 0.0;
  double freq_r = 0.0, freq_c = 0.0, phase = 0.0;

  double value(Point2 p) const {
    if (texture == 0.0) return level;
    return level + texture * std::sin(freq_r * p.row + phase) * std::cos(freq_c * p.col - 0.5 * phase);
  }
};

inline Fill textured_fill(Rng& rng, double level) {
  return {level, rng.uniform(0.22, 0.3), rng.uniform(0.9, 1.6), rng.uniform(0.9, 1.6),
          rng.uniform(0.0, 2.0 * std::numbers::pi)};
}

struct Polygon {
  std::vector<Point2> vertices;
  Fill fill;

  bool contains(Point2 p) const {
    // Convex: same side of every edge.
    int sign = 0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      const Point2 a = vertices[i], b = vertices[(i + 1) % vertices.size()];
      const double cross = (b.row - a.row) * (p.col - a.col) - (b.col - a.col) * (p.row - a.row);
      const int s = cross > 0.0 ? 1 : (cross < 0.0 ? -1 : 0);
      if (s == 0) continue;
      if (sign == 0) sign = s;
      else if (s != sign) return false;
    }
    return true;
  }

};

struct Ellipse {
  Point2 centre;
  double radius_r = 1.0, radius_c = 1.0;
  Fill fill;

  bool contains(Point2 p) const {
    const double dr = (p.row - centre.row) / radius_r, dc = (p.col - centre.col) / radius_c;
    return dr * dr + dc * dc <= 1.0;
  }
};

struct Scene {
  std::vector<Polygon> polygons;
  std::vector<Ellipse> ellipses;
  std::vector<Point2> landmarks;

  double value(Point2 p, double background) const {
    double v = background;
    for (const auto& e : ellipses)
      if (e.contains(p)) v = e.fill.value(p);
    for (const auto& poly : polygons)
      if (poly.contains(p)) v = poly.fill.value(p);
    return v;
  }
};

inline Scene build_scene(const SynthSpec& spec, Rng& rng) {
  const double lo = spec.margin + 1.0, hi = spec.size - 1.0 - spec.margin - 1.0;
  const double radius_max = std::max(4.0, 0.125 * spec.size);
  const double radius_min = std::max(3.0, 0.08 * spec.size);
  // Sequential disc placement can jam; restart the whole layout when a
  // disc finds no free spot.
  std::vector<double> radii(static_cast<std::size_t>(spec.polygons));
  for (double& r : radii) r = rng.uniform(radius_min, radius_max);
  std::vector<Point2> centres;
  for (int layout = 0; layout < 100 && centres.size() < radii.size(); ++layout) {
    centres.clear();
    for (std::size_t i = 0; i < radii.size(); ++i) {
      const double r = radii[i];
      bool placed = false;
      for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
        const Point2 c{rng.uniform(lo + r, hi - r), rng.uniform(lo + r, hi - r)};
        placed = true;
        for (std::size_t j = 0; j < centres.size() && placed; ++j)
          placed = std::hypot(c.row - centres[j].row, c.col - centres[j].col) >= radii[j] + r + 1.0;
        if (placed) centres.push_back(c);
      }
      if (!placed) break;
    }
  }
  if (centres.size() < radii.size())
    fail(ErrorKind::spec, "cannot place non-overlapping shapes; enlarge the image or reduce shape counts");

  Scene scene;
  for (int i = 0; i < spec.polygons; ++i) {
    const double r = radii[i];
    const Point2 c = centres[i];
    const int n = 3 + static_cast<int>(rng.below(2));
    const double start = rng.uniform(0.0, 2.0 * std::numbers::pi);
    Polygon poly;
    for (int v = 0; v < n; ++v) {
      const double angle = start + 2.0 * std::numbers::pi * (v + rng.uniform(-0.15, 0.15)) / n;
      const double rv = r * rng.uniform(0.75, 1.0);
      poly.vertices.push_back({c.row + rv * std::sin(angle), c.col + rv * std::cos(angle)});
    }
    const double level = rng.uniform(0.55, 0.8);
    poly.fill = i < spec.textured_polygons ? textured_fill(rng, level) : Fill{level};
    for (int v = 0; v < n; ++v) {
      const Point2 a = poly.vertices[v], b = poly.vertices[(v + 1) % n];
      scene.landmarks.push_back(a);
      scene.landmarks.push_back({0.5 * (a.row + b.row), 0.5 * (a.col + b.col)});
    }
    scene.polygons.push_back(std::move(poly));
  }
  // Large textured ellipses sit underneath the polygons and may cross the
  // margin; they carry no landmarks.
  const double centre = 0.5 * (spec.size - 1);
  for (int i = 0; i < spec.ellipses; ++i) {
    const Point2 c{centre + rng.uniform(-0.1, 0.1) * spec.size, centre + rng.uniform(-0.1, 0.1) * spec.size};
    const double rr = rng.uniform(0.25, 0.35) * spec.size, rc = rng.uniform(0.25, 0.35) * spec.size;
    scene.ellipses.push_back({c, rr, rc, textured_fill(rng, rng.uniform(0.35, 0.45))});
  }
  return scene;
}

inline Affine2 draw_deformation(const SynthSpec& spec, Rng& rng) {
  const double theta = rng.uniform(-spec.rotation_deg, spec.rotation_deg) * std::numbers::pi / 180.0;
  const double s = 1.0 + rng.uniform(-spec.scale, spec.scale);
  const double centre = 0.5 * (spec.size - 1);
  Affine2 t{s * std::cos(theta), -s * std::sin(theta), s * std::sin(theta), s * std::cos(theta), 0.0, 0.0};
  const double dr = rng.uniform(-spec.translation, spec.translation);
  const double dc = rng.uniform(-spec.translation, spec.translation);
  t.t0 = centre - (t.a00 * centre + t.a01 * centre) + dr;
  t.t1 = centre - (t.a10 * centre + t.a11 * centre) + dc;
  return t;
}

inline bool inside_margin(const SynthSpec& spec, Point2 p) {
  const double lo = spec.margin, hi = spec.size - 1.0 - spec.margin;
  return p.row >= lo && p.row <= hi && p.col >= lo && p.col <= hi;
}

inline GrayImage render(const SynthSpec& spec, const Scene& scene, const SynthSubject& subject, std::uint64_t noise_seed) {
  const Affine2 to_base = subject.transform.inverse();
  const int n = spec.size, ss = spec.supersample;
  Rng noise(noise_seed);
  std::vector<double> data(static_cast<std::size_t>(n) * n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      const double background =
          spec.background == BackgroundKind::gradient
              ? spec.background_level + spec.gradient_amplitude * (static_cast<double>(c) / (n - 1) - 0.5)
              : spec.background_level;
      double acc = 0.0;
      for (int i = 0; i < ss; ++i)
        for (int j = 0; j < ss; ++j) {
          const Point2 sample{r + (i + 0.5) / ss - 0.5, c + (j + 0.5) / ss - 0.5};
          acc += scene.value(to_base.apply(sample), background);
        }
      double v = subject.gain * (acc / (ss * ss)) + subject.offset;
      if (spec.noise_sigma > 0.0) v += noise.normal(0.0, spec.noise_sigma);
      // Quantized to the 8-bit grid so PGM round trips are exact.
      data[static_cast<std::size_t>(r) * n + c] = std::lround(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
    }
  return GrayImage(n, n, std::move(data));
}

}  // namespace detail

inline SynthCorpus generate_corpus(const SynthSpec& spec) {
  spec.validate();
  Rng scene_rng(derive_seed(spec.seed, {1}));
  const detail::Scene scene = detail::build_scene(spec, scene_rng);
  for (const auto& l : scene.landmarks)
    if (!detail::inside_margin(spec, l)) fail(ErrorKind::spec, "base landmark outside the valid margin");

  SynthCorpus corpus;
  for (int s = 0; s < spec.subjects; ++s) {
    SynthSubject subject;
    if (s > 0) {
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        Rng rng(derive_seed(spec.seed, {2, static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(attempt)}));
        subject.transform = detail::draw_deformation(spec, rng);
        subject.gain = 1.0 + rng.uniform(-spec.gain_jitter, spec.gain_jitter);
        subject.offset = rng.uniform(-spec.offset_jitter, spec.offset_jitter);
        ok = std::all_of(scene.landmarks.begin(), scene.landmarks.end(),
                         [&](Point2 p) { return detail::inside_margin(spec, subject.transform.apply(p)); });
      }
      if (!ok) fail(ErrorKind::spec, "subject " + std::to_string(s) + ": landmarks leave the margin after 100 retries");
    }
    LandmarkSet set{{}, 1.0};
    for (const auto& p : scene.landmarks) set.points.push_back(subject.transform.apply(p));
    corpus.images.push_back(detail::render(spec, scene, subject, derive_seed(spec.seed, {3, static_cast<std::uint64_t>(s)})));
    corpus.landmarks.push_back(std::move(set));
    corpus.subjects.push_back(subject);
  }
  return corpus;
}

}  // namespace pixinfo
