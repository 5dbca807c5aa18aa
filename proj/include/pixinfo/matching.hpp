#pragma once

// One-shot landmark matching by exhaustive cosine-similarity search over a
// dense embedding field, plus MRE / SDR evaluation.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "pixinfo/encoder.hpp"
#include "pixinfo/error.hpp"
#include "pixinfo/imaging.hpp"
#include "pixinfo/landmarks.hpp"
#include "pixinfo/parallel.hpp"

namespace pixinfo {

/// Embeddings for every pixel of the valid interior; column index is
/// row * width + col, border columns are zero and flagged invalid.
struct FeatureField {
  int width = 0;
  int height = 0;
  int patch_side = 0;
  Eigen::MatrixXd features;

  bool valid(Pixel p) const { return in_valid_region(width, height, p, patch_side); }
  Eigen::MatrixXd::ConstColXpr at(Pixel p) const {
    return features.col(static_cast<Eigen::Index>(p.row) * width + p.col);
  }
};

inline FeatureField feature_field(const Encoder& enc, const GrayImage& img, unsigned workers = 1) {
  const int side = enc.input_side();
  const int half = side / 2;
  if (img.width() < 2 * half + 1 || img.height() < 2 * half + 1)
    fail(ErrorKind::size, "image too small for the encoder patch");
  FeatureField field{img.width(), img.height(), side,
                     Eigen::MatrixXd::Zero(enc.embedding_dim(), static_cast<Eigen::Index>(img.width()) * img.height())};
  const int row_lo = half, row_hi = img.height() - 1 - half;
  // Row-at-a-time batches bound memory on large images.
  parallel_for(static_cast<std::size_t>(row_hi - row_lo + 1), workers, [&](std::size_t i) {
    const int row = row_lo + static_cast<int>(i);
    std::vector<Patch> patches;
    for (int col = half; col <= img.width() - 1 - half; ++col) patches.push_back(extract_patch(img, {row, col}, side));
    const Eigen::MatrixXd emb = encode_batch(enc, patches);
    for (int j = 0; j < emb.cols(); ++j)
      field.features.col(static_cast<Eigen::Index>(row) * img.width() + half + j) = emb.col(j);
  });
  return field;
}

/// argmax over valid pixels of cos(query, field(p)); row-major scan with a
/// strict comparison, so ties resolve to the smallest (row, col).
inline Pixel argmax_similarity(const Eigen::VectorXd& query, const FeatureField& field) {
  const double qn = query.norm();
  double best = -std::numeric_limits<double>::infinity();
  Pixel best_p{-1, -1};
  const int half = field.patch_side / 2;
  for (int r = half; r <= field.height - 1 - half; ++r)
    for (int c = half; c <= field.width - 1 - half; ++c) {
      const auto v = field.at({r, c});
      const double denom = qn * v.norm();
      const double s = denom > 0.0 ? query.dot(v) / denom : 0.0;
      if (s > best) best = s, best_p = {r, c};
    }
  return best_p;
}

inline LandmarkSet match_landmarks(const GrayImage& template_img, const LandmarkSet& template_points,
                                   const FeatureField& target_field, const Encoder& enc) {
  LandmarkSet pred{{}, template_points.spacing};
  pred.points.reserve(template_points.size());
  for (std::size_t l = 0; l < template_points.size(); ++l) {
    const Pixel p = template_points.points[l].rounded();
    if (!in_valid_region(template_img, p, enc.input_side()))
      fail(ErrorKind::border, "template landmark " + std::to_string(l) + " " + to_string(p) + " in border band");
    pred.points.push_back(to_point(argmax_similarity(encode(enc, extract_patch(template_img, p, enc.input_side())), target_field)));
  }
  return pred;
}

inline LandmarkSet match_landmarks(const GrayImage& template_img, const LandmarkSet& template_points,
                                   const GrayImage& target, const Encoder& enc, unsigned workers = 1) {
  return match_landmarks(template_img, template_points, feature_field(enc, target, workers), enc);
}

inline const std::vector<double> default_radii = {2.0, 2.5, 3.0, 4.0};

struct MatchReport {
  std::vector<Point2> predicted;
  std::vector<double> radial_errors;  // mm
  double mre = 0.0;
  std::vector<double> radii;
  std::vector<double> sdr;
};

inline MatchReport compute_metrics(const LandmarkSet& pred, const LandmarkSet& truth,
                                   std::span<const double> radii = default_radii) {
  if (pred.size() != truth.size()) fail(ErrorKind::shape, "prediction and truth differ in landmark count");
  if (pred.spacing != truth.spacing) fail(ErrorKind::shape, "prediction and truth differ in spacing");
  if (truth.size() == 0) fail(ErrorKind::shape, "no landmarks to evaluate");
  MatchReport rep{pred.points, {}, 0.0, std::vector<double>(radii.begin(), radii.end()), {}};
  for (std::size_t l = 0; l < pred.size(); ++l) {
    const double dr = pred.points[l].row - truth.points[l].row;
    const double dc = pred.points[l].col - truth.points[l].col;
    rep.radial_errors.push_back(truth.spacing * std::hypot(dr, dc));
  }
  double sum = 0.0;
  for (double e : rep.radial_errors) sum += e;
  rep.mre = sum / static_cast<double>(rep.radial_errors.size());
  for (double r : radii) {
    const auto hits = std::count_if(rep.radial_errors.begin(), rep.radial_errors.end(), [r](double e) { return e <= r; });
    rep.sdr.push_back(static_cast<double>(hits) / static_cast<double>(rep.radial_errors.size()));
  }
  return rep;
}

/// Pools several per-image reports into one (errors concatenated).
inline MatchReport merge_reports(std::span<const MatchReport> reports) {
  if (reports.empty()) fail(ErrorKind::shape, "no reports to merge");
  LandmarkSet pred, truth;
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.radial_errors.size(); ++i) {
      pred.points.push_back({r.radial_errors[i], 0.0});
      truth.points.push_back({0.0, 0.0});
    }
  MatchReport merged = compute_metrics(pred, truth, reports.front().radii);
  merged.predicted.clear();
  for (const auto& r : reports) merged.predicted.insert(merged.predicted.end(), r.predicted.begin(), r.predicted.end());
  return merged;
}

}  // namespace pixinfo
