#pragma once

// Grouped contrastive training of the encoder pair (F on original patches,
// F' on augmented patches), finite-difference gradient checking, and the
// checkpoint / report formats.

#include <Eigen/Core>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pixinfo/augment.hpp"
#include "pixinfo/encoder.hpp"
#include "pixinfo/error.hpp"
#include "pixinfo/infometrics.hpp"
#include "pixinfo/infonce.hpp"
#include "pixinfo/random.hpp"

namespace pixinfo {

struct GroupAugment {
  AugmentParams low;
  AugmentParams medium;
  AugmentParams high;

  const AugmentParams& operator[](Category c) const {
    switch (c) {
      case Category::low: return low;
      case Category::high: return high;
      default: return medium;
    }
  }

  static GroupAugment shared(AugmentParams a) { return {a, a, a}; }
};

struct TrainConfig {
  double tau = 0.1;
  int negatives = 32;
  int batch = 64;
  int steps = 200;
  double step_size = 1e-3;
  std::uint64_t seed = 0;
  GroupAugment augment;
  NegativePairing pairing = NegativePairing::positive;
  EncoderArch arch;

  void validate() const {
    if (!(tau > 0.0)) fail(ErrorKind::parameter, "temperature must be positive");
    if (negatives < 1) fail(ErrorKind::parameter, "need at least one negative");
    if (batch < negatives + 1) fail(ErrorKind::parameter, "batch must exceed the negative count");
    if (steps < 0) fail(ErrorKind::parameter, "step count must be non-negative");
    if (!(step_size >= 0.0)) fail(ErrorKind::parameter, "step size must be non-negative");
    augment.low.validate();
    augment.medium.validate();
    augment.high.validate();
  }
};

/// Sampling density and group labels for one training image.
struct PixelMaps {
  WeightMap weights;
  CategoryMap categories;
};

struct StepLoss {
  double total = 0.0;
  double low = 0.0;
  double medium = 0.0;
  double high = 0.0;
};

struct TrainReport {
  std::vector<StepLoss> steps;
  Encoder encoder;           // F, used at inference
  Encoder positive_encoder;  // F'
};

/// Encoder seeds are split from the training seed.
inline Encoder initial_encoder(const TrainConfig& cfg) { return Encoder(cfg.arch, derive_seed(cfg.seed, {0xF})); }
inline Encoder initial_positive_encoder(const TrainConfig& cfg) {
  return Encoder(cfg.arch, derive_seed(cfg.seed, {0xF, 1}));
}

inline TrainReport train(std::span<const GrayImage> images, const TrainConfig& cfg, std::span<const PixelMaps> maps) {
  cfg.validate();
  if (images.empty()) fail(ErrorKind::parameter, "training needs at least one image");
  if (maps.size() != images.size()) fail(ErrorKind::shape, "one weight/category map per image is required");

  const int side = cfg.arch.input_side;
  std::vector<PixelSampler> samplers;
  samplers.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& m = maps[i];
    if (m.weights.width != images[i].width() || m.weights.height != images[i].height() ||
        m.categories.width != images[i].width() || m.categories.height != images[i].height())
      fail(ErrorKind::shape, "map size differs from image " + std::to_string(i));
    // Pixels whose encoder window would leave the image are never sampled.
    samplers.emplace_back(restrict_to_valid(m.weights, side));
  }

  TrainReport report{{}, initial_encoder(cfg), initial_positive_encoder(cfg)};
  Encoder& f = report.encoder;
  Encoder& fp = report.positive_encoder;
  const auto negative_index = cyclic_negatives(cfg.batch, cfg.negatives);
  std::vector<double> grad_f(f.parameter_count()), grad_fp(fp.parameter_count());
  std::array<double, 4> last_group{};  // indexed by Category
  bool seen_any = false;

  std::vector<Patch> anchors(cfg.batch), positives(cfg.batch);
  std::vector<Category> groups(cfg.batch);
  report.steps.reserve(cfg.steps);

  for (int step = 0; step < cfg.steps; ++step) {
    const std::size_t img_index = Rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(step), 0})).below(images.size());
    const GrayImage& img = images[img_index];
    Rng pixel_rng(derive_seed(cfg.seed, {static_cast<std::uint64_t>(step), 1}));
    for (int j = 0; j < cfg.batch; ++j) {
      const Pixel p = samplers[img_index].draw(pixel_rng);
      groups[j] = maps[img_index].categories.at(p);
      anchors[j] = extract_patch(img, p, side);
      positives[j] = apply_photometric(
          anchors[j], draw_photometric(cfg.augment[groups[j]],
                                       derive_seed(cfg.seed, {static_cast<std::uint64_t>(step), 2,
                                                              static_cast<std::uint64_t>(j)})));
    }

    ForwardCache cache_f, cache_fp;
    const Eigen::MatrixXd za = f.forward(patches_to_matrix(anchors, side), &cache_f);
    const Eigen::MatrixXd zp = fp.forward(patches_to_matrix(positives, side), &cache_fp);
    Eigen::MatrixXd d_a, d_p;
    const Eigen::VectorXd losses = info_nce_batch(za, zp, negative_index, cfg.tau, cfg.pairing, d_a, d_p);

    StepLoss rec;
    rec.total = losses.mean();
    if (!std::isfinite(rec.total)) fail(ErrorKind::numerical, "non-finite loss at step " + std::to_string(step));
    std::array<double, 4> sum{};
    std::array<int, 4> count{};
    for (int j = 0; j < cfg.batch; ++j) {
      sum[static_cast<int>(groups[j])] += losses(j);
      ++count[static_cast<int>(groups[j])];
    }
    if (!seen_any) last_group.fill(rec.total), seen_any = true;
    for (int g = 1; g <= 3; ++g)
      if (count[g] > 0) last_group[g] = sum[g] / count[g];
    rec.low = last_group[1];
    rec.medium = last_group[2];
    rec.high = last_group[3];
    report.steps.push_back(rec);

    std::fill(grad_f.begin(), grad_f.end(), 0.0);
    std::fill(grad_fp.begin(), grad_fp.end(), 0.0);
    f.backward(cache_f, d_a, grad_f);
    fp.backward(cache_fp, d_p, grad_fp);
    if (cfg.step_size != 0.0) {
      auto pf = f.parameters();
      auto pfp = fp.parameters();
      for (std::size_t i = 0; i < pf.size(); ++i) pf[i] -= cfg.step_size * grad_f[i];
      for (std::size_t i = 0; i < pfp.size(); ++i) pfp[i] -= cfg.step_size * grad_fp[i];
    }
  }
  return report;
}

/// Fixed anchor/positive patches for loss evaluation outside the sampler.
struct ContrastiveBatch {
  std::vector<Patch> anchors;
  std::vector<Patch> positives;
  int negatives = 1;
};

inline double batch_loss(const Encoder& f, const Encoder& fp, const ContrastiveBatch& batch, double tau,
                         NegativePairing pairing, std::vector<double>* grad_f = nullptr,
                         std::vector<double>* grad_fp = nullptr) {
  const int n = static_cast<int>(batch.anchors.size());
  ForwardCache cf, cfp;
  const Eigen::MatrixXd za = f.forward(patches_to_matrix(batch.anchors, f.input_side()), &cf);
  const Eigen::MatrixXd zp = fp.forward(patches_to_matrix(batch.positives, fp.input_side()), &cfp);
  Eigen::MatrixXd d_a, d_p;
  const Eigen::VectorXd losses = info_nce_batch(za, zp, cyclic_negatives(n, batch.negatives), tau, pairing, d_a, d_p);
  if (grad_f) {
    grad_f->assign(f.parameter_count(), 0.0);
    f.backward(cf, d_a, *grad_f);
  }
  if (grad_fp) {
    grad_fp->assign(fp.parameter_count(), 0.0);
    fp.backward(cfp, d_p, *grad_fp);
  }
  return losses.mean();
}

struct GradientCheckResult {
  double max_relative_error = 0.0;
  int checked = 0;
};

/// Compares analytic parameter gradients with central differences on
/// `samples` parameters drawn from both encoders. Relative error is
/// |g - g_fd| / max(|g| + |g_fd|, 1e-6).
inline GradientCheckResult loss_gradient_check(const Encoder& f, const Encoder& fp, const ContrastiveBatch& batch,
                                               double tau, double eps, int samples = 50, std::uint64_t seed = 0,
                                               NegativePairing pairing = NegativePairing::positive) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) fail(ErrorKind::parameter, "eps must lie in [1e-6, 1e-3]");
  std::vector<double> gf, gfp;
  batch_loss(f, fp, batch, tau, pairing, &gf, &gfp);

  Encoder probe_f = f, probe_fp = fp;
  Rng rng(seed);
  GradientCheckResult result;
  const std::size_t total = f.parameter_count() + fp.parameter_count();
  for (int s = 0; s < samples; ++s) {
    const std::size_t idx = rng.below(total);
    const bool first = idx < f.parameter_count();
    Encoder& target = first ? probe_f : probe_fp;
    const std::size_t local = first ? idx : idx - f.parameter_count();
    const double analytic = first ? gf[local] : gfp[local];
    const double saved = target.parameters()[local];
    target.parameters()[local] = saved + eps;
    const double up = batch_loss(probe_f, probe_fp, batch, tau, pairing);
    target.parameters()[local] = saved - eps;
    const double down = batch_loss(probe_f, probe_fp, batch, tau, pairing);
    target.parameters()[local] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
    result.max_relative_error = std::max(result.max_relative_error, rel);
    ++result.checked;
  }
  return result;
}

// Checkpoint: one JSON header line, then little-endian float32 parameters.

inline nlohmann::json arch_to_json(const EncoderArch& a) {
  return {{"input_side", a.input_side}, {"hidden", a.hidden}, {"embedding_dim", a.embedding_dim}};
}

inline EncoderArch arch_from_json(const nlohmann::json& j) {
  return {j.at("input_side").get<int>(), j.at("hidden").get<std::vector<int>>(), j.at("embedding_dim").get<int>()};
}

inline std::string encode_checkpoint(const Encoder& enc, const std::string& config_hash, int step) {
  nlohmann::json h = {{"architecture", arch_to_json(enc.arch())},
                      {"config_hash", config_hash},
                      {"step", step},
                      {"parameter_count", enc.parameter_count()},
                      {"dtype", "float32-le"}};
  std::string out = h.dump() + "\n";
  for (double v : enc.parameters()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
  }
  return out;
}

inline Encoder decode_checkpoint(const std::string& bytes) {
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) fail(ErrorKind::data, "checkpoint has no header line");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(bytes.substr(0, nl));
    Encoder enc(arch_from_json(h.at("architecture")), 0);
    const std::size_t n = h.at("parameter_count").get<std::size_t>();
    if (n != enc.parameter_count() || bytes.size() != nl + 1 + 4 * n)
      fail(ErrorKind::data, "checkpoint payload does not match its architecture");
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[nl + 1 + 4 * i + b])) << (8 * b);
      p[i] = std::bit_cast<float>(bits);
    }
    enc.set_parameters(p);
    return enc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("checkpoint header: ") + e.what());
  }
}

inline std::string report_csv(const TrainReport& report) {
  std::string out = "step,total_loss,loss_low,loss_med,loss_high\n";
  char line[160];
  for (std::size_t s = 0; s < report.steps.size(); ++s) {
    const auto& r = report.steps[s];
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g,%.9g\n", s, r.total, r.low, r.medium, r.high);
    out += line;
  }
  return out;
}

}  // namespace pixinfo
