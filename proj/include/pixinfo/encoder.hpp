#pragma once

// Patch-fed multilayer perceptron producing unit-length pixel embeddings.
// Parameters live in one flat buffer so optimizers, gradient checks and
// checkpoints all address them the same way.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pixinfo/error.hpp"
#include "pixinfo/imaging.hpp"
#include "pixinfo/random.hpp"

namespace pixinfo {

using Embedding = Eigen::VectorXd;

struct EncoderArch {
  int input_side = 15;
  std::vector<int> hidden = {128, 128};
  int embedding_dim = 32;

  std::vector<int> widths() const {
    std::vector<int> w{input_side * input_side};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(embedding_dim);
    return w;
  }

  friend bool operator==(const EncoderArch&, const EncoderArch&) = default;
};

/// Activations kept from a batched forward pass for backpropagation.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] = input, then each post-ramp hidden layer
  Eigen::MatrixXd raw_output;                // pre-normalization
  Eigen::RowVectorXd norms;
  Eigen::MatrixXd output;                    // unit columns
};

class Encoder {
 public:
  static constexpr double min_norm = 1e-12;

  Encoder() = default;

  /// He-normal weights, zero biases.
  Encoder(EncoderArch arch, std::uint64_t seed) : arch_(std::move(arch)) {
    layout();
    Rng rng(seed);
    const auto w = arch_.widths();
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      const double sigma = std::sqrt(2.0 / w[l]);
      auto W = weight(l);
      for (Eigen::Index j = 0; j < W.cols(); ++j)
        for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = rng.normal(0.0, sigma);
    }
  }

  const EncoderArch& arch() const noexcept { return arch_; }
  int input_side() const noexcept { return arch_.input_side; }
  int embedding_dim() const noexcept { return arch_.embedding_dim; }
  std::size_t layer_count() const noexcept { return offsets_.size(); }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }

  void set_parameters(std::span<const double> p) {
    if (p.size() != params_.size()) fail(ErrorKind::shape, "parameter vector has the wrong length");
    std::copy(p.begin(), p.end(), params_.begin());
  }

  Eigen::Map<Eigen::MatrixXd> weight(std::size_t l) {
    return {params_.data() + offsets_[l].weight, offsets_[l].rows, offsets_[l].cols};
  }
  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t l) const {
    return {params_.data() + offsets_[l].weight, offsets_[l].rows, offsets_[l].cols};
  }
  Eigen::Map<Eigen::VectorXd> bias(std::size_t l) { return {params_.data() + offsets_[l].bias, offsets_[l].rows}; }
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t l) const {
    return {params_.data() + offsets_[l].bias, offsets_[l].rows};
  }

  /// Columns of `input` are flattened patches; returns unit-norm columns.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, ForwardCache* cache = nullptr) const {
    if (input.rows() != arch_.input_side * arch_.input_side) fail(ErrorKind::shape, "encoder input has the wrong size");
    Eigen::MatrixXd h = input;
    if (cache) cache->activations.assign(1, input);
    const std::size_t last = layer_count() - 1;
    for (std::size_t l = 0; l < last; ++l) {
      h = ((weight(l) * h).colwise() + bias(l)).cwiseMax(0.0);
      if (cache) cache->activations.push_back(h);
    }
    Eigen::MatrixXd z = (weight(last) * h).colwise() + bias(last);
    Eigen::RowVectorXd norms = z.colwise().norm().cwiseMax(min_norm);
    Eigen::MatrixXd y = z.array().rowwise() / norms.array();
    if (cache) {
      cache->raw_output = std::move(z);
      cache->norms = std::move(norms);
      cache->output = y;
    }
    return y;
  }

  /// Accumulates dL/dparams into `grad` (length parameter_count()) given
  /// dL/doutput for the cached batch.
  void backward(const ForwardCache& cache, const Eigen::MatrixXd& d_output, std::span<double> grad) const {
    if (grad.size() != params_.size()) fail(ErrorKind::shape, "gradient buffer has the wrong length");
    // Through y = z / |z|: dz = (dy - y (y . dy)) / |z|.
    const Eigen::RowVectorXd proj = (cache.output.array() * d_output.array()).colwise().sum();
    Eigen::MatrixXd delta =
        (d_output - cache.output * proj.asDiagonal()).array().rowwise() / cache.norms.array();
    for (std::size_t l = layer_count(); l-- > 0;) {
      const Eigen::MatrixXd& below = cache.activations[l];
      Eigen::Map<Eigen::MatrixXd> gW(grad.data() + offsets_[l].weight, offsets_[l].rows, offsets_[l].cols);
      Eigen::Map<Eigen::VectorXd> gb(grad.data() + offsets_[l].bias, offsets_[l].rows);
      gW.noalias() += delta * below.transpose();
      gb += delta.rowwise().sum();
      if (l == 0) break;
      Eigen::MatrixXd back = weight(l).transpose() * delta;
      delta = back.array() * (below.array() > 0.0).cast<double>();
    }
  }

  friend bool operator==(const Encoder&, const Encoder&) = default;

 private:
  struct Slot {
    std::size_t weight = 0;
    std::size_t bias = 0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    friend bool operator==(const Slot&, const Slot&) = default;
  };

  void layout() {
    const auto w = arch_.widths();
    for (int width : w)
      if (width < 1) fail(ErrorKind::parameter, "encoder layer widths must be positive");
    if (arch_.input_side < 1) fail(ErrorKind::parameter, "encoder input side must be positive");
    std::size_t n = 0;
    offsets_.clear();
    for (std::size_t l = 0; l + 1 < w.size(); ++l) {
      Slot s{n, n + static_cast<std::size_t>(w[l + 1]) * w[l], w[l + 1], w[l]};
      n = s.bias + w[l + 1];
      offsets_.push_back(s);
    }
    params_.assign(n, 0.0);
  }

  EncoderArch arch_;
  std::vector<Slot> offsets_;
  std::vector<double> params_;
};

/// Fixed shift applied to intensities before the first layer.
inline constexpr double input_centre = 0.5;

/// Stacks patches as encoder input columns (row-major pixel order), centred.
inline Eigen::MatrixXd patches_to_matrix(std::span<const Patch> patches, int side) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(side) * side, static_cast<Eigen::Index>(patches.size()));
  for (std::size_t j = 0; j < patches.size(); ++j) {
    if (patches[j].side != side) fail(ErrorKind::shape, "patch side does not match encoder input");
    for (std::size_t i = 0; i < patches[j].data.size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = patches[j].data[i] - input_centre;
  }
  return m;
}

inline Embedding encode(const Encoder& enc, const Patch& patch) {
  if (patch.side != enc.input_side()) fail(ErrorKind::shape, "patch side does not match encoder input");
  return enc.forward(patches_to_matrix(std::span(&patch, 1), patch.side)).col(0);
}

inline Eigen::MatrixXd encode_batch(const Encoder& enc, std::span<const Patch> patches) {
  return enc.forward(patches_to_matrix(patches, enc.input_side()));
}

}  // namespace pixinfo
