#pragma once

// InfoNCE over unit embeddings with exact gradients.
//
//   loss = -log( e^{a.p/t} / (e^{a.p/t} + sum_i e^{n_i.q/t}) )
//
// where q is the positive p (default, NegativePairing::positive) or the
// anchor a (NegativePairing::anchor, the textbook form).

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "pixinfo/error.hpp"

namespace pixinfo {

enum class NegativePairing { positive, anchor };

struct InfoNceResult {
  double loss = 0.0;
  Eigen::VectorXd d_anchor;
  Eigen::VectorXd d_positive;
  std::vector<Eigen::VectorXd> d_negatives;
};

inline InfoNceResult info_nce_loss(const Eigen::VectorXd& anchor, const Eigen::VectorXd& positive,
                                   std::span<const Eigen::VectorXd> negatives, double tau,
                                   NegativePairing pairing = NegativePairing::positive) {
  if (!(tau > 0.0)) fail(ErrorKind::parameter, "temperature must be positive");
  if (anchor.size() != positive.size()) fail(ErrorKind::shape, "anchor and positive differ in dimension");
  for (const auto& n : negatives)
    if (n.size() != anchor.size()) fail(ErrorKind::shape, "negative differs in dimension");

  const Eigen::VectorXd& partner = pairing == NegativePairing::positive ? positive : anchor;
  std::vector<double> logits(negatives.size() + 1);
  logits[0] = anchor.dot(positive) / tau;
  for (std::size_t i = 0; i < negatives.size(); ++i) logits[i + 1] = negatives[i].dot(partner) / tau;

  const double top = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (double& l : logits) denom += (l = std::exp(l - top));  // logits now hold shifted exponentials
  InfoNceResult r;
  const double w0 = logits[0] / denom;
  r.loss = -std::log(w0);

  // dL/dlogit_0 = w0 - 1, dL/dlogit_i = w_i.
  r.d_anchor = (w0 - 1.0) / tau * positive;
  r.d_positive = (w0 - 1.0) / tau * anchor;
  Eigen::VectorXd d_partner = Eigen::VectorXd::Zero(anchor.size());
  r.d_negatives.reserve(negatives.size());
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    const double wi = logits[i + 1] / denom;
    r.d_negatives.push_back(wi / tau * partner);
    d_partner += wi / tau * negatives[i];
  }
  if (pairing == NegativePairing::positive)
    r.d_positive += d_partner;
  else
    r.d_anchor += d_partner;
  return r;
}

/// Batched form: column j of `anchors` pairs with column j of `positives`, and
/// the negatives for j are the positives at negative_index[j]. Returns per-column
/// losses and accumulates gradients of their mean into d_anchors / d_positives.
inline Eigen::VectorXd info_nce_batch(const Eigen::MatrixXd& anchors, const Eigen::MatrixXd& positives,
                                      const std::vector<std::vector<int>>& negative_index, double tau,
                                      NegativePairing pairing, Eigen::MatrixXd& d_anchors,
                                      Eigen::MatrixXd& d_positives) {
  if (!(tau > 0.0)) fail(ErrorKind::parameter, "temperature must be positive");
  const Eigen::Index batch = anchors.cols();
  if (positives.cols() != batch || static_cast<Eigen::Index>(negative_index.size()) != batch)
    fail(ErrorKind::shape, "batch dimensions disagree");
  d_anchors = Eigen::MatrixXd::Zero(anchors.rows(), batch);
  d_positives = Eigen::MatrixXd::Zero(positives.rows(), batch);
  Eigen::VectorXd losses(batch);
  const double scale = 1.0 / static_cast<double>(batch);

  std::vector<double> e;
  for (Eigen::Index j = 0; j < batch; ++j) {
    const auto& negs = negative_index[j];
    const auto a = anchors.col(j);
    const auto p = positives.col(j);
    const Eigen::VectorXd partner = pairing == NegativePairing::positive ? Eigen::VectorXd(p) : Eigen::VectorXd(a);
    e.assign(negs.size() + 1, 0.0);
    e[0] = a.dot(p) / tau;
    for (std::size_t i = 0; i < negs.size(); ++i) e[i + 1] = positives.col(negs[i]).dot(partner) / tau;
    const double top = *std::max_element(e.begin(), e.end());
    double denom = 0.0;
    for (double& v : e) denom += (v = std::exp(v - top));
    const double w0 = e[0] / denom;
    losses(j) = -std::log(w0);

    const double g0 = scale * (w0 - 1.0) / tau;
    d_anchors.col(j) += g0 * p;
    d_positives.col(j) += g0 * a;
    Eigen::VectorXd d_partner = Eigen::VectorXd::Zero(anchors.rows());
    for (std::size_t i = 0; i < negs.size(); ++i) {
      const double gi = scale * (e[i + 1] / denom) / tau;
      d_positives.col(negs[i]) += gi * partner;
      d_partner += gi * positives.col(negs[i]);
    }
    if (pairing == NegativePairing::positive)
      d_positives.col(j) += d_partner;
    else
      d_anchors.col(j) += d_partner;
  }
  return losses;
}

/// Negatives for pixel j: the next M batch members in cyclic order.
inline std::vector<std::vector<int>> cyclic_negatives(int batch, int m) {
  m = std::min(m, batch - 1);
  std::vector<std::vector<int>> idx(batch);
  for (int j = 0; j < batch; ++j)
    for (int i = 1; i <= m; ++i) idx[j].push_back((j + i) % batch);
  return idx;
}

}  // namespace pixinfo
