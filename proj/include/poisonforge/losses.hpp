#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "poisonforge/augment.hpp"
#include "poisonforge/datakit.hpp"
#include "poisonforge/models.hpp"
#include "poisonforge/rng.hpp"
#include "poisonforge/tensor.hpp"

namespace poisonforge::models {

struct LossValue {
    double value = 0.0;
    std::vector<double> per_sample; // optional
};

// mean negative log-softmax of the true class
template <typename T>
LossValue ce_loss(const Tensor<T>& logits, const std::vector<int>& labels);
// gradient of the mean loss w.r.t. the logits
TensorF ce_loss_backward(const TensorF& logits, const std::vector<int>& labels);

// per-sample (1/n) * ||output - e_y||^2, averaged over the batch
template <typename T>
LossValue mse_onehot_loss(const Tensor<T>& outputs, const std::vector<int>& labels, int n);
TensorF mse_onehot_backward(const TensorF& outputs, const std::vector<int>& labels);

// NT-Xent over 2N views: anchor i pairs with view i of the other batch,
// negatives are the remaining 2N-2 views. Inputs must be L2-normalized.
template <typename T>
LossValue infonce_loss(const Tensor<T>& z1, const Tensor<T>& z2, double temperature);
std::pair<TensorF, TensorF> infonce_backward(const TensorF& z1, const TensorF& z2,
                                             double temperature);

// (N, images) -> (N, D) normalized features; lets tests hand-place features
using FeatureFn = std::function<TensorF(const TensorF& batch)>;
FeatureFn feature_fn(Encoder& encoder);

// Monte-Carlo alignment: per sample, `repeats` independent (pi, tau) draws.
LossValue alignment_loss(const datakit::LabeledDataset& ds, const FeatureFn& g,
                         const augment::AugmentationSpec& spec, RngStream& rng, int repeats);
// Monte-Carlo uniformity over i.i.d. ordered pairs (x = z included).
LossValue uniformity_loss(const datakit::LabeledDataset& ds, const FeatureFn& g,
                          const augment::AugmentationSpec& spec, RngStream& rng, int n_pairs);

// Exact modes over explicit per-sample feature matrices for fixed transforms.
double alignment_exact(const TensorF& feats_pi, const TensorF& feats_tau);
double uniformity_exact(const TensorF& feats_pi, const TensorF& feats_tau);

} // namespace poisonforge::models
