#pragma once

#include <memory>
#include <string>
#include <vector>

#include "poisonforge/rng.hpp"
#include "poisonforge/tensor.hpp"

namespace poisonforge::models {

// Layers keep their forward activations, so the usage pattern is strictly
// forward -> backward -> step. Training mutates parameters from one logical
// thread; snapshots for concurrent inference go through save/load.
class Layer {
public:
    virtual ~Layer() = default;
    virtual TensorF forward(const TensorF& x, bool train) = 0;
    virtual TensorF backward(const TensorF& gout) = 0;
    virtual void collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) {}
};

class Conv2d final : public Layer {
public:
    Conv2d(int in_ch, int out_ch, int kernel, int pad, RngStream& rng);
    TensorF forward(const TensorF& x, bool train) override;
    TensorF backward(const TensorF& gout) override;
    void collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) override;

private:
    int in_ch_, out_ch_, kernel_, pad_;
    TensorF w_, b_, gw_, gb_, x_;
};

class BatchNorm2d final : public Layer {
public:
    explicit BatchNorm2d(int channels, float momentum = 0.1f, float eps = 1e-5f);
    TensorF forward(const TensorF& x, bool train) override;
    TensorF backward(const TensorF& gout) override;
    void collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) override;

private:
    int channels_;
    float momentum_, eps_;
    bool last_train_ = true;
    TensorF gamma_, beta_, ggamma_, gbeta_;
    TensorF running_mean_, running_var_;
    TensorF batch_var_, xhat_;
};

class ReLU final : public Layer {
public:
    TensorF forward(const TensorF& x, bool train) override;
    TensorF backward(const TensorF& gout) override;

private:
    TensorF x_;
};

class AvgPool2 final : public Layer {
public:
    TensorF forward(const TensorF& x, bool train) override;
    TensorF backward(const TensorF& gout) override;

private:
    std::vector<int> in_shape_;
};

// Collapses (N, C, H, W) to (N, C) by averaging each channel plane.
class GlobalAvgPool final : public Layer {
public:
    TensorF forward(const TensorF& x, bool train) override;
    TensorF backward(const TensorF& gout) override;

private:
    std::vector<int> in_shape_;
};

class Linear final : public Layer {
public:
    Linear(int in_dim, int out_dim, RngStream& rng);
    TensorF forward(const TensorF& x, bool train) override;
    TensorF backward(const TensorF& gout) override;
    void collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) override;

private:
    int in_dim_, out_dim_;
    TensorF w_, b_, gw_, gb_, x_;
};

class L2Normalize final : public Layer {
public:
    TensorF forward(const TensorF& x, bool train) override;
    TensorF backward(const TensorF& gout) override;

private:
    TensorF out_, inv_norm_;
};

class Sequential final : public Layer {
public:
    Sequential() = default;
    void add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }
    TensorF forward(const TensorF& x, bool train) override;
    TensorF backward(const TensorF& gout) override;
    void collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) override;

private:
    std::vector<std::unique_ptr<Layer>> layers_;
};

// ---------------------------------------------------------------------------
// model handles
// ---------------------------------------------------------------------------

struct ConvNetConfig {
    int in_channels = 3;
    int image_size = 16;
    std::vector<int> widths = {16, 32, 64}; // one conv block per entry
    int feature_dim = 64;                   // output of the backbone
    int n_classes = 2;
    int projection_dim = 32;
};

// Compact conv classifier f = head ∘ backbone used for poison generation and
// supervised evaluation. Differentiable w.r.t. parameters and input pixels.
class Classifier {
public:
    Classifier(const ConvNetConfig& cfg, std::uint64_t seed);

    TensorF forward(const TensorF& images, bool train);
    // Returns the gradient w.r.t. the input batch.
    TensorF backward(const TensorF& glogits);

    TensorF features(const TensorF& images, bool train);

    void collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads);
    const ConvNetConfig& config() const { return cfg_; }
    const std::string& arch_tag() const { return arch_tag_; }

private:
    ConvNetConfig cfg_;
    std::string arch_tag_;
    Sequential backbone_;
    Sequential head_;
    TensorF feat_cache_;
};

// Backbone + projection head used for contrastive training. `features`
// returns backbone features, L2-normalized when requested; `project` returns
// normalized projection-head outputs for the InfoNCE loss.
class Encoder {
public:
    Encoder(const ConvNetConfig& cfg, std::uint64_t seed);

    TensorF project(const TensorF& images, bool train);
    TensorF backward(const TensorF& gproj);

    TensorF features(const TensorF& images, bool normalize);

    void collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads);
    const ConvNetConfig& config() const { return cfg_; }

private:
    ConvNetConfig cfg_;
    Sequential backbone_;
    Sequential projection_;
};

// checkpoint: flat parameter arrays + JSON structure descriptor
void save_checkpoint(const std::string& path_prefix, const std::string& kind,
                     const ConvNetConfig& cfg, std::vector<TensorF*> params);
std::vector<TensorF> load_checkpoint(const std::string& path_prefix, std::string* kind,
                                     ConvNetConfig* cfg);
void assign_params(std::vector<TensorF*> dst, const std::vector<TensorF>& src);

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

struct SgdConfig {
    float lr = 0.1f;
    float momentum = 0.9f;
    float weight_decay = 1e-4f;
    int warmup_epochs = 0;
    int total_epochs = 1; // cosine horizon
};

class SgdOptimizer {
public:
    SgdOptimizer(std::vector<TensorF*> params, std::vector<TensorF*> grads, SgdConfig cfg);

    // cosine-annealed learning rate with linear warmup, indexed by epoch
    float lr_at(int epoch) const;
    void step(int epoch);
    void zero_grad();

private:
    std::vector<TensorF*> params_, grads_;
    std::vector<TensorF> velocity_;
    SgdConfig cfg_;
};

} // namespace poisonforge::models
