#include "poisonforge/models.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <stdexcept>

#include "poisonforge/kernels.hpp"
#include "poisonforge/parallel.hpp"

namespace poisonforge::models {

using nlohmann::json;

// ---------------------------------------------------------------------------
// layers
// ---------------------------------------------------------------------------

Conv2d::Conv2d(int in_ch, int out_ch, int kernel, int pad, RngStream& rng)
    : in_ch_(in_ch), out_ch_(out_ch), kernel_(kernel), pad_(pad),
      w_({out_ch, in_ch, kernel, kernel}), b_({out_ch}),
      gw_({out_ch, in_ch, kernel, kernel}), gb_({out_ch}) {
    const double std = std::sqrt(2.0 / (in_ch * kernel * kernel)); // He init
    for (std::size_t i = 0; i < w_.size(); ++i)
        w_[i] = static_cast<float>(rng.normal() * std);
}

TensorF Conv2d::forward(const TensorF& x, bool) {
    x_ = x;
    TensorF out({x.dim(0), out_ch_, x.dim(2), x.dim(3)});
    kernels::conv2d_fwd(x.data(), w_.data(), b_.data(), out.data(), x.dim(0), in_ch_,
                        x.dim(2), x.dim(3), out_ch_, kernel_, pad_);
    return out;
}

TensorF Conv2d::backward(const TensorF& gout) {
    kernels::conv2d_bwd_params(gout.data(), x_.data(), gw_.data(), gb_.data(), x_.dim(0),
                               in_ch_, x_.dim(2), x_.dim(3), out_ch_, kernel_, pad_);
    TensorF gin(x_.shape());
    kernels::conv2d_bwd_input(gout.data(), w_.data(), gin.data(), x_.dim(0), in_ch_,
                              x_.dim(2), x_.dim(3), out_ch_, kernel_, pad_);
    return gin;
}

void Conv2d::collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) {
    params.push_back(&w_);
    params.push_back(&b_);
    grads.push_back(&gw_);
    grads.push_back(&gb_);
}

BatchNorm2d::BatchNorm2d(int channels, float momentum, float eps)
    : channels_(channels), momentum_(momentum), eps_(eps), gamma_({channels}),
      beta_({channels}), ggamma_({channels}), gbeta_({channels}),
      running_mean_({channels}), running_var_({channels}), batch_var_({channels}) {
    gamma_.fill(1.0f);
    running_var_.fill(1.0f);
}

TensorF BatchNorm2d::forward(const TensorF& x, bool train) {
    last_train_ = train;
    TensorF out(x.shape());
    if (train) {
        TensorF mean({channels_});
        kernels::bn2d_stats(x.data(), x.dim(0), channels_, x.dim(2), x.dim(3), mean.data(),
                            batch_var_.data());
        xhat_ = TensorF(x.shape());
        kernels::bn2d_fwd_train(x.data(), mean.data(), batch_var_.data(), gamma_.data(),
                                beta_.data(), eps_, out.data(), xhat_.data(), x.dim(0),
                                channels_, x.dim(2), x.dim(3));
        for (int c = 0; c < channels_; ++c) {
            running_mean_[c] = (1 - momentum_) * running_mean_[c] + momentum_ * mean[c];
            running_var_[c] = (1 - momentum_) * running_var_[c] + momentum_ * batch_var_[c];
        }
    } else {
        kernels::bn2d_fwd_eval(x.data(), running_mean_.data(), running_var_.data(),
                               gamma_.data(), beta_.data(), eps_, out.data(), x.dim(0),
                               channels_, x.dim(2), x.dim(3));
    }
    return out;
}

TensorF BatchNorm2d::backward(const TensorF& gout) {
    TensorF gin(gout.shape());
    if (last_train_) {
        kernels::bn2d_bwd(gout.data(), xhat_.data(), gamma_.data(), batch_var_.data(), eps_,
                          gin.data(), ggamma_.data(), gbeta_.data(), gout.dim(0), channels_,
                          gout.dim(2), gout.dim(3));
    } else {
        // eval-mode input gradient only; parameter grads are not accumulated
        kernels::bn2d_bwd_input_eval(gout.data(), gamma_.data(), running_var_.data(), eps_,
                                     gin.data(), gout.dim(0), channels_, gout.dim(2),
                                     gout.dim(3));
        ggamma_.fill(0.0f);
        gbeta_.fill(0.0f);
    }
    return gin;
}

void BatchNorm2d::collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) {
    params.push_back(&gamma_);
    params.push_back(&beta_);
    grads.push_back(&ggamma_);
    grads.push_back(&gbeta_);
}

TensorF ReLU::forward(const TensorF& x, bool) {
    x_ = x;
    TensorF out(x.shape());
    kernels::relu_fwd(x.data(), out.data(), x.size());
    return out;
}

TensorF ReLU::backward(const TensorF& gout) {
    TensorF gin(gout.shape());
    kernels::relu_bwd(gout.data(), x_.data(), gin.data(), gout.size());
    return gin;
}

TensorF AvgPool2::forward(const TensorF& x, bool) {
    in_shape_ = x.shape();
    TensorF out({x.dim(0), x.dim(1), x.dim(2) / 2, x.dim(3) / 2});
    kernels::avgpool2_fwd(x.data(), out.data(), x.dim(0), x.dim(1), x.dim(2), x.dim(3));
    return out;
}

TensorF AvgPool2::backward(const TensorF& gout) {
    TensorF gin(in_shape_);
    kernels::avgpool2_bwd(gout.data(), gin.data(), in_shape_[0], in_shape_[1], in_shape_[2],
                          in_shape_[3]);
    return gin;
}

TensorF GlobalAvgPool::forward(const TensorF& x, bool) {
    in_shape_ = x.shape();
    const int n = x.dim(0), c = x.dim(1);
    const std::size_t plane = static_cast<std::size_t>(x.dim(2)) * x.dim(3);
    TensorF out({n, c});
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float* p = x.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
            double acc = 0.0;
            for (std::size_t j = 0; j < plane; ++j) acc += p[j];
            out.at(i, ch) = static_cast<float>(acc / static_cast<double>(plane));
        }
    return out;
}

TensorF GlobalAvgPool::backward(const TensorF& gout) {
    const int n = in_shape_[0], c = in_shape_[1];
    const std::size_t plane = static_cast<std::size_t>(in_shape_[2]) * in_shape_[3];
    TensorF gin(in_shape_);
    const float inv = 1.0f / static_cast<float>(plane);
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < c; ++ch) {
            const float g = gout.at(i, ch) * inv;
            float* p = gin.data() + (static_cast<std::size_t>(i) * c + ch) * plane;
            for (std::size_t j = 0; j < plane; ++j) p[j] = g;
        }
    return gin;
}

Linear::Linear(int in_dim, int out_dim, RngStream& rng)
    : in_dim_(in_dim), out_dim_(out_dim), w_({out_dim, in_dim}), b_({out_dim}),
      gw_({out_dim, in_dim}), gb_({out_dim}) {
    const double std = std::sqrt(2.0 / in_dim);
    for (std::size_t i = 0; i < w_.size(); ++i)
        w_[i] = static_cast<float>(rng.normal() * std);
}

TensorF Linear::forward(const TensorF& x, bool) {
    x_ = x;
    TensorF out({x.dim(0), out_dim_});
    kernels::linear_fwd(x.data(), w_.data(), b_.data(), out.data(), x.dim(0), in_dim_, out_dim_);
    return out;
}

TensorF Linear::backward(const TensorF& gout) {
    kernels::linear_bwd_params(gout.data(), x_.data(), gw_.data(), gb_.data(), x_.dim(0),
                               in_dim_, out_dim_);
    TensorF gin(x_.shape());
    kernels::linear_bwd_input(gout.data(), w_.data(), gin.data(), x_.dim(0), in_dim_, out_dim_);
    return gin;
}

void Linear::collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) {
    params.push_back(&w_);
    params.push_back(&b_);
    grads.push_back(&gw_);
    grads.push_back(&gb_);
}

TensorF L2Normalize::forward(const TensorF& x, bool) {
    out_ = TensorF(x.shape());
    inv_norm_ = TensorF({x.dim(0)});
    kernels::l2norm_fwd(x.data(), out_.data(), inv_norm_.data(), x.dim(0), x.dim(1));
    return out_;
}

TensorF L2Normalize::backward(const TensorF& gout) {
    TensorF gin(gout.shape());
    kernels::l2norm_bwd(gout.data(), out_.data(), inv_norm_.data(), gin.data(), gout.dim(0),
                        gout.dim(1));
    return gin;
}

TensorF Sequential::forward(const TensorF& x, bool train) {
    TensorF cur = x;
    for (auto& l : layers_) cur = l->forward(cur, train);
    return cur;
}

TensorF Sequential::backward(const TensorF& gout) {
    TensorF cur = gout;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) cur = (*it)->backward(cur);
    return cur;
}

void Sequential::collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) {
    for (auto& l : layers_) l->collect(params, grads);
}

// ---------------------------------------------------------------------------
// model handles
// ---------------------------------------------------------------------------

namespace {

void build_backbone(Sequential& seq, const ConvNetConfig& cfg, RngStream& rng) {
    int ch = cfg.in_channels;
    int side = cfg.image_size;
    for (std::size_t i = 0; i < cfg.widths.size(); ++i) {
        const int out = cfg.widths[i];
        seq.add(std::make_unique<Conv2d>(ch, out, 3, 1, rng));
        seq.add(std::make_unique<BatchNorm2d>(out));
        seq.add(std::make_unique<ReLU>());
        if (i + 1 < cfg.widths.size() && side % 2 == 0) {
            seq.add(std::make_unique<AvgPool2>());
            side /= 2;
        }
        ch = out;
    }
    seq.add(std::make_unique<GlobalAvgPool>());
    if (ch != cfg.feature_dim) {
        seq.add(std::make_unique<Linear>(ch, cfg.feature_dim, rng));
        seq.add(std::make_unique<ReLU>());
    }
}

} // namespace

Classifier::Classifier(const ConvNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    RngStream rng(seed);
    build_backbone(backbone_, cfg, rng);
    head_.add(std::make_unique<Linear>(cfg.feature_dim, cfg.n_classes, rng));
    arch_tag_ = "convnet" + std::to_string(cfg.widths.size()) + "-f" +
                std::to_string(cfg.feature_dim);
}

TensorF Classifier::forward(const TensorF& images, bool train) {
    feat_cache_ = backbone_.forward(images, train);
    return head_.forward(feat_cache_, train);
}

TensorF Classifier::backward(const TensorF& glogits) {
    const TensorF gfeat = head_.backward(glogits);
    return backbone_.backward(gfeat);
}

TensorF Classifier::features(const TensorF& images, bool train) {
    return backbone_.forward(images, train);
}

void Classifier::collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) {
    backbone_.collect(params, grads);
    head_.collect(params, grads);
}

Encoder::Encoder(const ConvNetConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    RngStream rng(seed);
    build_backbone(backbone_, cfg, rng);
    projection_.add(std::make_unique<Linear>(cfg.feature_dim, cfg.feature_dim, rng));
    projection_.add(std::make_unique<ReLU>());
    projection_.add(std::make_unique<Linear>(cfg.feature_dim, cfg.projection_dim, rng));
    projection_.add(std::make_unique<L2Normalize>());
}

TensorF Encoder::project(const TensorF& images, bool train) {
    const TensorF feat = backbone_.forward(images, train);
    return projection_.forward(feat, train);
}

TensorF Encoder::backward(const TensorF& gproj) {
    const TensorF gfeat = projection_.backward(gproj);
    return backbone_.backward(gfeat);
}

TensorF Encoder::features(const TensorF& images, bool normalize) {
    TensorF feat = backbone_.forward(images, false);
    if (normalize) {
        TensorF out(feat.shape());
        TensorF inv({feat.dim(0)});
        kernels::l2norm_fwd(feat.data(), out.data(), inv.data(), feat.dim(0), feat.dim(1));
        return out;
    }
    return feat;
}

void Encoder::collect(std::vector<TensorF*>& params, std::vector<TensorF*>& grads) {
    backbone_.collect(params, grads);
    projection_.collect(params, grads);
}

// ---------------------------------------------------------------------------
// checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const std::string& path_prefix, const std::string& kind,
                     const ConvNetConfig& cfg, std::vector<TensorF*> params) {
    json desc;
    desc["kind"] = kind;
    desc["in_channels"] = cfg.in_channels;
    desc["image_size"] = cfg.image_size;
    desc["widths"] = cfg.widths;
    desc["feature_dim"] = cfg.feature_dim;
    desc["n_classes"] = cfg.n_classes;
    desc["projection_dim"] = cfg.projection_dim;
    json shapes = json::array();
    for (const TensorF* p : params) shapes.push_back(p->shape());
    desc["shapes"] = shapes;

    std::ofstream js(path_prefix + ".json");
    if (!js) throw std::runtime_error("cannot write checkpoint descriptor");
    js << desc.dump(2) << "\n";

    std::ofstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("cannot write checkpoint arrays");
    bin.write("PFM1", 4);
    for (const TensorF* p : params)
        bin.write(reinterpret_cast<const char*>(p->data()),
                  static_cast<std::streamsize>(p->size() * sizeof(float)));
}

std::vector<TensorF> load_checkpoint(const std::string& path_prefix, std::string* kind,
                                     ConvNetConfig* cfg) {
    std::ifstream js(path_prefix + ".json");
    if (!js) throw std::runtime_error("missing checkpoint descriptor: " + path_prefix + ".json");
    json desc = json::parse(js);
    if (kind) *kind = desc.at("kind").get<std::string>();
    if (cfg) {
        cfg->in_channels = desc.at("in_channels").get<int>();
        cfg->image_size = desc.at("image_size").get<int>();
        cfg->widths = desc.at("widths").get<std::vector<int>>();
        cfg->feature_dim = desc.at("feature_dim").get<int>();
        cfg->n_classes = desc.at("n_classes").get<int>();
        cfg->projection_dim = desc.at("projection_dim").get<int>();
    }

    std::ifstream bin(path_prefix + ".bin", std::ios::binary);
    if (!bin) throw std::runtime_error("missing checkpoint arrays: " + path_prefix + ".bin");
    char magic[4];
    bin.read(magic, 4);
    if (!bin || std::string(magic, 4) != "PFM1")
        throw std::runtime_error("corrupt checkpoint header");

    std::vector<TensorF> out;
    for (const auto& s : desc.at("shapes")) {
        TensorF t(s.get<std::vector<int>>());
        bin.read(reinterpret_cast<char*>(t.data()),
                 static_cast<std::streamsize>(t.size() * sizeof(float)));
        if (!bin) throw std::runtime_error("truncated checkpoint arrays");
        out.push_back(std::move(t));
    }
    return out;
}

void assign_params(std::vector<TensorF*> dst, const std::vector<TensorF>& src) {
    if (dst.size() != src.size()) throw std::runtime_error("checkpoint parameter count mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (!dst[i]->same_shape(src[i]))
            throw std::runtime_error("checkpoint parameter shape mismatch");
        *dst[i] = src[i];
    }
}

// ---------------------------------------------------------------------------
// optimizer
// ---------------------------------------------------------------------------

SgdOptimizer::SgdOptimizer(std::vector<TensorF*> params, std::vector<TensorF*> grads,
                           SgdConfig cfg)
    : params_(std::move(params)), grads_(std::move(grads)), cfg_(cfg) {
    if (params_.size() != grads_.size())
        throw std::invalid_argument("parameter/gradient count mismatch");
    velocity_.reserve(params_.size());
    for (TensorF* p : params_) velocity_.emplace_back(p->shape());
}

float SgdOptimizer::lr_at(int epoch) const {
    if (cfg_.warmup_epochs > 0 && epoch < cfg_.warmup_epochs)
        return cfg_.lr * static_cast<float>(epoch + 1) / static_cast<float>(cfg_.warmup_epochs);
    const int span = std::max(1, cfg_.total_epochs - cfg_.warmup_epochs);
    const int t = std::min(epoch - cfg_.warmup_epochs, span);
    const double frac = static_cast<double>(t) / span;
    return static_cast<float>(cfg_.lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac)));
}

void SgdOptimizer::step(int epoch) {
    const float lr = lr_at(epoch);
    for (std::size_t i = 0; i < params_.size(); ++i) {
        TensorF& p = *params_[i];
        TensorF& g = *grads_[i];
        TensorF& v = velocity_[i];
        for (std::size_t j = 0; j < p.size(); ++j) {
            const float grad = g[j] + cfg_.weight_decay * p[j];
            v[j] = cfg_.momentum * v[j] + grad;
            p[j] -= lr * v[j];
        }
    }
}

void SgdOptimizer::zero_grad() {
    for (TensorF* g : grads_) g->fill(0.0f);
}

} // namespace poisonforge::models
