#include "poisonforge/attacks.hpp"

#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "poisonforge/errors.hpp"
#include "poisonforge/losses.hpp"
#include "poisonforge/parallel.hpp"

namespace poisonforge::attacks {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config validation
// ---------------------------------------------------------------------------

void AUEConfig::validate(int dataset_size) const {
    if (T < 1 || T_theta < 1 || T_delta < 1) throw ConfigError("iteration counts must be >= 1");
    if (T_p < 0) throw ConfigError("T_p must be >= 0");
    if (alpha_theta <= 0.0 || alpha_delta <= 0.0) throw ConfigError("step sizes must be positive");
    if (epsilon < 0.0) throw ConfigError("epsilon must be non-negative");
    if (batch < 1 || batch > dataset_size) throw ConfigError("invalid batch size");
    if (poison_ratio < 0.0 || poison_ratio > 1.0) throw ConfigError("ratio must lie in [0, 1]");
    spec.validate();
}

void AAPConfig::validate(int dataset_size, int n_classes) const {
    if (T < 1 || T_theta < 1) throw ConfigError("iteration counts must be >= 1");
    if (T_p < 0) throw ConfigError("T_p must be >= 0");
    if (alpha_theta <= 0.0 || alpha_delta <= 0.0) throw ConfigError("step sizes must be positive");
    if (epsilon < 0.0) throw ConfigError("epsilon must be non-negative");
    if (batch < 1 || batch > dataset_size) throw ConfigError("invalid batch size");
    if (poison_ratio < 0.0 || poison_ratio > 1.0) throw ConfigError("ratio must lie in [0, 1]");
    if (targeted && (label_shift < 1 || label_shift > n_classes - 1))
        throw ConfigError("label shift K must lie in [1, n_classes-1]");
    spec.validate();
}

// ---------------------------------------------------------------------------
// helpers
// ---------------------------------------------------------------------------

TensorF clip_linf(TensorF delta, float epsilon) {
    for (std::size_t i = 0; i < delta.size(); ++i)
        delta[i] = std::min(std::max(delta[i], -epsilon), epsilon);
    return delta;
}

std::string AttackLog::to_json() const {
    json j;
    j["rounds"] = json::array();
    for (const auto& r : records)
        j["rounds"].push_back({{"round", r.round},
                               {"model_loss", r.model_loss},
                               {"mean_abs_delta", r.mean_abs_delta},
                               {"pgd_loss", r.pgd_loss}});
    j["supervised_draws"] = supervised_draws;
    j["contrastive_draws"] = contrastive_draws;
    j["wall_seconds"] = wall_seconds;
    return j.dump();
}

ModelFactory toy_model_factory(int image_size, int in_channels) {
    return [image_size, in_channels](int n_classes, std::uint64_t seed) {
        models::ConvNetConfig cfg;
        cfg.in_channels = in_channels;
        cfg.image_size = image_size;
        cfg.n_classes = n_classes;
        return std::make_unique<models::Classifier>(cfg, seed);
    };
}

namespace {

// sequential passes over a seed-shuffled permutation, reshuffled per pass
class BatchSampler {
public:
    BatchSampler(int n, RngStream rng) : perm_(n), rng_(rng) {
        std::iota(perm_.begin(), perm_.end(), 0);
        shuffle();
    }

    std::vector<int> next(int m) {
        if (cursor_ + m > static_cast<int>(perm_.size())) {
            shuffle();
            cursor_ = 0;
        }
        std::vector<int> out(perm_.begin() + cursor_, perm_.begin() + cursor_ + m);
        cursor_ += m;
        return out;
    }

private:
    void shuffle() {
        for (int i = static_cast<int>(perm_.size()) - 1; i > 0; --i)
            std::swap(perm_[i], perm_[rng_.uniform_int(i + 1)]);
    }

    std::vector<int> perm_;
    RngStream rng_;
    int cursor_ = 0;
};

TensorF gather_images(const datakit::LabeledDataset& ds, const std::vector<int>& idx) {
    const int c = ds.channels(), h = ds.height(), w = ds.width();
    const std::size_t stride = static_cast<std::size_t>(c) * h * w;
    TensorF out({static_cast<int>(idx.size()), c, h, w});
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(ds.images.data() + idx[i] * stride, ds.images.data() + (idx[i] + 1) * stride,
                  out.data() + i * stride);
    return out;
}

std::vector<int> gather_labels(const datakit::LabeledDataset& ds, const std::vector<int>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = ds.labels[idx[i]];
    return out;
}

void add_deltas(TensorF& batch, const TensorF& deltas, const std::vector<int>& idx) {
    const std::size_t stride = batch.size() / batch.dim(0);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const float* d = deltas.data() + idx[i] * stride;
        float* x = batch.data() + i * stride;
        for (std::size_t j = 0; j < stride; ++j) x[j] += d[j];
    }
}

std::vector<augment::TransformSample> draw_batch_transforms(const augment::AugmentationSpec& spec,
                                                            RngStream& rng, int m,
                                                            AttackLog* log) {
    std::vector<augment::TransformSample> ts;
    ts.reserve(m);
    for (int i = 0; i < m; ++i) ts.push_back(augment::sample_transform(spec, rng));
    if (log) {
        if (spec.mode == augment::Mode::supervised)
            log->supervised_draws += m;
        else
            log->contrastive_draws += m;
    }
    return ts;
}

double mean_abs(const TensorF& t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) acc += std::fabs(t[i]);
    return t.size() ? acc / static_cast<double>(t.size()) : 0.0;
}

void check_finite(double loss, const char* where) {
    if (!std::isfinite(loss))
        throw DivergenceError(std::string("non-finite loss during ") + where);
}

// one signed-gradient descent/ascent step on the batch deltas, then clip
void pgd_step(TensorF& deltas, const std::vector<int>& idx,
              const std::vector<std::uint8_t>& mask, const TensorF& gdelta, float alpha,
              float epsilon, bool ascend) {
    const std::size_t stride = gdelta.size() / gdelta.dim(0);
    const float step = ascend ? alpha : -alpha;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (!mask[idx[i]]) continue;
        float* d = deltas.data() + idx[i] * stride;
        const float* g = gdelta.data() + i * stride;
        for (std::size_t j = 0; j < stride; ++j) {
            const float s = g[j] > 0.0f ? 1.0f : (g[j] < 0.0f ? -1.0f : 0.0f);
            d[j] = std::min(std::max(d[j] + step * s, -epsilon), epsilon);
        }
    }
}

} // namespace

// ---------------------------------------------------------------------------
// AUE (error minimization)
// ---------------------------------------------------------------------------

datakit::PerturbationSet generate_aue(const datakit::LabeledDataset& dataset,
                                      const AUEConfig& cfg, const ModelFactory& factory,
                                      AttackLog* log) {
    dataset.validate();
    cfg.validate(dataset.size());
    const auto t0 = std::chrono::steady_clock::now();

    RngStream master(cfg.seed);
    RngStream rng_order_theta = master.split();
    RngStream rng_order_delta = master.split();
    RngStream rng_aug_theta = master.split();
    RngStream rng_aug_delta = master.split();
    const std::uint64_t model_seed = master.next_u64();

    datakit::PerturbationSet pset;
    pset.epsilon = static_cast<float>(cfg.epsilon);
    pset.deltas = TensorF(dataset.images.shape());
    pset.poison_mask = datakit::make_poison_mask(dataset.size(), cfg.poison_ratio, cfg.seed);

    auto model = factory(dataset.n_classes, model_seed);
    std::vector<TensorF*> params, grads;
    model->collect(params, grads);
    models::SgdConfig sgd;
    sgd.lr = static_cast<float>(cfg.alpha_theta);
    sgd.momentum = cfg.momentum;
    sgd.weight_decay = cfg.weight_decay;
    sgd.total_epochs = cfg.T;
    models::SgdOptimizer opt(params, grads, sgd);

    BatchSampler sampler_theta(dataset.size(), rng_order_theta);
    BatchSampler sampler_delta(dataset.size(), rng_order_delta);

    AttackLog local;
    AttackLog* lg = log ? log : &local;

    for (int t = 0; t < cfg.T; ++t) {
        RoundRecord rec;
        rec.round = t + 1;
        rec.mean_abs_delta = mean_abs(pset.deltas);

        // model update phase
        double theta_loss = 0.0;
        for (int it = 0; it < cfg.T_theta; ++it) {
            const auto idx = sampler_theta.next(cfg.batch);
            TensorF batch = gather_images(dataset, idx);
            add_deltas(batch, pset.deltas, idx);
            const auto labels = gather_labels(dataset, idx);
            const auto ts = draw_batch_transforms(cfg.spec, rng_aug_theta, cfg.batch, lg);
            const TensorF aug = augment::apply_batch(ts, batch);
            const TensorF logits = model->forward(aug, true);
            const auto loss = models::ce_loss(logits, labels);
            check_finite(loss.value, "AUE model update");
            theta_loss += loss.value;
            model->backward(models::ce_loss_backward(logits, labels));
            opt.step(t);
        }
        rec.model_loss = theta_loss / cfg.T_theta;

        // perturbation update phase
        double pgd_loss = 0.0;
        long pgd_terms = 0;
        for (int it = 0; it < cfg.T_delta; ++it) {
            const auto idx = sampler_delta.next(cfg.batch);
            const auto labels = gather_labels(dataset, idx);
            for (int tp = 0; tp < cfg.T_p; ++tp) {
                TensorF batch = gather_images(dataset, idx);
                add_deltas(batch, pset.deltas, idx);
                const auto ts = draw_batch_transforms(cfg.spec, rng_aug_delta, cfg.batch, lg);
                std::vector<augment::TransformTape<float>> tapes;
                const TensorF aug = augment::apply_batch_fwd(ts, batch, tapes);
                const TensorF logits = model->forward(aug, false);
                const auto loss = models::ce_loss(logits, labels);
                check_finite(loss.value, "AUE perturbation update");
                pgd_loss += loss.value;
                ++pgd_terms;
                const TensorF ginput = model->backward(models::ce_loss_backward(logits, labels));
                const TensorF gdelta = augment::apply_batch_vjp(ts, tapes, ginput);
                pgd_step(pset.deltas, idx, pset.poison_mask, gdelta,
                         static_cast<float>(cfg.alpha_delta), pset.epsilon, /*ascend=*/false);
            }
        }
        rec.pgd_loss = pgd_terms ? pgd_loss / pgd_terms : 0.0;
        lg->records.push_back(rec);
    }

    lg->wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    pset.validate();
    return pset;
}

// ---------------------------------------------------------------------------
// AAP (error maximization)
// ---------------------------------------------------------------------------

datakit::PerturbationSet generate_aap(const datakit::LabeledDataset& dataset,
                                      const AAPConfig& cfg, const ModelFactory& factory,
                                      AttackLog* log) {
    dataset.validate();
    cfg.validate(dataset.size(), dataset.n_classes);
    const auto t0 = std::chrono::steady_clock::now();

    RngStream master(cfg.seed);
    RngStream rng_order = master.split();
    RngStream rng_aug_theta = master.split();
    RngStream rng_aug_delta = master.split();
    const std::uint64_t model_seed = master.next_u64();

    datakit::PerturbationSet pset;
    pset.epsilon = static_cast<float>(cfg.epsilon);
    pset.deltas = TensorF(dataset.images.shape());
    pset.poison_mask = datakit::make_poison_mask(dataset.size(), cfg.poison_ratio, cfg.seed);

    auto model = factory(dataset.n_classes, model_seed);
    std::vector<TensorF*> params, grads;
    model->collect(params, grads);
    models::SgdConfig sgd;
    sgd.lr = static_cast<float>(cfg.alpha_theta);
    sgd.momentum = cfg.momentum;
    sgd.weight_decay = cfg.weight_decay;
    sgd.total_epochs = cfg.T;
    models::SgdOptimizer opt(params, grads, sgd);

    BatchSampler sampler(dataset.size(), rng_order);

    AttackLog local;
    AttackLog* lg = log ? log : &local;

    // phase 1: reference model on clean augmented data
    for (int t = 0; t < cfg.T; ++t) {
        RoundRecord rec;
        rec.round = t + 1;
        rec.mean_abs_delta = 0.0;
        double theta_loss = 0.0;
        for (int it = 0; it < cfg.T_theta; ++it) {
            const auto idx = sampler.next(cfg.batch);
            const TensorF batch = gather_images(dataset, idx);
            const auto labels = gather_labels(dataset, idx);
            const auto ts = draw_batch_transforms(cfg.spec, rng_aug_theta, cfg.batch, lg);
            const TensorF aug = augment::apply_batch(ts, batch);
            const TensorF logits = model->forward(aug, true);
            const auto loss = models::ce_loss(logits, labels);
            check_finite(loss.value, "AAP reference training");
            theta_loss += loss.value;
            model->backward(models::ce_loss_backward(logits, labels));
            opt.step(t);
        }
        rec.model_loss = theta_loss / cfg.T_theta;
        lg->records.push_back(rec);
    }

    // phase 2: per-sample PGD against the frozen model; samples are
    // independent (eval-mode normalization), so batching is pure vectorization
    if (cfg.record_sample_losses)
        lg->sample_losses.assign(dataset.size(), {});

    const int n = dataset.size();
    double final_pgd = 0.0;
    long final_terms = 0;
    for (int start = 0; start < n; start += cfg.batch) {
        const int m = std::min(cfg.batch, n - start);
        std::vector<int> idx(m);
        std::iota(idx.begin(), idx.end(), start);
        auto labels = gather_labels(dataset, idx);
        std::vector<int> pgd_labels = labels;
        if (cfg.targeted)
            for (auto& y : pgd_labels) y = shifted_label(y, cfg.label_shift, dataset.n_classes);

        for (int tp = 0; tp < cfg.T_p; ++tp) {
            TensorF batch = gather_images(dataset, idx);
            add_deltas(batch, pset.deltas, idx);
            const auto ts = draw_batch_transforms(cfg.spec, rng_aug_delta, m, lg);
            std::vector<augment::TransformTape<float>> tapes;
            const TensorF aug = augment::apply_batch_fwd(ts, batch, tapes);
            const TensorF logits = model->forward(aug, false);
            const auto loss = models::ce_loss(logits, pgd_labels);
            check_finite(loss.value, "AAP perturbation update");
            if (!cfg.targeted && loss.value > cfg.max_pgd_loss)
                throw DivergenceError("untargeted PGD loss exceeded cap");
            if (cfg.record_sample_losses)
                for (int i = 0; i < m; ++i)
                    lg->sample_losses[start + i].push_back(loss.per_sample[i]);
            const TensorF ginput = model->backward(models::ce_loss_backward(logits, pgd_labels));
            const TensorF gdelta = augment::apply_batch_vjp(ts, tapes, ginput);
            pgd_step(pset.deltas, idx, pset.poison_mask, gdelta,
                     static_cast<float>(cfg.alpha_delta), pset.epsilon,
                     /*ascend=*/!cfg.targeted);
            if (tp + 1 == cfg.T_p) {
                final_pgd += loss.value * m;
                final_terms += m;
            }
        }
        // final loss after the last step, for the trajectory log
        if (cfg.record_sample_losses && cfg.T_p > 0) {
            TensorF batch = gather_images(dataset, idx);
            add_deltas(batch, pset.deltas, idx);
            const auto ts = draw_batch_transforms(cfg.spec, rng_aug_delta, m, lg);
            const TensorF aug = augment::apply_batch(ts, batch);
            const TensorF logits = model->forward(aug, false);
            const auto loss = models::ce_loss(logits, pgd_labels);
            for (int i = 0; i < m; ++i)
                lg->sample_losses[start + i].push_back(loss.per_sample[i]);
        }
    }

    RoundRecord rec;
    rec.round = cfg.T + 1;
    rec.model_loss = lg->records.empty() ? 0.0 : lg->records.back().model_loss;
    rec.mean_abs_delta = mean_abs(pset.deltas);
    rec.pgd_loss = final_terms ? final_pgd / final_terms : 0.0;
    lg->records.push_back(rec);

    lg->wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    pset.validate();
    return pset;
}

} // namespace poisonforge::attacks
