#include "poisonforge/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "poisonforge/errors.hpp"
#include "poisonforge/kernels.hpp"

namespace poisonforge::eval {

void ProbeConfig::validate() const {
    if (epochs < 1) throw ConfigError("probe epochs must be >= 1");
    if (lr <= 0.0f || decay <= 0.0f) throw ConfigError("probe learning rates must be positive");
    if (batch < 1) throw ConfigError("probe batch must be >= 1");
}

void EvalConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch < 1) throw ConfigError("batch must be >= 1");
    if (lr <= 0.0f) throw ConfigError("learning rate must be positive");
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    aug.validate();
    probe.validate();
}

// ---------------------------------------------------------------------------
// shared helpers
// ---------------------------------------------------------------------------

namespace {

std::vector<int> shuffled_indices(int n, RngStream& rng) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
    return idx;
}

TensorF gather(const datakit::LabeledDataset& ds, const std::vector<int>& idx, int lo, int m) {
    const std::size_t stride =
        static_cast<std::size_t>(ds.channels()) * ds.height() * ds.width();
    TensorF out({m, ds.channels(), ds.height(), ds.width()});
    for (int i = 0; i < m; ++i)
        std::copy(ds.images.data() + idx[lo + i] * stride,
                  ds.images.data() + (idx[lo + i] + 1) * stride, out.data() + i * stride);
    return out;
}

std::vector<int> gather_labels(const datakit::LabeledDataset& ds, const std::vector<int>& idx,
                               int lo, int m) {
    std::vector<int> out(m);
    for (int i = 0; i < m; ++i) out[i] = ds.labels[idx[lo + i]];
    return out;
}

int argmax_row(const TensorF& logits, int row) {
    const int k = logits.dim(1);
    const float* p = logits.data() + static_cast<std::size_t>(row) * k;
    int best = 0;
    for (int j = 1; j < k; ++j)
        if (p[j] > p[best]) best = j;
    return best;
}

} // namespace

double classifier_accuracy(models::Classifier& model, const datakit::LabeledDataset& test_set,
                           int batch) {
    const int n = test_set.size();
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    int correct = 0;
    for (int lo = 0; lo < n; lo += batch) {
        const int m = std::min(batch, n - lo);
        const TensorF x = gather(test_set, idx, lo, m);
        const TensorF logits = model.forward(x, false);
        for (int i = 0; i < m; ++i)
            if (argmax_row(logits, i) == test_set.labels[idx[lo + i]]) ++correct;
    }
    return 100.0 * correct / std::max(1, n);
}

// ---------------------------------------------------------------------------
// supervised training
// ---------------------------------------------------------------------------

SupervisedResult train_supervised(const datakit::LabeledDataset& train_set,
                                  const datakit::LabeledDataset& test_set,
                                  const EvalConfig& cfg, const attacks::ModelFactory& factory) {
    cfg.validate();
    if (train_set.n_classes != test_set.n_classes)
        throw ConfigError("train/test label spaces differ");

    RngStream master(cfg.seed);
    RngStream rng_order = master.split();
    RngStream rng_aug = master.split();
    const std::uint64_t model_seed = master.next_u64();

    SupervisedResult res;
    res.model = factory(train_set.n_classes, model_seed);
    std::vector<TensorF*> params, grads;
    res.model->collect(params, grads);
    models::SgdConfig sgd{cfg.lr, cfg.momentum, cfg.weight_decay, cfg.warmup_epochs, cfg.epochs};
    models::SgdOptimizer opt(params, grads, sgd);

    const int n = train_set.size();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto idx = shuffled_indices(n, rng_order);
        double loss_sum = 0.0;
        int batches = 0, correct = 0, seen = 0;
        for (int lo = 0; lo + cfg.batch <= n; lo += cfg.batch) {
            const int m = cfg.batch;
            TensorF x = gather(train_set, idx, lo, m);
            const auto labels = gather_labels(train_set, idx, lo, m);
            std::vector<augment::TransformSample> ts;
            ts.reserve(m);
            for (int i = 0; i < m; ++i) ts.push_back(augment::sample_transform(cfg.aug, rng_aug));
            const TensorF aug = augment::apply_batch(ts, x);
            const TensorF logits = res.model->forward(aug, true);
            const auto loss = models::ce_loss(logits, labels);
            if (!std::isfinite(loss.value)) throw DivergenceError("supervised training diverged");
            loss_sum += loss.value;
            ++batches;
            for (int i = 0; i < m; ++i)
                if (argmax_row(logits, i) == labels[i]) ++correct;
            seen += m;
            res.model->backward(models::ce_loss_backward(logits, labels));
            opt.step(epoch);
        }
        res.history.train_loss.push_back(loss_sum / std::max(1, batches));
        res.history.train_acc.push_back(100.0 * correct / std::max(1, seen));
        res.history.test_acc.push_back(classifier_accuracy(*res.model, test_set));
    }
    res.test_accuracy = res.history.test_acc.back();
    return res;
}

// ---------------------------------------------------------------------------
// contrastive training (SimCLR-style)
// ---------------------------------------------------------------------------

ContrastiveResult train_contrastive(const datakit::LabeledDataset& train_set,
                                    const EvalConfig& cfg) {
    cfg.validate();
    if (train_set.size() == 0) throw ConfigError("empty training set");
    if (cfg.aug.mode != augment::Mode::contrastive)
        throw ConfigError("contrastive training requires a contrastive augmentation spec");

    RngStream master(cfg.seed);
    RngStream rng_order = master.split();
    RngStream rng_aug = master.split();
    const std::uint64_t model_seed = master.next_u64();

    models::ConvNetConfig net;
    net.in_channels = train_set.channels();
    net.image_size = train_set.height();
    net.n_classes = train_set.n_classes;
    ContrastiveResult res;
    res.encoder = std::make_unique<models::Encoder>(net, model_seed);
    std::vector<TensorF*> params, grads;
    res.encoder->collect(params, grads);
    models::SgdConfig sgd{cfg.lr, cfg.momentum, cfg.weight_decay, cfg.warmup_epochs, cfg.epochs};
    models::SgdOptimizer opt(params, grads, sgd);

    const int n = train_set.size();
    const int c = train_set.channels(), h = train_set.height(), w = train_set.width();

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto idx = shuffled_indices(n, rng_order);
        double loss_sum = 0.0;
        int batches = 0;
        for (int lo = 0; lo + cfg.batch <= n; lo += cfg.batch) {
            const int m = cfg.batch;
            const TensorF x = gather(train_set, idx, lo, m);
            std::vector<augment::TransformSample> ts1, ts2;
            for (int i = 0; i < m; ++i) ts1.push_back(augment::sample_transform(cfg.aug, rng_aug));
            for (int i = 0; i < m; ++i) ts2.push_back(augment::sample_transform(cfg.aug, rng_aug));
            const TensorF v1 = augment::apply_batch(ts1, x);
            const TensorF v2 = augment::apply_batch(ts2, x);

            TensorF both({2 * m, c, h, w});
            std::copy(v1.data(), v1.data() + v1.size(), both.data());
            std::copy(v2.data(), v2.data() + v2.size(), both.data() + v1.size());

            const TensorF z = res.encoder->project(both, true);
            const int d = z.dim(1);
            TensorF z1({m, d}), z2({m, d});
            std::copy(z.data(), z.data() + z1.size(), z1.data());
            std::copy(z.data() + z1.size(), z.data() + 2 * z1.size(), z2.data());

            const auto loss = models::infonce_loss(z1, z2, cfg.temperature);
            if (!std::isfinite(loss.value)) throw DivergenceError("contrastive training diverged");
            loss_sum += loss.value;
            ++batches;

            auto [g1, g2] = models::infonce_backward(z1, z2, cfg.temperature);
            TensorF gz({2 * m, d});
            std::copy(g1.data(), g1.data() + g1.size(), gz.data());
            std::copy(g2.data(), g2.data() + g2.size(), gz.data() + g1.size());
            res.encoder->backward(gz);
            opt.step(epoch);
        }
        res.infonce.push_back(loss_sum / std::max(1, batches));
    }
    return res;
}

// ---------------------------------------------------------------------------
// linear probing
// ---------------------------------------------------------------------------

namespace {

TensorF encoder_features_all(models::Encoder& encoder, const datakit::LabeledDataset& ds,
                             int batch = 256) {
    const int n = ds.size();
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    TensorF out;
    for (int lo = 0; lo < n; lo += batch) {
        const int m = std::min(batch, n - lo);
        const TensorF x = gather(ds, idx, lo, m);
        const TensorF f = encoder.features(x, false);
        if (out.empty()) out = TensorF({n, f.dim(1)});
        std::copy(f.data(), f.data() + f.size(),
                  out.data() + static_cast<std::size_t>(lo) * f.dim(1));
    }
    return out;
}

} // namespace

ProbeResult linear_probe(const TensorF& train_features, const std::vector<int>& train_labels,
                         const TensorF& test_features, const std::vector<int>& test_labels,
                         int n_classes, const ProbeConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    if (train_features.dim(1) != test_features.dim(1))
        throw ConfigError("probe feature dimensions differ");
    const int dim = train_features.dim(1);
    const int k = n_classes;

    RngStream rng(seed);
    models::Linear head(dim, k, rng);
    std::vector<TensorF*> params, grads;
    head.collect(params, grads);
    std::vector<TensorF> velocity;
    for (TensorF* p : params) velocity.emplace_back(p->shape());

    float lr = cfg.lr;
    const int n = train_features.dim(0);
    const int batch = std::min(cfg.batch, n);
    RngStream rng_order = rng.split();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (std::find(cfg.milestones.begin(), cfg.milestones.end(), epoch) !=
            cfg.milestones.end())
            lr *= cfg.decay;
        const auto idx = shuffled_indices(n, rng_order);
        for (int lo = 0; lo + batch <= n; lo += batch) {
            const int m = batch;
            TensorF x({m, dim});
            std::vector<int> labels(m);
            for (int i = 0; i < m; ++i) {
                std::copy(train_features.data() + static_cast<std::size_t>(idx[lo + i]) * dim,
                          train_features.data() + static_cast<std::size_t>(idx[lo + i] + 1) * dim,
                          x.data() + static_cast<std::size_t>(i) * dim);
                labels[i] = train_labels[idx[lo + i]];
            }
            const TensorF logits = head.forward(x, true);
            const auto loss = models::ce_loss(logits, labels);
            if (!std::isfinite(loss.value)) throw DivergenceError("linear probe diverged");
            head.backward(models::ce_loss_backward(logits, labels));
            for (std::size_t pi = 0; pi < params.size(); ++pi)
                for (std::size_t j = 0; j < params[pi]->size(); ++j) {
                    velocity[pi][j] = cfg.momentum * velocity[pi][j] + (*grads[pi])[j];
                    (*params[pi])[j] -= lr * velocity[pi][j];
                }
        }
    }

    const TensorF logits = head.forward(test_features, false);
    int correct = 0;
    const int tn = test_features.dim(0);
    for (int i = 0; i < tn; ++i)
        if (argmax_row(logits, i) == test_labels[i]) ++correct;
    ProbeResult res;
    res.test_accuracy = 100.0 * correct / std::max(1, tn);
    return res;
}

ProbeResult linear_probe(models::Encoder& encoder, const datakit::LabeledDataset& train_set,
                         const datakit::LabeledDataset& test_set, const ProbeConfig& cfg,
                         std::uint64_t seed) {
    const TensorF train_feats = encoder_features_all(encoder, train_set);
    const TensorF test_feats = encoder_features_all(encoder, test_set);
    return linear_probe(train_feats, train_set.labels, test_feats, test_set.labels,
                        train_set.n_classes, cfg, seed);
}

// ---------------------------------------------------------------------------
// mimicry (CE vs InfoNCE during supervised training)
// ---------------------------------------------------------------------------

namespace {

TensorF normalized_features(models::Classifier& model, const TensorF& x) {
    const TensorF f = model.features(x, false);
    TensorF out(f.shape());
    TensorF inv({f.dim(0)});
    kernels::l2norm_fwd(f.data(), out.data(), inv.data(), f.dim(0), f.dim(1));
    return out;
}

} // namespace

MimicrySeries mimicry_run(const datakit::LabeledDataset& train_set, const EvalConfig& cfg,
                          const attacks::ModelFactory& factory) {
    cfg.validate();
    if (cfg.aug.mode != augment::Mode::contrastive)
        throw ConfigError("the mimicry check trains under contrastive augmentations");

    RngStream master(cfg.seed);
    RngStream rng_order = master.split();
    RngStream rng_aug = master.split();
    RngStream rng_eval = master.split();
    const std::uint64_t model_seed = master.next_u64();

    auto model = factory(train_set.n_classes, model_seed);
    std::vector<TensorF*> params, grads;
    model->collect(params, grads);
    models::SgdConfig sgd{cfg.lr, cfg.momentum, cfg.weight_decay, cfg.warmup_epochs, cfg.epochs};
    models::SgdOptimizer opt(params, grads, sgd);

    const int n = train_set.size();
    MimicrySeries series;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto idx = shuffled_indices(n, rng_order);
        for (int lo = 0; lo + cfg.batch <= n; lo += cfg.batch) {
            const int m = cfg.batch;
            TensorF x = gather(train_set, idx, lo, m);
            const auto labels = gather_labels(train_set, idx, lo, m);
            std::vector<augment::TransformSample> ts;
            for (int i = 0; i < m; ++i) ts.push_back(augment::sample_transform(cfg.aug, rng_aug));
            const TensorF aug = augment::apply_batch(ts, x);
            const TensorF logits = model->forward(aug, true);
            const auto loss = models::ce_loss(logits, labels);
            if (!std::isfinite(loss.value)) throw DivergenceError("mimicry training diverged");
            model->backward(models::ce_loss_backward(logits, labels));
            opt.step(epoch);
        }

        // checkpoint metrics on the training set
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        double ce_sum = 0.0, nce_sum = 0.0;
        int chunks = 0;
        for (int lo = 0; lo + cfg.batch <= n; lo += cfg.batch) {
            const int m = cfg.batch;
            const TensorF x = gather(train_set, order, lo, m);
            const auto labels = gather_labels(train_set, order, lo, m);
            std::vector<augment::TransformSample> ts1, ts2;
            for (int i = 0; i < m; ++i)
                ts1.push_back(augment::sample_transform(cfg.aug, rng_eval));
            for (int i = 0; i < m; ++i)
                ts2.push_back(augment::sample_transform(cfg.aug, rng_eval));
            const TensorF v1 = augment::apply_batch(ts1, x);
            const TensorF v2 = augment::apply_batch(ts2, x);

            const TensorF logits = model->forward(v1, false);
            ce_sum += models::ce_loss(logits, labels).value;

            const TensorF f1 = normalized_features(*model, v1);
            const TensorF f2 = normalized_features(*model, v2);
            nce_sum += models::infonce_loss(f1, f2, cfg.temperature).value;
            ++chunks;
        }
        series.ce.push_back(ce_sum / std::max(1, chunks));
        series.infonce.push_back(nce_sum / std::max(1, chunks));
    }
    series.pearson_r = pearson(series.ce, series.infonce);
    return series;
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

double worst_case(const std::vector<std::pair<std::string, double>>& entries) {
    if (entries.empty()) throw ConfigError("worst_case needs at least one entry");
    double best = entries.front().second;
    for (const auto& [name, acc] : entries) best = std::max(best, acc);
    return best;
}

GapReport gap_report(const datakit::LabeledDataset& clean_set,
                     const datakit::LabeledDataset& poisoned_set, const models::FeatureFn& g,
                     const augment::AugmentationSpec& spec, RngStream& rng, int repeats,
                     int n_pairs) {
    if (clean_set.size() != poisoned_set.size())
        throw ConfigError("clean/poisoned sets must align");
    GapReport rep;
    rep.a_clean = models::alignment_loss(clean_set, g, spec, rng, repeats).value;
    rep.a_poisoned = models::alignment_loss(poisoned_set, g, spec, rng, repeats).value;
    rep.u_clean = models::uniformity_loss(clean_set, g, spec, rng, n_pairs).value;
    rep.u_poisoned = models::uniformity_loss(poisoned_set, g, spec, rng, n_pairs).value;
    rep.ag = rep.a_clean - rep.a_poisoned;
    rep.ug = rep.u_clean - rep.u_poisoned;
    return rep;
}

GapReport gap_report_exact(const datakit::LabeledDataset& clean_set,
                           const datakit::LabeledDataset& poisoned_set,
                           const models::FeatureFn& g, const augment::TransformSample& pi,
                           const augment::TransformSample& tau) {
    if (clean_set.size() != poisoned_set.size())
        throw ConfigError("clean/poisoned sets must align");
    auto feats = [&](const datakit::LabeledDataset& ds, const augment::TransformSample& t) {
        std::vector<augment::TransformSample> ts(ds.size(), t);
        return g(augment::apply_batch(ts, ds.images));
    };
    const TensorF cp = feats(clean_set, pi), ct = feats(clean_set, tau);
    const TensorF pp = feats(poisoned_set, pi), pt = feats(poisoned_set, tau);
    GapReport rep;
    rep.a_clean = models::alignment_exact(cp, ct);
    rep.a_poisoned = models::alignment_exact(pp, pt);
    rep.u_clean = models::uniformity_exact(cp, ct);
    rep.u_poisoned = models::uniformity_exact(pp, pt);
    rep.ag = rep.a_clean - rep.a_poisoned;
    rep.ug = rep.u_clean - rep.u_poisoned;
    return rep;
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ConfigError("pearson inputs must align");
    const std::size_t n = xs.size();
    if (n < 2) throw ConfigError("pearson needs at least 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw ConfigError("pearson is undefined at zero variance");
    return sxy / std::sqrt(sxx * syy);
}

// ---------------------------------------------------------------------------
// registry
// ---------------------------------------------------------------------------

namespace {

double run_sl(const datakit::LabeledDataset& train, const datakit::LabeledDataset& test,
              const EvalConfig& cfg) {
    EvalConfig c = cfg;
    c.aug = augment::AugmentationSpec::supervised(train.height());
    const auto factory = attacks::toy_model_factory(train.height(), train.channels());
    return train_supervised(train, test, c, factory).test_accuracy;
}

double run_simclr(const datakit::LabeledDataset& train, const datakit::LabeledDataset& test,
                  const EvalConfig& cfg) {
    EvalConfig c = cfg;
    c.aug = augment::AugmentationSpec::contrastive(1.0, train.height());
    auto result = train_contrastive(train, c);
    return linear_probe(*result.encoder, train, test, c.probe, c.seed).test_accuracy;
}

} // namespace

std::map<std::string, EvalAlgorithm>& algorithm_registry() {
    static std::map<std::string, EvalAlgorithm> registry = {
        {"sl", run_sl},
        {"simclr", run_simclr},
    };
    return registry;
}

void register_algorithm(const std::string& name, EvalAlgorithm fn) {
    algorithm_registry()[name] = std::move(fn);
}

} // namespace poisonforge::eval
