#include "poisonforge/losses.hpp"

#include <cmath>

#include "poisonforge/errors.hpp"

namespace poisonforge::models {

// ---------------------------------------------------------------------------
// cross entropy
// ---------------------------------------------------------------------------

template <typename T>
LossValue ce_loss(const Tensor<T>& logits, const std::vector<int>& labels) {
    const int n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int>(labels.size()) != n) throw ConfigError("label count mismatch");
    LossValue out;
    out.per_sample.resize(n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        if (labels[i] < 0 || labels[i] >= k) throw ConfigError("label out of range");
        const T* row = logits.data() + static_cast<std::size_t>(i) * k;
        double m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
        double se = 0.0;
        for (int j = 0; j < k; ++j) se += std::exp(static_cast<double>(row[j]) - m);
        const double loss = m + std::log(se) - static_cast<double>(row[labels[i]]);
        out.per_sample[i] = loss;
        acc += loss;
    }
    out.value = acc / n;
    return out;
}

TensorF ce_loss_backward(const TensorF& logits, const std::vector<int>& labels) {
    const int n = logits.dim(0), k = logits.dim(1);
    TensorF g(logits.shape());
    const float inv_n = 1.0f / static_cast<float>(n);
    for (int i = 0; i < n; ++i) {
        const float* row = logits.data() + static_cast<std::size_t>(i) * k;
        float* gr = g.data() + static_cast<std::size_t>(i) * k;
        double m = row[0];
        for (int j = 1; j < k; ++j) m = std::max(m, static_cast<double>(row[j]));
        double se = 0.0;
        for (int j = 0; j < k; ++j) se += std::exp(row[j] - m);
        for (int j = 0; j < k; ++j) {
            const double p = std::exp(row[j] - m) / se;
            gr[j] = static_cast<float>((p - (j == labels[i] ? 1.0 : 0.0)) * inv_n);
        }
    }
    return g;
}

// ---------------------------------------------------------------------------
// MSE to one-hot
// ---------------------------------------------------------------------------

template <typename T>
LossValue mse_onehot_loss(const Tensor<T>& outputs, const std::vector<int>& labels, int n) {
    const int batch = outputs.dim(0), k = outputs.dim(1);
    if (k != n) throw ConfigError("output dimension mismatch");
    if (static_cast<int>(labels.size()) != batch) throw ConfigError("label count mismatch");
    LossValue out;
    out.per_sample.resize(batch);
    double acc = 0.0;
    for (int i = 0; i < batch; ++i) {
        if (labels[i] < 0 || labels[i] >= k) throw ConfigError("label out of range");
        const T* row = outputs.data() + static_cast<std::size_t>(i) * k;
        double sq = 0.0;
        for (int j = 0; j < k; ++j) {
            const double d = static_cast<double>(row[j]) - (j == labels[i] ? 1.0 : 0.0);
            sq += d * d;
        }
        out.per_sample[i] = sq / n;
        acc += out.per_sample[i];
    }
    out.value = acc / batch;
    return out;
}

TensorF mse_onehot_backward(const TensorF& outputs, const std::vector<int>& labels) {
    const int batch = outputs.dim(0), k = outputs.dim(1);
    TensorF g(outputs.shape());
    const float scale = 2.0f / (static_cast<float>(k) * batch);
    for (int i = 0; i < batch; ++i) {
        const float* row = outputs.data() + static_cast<std::size_t>(i) * k;
        float* gr = g.data() + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < k; ++j)
            gr[j] = scale * (row[j] - (j == labels[i] ? 1.0f : 0.0f));
    }
    return g;
}

// ---------------------------------------------------------------------------
// InfoNCE (NT-Xent)
// ---------------------------------------------------------------------------

namespace {

template <typename T>
void check_normalized(const Tensor<T>& z) {
    const int n = z.dim(0), d = z.dim(1);
    for (int i = 0; i < n; ++i) {
        double sq = 0.0;
        for (int j = 0; j < d; ++j) {
            const double v = z.data()[static_cast<std::size_t>(i) * d + j];
            sq += v * v;
        }
        if (std::abs(std::sqrt(sq) - 1.0) > 1e-3)
            throw ConfigError("InfoNCE features are not L2-normalized");
    }
}

} // namespace

template <typename T>
LossValue infonce_loss(const Tensor<T>& z1, const Tensor<T>& z2, double temperature) {
    const int n = z1.dim(0), d = z1.dim(1);
    if (n < 2) throw ConfigError("InfoNCE needs a batch of at least 2");
    if (!z1.same_shape(z2)) throw ConfigError("view batches must align");
    if (temperature <= 0.0) throw ConfigError("temperature must be positive");
    check_normalized(z1);
    check_normalized(z2);

    const int m = 2 * n;
    auto zat = [&](int i, int j) -> double {
        const T* row = (i < n ? z1.data() + static_cast<std::size_t>(i) * d
                              : z2.data() + static_cast<std::size_t>(i - n) * d);
        return static_cast<double>(row[j]);
    };

    LossValue out;
    out.per_sample.resize(m);
    double acc = 0.0;
    std::vector<double> sims(m);
    for (int i = 0; i < m; ++i) {
        double mx = -1e300;
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            double s = 0.0;
            for (int a = 0; a < d; ++a) s += zat(i, a) * zat(j, a);
            sims[j] = s / temperature;
            mx = std::max(mx, sims[j]);
        }
        double se = 0.0;
        for (int j = 0; j < m; ++j)
            if (j != i) se += std::exp(sims[j] - mx);
        const int pos = i < n ? i + n : i - n;
        const double loss = mx + std::log(se) - sims[pos];
        out.per_sample[i] = loss;
        acc += loss;
    }
    out.value = acc / m;
    return out;
}

std::pair<TensorF, TensorF> infonce_backward(const TensorF& z1, const TensorF& z2,
                                             double temperature) {
    const int n = z1.dim(0), d = z1.dim(1);
    const int m = 2 * n;
    auto row_ptr = [&](int i) -> const float* {
        return i < n ? z1.data() + static_cast<std::size_t>(i) * d
                     : z2.data() + static_cast<std::size_t>(i - n) * d;
    };

    // dL/dS[i][j] for the mean loss; S[i][j] = z_i . z_j / temperature
    std::vector<double> gs(static_cast<std::size_t>(m) * m, 0.0);
    std::vector<double> sims(m);
    for (int i = 0; i < m; ++i) {
        double mx = -1e300;
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            const float* a = row_ptr(i);
            const float* b = row_ptr(j);
            double s = 0.0;
            for (int k = 0; k < d; ++k) s += static_cast<double>(a[k]) * b[k];
            sims[j] = s / temperature;
            mx = std::max(mx, sims[j]);
        }
        double se = 0.0;
        for (int j = 0; j < m; ++j)
            if (j != i) se += std::exp(sims[j] - mx);
        const int pos = i < n ? i + n : i - n;
        for (int j = 0; j < m; ++j) {
            if (j == i) continue;
            const double q = std::exp(sims[j] - mx) / se;
            gs[static_cast<std::size_t>(i) * m + j] =
                (q - (j == pos ? 1.0 : 0.0)) / static_cast<double>(m);
        }
    }

    TensorF g1({n, d}), g2({n, d});
    auto grad_ptr = [&](int i) -> float* {
        return i < n ? g1.data() + static_cast<std::size_t>(i) * d
                     : g2.data() + static_cast<std::size_t>(i - n) * d;
    };
    for (int k = 0; k < m; ++k) {
        float* gk = grad_ptr(k);
        for (int j = 0; j < m; ++j) {
            const double w = gs[static_cast<std::size_t>(k) * m + j] +
                             gs[static_cast<std::size_t>(j) * m + k];
            if (w == 0.0) continue;
            const float* zj = row_ptr(j);
            const float scale = static_cast<float>(w / temperature);
            for (int a = 0; a < d; ++a) gk[a] += scale * zj[a];
        }
    }
    return {std::move(g1), std::move(g2)};
}

// ---------------------------------------------------------------------------
// alignment / uniformity
// ---------------------------------------------------------------------------

FeatureFn feature_fn(Encoder& encoder) {
    return [&encoder](const TensorF& batch) { return encoder.features(batch, true); };
}

namespace {

TensorF encode_under_draws(const datakit::LabeledDataset& ds, const FeatureFn& g,
                           const augment::AugmentationSpec& spec, RngStream& rng) {
    std::vector<augment::TransformSample> ts;
    ts.reserve(ds.size());
    for (int i = 0; i < ds.size(); ++i) ts.push_back(augment::sample_transform(spec, rng));
    return g(augment::apply_batch(ts, ds.images));
}

double sq_dist(const TensorF& a, int i, const TensorF& b, int j) {
    const int d = a.dim(1);
    const float* pa = a.data() + static_cast<std::size_t>(i) * d;
    const float* pb = b.data() + static_cast<std::size_t>(j) * d;
    double acc = 0.0;
    for (int k = 0; k < d; ++k) {
        const double diff = static_cast<double>(pa[k]) - pb[k];
        acc += diff * diff;
    }
    return acc;
}

} // namespace

LossValue alignment_loss(const datakit::LabeledDataset& ds, const FeatureFn& g,
                         const augment::AugmentationSpec& spec, RngStream& rng, int repeats) {
    if (repeats < 1) throw ConfigError("alignment estimator needs repeats >= 1");
    const int n = ds.size();
    LossValue out;
    out.per_sample.assign(n, 0.0);
    for (int r = 0; r < repeats; ++r) {
        const TensorF fp = encode_under_draws(ds, g, spec, rng);
        const TensorF ft = encode_under_draws(ds, g, spec, rng);
        for (int i = 0; i < n; ++i) out.per_sample[i] += sq_dist(fp, i, ft, i);
    }
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        out.per_sample[i] /= repeats;
        acc += out.per_sample[i];
    }
    out.value = acc / n;
    return out;
}

LossValue uniformity_loss(const datakit::LabeledDataset& ds, const FeatureFn& g,
                          const augment::AugmentationSpec& spec, RngStream& rng, int n_pairs) {
    if (n_pairs < 1) throw ConfigError("uniformity estimator needs n_pairs >= 1");
    const int n = ds.size();
    double acc = 0.0;
    int done = 0;
    while (done < n_pairs) {
        // fresh transform draws per block keeps pair samples nearly independent
        const TensorF fp = encode_under_draws(ds, g, spec, rng);
        const TensorF ft = encode_under_draws(ds, g, spec, rng);
        const int block = std::min(n_pairs - done, std::max(n, 64));
        for (int k = 0; k < block; ++k) {
            const int i = rng.uniform_int(n);
            const int j = rng.uniform_int(n);
            acc += std::exp(-2.0 * sq_dist(fp, i, ft, j));
        }
        done += block;
    }
    LossValue out;
    out.value = std::log(acc / n_pairs);
    return out;
}

double alignment_exact(const TensorF& feats_pi, const TensorF& feats_tau) {
    const int n = feats_pi.dim(0);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += sq_dist(feats_pi, i, feats_tau, i);
    return acc / n;
}

double uniformity_exact(const TensorF& feats_pi, const TensorF& feats_tau) {
    const int n = feats_pi.dim(0);
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) acc += std::exp(-2.0 * sq_dist(feats_pi, i, feats_tau, j));
    return std::log(acc / (static_cast<double>(n) * n));
}

// explicit instantiations
template LossValue ce_loss<float>(const Tensor<float>&, const std::vector<int>&);
template LossValue ce_loss<double>(const Tensor<double>&, const std::vector<int>&);
template LossValue mse_onehot_loss<float>(const Tensor<float>&, const std::vector<int>&, int);
template LossValue mse_onehot_loss<double>(const Tensor<double>&, const std::vector<int>&, int);
template LossValue infonce_loss<float>(const Tensor<float>&, const Tensor<float>&, double);
template LossValue infonce_loss<double>(const Tensor<double>&, const Tensor<double>&, double);

} // namespace poisonforge::models
