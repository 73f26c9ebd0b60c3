#include <doctest.h>

#include <cmath>

#include "poisonforge/losses.hpp"

using namespace poisonforge;
using namespace poisonforge::models;

TEST_CASE("cross entropy closed forms") {
    // uniform logits over 10 classes
    TensorD uniform({1, 10});
    uniform.fill(0.37);
    CHECK(ce_loss(uniform, {4}).value == doctest::Approx(std::log(10.0)).epsilon(1e-12));

    // logits (1, 0), label 1
    TensorD two({1, 2});
    two[0] = 1.0;
    two[1] = 0.0;
    CHECK(ce_loss(two, {1}).value == doctest::Approx(std::log(1.0 + std::exp(1.0))).epsilon(1e-12));

    // dominant true logit drives the loss toward zero
    TensorD dom({1, 3});
    dom[0] = 40.0;
    CHECK(ce_loss(dom, {0}).value < 1e-15);

    CHECK_THROWS(ce_loss(two, {5}));
}

TEST_CASE("mse-to-one-hot closed forms") {
    TensorD exact({1, 4});
    exact[2] = 1.0;
    CHECK(mse_onehot_loss(exact, {2}, 4).value == doctest::Approx(0.0));

    TensorD zeros({1, 4});
    CHECK(mse_onehot_loss(zeros, {1}, 4).value == doctest::Approx(0.25).epsilon(1e-12));

    TensorD half({1, 2});
    half[0] = 0.5;
    half[1] = 0.5;
    CHECK(mse_onehot_loss(half, {0}, 2).value == doctest::Approx(0.25).epsilon(1e-12));

    CHECK_THROWS(mse_onehot_loss(half, {0}, 3));
}

TEST_CASE("loss gradients match finite differences (float64 oracle)") {
    RngStream rng(3);
    const int n = 5, k = 4;
    TensorD logits({n, k});
    for (std::size_t i = 0; i < logits.size(); ++i) logits[i] = rng.uniform(-2.0, 2.0);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = rng.uniform_int(k);

    const TensorF logits_f = logits.cast<float>();
    const TensorF gce = ce_loss_backward(logits_f, labels);
    const TensorF gmse = mse_onehot_backward(logits_f, labels);

    const double step = 1e-6;
    for (std::size_t j = 0; j < logits.size(); ++j) {
        TensorD probe = logits;
        probe[j] += step;
        const double up_ce = ce_loss(probe, labels).value;
        const double up_mse = mse_onehot_loss(probe, labels, k).value;
        probe[j] -= 2 * step;
        const double dn_ce = ce_loss(probe, labels).value;
        const double dn_mse = mse_onehot_loss(probe, labels, k).value;
        const double fd_ce = (up_ce - dn_ce) / (2 * step);
        const double fd_mse = (up_mse - dn_mse) / (2 * step);
        CHECK(std::abs(gce[j] - fd_ce) / std::max(1e-3, std::abs(fd_ce)) < 1e-4);
        CHECK(std::abs(gmse[j] - fd_mse) / std::max(1e-3, std::abs(fd_mse)) < 1e-4);
    }
}

namespace {

TensorD rows(std::vector<std::vector<double>> data) {
    TensorD out({static_cast<int>(data.size()), static_cast<int>(data[0].size())});
    for (std::size_t i = 0; i < data.size(); ++i)
        for (std::size_t j = 0; j < data[i].size(); ++j)
            out[i * data[0].size() + j] = data[i][j];
    return out;
}

} // namespace

TEST_CASE("infonce closed forms") {
    // all four views identical: uniform over 1 positive + 2 negatives
    const auto z_same = rows({{1, 0, 0}, {1, 0, 0}});
    CHECK(infonce_loss(z_same, z_same, 0.5).value ==
          doctest::Approx(std::log(3.0)).epsilon(1e-12));

    // positives at similarity 1, negatives orthogonal, tau = 0.5
    const auto z1 = rows({{1, 0, 0, 0}, {0, 1, 0, 0}});
    const auto z2 = rows({{1, 0, 0, 0}, {0, 1, 0, 0}});
    const double expected = std::log(std::exp(2.0) + 2.0) - 2.0;
    CHECK(infonce_loss(z1, z2, 0.5).value == doctest::Approx(expected).epsilon(1e-12));

    CHECK_THROWS(infonce_loss(rows({{1.0, 0.0}}), rows({{1.0, 0.0}}), 0.5)); // N < 2
    CHECK_THROWS(infonce_loss(rows({{2, 0}, {0, 2}}), rows({{2, 0}, {0, 2}}), 0.5));
}

TEST_CASE("infonce is invariant under joint batch permutation") {
    const auto z1 = rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
    const auto z2 = rows({{0.6, 0.8, 0}, {0, 0.6, 0.8}, {0.8, 0, 0.6}});
    const auto p1 = rows({{0, 0, 1}, {1, 0, 0}, {0, 1, 0}});
    const auto p2 = rows({{0.8, 0, 0.6}, {0.6, 0.8, 0}, {0, 0.6, 0.8}});
    CHECK(infonce_loss(z1, z2, 0.5).value ==
          doctest::Approx(infonce_loss(p1, p2, 0.5).value).epsilon(1e-12));
}

TEST_CASE("infonce strictly decreases as a positive similarity rises, all else fixed") {
    // b1 moves in a direction orthogonal to every other feature, so only the
    // positive similarity of pair 0 changes
    auto batch = [](double theta) {
        const double c = std::cos(theta), s = std::sin(theta);
        const auto z1 = rows({{1, 0, 0, 0}, {0, 1, 0, 0}});
        const auto z2 = rows({{c, 0, 0, s}, {0, 0, 1, 0}});
        return infonce_loss(z1, z2, 0.5).value;
    };
    double prev = batch(1.2);
    for (double theta : {0.9, 0.6, 0.3, 0.05}) {
        const double cur = batch(theta);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("infonce backward matches finite differences") {
    RngStream rng(17);
    const int n = 3, d = 4;
    TensorD a({n, d}), b({n, d});
    for (int i = 0; i < n; ++i) {
        double na = 0, nb = 0;
        for (int j = 0; j < d; ++j) {
            a[i * d + j] = rng.uniform(-1, 1);
            b[i * d + j] = rng.uniform(-1, 1);
            na += a[i * d + j] * a[i * d + j];
            nb += b[i * d + j] * b[i * d + j];
        }
        for (int j = 0; j < d; ++j) {
            a[i * d + j] /= std::sqrt(na);
            b[i * d + j] /= std::sqrt(nb);
        }
    }
    const TensorF af = a.cast<float>(), bf = b.cast<float>();
    const auto [ga, gb] = infonce_backward(af, bf, 0.5);

    // directional FD along random unit perturbations of the raw features;
    // the analytic gradient lives on the normalized manifold, so we compare
    // the full Jacobian action entrywise instead
    const double step = 1e-6;
    for (std::size_t j = 0; j < a.size(); ++j) {
        TensorD pa = a;
        pa[j] += step;
        const double up = infonce_loss(pa, b, 0.5).value;
        pa[j] -= 2 * step;
        const double dn = infonce_loss(pa, b, 0.5).value;
        const double fd = (up - dn) / (2 * step);
        CHECK(std::abs(ga[j] - fd) < 1e-4);
    }
}

// ---------------------------------------------------------------------------
// alignment / uniformity
// ---------------------------------------------------------------------------

TEST_CASE("alignment and uniformity exact modes match hand evaluation") {
    // two features at 90 degrees per sample
    TensorF fp({2, 2}), ft({2, 2});
    fp.at(0, 0) = 1.0f;
    ft.at(0, 1) = 1.0f;
    fp.at(1, 1) = 1.0f;
    ft.at(1, 0) = -1.0f;
    CHECK(alignment_exact(fp, ft) == doctest::Approx(2.0).epsilon(1e-12));

    // antipodal pair, identity transforms: log((2 + 2 e^-8) / 4)
    TensorF u({2, 3}), v({2, 3});
    u.at(0, 0) = 1.0f;
    u.at(1, 0) = -1.0f;
    v = u;
    const double expected = std::log((2.0 + 2.0 * std::exp(-8.0)) / 4.0);
    CHECK(uniformity_exact(u, v) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("exact modes equal an independent O(N^2) enumeration") {
    RngStream rng(23);
    const int n = 16, d = 8;
    TensorF fp({n, d}), ft({n, d});
    for (int i = 0; i < n; ++i) {
        double np = 0, nt = 0;
        for (int j = 0; j < d; ++j) {
            fp.at(i, j) = static_cast<float>(rng.uniform(-1, 1));
            ft.at(i, j) = static_cast<float>(rng.uniform(-1, 1));
            np += fp.at(i, j) * fp.at(i, j);
            nt += ft.at(i, j) * ft.at(i, j);
        }
        for (int j = 0; j < d; ++j) {
            fp.at(i, j) /= static_cast<float>(std::sqrt(np));
            ft.at(i, j) /= static_cast<float>(std::sqrt(nt));
        }
    }

    // brute force oracle
    double align = 0.0;
    for (int i = 0; i < n; ++i) {
        double sq = 0.0;
        for (int j = 0; j < d; ++j) {
            const double diff = static_cast<double>(fp.at(i, j)) - ft.at(i, j);
            sq += diff * diff;
        }
        align += sq;
    }
    align /= n;

    double uni = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double sq = 0.0;
            for (int k = 0; k < d; ++k) {
                const double diff = static_cast<double>(fp.at(i, k)) - ft.at(j, k);
                sq += diff * diff;
            }
            uni += std::exp(-2.0 * sq);
        }
    uni = std::log(uni / (static_cast<double>(n) * n));

    CHECK(std::abs(alignment_exact(fp, ft) - align) < 1e-10);
    CHECK(std::abs(uniformity_exact(fp, ft) - uni) < 1e-10);
}

TEST_CASE("constant feature maps give zero alignment and uniformity") {
    datakit::SyntheticSpec spec;
    spec.samples_per_class = 4;
    spec.image_size = 16;
    const auto ds = datakit::make_synthetic(spec);

    FeatureFn constant_g = [](const TensorF& batch) {
        TensorF out({batch.dim(0), 3});
        for (int i = 0; i < batch.dim(0); ++i) out.at(i, 0) = 1.0f;
        return out;
    };

    auto spec_aug = augment::AugmentationSpec::contrastive(1.0, 16);
    RngStream rng(5);
    CHECK(alignment_loss(ds, constant_g, spec_aug, rng, 2).value == doctest::Approx(0.0));
    CHECK(uniformity_loss(ds, constant_g, spec_aug, rng, 256).value ==
          doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS(alignment_loss(ds, constant_g, spec_aug, rng, 0));
    CHECK_THROWS(uniformity_loss(ds, constant_g, spec_aug, rng, 0));
}

TEST_CASE("identity-only transform distribution gives zero alignment") {
    datakit::SyntheticSpec sspec;
    sspec.samples_per_class = 3;
    sspec.image_size = 16;
    const auto ds = datakit::make_synthetic(sspec);

    // deterministic identity draws: zero strength, flips disabled
    auto aug = augment::AugmentationSpec::contrastive(0.0, 16);
    aug.flip_prob = 0.0;

    FeatureFn mean_g = [](const TensorF& batch) {
        TensorF out({batch.dim(0), 2});
        const std::size_t stride = batch.size() / batch.dim(0);
        for (int i = 0; i < batch.dim(0); ++i) {
            double m = 0.0;
            for (std::size_t j = 0; j < stride; ++j) m += batch[i * stride + j];
            const double angle = m / static_cast<double>(stride);
            out.at(i, 0) = static_cast<float>(std::cos(angle));
            out.at(i, 1) = static_cast<float>(std::sin(angle));
        }
        return out;
    };

    RngStream rng(6);
    CHECK(alignment_loss(ds, mean_g, aug, rng, 3).value == doctest::Approx(0.0));
}
