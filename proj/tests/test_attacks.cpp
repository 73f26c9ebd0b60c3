#include <doctest.h>

#include <cmath>
#include <cstring>

#include "poisonforge/attacks.hpp"
#include "poisonforge/errors.hpp"

using namespace poisonforge;
using namespace poisonforge::attacks;

namespace {

datakit::LabeledDataset tiny_set(int per_class = 16, int size = 16, std::uint64_t seed = 1) {
    datakit::SyntheticSpec spec;
    spec.samples_per_class = per_class;
    spec.image_size = size;
    spec.seed = seed;
    return datakit::make_synthetic(spec);
}

AUEConfig tiny_aue(const datakit::LabeledDataset& ds) {
    AUEConfig cfg;
    cfg.T = 2;
    cfg.T_theta = 2;
    cfg.T_delta = 2;
    cfg.T_p = 2;
    cfg.batch = 8;
    cfg.alpha_theta = 0.05;
    cfg.alpha_delta = 2.0 / 255.0;
    cfg.spec = augment::AugmentationSpec::contrastive(1.0, ds.height());
    cfg.seed = 11;
    return cfg;
}

AAPConfig tiny_aap(const datakit::LabeledDataset& ds) {
    AAPConfig cfg;
    cfg.T = 2;
    cfg.T_theta = 4;
    cfg.T_p = 3;
    cfg.batch = 8;
    cfg.alpha_theta = 0.05;
    cfg.alpha_delta = 2.0 / 255.0;
    cfg.spec = augment::AugmentationSpec::contrastive(1.0, ds.height());
    cfg.seed = 13;
    return cfg;
}

} // namespace

TEST_CASE("clip_linf clamps into the budget ball") {
    TensorF d({1, 1, 1, 3});
    d[0] = 0.05f;
    d[1] = -0.002f;
    d[2] = -0.5f;
    const float eps = 8.0f / 255.0f;
    const auto c = clip_linf(d, eps);
    CHECK(c[0] == eps);
    CHECK(c[1] == -0.002f); // inside the ball, unchanged
    CHECK(c[2] == -eps);

    const auto z = clip_linf(c, 0.0f);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == 0.0f);
}

TEST_CASE("targeted label translation wraps modulo n_classes") {
    CHECK(shifted_label(9, 1, 10) == 0);
    CHECK(shifted_label(3, 1, 10) == 4);
    CHECK(shifted_label(7, 5, 10) == 2);
}

TEST_CASE("zero PGD steps leave the perturbations at zero") {
    const auto ds = tiny_set(8, 16);
    auto cfg = tiny_aue(ds);
    cfg.T_p = 0;
    const auto pset = generate_aue(ds, cfg, toy_model_factory(16), nullptr);
    for (std::size_t i = 0; i < pset.deltas.size(); ++i) CHECK(pset.deltas[i] == 0.0f);

    auto acfg = tiny_aap(ds);
    acfg.T_p = 0;
    const auto apset = generate_aap(ds, acfg, toy_model_factory(16), nullptr);
    for (std::size_t i = 0; i < apset.deltas.size(); ++i) CHECK(apset.deltas[i] == 0.0f);
}

TEST_CASE("AUE honors the budget and masks, and logs T records") {
    const auto ds = tiny_set(16, 16);
    auto cfg = tiny_aue(ds);
    cfg.poison_ratio = 0.75;
    AttackLog log;
    const auto pset = generate_aue(ds, cfg, toy_model_factory(16), &log);

    CHECK(pset.epsilon == doctest::Approx(cfg.epsilon));
    const std::size_t stride = pset.deltas.size() / pset.size();
    int poisoned = 0, moved = 0;
    for (int i = 0; i < pset.size(); ++i) {
        bool any = false;
        for (std::size_t j = 0; j < stride; ++j) {
            const float d = pset.deltas[i * stride + j];
            CHECK(std::fabs(d) <= pset.epsilon);
            if (d != 0.0f) any = true;
        }
        if (pset.poison_mask[i]) {
            ++poisoned;
            moved += any;
        } else {
            CHECK_FALSE(any);
        }
    }
    CHECK(poisoned == 24);
    CHECK(moved == 24); // every masked sample actually received updates

    REQUIRE(static_cast<int>(log.records.size()) == cfg.T);
    CHECK(log.records.front().mean_abs_delta == doctest::Approx(0.0));
    CHECK(log.records.front().round == 1);
}

TEST_CASE("attack generation is bit-deterministic given the seed") {
    const auto ds = tiny_set(8, 16);
    const auto cfg = tiny_aue(ds);
    const auto a = generate_aue(ds, cfg, toy_model_factory(16), nullptr);
    const auto b = generate_aue(ds, cfg, toy_model_factory(16), nullptr);
    REQUIRE(a.deltas.size() == b.deltas.size());
    CHECK(std::memcmp(a.deltas.data(), b.deltas.data(), a.deltas.size() * sizeof(float)) == 0);

    const auto acfg = tiny_aap(ds);
    const auto c = generate_aap(ds, acfg, toy_model_factory(16), nullptr);
    const auto d = generate_aap(ds, acfg, toy_model_factory(16), nullptr);
    CHECK(std::memcmp(c.deltas.data(), d.deltas.data(), c.deltas.size() * sizeof(float)) == 0);

    auto other = cfg;
    other.seed = 999;
    const auto e = generate_aue(ds, other, toy_model_factory(16), nullptr);
    CHECK(std::memcmp(a.deltas.data(), e.deltas.data(), a.deltas.size() * sizeof(float)) != 0);
}

TEST_CASE("supervised-mode specs execute only supervised draws (UE/AP collapse)") {
    const auto ds = tiny_set(8, 16);
    auto cfg = tiny_aue(ds);
    cfg.spec = augment::AugmentationSpec::supervised(16);
    AttackLog log;
    generate_aue(ds, cfg, toy_model_factory(16), &log);
    CHECK(log.contrastive_draws == 0);
    CHECK(log.supervised_draws > 0);

    auto acfg = tiny_aap(ds);
    acfg.spec = augment::AugmentationSpec::supervised(16);
    AttackLog alog;
    generate_aap(ds, acfg, toy_model_factory(16), &alog);
    CHECK(alog.contrastive_draws == 0);
    CHECK(alog.supervised_draws > 0);
}

TEST_CASE("AUE drives the reference-model loss down over rounds") {
    const auto ds = tiny_set(32, 16);
    AUEConfig cfg;
    cfg.T = 6;
    cfg.T_theta = 8;
    cfg.T_delta = 8;
    cfg.T_p = 3;
    cfg.batch = 16;
    cfg.alpha_theta = 0.05;
    cfg.alpha_delta = 1.6 / 255.0;
    cfg.spec = augment::AugmentationSpec::contrastive(1.0, 16);
    cfg.seed = 5;
    AttackLog log;
    generate_aue(ds, cfg, toy_model_factory(16), &log);
    REQUIRE(log.records.size() == 6);
    CHECK(log.records.back().model_loss < log.records.front().model_loss);
}

TEST_CASE("targeted AAP reduces the shifted-label loss for most samples") {
    const auto ds = tiny_set(24, 16);
    AAPConfig cfg;
    cfg.T = 6;
    cfg.T_theta = 6;
    cfg.T_p = 12;
    cfg.batch = 12;
    cfg.alpha_theta = 0.05;
    cfg.alpha_delta = 1.0 / 255.0;
    cfg.spec = augment::AugmentationSpec::contrastive(0.5, 16);
    cfg.seed = 7;
    cfg.record_sample_losses = true;
    AttackLog log;
    generate_aap(ds, cfg, toy_model_factory(16), &log);

    REQUIRE(static_cast<int>(log.sample_losses.size()) == ds.size());
    int improved = 0;
    for (const auto& traj : log.sample_losses) {
        REQUIRE(traj.size() == static_cast<std::size_t>(cfg.T_p + 1));
        improved += traj.back() < traj.front();
    }
    CHECK(improved >= ds.size() * 9 / 10);
}

TEST_CASE("untargeted AAP raises the true-label loss above its clean value") {
    const auto ds = tiny_set(24, 16);
    AAPConfig cfg;
    cfg.T = 6;
    cfg.T_theta = 6;
    cfg.T_p = 12;
    cfg.batch = 12;
    cfg.alpha_theta = 0.05;
    cfg.alpha_delta = 1.0 / 255.0;
    cfg.spec = augment::AugmentationSpec::contrastive(0.5, 16);
    cfg.targeted = false;
    cfg.seed = 9;
    cfg.record_sample_losses = true;
    AttackLog log;
    generate_aap(ds, cfg, toy_model_factory(16), &log);

    double first = 0.0, last = 0.0;
    for (const auto& traj : log.sample_losses) {
        first += traj.front();
        last += traj.back();
    }
    CHECK(last > first);
}

TEST_CASE("invalid configs are rejected") {
    const auto ds = tiny_set(8, 16);
    auto cfg = tiny_aue(ds);
    cfg.batch = 1000;
    CHECK_THROWS_AS(generate_aue(ds, cfg, toy_model_factory(16), nullptr), ConfigError);

    auto acfg = tiny_aap(ds);
    acfg.label_shift = 5; // n_classes == 2
    CHECK_THROWS_AS(generate_aap(ds, acfg, toy_model_factory(16), nullptr), ConfigError);
}
