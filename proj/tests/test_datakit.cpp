#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "poisonforge/datakit.hpp"
#include "poisonforge/errors.hpp"

using namespace poisonforge;
using namespace poisonforge::datakit;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ImageTensor constant_image(int c, int h, int w, float v) {
    ImageTensor img({c, h, w});
    img.fill(v);
    return img;
}

// least-squares linear probe on raw pixels (ridge-regularized normal
// equations); the oracle behind the synthetic-learnability contract
double linear_probe_train_accuracy(const LabeledDataset& ds) {
    const int n = ds.size();
    const std::size_t d = ds.images.size() / n;
    const int k = ds.n_classes;

    // features with a bias column
    const std::size_t dim = d + 1;
    std::vector<double> xtx(dim * dim, 0.0), xty(dim * k, 0.0);
    for (int i = 0; i < n; ++i) {
        std::vector<double> row(dim, 1.0);
        for (std::size_t j = 0; j < d; ++j) row[j] = ds.images[i * d + j];
        for (std::size_t a = 0; a < dim; ++a) {
            for (std::size_t b = 0; b < dim; ++b) xtx[a * dim + b] += row[a] * row[b];
            xty[a * k + ds.labels[i]] += row[a];
        }
    }
    for (std::size_t a = 0; a < dim; ++a) xtx[a * dim + a] += 1e-3;

    // Gaussian elimination
    std::vector<double> w = xty;
    for (std::size_t col = 0; col < dim; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < dim; ++r)
            if (std::abs(xtx[r * dim + col]) > std::abs(xtx[piv * dim + col])) piv = r;
        for (std::size_t c = 0; c < dim; ++c) std::swap(xtx[col * dim + c], xtx[piv * dim + c]);
        for (int c = 0; c < k; ++c) std::swap(w[col * k + c], w[piv * k + c]);
        const double diag = xtx[col * dim + col];
        for (std::size_t r = 0; r < dim; ++r) {
            if (r == col || xtx[r * dim + col] == 0.0) continue;
            const double f = xtx[r * dim + col] / diag;
            for (std::size_t c = col; c < dim; ++c) xtx[r * dim + c] -= f * xtx[col * dim + c];
            for (int c = 0; c < k; ++c) w[r * k + c] -= f * w[col * k + c];
        }
    }
    for (std::size_t r = 0; r < dim; ++r)
        for (int c = 0; c < k; ++c) w[r * k + c] /= xtx[r * dim + r];

    int correct = 0;
    for (int i = 0; i < n; ++i) {
        std::vector<double> scores(k, 0.0);
        for (std::size_t j = 0; j < d; ++j)
            for (int c = 0; c < k; ++c) scores[c] += ds.images[i * d + j] * w[j * k + c];
        for (int c = 0; c < k; ++c) scores[c] += w[d * k + c];
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (scores[c] > scores[best]) best = c;
        correct += best == ds.labels[i];
    }
    return 100.0 * correct / n;
}

} // namespace

TEST_CASE("synthetic generation is a pure function of its spec") {
    SyntheticSpec spec;
    spec.n_classes = 2;
    spec.samples_per_class = 100;
    spec.image_size = 16;
    spec.seed = 7;
    const auto a = make_synthetic(spec);
    const auto b = make_synthetic(spec);
    REQUIRE(a.images.size() == b.images.size());
    CHECK(std::memcmp(a.images.data(), b.images.data(), a.images.size() * sizeof(float)) == 0);
    CHECK(a.labels == b.labels);
}

TEST_CASE("synthetic pixels stay in range and classes are balanced") {
    SyntheticSpec spec;
    const auto ds = make_synthetic(spec);
    ds.validate();
    std::vector<int> counts(ds.n_classes, 0);
    for (int y : ds.labels) ++counts[y];
    for (int c : counts) CHECK(c == spec.samples_per_class);
}

TEST_CASE("near-zero noise collapses each class to its pattern") {
    SyntheticSpec spec;
    spec.samples_per_class = 4;
    spec.noise_scale = 1e-9;
    const auto ds = make_synthetic(spec);
    const std::size_t stride = ds.images.size() / ds.size();
    for (int i = 1; i < spec.samples_per_class; ++i)
        for (std::size_t j = 0; j < stride; ++j)
            CHECK(std::abs(ds.images[i * stride + j] - ds.images[j]) < 1e-6f);
}

TEST_CASE("default synthetic spec is linearly separable (probe oracle)") {
    SyntheticSpec spec;
    const auto ds = make_synthetic(spec);
    CHECK(linear_probe_train_accuracy(ds) >= 95.0);
}

TEST_CASE("synthetic spec invariants are enforced") {
    SyntheticSpec bad;
    bad.noise_scale = 0.5; // must stay below texture_scale
    CHECK_THROWS_AS(make_synthetic(bad), ConfigError);
    SyntheticSpec neg;
    neg.image_size = -4;
    CHECK_THROWS_AS(make_synthetic(neg), ConfigError);
}

TEST_CASE("class-folder ingestion assigns labels in sorted order") {
    const auto dir = fresh_dir("pf_ds_sorted");
    fs::create_directories(dir / "cat");
    fs::create_directories(dir / "dog");
    for (int i = 0; i < 3; ++i)
        write_png((dir / "cat" / ("c" + std::to_string(i) + ".png")).string(),
                  constant_image(3, 8, 8, 0.25f));
    for (int i = 0; i < 2; ++i)
        write_png((dir / "dog" / ("d" + std::to_string(i) + ".png")).string(),
                  constant_image(3, 8, 8, 0.75f));

    const auto ds = load_dataset(dir.string());
    CHECK(ds.size() == 5);
    CHECK(ds.n_classes == 2);
    CHECK(ds.labels == std::vector<int>{0, 0, 0, 1, 1});
    fs::remove_all(dir);
}

TEST_CASE("ingestion rejects empty roots and mixed shapes") {
    const auto empty = fresh_dir("pf_ds_empty");
    CHECK_THROWS_AS(load_dataset(empty.string()), IoError);
    CHECK_THROWS_AS(load_dataset((empty / "missing").string()), IoError);

    const auto mixed = fresh_dir("pf_ds_mixed");
    fs::create_directories(mixed / "a");
    write_png((mixed / "a" / "small.png").string(), constant_image(3, 8, 8, 0.5f));
    write_png((mixed / "a" / "zbig.png").string(), constant_image(3, 16, 16, 0.5f));
    CHECK_THROWS_AS(load_dataset(mixed.string()), ConfigError);
    fs::remove_all(empty);
    fs::remove_all(mixed);
}

TEST_CASE("png round trip preserves 8-bit values") {
    const auto dir = fresh_dir("pf_png");
    ImageTensor img({3, 8, 8});
    for (std::size_t i = 0; i < img.size(); ++i)
        img[i] = static_cast<float>((i * 37 % 256) / 255.0);
    const auto path = (dir / "x.png").string();
    write_png(path, img);
    const auto back = read_png(path);
    REQUIRE(back.same_shape(img));
    for (std::size_t i = 0; i < img.size(); ++i)
        CHECK(back[i] == doctest::Approx(img[i]).epsilon(1e-6));
    fs::remove_all(dir);
}

TEST_CASE("apply_perturbations: identity, clipping, and mask semantics") {
    SyntheticSpec spec;
    spec.samples_per_class = 10;
    spec.image_size = 8;
    const auto ds = make_synthetic(spec);

    PerturbationSet zero;
    zero.epsilon = 8.0f / 255.0f;
    zero.deltas = TensorF(ds.images.shape());
    zero.poison_mask.assign(ds.size(), 1);
    const auto same = apply_perturbations(ds, zero);
    CHECK(std::memcmp(same.images.data(), ds.images.data(),
                      ds.images.size() * sizeof(float)) == 0);

    // clipping at the range boundary
    LabeledDataset bright = ds;
    bright.images.fill(1.0f);
    PerturbationSet up = zero;
    up.deltas.fill(8.0f / 255.0f);
    const auto clipped = apply_perturbations(bright, up);
    for (std::size_t i = 0; i < clipped.images.size(); ++i)
        CHECK(clipped.images[i] == 1.0f);

    // 80% mask: exactly 20% of samples bit-equal their inputs
    PerturbationSet partial = up;
    partial.poison_mask = make_poison_mask(ds.size(), 0.8, 3);
    for (int i = 0; i < ds.size(); ++i)
        if (!partial.poison_mask[i]) {
            const std::size_t stride = partial.deltas.size() / ds.size();
            std::fill(partial.deltas.data() + i * stride,
                      partial.deltas.data() + (i + 1) * stride, 0.0f);
        }
    const auto poisoned = apply_perturbations(ds, partial);
    int untouched = 0;
    const std::size_t stride = ds.images.size() / ds.size();
    for (int i = 0; i < ds.size(); ++i)
        if (std::memcmp(poisoned.images.data() + i * stride, ds.images.data() + i * stride,
                        stride * sizeof(float)) == 0)
            ++untouched;
    CHECK(untouched == ds.size() / 5);
}

TEST_CASE("poison mask picks floor(ratio*N) unique indices deterministically") {
    const auto m1 = make_poison_mask(100, 0.8, 42);
    const auto m2 = make_poison_mask(100, 0.8, 42);
    CHECK(m1 == m2);
    int count = 0;
    for (auto b : m1) count += b;
    CHECK(count == 80);
    const auto m3 = make_poison_mask(100, 0.8, 43);
    CHECK(m1 != m3);
}

TEST_CASE("archive round trip is bit-exact and integrity-checked") {
    RngStream rng(12);
    PerturbationSet pset;
    pset.epsilon = 8.0f / 255.0f;
    pset.deltas = TensorF({6, 3, 8, 8});
    pset.poison_mask.assign(6, 1);
    for (std::size_t i = 0; i < pset.deltas.size(); ++i)
        pset.deltas[i] = static_cast<float>(rng.uniform(-1.0, 1.0)) * pset.epsilon;

    PoisonManifest manifest;
    manifest.attack_id = "aue";
    manifest.dataset_name = "synthetic";
    manifest.epsilon = 8.0 / 255.0;
    manifest.strength = StrengthSetting::uniform(0.6);
    manifest.seed = 12;

    const auto dir = fresh_dir("pf_archive");
    save_archive(pset, manifest, dir.string());
    const auto [loaded, lm] = load_archive(dir.string());
    REQUIRE(loaded.deltas.size() == pset.deltas.size());
    CHECK(std::memcmp(loaded.deltas.data(), pset.deltas.data(),
                      pset.deltas.size() * sizeof(float)) == 0);
    CHECK(loaded.poison_mask == pset.poison_mask);
    CHECK(lm.attack_id == "aue");
    CHECK(lm.strength.coupled);
    CHECK(lm.strength.crop == doctest::Approx(0.6));

    // tampering trips the digest check
    {
        std::fstream f(dir / "deltas.bin",
                       std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(64);
        const char junk = 0x5a;
        f.write(&junk, 1);
    }
    CHECK_THROWS_AS(load_archive(dir.string()), IoError);
    fs::remove_all(dir);
}

TEST_CASE("archives violating the budget are rejected at load time") {
    PerturbationSet pset;
    pset.epsilon = 8.0f / 255.0f;
    pset.deltas = TensorF({1, 1, 2, 2});
    pset.poison_mask.assign(1, 1);
    pset.deltas[0] = 9.0f / 255.0f; // over budget

    PoisonManifest manifest;
    manifest.attack_id = "manual";
    manifest.dataset_name = "x";
    manifest.epsilon = 8.0 / 255.0;
    manifest.seed = 0;

    const auto dir = fresh_dir("pf_archive_bad");
    CHECK_THROWS_AS(save_archive(pset, manifest, dir.string()), ConfigError);

    // write a syntactically valid archive with an over-budget entry by hand
    pset.deltas[0] = 8.0f / 255.0f;
    save_archive(pset, manifest, dir.string());
    // shrink the stated epsilon below the stored delta
    {
        std::ifstream in(dir / "manifest.json");
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        in.close();
        const auto pos = text.find("\"epsilon\"");
        REQUIRE(pos != std::string::npos);
        const auto colon = text.find(':', pos);
        const auto comma = text.find_first_of(",}\n", colon);
        text.replace(colon + 1, comma - colon - 1, " 0.01");
        std::ofstream out(dir / "manifest.json");
        out << text;
    }
    CHECK_THROWS_AS(load_archive(dir.string()), ConfigError);
    fs::remove_all(dir);
}
