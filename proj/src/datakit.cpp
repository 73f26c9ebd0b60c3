#include "poisonforge/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>

#include "poisonforge/errors.hpp"
#include "poisonforge/rng.hpp"

namespace poisonforge::datakit {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// types
// ---------------------------------------------------------------------------

ImageTensor LabeledDataset::image(int i) const {
    ImageTensor out({channels(), height(), width()});
    const std::size_t stride = out.size();
    std::copy(images.data() + static_cast<std::size_t>(i) * stride,
              images.data() + static_cast<std::size_t>(i + 1) * stride, out.data());
    return out;
}

void LabeledDataset::validate() const {
    if (images.rank() != 4) throw ConfigError("dataset images must be (N, C, H, W)");
    if (static_cast<int>(labels.size()) != size())
        throw ConfigError("label count does not match sample count");
    if (n_classes <= 0) throw ConfigError("dataset needs at least one class");
    for (int y : labels)
        if (y < 0 || y >= n_classes) throw ConfigError("label out of range");
    for (std::size_t i = 0; i < images.size(); ++i)
        if (!std::isfinite(images[i]) || images[i] < 0.0f || images[i] > 1.0f)
            throw ConfigError("pixel outside [0, 1]");
}

void PerturbationSet::validate() const {
    if (deltas.rank() != 4) throw ConfigError("deltas must be (N, C, H, W)");
    if (static_cast<int>(poison_mask.size()) != size())
        throw ConfigError("poison mask length mismatch");
    const std::size_t stride = deltas.size() / std::max(1, size());
    for (int i = 0; i < size(); ++i) {
        const float* d = deltas.data() + static_cast<std::size_t>(i) * stride;
        for (std::size_t j = 0; j < stride; ++j) {
            if (!std::isfinite(d[j])) throw ConfigError("non-finite delta entry");
            if (std::fabs(d[j]) > epsilon)
                throw ConfigError("delta exceeds epsilon budget");
            if (!poison_mask[i] && d[j] != 0.0f)
                throw ConfigError("unmasked sample carries a nonzero delta");
        }
    }
}

float PerturbationSet::max_abs() const {
    float m = 0.0f;
    for (std::size_t i = 0; i < deltas.size(); ++i) m = std::max(m, std::fabs(deltas[i]));
    return m;
}

void SyntheticSpec::validate() const {
    if (n_classes <= 0 || samples_per_class <= 0 || image_size <= 0)
        throw ConfigError("synthetic spec sizes must be positive");
    if (!(texture_scale > noise_scale && noise_scale > 0.0))
        throw ConfigError("synthetic spec requires texture_scale > noise_scale > 0");
}

// ---------------------------------------------------------------------------
// ingestion
// ---------------------------------------------------------------------------

LabeledDataset load_dataset(const std::string& root_path, DatasetLayout layout) {
    if (layout != DatasetLayout::class_folders) throw ConfigError("unsupported dataset layout");
    if (!fs::is_directory(root_path)) throw IoError("missing dataset directory: " + root_path);

    std::vector<std::string> class_dirs;
    for (const auto& e : fs::directory_iterator(root_path))
        if (e.is_directory()) class_dirs.push_back(e.path().filename().string());
    std::sort(class_dirs.begin(), class_dirs.end());
    if (class_dirs.empty()) throw IoError("no classes found in " + root_path);

    std::vector<ImageTensor> imgs;
    std::vector<int> labels;
    for (std::size_t ci = 0; ci < class_dirs.size(); ++ci) {
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(fs::path(root_path) / class_dirs[ci]))
            if (e.is_regular_file() && e.path().extension() == ".png")
                files.push_back(e.path().string());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            imgs.push_back(read_png(f));
            labels.push_back(static_cast<int>(ci));
        }
    }
    if (imgs.empty()) throw IoError("no PNG images found in " + root_path);

    for (const auto& img : imgs)
        if (!img.same_shape(imgs.front()))
            throw ConfigError("inconsistent image shapes in " + root_path);

    LabeledDataset ds;
    const auto& s = imgs.front().shape();
    ds.images = TensorF({static_cast<int>(imgs.size()), s[0], s[1], s[2]});
    for (std::size_t i = 0; i < imgs.size(); ++i)
        std::copy(imgs[i].data(), imgs[i].data() + imgs[i].size(),
                  ds.images.data() + i * imgs[i].size());
    ds.labels = std::move(labels);
    ds.n_classes = static_cast<int>(class_dirs.size());
    ds.name = fs::path(root_path).filename().string();
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// synthetic data
// ---------------------------------------------------------------------------

namespace {

RngStream keyed_stream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
    std::uint64_t x = seed ^ (tag * 0x9e3779b97f4a7c15ULL);
    x ^= index + 0x9e3779b97f4a7c15ULL + (x << 6) + (x >> 2);
    return RngStream(x);
}

// smooth per-class pattern: coarse Gaussian grid upsampled bilinearly
TensorF class_pattern(int channels, int size, RngStream rng) {
    const int k = 4;
    TensorF coarse({channels, k, k});
    for (std::size_t i = 0; i < coarse.size(); ++i)
        coarse[i] = static_cast<float>(rng.normal());

    TensorF out({channels, size, size});
    const double scale = static_cast<double>(k) / size;
    for (int y = 0; y < size; ++y) {
        double fy = (y + 0.5) * scale - 0.5;
        fy = std::min(std::max(fy, 0.0), static_cast<double>(k - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, k - 1);
        const float wy = static_cast<float>(fy - y0);
        for (int x = 0; x < size; ++x) {
            double fx = (x + 0.5) * scale - 0.5;
            fx = std::min(std::max(fx, 0.0), static_cast<double>(k - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, k - 1);
            const float wx = static_cast<float>(fx - x0);
            for (int c = 0; c < channels; ++c) {
                const float a = coarse.data()[(static_cast<std::size_t>(c) * k + y0) * k + x0];
                const float b = coarse.data()[(static_cast<std::size_t>(c) * k + y0) * k + x1];
                const float d = coarse.data()[(static_cast<std::size_t>(c) * k + y1) * k + x0];
                const float e = coarse.data()[(static_cast<std::size_t>(c) * k + y1) * k + x1];
                const float top = a + wx * (b - a);
                const float bot = d + wx * (e - d);
                out.data()[(static_cast<std::size_t>(c) * size + y) * size + x] =
                    top + wy * (bot - top);
            }
        }
    }
    return out;
}

} // namespace

LabeledDataset make_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const int channels = 3;
    const int n = spec.n_classes * spec.samples_per_class;
    const int size = spec.image_size;

    std::vector<TensorF> patterns;
    for (int c = 0; c < spec.n_classes; ++c)
        patterns.push_back(class_pattern(channels, size, keyed_stream(spec.seed, 0x7061747465726eULL, c)));

    LabeledDataset ds;
    ds.images = TensorF({n, channels, size, size});
    ds.labels.resize(n);
    ds.n_classes = spec.n_classes;
    ds.name = "synthetic";

    const std::size_t stride = static_cast<std::size_t>(channels) * size * size;
    for (int i = 0; i < n; ++i) {
        const int cls = i / spec.samples_per_class;
        ds.labels[i] = cls;
        RngStream noise = keyed_stream(spec.seed, 0x6e6f697365ULL, i);
        float* px = ds.images.data() + static_cast<std::size_t>(i) * stride;
        const float* pat = patterns[cls].data();
        for (std::size_t j = 0; j < stride; ++j) {
            const double v = 0.5 + spec.texture_scale * pat[j] + spec.noise_scale * noise.normal();
            px[j] = static_cast<float>(std::min(std::max(v, 0.0), 1.0));
        }
    }
    return ds;
}

// ---------------------------------------------------------------------------
// poisoning
// ---------------------------------------------------------------------------

LabeledDataset apply_perturbations(const LabeledDataset& dataset, const PerturbationSet& pset) {
    if (dataset.size() != pset.size())
        throw ConfigError("dataset/perturbation length mismatch");
    if (!dataset.images.same_shape(pset.deltas))
        throw ConfigError("dataset/perturbation shape mismatch");

    LabeledDataset out = dataset;
    const std::size_t stride = dataset.images.size() / std::max(1, dataset.size());
    for (int i = 0; i < dataset.size(); ++i) {
        if (!pset.poison_mask[i]) continue; // bit-identical passthrough
        float* px = out.images.data() + static_cast<std::size_t>(i) * stride;
        const float* d = pset.deltas.data() + static_cast<std::size_t>(i) * stride;
        for (std::size_t j = 0; j < stride; ++j)
            px[j] = std::min(std::max(px[j] + d[j], 0.0f), 1.0f);
    }
    return out;
}

std::vector<std::uint8_t> make_poison_mask(int n, double ratio, std::uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0) throw ConfigError("poison ratio must lie in [0, 1]");
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    RngStream rng = keyed_stream(seed, 0x6d61736bULL, 0);
    for (int i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);

    const int k = static_cast<int>(std::floor(ratio * n));
    std::vector<std::uint8_t> mask(n, 0);
    for (int i = 0; i < k; ++i) mask[perm[i]] = 1;
    return mask;
}

// ---------------------------------------------------------------------------
// archive
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'P', 'F', 'G', '1'};

void write_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::ifstream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

json strength_to_json(const StrengthSetting& s) {
    if (s.coupled) return json(s.crop);
    return json{{"crop", s.crop}, {"jitter", s.jitter}, {"gray", s.gray}};
}

StrengthSetting strength_from_json(const json& j) {
    StrengthSetting s;
    if (j.is_number()) {
        s = StrengthSetting::uniform(j.get<double>());
    } else {
        s.coupled = false;
        s.crop = j.at("crop").get<double>();
        s.jitter = j.at("jitter").get<double>();
        s.gray = j.at("gray").get<double>();
    }
    return s;
}

} // namespace

void save_archive(const PerturbationSet& pset, const PoisonManifest& manifest,
                  const std::string& dir) {
    pset.validate();
    fs::create_directories(dir);

    const fs::path deltas_path = fs::path(dir) / "deltas.bin";
    {
        std::ofstream os(deltas_path, std::ios::binary);
        if (!os) throw IoError("cannot write " + deltas_path.string());
        os.write(kMagic, 4);
        write_u32(os, static_cast<std::uint32_t>(pset.size()));
        write_u32(os, static_cast<std::uint32_t>(pset.deltas.dim(1)));
        write_u32(os, static_cast<std::uint32_t>(pset.deltas.dim(2)));
        write_u32(os, static_cast<std::uint32_t>(pset.deltas.dim(3)));
        static_assert(sizeof(float) == 4);
        os.write(reinterpret_cast<const char*>(pset.deltas.data()),
                 static_cast<std::streamsize>(pset.deltas.size() * sizeof(float)));
    }

    const fs::path mask_path = fs::path(dir) / "mask.bin";
    {
        std::ofstream os(mask_path, std::ios::binary);
        if (!os) throw IoError("cannot write " + mask_path.string());
        os.write(reinterpret_cast<const char*>(pset.poison_mask.data()),
                 static_cast<std::streamsize>(pset.poison_mask.size()));
    }

    json j;
    j["attack_id"] = manifest.attack_id;
    j["dataset_name"] = manifest.dataset_name;
    j["epsilon"] = manifest.epsilon;
    j["strength"] = strength_to_json(manifest.strength);
    j["seed"] = manifest.seed;
    j["config_digest"] = manifest.config_digest;
    j["created_at"] = manifest.created_at.empty() ? iso8601_now() : manifest.created_at;
    j["deltas_digest"] = fnv1a_file_hex(deltas_path.string());
    j["mask_digest"] = fnv1a_file_hex(mask_path.string());
    if (!manifest.extra_json.empty()) j["run_log"] = json::parse(manifest.extra_json);

    std::ofstream os(fs::path(dir) / "manifest.json");
    if (!os) throw IoError("cannot write manifest.json in " + dir);
    os << j.dump(2) << "\n";
}

std::pair<PerturbationSet, PoisonManifest> load_archive(const std::string& dir) {
    const fs::path manifest_path = fs::path(dir) / "manifest.json";
    std::ifstream ms(manifest_path);
    if (!ms) throw IoError("missing manifest: " + manifest_path.string());
    json j = json::parse(ms, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) throw IoError("corrupt manifest: " + manifest_path.string());

    PoisonManifest manifest;
    manifest.attack_id = j.at("attack_id").get<std::string>();
    manifest.dataset_name = j.at("dataset_name").get<std::string>();
    manifest.epsilon = j.at("epsilon").get<double>();
    manifest.strength = strength_from_json(j.at("strength"));
    manifest.seed = j.at("seed").get<std::uint64_t>();
    manifest.config_digest = j.value("config_digest", "");
    manifest.created_at = j.value("created_at", "");

    const fs::path deltas_path = fs::path(dir) / "deltas.bin";
    const fs::path mask_path = fs::path(dir) / "mask.bin";
    if (fnv1a_file_hex(deltas_path.string()) != j.at("deltas_digest").get<std::string>())
        throw IoError("digest mismatch for deltas.bin");
    if (fnv1a_file_hex(mask_path.string()) != j.at("mask_digest").get<std::string>())
        throw IoError("digest mismatch for mask.bin");

    std::ifstream is(deltas_path, std::ios::binary);
    if (!is) throw IoError("missing deltas.bin in " + dir);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("corrupt header in deltas.bin");
    const std::uint32_t count = read_u32(is);
    const std::uint32_t c = read_u32(is);
    const std::uint32_t h = read_u32(is);
    const std::uint32_t w = read_u32(is);

    PerturbationSet pset;
    pset.epsilon = static_cast<float>(manifest.epsilon);
    pset.deltas = TensorF({static_cast<int>(count), static_cast<int>(c), static_cast<int>(h),
                           static_cast<int>(w)});
    is.read(reinterpret_cast<char*>(pset.deltas.data()),
            static_cast<std::streamsize>(pset.deltas.size() * sizeof(float)));
    if (!is) throw IoError("truncated deltas.bin");

    std::ifstream msk(mask_path, std::ios::binary);
    pset.poison_mask.resize(count);
    msk.read(reinterpret_cast<char*>(pset.poison_mask.data()), count);
    if (!msk) throw IoError("truncated mask.bin");

    pset.validate(); // enforces the budget and mask invariants at load time
    return {std::move(pset), std::move(manifest)};
}

// ---------------------------------------------------------------------------
// misc
// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string fnv1a_hex(const void* data, std::size_t len) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(data, len)));
    return buf;
}

std::string fnv1a_file_hex(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                            std::istreambuf_iterator<char>());
    return fnv1a_hex(bytes.data(), bytes.size());
}

std::string iso8601_now() {
    std::time_t t = std::time(nullptr);
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"))
        t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace poisonforge::datakit
