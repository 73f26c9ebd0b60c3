#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poisonforge/tensor.hpp"

namespace poisonforge::datakit {

// Pixel array in [0, 1], shape (C, H, W) with C in {1, 3}.
using ImageTensor = TensorF;

enum class DatasetLayout { class_folders };

// Samples live in one contiguous (N, C, H, W) block; labels are aligned by
// index. Values are immutable once constructed and safe to share across
// concurrent readers.
struct LabeledDataset {
    TensorF images; // (N, C, H, W)
    std::vector<int> labels;
    int n_classes = 0;
    std::string name;

    int size() const { return images.empty() ? 0 : images.dim(0); }
    int channels() const { return images.dim(1); }
    int height() const { return images.dim(2); }
    int width() const { return images.dim(3); }

    ImageTensor image(int i) const;
    void validate() const;
};

// Per-sample perturbations with an L-inf budget; unmasked indices carry an
// all-zero delta.
struct PerturbationSet {
    TensorF deltas; // (N, C, H, W)
    float epsilon = 0.0f;
    std::vector<std::uint8_t> poison_mask; // 1 = poisoned

    int size() const { return deltas.empty() ? 0 : deltas.dim(0); }
    void validate() const;
    float max_abs() const;
};

struct StrengthSetting {
    bool coupled = true;
    double crop = 1.0, jitter = 1.0, gray = 1.0;

    static StrengthSetting uniform(double s) { return {true, s, s, s}; }
};

struct PoisonManifest {
    std::string attack_id;
    std::string dataset_name;
    double epsilon = 0.0;
    StrengthSetting strength;
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string created_at; // ISO-8601 UTC; honors SOURCE_DATE_EPOCH
    std::string extra_json; // optional free-form run log (JSON text)
};

struct SyntheticSpec {
    int n_classes = 2;
    int samples_per_class = 256;
    int image_size = 16;
    double texture_scale = 0.25; // per-class pattern amplitude
    double noise_scale = 0.08;   // per-sample amplitude
    std::uint64_t seed = 1;

    void validate() const;
};

// ---------------------------------------------------------------------------
// operations
// ---------------------------------------------------------------------------

// <root>/<class_name>/*.png; labels follow sorted folder names, samples follow
// sorted file paths.
LabeledDataset load_dataset(const std::string& root_path,
                            DatasetLayout layout = DatasetLayout::class_folders);

// clip(0.5 + texture_scale * Pattern(class) + noise_scale * Noise(sample), 0, 1)
// with a smooth per-class pattern; a pure function of the spec.
LabeledDataset make_synthetic(const SyntheticSpec& spec);

// poisoned pixel = clip(x + delta, 0, 1); labels unchanged; unmasked samples
// are returned bit-identical.
LabeledDataset apply_perturbations(const LabeledDataset& dataset, const PerturbationSet& pset);

// First floor(ratio * N) indices of a seed-derived permutation are poisoned.
std::vector<std::uint8_t> make_poison_mask(int n, double ratio, std::uint64_t seed);

// Archive layout: manifest.json + deltas.bin ("PFG1", u32 count, u32 C/H/W,
// little-endian f32 payload) + mask.bin (one byte per index). Round trip is
// bit-exact at f32 precision; digests guard against tampering.
void save_archive(const PerturbationSet& pset, const PoisonManifest& manifest,
                  const std::string& dir);
std::pair<PerturbationSet, PoisonManifest> load_archive(const std::string& dir);

// PNG helpers (8-bit gray or RGB)
ImageTensor read_png(const std::string& path);
void write_png(const std::string& path, const ImageTensor& image);

std::uint64_t fnv1a(const void* data, std::size_t len);
std::string fnv1a_hex(const void* data, std::size_t len);
std::string fnv1a_file_hex(const std::string& path);
std::string iso8601_now();

} // namespace poisonforge::datakit
