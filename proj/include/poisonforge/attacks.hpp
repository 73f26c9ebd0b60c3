#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "poisonforge/augment.hpp"
#include "poisonforge/datakit.hpp"
#include "poisonforge/models.hpp"

namespace poisonforge::attacks {

// Error-minimizing generation: alternates reference-model descent on the
// augmented poisoned data with signed-gradient descent on the perturbations.
// spec.mode = supervised recovers the UE baseline.
struct AUEConfig {
    int T = 60;        // rounds
    int T_theta = 391; // model updates per round
    int T_delta = 391; // perturbation batches per round
    int T_p = 5;       // PGD steps per batch
    double alpha_theta = 0.1;
    double alpha_delta = 0.8 / 255.0;
    int batch = 128;
    double epsilon = 8.0 / 255.0;
    augment::AugmentationSpec spec = augment::AugmentationSpec::contrastive(1.0, 32);
    float momentum = 0.9f;
    float weight_decay = 1e-4f;
    double poison_ratio = 1.0;
    std::uint64_t seed = 1;

    void validate(int dataset_size) const;
};

// Error-maximizing generation: trains the reference model on clean augmented
// data, then runs per-sample PGD against it. spec.mode = supervised recovers
// the AP baseline.
struct AAPConfig {
    int T = 40;
    int T_theta = 391;
    int T_p = 250;
    double alpha_theta = 0.5;
    double alpha_delta = 0.08 / 255.0;
    int batch = 128;
    double epsilon = 8.0 / 255.0;
    augment::AugmentationSpec spec = augment::AugmentationSpec::contrastive(1.0, 32);
    bool targeted = true;
    int label_shift = 1; // K; target label is (y + K) mod n_classes
    float momentum = 0.9f;
    float weight_decay = 1e-4f;
    double poison_ratio = 1.0;
    std::uint64_t seed = 1;
    double max_pgd_loss = 1e3; // untargeted runs abort beyond this
    bool record_sample_losses = false;

    void validate(int dataset_size, int n_classes) const;
};

struct RoundRecord {
    int round = 0;
    double model_loss = 0.0;     // mean reference-model loss over the round
    double mean_abs_delta = 0.0; // measured entering the round
    double pgd_loss = 0.0;       // mean perturbation objective over the round
};

struct AttackLog {
    std::vector<RoundRecord> records;
    long supervised_draws = 0;
    long contrastive_draws = 0;
    double wall_seconds = 0.0;
    // per-sample PGD loss trajectories (AAP with record_sample_losses)
    std::vector<std::vector<double>> sample_losses;

    std::string to_json() const;
};

// entrywise clamp to [-epsilon, epsilon]
TensorF clip_linf(TensorF delta, float epsilon);

// targeted-attack label translation (y + k) mod n_classes
inline int shifted_label(int y, int k, int n_classes) { return (y + k) % n_classes; }

using ModelFactory =
    std::function<std::unique_ptr<models::Classifier>(int n_classes, std::uint64_t seed)>;

// Compact conv net sized for the synthetic datasets.
ModelFactory toy_model_factory(int image_size, int in_channels = 3);

datakit::PerturbationSet generate_aue(const datakit::LabeledDataset& dataset,
                                      const AUEConfig& cfg, const ModelFactory& factory,
                                      AttackLog* log = nullptr);

datakit::PerturbationSet generate_aap(const datakit::LabeledDataset& dataset,
                                      const AAPConfig& cfg, const ModelFactory& factory,
                                      AttackLog* log = nullptr);

} // namespace poisonforge::attacks
