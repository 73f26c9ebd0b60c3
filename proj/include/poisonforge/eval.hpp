#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "poisonforge/attacks.hpp"
#include "poisonforge/augment.hpp"
#include "poisonforge/datakit.hpp"
#include "poisonforge/losses.hpp"
#include "poisonforge/models.hpp"

namespace poisonforge::eval {

struct ProbeConfig {
    int epochs = 100;
    float lr = 1.0f;
    std::vector<int> milestones = {60, 75, 90}; // lr *= decay at these epochs
    float decay = 0.2f;
    float momentum = 0.9f;
    int batch = 64;

    void validate() const;
};

struct EvalConfig {
    int epochs = 40;
    int batch = 64;
    float lr = 0.1f;
    float weight_decay = 1e-4f;
    float momentum = 0.9f;
    int warmup_epochs = 0;
    double temperature = 0.5; // SimCLR
    augment::AugmentationSpec aug = augment::AugmentationSpec::supervised(16);
    ProbeConfig probe;
    std::uint64_t seed = 1;

    void validate() const;
};

struct TrainHistory {
    std::vector<double> train_loss;
    std::vector<double> train_acc;
    std::vector<double> test_acc;
};

struct SupervisedResult {
    std::unique_ptr<models::Classifier> model;
    double test_accuracy = 0.0; // percent, final epoch
    TrainHistory history;
};

struct ContrastiveResult {
    std::unique_ptr<models::Encoder> encoder;
    std::vector<double> infonce; // per epoch
};

struct ProbeResult {
    double test_accuracy = 0.0; // percent
};

struct GapReport {
    double a_clean = 0.0, a_poisoned = 0.0;
    double u_clean = 0.0, u_poisoned = 0.0;
    double ag = 0.0, ug = 0.0;
};

// per-epoch CE / InfoNCE mimicry series (supervised training under
// contrastive augmentations)
struct MimicrySeries {
    std::vector<double> ce;
    std::vector<double> infonce;
    double pearson_r = 0.0;
};

// ---------------------------------------------------------------------------
// training / probing
// ---------------------------------------------------------------------------

SupervisedResult train_supervised(const datakit::LabeledDataset& train_set,
                                  const datakit::LabeledDataset& test_set,
                                  const EvalConfig& cfg, const attacks::ModelFactory& factory);

ContrastiveResult train_contrastive(const datakit::LabeledDataset& train_set,
                                    const EvalConfig& cfg);

ProbeResult linear_probe(models::Encoder& encoder, const datakit::LabeledDataset& train_set,
                         const datakit::LabeledDataset& test_set, const ProbeConfig& cfg,
                         std::uint64_t seed = 1);

// feature-level probe used by the encoder overload and by tests that place
// features by hand
ProbeResult linear_probe(const TensorF& train_features, const std::vector<int>& train_labels,
                         const TensorF& test_features, const std::vector<int>& test_labels,
                         int n_classes, const ProbeConfig& cfg, std::uint64_t seed = 1);

double classifier_accuracy(models::Classifier& model, const datakit::LabeledDataset& test_set,
                           int batch = 256);

MimicrySeries mimicry_run(const datakit::LabeledDataset& train_set, const EvalConfig& cfg,
                          const attacks::ModelFactory& factory);

// ---------------------------------------------------------------------------
// metrics / analysis
// ---------------------------------------------------------------------------

double worst_case(const std::vector<std::pair<std::string, double>>& entries);

GapReport gap_report(const datakit::LabeledDataset& clean_set,
                     const datakit::LabeledDataset& poisoned_set, const models::FeatureFn& g,
                     const augment::AugmentationSpec& spec, RngStream& rng, int repeats = 4,
                     int n_pairs = 4096);

// exact mode: one fixed (pi, tau) transform pair, full enumeration
GapReport gap_report_exact(const datakit::LabeledDataset& clean_set,
                           const datakit::LabeledDataset& poisoned_set,
                           const models::FeatureFn& g, const augment::TransformSample& pi,
                           const augment::TransformSample& tau);

double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// ---------------------------------------------------------------------------
// paper-table fixtures
// ---------------------------------------------------------------------------

struct FixtureTable {
    std::string name;
    std::vector<std::string> columns;
    struct Row {
        std::string label;
        std::vector<double> values;
    };
    std::vector<Row> rows;

    const Row& row(const std::string& label) const;
    std::vector<double> column(const std::string& column_name) const;
};

// "table1": attack -> (AG, UG, simclr accuracy); "table2": attack ->
// (SL, SimCLR, MoCo, BYOL, SimSiam, printed worst)
const FixtureTable& table_fixture(const std::string& name);

// Rows of table2 whose printed worst disagrees with the row max.
const std::vector<std::string>& table2_worst_discrepancies();

// ---------------------------------------------------------------------------
// algorithm registry
// ---------------------------------------------------------------------------

// An evaluation algorithm trains on the poisoned set and reports clean-test
// accuracy in percent. "sl" and "simclr" ship built in; further CL variants
// plug in without core changes.
using EvalAlgorithm = std::function<double(const datakit::LabeledDataset& poisoned_train,
                                           const datakit::LabeledDataset& clean_test,
                                           const EvalConfig& cfg)>;

std::map<std::string, EvalAlgorithm>& algorithm_registry();
void register_algorithm(const std::string& name, EvalAlgorithm fn);

} // namespace poisonforge::eval
