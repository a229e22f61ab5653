#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fcnseg/checkpoint.hpp"
#include "fcnseg/label_image.hpp"
#include "fcnseg/layers.hpp"
#include "fcnseg/model.hpp"
#include "fcnseg/sample.hpp"
#include "fcnseg/tensor.hpp"

namespace fcnseg {

/// SGD hyper-parameters with a step-down learning-rate policy.
struct TrainConfig {
    int epochs = 60;
    double base_lr = 1e-4;
    double step_fraction = 0.33;
    double gamma = 0.1;
    double momentum = 0.9;
    int batch_size = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// base_lr · gamma^floor(epoch / ceil(step_fraction · epochs)).
double lr_at(const TrainConfig& config, int epoch);

enum class TaskKind { kSegmentation, kClassification };

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_pixel_acc = 0.0;
    std::optional<double> val_loss;
    std::optional<double> val_pixel_acc;
};

struct ValidationResult {
    double loss = 0.0;
    double pixel_accuracy = 0.0;
};

/// Loss and score-map gradient of one item under the given task.
LossResult task_loss(const Tensor& scores, const Sample& sample, TaskKind task);

/// Mean loss and pixel accuracy (classification: item accuracy); never mutates the model.
ValidationResult validate(const SegModel& model, const Dataset& split, TaskKind task = TaskKind::kSegmentation);

/// Momentum SGD over a model it does not own. Holds the velocity buffers.
class SgdTrainer {
public:
    SgdTrainer(SegModel& model, TrainConfig config, TaskKind task = TaskKind::kSegmentation);

    /// One pass over the split in a seeded order. Throws DivergenceError on a non-finite loss.
    EpochStats train_epoch(const Dataset& split, int epoch);

    /// Apply v ← μv − η∇, w ← w + v to every trainable parameter with a gradient.
    void step(double lr);

    const TrainConfig& config() const noexcept { return config_; }

private:
    SegModel& model_;
    TrainConfig config_;
    TaskKind task_;
    std::vector<std::vector<double>> velocity_;
};

/// Visit order for an epoch: a permutation of 0..n-1 determined by (seed, epoch).
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch);

void write_epoch_csv(const std::filesystem::path& path, const std::vector<EpochStats>& stats);

// ---- two-tier transfer learning ----------------------------------------------

enum class StageRole { kClassificationSurrogate, kSegmentationSurrogate, kTarget };

std::string_view to_string(StageRole r);
StageRole parse_stage_role(std::string_view s);

struct StageData {
    TaskKind task = TaskKind::kSegmentation;
    int num_classes = kNumWoundClasses;
    Dataset train;
    Dataset validation;
};

using DatasetRegistry = std::map<std::string, StageData>;

struct TierStage {
    std::string name;
    StageRole role = StageRole::kTarget;
    std::string dataset;  // key into the registry
    TrainConfig config;
    LoadMode load_mode = LoadMode::kCompatible;
};

struct TierPlan {
    std::vector<TierStage> stages;
    /// Optional warm start for the first stage.
    std::optional<Checkpoint> source;
};

struct ModelSpec {
    Variant variant = Variant::k8s;
    double width_scale = 0.1;
    std::uint64_t seed = 0;
    ModelOptions options;
};

struct StageResult {
    std::string name;
    std::vector<EpochStats> stats;
    std::optional<LoadReport> load_report;
    Checkpoint last;
    std::optional<Checkpoint> best;  // lowest validation loss, when a validation split exists
};

struct TierResult {
    Checkpoint final_checkpoint;
    std::vector<StageResult> stages;
};

using StageCallback = std::function<void(const StageResult&)>;
using EpochCallback = std::function<void(const std::string& stage, const EpochStats&)>;

/// Run the stages in order; stage k+1 starts from stage k's last checkpoint.
TierResult run_tier_plan(const TierPlan& plan, const ModelSpec& spec, const DatasetRegistry& datasets,
                         const StageCallback& on_stage_done = {}, const EpochCallback& on_epoch = {});

}  // namespace fcnseg
