#pragma once

#include "tomo/autodiff/adam.hpp"
#include "tomo/autodiff/checkpoint.hpp"
#include "tomo/dataset.hpp"
#include "tomo/refine.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tomo {

struct StageConfig {
    int epochs = 1;
    Eigen::Index batch = 1;
    double lr = 1e-4;
};

struct TrainConfig {
    /// Stage 1: batch counts azimuth-elevation slices.
    StageConfig stage1{30, 128, 1e-5};
    /// Stage 2: batch counts scene windows whose gradients are accumulated per step.
    StageConfig stage2{50, 32, 1e-4};
    double lambda = 0.01;
    std::uint64_t seed = 1;
    /// Stage 2 window side in cells; 0 trains on whole scenes.
    Eigen::Index stage2_crop = 0;
    /// Random windows drawn per training scene and epoch when cropping.
    int stage2_crops_per_scene = 1;
    ad::AdamConfig adam;

    void validate() const;
};

/// Divergence or non-finite activations during training.
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LossRecord {
    int epoch = 0;
    std::string split;  ///< "train" or "val"
    double loss = 0.0;
};

struct TrainResult {
    std::vector<LossRecord> curve;
    int best_epoch = 0;
    double best_loss = 0.0;
    ad::Checkpoint best;   ///< lowest validation loss (train loss without a validation split)
    ad::Checkpoint last;
};

struct TrainHooks {
    std::function<void(const LossRecord&)> on_epoch;
};

/// Pre-trains the pre-imaging network on azimuth-elevation slices of the
/// training records against the ground-truth slices. Only prenet parameters
/// are updated.
TrainResult train_stage1(const std::vector<DatasetRecord>& records, const DatasetSplit& split, TomoModel& model,
                         const TrainConfig& cfg, const TrainHooks& hooks = {});

/// End-to-end training of every parameter not marked frozen.
TrainResult train_stage2(const std::vector<DatasetRecord>& records, const DatasetSplit& split, TomoModel& model,
                         const TrainConfig& cfg, const TrainHooks& hooks = {});

/// Marks the prenet parameters frozen (or trainable again).
void set_prenet_frozen(TomoModel& model, bool frozen);

/// Header `epoch,split,loss`; losses printed with 17 significant digits.
void write_loss_csv(const std::filesystem::path& path, const std::vector<LossRecord>& curve);

}  // namespace tomo
