#pragma once

// Two-stage training: a localization U-Net on pre-event images, then the
// Siamese model initialized from it. AdamW with decoupled weight decay,
// oversampling of damaged scenes, and fine-tuning on a share of a new event.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dmgnet/losses.hpp"
#include "dmgnet/network.hpp"
#include "dmgnet/raster_ops.hpp"
#include "dmgnet/scene_data.hpp"

namespace dmgnet {

struct TrainConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    int stage1_epochs = 8;
    int stage2_epochs = 12;
    int fine_tune_epochs = 6;
    int batch_size = 4;
    int oversample_damaged_factor = 2;
    int oversample_minor_major_factor = 2;
    std::uint64_t seed = 0;
    LossConfig loss;
    AugmentationConfig augmentation = default_augmentation();

    /// Flips and right-angle rotations only.
    static AugmentationConfig default_augmentation();
    void validate() const;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t step = 0;
};

AdamState make_adam_state(const ModelParams& params);

/// One AdamW update of the tensors named in `trainable` (all when empty):
///   theta -= lr * lambda * theta
///   theta -= lr * m_hat / (sqrt(v_hat) + eps)
/// Throws std::invalid_argument naming the first parameter with a non-finite gradient.
void adamw_step(ModelParams& params, const ParamGrads& grads, AdamState& state, const TrainConfig& cfg,
                const std::vector<std::string>& trainable = {});

/// How many times a scene is drawn per epoch under the oversampling rule.
int sample_multiplicity(const GradeMap& labels, const TrainConfig& cfg);
int sample_multiplicity(const std::array<bool, kNumGrades + 1>& present, const TrainConfig& cfg);

/// Oversampled scene indices for one epoch, shuffled by (seed, epoch).
std::vector<std::size_t> build_sampler(const std::vector<ScenePair>& scenes, const TrainConfig& cfg, int epoch);
std::vector<std::size_t> build_sampler(const std::vector<std::array<bool, kNumGrades + 1>>& grades,
                                       const TrainConfig& cfg, int epoch);

struct LossTraceRow {
    int epoch = 0;
    std::string split;  // "train" or "test"
    double loss = 0.0;
    double loc_f1 = 0.0;
    double macro_f1 = 0.0;  // 0 for the localization stage
};

struct LossTrace {
    std::vector<LossTraceRow> rows;
    std::string to_csv() const;
};

/// Optional held-out scenes scored after every epoch (rows with split "test").
struct TrainMonitor {
    const std::vector<ScenePair>* held_out = nullptr;
    LossTrace* trace = nullptr;
};

/// Trains the 1-channel localization model on every given scene.
/// Throws std::runtime_error on a non-finite loss.
ModelParams train_stage1_localization(const std::vector<ScenePair>& scenes, const NetworkConfig& net,
                                      const TrainConfig& cfg, TrainMonitor monitor = {});

/// Transfers the stage-1 weights, then trains body and fusion on the
/// 5-channel targets with oversampling and augmentation. The localization
/// head is carried along untouched.
ModelParams train_stage2_siamese(const std::vector<ScenePair>& scenes, const ModelParams& stage1,
                                 const TrainConfig& cfg, TrainMonitor monitor = {});

/// Continues Siamese training on exactly the given scenes for cfg.fine_tune_epochs.
ModelParams continue_training(const ModelParams& params, const std::vector<ScenePair>& scenes,
                              const TrainConfig& cfg, TrainMonitor monitor = {});

/// Indices of the floor(share * n) scenes picked for fine-tuning: a prefix of
/// a permutation seeded by `seed`, so smaller shares pick subsets of larger ones.
std::vector<std::size_t> fine_tune_selection(std::size_t n, double share, std::uint64_t seed);

/// Fine-tunes on floor(share * N) of the given scenes (share in [0, 0.5]);
/// share 0 returns the parameters unchanged.
ModelParams fine_tune(const ModelParams& params, const std::vector<ScenePair>& scenes, double share,
                      const TrainConfig& cfg, std::vector<std::size_t>* selected = nullptr);

/// Stage 1 followed by stage 2 on the given scenes.
ModelParams train_two_stage(const std::vector<ScenePair>& scenes, const NetworkConfig& net, const TrainConfig& cfg,
                            LossTrace* stage1_trace = nullptr, LossTrace* stage2_trace = nullptr,
                            const std::vector<ScenePair>* held_out = nullptr);

/// Manifest entry points: train on split == train scenes.
ModelParams train_stage1_localization(const DatasetManifest& manifest, const NetworkConfig& net,
                                      const TrainConfig& cfg);
ModelParams train_stage2_siamese(const DatasetManifest& manifest, const ModelParams& stage1, const TrainConfig& cfg);

}  // namespace dmgnet
