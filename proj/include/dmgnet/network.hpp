#pragma once

// Siamese U-Net with shared weights.
//
// One plain convolutional U-Net (two 3x3 conv + SiLU per level, 2x average
// pooling down, 2x nearest upsampling and skip concatenation up) produces a
// feature map at input resolution. The localization model puts a 1x1 conv
// + sigmoid on top of it. The Siamese model runs the same U-Net on the pre
// and post image, concatenates both feature maps and fuses them with a 1x1
// convolution into 5 sigmoid channels (localization + 4 grades).

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dmgnet/losses.hpp"
#include "dmgnet/tensor.hpp"
#include "dmgnet/types.hpp"

namespace dmgnet {

struct NetworkConfig {
    int input_side = 128;
    std::vector<int> widths{16, 32, 64};
    int head_channels = 5;  // 1: localization stage, 5: Siamese stage
    int in_channels = 3;
    std::uint64_t seed = 0;

    int levels() const { return static_cast<int>(widths.size()); }
    void validate() const;
    bool operator==(const NetworkConfig&) const = default;
};

struct ParamTensor {
    std::string name;
    std::vector<int> shape;
    std::vector<double> values;

    bool operator==(const ParamTensor&) const = default;
};

/// Named weight arrays plus the configuration that fixes their shapes.
struct ModelParams {
    NetworkConfig config;
    std::vector<ParamTensor> tensors;

    std::size_t parameter_count() const;
    const ParamTensor* find(const std::string& name) const;
    ParamTensor* find(const std::string& name);
    bool has_fusion() const { return find("fusion.weight") != nullptr; }

    bool operator==(const ModelParams&) const = default;
};

/// Per-parameter gradients aligned with ModelParams::tensors.
using ParamGrads = std::vector<std::vector<double>>;
ParamGrads zero_grads(const ModelParams& params);

/// U-Net body + localization head, He-initialized from config.seed.
ModelParams init_localization_params(NetworkConfig config);
/// Body + localization head + fusion layer.
ModelParams init_siamese_params(NetworkConfig config);
/// Same layout with every value set to zero.
ModelParams zero_params(const ModelParams& like);
/// Parameter count of one body + localization head for a given config.
std::size_t unet_parameter_count(const NetworkConfig& config);

/// Copies body and localization head exactly; draws a fresh fusion layer from `seed`.
ModelParams transfer_localization_weights(const ModelParams& localization, std::uint64_t seed);

/// Names of the parameters updated when training each stage.
std::vector<std::string> trainable_for_localization(const ModelParams& params);
std::vector<std::string> trainable_for_siamese(const ModelParams& params);

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Intermediate tensors of one U-Net pass, kept for the backward pass.
template <typename T>
struct UNetTrace {
    struct Block {
        Tensor<T> in, z1, a1, z2, out;  // conv input, pre/post activations
    };
    std::vector<Block> encoder;
    std::vector<Block> decoder;  // decoder[l] produces the level-l output
};

/// Typed, execution-ready view of a parameter set.
template <typename T>
class Network {
public:
    explicit Network(const ModelParams& params);

    const NetworkConfig& config() const { return config_; }
    bool has_fusion() const { return fusion_w_ >= 0; }

    Tensor<T> features(const Tensor<T>& image, UNetTrace<T>* trace = nullptr) const;
    /// Sigmoid localization map (1 channel).
    Tensor<T> localize(const Tensor<T>& image) const;
    /// Sigmoid 5-channel output from two feature maps.
    Tensor<T> fuse(const Tensor<T>& pre_features, const Tensor<T>& post_features) const;

    /// Loss and parameter gradients (accumulated into grads) of the Siamese model.
    LossTerms siamese_loss_and_grad(const Tensor<T>& pre, const Tensor<T>& post, const Tensor<T>& target,
                                    const LossConfig& loss, std::vector<std::vector<T>>& grads,
                                    Tensor<T>* prediction = nullptr) const;
    /// Same for the localization model against a 1-channel target.
    LossTerms localization_loss_and_grad(const Tensor<T>& pre, const Tensor<T>& target, const LossConfig& loss,
                                         std::vector<std::vector<T>>& grads, Tensor<T>* prediction = nullptr) const;

    std::vector<std::vector<T>> zero_grads() const;

private:
    struct Conv {
        int w = -1, b = -1;  // tensor indices
        int in = 0, out = 0, k = 0;
    };
    struct Level {
        Conv c1, c2;
    };

    std::span<const T> weight(int index) const { return weights_[index]; }
    void conv(const Conv& c, const Tensor<T>& in, Tensor<T>& out) const;
    void conv_back(const Conv& c, const Tensor<T>& in, const Tensor<T>& dout, std::vector<std::vector<T>>& grads,
                   Tensor<T>* din) const;
    void backward_features(const UNetTrace<T>& trace, const Tensor<T>& dfeatures,
                           std::vector<std::vector<T>>& grads) const;

    NetworkConfig config_;
    std::vector<std::vector<T>> weights_;
    std::vector<Level> encoder_, decoder_;
    Conv loc_head_;
    int fusion_w_ = -1, fusion_b_ = -1;
};

/// Converts a 3-channel image into a network input tensor.
template <typename T>
Tensor<T> to_tensor(const RasterImage& image);
/// Converts a mask stack (or its first `channels` planes) into a tensor.
template <typename T>
Tensor<T> to_tensor(const MaskStack& mask, int channels = MaskStack::kChannels);
MaskStack to_mask_stack(const Tensor<float>& t);

std::vector<float> forward_localization(const ModelParams& params, const RasterImage& pre);
MaskStack forward_siamese(const ModelParams& params, const RasterImage& pre, const RasterImage& post);

/// Arithmetic mean of the models' soft outputs (incremental, so k equal
/// outputs average to exactly that output).
MaskStack ensemble_predict(const std::vector<ModelParams>& models, const RasterImage& pre, const RasterImage& post);
MaskStack mean_of(const std::vector<MaskStack>& stacks);

// ---------------------------------------------------------------------------
// Decision rule
// ---------------------------------------------------------------------------

enum class DecisionMode { weighted_average, argmax };

struct DecisionRule {
    double loc_threshold = 0.5;
    DecisionMode mode = DecisionMode::weighted_average;

    void validate() const;
};

/// Grade map from a soft stack: 0 where loc < threshold; otherwise the
/// rounded (half-up) probability-weighted mean grade, or the argmax grade
/// (ties to the lower grade). All-zero damage probabilities give grade 1.
GradeMap decide(const MaskStack& pred, const DecisionRule& rule);

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace dmgnet
