#pragma once

// Dice and focal losses and their per-channel weighted combination.
//
// Both losses take a prediction p in [0,1] and a binary target g. The dice
// coefficient is 2*sum(p*g) / (sum(p^2) + sum(g^2) + eps); the trained
// objective uses 1 - coefficient. The focal term is the pixel mean of
// -(1 - r)^gamma * log(r) with r = (1-g)(1-p) + g*p, p clamped to
// [eps, 1-eps] before the log.

#include <span>
#include <vector>

#include "dmgnet/types.hpp"

namespace dmgnet {

struct LossConfig {
    double gamma = 2.0;
    double dice_weight = 1.0;
    double focal_weight = 1.0;
    double epsilon = 1e-6;

    void validate() const;
};

double dice_coefficient(std::span<const double> p, std::span<const double> g, double epsilon = 1e-6);
double focal_loss(std::span<const double> p, std::span<const double> g, double gamma, double epsilon = 1e-6);

struct LossTerms {
    double dice = 0.0;   // sum over channels of (1 - coefficient)
    double focal = 0.0;  // sum over channels of the focal mean
    double total = 0.0;  // dice_weight * dice + focal_weight * focal
};

/// Planar multi-channel loss. `pred` and `target` hold `channels` planes of
/// equal size. Writes d(total)/d(pred) into `grad` when it is non-empty.
template <typename T>
LossTerms combined_loss(std::span<const T> pred, std::span<const T> target, int channels, const LossConfig& cfg,
                        std::span<T> grad);

struct LossResult {
    double loss = 0.0;
    MaskStack gradient;
};

/// Loss over all five channels of a prediction/target stack.
LossResult combined_loss(const MaskStack& pred, const MaskStack& target, const LossConfig& cfg);

}  // namespace dmgnet
