#pragma once

// Experiment harnesses: resolution sweeps (symmetric and over every
// pre/post pair), leave-events-out cross-validation and fine-tuning
// adaptation curves.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dmgnet/metrics.hpp"
#include "dmgnet/network.hpp"
#include "dmgnet/raster_ops.hpp"
#include "dmgnet/training.hpp"

namespace dmgnet {

// ---------------------------------------------------------------------------
// Resolution sweeps
// ---------------------------------------------------------------------------

struct SweepSeries {
    ResolutionSchedule schedule;
    std::vector<MetricsReport> reports;  // one per schedule entry

    /// Columns r_pre,r_post,metric,value.
    std::string to_csv() const;
};

struct FrontierGrid {
    ResolutionSchedule schedule;
    std::vector<MetricsReport> cells;  // row-major: index = i_pre * n + j_post

    std::size_t side() const { return schedule.size(); }
    const MetricsReport& at(std::size_t i_pre, std::size_t j_post) const { return cells[i_pre * side() + j_post]; }
    /// One metric (as named by metric_values) over the grid, row-major.
    std::vector<double> values(const std::string& metric) const;
    std::string to_csv() const;
};

/// Degrades pre and post to the same r for every schedule entry and evaluates.
SweepSeries symmetric_sweep(const std::vector<ModelParams>& models, const std::vector<ScenePair>& scenes,
                            const ResolutionSchedule& schedule, const DecisionRule& rule = {},
                            const GradeScheme& scheme = GradeScheme::fine());

/// Evaluates every (r_pre, r_post) pair. Each U-Net pass is computed once per
/// scene and resolution and shared by the cells that use it.
FrontierGrid asymmetric_sweep(const std::vector<ModelParams>& models, const std::vector<ScenePair>& scenes,
                              const ResolutionSchedule& schedule, const DecisionRule& rule = {},
                              const GradeScheme& scheme = GradeScheme::fine());

// ---------------------------------------------------------------------------
// Event cross-validation
// ---------------------------------------------------------------------------

struct Fold {
    std::string name;
    std::vector<std::string> events;

    bool operator==(const Fold&) const = default;
};

struct FoldSpec {
    std::vector<Fold> folds;

    /// Throws std::invalid_argument if folds overlap, name unknown events or
    /// leave no training events.
    void validate(const std::vector<std::string>& available_events) const;
    bool operator==(const FoldSpec&) const = default;
};

FoldSpec load_fold_spec(const std::filesystem::path& path);
void save_fold_spec(const FoldSpec& spec, const std::filesystem::path& path);

struct FoldOutcome {
    std::string name;
    std::vector<std::string> train_events;
    std::vector<std::string> test_events;
    std::vector<std::string> train_scenes;
    std::vector<std::string> test_scenes;
    MetricsReport report;
};

struct CrossValidationResult {
    std::vector<FoldOutcome> folds;
    MetricsReport average;  // arithmetic mean of the per-fold metric values
};

/// Trains both stages on the events outside each fold and evaluates on the fold's events.
CrossValidationResult event_cross_validation(const std::vector<ScenePair>& scenes, const FoldSpec& folds,
                                             const NetworkConfig& net, const TrainConfig& cfg,
                                             const DecisionRule& rule = {},
                                             const GradeScheme& scheme = GradeScheme::fine());

// ---------------------------------------------------------------------------
// Adaptation
// ---------------------------------------------------------------------------

/// A(s) = F1(s) - F1(0).
double adaptation(double f1_share, double f1_baseline);

struct AdaptationPoint {
    double share = 0.0;
    std::vector<std::string> subset;  // fine-tuning scene ids
    MetricsReport report;
    std::vector<std::pair<std::string, double>> gains;  // A per metric, aligned with metric_values
};

struct AdaptationCurve {
    std::vector<std::string> test_scenes;
    std::vector<std::string> pool_scenes;
    std::vector<AdaptationPoint> points;  // ascending share, starting at 0

    /// Columns s,metric,F1,A.
    std::string to_csv() const;
};

/// Splits the new event into a fixed test half (ceil(N/2) scenes, seeded by
/// cfg.seed) and a pool; share s fine-tunes on the first floor(s*N) pool
/// scenes, so subsets are nested and never touch the test half.
AdaptationCurve adaptation_study(const ModelParams& params, const std::vector<ScenePair>& scenes,
                                 const std::vector<double>& shares, const TrainConfig& cfg,
                                 const DecisionRule& rule = {}, const GradeScheme& scheme = GradeScheme::fine());

}  // namespace dmgnet
