#pragma once

// Command-line front end: run configuration, provenance records and the
// synth/train/eval/sweep/folds/adapt commands.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dmgnet/analysis.hpp"
#include "dmgnet/metrics.hpp"
#include "dmgnet/network.hpp"
#include "dmgnet/training.hpp"

namespace dmgnet {

struct RunConfig {
    std::filesystem::path manifest;
    std::filesystem::path output_dir = "out";
    std::vector<std::filesystem::path> checkpoints;  // empty: the ones `train` writes
    NetworkConfig network;
    TrainConfig train;
    DecisionRule decision;
    ResolutionSchedule resolutions;
    std::filesystem::path folds;
    std::string scheme = "fine";
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> ensemble_seeds;  // empty: {seed}
    std::string adapt_event;
    std::vector<double> shares{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    Aggregation aggregation = Aggregation::micro;

    std::vector<std::uint64_t> members() const;
    std::filesystem::path checkpoint_for(std::uint64_t member_seed) const;
    std::vector<std::filesystem::path> model_paths() const;
};

/// Parses a run configuration; relative paths resolve against `base_dir`.
/// Throws ConfigError naming the offending field.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

/// Seed of scene `index` in a dataset written by `synth --seed seed`.
std::uint64_t synth_scene_seed(std::uint64_t seed, int index);

/// Runs one command. Exit codes: 0 success, 1 runtime failure, 2 invalid
/// arguments or configuration.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dmgnet
