#include "dmgnet/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "dmgnet/metrics.hpp"

namespace dmgnet {

AugmentationConfig TrainConfig::default_augmentation() {
    AugmentationConfig a;
    a.hflip = true;
    a.vflip = true;
    a.rot90 = true;
    return a;
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0,1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in [0,1)");
    if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
    if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be non-negative");
    if (stage1_epochs < 0 || stage2_epochs < 0 || fine_tune_epochs < 0)
        throw std::invalid_argument("epoch counts must be non-negative");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
    if (oversample_damaged_factor < 1 || oversample_minor_major_factor < 1)
        throw std::invalid_argument("oversampling factors must be at least 1");
    loss.validate();
}

AdamState make_adam_state(const ModelParams& params) {
    AdamState s;
    for (const auto& t : params.tensors) {
        s.m.emplace_back(t.values.size(), 0.0);
        s.v.emplace_back(t.values.size(), 0.0);
    }
    return s;
}

void adamw_step(ModelParams& params, const ParamGrads& grads, AdamState& state, const TrainConfig& cfg,
                const std::vector<std::string>& trainable) {
    if (grads.size() != params.tensors.size() || state.m.size() != params.tensors.size())
        throw std::invalid_argument("gradient/state layout does not match the parameters");
    std::vector<bool> active(params.tensors.size(), trainable.empty());
    for (const auto& name : trainable) {
        bool found = false;
        for (std::size_t i = 0; i < params.tensors.size(); ++i)
            if (params.tensors[i].name == name) active[i] = found = true;
        if (!found) throw std::invalid_argument("unknown trainable parameter '" + name + "'");
    }
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        if (!active[i]) continue;
        if (grads[i].size() != params.tensors[i].values.size())
            throw std::invalid_argument("gradient for '" + params.tensors[i].name + "' has the wrong size");
        for (double g : grads[i])
            if (!std::isfinite(g))
                throw std::invalid_argument("non-finite gradient for parameter '" + params.tensors[i].name + "'");
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    const double lr = cfg.learning_rate;
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
        if (!active[i]) continue;
        auto& theta = params.tensors[i].values;
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < theta.size(); ++j) {
            theta[j] -= lr * cfg.weight_decay * theta[j];
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            theta[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

int sample_multiplicity(const std::array<bool, kNumGrades + 1>& present, const TrainConfig& cfg) {
    const bool damaged = present[2] || present[3] || present[4];
    const bool minor_major = present[2] || present[3];
    int k = 1;
    if (damaged) k *= cfg.oversample_damaged_factor;
    if (minor_major) k *= cfg.oversample_minor_major_factor;
    return k;
}

int sample_multiplicity(const GradeMap& labels, const TrainConfig& cfg) {
    return sample_multiplicity(grades_present(labels), cfg);
}

namespace {

std::mt19937_64 seeded(std::initializer_list<std::uint64_t> parts) {
    std::vector<std::uint32_t> words;
    for (auto p : parts) {
        words.push_back(static_cast<std::uint32_t>(p));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    return std::mt19937_64(seq);
}

// Stream tags keep the random draws of different training phases apart.
constexpr std::uint64_t kStage1 = 1, kStage2 = 2, kFineTune = 3, kSelection = 4;

}  // namespace

std::vector<std::size_t> build_sampler(const std::vector<std::array<bool, kNumGrades + 1>>& grades,
                                       const TrainConfig& cfg, int epoch) {
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < grades.size(); ++i) order.insert(order.end(), sample_multiplicity(grades[i], cfg), i);
    auto rng = seeded({cfg.seed, static_cast<std::uint64_t>(epoch)});
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

std::vector<std::size_t> build_sampler(const std::vector<ScenePair>& scenes, const TrainConfig& cfg, int epoch) {
    std::vector<std::array<bool, kNumGrades + 1>> grades;
    grades.reserve(scenes.size());
    for (const auto& s : scenes) grades.push_back(grades_present(s.labels));
    return build_sampler(grades, cfg, epoch);
}

std::string LossTrace::to_csv() const {
    std::ostringstream os;
    os.precision(9);
    os << "epoch,split,loss,loc_f1,macro_f1\n";
    for (const auto& r : rows) os << r.epoch << ',' << r.split << ',' << r.loss << ',' << r.loc_f1 << ',' << r.macro_f1 << '\n';
    return os.str();
}

namespace {

enum class Stage { localization, siamese };

GradeMap loc_map(const Tensor<float>& prob) {
    GradeMap g(prob.width, prob.height);
    for (std::size_t i = 0; i < g.codes.size(); ++i) g.codes[i] = prob.data[i] >= 0.5f ? 1 : 0;
    return g;
}

GradeMap loc_truth(const GradeMap& labels) {
    GradeMap g(labels.width, labels.height);
    for (std::size_t i = 0; i < g.codes.size(); ++i) g.codes[i] = labels.codes[i] != 0 ? 1 : 0;
    return g;
}

struct SampleResult {
    LossTerms loss;
    GradeMap pred;
    GradeMap truth;
};

// Held-out loss and metrics for one epoch.
LossTraceRow score_held_out(const ModelParams& params, const std::vector<ScenePair>& scenes, Stage stage,
                            const LossConfig& loss) {
    const Network<float> net(params);
    const int channels = stage == Stage::localization ? 1 : MaskStack::kChannels;
    std::vector<double> losses(scenes.size());
    std::vector<GradeMap> pred(scenes.size()), truth(scenes.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < scenes.size(); ++i) {
        const auto& s = scenes[i];
        const auto target = to_tensor<float>(mask_from_grades(s.labels), channels);
        Tensor<float> prob;
        if (stage == Stage::localization) {
            prob = net.localize(to_tensor<float>(s.pre));
            pred[i] = loc_map(prob);
            truth[i] = loc_truth(s.labels);
        } else {
            prob = net.fuse(net.features(to_tensor<float>(s.pre)), net.features(to_tensor<float>(s.post)));
            pred[i] = decide(to_mask_stack(prob), DecisionRule{});
            truth[i] = s.labels;
        }
        losses[i] = combined_loss<float>(prob.span(), target.span(), channels, loss, {}).total;
    }
    const auto report = evaluate_maps(pred, truth, GradeScheme::fine());
    LossTraceRow row;
    row.split = "test";
    row.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(scenes.size());
    row.loc_f1 = report.localization.f1;
    row.macro_f1 = stage == Stage::localization ? 0.0 : report.f1_cls;
    return row;
}

ModelParams run_training(ModelParams params, const std::vector<ScenePair>& scenes, const TrainConfig& cfg, int epochs,
                         Stage stage, std::uint64_t stream, const TrainMonitor& monitor) {
    cfg.validate();
    if (epochs == 0) return params;
    if (scenes.empty()) throw std::invalid_argument("training needs at least one scene");
    const auto trainable =
        stage == Stage::localization ? trainable_for_localization(params) : trainable_for_siamese(params);
    const int channels = stage == Stage::localization ? 1 : MaskStack::kChannels;

    std::vector<MaskStack> targets;
    std::vector<std::array<bool, kNumGrades + 1>> present;
    for (const auto& s : scenes) {
        s.validate();
        if (s.pre.width != params.config.input_side || s.pre.height != params.config.input_side)
            throw std::invalid_argument("scene '" + s.scene_id + "' does not match the network input side");
        targets.push_back(mask_from_grades(s.labels));
        present.push_back(grades_present(s.labels));
    }

    AugmentationConfig aug = cfg.augmentation;
    aug.seed = seeded({cfg.seed, cfg.augmentation.seed, stream})();
    AdamState state = make_adam_state(params);
    std::uint64_t drawn = 0;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::vector<std::size_t> order;
        if (stage == Stage::localization) {
            order.resize(scenes.size());
            std::iota(order.begin(), order.end(), 0);
            auto rng = seeded({cfg.seed, stream, static_cast<std::uint64_t>(epoch)});
            std::shuffle(order.begin(), order.end(), rng);
        } else {
            TrainConfig sc = cfg;
            sc.seed = seeded({cfg.seed, stream})();
            order = build_sampler(present, sc, epoch);
        }

        double loss_sum = 0.0;
        PixelCounts counts;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t b = std::min<std::size_t>(cfg.batch_size, order.size() - start);
            const Network<float> net(params);
            std::vector<std::vector<std::vector<float>>> grads(b);
            std::vector<SampleResult> results(b);
#pragma omp parallel for schedule(static)
            for (std::size_t j = 0; j < b; ++j) {
                const auto& scene = scenes[order[start + j]];
                const MaskStack& target = targets[order[start + j]];
                const std::uint64_t counter = drawn + j;
                const RasterImage& post = stage == Stage::localization ? scene.pre : scene.post;
                AugmentedSample sample = aug.any_geometric() || aug.any_photometric()
                                             ? augment(scene.pre, post, target, aug, counter)
                                             : AugmentedSample{scene.pre, post, target};
                grads[j] = net.zero_grads();
                Tensor<float> prob;
                const auto t = to_tensor<float>(sample.mask, channels);
                auto& r = results[j];
                if (stage == Stage::localization) {
                    r.loss = net.localization_loss_and_grad(to_tensor<float>(sample.pre), t, cfg.loss, grads[j], &prob);
                    r.pred = loc_map(prob);
                    r.truth = loc_truth(grades_from_mask(sample.mask));
                } else {
                    r.loss = net.siamese_loss_and_grad(to_tensor<float>(sample.pre), to_tensor<float>(sample.post), t,
                                                       cfg.loss, grads[j], &prob);
                    r.pred = decide(to_mask_stack(prob), DecisionRule{});
                    r.truth = grades_from_mask(sample.mask);
                }
            }
            drawn += b;

            ParamGrads total = zero_grads(params);
            for (std::size_t j = 0; j < b; ++j) {
                if (!std::isfinite(results[j].loss.total))
                    throw std::runtime_error("training diverged: non-finite loss at epoch " + std::to_string(epoch));
                loss_sum += results[j].loss.total;
                counts.add(results[j].pred, results[j].truth);
                for (std::size_t p = 0; p < total.size(); ++p)
                    for (std::size_t k = 0; k < total[p].size(); ++k) total[p][k] += grads[j][p][k];
            }
            const double inv = 1.0 / static_cast<double>(b);
            for (auto& g : total)
                for (double& v : g) v *= inv;
            adamw_step(params, total, state, cfg, trainable);
        }

        if (monitor.trace) {
            const auto report = make_report(counts, GradeScheme::fine());
            monitor.trace->rows.push_back({epoch, "train", loss_sum / static_cast<double>(order.size()),
                                           report.localization.f1,
                                           stage == Stage::localization ? 0.0 : report.f1_cls});
            if (monitor.held_out && !monitor.held_out->empty()) {
                auto row = score_held_out(params, *monitor.held_out, stage, cfg.loss);
                row.epoch = epoch;
                monitor.trace->rows.push_back(row);
            }
        }
    }
    return params;
}

}  // namespace

ModelParams train_stage1_localization(const std::vector<ScenePair>& scenes, const NetworkConfig& net,
                                      const TrainConfig& cfg, TrainMonitor monitor) {
    return run_training(init_localization_params(net), scenes, cfg, cfg.stage1_epochs, Stage::localization, kStage1,
                        monitor);
}

ModelParams train_stage2_siamese(const std::vector<ScenePair>& scenes, const ModelParams& stage1,
                                 const TrainConfig& cfg, TrainMonitor monitor) {
    ModelParams params = transfer_localization_weights(stage1, stage1.config.seed);
    return run_training(std::move(params), scenes, cfg, cfg.stage2_epochs, Stage::siamese, kStage2, monitor);
}

ModelParams continue_training(const ModelParams& params, const std::vector<ScenePair>& scenes,
                              const TrainConfig& cfg, TrainMonitor monitor) {
    if (!params.has_fusion()) throw std::invalid_argument("fine-tuning needs a Siamese parameter set");
    return run_training(params, scenes, cfg, cfg.fine_tune_epochs, Stage::siamese, kFineTune, monitor);
}

std::vector<std::size_t> fine_tune_selection(std::size_t n, double share, std::uint64_t seed) {
    if (!(share >= 0.0 && share <= 0.5)) throw std::invalid_argument("fine-tuning share must lie in [0, 0.5]");
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    auto rng = seeded({seed, kSelection});
    std::shuffle(perm.begin(), perm.end(), rng);
    // Tolerance guards products such as 0.29 * 100 = 28.999999999999996.
    const auto k = static_cast<std::size_t>(std::floor(share * static_cast<double>(n) + 1e-9));
    perm.resize(k);
    return perm;
}

ModelParams fine_tune(const ModelParams& params, const std::vector<ScenePair>& scenes, double share,
                      const TrainConfig& cfg, std::vector<std::size_t>* selected) {
    const auto pick = fine_tune_selection(scenes.size(), share, cfg.seed);
    if (selected) *selected = pick;
    if (pick.empty()) return params;
    std::vector<ScenePair> subset;
    for (auto i : pick) subset.push_back(scenes[i]);
    return continue_training(params, subset, cfg);
}

ModelParams train_two_stage(const std::vector<ScenePair>& scenes, const NetworkConfig& net, const TrainConfig& cfg,
                            LossTrace* stage1_trace, LossTrace* stage2_trace,
                            const std::vector<ScenePair>* held_out) {
    const auto stage1 = train_stage1_localization(scenes, net, cfg, {held_out, stage1_trace});
    return train_stage2_siamese(scenes, stage1, cfg, {held_out, stage2_trace});
}

namespace {

std::vector<ScenePair> training_split(const DatasetManifest& manifest) {
    std::vector<ScenePair> out;
    for (std::size_t i = 0; i < manifest.scenes.size(); ++i)
        if (manifest.scenes[i].split == Split::train) out.push_back(load_scene(manifest, i));
    if (out.empty()) throw std::invalid_argument("manifest has no training scenes");
    return out;
}

}  // namespace

ModelParams train_stage1_localization(const DatasetManifest& manifest, const NetworkConfig& net,
                                      const TrainConfig& cfg) {
    return train_stage1_localization(training_split(manifest), net, cfg);
}

ModelParams train_stage2_siamese(const DatasetManifest& manifest, const ModelParams& stage1, const TrainConfig& cfg) {
    return train_stage2_siamese(training_split(manifest), stage1, cfg);
}

}  // namespace dmgnet
