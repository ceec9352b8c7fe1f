#include "dmgnet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace dmgnet {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void check_inputs(const std::vector<ModelParams>& models, const std::vector<ScenePair>& scenes,
                  const ResolutionSchedule& schedule) {
    if (models.empty()) throw std::invalid_argument("sweep needs at least one model");
    if (scenes.empty()) throw std::invalid_argument("sweep needs at least one scene");
    const double native = scenes.front().pre.gsd;
    for (const auto& s : scenes)
        if (s.pre.gsd != native || s.post.gsd != native)
            throw std::invalid_argument("sweep scenes must share one native gsd");
    schedule.validate(native);
}

using Cell = std::pair<std::size_t, std::size_t>;

// Pooled counts per (pre, post) cell.
std::vector<PixelCounts> sweep_counts(const std::vector<ModelParams>& models, const std::vector<ScenePair>& scenes,
                                      const ResolutionSchedule& schedule, const std::vector<Cell>& cells,
                                      const DecisionRule& rule) {
    check_inputs(models, scenes, schedule);
    rule.validate();
    std::vector<Network<float>> nets;
    nets.reserve(models.size());
    for (const auto& m : models) nets.emplace_back(m);
    const std::size_t n = schedule.size();
    std::vector<bool> need_pre(n, false), need_post(n, false);
    for (const auto& [i, j] : cells) need_pre[i] = need_post[j] = true;

    std::vector<std::vector<PixelCounts>> per_scene(scenes.size(), std::vector<PixelCounts>(cells.size()));
#pragma omp parallel for schedule(dynamic)
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const auto& scene = scenes[s];
        auto pass = [&](const RasterImage& img, const std::vector<bool>& need) {
            std::vector<std::vector<Tensor<float>>> f(nets.size(), std::vector<Tensor<float>>(n));
            for (std::size_t r = 0; r < n; ++r) {
                if (!need[r]) continue;
                const auto input = to_tensor<float>(degrade_restore(img, schedule.gsd[r]));
                for (std::size_t m = 0; m < nets.size(); ++m) f[m][r] = nets[m].features(input);
            }
            return f;
        };
        const auto fpre = pass(scene.pre, need_pre);
        const auto fpost = pass(scene.post, need_post);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto [i, j] = cells[c];
            std::vector<MaskStack> outs;
            for (std::size_t m = 0; m < nets.size(); ++m) outs.push_back(to_mask_stack(nets[m].fuse(fpre[m][i], fpost[m][j])));
            per_scene[s][c] = count_pixels(decide(mean_of(outs), rule), scene.labels);
        }
    }
    std::vector<PixelCounts> total(cells.size());
    for (const auto& sc : per_scene)
        for (std::size_t c = 0; c < cells.size(); ++c) total[c] += sc[c];
    return total;
}

void append_rows(std::ostringstream& os, double r_pre, double r_post, const MetricsReport& report) {
    for (const auto& [name, value] : metric_values(report))
        os << num(r_pre) << ',' << num(r_post) << ',' << name << ',' << num(value) << '\n';
}

}  // namespace

std::string SweepSeries::to_csv() const {
    std::ostringstream os;
    os << "r_pre,r_post,metric,value\n";
    for (std::size_t i = 0; i < reports.size(); ++i) append_rows(os, schedule.gsd[i], schedule.gsd[i], reports[i]);
    return os.str();
}

std::vector<double> FrontierGrid::values(const std::string& metric) const {
    std::vector<double> out;
    for (const auto& c : cells) {
        bool found = false;
        for (const auto& [name, value] : metric_values(c))
            if (name == metric) {
                out.push_back(value);
                found = true;
            }
        if (!found) throw std::invalid_argument("unknown metric '" + metric + "'");
    }
    return out;
}

std::string FrontierGrid::to_csv() const {
    std::ostringstream os;
    os << "r_pre,r_post,metric,value\n";
    for (std::size_t i = 0; i < side(); ++i)
        for (std::size_t j = 0; j < side(); ++j) append_rows(os, schedule.gsd[i], schedule.gsd[j], at(i, j));
    return os.str();
}

SweepSeries symmetric_sweep(const std::vector<ModelParams>& models, const std::vector<ScenePair>& scenes,
                            const ResolutionSchedule& schedule, const DecisionRule& rule, const GradeScheme& scheme) {
    std::vector<Cell> cells;
    for (std::size_t r = 0; r < schedule.size(); ++r) cells.emplace_back(r, r);
    const auto counts = sweep_counts(models, scenes, schedule, cells, rule);
    SweepSeries out{schedule, {}};
    for (const auto& c : counts) out.reports.push_back(make_report(c, scheme, scenes.size()));
    return out;
}

FrontierGrid asymmetric_sweep(const std::vector<ModelParams>& models, const std::vector<ScenePair>& scenes,
                              const ResolutionSchedule& schedule, const DecisionRule& rule, const GradeScheme& scheme) {
    std::vector<Cell> cells;
    for (std::size_t i = 0; i < schedule.size(); ++i)
        for (std::size_t j = 0; j < schedule.size(); ++j) cells.emplace_back(i, j);
    const auto counts = sweep_counts(models, scenes, schedule, cells, rule);
    FrontierGrid out{schedule, {}};
    for (const auto& c : counts) out.cells.push_back(make_report(c, scheme, scenes.size()));
    return out;
}

// ---------------------------------------------------------------------------

void FoldSpec::validate(const std::vector<std::string>& available_events) const {
    if (folds.empty()) throw std::invalid_argument("fold spec has no folds");
    const std::set<std::string> available(available_events.begin(), available_events.end());
    std::set<std::string> seen;
    for (const auto& f : folds) {
        if (f.events.empty()) throw std::invalid_argument("fold '" + f.name + "' lists no events");
        for (const auto& e : f.events) {
            if (!available.count(e)) throw std::invalid_argument("fold '" + f.name + "' names unknown event '" + e + "'");
            if (!seen.insert(e).second) throw std::invalid_argument("event '" + e + "' appears in more than one fold");
        }
        if (f.events.size() >= available.size())
            throw std::invalid_argument("fold '" + f.name + "' holds out every event, leaving nothing to train on");
    }
}

FoldSpec load_fold_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open fold spec " + path.string());
    const auto j = nlohmann::json::parse(in);
    FoldSpec spec;
    for (const auto& jf : j.at("folds"))
        spec.folds.push_back({jf.at("name").get<std::string>(), jf.at("events").get<std::vector<std::string>>()});
    return spec;
}

void save_fold_spec(const FoldSpec& spec, const std::filesystem::path& path) {
    nlohmann::json j;
    j["folds"] = nlohmann::json::array();
    for (const auto& f : spec.folds) j["folds"].push_back({{"name", f.name}, {"events", f.events}});
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write fold spec " + path.string());
    out << j.dump(2) << '\n';
}

CrossValidationResult event_cross_validation(const std::vector<ScenePair>& scenes, const FoldSpec& folds,
                                             const NetworkConfig& net, const TrainConfig& cfg,
                                             const DecisionRule& rule, const GradeScheme& scheme) {
    std::set<std::string> events;
    for (const auto& s : scenes) events.insert(s.event_id);
    folds.validate({events.begin(), events.end()});

    CrossValidationResult result;
    std::vector<MetricsReport> reports;
    for (const auto& fold : folds.folds) {
        const std::set<std::string> held(fold.events.begin(), fold.events.end());
        std::vector<ScenePair> train, test;
        FoldOutcome outcome;
        outcome.name = fold.name;
        for (const auto& e : events) (held.count(e) ? outcome.test_events : outcome.train_events).push_back(e);
        for (const auto& s : scenes) {
            if (held.count(s.event_id)) {
                test.push_back(s);
                outcome.test_scenes.push_back(s.scene_id);
            } else {
                train.push_back(s);
                outcome.train_scenes.push_back(s.scene_id);
            }
        }
        const auto params = train_two_stage(train, net, cfg);
        outcome.report = evaluate(test, {params}, rule, scheme);
        reports.push_back(outcome.report);
        result.folds.push_back(std::move(outcome));
    }
    result.average = average_reports(reports);
    return result;
}

// ---------------------------------------------------------------------------

double adaptation(double f1_share, double f1_baseline) { return f1_share - f1_baseline; }

std::string AdaptationCurve::to_csv() const {
    std::ostringstream os;
    os << "s,metric,F1,A\n";
    for (const auto& p : points) {
        const auto values = metric_values(p.report);
        for (std::size_t k = 0; k < values.size(); ++k)
            os << num(p.share) << ',' << values[k].first << ',' << num(values[k].second) << ','
               << num(p.gains[k].second) << '\n';
    }
    return os.str();
}

AdaptationCurve adaptation_study(const ModelParams& params, const std::vector<ScenePair>& scenes,
                                 const std::vector<double>& shares, const TrainConfig& cfg, const DecisionRule& rule,
                                 const GradeScheme& scheme) {
    std::vector<double> s = shares;
    for (double v : s)
        if (!(v >= 0.0 && v <= 0.5)) throw std::invalid_argument("adaptation shares must lie in [0, 0.5]");
    s.push_back(0.0);
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    if (scenes.size() < 2) throw std::invalid_argument("adaptation needs at least two scenes of the new event");

    const std::size_t n = scenes.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32), 0xADA7u};
    std::mt19937_64 rng(seq);
    std::shuffle(perm.begin(), perm.end(), rng);
    const std::size_t n_test = (n + 1) / 2;

    AdaptationCurve curve;
    std::vector<ScenePair> test, pool;
    for (std::size_t k = 0; k < n; ++k) {
        const auto& sc = scenes[perm[k]];
        if (k < n_test) {
            test.push_back(sc);
            curve.test_scenes.push_back(sc.scene_id);
        } else {
            pool.push_back(sc);
            curve.pool_scenes.push_back(sc.scene_id);
        }
    }

    std::vector<std::pair<std::string, double>> baseline;
    for (double share : s) {
        const auto k = static_cast<std::size_t>(std::floor(share * static_cast<double>(n) + 1e-9));
        AdaptationPoint p;
        p.share = share;
        std::vector<ScenePair> subset(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
        for (const auto& sc : subset) p.subset.push_back(sc.scene_id);
        const ModelParams tuned = subset.empty() ? params : continue_training(params, subset, cfg);
        p.report = evaluate(test, {tuned}, rule, scheme);
        const auto values = metric_values(p.report);
        if (baseline.empty()) baseline = values;
        for (std::size_t m = 0; m < values.size(); ++m)
            p.gains.emplace_back(values[m].first, adaptation(values[m].second, baseline[m].second));
        curve.points.push_back(std::move(p));
    }
    return curve;
}

}  // namespace dmgnet
