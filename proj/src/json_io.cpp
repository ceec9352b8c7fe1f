#include "dmgnet/json_io.hpp"

#include <set>

namespace dmgnet {

namespace {

using nlohmann::json;

class Reader {
public:
    Reader(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
        if (!j_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        known_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError(prefix_ + key, "wrong type");
        }
    }

    const json* sub(const std::string& key) {
        known_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!known_.count(key)) throw ConfigError(prefix_ + key, "unknown key");
    }

private:
    const json& j_;
    std::string prefix_;
    std::set<std::string> known_;
};

json range_json(const Range& r) { return json::array({r.lo, r.hi}); }

Range range_from(const json& j, const std::string& field) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        throw ConfigError(field, "expected [lo, hi]");
    return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

json to_json(const NetworkConfig& c) {
    return {{"input_side", c.input_side},
            {"widths", c.widths},
            {"head_channels", c.head_channels},
            {"in_channels", c.in_channels},
            {"seed", c.seed}};
}

NetworkConfig network_config_from_json(const json& j, NetworkConfig c) {
    Reader r(j, "network.");
    r.get("input_side", c.input_side);
    r.get("widths", c.widths);
    r.get("head_channels", c.head_channels);
    r.get("in_channels", c.in_channels);
    r.get("seed", c.seed);
    r.finish();
    return c;
}

json to_json(const LossConfig& c) {
    return {{"gamma", c.gamma}, {"dice_weight", c.dice_weight}, {"focal_weight", c.focal_weight}, {"epsilon", c.epsilon}};
}

LossConfig loss_config_from_json(const json& j, LossConfig c) {
    Reader r(j, "train.loss.");
    r.get("gamma", c.gamma);
    r.get("dice_weight", c.dice_weight);
    r.get("focal_weight", c.focal_weight);
    r.get("epsilon", c.epsilon);
    r.finish();
    return c;
}

json to_json(const AugmentationConfig& c) {
    return {{"hflip", c.hflip},
            {"vflip", c.vflip},
            {"flip_probability", c.flip_probability},
            {"rot90", c.rot90},
            {"rotate", c.rotate},
            {"max_rotation_deg", c.max_rotation_deg},
            {"shift", c.shift},
            {"max_shift_px", c.max_shift_px},
            {"crop", c.crop},
            {"min_crop_fraction", c.min_crop_fraction},
            {"hue", c.hue},
            {"max_hue_shift_deg", c.max_hue_shift_deg},
            {"noise", c.noise},
            {"noise_sigma", c.noise_sigma},
            {"blur", c.blur},
            {"max_blur_sigma", c.max_blur_sigma},
            {"blur_probability", c.blur_probability},
            {"saturation", c.saturation},
            {"saturation_scale", range_json(c.saturation_scale)},
            {"brightness", c.brightness},
            {"brightness_scale", range_json(c.brightness_scale)},
            {"contrast", c.contrast},
            {"contrast_scale", range_json(c.contrast_scale)},
            {"seed", c.seed}};
}

AugmentationConfig augmentation_from_json(const json& j, AugmentationConfig c) {
    const std::string p = "train.augmentation.";
    Reader r(j, p);
    r.get("hflip", c.hflip);
    r.get("vflip", c.vflip);
    r.get("flip_probability", c.flip_probability);
    r.get("rot90", c.rot90);
    r.get("rotate", c.rotate);
    r.get("max_rotation_deg", c.max_rotation_deg);
    r.get("shift", c.shift);
    r.get("max_shift_px", c.max_shift_px);
    r.get("crop", c.crop);
    r.get("min_crop_fraction", c.min_crop_fraction);
    r.get("hue", c.hue);
    r.get("max_hue_shift_deg", c.max_hue_shift_deg);
    r.get("noise", c.noise);
    r.get("noise_sigma", c.noise_sigma);
    r.get("blur", c.blur);
    r.get("max_blur_sigma", c.max_blur_sigma);
    r.get("blur_probability", c.blur_probability);
    r.get("saturation", c.saturation);
    if (const auto* s = r.sub("saturation_scale")) c.saturation_scale = range_from(*s, p + "saturation_scale");
    r.get("brightness", c.brightness);
    if (const auto* s = r.sub("brightness_scale")) c.brightness_scale = range_from(*s, p + "brightness_scale");
    r.get("contrast", c.contrast);
    if (const auto* s = r.sub("contrast_scale")) c.contrast_scale = range_from(*s, p + "contrast_scale");
    r.get("seed", c.seed);
    r.finish();
    return c;
}

json to_json(const TrainConfig& c) {
    return {{"learning_rate", c.learning_rate},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"eps", c.eps},
            {"weight_decay", c.weight_decay},
            {"stage1_epochs", c.stage1_epochs},
            {"stage2_epochs", c.stage2_epochs},
            {"fine_tune_epochs", c.fine_tune_epochs},
            {"batch_size", c.batch_size},
            {"oversample_damaged_factor", c.oversample_damaged_factor},
            {"oversample_minor_major_factor", c.oversample_minor_major_factor},
            {"seed", c.seed},
            {"loss", to_json(c.loss)},
            {"augmentation", to_json(c.augmentation)}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig c) {
    Reader r(j, "train.");
    r.get("learning_rate", c.learning_rate);
    r.get("beta1", c.beta1);
    r.get("beta2", c.beta2);
    r.get("eps", c.eps);
    r.get("weight_decay", c.weight_decay);
    r.get("stage1_epochs", c.stage1_epochs);
    r.get("stage2_epochs", c.stage2_epochs);
    r.get("fine_tune_epochs", c.fine_tune_epochs);
    r.get("batch_size", c.batch_size);
    r.get("oversample_damaged_factor", c.oversample_damaged_factor);
    r.get("oversample_minor_major_factor", c.oversample_minor_major_factor);
    r.get("seed", c.seed);
    if (const auto* s = r.sub("loss")) c.loss = loss_config_from_json(*s, c.loss);
    if (const auto* s = r.sub("augmentation")) c.augmentation = augmentation_from_json(*s, c.augmentation);
    r.finish();
    return c;
}

json to_json(const DecisionRule& d) {
    return {{"loc_threshold", d.loc_threshold},
            {"mode", d.mode == DecisionMode::argmax ? "argmax" : "weighted_average"}};
}

DecisionRule decision_rule_from_json(const json& j, DecisionRule d) {
    Reader r(j, "decision.");
    r.get("loc_threshold", d.loc_threshold);
    std::string mode = d.mode == DecisionMode::argmax ? "argmax" : "weighted_average";
    r.get("mode", mode);
    if (mode == "argmax") d.mode = DecisionMode::argmax;
    else if (mode == "weighted_average") d.mode = DecisionMode::weighted_average;
    else throw ConfigError("decision.mode", "expected weighted_average or argmax");
    r.finish();
    return d;
}

json to_json(const F1Stats& s) {
    return {{"f1", s.f1},         {"precision", s.precision}, {"recall", s.recall}, {"tp", s.tp},
            {"fp", s.fp},         {"fn", s.fn},               {"defined", s.defined}};
}

json to_json(const MetricsReport& r) {
    json grades = json::array();
    for (std::size_t g = 0; g < r.per_grade.size(); ++g) {
        json jg = to_json(r.per_grade[g]);
        jg["label"] = r.grade_labels[g];
        jg["available"] = static_cast<bool>(r.grade_available[g]);
        grades.push_back(std::move(jg));
    }
    json confusion = json::array();
    for (int t = 1; t <= r.confusion.grades; ++t) confusion.push_back(r.confusion.rows[t]);
    json counts = json::array();
    for (const auto& row : r.counts.cells) counts.push_back(row);
    return {{"scheme", r.scheme},
            {"scenes", r.scenes},
            {"F1_loc", to_json(r.localization)},
            {"per_grade", std::move(grades)},
            {"F1_Cb", to_json(r.binary)},
            {"F1_cls", r.f1_cls},
            {"score", r.score},
            {"confusion", {{"columns", "missed then predicted grades"}, {"rows", std::move(confusion)}}},
            {"pixel_counts", {{"matrix", std::move(counts)}, {"unclassified", r.counts.unclassified}}}};
}

json to_json(const CrossValidationResult& r) {
    json folds = json::array();
    for (const auto& f : r.folds)
        folds.push_back({{"name", f.name},
                         {"train_events", f.train_events},
                         {"test_events", f.test_events},
                         {"train_scenes", f.train_scenes},
                         {"test_scenes", f.test_scenes},
                         {"report", to_json(f.report)}});
    return {{"folds", std::move(folds)}, {"average", to_json(r.average)}};
}

}  // namespace dmgnet
