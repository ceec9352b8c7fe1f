#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "dmgnet/training.hpp"

using namespace dmgnet;

namespace {

ModelParams single_param(double value) {
    ModelParams p;
    p.tensors.push_back({"theta", {1}, {value}});
    return p;
}

// Textbook Adam (no decay), written out independently of adamw_step.
struct RefAdam {
    double m = 0, v = 0;
    int t = 0;
    double step(double theta, double g, double lr, double b1, double b2, double eps) {
        ++t;
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g * g;
        const double mh = m / (1 - std::pow(b1, t));
        const double vh = v / (1 - std::pow(b2, t));
        return theta - lr * mh / (std::sqrt(vh) + eps);
    }
};

std::vector<ScenePair> tiny_scenes(int n, std::uint64_t seed0) {
    std::vector<ScenePair> out;
    for (int i = 0; i < n; ++i) {
        SyntheticSceneSpec spec;
        spec.seed = seed0 + i;
        spec.side = 32;
        spec.n_buildings = 3;
        spec.min_building = 5;
        spec.max_building = 9;
        out.push_back(generate_synthetic_scene(spec).scene);
    }
    return out;
}

NetworkConfig tiny_net() {
    NetworkConfig c;
    c.input_side = 32;
    c.widths = {4, 8};
    c.seed = 3;
    return c;
}

TrainConfig quick_cfg() {
    TrainConfig c;
    c.learning_rate = 5e-3;
    c.stage1_epochs = 2;
    c.stage2_epochs = 2;
    c.fine_tune_epochs = 1;
    c.batch_size = 3;
    c.seed = 5;
    return c;
}

}  // namespace

TEST_CASE("AdamW first step worked example") {
    auto p = single_param(0.0);
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.weight_decay = 0.0;
    auto state = make_adam_state(p);
    adamw_step(p, {{1.0}}, state, cfg);
    CHECK(std::abs(p.tensors[0].values[0] - (-0.1 / (1.0 + 1e-8))) <= 1e-15);
    CHECK(std::abs(p.tensors[0].values[0] - (-0.0999999990)) <= 1e-12);
}

TEST_CASE("AdamW with zero gradient") {
    TrainConfig cfg;
    cfg.learning_rate = 0.1;
    SUBCASE("no decay leaves parameters unchanged") {
        cfg.weight_decay = 0.0;
        auto p = single_param(0.7);
        auto s = make_adam_state(p);
        adamw_step(p, {{0.0}}, s, cfg);
        CHECK(p.tensors[0].values[0] == 0.7);
    }
    SUBCASE("decay only") {
        cfg.weight_decay = 0.1;
        auto p = single_param(1.0);
        auto s = make_adam_state(p);
        adamw_step(p, {{0.0}}, s, cfg);
        CHECK(std::abs(p.tensors[0].values[0] - 0.99) <= 1e-15);
    }
}

TEST_CASE("AdamW without decay equals plain Adam") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d(0.0, 1.0);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.weight_decay = 0.0;
    auto p = single_param(0.3);
    auto s = make_adam_state(p);
    RefAdam ref;
    double theta = 0.3;
    for (int i = 0; i < 200; ++i) {
        const double g = d(rng);
        adamw_step(p, {{g}}, s, cfg);
        theta = ref.step(theta, g, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
        CHECK(std::abs(p.tensors[0].values[0] - theta) <= 1e-12);
    }
}

TEST_CASE("AdamW names the parameter with a non-finite gradient") {
    ModelParams p;
    p.tensors.push_back({"good", {1}, {0.0}});
    p.tensors.push_back({"bad", {2}, {0.0, 0.0}});
    auto s = make_adam_state(p);
    try {
        adamw_step(p, {{1.0}, {0.0, NAN}}, s, TrainConfig{});
        FAIL("expected an exception");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("'bad'") != std::string::npos);
    }
    CHECK(p.tensors[0].values[0] == 0.0);  // nothing applied
}

TEST_CASE("AdamW only touches trainable tensors") {
    ModelParams p;
    p.tensors.push_back({"a", {1}, {1.0}});
    p.tensors.push_back({"b", {1}, {1.0}});
    auto s = make_adam_state(p);
    adamw_step(p, {{1.0}, {1.0}}, s, TrainConfig{}, {"b"});
    CHECK(p.tensors[0].values[0] == 1.0);
    CHECK(p.tensors[1].values[0] != 1.0);
    CHECK_THROWS_AS(adamw_step(p, {{1.0}, {1.0}}, s, TrainConfig{}, {"c"}), std::invalid_argument);
}

TEST_CASE("train config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.learning_rate = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.beta2 = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.oversample_damaged_factor = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("sampler multiplicity rule") {
    const TrainConfig cfg;
    using P = std::array<bool, kNumGrades + 1>;
    CHECK(sample_multiplicity(P{false, true, false, false, false}, cfg) == 1);
    CHECK(sample_multiplicity(P{false, true, false, true, false}, cfg) == 4);
    CHECK(sample_multiplicity(P{false, false, true, false, false}, cfg) == 4);
    CHECK(sample_multiplicity(P{false, true, false, false, true}, cfg) == 2);
    CHECK(sample_multiplicity(P{}, cfg) == 1);
    TrainConfig c3 = cfg;
    c3.oversample_damaged_factor = 3;
    c3.oversample_minor_major_factor = 5;
    CHECK(sample_multiplicity(P{false, false, false, true, true}, c3) == 15);
}

TEST_CASE("sampler on undamaged scenes is a permutation; epochs reshuffle") {
    std::vector<std::array<bool, kNumGrades + 1>> g(20, {false, true, false, false, false});
    TrainConfig cfg;
    const auto e0 = build_sampler(g, cfg, 0);
    const auto e1 = build_sampler(g, cfg, 1);
    auto s0 = e0, s1 = e1;
    std::sort(s0.begin(), s0.end());
    std::sort(s1.begin(), s1.end());
    for (std::size_t i = 0; i < 20; ++i) CHECK(s0[i] == i);
    CHECK(s0 == s1);
    CHECK(e0 != e1);
    CHECK(build_sampler(g, cfg, 0) == e0);
}

TEST_CASE("property: sampler counts follow the factor rule") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 25);
        std::vector<std::array<bool, kNumGrades + 1>> g(n);
        for (auto& p : g)
            for (int k = 1; k <= kNumGrades; ++k) p[k] = rng() % 3 == 0;
        TrainConfig cfg;
        cfg.oversample_damaged_factor = 1 + static_cast<int>(rng() % 3);
        cfg.oversample_minor_major_factor = 1 + static_cast<int>(rng() % 3);
        cfg.seed = rng();
        std::map<std::size_t, int> counts;
        for (auto i : build_sampler(g, cfg, trial)) ++counts[i];
        for (int i = 0; i < n; ++i) {
            int expected = 1;
            if (g[i][2] || g[i][3] || g[i][4]) expected *= cfg.oversample_damaged_factor;
            if (g[i][2] || g[i][3]) expected *= cfg.oversample_minor_major_factor;
            CHECK(counts[i] == expected);
        }
    }
}

TEST_CASE("zero epochs return the initial or transferred parameters") {
    const auto scenes = tiny_scenes(3, 40);
    TrainConfig cfg = quick_cfg();
    cfg.stage1_epochs = 0;
    cfg.stage2_epochs = 0;
    const auto s1 = train_stage1_localization(scenes, tiny_net(), cfg);
    NetworkConfig loc_cfg = tiny_net();
    loc_cfg.head_channels = 1;
    CHECK(s1 == init_localization_params(loc_cfg));
    CHECK(train_stage2_siamese(scenes, s1, cfg) == transfer_localization_weights(s1, s1.config.seed));
}

TEST_CASE("training is deterministic and reduces the loss") {
    const auto scenes = tiny_scenes(6, 50);
    TrainConfig cfg = quick_cfg();
    cfg.stage1_epochs = 4;
    cfg.stage2_epochs = 3;
    LossTrace t1a, t2a, t1b, t2b;
    const auto a = train_two_stage(scenes, tiny_net(), cfg, &t1a, &t2a);
    const auto b = train_two_stage(scenes, tiny_net(), cfg, &t1b, &t2b);
    CHECK(a == b);
    CHECK(t1a.to_csv() == t1b.to_csv());
    REQUIRE(t1a.rows.size() == 4);
    REQUIRE(t2a.rows.size() == 3);
    CHECK(t1a.rows.back().loss < t1a.rows.front().loss);
    CHECK(t2a.rows.back().loss < t2a.rows.front().loss);
    CHECK(t1a.to_csv().rfind("epoch,split,loss,loc_f1,macro_f1\n", 0) == 0);

    // Stage 2 leaves the localization head alone.
    const auto s1 = train_stage1_localization(scenes, tiny_net(), cfg);
    const auto s2 = train_stage2_siamese(scenes, s1, cfg);
    CHECK(s2.find("loc_head.weight")->values == s1.find("loc_head.weight")->values);
}

TEST_CASE("held-out monitoring adds test rows") {
    const auto scenes = tiny_scenes(4, 60);
    const auto held = tiny_scenes(2, 70);
    TrainConfig cfg = quick_cfg();
    LossTrace trace;
    train_stage1_localization(scenes, tiny_net(), cfg, {&held, &trace});
    REQUIRE(trace.rows.size() == 4);
    CHECK(trace.rows[1].split == "test");
    CHECK(trace.rows[1].epoch == 0);
}

TEST_CASE("training rejects scenes that do not fit the network") {
    auto scenes = tiny_scenes(2, 80);
    NetworkConfig net = tiny_net();
    net.input_side = 64;
    CHECK_THROWS_AS(train_stage1_localization(scenes, net, quick_cfg()), std::invalid_argument);
}

TEST_CASE("fine-tuning share selection") {
    CHECK(fine_tune_selection(10, 0.0, 1).empty());
    CHECK(fine_tune_selection(10, 0.5, 1).size() == 5);
    CHECK(fine_tune_selection(7, 0.3, 1).size() == 2);
    CHECK(fine_tune_selection(100, 0.29, 1).size() == 29);
    CHECK(fine_tune_selection(12, 0.25, 4) == fine_tune_selection(12, 0.25, 4));
    const auto small = fine_tune_selection(20, 0.2, 9);
    const auto large = fine_tune_selection(20, 0.5, 9);
    CHECK(std::equal(small.begin(), small.end(), large.begin()));  // nested
    CHECK_THROWS_AS(fine_tune_selection(10, 0.6, 1), std::invalid_argument);
    CHECK_THROWS_AS(fine_tune_selection(10, -0.1, 1), std::invalid_argument);
}

TEST_CASE("fine-tuning with share 0 is the identity") {
    const auto scenes = tiny_scenes(4, 90);
    const auto p = init_siamese_params(tiny_net());
    std::vector<std::size_t> chosen{99};
    CHECK(fine_tune(p, scenes, 0.0, quick_cfg(), &chosen) == p);
    CHECK(chosen.empty());
    const auto tuned = fine_tune(p, scenes, 0.5, quick_cfg(), &chosen);
    CHECK(chosen.size() == 2);
    CHECK_FALSE(tuned == p);
}
