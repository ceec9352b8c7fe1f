#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "dmgnet/network.hpp"
#include "dmgnet/scene_data.hpp"

using namespace dmgnet;

namespace {

NetworkConfig tiny_config(int side = 16) {
    NetworkConfig c;
    c.input_side = side;
    c.widths = {4, 8, 16};
    c.seed = 21;
    return c;
}

// 16x16 crop of a 32 px synthetic scene, chosen to contain several grades.
ScenePair small_scene() {
    SyntheticSceneSpec spec;
    spec.seed = 3;
    spec.side = 32;
    spec.n_buildings = 6;
    spec.min_building = 4;
    spec.max_building = 7;
    spec.damage_profile = {0.25, 0.25, 0.25, 0.25};
    auto s = generate_synthetic_scene(spec).scene;
    auto crop = [](const RasterImage& img) {
        RasterImage out(16, 16, img.channels, img.gsd);
        for (int c = 0; c < img.channels; ++c)
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) out.at(c, y, x) = img.at(c, y + 8, x + 8);
        return out;
    };
    ScenePair out = s;
    out.pre = crop(s.pre);
    out.post = crop(s.post);
    out.labels = GradeMap(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) out.labels.at(y, x) = s.labels.at(y + 8, x + 8);
    out.annotations.clear();
    return out;
}

void randomize_biases(ModelParams& p, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 0.1);
    for (auto& t : p.tensors)
        if (t.shape.size() == 1)
            for (auto& v : t.values) v = d(rng);
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

}  // namespace

TEST_CASE("zero parameters give sigmoid(0) everywhere") {
    const auto scene = small_scene();
    const auto zero = zero_params(init_siamese_params(tiny_config()));
    for (float v : forward_localization(zero, scene.pre)) CHECK(v == 0.5f);
    for (float v : forward_siamese(zero, scene.pre, scene.post).data) CHECK(v == 0.5f);
}

TEST_CASE("forward passes are deterministic and validate shapes") {
    const auto scene = small_scene();
    const auto p = init_siamese_params(tiny_config());
    CHECK(forward_siamese(p, scene.pre, scene.post) == forward_siamese(p, scene.pre, scene.post));
    CHECK(forward_localization(p, scene.pre) == forward_localization(p, scene.pre));
    RasterImage wrong(32, 32, 3, 0.5);
    CHECK_THROWS_AS(forward_localization(p, wrong), std::invalid_argument);
    CHECK_THROWS_AS(forward_siamese(p, scene.pre, wrong), std::invalid_argument);
}

TEST_CASE("network config validation") {
    NetworkConfig c = tiny_config();
    c.input_side = 18;  // not divisible by 4
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = tiny_config();
    c.head_channels = 3;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("Siamese model shares one U-Net between both inputs") {
    const auto cfg = tiny_config();
    const auto p = init_siamese_params(cfg);
    const std::size_t fusion = static_cast<std::size_t>(2 * cfg.widths[0]) * 5 + 5;
    CHECK(p.parameter_count() == unet_parameter_count(cfg) + fusion);
    CHECK(init_localization_params(cfg).parameter_count() == unet_parameter_count(cfg));
}

TEST_CASE("symmetric fusion weights make the output invariant to swapping inputs") {
    const auto scene = small_scene();
    auto p = init_siamese_params(tiny_config());
    auto* w = p.find("fusion.weight");
    const int f = w->shape[1] / 2;
    for (int o = 0; o < w->shape[0]; ++o)
        for (int i = 0; i < f; ++i) w->values[o * 2 * f + f + i] = w->values[o * 2 * f + i];
    // Equal up to summation order inside the fusion product.
    const auto ab = forward_siamese(p, scene.pre, scene.post);
    const auto ba = forward_siamese(p, scene.post, scene.pre);
    for (std::size_t i = 0; i < ab.data.size(); ++i) CHECK(std::abs(ab.data[i] - ba.data[i]) <= 1e-6f);
}

TEST_CASE("transfer copies the localization U-Net exactly") {
    const auto scene = small_scene();
    auto loc = init_localization_params(tiny_config());
    randomize_biases(loc, 4);
    const auto a = transfer_localization_weights(loc, 100);
    const auto b = transfer_localization_weights(loc, 101);
    CHECK(forward_localization(a, scene.pre) == forward_localization(loc, scene.pre));
    CHECK(a.find("fusion.weight")->values != b.find("fusion.weight")->values);
    for (const auto& t : loc.tensors) CHECK(a.find(t.name)->values == t.values);

    auto broken = loc;
    broken.find("enc1.conv1.weight")->shape[0] = 5;
    CHECK_THROWS_AS(transfer_localization_weights(broken, 1), std::invalid_argument);
}

TEST_CASE("checkpoints round-trip exactly") {
    auto p = transfer_localization_weights(init_localization_params(tiny_config()), 9);
    randomize_biases(p, 5);
    const auto path = std::filesystem::temp_directory_path() / "dmgnet_unit_ckpt" / "model.ckpt";
    save_checkpoint(p, path);
    CHECK(load_checkpoint(path) == p);
    std::filesystem::remove_all(path.parent_path());
    CHECK_THROWS(load_checkpoint(path));
}

TEST_CASE("trainable sets per stage") {
    const auto p = init_siamese_params(tiny_config());
    const auto s1 = trainable_for_localization(p);
    const auto s2 = trainable_for_siamese(p);
    CHECK(std::find(s1.begin(), s1.end(), "fusion.weight") == s1.end());
    CHECK(std::find(s1.begin(), s1.end(), "loc_head.weight") != s1.end());
    CHECK(std::find(s2.begin(), s2.end(), "loc_head.weight") == s2.end());
    CHECK(std::find(s2.begin(), s2.end(), "fusion.weight") != s2.end());
    CHECK(std::find(s2.begin(), s2.end(), "enc0.conv1.weight") != s2.end());
}

TEST_CASE("full Siamese gradient matches central differences in double precision") {
    const auto scene = small_scene();
    auto params = init_siamese_params(tiny_config());
    randomize_biases(params, 6);
    const auto pre = to_tensor<double>(scene.pre);
    const auto post = to_tensor<double>(scene.post);
    const auto target = to_tensor<double>(mask_from_grades(scene.labels));
    const LossConfig loss;

    const Network<double> net(params);
    auto grads = net.zero_grads();
    net.siamese_loss_and_grad(pre, post, target, loss, grads);

    auto loss_at = [&](const ModelParams& p) {
        const Network<double> n(p);
        auto g = n.zero_grads();
        return n.siamese_loss_and_grad(pre, post, target, loss, g).total;
    };
    const double h = 1e-5;
    double worst = 0.0;
    std::string worst_name;
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        if (params.tensors[t].name.rfind("loc_head", 0) == 0) {
            for (double g : grads[t]) CHECK(g == 0.0);  // the Siamese output does not use it
            continue;
        }
        for (std::size_t i = 0; i < params.tensors[t].values.size(); ++i) {
            auto p = params;
            p.tensors[t].values[i] += h;
            const double up = loss_at(p);
            p.tensors[t].values[i] -= 2 * h;
            const double down = loss_at(p);
            const double e = rel_err((up - down) / (2 * h), grads[t][i]);
            if (e > worst) {
                worst = e;
                worst_name = params.tensors[t].name;
            }
        }
    }
    INFO("worst parameter: " << worst_name);
    CHECK(worst <= 1e-4);
}

TEST_CASE("localization gradient matches central differences") {
    const auto scene = small_scene();
    auto params = init_localization_params(tiny_config());
    randomize_biases(params, 7);
    const auto pre = to_tensor<double>(scene.pre);
    const auto target = to_tensor<double>(mask_from_grades(scene.labels), 1);
    const Network<double> net(params);
    auto grads = net.zero_grads();
    net.localization_loss_and_grad(pre, target, LossConfig{}, grads);
    const double h = 1e-5;
    double worst = 0.0;
    std::mt19937_64 rng(1);
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
        // A few entries per tensor keep this quick; the Siamese check above is exhaustive.
        for (int k = 0; k < 6; ++k) {
            const std::size_t i = rng() % params.tensors[t].values.size();
            auto p = params;
            auto eval = [&] {
                const Network<double> n(p);
                auto g = n.zero_grads();
                return n.localization_loss_and_grad(pre, target, LossConfig{}, g).total;
            };
            p.tensors[t].values[i] += h;
            const double up = eval();
            p.tensors[t].values[i] -= 2 * h;
            const double down = eval();
            worst = std::max(worst, rel_err((up - down) / (2 * h), grads[t][i]));
        }
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("single-precision gradients agree with the double-precision ones") {
    const auto scene = small_scene();
    auto params = init_siamese_params(tiny_config());
    randomize_biases(params, 8);
    const Network<double> nd(params);
    const Network<float> nf(params);
    auto gd = nd.zero_grads();
    auto gf = nf.zero_grads();
    nd.siamese_loss_and_grad(to_tensor<double>(scene.pre), to_tensor<double>(scene.post),
                             to_tensor<double>(mask_from_grades(scene.labels)), LossConfig{}, gd);
    nf.siamese_loss_and_grad(to_tensor<float>(scene.pre), to_tensor<float>(scene.post),
                             to_tensor<float>(mask_from_grades(scene.labels)), LossConfig{}, gf);
    double worst = 0.0;
    for (std::size_t t = 0; t < gd.size(); ++t)
        for (std::size_t i = 0; i < gd[t].size(); ++i)
            worst = std::max(worst, std::abs(gd[t][i] - gf[t][i]) / std::max({std::abs(gd[t][i]), 1e-3}));
    CHECK(worst <= 1e-3);
}

TEST_CASE("decision rule examples") {
    MaskStack m(1, 1);
    auto set = [&](float loc, float a, float b, float c, float d) {
        m.data = {loc, a, b, c, d};
        return decide(m, DecisionRule{}).codes[0];
    };
    CHECK(set(0.9f, 0, 0, 1, 0) == 3);
    CHECK(set(0.1f, 0, 0, 0, 1) == 0);
    CHECK(set(0.9f, 0.5f, 0.5f, 0, 0) == 2);  // d = 1.5 rounds up
    CHECK(set(0.9f, 0, 0, 0, 0) == 1);        // no damage evidence
    CHECK(set(0.5f, 0, 0, 0, 1) == 4);        // threshold is inclusive

    DecisionRule argmax{0.5, DecisionMode::argmax};
    m.data = {0.9f, 0.2f, 0.4f, 0.4f, 0.1f};
    CHECK(decide(m, argmax).codes[0] == 2);  // tie goes to the lower grade
    CHECK_THROWS_AS(decide(m, DecisionRule{1.0}), std::invalid_argument);
    CHECK_THROWS_AS(decide(m, DecisionRule{0.0}), std::invalid_argument);
}

TEST_CASE("property: decision is background exactly where loc is below the threshold") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    for (int trial = 0; trial < 10; ++trial) {
        MaskStack m(9, 9);
        for (auto& v : m.data) v = u(rng);
        const DecisionRule rule{0.2 + 0.06 * trial, trial % 2 ? DecisionMode::argmax : DecisionMode::weighted_average};
        const auto g = decide(m, rule);
        for (std::size_t i = 0; i < g.codes.size(); ++i) {
            CHECK((g.codes[i] == 0) == (m.data[i] < rule.loc_threshold));
            CHECK(g.codes[i] <= 4);
        }
    }
}

TEST_CASE("ensembles average soft outputs") {
    const auto scene = small_scene();
    const auto p = init_siamese_params(tiny_config());
    const auto single = forward_siamese(p, scene.pre, scene.post);
    CHECK(ensemble_predict({p, p, p}, scene.pre, scene.post) == single);

    MaskStack a(1, 1, 0.2f), b(1, 1, 0.6f);
    for (float v : mean_of({a, b}).data) CHECK(v == doctest::Approx(0.4f));
    CHECK_THROWS_AS(ensemble_predict({}, scene.pre, scene.post), std::invalid_argument);
}
