#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "dmgnet/losses.hpp"

using namespace dmgnet;

namespace {

std::vector<double> random_probs(std::mt19937_64& rng, std::size_t n, double lo = 0.05, double hi = 0.95) {
    std::uniform_real_distribution<double> d(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

std::vector<double> random_binary(std::mt19937_64& rng, std::size_t n) {
    std::bernoulli_distribution d(0.4);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng) ? 1.0 : 0.0;
    return v;
}

double loss_of(const std::vector<double>& p, const std::vector<double>& g, int channels, const LossConfig& cfg) {
    return combined_loss<double>(p, g, channels, cfg, {}).total;
}

}  // namespace

TEST_CASE("dice coefficient closed forms") {
    const std::vector<double> half(10, 0.5), ones(10, 1.0), zeros(10, 0.0);
    CHECK(std::abs(dice_coefficient(half, ones) - 0.8) <= 1e-6);

    const std::vector<double> mask{1, 0, 1, 1, 0};
    CHECK(dice_coefficient(mask, mask) >= 1.0 - 1e-5);

    const std::vector<double> a{1, 1, 0, 0}, b{0, 0, 1, 1};
    CHECK(dice_coefficient(a, b) == 0.0);

    // Degenerate all-zero pair is defined as coefficient 0.
    CHECK(dice_coefficient(zeros, zeros) == 0.0);
    CHECK_THROWS_AS(dice_coefficient(a, half), std::invalid_argument);
}

TEST_CASE("dice coefficient is symmetric for binary inputs") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const auto p = random_binary(rng, 40), g = random_binary(rng, 40);
        CHECK(dice_coefficient(p, g) == dice_coefficient(g, p));
    }
}

TEST_CASE("focal loss worked values") {
    CHECK(std::abs(focal_loss(std::vector<double>{0.5}, std::vector<double>{1.0}, 0.0) - 0.693147) <= 1e-6);
    CHECK(std::abs(focal_loss(std::vector<double>{0.9}, std::vector<double>{1.0}, 2.0) - 1.05361e-3) <= 1e-8);
    const std::vector<double> g{1, 0, 0, 1};
    CHECK(focal_loss(g, g, 2.0) <= 2e-6);
    CHECK_THROWS_AS(focal_loss(g, std::vector<double>{1.0}, 2.0), std::invalid_argument);
}

TEST_CASE("focal loss with gamma 0 is binary cross-entropy") {
    std::mt19937_64 rng(8);
    const auto p = random_probs(rng, 200, 0.0, 1.0);
    const auto g = random_binary(rng, 200);
    double ce = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(p[i], 1e-6, 1.0 - 1e-6);
        ce -= g[i] * std::log(q) + (1.0 - g[i]) * std::log(1.0 - q);
    }
    ce /= static_cast<double>(p.size());
    CHECK(std::abs(focal_loss(p, g, 0.0) - ce) <= 1e-12);
}

TEST_CASE("focal loss decreases strictly as a positive pixel gets more confident") {
    double prev = INFINITY;
    for (double p = 0.01; p < 0.999; p += 0.01) {
        const double l = focal_loss(std::vector<double>{p}, std::vector<double>{1.0}, 2.0);
        CHECK(l < prev);
        prev = l;
    }
}

TEST_CASE("combined loss on a perfect hard prediction") {
    std::mt19937_64 rng(2);
    auto t = random_binary(rng, 5 * 16);
    std::vector<double> grad(t.size());
    const auto terms = combined_loss<double>(t, t, 5, LossConfig{}, grad);
    CHECK(terms.total <= 5 * 1e-5);
    for (double g : grad) CHECK(std::abs(g) <= 1e-4);
}

TEST_CASE("combined loss with dice weight 0 equals the focal sum") {
    std::mt19937_64 rng(3);
    const auto p = random_probs(rng, 5 * 20);
    const auto g = random_binary(rng, 5 * 20);
    LossConfig cfg;
    cfg.dice_weight = 0.0;
    double focal_sum = 0.0;
    for (int c = 0; c < 5; ++c) {
        std::span<const double> pc(p.data() + c * 20, 20), gc(g.data() + c * 20, 20);
        focal_sum += focal_loss(pc, gc, cfg.gamma);
    }
    CHECK(std::abs(loss_of(p, g, 5, cfg) - focal_sum) <= 1e-14);
}

TEST_CASE("combined loss gradient matches central differences") {
    std::mt19937_64 rng(17);
    for (const double gamma : {0.0, 2.0, 3.5}) {
        LossConfig cfg;
        cfg.gamma = gamma;
        cfg.dice_weight = 0.7;
        cfg.focal_weight = 1.3;
        const int channels = 5;
        auto p = random_probs(rng, channels * 64);
        const auto g = random_binary(rng, channels * 64);
        std::vector<double> grad(p.size());
        combined_loss<double>(p, g, channels, cfg, grad);
        const double h = 1e-5;
        double worst = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double keep = p[i];
            p[i] = keep + h;
            const double up = loss_of(p, g, channels, cfg);
            p[i] = keep - h;
            const double down = loss_of(p, g, channels, cfg);
            p[i] = keep;
            const double fd = (up - down) / (2 * h);
            worst = std::max(worst, std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6}));
        }
        CHECK(worst <= 1e-4);
    }
}

TEST_CASE("combined loss rejects mismatched shapes") {
    std::vector<double> a(10), b(12), grad;
    CHECK_THROWS_AS(combined_loss<double>(a, b, 1, LossConfig{}, grad), std::invalid_argument);
    MaskStack x(4, 4), y(4, 5);
    CHECK_THROWS_AS(combined_loss(x, y, LossConfig{}), std::invalid_argument);
}

TEST_CASE("loss config validation") {
    LossConfig c;
    c.gamma = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.dice_weight = c.focal_weight = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
