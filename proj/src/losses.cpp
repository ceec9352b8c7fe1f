#include "dmgnet/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dmgnet {

void LossConfig::validate() const {
    if (!(gamma >= 0.0)) throw std::invalid_argument("focal gamma must be >= 0");
    if (dice_weight < 0.0 || focal_weight < 0.0) throw std::invalid_argument("loss weights must be non-negative");
    if (dice_weight == 0.0 && focal_weight == 0.0) throw std::invalid_argument("loss weights must not both be zero");
    if (!(epsilon > 0.0) || epsilon >= 0.5) throw std::invalid_argument("loss epsilon must lie in (0, 0.5)");
}

namespace {

void check_lengths(std::size_t a, std::size_t b) {
    if (a != b) throw std::invalid_argument("prediction and target lengths differ");
}

// (1-r)^gamma with 0^0 = 1
inline double focal_weight_term(double one_minus_r, double gamma) {
    return gamma == 0.0 ? 1.0 : std::pow(one_minus_r, gamma);
}

// Per-pixel focal value and its derivative with respect to p.
template <typename T>
inline double focal_pixel(T p_raw, T g_raw, double gamma, double eps, double* dp) {
    const double p_in = static_cast<double>(p_raw);
    const double g = static_cast<double>(g_raw);
    const double p = std::clamp(p_in, eps, 1.0 - eps);
    const double r = (1.0 - g) * (1.0 - p) + g * p;
    const double q = 1.0 - r;
    const double log_r = std::log(r);
    const double w = focal_weight_term(q, gamma);
    if (dp) {
        if (p_in < eps || p_in > 1.0 - eps) {
            *dp = 0.0;
        } else {
            // dL/dr = gamma (1-r)^(gamma-1) log r - (1-r)^gamma / r; dr/dp = 2g - 1
            const double dw = gamma == 0.0 ? 0.0 : gamma * std::pow(q, gamma - 1.0);
            *dp = (dw * log_r - w / r) * (2.0 * g - 1.0);
        }
    }
    return -w * log_r;
}

}  // namespace

double dice_coefficient(std::span<const double> p, std::span<const double> g, double epsilon) {
    check_lengths(p.size(), g.size());
    double pg = 0.0, pp = 0.0, gg = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        pg += p[i] * g[i];
        pp += p[i] * p[i];
        gg += g[i] * g[i];
    }
    return 2.0 * pg / (pp + gg + epsilon);
}

double focal_loss(std::span<const double> p, std::span<const double> g, double gamma, double epsilon) {
    check_lengths(p.size(), g.size());
    if (p.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += focal_pixel(p[i], g[i], gamma, epsilon, nullptr);
    return acc / static_cast<double>(p.size());
}

template <typename T>
LossTerms combined_loss(std::span<const T> pred, std::span<const T> target, int channels, const LossConfig& cfg,
                        std::span<T> grad) {
    check_lengths(pred.size(), target.size());
    if (channels < 1 || pred.size() % static_cast<std::size_t>(channels) != 0)
        throw std::invalid_argument("prediction size is not a multiple of the channel count");
    const bool want_grad = !grad.empty();
    if (want_grad) check_lengths(grad.size(), pred.size());

    const std::size_t n = pred.size() / channels;
    const double inv_n = n ? 1.0 / static_cast<double>(n) : 0.0;
    LossTerms terms;
    for (int c = 0; c < channels; ++c) {
        const T* p = pred.data() + c * n;
        const T* g = target.data() + c * n;
        double pg = 0.0, pp = 0.0, gg = 0.0, focal = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double pi = p[i], gi = g[i];
            pg += pi * gi;
            pp += pi * pi;
            gg += gi * gi;
            focal += focal_pixel(p[i], g[i], cfg.gamma, cfg.epsilon, nullptr);
        }
        const double den = pp + gg + cfg.epsilon;
        const double coef = 2.0 * pg / den;
        terms.dice += 1.0 - coef;
        terms.focal += focal * inv_n;
        if (!want_grad) continue;
        T* out = grad.data() + c * n;
        for (std::size_t i = 0; i < n; ++i) {
            const double pi = p[i], gi = g[i];
            // d(1 - coef)/dp_i = -(2 g_i / den - 2 pg * 2 p_i / den^2)
            const double d_dice = -(2.0 * gi / den - 4.0 * pg * pi / (den * den));
            double d_focal = 0.0;
            focal_pixel(p[i], g[i], cfg.gamma, cfg.epsilon, &d_focal);
            out[i] = static_cast<T>(cfg.dice_weight * d_dice + cfg.focal_weight * d_focal * inv_n);
        }
    }
    terms.total = cfg.dice_weight * terms.dice + cfg.focal_weight * terms.focal;
    return terms;
}

template LossTerms combined_loss<float>(std::span<const float>, std::span<const float>, int, const LossConfig&,
                                        std::span<float>);
template LossTerms combined_loss<double>(std::span<const double>, std::span<const double>, int, const LossConfig&,
                                         std::span<double>);

LossResult combined_loss(const MaskStack& pred, const MaskStack& target, const LossConfig& cfg) {
    if (pred.width != target.width || pred.height != target.height)
        throw std::invalid_argument("mask stack shapes differ");
    LossResult out;
    out.gradient = MaskStack(pred.width, pred.height);
    const auto terms = combined_loss<float>(pred.data, target.data, MaskStack::kChannels, cfg, out.gradient.data);
    out.loss = terms.total;
    return out;
}

}  // namespace dmgnet
