#include "dmgnet/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dmgnet/json_io.hpp"
#include "dmgnet/kernels.hpp"

namespace dmgnet {

void NetworkConfig::validate() const {
    if (widths.empty()) throw std::invalid_argument("network needs at least one level");
    for (int w : widths)
        if (w < 1) throw std::invalid_argument("network widths must be positive");
    if (in_channels < 1) throw std::invalid_argument("network input channels must be positive");
    if (head_channels != 1 && head_channels != 5) throw std::invalid_argument("head channels must be 1 or 5");
    const int div = 1 << (levels() - 1);
    if (input_side < 1 || input_side % div != 0)
        throw std::invalid_argument("input side must be divisible by 2^(levels-1)");
}

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors) n += t.values.size();
    return n;
}

const ParamTensor* ModelParams::find(const std::string& name) const {
    for (const auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

ParamTensor* ModelParams::find(const std::string& name) {
    for (auto& t : tensors)
        if (t.name == name) return &t;
    return nullptr;
}

ParamGrads zero_grads(const ModelParams& params) {
    ParamGrads g;
    g.reserve(params.tensors.size());
    for (const auto& t : params.tensors) g.emplace_back(t.values.size(), 0.0);
    return g;
}

namespace {

ParamTensor make_tensor(std::string name, std::vector<int> shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return {std::move(name), std::move(shape), std::vector<double>(n, 0.0)};
}

void add_conv(std::vector<ParamTensor>& out, const std::string& prefix, int in, int outc, int k) {
    out.push_back(make_tensor(prefix + ".weight", {outc, in, k, k}));
    out.push_back(make_tensor(prefix + ".bias", {outc}));
}

std::vector<ParamTensor> body_layout(const NetworkConfig& cfg) {
    std::vector<ParamTensor> t;
    const auto& w = cfg.widths;
    for (int l = 0; l < cfg.levels(); ++l) {
        const int in = l == 0 ? cfg.in_channels : w[l - 1];
        add_conv(t, "enc" + std::to_string(l) + ".conv1", in, w[l], 3);
        add_conv(t, "enc" + std::to_string(l) + ".conv2", w[l], w[l], 3);
    }
    for (int l = cfg.levels() - 2; l >= 0; --l) {
        add_conv(t, "dec" + std::to_string(l) + ".conv1", w[l + 1] + w[l], w[l], 3);
        add_conv(t, "dec" + std::to_string(l) + ".conv2", w[l], w[l], 3);
    }
    add_conv(t, "loc_head", w[0], 1, 1);
    return t;
}

// He (fan-in) normal init for weights; biases stay zero.
void he_init(ParamTensor& t, std::mt19937_64& rng) {
    if (t.shape.size() != 4) return;
    const double fan_in = static_cast<double>(t.shape[1]) * t.shape[2] * t.shape[3];
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (double& v : t.values) v = dist(rng);
}

std::vector<ParamTensor> fresh_fusion(int features, std::uint64_t seed) {
    std::vector<ParamTensor> t;
    add_conv(t, "fusion", 2 * features, MaskStack::kChannels, 1);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xF05Eu};
    std::mt19937_64 rng(seq);
    for (auto& p : t) he_init(p, rng);
    return t;
}

}  // namespace

ModelParams init_localization_params(NetworkConfig config) {
    config.head_channels = 1;
    config.validate();
    ModelParams p{config, body_layout(config)};
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32)};
    std::mt19937_64 rng(seq);
    for (auto& t : p.tensors) he_init(t, rng);
    return p;
}

ModelParams init_siamese_params(NetworkConfig config) {
    ModelParams p = init_localization_params(config);
    return transfer_localization_weights(p, config.seed);
}

ModelParams zero_params(const ModelParams& like) {
    ModelParams p = like;
    for (auto& t : p.tensors) std::fill(t.values.begin(), t.values.end(), 0.0);
    return p;
}

std::size_t unet_parameter_count(const NetworkConfig& config) {
    std::size_t n = 0;
    for (const auto& t : body_layout(config)) n += t.values.size();
    return n;
}

ModelParams transfer_localization_weights(const ModelParams& localization, std::uint64_t seed) {
    NetworkConfig cfg = localization.config;
    cfg.head_channels = 1;
    cfg.validate();
    const auto expected = body_layout(cfg);
    for (const auto& e : expected) {
        const ParamTensor* t = localization.find(e.name);
        if (!t || t->shape != e.shape)
            throw std::invalid_argument("localization checkpoint incompatible with its config at '" + e.name + "'");
    }
    ModelParams out;
    out.config = cfg;
    out.config.head_channels = 5;
    out.config.seed = seed;
    for (const auto& e : expected) out.tensors.push_back(*localization.find(e.name));
    for (auto& f : fresh_fusion(cfg.widths[0], seed)) out.tensors.push_back(std::move(f));
    return out;
}

std::vector<std::string> trainable_for_localization(const ModelParams& params) {
    std::vector<std::string> names;
    for (const auto& t : params.tensors)
        if (t.name.rfind("fusion", 0) != 0) names.push_back(t.name);
    return names;
}

std::vector<std::string> trainable_for_siamese(const ModelParams& params) {
    std::vector<std::string> names;
    for (const auto& t : params.tensors)
        if (t.name.rfind("loc_head", 0) != 0) names.push_back(t.name);
    return names;
}

// ---------------------------------------------------------------------------
// Network<T>
// ---------------------------------------------------------------------------

template <typename T>
Network<T>::Network(const ModelParams& params) : config_(params.config) {
    config_.validate();
    weights_.reserve(params.tensors.size());
    for (const auto& t : params.tensors) weights_.emplace_back(t.values.begin(), t.values.end());

    auto index = [&](const std::string& name) {
        for (std::size_t i = 0; i < params.tensors.size(); ++i)
            if (params.tensors[i].name == name) return static_cast<int>(i);
        return -1;
    };
    auto conv_of = [&](const std::string& prefix, int in, int out, int k) {
        Conv c{index(prefix + ".weight"), index(prefix + ".bias"), in, out, k};
        if (c.w < 0 || c.b < 0) throw std::invalid_argument("parameter set lacks '" + prefix + "'");
        const auto& shape = params.tensors[c.w].shape;
        if (shape != std::vector<int>{out, in, k, k})
            throw std::invalid_argument("parameter '" + prefix + ".weight' has the wrong shape");
        return c;
    };
    const auto& w = config_.widths;
    const int levels = config_.levels();
    for (int l = 0; l < levels; ++l) {
        const int in = l == 0 ? config_.in_channels : w[l - 1];
        const std::string p = "enc" + std::to_string(l);
        encoder_.push_back({conv_of(p + ".conv1", in, w[l], 3), conv_of(p + ".conv2", w[l], w[l], 3)});
    }
    decoder_.resize(static_cast<std::size_t>(std::max(0, levels - 1)));
    for (int l = levels - 2; l >= 0; --l) {
        const std::string p = "dec" + std::to_string(l);
        decoder_[l] = {conv_of(p + ".conv1", w[l + 1] + w[l], w[l], 3), conv_of(p + ".conv2", w[l], w[l], 3)};
    }
    loc_head_ = conv_of("loc_head", w[0], 1, 1);
    if (index("fusion.weight") >= 0) {
        const Conv f = conv_of("fusion", 2 * w[0], MaskStack::kChannels, 1);
        fusion_w_ = f.w;
        fusion_b_ = f.b;
    }
}

template <typename T>
std::vector<std::vector<T>> Network<T>::zero_grads() const {
    std::vector<std::vector<T>> g;
    g.reserve(weights_.size());
    for (const auto& w : weights_) g.emplace_back(w.size(), T(0));
    return g;
}

template <typename T>
void Network<T>::conv(const Conv& c, const Tensor<T>& in, Tensor<T>& out) const {
    kernels::conv2d_forward<T>(in, weight(c.w), weight(c.b), c.out, c.k, out);
}

template <typename T>
void Network<T>::conv_back(const Conv& c, const Tensor<T>& in, const Tensor<T>& dout,
                           std::vector<std::vector<T>>& grads, Tensor<T>* din) const {
    kernels::conv2d_backward<T>(in, weight(c.w), dout, c.k, grads[c.w], grads[c.b], din);
}

template <typename T>
Tensor<T> Network<T>::features(const Tensor<T>& image, UNetTrace<T>* trace) const {
    if (image.channels != config_.in_channels || image.height != config_.input_side ||
        image.width != config_.input_side)
        throw std::invalid_argument("network input does not match the configured side/channels");
    UNetTrace<T> local;
    UNetTrace<T>& tr = trace ? *trace : local;
    const int levels = config_.levels();
    tr.encoder.assign(levels, {});
    tr.decoder.assign(decoder_.size(), {});

    auto run_block = [&](const Level& lv, typename UNetTrace<T>::Block& b) {
        conv(lv.c1, b.in, b.z1);
        kernels::silu_forward(b.z1, b.a1);
        conv(lv.c2, b.a1, b.z2);
        kernels::silu_forward(b.z2, b.out);
    };
    for (int l = 0; l < levels; ++l) {
        auto& b = tr.encoder[l];
        if (l == 0) b.in = image;
        else kernels::avg_pool2_forward(tr.encoder[l - 1].out, b.in);
        run_block(encoder_[l], b);
    }
    const Tensor<T>* d = &tr.encoder[levels - 1].out;
    for (int l = levels - 2; l >= 0; --l) {
        auto& b = tr.decoder[l];
        Tensor<T> up;
        kernels::upsample2_forward(*d, up);
        kernels::concat_channels(up, tr.encoder[l].out, b.in);
        run_block(decoder_[l], b);
        d = &b.out;
    }
    return *d;
}

template <typename T>
void Network<T>::backward_features(const UNetTrace<T>& tr, const Tensor<T>& dfeatures,
                                   std::vector<std::vector<T>>& grads) const {
    const int levels = config_.levels();
    const auto& w = config_.widths;
    // Returns the gradient w.r.t. the block input (if requested).
    auto back_block = [&](const Level& lv, const typename UNetTrace<T>::Block& b, const Tensor<T>& dout,
                          Tensor<T>* din) {
        Tensor<T> dz2, da1, dz1;
        kernels::silu_backward(b.z2, dout, dz2);
        conv_back(lv.c2, b.a1, dz2, grads, &da1);
        kernels::silu_backward(b.z1, da1, dz1);
        conv_back(lv.c1, b.in, dz1, grads, din);
    };

    std::vector<Tensor<T>> dskip(static_cast<std::size_t>(levels));
    Tensor<T> dd = dfeatures;
    for (int l = 0; l <= levels - 2; ++l) {
        Tensor<T> dcat, dup;
        back_block(decoder_[l], tr.decoder[l], dd, &dcat);
        kernels::split_channels(dcat, w[l + 1], dup, dskip[l]);
        kernels::upsample2_backward(dup, dd);
    }
    Tensor<T> din;
    for (int l = levels - 1; l >= 0; --l) {
        Tensor<T> dout;
        if (l == levels - 1) {
            dout = std::move(dd);
        } else {
            kernels::avg_pool2_backward(din, dout);
            const auto& skip = dskip[l];
            for (std::size_t i = 0; i < dout.size(); ++i) dout.data[i] += skip.data[i];
        }
        back_block(encoder_[l], tr.encoder[l], dout, l > 0 ? &din : nullptr);
    }
}

template <typename T>
Tensor<T> Network<T>::localize(const Tensor<T>& image) const {
    const Tensor<T> f = features(image);
    Tensor<T> logits, prob;
    conv(loc_head_, f, logits);
    kernels::sigmoid_forward(logits, prob);
    return prob;
}

template <typename T>
Tensor<T> Network<T>::fuse(const Tensor<T>& pre_features, const Tensor<T>& post_features) const {
    if (!has_fusion()) throw std::invalid_argument("parameter set has no fusion layer");
    Tensor<T> cat, logits, prob;
    kernels::concat_channels(pre_features, post_features, cat);
    kernels::conv2d_forward<T>(cat, weight(fusion_w_), weight(fusion_b_), MaskStack::kChannels, 1, logits);
    kernels::sigmoid_forward(logits, prob);
    return prob;
}

namespace {

template <typename T>
Tensor<T> sigmoid_backward(const Tensor<T>& prob, const std::vector<T>& dprob) {
    Tensor<T> d(prob.channels, prob.height, prob.width);
    for (std::size_t i = 0; i < d.size(); ++i) d.data[i] = dprob[i] * prob.data[i] * (T(1) - prob.data[i]);
    return d;
}

}  // namespace

template <typename T>
LossTerms Network<T>::siamese_loss_and_grad(const Tensor<T>& pre, const Tensor<T>& post, const Tensor<T>& target,
                                            const LossConfig& loss, std::vector<std::vector<T>>& grads,
                                            Tensor<T>* prediction) const {
    if (!has_fusion()) throw std::invalid_argument("parameter set has no fusion layer");
    UNetTrace<T> tp, tq;
    const Tensor<T> fp = features(pre, &tp);
    const Tensor<T> fq = features(post, &tq);
    Tensor<T> cat, logits, prob;
    kernels::concat_channels(fp, fq, cat);
    kernels::conv2d_forward<T>(cat, weight(fusion_w_), weight(fusion_b_), MaskStack::kChannels, 1, logits);
    kernels::sigmoid_forward(logits, prob);
    if (!target.same_shape(prob)) throw std::invalid_argument("target shape does not match the network output");

    std::vector<T> dprob(prob.size());
    const LossTerms terms = combined_loss<T>(prob.span(), target.span(), prob.channels, loss, dprob);
    const Tensor<T> dlogits = sigmoid_backward(prob, dprob);
    Tensor<T> dcat, dfp, dfq;
    kernels::conv2d_backward<T>(cat, weight(fusion_w_), dlogits, 1, grads[fusion_w_], grads[fusion_b_], &dcat);
    kernels::split_channels(dcat, fp.channels, dfp, dfq);
    backward_features(tp, dfp, grads);
    backward_features(tq, dfq, grads);
    if (prediction) *prediction = std::move(prob);
    return terms;
}

template <typename T>
LossTerms Network<T>::localization_loss_and_grad(const Tensor<T>& pre, const Tensor<T>& target,
                                                 const LossConfig& loss, std::vector<std::vector<T>>& grads,
                                                 Tensor<T>* prediction) const {
    UNetTrace<T> tr;
    const Tensor<T> f = features(pre, &tr);
    Tensor<T> logits, prob;
    conv(loc_head_, f, logits);
    kernels::sigmoid_forward(logits, prob);
    if (!target.same_shape(prob)) throw std::invalid_argument("target shape does not match the network output");

    std::vector<T> dprob(prob.size());
    const LossTerms terms = combined_loss<T>(prob.span(), target.span(), 1, loss, dprob);
    const Tensor<T> dlogits = sigmoid_backward(prob, dprob);
    Tensor<T> df;
    conv_back(loc_head_, f, dlogits, grads, &df);
    backward_features(tr, df, grads);
    if (prediction) *prediction = std::move(prob);
    return terms;
}

template class Network<float>;
template class Network<double>;

template <typename T>
Tensor<T> to_tensor(const RasterImage& image) {
    Tensor<T> t(image.channels, image.height, image.width);
    std::copy(image.pixels.begin(), image.pixels.end(), t.data.begin());
    return t;
}

template <typename T>
Tensor<T> to_tensor(const MaskStack& mask, int channels) {
    Tensor<T> t(channels, mask.height, mask.width);
    std::copy_n(mask.data.begin(), t.size(), t.data.begin());
    return t;
}

template Tensor<float> to_tensor<float>(const RasterImage&);
template Tensor<double> to_tensor<double>(const RasterImage&);
template Tensor<float> to_tensor<float>(const MaskStack&, int);
template Tensor<double> to_tensor<double>(const MaskStack&, int);

MaskStack to_mask_stack(const Tensor<float>& t) {
    if (t.channels != MaskStack::kChannels) throw std::invalid_argument("tensor is not a 5-channel stack");
    MaskStack m(t.width, t.height);
    m.data = t.data;
    return m;
}

std::vector<float> forward_localization(const ModelParams& params, const RasterImage& pre) {
    const Network<float> net(params);
    return net.localize(to_tensor<float>(pre)).data;
}

MaskStack forward_siamese(const ModelParams& params, const RasterImage& pre, const RasterImage& post) {
    if (pre.width != post.width || pre.height != post.height)
        throw std::invalid_argument("pre and post images differ in shape");
    const Network<float> net(params);
    return to_mask_stack(net.fuse(net.features(to_tensor<float>(pre)), net.features(to_tensor<float>(post))));
}

MaskStack mean_of(const std::vector<MaskStack>& stacks) {
    if (stacks.empty()) throw std::invalid_argument("cannot average an empty set of predictions");
    MaskStack mean = stacks.front();
    for (std::size_t k = 1; k < stacks.size(); ++k) {
        const auto& s = stacks[k];
        if (s.width != mean.width || s.height != mean.height) throw std::invalid_argument("prediction shapes differ");
        const float inv = 1.0f / static_cast<float>(k + 1);
        for (std::size_t i = 0; i < mean.data.size(); ++i) mean.data[i] += (s.data[i] - mean.data[i]) * inv;
    }
    return mean;
}

MaskStack ensemble_predict(const std::vector<ModelParams>& models, const RasterImage& pre, const RasterImage& post) {
    if (models.empty()) throw std::invalid_argument("ensemble needs at least one model");
    std::vector<MaskStack> outs;
    outs.reserve(models.size());
    for (const auto& m : models) {
        if (m.config.input_side != models.front().config.input_side)
            throw std::invalid_argument("ensemble members disagree on input side");
        outs.push_back(forward_siamese(m, pre, post));
    }
    return mean_of(outs);
}

// ---------------------------------------------------------------------------
// Decision
// ---------------------------------------------------------------------------

void DecisionRule::validate() const {
    if (!(loc_threshold > 0.0 && loc_threshold < 1.0))
        throw std::invalid_argument("localization threshold must lie strictly inside (0,1)");
}

GradeMap decide(const MaskStack& pred, const DecisionRule& rule) {
    rule.validate();
    GradeMap out(pred.width, pred.height, 0);
    const std::size_t n = pred.plane_size();
    for (std::size_t i = 0; i < n; ++i) {
        if (pred.data[i] < rule.loc_threshold) continue;
        std::uint8_t grade = 1;
        if (rule.mode == DecisionMode::argmax) {
            float best = pred.data[n + i];
            for (int g = 2; g <= kNumGrades; ++g)
                if (pred.data[g * n + i] > best) {
                    best = pred.data[g * n + i];
                    grade = static_cast<std::uint8_t>(g);
                }
        } else {
            double num = 0.0, den = 0.0;
            for (int g = 1; g <= kNumGrades; ++g) {
                num += g * static_cast<double>(pred.data[g * n + i]);
                den += pred.data[g * n + i];
            }
            if (den > 0.0) {
                const double d = std::floor(num / den + 0.5);
                grade = static_cast<std::uint8_t>(std::clamp(d, 1.0, static_cast<double>(kNumGrades)));
            }
        }
        out.codes[i] = grade;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'D', 'M', 'G', 'N', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian hosts");

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
    nlohmann::json header;
    header["config"] = to_json(params.config);
    header["tensors"] = nlohmann::json::array();
    for (const auto& t : params.tensors) header["tensors"].push_back({{"name", t.name}, {"shape", t.shape}});
    const std::string text = header.dump();

    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
    const std::uint64_t len = text.size();
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& t : params.tensors)
        out.write(reinterpret_cast<const char*>(t.values.data()),
                  static_cast<std::streamsize>(t.values.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    char magic[8];
    std::uint32_t version = 0;
    std::uint64_t len = 0;
    in.read(magic, sizeof magic);
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    in.read(reinterpret_cast<char*>(&len), sizeof len);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0 || version != kVersion || len > (1u << 26))
        throw std::runtime_error("not a dmgnet checkpoint: " + path.string());
    std::string text(len, '\0');
    in.read(text.data(), static_cast<std::streamsize>(len));
    const auto header = nlohmann::json::parse(text);
    ModelParams p;
    p.config = network_config_from_json(header.at("config"));
    for (const auto& jt : header.at("tensors")) {
        ParamTensor t{jt.at("name").get<std::string>(), jt.at("shape").get<std::vector<int>>(), {}};
        std::size_t n = 1;
        for (int d : t.shape) n *= static_cast<std::size_t>(d);
        t.values.resize(n);
        in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(n * sizeof(double)));
        p.tensors.push_back(std::move(t));
    }
    if (!in) throw std::runtime_error("truncated checkpoint " + path.string());
    return p;
}

}  // namespace dmgnet
