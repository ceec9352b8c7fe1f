#include "dmgnet/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace dmgnet::kernels {

namespace {

// Pixels per work chunk. Fixed so that chunk boundaries (and therefore
// every GEMM's shape and summation order) never depend on the thread count.
constexpr int kChunkPixels = 2048;

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using StridedMap = Eigen::Map<RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ConstStridedMap = Eigen::Map<const RowMat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using ArrayMap = Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>>;
template <typename T>
using ConstArrayMap = Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>>;

struct Chunking {
    int rows_per_chunk;
    int count;
};

Chunking chunking(int height, int width) {
    const int rows = std::max(1, kChunkPixels / std::max(1, width));
    return {rows, (height + rows - 1) / rows};
}

void check_conv(int in_c, std::size_t weight_size, int out_c, int ksize) {
    if (ksize < 1 || ksize % 2 == 0) throw std::invalid_argument("convolution kernel size must be odd");
    if (weight_size != static_cast<std::size_t>(out_c) * in_c * ksize * ksize)
        throw std::invalid_argument("convolution weight size does not match shape");
}

// Column buffer for rows [r0, r1): row index (ci, ky, kx), column = pixel in chunk.
template <typename T>
void im2col_chunk(const Tensor<T>& in, int ksize, int r0, int r1, std::vector<T>& col) {
    const int w = in.width, h = in.height, pad = ksize / 2;
    const std::size_t n = static_cast<std::size_t>(r1 - r0) * w;
    col.resize(static_cast<std::size_t>(in.channels) * ksize * ksize * n);
    for (int ci = 0; ci < in.channels; ++ci) {
        const T* src = in.plane(ci);
        for (int ky = 0; ky < ksize; ++ky)
            for (int kx = 0; kx < ksize; ++kx) {
                T* dst = col.data() + ((static_cast<std::size_t>(ci) * ksize + ky) * ksize + kx) * n;
                const int dx = kx - pad;
                const int x_lo = std::min(w, std::max(0, -dx)), x_hi = std::max(x_lo, std::min(w, w - dx));
                for (int y = r0; y < r1; ++y) {
                    const int iy = y + ky - pad;
                    T* row = dst + static_cast<std::size_t>(y - r0) * w;
                    if (iy < 0 || iy >= h) {
                        std::fill(row, row + w, T(0));
                        continue;
                    }
                    std::fill(row, row + x_lo, T(0));
                    std::memcpy(row + x_lo, src + static_cast<std::size_t>(iy) * w + x_lo + dx,
                                sizeof(T) * static_cast<std::size_t>(x_hi - x_lo));
                    std::fill(row + x_hi, row + w, T(0));
                }
            }
    }
}

// Weight for the input-gradient convolution: [in][out][k][k], spatially flipped.
template <typename T>
std::vector<T> flipped_transpose(std::span<const T> weight, int out_c, int in_c, int ksize) {
    const int kk = ksize * ksize;
    std::vector<T> wt(weight.size());
    for (int co = 0; co < out_c; ++co)
        for (int ci = 0; ci < in_c; ++ci)
            for (int k = 0; k < kk; ++k)
                wt[(static_cast<std::size_t>(ci) * out_c + co) * kk + (kk - 1 - k)] =
                    weight[(static_cast<std::size_t>(co) * in_c + ci) * kk + k];
    return wt;
}

}  // namespace

template <typename T>
void conv2d_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, int out_channels,
                    int ksize, Tensor<T>& out) {
    check_conv(in.channels, weight.size(), out_channels, ksize);
    if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels))
        throw std::invalid_argument("convolution bias size does not match");
    if (!(out.channels == out_channels && out.height == in.height && out.width == in.width))
        out = Tensor<T>(out_channels, in.height, in.width);
    const int w = in.width;
    const std::size_t hw = in.plane_size();
    const int kdim = in.channels * ksize * ksize;
    const ConstMap<T> wm(weight.data(), out_channels, kdim);
    const Chunking ch = chunking(in.height, w);

#pragma omp parallel
    {
        std::vector<T> col;
#pragma omp for schedule(static)
        for (int c = 0; c < ch.count; ++c) {
            const int r0 = c * ch.rows_per_chunk, r1 = std::min(in.height, r0 + ch.rows_per_chunk);
            const std::size_t p0 = static_cast<std::size_t>(r0) * w;
            const Eigen::Index n = static_cast<Eigen::Index>(r1 - r0) * w;
            StridedMap<T> om(out.data.data() + p0, out_channels, n, Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
            if (ksize == 1) {
                ConstStridedMap<T> im(in.data.data() + p0, in.channels, n, Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
                om.noalias() = wm * im;
            } else {
                im2col_chunk(in, ksize, r0, r1, col);
                const ConstMap<T> cm(col.data(), kdim, n);
                om.noalias() = wm * cm;
            }
            if (!bias.empty())
                for (int co = 0; co < out_channels; ++co) om.row(co).array() += bias[co];
        }
    }
}

template <typename T>
void conv2d_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& dout, int ksize,
                     std::span<T> dweight, std::span<T> dbias, Tensor<T>* din) {
    const int out_channels = dout.channels;
    check_conv(in.channels, weight.size(), out_channels, ksize);
    if (dweight.size() != weight.size()) throw std::invalid_argument("weight gradient size mismatch");
    if (dbias.size() != static_cast<std::size_t>(out_channels)) throw std::invalid_argument("bias gradient size mismatch");
    if (dout.height != in.height || dout.width != in.width) throw std::invalid_argument("gradient shape mismatch");

    const int w = in.width;
    const std::size_t hw = in.plane_size();
    const int kdim = in.channels * ksize * ksize;
    const Chunking ch = chunking(in.height, w);
    std::vector<RowMat<T>> partial(static_cast<std::size_t>(ch.count));

#pragma omp parallel
    {
        std::vector<T> col;
#pragma omp for schedule(static)
        for (int c = 0; c < ch.count; ++c) {
            const int r0 = c * ch.rows_per_chunk, r1 = std::min(in.height, r0 + ch.rows_per_chunk);
            const std::size_t p0 = static_cast<std::size_t>(r0) * w;
            const Eigen::Index n = static_cast<Eigen::Index>(r1 - r0) * w;
            ConstStridedMap<T> dm(dout.data.data() + p0, out_channels, n, Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
            if (ksize == 1) {
                ConstStridedMap<T> im(in.data.data() + p0, in.channels, n, Eigen::OuterStride<>(static_cast<Eigen::Index>(hw)));
                partial[c].noalias() = dm * im.transpose();
            } else {
                im2col_chunk(in, ksize, r0, r1, col);
                const ConstMap<T> cm(col.data(), kdim, n);
                partial[c].noalias() = dm * cm.transpose();
            }
        }
    }
    Eigen::Map<RowMat<T>> dw(dweight.data(), out_channels, kdim);
    for (const auto& p : partial) dw += p;

    for (int co = 0; co < out_channels; ++co) {
        const T* g = dout.plane(co);
        T acc = T(0);
        for (std::size_t i = 0; i < hw; ++i) acc += g[i];
        dbias[co] += acc;
    }

    if (din) {
        const std::vector<T> wt = flipped_transpose(weight, out_channels, in.channels, ksize);
        conv2d_forward<T>(dout, wt, {}, in.channels, ksize, *din);
    }
}

template <typename T>
void avg_pool2_forward(const Tensor<T>& in, Tensor<T>& out) {
    if (in.height % 2 || in.width % 2) throw std::invalid_argument("pooling needs even spatial size");
    out = Tensor<T>(in.channels, in.height / 2, in.width / 2);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x)
                out.at(c, y, x) = T(0.25) * ((in.at(c, 2 * y, 2 * x) + in.at(c, 2 * y, 2 * x + 1)) +
                                             (in.at(c, 2 * y + 1, 2 * x) + in.at(c, 2 * y + 1, 2 * x + 1)));
}

template <typename T>
void avg_pool2_backward(const Tensor<T>& dout, Tensor<T>& din) {
    din = Tensor<T>(dout.channels, dout.height * 2, dout.width * 2);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < dout.channels; ++c)
        for (int y = 0; y < din.height; ++y)
            for (int x = 0; x < din.width; ++x) din.at(c, y, x) = T(0.25) * dout.at(c, y / 2, x / 2);
}

template <typename T>
void upsample2_forward(const Tensor<T>& in, Tensor<T>& out) {
    out = Tensor<T>(in.channels, in.height * 2, in.width * 2);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < in.channels; ++c)
        for (int y = 0; y < out.height; ++y)
            for (int x = 0; x < out.width; ++x) out.at(c, y, x) = in.at(c, y / 2, x / 2);
}

template <typename T>
void upsample2_backward(const Tensor<T>& dout, Tensor<T>& din) {
    din = Tensor<T>(dout.channels, dout.height / 2, dout.width / 2);
#pragma omp parallel for schedule(static)
    for (int c = 0; c < din.channels; ++c)
        for (int y = 0; y < din.height; ++y)
            for (int x = 0; x < din.width; ++x)
                din.at(c, y, x) = (dout.at(c, 2 * y, 2 * x) + dout.at(c, 2 * y, 2 * x + 1)) +
                                  (dout.at(c, 2 * y + 1, 2 * x) + dout.at(c, 2 * y + 1, 2 * x + 1));
}

// Evaluated in aligned scratch arrays so the vectorized and scalar exp paths
// split each chunk the same way regardless of where the tensor lives.
template <typename T>
void silu_forward(const Tensor<T>& in, Tensor<T>& out) {
    if (!out.same_shape(in)) out = Tensor<T>(in.channels, in.height, in.width);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(in.size());
#pragma omp parallel
    {
        Eigen::Array<T, Eigen::Dynamic, 1> x, y;
#pragma omp for schedule(static)
        for (std::ptrdiff_t b = 0; b < n; b += kChunkPixels) {
            const std::ptrdiff_t len = std::min<std::ptrdiff_t>(kChunkPixels, n - b);
            x = ConstArrayMap<T>(in.data.data() + b, len);
            y = x / (T(1) + (-x).exp());
            ArrayMap<T>(out.data.data() + b, len) = y;
        }
    }
}

template <typename T>
void silu_backward(const Tensor<T>& pre, const Tensor<T>& dout, Tensor<T>& din) {
    if (!din.same_shape(pre)) din = Tensor<T>(pre.channels, pre.height, pre.width);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(pre.size());
#pragma omp parallel
    {
        Eigen::Array<T, Eigen::Dynamic, 1> x, g, s, y;
#pragma omp for schedule(static)
        for (std::ptrdiff_t b = 0; b < n; b += kChunkPixels) {
            const std::ptrdiff_t len = std::min<std::ptrdiff_t>(kChunkPixels, n - b);
            x = ConstArrayMap<T>(pre.data.data() + b, len);
            g = ConstArrayMap<T>(dout.data.data() + b, len);
            s = T(1) / (T(1) + (-x).exp());
            y = g * s * (T(1) + x * (T(1) - s));
            ArrayMap<T>(din.data.data() + b, len) = y;
        }
    }
}

template <typename T>
void sigmoid_forward(const Tensor<T>& in, Tensor<T>& out) {
    if (!out.same_shape(in)) out = Tensor<T>(in.channels, in.height, in.width);
    for (std::size_t i = 0; i < in.size(); ++i) out.data[i] = T(1) / (T(1) + std::exp(-in.data[i]));
}

template <typename T>
void concat_channels(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
    if (a.height != b.height || a.width != b.width) throw std::invalid_argument("concat spatial mismatch");
    out = Tensor<T>(a.channels + b.channels, a.height, a.width);
    std::copy(a.data.begin(), a.data.end(), out.data.begin());
    std::copy(b.data.begin(), b.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
}

template <typename T>
void split_channels(const Tensor<T>& in, int first_channels, Tensor<T>& a, Tensor<T>& b) {
    a = Tensor<T>(first_channels, in.height, in.width);
    b = Tensor<T>(in.channels - first_channels, in.height, in.width);
    std::copy(in.data.begin(), in.data.begin() + static_cast<std::ptrdiff_t>(a.size()), a.data.begin());
    std::copy(in.data.begin() + static_cast<std::ptrdiff_t>(a.size()), in.data.end(), b.data.begin());
}

namespace reference {

template <typename T>
void conv2d_forward(const Tensor<T>& in, std::span<const T> weight, std::span<const T> bias, int out_channels,
                    int ksize, Tensor<T>& out) {
    check_conv(in.channels, weight.size(), out_channels, ksize);
    out = Tensor<T>(out_channels, in.height, in.width);
    const int pad = ksize / 2;
    for (int co = 0; co < out_channels; ++co)
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x) {
                T acc = bias.empty() ? T(0) : bias[co];
                for (int ci = 0; ci < in.channels; ++ci)
                    for (int ky = 0; ky < ksize; ++ky)
                        for (int kx = 0; kx < ksize; ++kx) {
                            const int iy = y + ky - pad, ix = x + kx - pad;
                            if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
                            acc += weight[((static_cast<std::size_t>(co) * in.channels + ci) * ksize + ky) * ksize + kx] *
                                   in.at(ci, iy, ix);
                        }
                out.at(co, y, x) = acc;
            }
}

template <typename T>
void conv2d_backward(const Tensor<T>& in, std::span<const T> weight, const Tensor<T>& dout, int ksize,
                     std::span<T> dweight, std::span<T> dbias, Tensor<T>* din) {
    check_conv(in.channels, weight.size(), dout.channels, ksize);
    const int pad = ksize / 2;
    if (din) *din = Tensor<T>(in.channels, in.height, in.width);
    for (int co = 0; co < dout.channels; ++co)
        for (int y = 0; y < in.height; ++y)
            for (int x = 0; x < in.width; ++x) {
                const T g = dout.at(co, y, x);
                dbias[co] += g;
                for (int ci = 0; ci < in.channels; ++ci)
                    for (int ky = 0; ky < ksize; ++ky)
                        for (int kx = 0; kx < ksize; ++kx) {
                            const int iy = y + ky - pad, ix = x + kx - pad;
                            if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
                            const std::size_t wi = ((static_cast<std::size_t>(co) * in.channels + ci) * ksize + ky) * ksize + kx;
                            dweight[wi] += g * in.at(ci, iy, ix);
                            if (din) din->at(ci, iy, ix) += g * weight[wi];
                        }
            }
}

}  // namespace reference

#define DMGNET_INSTANTIATE(T)                                                                                  \
    template void conv2d_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, int, int,        \
                                    Tensor<T>&);                                                               \
    template void conv2d_backward<T>(const Tensor<T>&, std::span<const T>, const Tensor<T>&, int, std::span<T>, \
                                     std::span<T>, Tensor<T>*);                                                \
    template void avg_pool2_forward<T>(const Tensor<T>&, Tensor<T>&);                                          \
    template void avg_pool2_backward<T>(const Tensor<T>&, Tensor<T>&);                                         \
    template void upsample2_forward<T>(const Tensor<T>&, Tensor<T>&);                                          \
    template void upsample2_backward<T>(const Tensor<T>&, Tensor<T>&);                                         \
    template void silu_forward<T>(const Tensor<T>&, Tensor<T>&);                                               \
    template void silu_backward<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                            \
    template void sigmoid_forward<T>(const Tensor<T>&, Tensor<T>&);                                            \
    template void concat_channels<T>(const Tensor<T>&, const Tensor<T>&, Tensor<T>&);                          \
    template void split_channels<T>(const Tensor<T>&, int, Tensor<T>&, Tensor<T>&);                            \
    template void reference::conv2d_forward<T>(const Tensor<T>&, std::span<const T>, std::span<const T>, int,  \
                                               int, Tensor<T>&);                                               \
    template void reference::conv2d_backward<T>(const Tensor<T>&, std::span<const T>, const Tensor<T>&, int,   \
                                                std::span<T>, std::span<T>, Tensor<T>*);

DMGNET_INSTANTIATE(float)
DMGNET_INSTANTIATE(double)

#undef DMGNET_INSTANTIATE

}  // namespace dmgnet::kernels
