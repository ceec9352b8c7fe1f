#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace dmgnet {

/// Dense channels x height x width feature volume, row-major planes.
template <typename T>
struct Tensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int c, int h, int w, T fill = T(0))
        : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

    std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
    std::size_t size() const { return data.size(); }
    T* plane(int c) { return data.data() + c * plane_size(); }
    const T* plane(int c) const { return data.data() + c * plane_size(); }
    T& at(int c, int y, int x) { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
    T at(int c, int y, int x) const { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
    std::span<T> span() { return data; }
    std::span<const T> span() const { return data; }

    bool same_shape(const Tensor& o) const { return channels == o.channels && height == o.height && width == o.width; }
};

}  // namespace dmgnet
