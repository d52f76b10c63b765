#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace lf {

enum class ColorSpace { LinearRGB, SRGB, Lab };

//! Planar-agnostic interleaved float image, row-major, values nominally in [0,1]
//! for RGB data. Lab images store (L, a, b) unscaled.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, int c, float fill = 0.0f)
        : width(w), height(h), channels(c),
          data(static_cast<size_t>(w) * h * c, fill) {
        if (w <= 0 || h <= 0 || c <= 0)
            throw std::invalid_argument("Image: non-positive dimensions");
    }

    size_t index(int x, int y, int c) const {
        return (static_cast<size_t>(y) * width + x) * channels + c;
    }
    float& at(int x, int y, int c) { return data[index(x, y, c)]; }
    float at(int x, int y, int c) const { return data[index(x, y, c)]; }

    //! Clamp-to-edge access, used by interpolators and border-aware filters.
    float at_clamped(int x, int y, int c) const {
        x = std::clamp(x, 0, width - 1);
        y = std::clamp(y, 0, height - 1);
        return data[index(x, y, c)];
    }

    bool same_shape(const Image& o) const {
        return width == o.width && height == o.height && channels == o.channels;
    }
    bool empty() const { return data.empty(); }
};

//! Mirror an index into [0, n): -1 -> 0, -2 -> 1, n -> n-1, n+1 -> n-2.
inline int mirror_index(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

//! Bilinear sample with clamp-to-edge semantics.
inline float bilinear(const Image& img, float fx, float fy, int c) {
    int x0 = static_cast<int>(std::floor(fx));
    int y0 = static_cast<int>(std::floor(fy));
    float ax = fx - x0, ay = fy - y0;
    float v00 = img.at_clamped(x0, y0, c), v10 = img.at_clamped(x0 + 1, y0, c);
    float v01 = img.at_clamped(x0, y0 + 1, c), v11 = img.at_clamped(x0 + 1, y0 + 1, c);
    return (1 - ay) * ((1 - ax) * v00 + ax * v10) + ay * ((1 - ax) * v01 + ax * v11);
}

} // namespace lf
