#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lsd2/error.hpp"

namespace lsd2 {

// Linear-light RGB raster, 32-bit float, row-major interleaved. Values are
// non-negative and may exceed 1 before the final clip (saturation synthesis
// works on the unclipped scaled image).
struct Image {
    int width = 0;
    int height = 0;
    static constexpr int channels = 3;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, float fill = 0.0f)
        : width(w), height(h), data(static_cast<size_t>(w) * h * channels, fill) {}

    size_t size() const { return data.size(); }
    size_t pixel_count() const { return static_cast<size_t>(width) * height; }

    float& at(int x, int y, int c) {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }
    float at(int x, int y, int c) const {
        return data[(static_cast<size_t>(y) * width + x) * channels + c];
    }

    bool same_shape(const Image& other) const {
        return width == other.width && height == other.height;
    }
};

// Per-channel affine intensity map v -> a[c]*v + b[c] (the short-exposure
// underexposure/color-distortion model).
struct ChannelAffine {
    std::array<double, 3> a{1.0, 1.0, 1.0};
    std::array<double, 3> b{0.0, 0.0, 0.0};
};

namespace detail {
inline void require_finite(const Image& img, const char* op) {
    for (float v : img.data) {
        if (!std::isfinite(v)) {
            throw InvalidInputError(std::string(op) + ": non-finite input value");
        }
    }
}
} // namespace detail

// sRGB-style decode: v -> v^gamma, taking display-referred values to linear
// light. Input must be in [0, 1].
inline Image gamma_decode(const Image& img, double gamma = 2.2) {
    detail::require_finite(img, "gamma_decode");
    Image out = img;
    for (float& v : out.data) {
        v = static_cast<float>(std::pow(static_cast<double>(v), gamma));
    }
    return out;
}

// Inverse of gamma_decode: v -> v^(1/gamma). Input must be >= 0.
inline Image gamma_encode(const Image& img, double gamma = 2.2) {
    detail::require_finite(img, "gamma_encode");
    Image out = img;
    const double inv = 1.0 / gamma;
    for (float& v : out.data) {
        v = static_cast<float>(std::pow(static_cast<double>(v), inv));
    }
    return out;
}

// Global intensity scale (the saturation-synthesis multiplier s). Values may
// exceed 1 afterwards; clipping is a separate step.
inline Image scale(const Image& img, double s) {
    if (!(s > 0.0)) {
        throw InvalidParameterError("scale: s must be > 0");
    }
    Image out = img;
    for (float& v : out.data) {
        v = static_cast<float>(v * s);
    }
    return out;
}

// Clamp to [0, max_val]. The floor at 0 keeps the Image invariant after
// operations that can produce small negatives.
inline Image clip(const Image& img, double max_val = 1.0) {
    Image out = img;
    const float hi = static_cast<float>(max_val);
    for (float& v : out.data) {
        v = std::min(std::max(v, 0.0f), hi);
    }
    return out;
}

// Apply a per-channel affine map. No clipping here.
inline Image affine_channels(const Image& img, const ChannelAffine& t) {
    Image out(img.width, img.height);
    const size_t n = img.pixel_count();
    for (size_t i = 0; i < n; ++i) {
        for (int c = 0; c < 3; ++c) {
            const size_t idx = i * 3 + c;
            out.data[idx] = static_cast<float>(t.a[c] * img.data[idx] + t.b[c]);
        }
    }
    return out;
}

inline double channel_mean(const Image& img, int c) {
    double sum = 0.0;
    const size_t n = img.pixel_count();
    for (size_t i = 0; i < n; ++i) {
        sum += img.data[i * 3 + c];
    }
    return n ? sum / static_cast<double>(n) : 0.0;
}

} // namespace lsd2
