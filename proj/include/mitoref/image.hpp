#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <vector>

#include "mitoref/errors.hpp"

namespace mitoref {

using Vec3 = std::array<double, 3>;

/// 8-bit three-channel raster image, row-major interleaved RGB.
struct ImageRGB8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    ImageRGB8() = default;

    ImageRGB8(int w, int h, std::uint8_t fill = 255)
        : width(w), height(h) {
        if (w <= 0 || h <= 0) throw Error("image dimensions must be positive");
        pixels.assign(static_cast<std::size_t>(w) * h * 3, fill);
    }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool valid() const {
        return width > 0 && height > 0 &&
               pixels.size() == static_cast<std::size_t>(width) * height * 3;
    }

    const std::uint8_t* px(int x, int y) const {
        return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }
    std::uint8_t* px(int x, int y) {
        return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
    }

    Vec3 px_d(int x, int y) const {
        const std::uint8_t* p = px(x, y);
        return {static_cast<double>(p[0]), static_cast<double>(p[1]),
                static_cast<double>(p[2])};
    }

    void set_px(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
        std::uint8_t* p = px(x, y);
        p[0] = r;
        p[1] = g;
        p[2] = b;
    }
};

/// Planar double-precision three-channel image; carrier for lab / OD pixels.
struct Image3d {
    int width = 0;
    int height = 0;
    std::vector<Vec3> pixels;

    Image3d() = default;
    Image3d(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h) {}

    const Vec3& at(std::size_t i) const { return pixels[i]; }
    Vec3& at(std::size_t i) { return pixels[i]; }
};

/// Round half up, then clip to [0, 255].
inline std::uint8_t quantize_u8(double v) {
    double r = std::floor(v + 0.5);
    if (r < 0.0) return 0;
    if (r > 255.0) return 255;
    return static_cast<std::uint8_t>(r);
}

inline void check_image(const ImageRGB8& img) {
    if (!img.valid()) throw Error("invalid image: empty or inconsistent buffer");
}

}  // namespace mitoref
