#pragma once

#include <array>
#include <cmath>

#include "mitoref/image.hpp"

namespace mitoref {

using Mat3 = std::array<std::array<double, 3>, 3>;

namespace detail {

// RGB -> LMS cone response (Reinhard et al. color transfer).
inline constexpr Mat3 kRgbToLms = {{{0.3811, 0.5783, 0.0402},
                                    {0.1967, 0.7244, 0.0782},
                                    {0.0241, 0.1288, 0.8444}}};

inline constexpr Mat3 invert3(const Mat3& m) {
    const double a = m[0][0], b = m[0][1], c = m[0][2];
    const double d = m[1][0], e = m[1][1], f = m[1][2];
    const double g = m[2][0], h = m[2][1], i = m[2][2];
    const double det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g);
    Mat3 r{};
    r[0] = {(e * i - f * h) / det, (c * h - b * i) / det, (b * f - c * e) / det};
    r[1] = {(f * g - d * i) / det, (a * i - c * g) / det, (c * d - a * f) / det};
    r[2] = {(d * h - e * g) / det, (b * g - a * h) / det, (a * e - b * d) / det};
    return r;
}

// Exact inverse rather than the rounded published one: the 4-digit published
// matrix drifts round trips by up to 2 intensity levels.
inline constexpr Mat3 kLmsToRgb = invert3(kRgbToLms);

inline constexpr double kInvSqrt3 = 0.5773502691896258;
inline constexpr double kInvSqrt6 = 0.4082482904638630;
inline constexpr double kInvSqrt2 = 0.7071067811865476;

inline Vec3 mat_mul(const Mat3& m, const Vec3& v) {
    return {m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2]};
}

}  // namespace detail

/// One RGB triple (0..255 range, double) to Ruderman lab. The log is taken on
/// (LMS + 1) so that pure black stays finite.
inline Vec3 rgb_to_lab_px(const Vec3& rgb) {
    const Vec3 lms = detail::mat_mul(detail::kRgbToLms, rgb);
    const double l0 = std::log10(lms[0] + 1.0);
    const double l1 = std::log10(lms[1] + 1.0);
    const double l2 = std::log10(lms[2] + 1.0);
    return {detail::kInvSqrt3 * (l0 + l1 + l2),
            detail::kInvSqrt6 * (l0 + l1 - 2.0 * l2),
            detail::kInvSqrt2 * (l0 - l1)};
}

/// Inverse of rgb_to_lab_px, without clipping or quantization.
inline Vec3 lab_to_rgb_px(const Vec3& lab) {
    const double t1 = detail::kInvSqrt3 * lab[0];
    const double t2 = detail::kInvSqrt6 * lab[1];
    const double t3 = detail::kInvSqrt2 * lab[2];
    const Vec3 loglms = {t1 + t2 + t3, t1 + t2 - t3, t1 - 2.0 * t2};
    const Vec3 lms = {std::pow(10.0, loglms[0]) - 1.0,
                      std::pow(10.0, loglms[1]) - 1.0,
                      std::pow(10.0, loglms[2]) - 1.0};
    return detail::mat_mul(detail::kLmsToRgb, lms);
}

/// Map a whole image RGB -> LMS -> log-LMS -> lab.
inline Image3d rgb_to_lab(const ImageRGB8& img) {
    check_image(img);
    Image3d out(img.width, img.height);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* p = img.pixels.data() + 3 * i;
        out.pixels[i] = rgb_to_lab_px({static_cast<double>(p[0]),
                                       static_cast<double>(p[1]),
                                       static_cast<double>(p[2])});
    }
    return out;
}

/// Inverse transform back to an 8-bit image, clipping to [0, 255] with
/// round-half-up.
inline ImageRGB8 lab_to_rgb(const Image3d& lab) {
    ImageRGB8 out(lab.width, lab.height);
    const std::size_t n = lab.pixels.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 rgb = lab_to_rgb_px(lab.pixels[i]);
        std::uint8_t* p = out.pixels.data() + 3 * i;
        p[0] = quantize_u8(rgb[0]);
        p[1] = quantize_u8(rgb[1]);
        p[2] = quantize_u8(rgb[2]);
    }
    return out;
}

}  // namespace mitoref
