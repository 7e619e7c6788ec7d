#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mitoref/image.hpp"

namespace mitoref {

/// Constants of the Macenko stain estimation. The defaults are the standard
/// ones of the method; all are exposed through config files.
struct MacenkoParams {
    double io = 240.0;                    // transmitted-light intensity
    double beta = 0.15;                   // OD transparency threshold
    double alpha_percentile = 1.0;        // robust angle percentile, percent
    double concentration_percentile = 99.0;
    int min_tissue_px = 100;
};

inline void validate(const MacenkoParams& p) {
    if (!(p.io > 0.0)) throw SchemaError("MacenkoParams: io must be positive");
    if (!(p.beta > 0.0 && p.beta < 1.0))
        throw SchemaError("MacenkoParams: beta must be in (0, 1)");
    if (!(p.alpha_percentile > 0.0 && p.alpha_percentile < 50.0))
        throw SchemaError("MacenkoParams: alpha_percentile must be in (0, 50)");
    if (p.min_tissue_px < 1) throw SchemaError("MacenkoParams: min_tissue_px must be >= 1");
}

inline void to_json(nlohmann::json& j, const MacenkoParams& p) {
    j = nlohmann::json{{"io", p.io},
                       {"beta", p.beta},
                       {"alpha_percentile", p.alpha_percentile},
                       {"concentration_percentile", p.concentration_percentile},
                       {"min_tissue_px", p.min_tissue_px}};
}

inline void from_json(const nlohmann::json& j, MacenkoParams& p) {
    p.io = j.value("io", p.io);
    p.beta = j.value("beta", p.beta);
    p.alpha_percentile = j.value("alpha_percentile", p.alpha_percentile);
    p.concentration_percentile = j.value("concentration_percentile", p.concentration_percentile);
    p.min_tissue_px = j.value("min_tissue_px", p.min_tissue_px);
    validate(p);
}

/// Fitted stain basis: unit-norm nonnegative H and E columns in OD space plus
/// the robust per-stain concentration maxima.
struct StainProfile {
    std::array<Vec3, 2> stains{};             // [0] hematoxylin-like, [1] eosin-like
    std::array<double, 2> max_concentrations{};
};

inline void validate(const StainProfile& p) {
    for (const Vec3& s : p.stains) {
        double norm2 = 0.0;
        for (double v : s) {
            if (!(v >= 0.0)) throw SchemaError("StainProfile: stain entries must be >= 0");
            norm2 += v * v;
        }
        if (std::abs(std::sqrt(norm2) - 1.0) > 1e-6)
            throw SchemaError("StainProfile: stain columns must have unit norm");
    }
    for (double c : p.max_concentrations)
        if (!(c > 0.0)) throw SchemaError("StainProfile: max_concentrations must be > 0");
}

inline void to_json(nlohmann::json& j, const StainProfile& p) {
    nlohmann::json m = nlohmann::json::array();
    for (int r = 0; r < 3; ++r)
        m.push_back(nlohmann::json::array({p.stains[0][r], p.stains[1][r]}));
    j = nlohmann::json{{"stain_matrix", m}, {"max_concentrations", p.max_concentrations}};
}

inline void from_json(const nlohmann::json& j, StainProfile& p) {
    const auto& m = j.at("stain_matrix");
    if (!m.is_array() || m.size() != 3) throw SchemaError("stain_matrix must be 3x2");
    for (int r = 0; r < 3; ++r) {
        if (!m[r].is_array() || m[r].size() != 2) throw SchemaError("stain_matrix must be 3x2");
        p.stains[0][r] = m[r][0].get<double>();
        p.stains[1][r] = m[r][1].get<double>();
    }
    j.at("max_concentrations").get_to(p.max_concentrations);
    validate(p);
}

/// Optical density of one channel value: -log10((I + 1) / io). The +1 keeps
/// pure black finite.
inline double od_forward(double intensity, double io) {
    return -std::log10((intensity + 1.0) / io);
}

/// Inverse of od_forward before quantization.
inline double od_inverse(double od, double io) {
    return io * std::pow(10.0, -od) - 1.0;
}

inline Image3d od_image(const ImageRGB8& img, double io) {
    check_image(img);
    if (!(io > 0.0)) throw Error("io must be positive");
    Image3d out(img.width, img.height);
    const std::size_t n = img.pixel_count();
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint8_t* p = img.pixels.data() + 3 * i;
        for (int c = 0; c < 3; ++c) out.pixels[i][c] = od_forward(p[c], io);
    }
    return out;
}

inline ImageRGB8 od_to_rgb(const Image3d& od, double io) {
    ImageRGB8 out(od.width, od.height);
    for (std::size_t i = 0; i < od.pixels.size(); ++i) {
        std::uint8_t* p = out.pixels.data() + 3 * i;
        for (int c = 0; c < 3; ++c) p[c] = quantize_u8(od_inverse(od.pixels[i][c], io));
    }
    return out;
}

namespace detail {

/// Percentile with linear interpolation between order statistics.
inline double percentile(std::vector<double> v, double p) {
    if (v.empty()) throw Error("percentile of empty set");
    std::sort(v.begin(), v.end());
    if (v.size() == 1) return v[0];
    const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
    const double lo = std::floor(rank);
    const std::size_t i = static_cast<std::size_t>(lo);
    if (i + 1 >= v.size()) return v.back();
    const double frac = rank - lo;
    return v[i] * (1.0 - frac) + v[i + 1] * frac;
}

/// Orient a plane basis vector so its red OD component is nonnegative.
inline Eigen::Vector3d orient(Eigen::Vector3d v) {
    if (v(0) < 0.0 || (v(0) == 0.0 && v(1) < 0.0)) v = -v;
    return v;
}

/// Clamp a stain direction to the nonnegative orthant and renormalize.
inline Vec3 to_stain_column(Eigen::Vector3d v) {
    if (v.sum() < 0.0) v = -v;
    v = v.cwiseMax(0.0);
    const double n = v.norm();
    if (n <= 0.0) throw Error("degenerate stain direction");
    v /= n;
    return {v(0), v(1), v(2)};
}

/// 2x3 least-squares solver for concentrations given a stain basis.
inline Eigen::Matrix<double, 2, 3> stain_pinv(const StainProfile& profile) {
    Eigen::Matrix<double, 3, 2> S;
    for (int r = 0; r < 3; ++r) {
        S(r, 0) = profile.stains[0][r];
        S(r, 1) = profile.stains[1][r];
    }
    return (S.transpose() * S).inverse() * S.transpose();
}

}  // namespace detail

/// Per-pixel (hematoxylin, eosin) concentrations solved by least squares
/// against the profile's stain basis.
inline std::vector<std::array<double, 2>> stain_concentrations(const Image3d& od,
                                                               const StainProfile& profile) {
    const Eigen::Matrix<double, 2, 3> pinv = detail::stain_pinv(profile);
    std::vector<std::array<double, 2>> out(od.pixels.size());
    for (std::size_t i = 0; i < od.pixels.size(); ++i) {
        const Vec3& p = od.pixels[i];
        const Eigen::Vector3d v(p[0], p[1], p[2]);
        const Eigen::Vector2d c = pinv * v;
        out[i] = {c(0), c(1)};
    }
    return out;
}

/// Fit the two-stain OD basis of an H&E image.
///
/// Pixels whose OD exceeds beta on every channel are the tissue sample; the
/// top-2 eigenvectors of their covariance span the stain plane; the robust
/// extreme angles in that plane give the stain directions, the one with the
/// larger red OD component being hematoxylin.
inline StainProfile macenko_fit(const ImageRGB8& img, const MacenkoParams& params = {}) {
    validate(params);
    const Image3d od = od_image(img, params.io);

    std::vector<Eigen::Vector3d> tissue;
    tissue.reserve(od.pixels.size());
    for (const Vec3& p : od.pixels)
        if (p[0] > params.beta && p[1] > params.beta && p[2] > params.beta)
            tissue.emplace_back(p[0], p[1], p[2]);
    if (tissue.size() < static_cast<std::size_t>(params.min_tissue_px))
        throw InsufficientTissue("only " + std::to_string(tissue.size()) +
                                 " tissue pixels above OD threshold");

    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& t : tissue) mean += t;
    mean /= static_cast<double>(tissue.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto& t : tissue) {
        const Eigen::Vector3d d = t - mean;
        cov += d * d.transpose();
    }
    cov /= static_cast<double>(tissue.size() - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(cov);
    if (eig.info() != Eigen::Success) throw Error("eigendecomposition failed");
    // eigenvalues ascend: columns 2 and 1 span the stain plane
    const Eigen::Vector3d v1 = detail::orient(eig.eigenvectors().col(2));
    const Eigen::Vector3d v2 = detail::orient(eig.eigenvectors().col(1));

    std::vector<double> phi;
    phi.reserve(tissue.size());
    for (const auto& t : tissue) phi.push_back(std::atan2(t.dot(v2), t.dot(v1)));
    const double phi_min = detail::percentile(phi, params.alpha_percentile);
    const double phi_max = detail::percentile(phi, 100.0 - params.alpha_percentile);

    Eigen::Vector3d dir_min = std::cos(phi_min) * v1 + std::sin(phi_min) * v2;
    Eigen::Vector3d dir_max = std::cos(phi_max) * v1 + std::sin(phi_max) * v2;
    if (dir_min(0) < dir_max(0)) std::swap(dir_min, dir_max);

    StainProfile profile;
    profile.stains[0] = detail::to_stain_column(dir_min);
    profile.stains[1] = detail::to_stain_column(dir_max);

    const auto conc = stain_concentrations(od, profile);
    for (int s = 0; s < 2; ++s) {
        std::vector<double> cs(conc.size());
        for (std::size_t i = 0; i < conc.size(); ++i) cs[i] = conc[i][s];
        profile.max_concentrations[s] =
            std::max(detail::percentile(std::move(cs), params.concentration_percentile), 1e-6);
    }
    return profile;
}

/// Macenko normalization: refit the source basis, rescale the concentration
/// rows to the target maxima, and reconstruct with the target basis.
inline ImageRGB8 macenko_normalize(const ImageRGB8& src, const StainProfile& target,
                                   const MacenkoParams& params = {}) {
    validate(target);
    const StainProfile source = macenko_fit(src, params);
    const Image3d od = od_image(src, params.io);
    auto conc = stain_concentrations(od, source);

    const std::array<double, 2> scale = {
        target.max_concentrations[0] / source.max_concentrations[0],
        target.max_concentrations[1] / source.max_concentrations[1]};

    Image3d out(src.width, src.height);
    for (std::size_t i = 0; i < conc.size(); ++i) {
        const double ch = conc[i][0] * scale[0];
        const double ce = conc[i][1] * scale[1];
        for (int c = 0; c < 3; ++c)
            out.pixels[i][c] = ch * target.stains[0][c] + ce * target.stains[1][c];
    }
    return od_to_rgb(out, params.io);
}

inline StainProfile load_stain_profile(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
        return j.get<StainProfile>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("invalid StainProfile file " + path + ": " + e.what());
    }
}

inline void save_stain_profile(const StainProfile& p, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << nlohmann::json(p).dump(2) << "\n";
}

}  // namespace mitoref
