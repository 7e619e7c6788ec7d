#pragma once

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mitoref/color_lab.hpp"
#include "mitoref/image.hpp"

namespace mitoref {

/// Per-channel lab mean and population standard deviation; the matching
/// target of Reinhard normalization.
struct LabStats {
    Vec3 mean{};
    Vec3 std{};
};

inline void validate(const LabStats& s) {
    for (int c = 0; c < 3; ++c) {
        if (!std::isfinite(s.mean[c]) || !std::isfinite(s.std[c]))
            throw SchemaError("LabStats values must be finite");
        if (s.std[c] < 0.0) throw SchemaError("LabStats std must be nonnegative");
    }
}

inline void to_json(nlohmann::json& j, const LabStats& s) {
    j = nlohmann::json{{"mean", s.mean}, {"std", s.std}};
}

inline void from_json(const nlohmann::json& j, LabStats& s) {
    j.at("mean").get_to(s.mean);
    j.at("std").get_to(s.std);
    validate(s);
}

inline LabStats compute_lab_stats(const Image3d& lab) {
    if (lab.pixels.empty()) throw Error("cannot compute stats of an empty image");
    const double n = static_cast<double>(lab.pixels.size());
    LabStats s;
    for (const Vec3& p : lab.pixels)
        for (int c = 0; c < 3; ++c) s.mean[c] += p[c];
    for (int c = 0; c < 3; ++c) s.mean[c] /= n;
    Vec3 ss{};
    for (const Vec3& p : lab.pixels)
        for (int c = 0; c < 3; ++c) {
            const double d = p[c] - s.mean[c];
            ss[c] += d * d;
        }
    for (int c = 0; c < 3; ++c) s.std[c] = std::sqrt(ss[c] / n);
    return s;
}

inline LabStats compute_lab_stats(const ImageRGB8& img) {
    return compute_lab_stats(rgb_to_lab(img));
}

/// Channel-wise statistics matching in lab space. A source channel with
/// near-zero spread carries no contrast to rescale and maps to the target
/// mean.
inline Image3d reinhard_transfer(const Image3d& src, const LabStats& src_stats,
                                 const LabStats& target) {
    Image3d out(src.width, src.height);
    Vec3 scale{};
    for (int c = 0; c < 3; ++c)
        scale[c] = src_stats.std[c] < 1e-6 ? 0.0 : target.std[c] / src_stats.std[c];
    for (std::size_t i = 0; i < src.pixels.size(); ++i)
        for (int c = 0; c < 3; ++c)
            out.pixels[i][c] =
                (src.pixels[i][c] - src_stats.mean[c]) * scale[c] + target.mean[c];
    return out;
}

inline ImageRGB8 reinhard_normalize(const ImageRGB8& src, const LabStats& target) {
    validate(target);
    const Image3d lab = rgb_to_lab(src);
    return lab_to_rgb(reinhard_transfer(lab, compute_lab_stats(lab), target));
}

inline LabStats load_lab_stats(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
        return j.get<LabStats>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("invalid LabStats file " + path + ": " + e.what());
    }
}

inline void save_lab_stats(const LabStats& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << nlohmann::json(s).dump(2) << "\n";
}

}  // namespace mitoref
