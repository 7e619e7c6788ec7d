#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "mitoref/image.hpp"
#include "mitoref/macenko.hpp"
#include "mitoref/reinhard.hpp"
#include "mitoref/rng.hpp"

namespace mitoref::synthetic {

// Rendering stain basis, unit-normalized. Hematoxylin is the classic
// Ruifrok direction. The eosin direction is shifted blue-ward relative to
// the physical spectrum so that eosin-rich synthetic pixels stay above the
// OD transparency threshold and the fitted stain wedge stays
// well-conditioned (~21 degrees).
inline const Vec3 kHematoxylin = {0.6511078258, 0.7011930431, 0.2904942607};
inline const Vec3 kEosin = {0.3003606493, 0.6007212986, 0.7408896016};

/// One synthetic nucleus: an elliptical hematoxylin blob. hole = 1 renders a
/// solid nucleus; small values attenuate the center into a ring.
struct NucleusSpec {
    double cx = 0.0;
    double cy = 0.0;
    double rx = 8.0;
    double ry = 8.0;
    double angle_deg = 0.0;
    double peak = 1.2;
    double hole = 1.0;
};

/// Render an H&E-like tile by composing stain concentrations in OD space.
/// Deterministic for a fixed seed. hema_base adds a chromatin haze outside
/// the nuclei, which keeps eosin-rich pixels above the OD tissue threshold
/// and the fitted stain wedge well conditioned.
inline ImageRGB8 render_he_tile(int w, int h, const std::vector<NucleusSpec>& nuclei,
                                std::uint32_t seed, double eosin_base = 0.5,
                                double hema_base = 0.12, double io = 240.0) {
    ImageRGB8 img(w, h);
    std::mt19937 gen(seed);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double c_h = hema_base;
            for (const NucleusSpec& n : nuclei) {
                const double th = n.angle_deg * M_PI / 180.0;
                const double dx = (x + 0.5) - n.cx;
                const double dy = (y + 0.5) - n.cy;
                const double u = std::cos(th) * dx + std::sin(th) * dy;
                const double v = -std::sin(th) * dx + std::cos(th) * dy;
                const double rho2 = (u / n.rx) * (u / n.rx) + (v / n.ry) * (v / n.ry);
                if (rho2 >= 1.0) continue;
                const double rim = std::sqrt(1.0 - rho2);
                const double rho = std::sqrt(rho2);
                // flat hole out to rho 0.5, solid rim from rho 0.8
                const double ramp = std::clamp((rho - 0.5) / 0.3, 0.0, 1.0);
                const double radial = n.hole + (1.0 - n.hole) * ramp;
                c_h += n.peak * std::sqrt(rim) * radial;
            }
            const double c_e = eosin_base *
                (1.0 + 0.25 * std::sin(2.0 * M_PI * x / 23.0) * std::sin(2.0 * M_PI * y / 19.0));
            for (int c = 0; c < 3; ++c) {
                const double noise = 0.016 * (uniform01(gen) - 0.5);
                const double od = c_h * kHematoxylin[c] + c_e * kEosin[c] + 0.02 + noise;
                img.px(x, y)[c] = quantize_u8(od_inverse(od, io));
            }
        }
    }
    return img;
}

/// The bundled normalization target: a deterministic 96x96 H&E-like tile.
/// Runs without an explicit --target fall back to this one; pipelines with
/// access to a real reference tile should pass it instead.
inline ImageRGB8 default_target_tile() {
    std::vector<NucleusSpec> nuclei;
    std::mt19937 gen(20250901u);
    for (int i = 0; i < 12; ++i) {
        NucleusSpec n;
        n.cx = uniform_range(gen, 10.0, 86.0);
        n.cy = uniform_range(gen, 10.0, 86.0);
        n.rx = uniform_range(gen, 5.0, 9.0);
        n.ry = uniform_range(gen, 4.0, 7.0);
        n.angle_deg = uniform_range(gen, 0.0, 180.0);
        n.peak = uniform_range(gen, 0.9, 1.3);
        nuclei.push_back(n);
    }
    return render_he_tile(96, 96, nuclei, 77u);
}

inline LabStats default_reinhard_target() {
    return compute_lab_stats(default_target_tile());
}

inline StainProfile default_macenko_target(const MacenkoParams& params = {}) {
    return macenko_fit(default_target_tile(), params);
}

}  // namespace mitoref::synthetic
