#pragma once

#include <algorithm>
#include <optional>
#include <string>

#include <json.hpp>

#include "mitoref/detect.hpp"
#include "mitoref/morphology.hpp"
#include "mitoref/score.hpp"

namespace mitoref {

enum class RuleId { NoCellAmf, SingleShapeNmf, PairParallel, PairNearParallel, NoAdjustment };

inline const char* rule_id_name(RuleId r) {
    switch (r) {
        case RuleId::NoCellAmf: return "NoCellAmf";
        case RuleId::SingleShapeNmf: return "SingleShapeNmf";
        case RuleId::PairParallel: return "PairParallel";
        case RuleId::PairNearParallel: return "PairNearParallel";
        case RuleId::NoAdjustment: return "NoAdjustment";
    }
    return "?";
}

/// Result of one rule evaluation: a signed score modifier (positive pushes
/// toward NMF) and the confidence the analysis has in itself.
struct RuleOutcome {
    RuleId rule_id = RuleId::NoAdjustment;
    double modifier = 0.0;
    double confidence = 0.0;
};

inline RuleOutcome no_adjustment() { return {RuleId::NoAdjustment, 0.0, 0.0}; }

/// Rule weights and thresholds. The parallel weight 0.6 and the ring weight
/// 0.2 are the decisive vs. cautious ends of the scale; the rest
/// operationalize qualitative rules and stay configurable.
struct RbrConfig {
    double weight_parallel = 0.6;
    double weight_near_parallel = 0.3;
    double weight_ring = 0.2;
    double weight_round = 0.2;
    double weight_oval = 0.2;
    double weight_no_cell_amf = 0.1;
    double parallel_threshold_deg = 10.0;
    double near_parallel_threshold_deg = 20.0;
    double low_confidence_factor = 0.5;
    CenterSelectConfig selection{};
    MorphologyConfig morphology{};
    FallbackDetectorParams detector{};
};

inline void validate(const RbrConfig& c) {
    for (double w : {c.weight_parallel, c.weight_near_parallel, c.weight_ring, c.weight_round,
                     c.weight_oval, c.weight_no_cell_amf, c.low_confidence_factor})
        if (!(w >= 0.0 && w <= 1.0)) throw SchemaError("RBR weights must be in [0, 1]");
    if (!(c.parallel_threshold_deg < c.near_parallel_threshold_deg))
        throw SchemaError("parallel threshold must be below the near-parallel threshold");
}

inline void to_json(nlohmann::json& j, const CenterSelectConfig& c) {
    j = nlohmann::json{{"radius_frac", c.radius_frac}, {"proximity_frac", c.proximity_frac}};
}

inline void from_json(const nlohmann::json& j, CenterSelectConfig& c) {
    c.radius_frac = j.value("radius_frac", c.radius_frac);
    c.proximity_frac = j.value("proximity_frac", c.proximity_frac);
}

inline void to_json(nlohmann::json& j, const RbrConfig& c) {
    j = nlohmann::json{{"weight_parallel", c.weight_parallel},
                       {"weight_near_parallel", c.weight_near_parallel},
                       {"weight_ring", c.weight_ring},
                       {"weight_round", c.weight_round},
                       {"weight_oval", c.weight_oval},
                       {"weight_no_cell_amf", c.weight_no_cell_amf},
                       {"parallel_threshold_deg", c.parallel_threshold_deg},
                       {"near_parallel_threshold_deg", c.near_parallel_threshold_deg},
                       {"low_confidence_factor", c.low_confidence_factor},
                       {"selection", c.selection},
                       {"morphology", c.morphology},
                       {"detector", c.detector}};
}

inline void from_json(const nlohmann::json& j, RbrConfig& c) {
    c.weight_parallel = j.value("weight_parallel", c.weight_parallel);
    c.weight_near_parallel = j.value("weight_near_parallel", c.weight_near_parallel);
    c.weight_ring = j.value("weight_ring", c.weight_ring);
    c.weight_round = j.value("weight_round", c.weight_round);
    c.weight_oval = j.value("weight_oval", c.weight_oval);
    c.weight_no_cell_amf = j.value("weight_no_cell_amf", c.weight_no_cell_amf);
    c.parallel_threshold_deg = j.value("parallel_threshold_deg", c.parallel_threshold_deg);
    c.near_parallel_threshold_deg =
        j.value("near_parallel_threshold_deg", c.near_parallel_threshold_deg);
    c.low_confidence_factor = j.value("low_confidence_factor", c.low_confidence_factor);
    if (j.contains("selection")) j.at("selection").get_to(c.selection);
    if (j.contains("morphology")) j.at("morphology").get_to(c.morphology);
    if (j.contains("detector")) j.at("detector").get_to(c.detector);
    validate(c);
}

/// Evaluate the rule set on a center selection.
///
/// No cell: slight push toward AMF. One cell: ring/round/oval shapes push
/// toward NMF. Two cells: parallel orientations are decisive for NMF,
/// near-parallel ones a weaker push. Anything else leaves the score alone.
/// The image is optional; without it there is no ring evidence.
inline RuleOutcome evaluate_rules(const CenterSelection& sel, const ImageRGB8* img,
                                  const RbrConfig& cfg = {}) {
    switch (sel.kind) {
        case SelectionKind::NoCell:
            return {RuleId::NoCellAmf, -cfg.weight_no_cell_amf, 1.0};
        case SelectionKind::Single: {
            ShapeDescriptor d;
            try {
                d = describe(sel.selected[0], img, cfg.morphology);
            } catch (const DegenerateShape&) {
                return no_adjustment();
            }
            const ShapeClass shape = classify_shape(d, cfg.morphology);
            double weight = 0.0;
            switch (shape) {
                case ShapeClass::Ring: weight = cfg.weight_ring; break;
                case ShapeClass::Round: weight = cfg.weight_round; break;
                case ShapeClass::Oval: weight = cfg.weight_oval; break;
                case ShapeClass::Other: return no_adjustment();
            }
            double confidence = 1.0;
            if (shape == ShapeClass::Ring &&
                std::abs(d.hole_contrast_ratio - cfg.morphology.hole_contrast) <
                    cfg.morphology.hole_margin)
                confidence *= cfg.low_confidence_factor;  // borderline ring evidence
            return {RuleId::SingleShapeNmf, weight, confidence};
        }
        case SelectionKind::Pair: {
            ShapeDescriptor a, b;
            try {
                a = describe(sel.selected[0], img, cfg.morphology);
                b = describe(sel.selected[1], img, cfg.morphology);
            } catch (const DegenerateShape&) {
                return no_adjustment();
            }
            // near-round members make the orientation estimate unreliable
            double confidence = 1.0;
            if (a.eccentricity < cfg.morphology.isotropy_ecc)
                confidence *= cfg.low_confidence_factor;
            if (b.eccentricity < cfg.morphology.isotropy_ecc)
                confidence *= cfg.low_confidence_factor;
            const double diff = orientation_difference(a.orientation, b.orientation);
            if (diff < cfg.parallel_threshold_deg)
                return {RuleId::PairParallel, cfg.weight_parallel, confidence};
            if (diff < cfg.near_parallel_threshold_deg)
                return {RuleId::PairNearParallel, cfg.weight_near_parallel, confidence};
            return no_adjustment();
        }
        case SelectionKind::Ambiguous:
            return no_adjustment();
    }
    return no_adjustment();
}

/// Apply a confidence-weighted modifier to a score, preserving the two-class
/// simplex: p_nmf moves by modifier x confidence (clamped), p_amf is the
/// complement.
inline ClassScore apply_modifier(const ClassScore& score, const RuleOutcome& outcome) {
    validate(score);
    const double m = outcome.modifier * outcome.confidence;
    const double p = std::clamp(score.p_nmf + m, 0.0, 1.0);
    return {p, 1.0 - p};
}

/// Full refinement of one image's score.
struct RefineResult {
    ClassScore score;
    RuleOutcome outcome;
    double modifier_applied = 0.0;  // effective modifier after confidence weighting
    bool refinement_available = true;
    bool used_fallback_detector = false;
};

/// Composition: obtain detections (supplied, else fallback from the image),
/// select center cells, evaluate rules, apply the modifier. With neither
/// detections nor an image the score passes through flagged as unrefined.
inline RefineResult refine(const ImageRGB8* img, const DetectionSet* detections,
                           const ClassScore& score, const RbrConfig& cfg = {}) {
    validate(score);
    RefineResult res;
    res.score = score;

    DetectionSet local;
    const DetectionSet* det = detections;
    if (det == nullptr) {
        if (img == nullptr) {
            res.refinement_available = false;
            res.outcome = no_adjustment();
            return res;
        }
        local = fallback_detect(*img, cfg.detector);
        det = &local;
        res.used_fallback_detector = true;
    }

    const CenterSelection sel = select_center_cells(*det, cfg.selection);
    RuleOutcome outcome = evaluate_rules(sel, img, cfg);
    if (res.used_fallback_detector || det->source == DetectionSource::Fallback)
        outcome.confidence *= cfg.low_confidence_factor;

    res.outcome = outcome;
    res.modifier_applied = outcome.modifier * outcome.confidence;
    res.score = apply_modifier(score, outcome);
    return res;
}

}  // namespace mitoref
