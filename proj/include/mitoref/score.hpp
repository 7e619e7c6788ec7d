#pragma once

#include <cmath>
#include <string>

#include "mitoref/errors.hpp"

namespace mitoref {

/// Two-class probability vector over (normal, atypical) mitotic figure.
struct ClassScore {
    double p_nmf = 0.5;
    double p_amf = 0.5;
};

inline void validate(const ClassScore& s) {
    if (!(s.p_nmf >= 0.0 && s.p_nmf <= 1.0 && s.p_amf >= 0.0 && s.p_amf <= 1.0))
        throw SchemaError("class probabilities must be in [0, 1]");
    if (std::abs(s.p_nmf + s.p_amf - 1.0) > 1e-9)
        throw SchemaError("class probabilities must sum to 1");
}

/// Score from the NMF probability, complement for AMF.
inline ClassScore score_from_nmf(double p_nmf) {
    if (!(p_nmf >= 0.0 && p_nmf <= 1.0)) throw Error("probability out of range");
    return {p_nmf, 1.0 - p_nmf};
}

enum class Label { NMF, AMF };

inline const char* label_name(Label l) { return l == Label::AMF ? "AMF" : "NMF"; }

inline Label parse_label(const std::string& s) {
    if (s == "AMF") return Label::AMF;
    if (s == "NMF") return Label::NMF;
    throw SchemaError("unknown label '" + s + "' (expected NMF or AMF)");
}

}  // namespace mitoref
