#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include <json.hpp>

#include "mitoref/score.hpp"

namespace mitoref {

/// Binary confusion counts with AMF as the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
};

inline ConfusionCounts confusion(std::span<const Label> truth, std::span<const Label> pred) {
    if (truth.size() != pred.size())
        throw LengthMismatch("truth and prediction lengths differ");
    if (truth.empty()) throw EmptyInput("no samples");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool pos = truth[i] == Label::AMF;
        const bool hit = pred[i] == truth[i];
        if (pos)
            hit ? ++c.tp : ++c.fn;
        else
            hit ? ++c.tn : ++c.fp;
    }
    return c;
}

/// Sensitivity, specificity and their mean, all in percent.
struct BinaryRates {
    double sensitivity = 0.0;
    double specificity = 0.0;
    double balanced_accuracy = 0.0;
};

inline BinaryRates balanced_accuracy(const ConfusionCounts& c) {
    if (c.tp + c.fn == 0) throw UndefinedMetric("no positive samples: sensitivity undefined");
    if (c.tn + c.fp == 0) throw UndefinedMetric("no negative samples: specificity undefined");
    BinaryRates r;
    r.sensitivity = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    r.specificity = 100.0 * static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    r.balanced_accuracy = (r.sensitivity + r.specificity) / 2.0;
    return r;
}

/// Area under the ROC curve as the Mann-Whitney statistic:
/// (#concordant pairs + tied pairs / 2) / (n_pos * n_neg). Concordant and
/// tied pair counts are integers, so the result is exact.
inline double roc_auc(std::span<const double> scores, std::span<const Label> truth) {
    if (scores.size() != truth.size())
        throw LengthMismatch("scores and truth lengths differ");
    if (scores.empty()) throw EmptyInput("no samples");
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < scores.size(); ++i)
        (truth[i] == Label::AMF ? pos : neg).push_back(scores[i]);
    if (pos.empty() || neg.empty())
        throw UndefinedMetric("AUC needs both classes present");
    std::sort(neg.begin(), neg.end());
    std::uint64_t concordant = 0, tied = 0;
    for (double p : pos) {
        // negatives strictly below p, and those equal to p
        const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
        const auto hi = std::upper_bound(lo, neg.end(), p);
        concordant += static_cast<std::uint64_t>(lo - neg.begin());
        tied += static_cast<std::uint64_t>(hi - lo);
    }
    return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) /
           (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

/// Inverse-frequency class weights w_c = N / (K * n_c) for K = 2 classes.
inline std::array<double, 2> class_weights(const std::array<std::uint64_t, 2>& counts) {
    if (counts[0] == 0 || counts[1] == 0)
        throw EmptyClass("class weights need samples of both classes");
    const double n = static_cast<double>(counts[0] + counts[1]);
    return {n / (2.0 * static_cast<double>(counts[0])),
            n / (2.0 * static_cast<double>(counts[1]))};
}

/// Parameters of the class-weighted focal loss.
struct FocalLossParams {
    std::array<double, 2> alpha = {1.0, 1.0};  // (NMF, AMF) class weights
    double gamma = 0.0;

    void validate() const {
        if (!(alpha[0] > 0.0 && alpha[1] > 0.0))
            throw Error("focal loss alpha components must be > 0");
        if (!(gamma >= 0.0)) throw Error("focal loss gamma must be >= 0");
    }
};

/// Mean over samples of -alpha_y (1 - p_y)^gamma log(p_y), with p_y the
/// probability assigned to the true class, floored at 1e-12.
inline double focal_loss(std::span<const ClassScore> probs, std::span<const Label> truth,
                         const FocalLossParams& params) {
    params.validate();
    if (probs.size() != truth.size())
        throw LengthMismatch("probabilities and truth lengths differ");
    if (probs.empty()) throw EmptyInput("no samples");
    double sum = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool amf = truth[i] == Label::AMF;
        const double p_y = std::max(amf ? probs[i].p_amf : probs[i].p_nmf, 1e-12);
        const double alpha_y = amf ? params.alpha[1] : params.alpha[0];
        sum += -alpha_y * std::pow(1.0 - p_y, params.gamma) * std::log(p_y);
    }
    return sum / static_cast<double>(probs.size());
}

/// Challenge metrics over one prediction set. All four metric fields are
/// percentages.
struct EvalReport {
    double balanced_accuracy = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double auc = 0.0;
    std::uint64_t n_pos = 0;
    std::uint64_t n_neg = 0;
};

inline void to_json(nlohmann::json& j, const EvalReport& r) {
    j = nlohmann::json{{"balanced_accuracy", r.balanced_accuracy},
                       {"sensitivity", r.sensitivity},
                       {"specificity", r.specificity},
                       {"auc", r.auc},
                       {"n_pos", r.n_pos},
                       {"n_neg", r.n_neg}};
}

inline void from_json(const nlohmann::json& j, EvalReport& r) {
    j.at("balanced_accuracy").get_to(r.balanced_accuracy);
    j.at("sensitivity").get_to(r.sensitivity);
    j.at("specificity").get_to(r.specificity);
    j.at("auc").get_to(r.auc);
    j.at("n_pos").get_to(r.n_pos);
    j.at("n_neg").get_to(r.n_neg);
}

/// Report from aligned predictions: hard labels drive the confusion metrics,
/// the AMF scores drive the AUC.
inline EvalReport evaluate_predictions(std::span<const Label> truth,
                                       std::span<const Label> pred,
                                       std::span<const double> amf_scores) {
    const ConfusionCounts c = confusion(truth, pred);
    const BinaryRates rates = balanced_accuracy(c);
    EvalReport r;
    r.balanced_accuracy = rates.balanced_accuracy;
    r.sensitivity = rates.sensitivity;
    r.specificity = rates.specificity;
    r.auc = 100.0 * roc_auc(amf_scores, truth);
    r.n_pos = c.tp + c.fn;
    r.n_neg = c.tn + c.fp;
    return r;
}

}  // namespace mitoref
