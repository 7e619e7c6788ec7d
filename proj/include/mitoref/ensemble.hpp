#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "mitoref/io/csv.hpp"
#include "mitoref/score.hpp"

namespace mitoref {

/// One model's softmax output for one image.
struct ModelScoreRecord {
    std::string image_id;
    std::string model_id;
    ClassScore score;
};

/// Hard decision at a probability threshold; AMF is the positive class and
/// wins ties at the threshold.
struct Decision {
    Label label = Label::NMF;
    ClassScore score;
    double threshold = 0.5;
};

/// Componentwise mean of the member softmax vectors.
inline ClassScore fuse(const std::vector<ClassScore>& scores) {
    if (scores.empty()) throw EmptyEnsemble("cannot fuse an empty score list");
    double nmf = 0.0, amf = 0.0;
    for (const ClassScore& s : scores) {
        validate(s);
        nmf += s.p_nmf;
        amf += s.p_amf;
    }
    const double n = static_cast<double>(scores.size());
    return {nmf / n, amf / n};
}

inline Decision decide(const ClassScore& score, double threshold = 0.5) {
    validate(score);
    if (!(threshold > 0.0 && threshold < 1.0)) throw Error("threshold must be in (0, 1)");
    Decision d;
    d.score = score;
    d.threshold = threshold;
    d.label = score.p_amf >= threshold ? Label::AMF : Label::NMF;
    return d;
}

/// Model scores CSV: header image_id,model_id,p_nmf,p_amf. Rows whose
/// probabilities miss the simplex by more than 1e-6 are rejected; smaller
/// drift is renormalized.
inline std::vector<ModelScoreRecord> parse_model_scores(
    const std::vector<std::vector<std::string>>& rows, const std::string& context) {
    if (rows.empty() || rows[0] != std::vector<std::string>{"image_id", "model_id", "p_nmf", "p_amf"})
        throw SchemaError(context + ": expected header image_id,model_id,p_nmf,p_amf");
    std::vector<ModelScoreRecord> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 4) throw SchemaError(context + ": row " + std::to_string(i) + " needs 4 fields");
        if (r[0].empty() || r[1].empty())
            throw SchemaError(context + ": empty id in row " + std::to_string(i));
        const double p_nmf = csv::parse_double(r[2], context);
        const double p_amf = csv::parse_double(r[3], context);
        const double sum = p_nmf + p_amf;
        if (std::abs(sum - 1.0) > 1e-6)
            throw SchemaError(context + ": probabilities in row " + std::to_string(i) +
                              " do not sum to 1");
        if (p_nmf < 0.0 || p_amf < 0.0)
            throw SchemaError(context + ": negative probability in row " + std::to_string(i));
        out.push_back({r[0], r[1], ClassScore{p_nmf / sum, p_amf / sum}});
    }
    return out;
}

inline std::vector<ModelScoreRecord> load_model_scores(const std::string& path) {
    return parse_model_scores(csv::read_file(path), path);
}

/// Per-image score lists in first-appearance order of the image ids.
struct ImageScores {
    std::string image_id;
    std::vector<ClassScore> scores;
};

inline std::vector<ImageScores> group_by_image(const std::vector<ModelScoreRecord>& records) {
    std::vector<ImageScores> out;
    std::unordered_map<std::string, std::size_t> index;
    for (const ModelScoreRecord& r : records) {
        auto [it, inserted] = index.try_emplace(r.image_id, out.size());
        if (inserted) out.push_back({r.image_id, {}});
        out[it->second].scores.push_back(r.score);
    }
    return out;
}

}  // namespace mitoref
