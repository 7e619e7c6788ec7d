#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "mitoref/dataset.hpp"
#include "mitoref/ensemble.hpp"
#include "mitoref/io/png.hpp"
#include "mitoref/metrics.hpp"
#include "mitoref/rbr.hpp"
#include "mitoref/synthetic.hpp"

namespace mitoref {

/// One reproducible run: all inputs, targets, thresholds and rule weights.
struct PipelineConfig {
    std::string scores_csv;       // model scores, required
    std::string images_dir;       // <image_id>.png per image, optional
    std::string detections_dir;   // <image_id>.json per image, optional
    std::string manifest_csv;     // defines the image set; default: score file ids
    std::string truth_csv;        // enables the evaluation report
    std::string out_dir = ".";
    std::string reinhard_target;  // LabStats .json or reference .png; bundled default if empty
    std::string macenko_target;   // StainProfile .json or reference .png; bundled default if empty
    double ensemble_threshold = 0.5;
    bool rbr_enabled = true;
    bool emit_provenance = true;
    int workers = 1;
    RbrConfig rbr{};
};

inline void to_json(nlohmann::json& j, const PipelineConfig& c) {
    j = nlohmann::json{{"scores", c.scores_csv},
                       {"images_dir", c.images_dir},
                       {"detections_dir", c.detections_dir},
                       {"manifest", c.manifest_csv},
                       {"truth", c.truth_csv},
                       {"out_dir", c.out_dir},
                       {"reinhard_target", c.reinhard_target},
                       {"macenko_target", c.macenko_target},
                       {"ensemble_threshold", c.ensemble_threshold},
                       {"rbr_enabled", c.rbr_enabled},
                       {"emit_provenance", c.emit_provenance},
                       {"workers", c.workers},
                       {"rbr", c.rbr}};
}

inline void from_json(const nlohmann::json& j, PipelineConfig& c) {
    c.scores_csv = j.value("scores", c.scores_csv);
    c.images_dir = j.value("images_dir", c.images_dir);
    c.detections_dir = j.value("detections_dir", c.detections_dir);
    c.manifest_csv = j.value("manifest", c.manifest_csv);
    c.truth_csv = j.value("truth", c.truth_csv);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.reinhard_target = j.value("reinhard_target", c.reinhard_target);
    c.macenko_target = j.value("macenko_target", c.macenko_target);
    c.ensemble_threshold = j.value("ensemble_threshold", c.ensemble_threshold);
    c.rbr_enabled = j.value("rbr_enabled", c.rbr_enabled);
    c.emit_provenance = j.value("emit_provenance", c.emit_provenance);
    c.workers = j.value("workers", c.workers);
    if (j.contains("rbr")) j.at("rbr").get_to(c.rbr);
}

inline PipelineConfig load_pipeline_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path);
    try {
        nlohmann::json j;
        f >> j;
        return j.get<PipelineConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("invalid config " + path + ": " + e.what());
    }
}

/// Exit code convention: 0 success, 2 data-level failure, 3 contract failure.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const SchemaError*>(&e) != nullptr ||
        dynamic_cast<const IdMismatch*>(&e) != nullptr ||
        dynamic_cast<const MissingScores*>(&e) != nullptr ||
        dynamic_cast<const LengthMismatch*>(&e) != nullptr)
        return 3;
    return 2;
}

namespace detail {

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() &&
           s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace detail

/// Empty path: bundled synthetic target. .json: stored stats. Anything else
/// is read as a reference image.
inline LabStats resolve_reinhard_target(const std::string& path) {
    if (path.empty()) return synthetic::default_reinhard_target();
    if (detail::ends_with(path, ".json")) return load_lab_stats(path);
    return compute_lab_stats(io::read_png(path));
}

inline StainProfile resolve_macenko_target(const std::string& path,
                                           const MacenkoParams& params = {}) {
    if (path.empty()) return synthetic::default_macenko_target(params);
    if (detail::ends_with(path, ".json")) return load_stain_profile(path);
    return macenko_fit(io::read_png(path), params);
}

/// One output row of the prediction CSV.
struct PredictionRow {
    std::string image_id;
    ClassScore score;
    Label label = Label::NMF;
    std::string rule_id = "NoAdjustment";
    double confidence = 0.0;
    double modifier_applied = 0.0;
};

inline void write_predictions(const std::vector<PredictionRow>& rows, const std::string& path,
                              bool emit_provenance) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open " + path + " for writing");
    f << "image_id,p_nmf,p_amf,label";
    if (emit_provenance) f << ",rule_id,confidence,modifier_applied";
    f << "\n";
    for (const PredictionRow& r : rows) {
        f << r.image_id << ',' << csv::fixed(r.score.p_nmf) << ',' << csv::fixed(r.score.p_amf)
          << ',' << label_name(r.label);
        if (emit_provenance)
            f << ',' << r.rule_id << ',' << csv::fixed(r.confidence) << ','
              << csv::fixed(r.modifier_applied);
        f << "\n";
    }
}

/// Accepts both the plain and the provenance-extended header.
inline std::vector<PredictionRow> parse_predictions(
    const std::vector<std::vector<std::string>>& rows, const std::string& context) {
    const std::vector<std::string> base{"image_id", "p_nmf", "p_amf", "label"};
    const std::vector<std::string> full{"image_id", "p_nmf", "p_amf", "label",
                                        "rule_id", "confidence", "modifier_applied"};
    if (rows.empty() || (rows[0] != base && rows[0] != full))
        throw SchemaError(context + ": unexpected predictions header");
    const bool has_prov = rows[0] == full;
    std::vector<PredictionRow> out;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != (has_prov ? 7u : 4u))
            throw SchemaError(context + ": wrong field count in row " + std::to_string(i));
        PredictionRow p;
        p.image_id = r[0];
        if (p.image_id.empty()) throw SchemaError(context + ": empty image id");
        if (!seen.insert(p.image_id).second)
            throw SchemaError(context + ": duplicate image id '" + p.image_id + "'");
        p.score = {csv::parse_double(r[1], context), csv::parse_double(r[2], context)};
        validate(p.score);
        p.label = parse_label(r[3]);
        if (has_prov) {
            p.rule_id = r[4];
            p.confidence = csv::parse_double(r[5], context);
            p.modifier_applied = csv::parse_double(r[6], context);
        }
        out.push_back(std::move(p));
    }
    return out;
}

/// Ground-truth CSV: header image_id,label.
inline std::vector<std::pair<std::string, Label>> parse_truth(
    const std::vector<std::vector<std::string>>& rows, const std::string& context) {
    if (rows.empty() || rows[0] != std::vector<std::string>{"image_id", "label"})
        throw SchemaError(context + ": expected header image_id,label");
    std::vector<std::pair<std::string, Label>> out;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 2)
            throw SchemaError(context + ": wrong field count in row " + std::to_string(i));
        if (r[0].empty()) throw SchemaError(context + ": empty image id");
        if (!seen.insert(r[0]).second)
            throw SchemaError(context + ": duplicate image id '" + r[0] + "'");
        out.emplace_back(r[0], parse_label(r[1]));
    }
    return out;
}

/// Evaluate aligned prediction/truth sets. The id sets must match exactly.
inline EvalReport evaluate_against_truth(const std::vector<PredictionRow>& preds,
                                         const std::vector<std::pair<std::string, Label>>& truth) {
    std::unordered_map<std::string, Label> truth_map;
    for (const auto& [id, label] : truth) truth_map.emplace(id, label);
    if (truth_map.size() != preds.size())
        throw IdMismatch("prediction and truth files cover different image sets");
    std::vector<Label> t, p;
    std::vector<double> amf;
    for (const PredictionRow& r : preds) {
        const auto it = truth_map.find(r.image_id);
        if (it == truth_map.end())
            throw IdMismatch("no ground truth for image '" + r.image_id + "'");
        t.push_back(it->second);
        p.push_back(r.label);
        amf.push_back(r.score.p_amf);
    }
    return evaluate_predictions(t, p, amf);
}

namespace detail {

struct RbrStep {
    ClassScore score;
    std::string rule_id = "NoAdjustment";
    double confidence = 0.0;
    double modifier_applied = 0.0;
    std::string data_error;  // nonempty: a per-image input failed and was skipped
};

/// The RBR leg of the inference flow for one image: Macenko-normalize the
/// tile for analysis, take supplied detections (else the fallback detector),
/// select, evaluate, apply.
inline RbrStep rbr_step(const std::string& image_id, const ClassScore& fused,
                        const std::string& images_dir, const std::string& detections_dir,
                        const RbrConfig& rbr, const StainProfile& macenko_target) {
    namespace fs = std::filesystem;
    RbrStep step;
    step.score = fused;

    std::optional<ImageRGB8> img;
    if (!images_dir.empty()) {
        const fs::path p = fs::path(images_dir) / (image_id + ".png");
        if (fs::exists(p)) {
            try {
                img = io::read_png(p.string());
            } catch (const Error& e) {
                step.data_error = e.what();
            }
        }
    }
    std::optional<DetectionSet> det;
    if (!detections_dir.empty()) {
        const fs::path p = fs::path(detections_dir) / (image_id + ".json");
        if (fs::exists(p)) {
            try {
                det = load_detections(p.string());
            } catch (const Error& e) {
                step.data_error = e.what();
            }
        }
    }

    // the rule analysis sees the Macenko-normalized tile; a tile that cannot
    // be normalized (blank) is analyzed as-is
    std::optional<ImageRGB8> analysis = img;
    if (img) {
        try {
            analysis = macenko_normalize(*img, macenko_target, rbr.detector.macenko);
        } catch (const InsufficientTissue&) {
        }
    }

    const RefineResult res = refine(analysis ? &*analysis : nullptr, det ? &*det : nullptr,
                                    fused, rbr);
    step.score = res.score;
    step.rule_id = res.refinement_available ? rule_id_name(res.outcome.rule_id)
                                            : "RefinementUnavailable";
    step.confidence = res.outcome.confidence;
    step.modifier_applied = res.modifier_applied;
    return step;
}

}  // namespace detail

/// Full inference flow: fuse model scores per image, optionally run the RBR
/// adjustment, threshold into decisions, write the predictions CSV and, when
/// ground truth is given, the evaluation report.
inline int run_pipeline(const PipelineConfig& cfg, std::ostream& err) {
    namespace fs = std::filesystem;
    try {
        const auto grouped = group_by_image(load_model_scores(cfg.scores_csv));
        std::unordered_map<std::string, std::size_t> score_index;
        for (std::size_t i = 0; i < grouped.size(); ++i)
            score_index.emplace(grouped[i].image_id, i);

        std::vector<std::string> ids;
        if (!cfg.manifest_csv.empty()) {
            std::unordered_set<std::string> dedup;
            for (const ManifestEntry& e : load_manifest(cfg.manifest_csv))
                if (dedup.insert(e.image_id).second) ids.push_back(e.image_id);
            for (const std::string& id : ids)
                if (!score_index.count(id))
                    throw MissingScores("image '" + id + "' has no model scores");
        } else {
            ids.reserve(grouped.size());
            for (const auto& g : grouped) ids.push_back(g.image_id);
        }

        StainProfile macenko_target;
        if (cfg.rbr_enabled)
            macenko_target = resolve_macenko_target(cfg.macenko_target, cfg.rbr.detector.macenko);

        std::vector<PredictionRow> rows(ids.size());
        std::vector<std::string> row_errors(ids.size());
        std::atomic<std::size_t> next{0};
        const auto work = [&]() {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= ids.size()) return;
                PredictionRow& row = rows[i];
                row.image_id = ids[i];
                try {
                    const ClassScore fused = fuse(grouped[score_index.at(ids[i])].scores);
                    ClassScore final_score = fused;
                    if (cfg.rbr_enabled) {
                        const detail::RbrStep step = detail::rbr_step(
                            ids[i], fused, cfg.images_dir, cfg.detections_dir, cfg.rbr,
                            macenko_target);
                        final_score = step.score;
                        row.rule_id = step.rule_id;
                        row.confidence = step.confidence;
                        row.modifier_applied = step.modifier_applied;
                        if (!step.data_error.empty()) row_errors[i] = step.data_error;
                    }
                    row.label = decide(final_score, cfg.ensemble_threshold).label;
                    row.score = final_score;
                } catch (const std::exception& e) {
                    // nothing may escape a worker thread
                    row_errors[i] = e.what();
                }
            }
        };
        const int n_workers = std::max(1, std::min(cfg.workers, 64));
        if (n_workers == 1) {
            work();
        } else {
            std::vector<std::thread> pool;
            for (int t = 0; t < n_workers; ++t) pool.emplace_back(work);
            for (std::thread& t : pool) t.join();
        }

        bool any_data_error = false;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (!row_errors[i].empty()) {
                any_data_error = true;
                err << ids[i] << ": " << row_errors[i] << "\n";
            }

        fs::create_directories(cfg.out_dir);
        write_predictions(rows, (fs::path(cfg.out_dir) / "predictions.csv").string(),
                          cfg.emit_provenance);

        if (!cfg.truth_csv.empty()) {
            const auto truth = parse_truth(csv::read_file(cfg.truth_csv), cfg.truth_csv);
            const EvalReport report = evaluate_against_truth(rows, truth);
            std::ofstream f(fs::path(cfg.out_dir) / "report.json");
            if (!f) throw IoError("cannot write report.json");
            f << nlohmann::json(report).dump(2) << "\n";
        }
        return any_data_error ? 2 : 0;
    } catch (const Error& e) {
        err << "pipeline: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

/// Batch stain normalization. Per-file failures are reported and the batch
/// continues; any failure turns into exit code 2.
inline int run_normalize(const std::vector<std::string>& inputs, const std::string& method,
                         const std::string& target_path, const std::string& out_dir,
                         const MacenkoParams& params, std::ostream& err) {
    namespace fs = std::filesystem;
    if (inputs.empty()) return 0;
    try {
        LabStats lab_target;
        StainProfile stain_target;
        if (method == "reinhard")
            lab_target = resolve_reinhard_target(target_path);
        else if (method == "macenko")
            stain_target = resolve_macenko_target(target_path, params);
        else
            throw Error("unknown method '" + method + "'");

        fs::create_directories(out_dir);
        bool any_fail = false;
        for (const std::string& in : inputs) {
            try {
                const ImageRGB8 img = io::read_png(in);
                const ImageRGB8 out = method == "reinhard"
                                          ? reinhard_normalize(img, lab_target)
                                          : macenko_normalize(img, stain_target, params);
                io::write_png(out, (fs::path(out_dir) / fs::path(in).filename()).string());
            } catch (const Error& e) {
                err << in << ": " << e.what() << "\n";
                any_fail = true;
            }
        }
        return any_fail ? 2 : 0;
    } catch (const Error& e) {
        err << "normalize: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

/// Run the fallback detector over images, one detection JSON per input.
inline int run_detect(const std::vector<std::string>& inputs, const std::string& out_dir,
                      const FallbackDetectorParams& params, std::ostream& err) {
    namespace fs = std::filesystem;
    if (inputs.empty()) return 0;
    try {
        fs::create_directories(out_dir);
    } catch (const std::exception& e) {
        err << "detect: " << e.what() << "\n";
        return 2;
    }
    bool any_fail = false;
    for (const std::string& in : inputs) {
        try {
            const std::string stem = fs::path(in).stem().string();
            const DetectionSet det = fallback_detect(io::read_png(in), params, stem);
            save_detections(det, (fs::path(out_dir) / (stem + ".json")).string());
        } catch (const Error& e) {
            err << in << ": " << e.what() << "\n";
            any_fail = true;
        }
    }
    return any_fail ? 2 : 0;
}

/// Fuse per-model scores into one row per image.
inline int run_fuse(const std::string& scores_csv, const std::string& out_csv,
                    std::ostream& err) {
    try {
        const auto grouped = group_by_image(load_model_scores(scores_csv));
        std::ofstream f(out_csv);
        if (!f) throw IoError("cannot open " + out_csv + " for writing");
        f << "image_id,p_nmf,p_amf\n";
        for (const ImageScores& g : grouped) {
            const ClassScore s = fuse(g.scores);
            f << g.image_id << ',' << csv::fixed(s.p_nmf) << ',' << csv::fixed(s.p_amf) << "\n";
        }
        return 0;
    } catch (const Error& e) {
        err << "fuse: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

/// Fused scores CSV: header image_id,p_nmf,p_amf.
inline std::vector<std::pair<std::string, ClassScore>> load_fused_scores(
    const std::string& path) {
    const auto rows = csv::read_file(path);
    if (rows.empty() || rows[0] != std::vector<std::string>{"image_id", "p_nmf", "p_amf"})
        throw SchemaError(path + ": expected header image_id,p_nmf,p_amf");
    std::vector<std::pair<std::string, ClassScore>> out;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 3) throw SchemaError(path + ": wrong field count in row " + std::to_string(i));
        ClassScore s{csv::parse_double(r[1], path), csv::parse_double(r[2], path)};
        validate(s);
        out.emplace_back(r[0], s);
    }
    return out;
}

/// Standalone RBR step over already-fused scores.
inline int run_refine(const std::string& fused_csv, const std::string& images_dir,
                      const std::string& detections_dir, const std::string& out_csv,
                      double threshold, const RbrConfig& rbr,
                      const std::string& macenko_target_path, std::ostream& err) {
    try {
        const auto fused = load_fused_scores(fused_csv);
        const StainProfile target = resolve_macenko_target(macenko_target_path, rbr.detector.macenko);
        std::vector<PredictionRow> rows;
        bool any_data_error = false;
        for (const auto& [id, score] : fused) {
            const detail::RbrStep step =
                detail::rbr_step(id, score, images_dir, detections_dir, rbr, target);
            if (!step.data_error.empty()) {
                err << id << ": " << step.data_error << "\n";
                any_data_error = true;
            }
            PredictionRow row;
            row.image_id = id;
            row.score = step.score;
            row.label = decide(step.score, threshold).label;
            row.rule_id = step.rule_id;
            row.confidence = step.confidence;
            row.modifier_applied = step.modifier_applied;
            rows.push_back(std::move(row));
        }
        write_predictions(rows, out_csv, true);
        return any_data_error ? 2 : 0;
    } catch (const Error& e) {
        err << "refine: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

/// Metrics over a predictions file against ground truth.
inline int run_evaluate(const std::string& pred_csv, const std::string& truth_csv,
                        const std::string& out_json, std::ostream& out, std::ostream& err) {
    try {
        const auto preds = parse_predictions(csv::read_file(pred_csv), pred_csv);
        const auto truth = parse_truth(csv::read_file(truth_csv), truth_csv);
        const EvalReport report = evaluate_against_truth(preds, truth);
        const nlohmann::json j(report);
        if (!out_json.empty()) {
            std::ofstream f(out_json);
            if (!f) throw IoError("cannot open " + out_json + " for writing");
            f << j.dump(2) << "\n";
        }
        out << "balanced_accuracy " << csv::fixed(report.balanced_accuracy, 2) << "\n"
            << "sensitivity       " << csv::fixed(report.sensitivity, 2) << "\n"
            << "specificity       " << csv::fixed(report.specificity, 2) << "\n"
            << "auc               " << csv::fixed(report.auc, 2) << "\n";
        return 0;
    } catch (const Error& e) {
        err << "evaluate: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

/// Patient-stratified split of a manifest.
inline int run_split(const std::string& manifest_csv, double fraction, std::uint32_t seed,
                     const std::string& out_csv, std::ostream& err) {
    try {
        const auto entries = load_manifest(manifest_csv);
        const SplitAssignment split = stratified_split(entries, fraction, seed);
        std::ofstream f(out_csv);
        if (!f) throw IoError("cannot open " + out_csv + " for writing");
        f << "patient_id,split\n";
        for (const std::string& p : split.train) f << p << ",train\n";
        for (const std::string& p : split.test) f << p << ",test\n";
        return 0;
    } catch (const Error& e) {
        err << "split: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

/// Remove the MIDOG25 rows that duplicate AMi-Br images.
inline int run_dedup(const std::string& manifest_csv, const std::string& out_csv,
                     std::ostream& err) {
    try {
        const auto entries = dedup_overlap(load_manifest(manifest_csv));
        std::ofstream f(out_csv);
        if (!f) throw IoError("cannot open " + out_csv + " for writing");
        f << "image_id,patient_id,source,label\n";
        for (const ManifestEntry& e : entries)
            f << e.image_id << ',' << e.patient_id << ',' << source_name(e.source) << ','
              << label_name(e.label) << "\n";
        return 0;
    } catch (const Error& e) {
        err << "dedup: " << e.what() << "\n";
        return exit_code_for(e);
    }
}

}  // namespace mitoref
