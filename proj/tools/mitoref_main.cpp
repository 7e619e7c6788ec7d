#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mitoref/pipeline.hpp"

namespace {

mitoref::PipelineConfig load_config_or_default(const std::string& path) {
    if (path.empty()) return {};
    return mitoref::load_pipeline_config(path);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"mitoref: mitotic-figure classification pipeline (stain normalization, "
                 "rule-based score refinement, ensemble fusion, challenge metrics)"};
    app.require_subcommand(1);

    // normalize
    auto* norm = app.add_subcommand("normalize", "Stain-normalize PNG tiles");
    std::vector<std::string> norm_inputs;
    std::string norm_method = "reinhard", norm_target, norm_out = "normalized", norm_config;
    norm->add_option("inputs", norm_inputs, "input PNG files");
    norm->add_option("--method", norm_method, "reinhard or macenko")
        ->check(CLI::IsMember({"reinhard", "macenko"}));
    norm->add_option("--target", norm_target,
                     "target LabStats/StainProfile JSON or a reference PNG (default: bundled tile)");
    norm->add_option("--out", norm_out, "output directory");
    norm->add_option("--config", norm_config, "pipeline config JSON supplying targets");

    // detect
    auto* det = app.add_subcommand("detect", "Run the fallback cell detector");
    std::vector<std::string> det_inputs;
    std::string det_out = "detections";
    mitoref::FallbackDetectorParams det_params;
    det->add_option("inputs", det_inputs, "input PNG files");
    det->add_option("--out", det_out, "output directory for detection JSON files");
    det->add_option("--od-threshold", det_params.od_threshold, "stain channel threshold");
    det->add_option("--min-area", det_params.min_area_px, "minimum component area in px^2");

    // fuse
    auto* fus = app.add_subcommand("fuse", "Average per-model softmax scores");
    std::string fuse_scores, fuse_out = "fused.csv";
    fus->add_option("--scores", fuse_scores, "model scores CSV")->required();
    fus->add_option("--out", fuse_out, "fused scores CSV");

    // refine
    auto* ref = app.add_subcommand("refine", "Apply the rule-based refinement to fused scores");
    std::string ref_scores, ref_images, ref_detections, ref_out = "refined.csv", ref_target,
                ref_config;
    double ref_threshold = 0.5;
    ref->add_option("--scores", ref_scores, "fused scores CSV")->required();
    ref->add_option("--images", ref_images, "directory with <image_id>.png tiles");
    ref->add_option("--detections", ref_detections, "directory with <image_id>.json detections");
    ref->add_option("--out", ref_out, "output predictions CSV");
    ref->add_option("--target", ref_target, "Macenko target profile JSON or reference PNG");
    ref->add_option("--threshold", ref_threshold, "decision threshold on p_amf");
    ref->add_option("--config", ref_config, "pipeline config JSON supplying rule weights");

    // pipeline
    auto* pipe = app.add_subcommand("pipeline", "Full inference flow");
    std::string pipe_config;
    std::string p_scores, p_images, p_detections, p_manifest, p_truth, p_out, p_target;
    double p_threshold = 0.5;
    int p_workers = 1;
    bool p_rbr = true, p_prov = true;
    pipe->add_option("--config", pipe_config, "pipeline config JSON");
    pipe->add_option("--scores", p_scores, "model scores CSV");
    pipe->add_option("--images", p_images, "directory with <image_id>.png tiles");
    pipe->add_option("--detections", p_detections, "directory with <image_id>.json detections");
    pipe->add_option("--manifest", p_manifest, "manifest CSV defining the image set");
    pipe->add_option("--truth", p_truth, "ground truth CSV");
    pipe->add_option("--out", p_out, "output directory");
    pipe->add_option("--target", p_target, "Macenko target profile JSON or reference PNG");
    pipe->add_option("--threshold", p_threshold, "decision threshold on p_amf");
    pipe->add_option("--workers", p_workers, "parallel worker count");
    pipe->add_flag("--rbr,!--no-rbr", p_rbr, "enable the rule-based refinement");
    pipe->add_flag("--emit-provenance,!--no-emit-provenance", p_prov,
                   "include rule diagnostics columns");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Challenge metrics for a predictions file");
    std::string ev_pred, ev_truth, ev_out;
    ev->add_option("--pred", ev_pred, "predictions CSV")->required();
    ev->add_option("--truth", ev_truth, "ground truth CSV")->required();
    ev->add_option("--out", ev_out, "report JSON path");

    // split
    auto* sp = app.add_subcommand("split", "Patient-stratified train/test split");
    std::string sp_manifest, sp_out = "split.csv";
    double sp_fraction = 0.2;
    std::uint32_t sp_seed = 42;
    sp->add_option("--manifest", sp_manifest, "manifest CSV")->required();
    sp->add_option("--fraction", sp_fraction, "test tile fraction");
    sp->add_option("--seed", sp_seed, "shuffle seed");
    sp->add_option("--out", sp_out, "output CSV (patient_id,split)");

    // dedup
    auto* dd = app.add_subcommand("dedup", "Drop MIDOG25 rows duplicated from AMi-Br");
    std::string dd_manifest, dd_out = "deduped.csv";
    dd->add_option("--manifest", dd_manifest, "manifest CSV")->required();
    dd->add_option("--out", dd_out, "output manifest CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*norm) {
            mitoref::PipelineConfig cfg = load_config_or_default(norm_config);
            if (norm_target.empty())
                norm_target = norm_method == "reinhard" ? cfg.reinhard_target
                                                        : cfg.macenko_target;
            return mitoref::run_normalize(norm_inputs, norm_method, norm_target, norm_out,
                                          cfg.rbr.detector.macenko, std::cerr);
        }
        if (*det) return mitoref::run_detect(det_inputs, det_out, det_params, std::cerr);
        if (*fus) return mitoref::run_fuse(fuse_scores, fuse_out, std::cerr);
        if (*ref) {
            mitoref::PipelineConfig cfg = load_config_or_default(ref_config);
            if (ref_target.empty()) ref_target = cfg.macenko_target;
            return mitoref::run_refine(ref_scores, ref_images, ref_detections, ref_out,
                                       ref_threshold, cfg.rbr, ref_target, std::cerr);
        }
        if (*pipe) {
            mitoref::PipelineConfig cfg = load_config_or_default(pipe_config);
            if (pipe->count("--scores")) cfg.scores_csv = p_scores;
            if (pipe->count("--images")) cfg.images_dir = p_images;
            if (pipe->count("--detections")) cfg.detections_dir = p_detections;
            if (pipe->count("--manifest")) cfg.manifest_csv = p_manifest;
            if (pipe->count("--truth")) cfg.truth_csv = p_truth;
            if (pipe->count("--out")) cfg.out_dir = p_out;
            if (pipe->count("--target")) cfg.macenko_target = p_target;
            if (pipe->count("--threshold")) cfg.ensemble_threshold = p_threshold;
            if (pipe->count("--workers")) cfg.workers = p_workers;
            if (pipe->count("--rbr") || pipe->count("--no-rbr")) cfg.rbr_enabled = p_rbr;
            if (pipe->count("--emit-provenance") || pipe->count("--no-emit-provenance"))
                cfg.emit_provenance = p_prov;
            if (cfg.scores_csv.empty()) {
                std::cerr << "pipeline: --scores (or a config with 'scores') is required\n";
                return 3;
            }
            return mitoref::run_pipeline(cfg, std::cerr);
        }
        if (*ev) return mitoref::run_evaluate(ev_pred, ev_truth, ev_out, std::cout, std::cerr);
        if (*sp) return mitoref::run_split(sp_manifest, sp_fraction, sp_seed, sp_out, std::cerr);
        if (*dd) return mitoref::run_dedup(dd_manifest, dd_out, std::cerr);
    } catch (const mitoref::Error& e) {
        std::cerr << e.what() << "\n";
        return mitoref::exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }
    return 0;
}
