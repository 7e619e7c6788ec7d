#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mitoref/io/png.hpp"
#include "mitoref/pipeline.hpp"
#include "mitoref/synthetic.hpp"

using namespace mitoref;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

CliResult run_cli(const std::string& args, const fs::path& dir) {
    const fs::path out = dir / "stdout.txt";
    const fs::path err = dir / "stderr.txt";
    const std::string cmd = std::string(MITOREF_CLI_PATH) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.out = slurp(out);
    r.err = slurp(err);
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::path(testing::TempDir()) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ImageRGB8 tissue_tile(std::uint32_t seed) {
    std::vector<synthetic::NucleusSpec> nuclei{{32.0, 32.0, 8.0, 8.0, 0.0, 1.3, 1.0},
                                               {14.0, 48.0, 7.0, 5.0, 40.0, 1.2, 1.0}};
    return synthetic::render_he_tile(64, 64, nuclei, seed);
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream f(p);
    f << text;
}

std::size_t non_header_line_count(const std::string& text) {
    std::istringstream ss(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(ss, line))
        if (!line.empty()) ++n;
    return n ? n - 1 : 0;
}

}  // namespace

TEST(CliNormalize, SingleTileReinhard) {
    const fs::path dir = fresh_dir("norm1");
    io::write_png(tissue_tile(1), (dir / "tile.png").string());
    const CliResult r = run_cli("normalize " + (dir / "tile.png").string() + " --method reinhard --out " +
                                    (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    const ImageRGB8 out = io::read_png((dir / "out" / "tile.png").string());
    EXPECT_EQ(out.width, 64);
}

TEST(CliNormalize, WhiteTileMacenkoFailsWithExit2) {
    const fs::path dir = fresh_dir("norm2");
    io::write_png(ImageRGB8(48, 48, 247), (dir / "white.png").string());
    const CliResult r = run_cli("normalize " + (dir / "white.png").string() +
                                    " --method macenko --out " + (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("tissue"), std::string::npos);
    // reinhard handles the same tile fine
    const CliResult r2 = run_cli("normalize " + (dir / "white.png").string() +
                                     " --method reinhard --out " + (dir / "out").string(),
                                 dir);
    EXPECT_EQ(r2.exit_code, 0) << r2.err;
}

TEST(CliNormalize, EmptyInputListIsSuccess) {
    const fs::path dir = fresh_dir("norm3");
    const CliResult r = run_cli("normalize --method reinhard --out " + (dir / "out").string(), dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(CliNormalize, JsonTargets) {
    const fs::path dir = fresh_dir("norm4");
    io::write_png(tissue_tile(2), (dir / "tile.png").string());
    save_lab_stats(synthetic::default_reinhard_target(), (dir / "stats.json").string());
    save_stain_profile(synthetic::default_macenko_target(), (dir / "profile.json").string());

    EXPECT_EQ(run_cli("normalize " + (dir / "tile.png").string() + " --method reinhard --target " +
                          (dir / "stats.json").string() + " --out " + (dir / "o1").string(),
                      dir)
                  .exit_code,
              0);
    EXPECT_EQ(run_cli("normalize " + (dir / "tile.png").string() + " --method macenko --target " +
                          (dir / "profile.json").string() + " --out " + (dir / "o2").string(),
                      dir)
                  .exit_code,
              0);
    // mismatched target schema for the method: contract failure
    EXPECT_EQ(run_cli("normalize " + (dir / "tile.png").string() + " --method macenko --target " +
                          (dir / "stats.json").string() + " --out " + (dir / "o3").string(),
                      dir)
                  .exit_code,
              3);
}

TEST(CliDetect, WritesDetectionJson) {
    const fs::path dir = fresh_dir("detect");
    io::write_png(tissue_tile(3), (dir / "tile.png").string());
    const CliResult r = run_cli("detect " + (dir / "tile.png").string() + " --out " +
                                    (dir / "dets").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    const DetectionSet d = load_detections((dir / "dets" / "tile.json").string());
    EXPECT_EQ(d.image_id, "tile");
    EXPECT_EQ(d.cells.size(), 2u);
}

TEST(CliFuse, AveragesModelScores) {
    const fs::path dir = fresh_dir("fuse");
    write_text(dir / "scores.csv",
               "image_id,model_id,p_nmf,p_amf\n"
               "i1,m0,0.1,0.9\n"
               "i1,m1,0.4,0.6\n"
               "i1,m2,0.7,0.3\n"
               "i2,m0,0.5,0.5\n");
    const CliResult r = run_cli("fuse --scores " + (dir / "scores.csv").string() + " --out " +
                                    (dir / "fused.csv").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "fused.csv"),
              "image_id,p_nmf,p_amf\n"
              "i1,0.400000,0.600000\n"
              "i2,0.500000,0.500000\n");
}

TEST(CliEvaluate, PerfectPredictions) {
    const fs::path dir = fresh_dir("eval1");
    write_text(dir / "pred.csv",
               "image_id,p_nmf,p_amf,label\n"
               "i1,0.1,0.9,AMF\n"
               "i2,0.8,0.2,NMF\n"
               "i3,0.3,0.7,AMF\n");
    write_text(dir / "truth.csv", "image_id,label\ni1,AMF\ni2,NMF\ni3,AMF\n");
    const CliResult r = run_cli("evaluate --pred " + (dir / "pred.csv").string() + " --truth " +
                                    (dir / "truth.csv").string() + " --out " +
                                    (dir / "report.json").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    nlohmann::json j;
    std::ifstream(dir / "report.json") >> j;
    EXPECT_DOUBLE_EQ(j["balanced_accuracy"].get<double>(), 100.0);
    EXPECT_DOUBLE_EQ(j["auc"].get<double>(), 100.0);
    EXPECT_EQ(j["n_pos"].get<int>(), 2);
}

TEST(CliEvaluate, BalancedAccuracyIdentityOnSyntheticCounts) {
    // tp=132 fn=10 tn=206 fp=68
    const fs::path dir = fresh_dir("eval2");
    std::ostringstream pred, truth;
    pred << "image_id,p_nmf,p_amf,label\n";
    truth << "image_id,label\n";
    int id = 0;
    const auto emit = [&](int n, const char* t, const char* p, double amf) {
        for (int i = 0; i < n; ++i, ++id) {
            pred << "r" << id << ',' << csv::fixed(1.0 - amf) << ',' << csv::fixed(amf) << ','
                 << p << "\n";
            truth << "r" << id << ',' << t << "\n";
        }
    };
    emit(132, "AMF", "AMF", 0.9);
    emit(10, "AMF", "NMF", 0.2);
    emit(206, "NMF", "NMF", 0.1);
    emit(68, "NMF", "AMF", 0.8);
    write_text(dir / "pred.csv", pred.str());
    write_text(dir / "truth.csv", truth.str());

    const CliResult r = run_cli("evaluate --pred " + (dir / "pred.csv").string() + " --truth " +
                                    (dir / "truth.csv").string() + " --out " +
                                    (dir / "report.json").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    nlohmann::json j;
    std::ifstream(dir / "report.json") >> j;
    const double sens = j["sensitivity"].get<double>();
    const double spec = j["specificity"].get<double>();
    EXPECT_NEAR(sens, 100.0 * 132.0 / 142.0, 1e-9);
    EXPECT_NEAR(spec, 100.0 * 206.0 / 274.0, 1e-9);
    EXPECT_NEAR(j["balanced_accuracy"].get<double>(), (sens + spec) / 2.0, 1e-9);
}

TEST(CliEvaluate, SingleClassTruthIsExit2) {
    const fs::path dir = fresh_dir("eval3");
    write_text(dir / "pred.csv", "image_id,p_nmf,p_amf,label\ni1,0.1,0.9,AMF\ni2,0.2,0.8,AMF\n");
    write_text(dir / "truth.csv", "image_id,label\ni1,AMF\ni2,AMF\n");
    const CliResult r = run_cli("evaluate --pred " + (dir / "pred.csv").string() + " --truth " +
                                    (dir / "truth.csv").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 2);
}

TEST(CliEvaluate, IdMismatchIsExit3) {
    const fs::path dir = fresh_dir("eval4");
    write_text(dir / "pred.csv", "image_id,p_nmf,p_amf,label\ni1,0.1,0.9,AMF\n");
    write_text(dir / "truth.csv", "image_id,label\nother,AMF\n");
    const CliResult r = run_cli("evaluate --pred " + (dir / "pred.csv").string() + " --truth " +
                                    (dir / "truth.csv").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 3);
}

TEST(CliSplit, DeterministicBytesForFixedSeed) {
    const fs::path dir = fresh_dir("split");
    std::ostringstream m;
    m << "image_id,patient_id,source,label\n";
    for (int p = 0; p < 30; ++p)
        for (int t = 0; t < 2 + p % 3; ++t)
            m << "img" << p << "_" << t << ",pat" << p << ",MIDOG25,NMF\n";
    write_text(dir / "manifest.csv", m.str());

    const std::string base = "split --manifest " + (dir / "manifest.csv").string();
    EXPECT_EQ(run_cli(base + " --seed 7 --out " + (dir / "a.csv").string(), dir).exit_code, 0);
    EXPECT_EQ(run_cli(base + " --seed 7 --out " + (dir / "b.csv").string(), dir).exit_code, 0);
    EXPECT_EQ(run_cli(base + " --seed 8 --out " + (dir / "c.csv").string(), dir).exit_code, 0);
    EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
    EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
    EXPECT_NE(slurp(dir / "a.csv").find("patient_id,split"), std::string::npos);
}

TEST(CliDedup, RemovesOverlapRows) {
    const fs::path dir = fresh_dir("dedup");
    write_text(dir / "manifest.csv",
               "image_id,patient_id,source,label\n"
               "x,p1,AMiBr,NMF\n"
               "x,p2,MIDOG25,NMF\n"
               "y,p2,MIDOG25,AMF\n");
    const CliResult r = run_cli("dedup --manifest " + (dir / "manifest.csv").string() + " --out " +
                                    (dir / "out.csv").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "out.csv"),
              "image_id,patient_id,source,label\n"
              "x,p1,AMiBr,NMF\n"
              "y,p2,MIDOG25,AMF\n");
}

TEST(CliPipeline, BaselineEqualsFusedScores) {
    const fs::path dir = fresh_dir("pipe1");
    write_text(dir / "scores.csv",
               "image_id,model_id,p_nmf,p_amf\n"
               "i1,m0,0.1,0.9\n"
               "i1,m1,0.3,0.7\n"
               "i2,m0,0.8,0.2\n"
               "i2,m1,0.6,0.4\n");
    const CliResult r = run_cli("pipeline --scores " + (dir / "scores.csv").string() +
                                    " --no-rbr --out " + (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "out" / "predictions.csv"),
              "image_id,p_nmf,p_amf,label,rule_id,confidence,modifier_applied\n"
              "i1,0.200000,0.800000,AMF,NoAdjustment,0.000000,0.000000\n"
              "i2,0.700000,0.300000,NMF,NoAdjustment,0.000000,0.000000\n");
}

TEST(CliPipeline, ManifestWithoutScoresIsExit3) {
    const fs::path dir = fresh_dir("pipe2");
    write_text(dir / "scores.csv", "image_id,model_id,p_nmf,p_amf\ni1,m0,0.5,0.5\n");
    write_text(dir / "manifest.csv",
               "image_id,patient_id,source,label\ni1,p1,MIDOG25,NMF\nmissing,p2,MIDOG25,AMF\n");
    const CliResult r = run_cli("pipeline --scores " + (dir / "scores.csv").string() +
                                    " --manifest " + (dir / "manifest.csv").string() + " --out " +
                                    (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_FALSE(fs::exists(dir / "out" / "predictions.csv"));
}

TEST(CliPipeline, RbrWithoutInputsFlagsUnavailable) {
    const fs::path dir = fresh_dir("pipe3");
    write_text(dir / "scores.csv", "image_id,model_id,p_nmf,p_amf\ni1,m0,0.45,0.55\n");
    const CliResult r = run_cli("pipeline --scores " + (dir / "scores.csv").string() +
                                    " --rbr --out " + (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "out" / "predictions.csv"),
              "image_id,p_nmf,p_amf,label,rule_id,confidence,modifier_applied\n"
              "i1,0.450000,0.550000,AMF,RefinementUnavailable,0.000000,0.000000\n");
}

TEST(CliPipeline, ProvenanceColumnsCanBeDisabled) {
    const fs::path dir = fresh_dir("pipe4");
    write_text(dir / "scores.csv", "image_id,model_id,p_nmf,p_amf\ni1,m0,0.45,0.55\n");
    const CliResult r = run_cli("pipeline --scores " + (dir / "scores.csv").string() +
                                    " --no-rbr --no-emit-provenance --out " + (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_EQ(slurp(dir / "out" / "predictions.csv"),
              "image_id,p_nmf,p_amf,label\n"
              "i1,0.450000,0.550000,AMF\n");
}

TEST(CliRefine, AppliesRulesToFusedScores) {
    const fs::path dir = fresh_dir("refine");
    fs::create_directories(dir / "imgs");
    std::vector<synthetic::NucleusSpec> one{{32.0, 32.0, 8.0, 8.0, 0.0, 1.3, 1.0}};
    io::write_png(synthetic::render_he_tile(64, 64, one, 4), (dir / "imgs" / "i1.png").string());
    write_text(dir / "fused.csv", "image_id,p_nmf,p_amf\ni1,0.500000,0.500000\n");

    const CliResult r = run_cli("refine --scores " + (dir / "fused.csv").string() + " --images " +
                                    (dir / "imgs").string() + " --out " + (dir / "refined.csv").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    const auto rows = parse_predictions(csv::read_file((dir / "refined.csv").string()), "refined");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].rule_id, "SingleShapeNmf");
    EXPECT_GT(rows[0].score.p_nmf, 0.5);  // pushed toward NMF
}

TEST(Cli, UnknownSubcommandFails) {
    const fs::path dir = fresh_dir("unknown");
    EXPECT_NE(run_cli("frobnicate", dir).exit_code, 0);
}

TEST(CliPipeline, ConfigFileDrivesRunAndFlagsOverride) {
    const fs::path dir = fresh_dir("pipe5");
    write_text(dir / "scores.csv",
               "image_id,model_id,p_nmf,p_amf\n"
               "i1,m0,0.40,0.60\n"
               "i1,m1,0.50,0.50\n");
    PipelineConfig cfg;
    cfg.scores_csv = (dir / "scores.csv").string();
    cfg.out_dir = (dir / "from_config").string();
    cfg.rbr_enabled = true;  // no images/detections: rows would be flagged
    write_text(dir / "run.json", nlohmann::json(cfg).dump(2));

    const CliResult r = run_cli("pipeline --config " + (dir / "run.json").string(), dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_NE(slurp(dir / "from_config" / "predictions.csv").find("RefinementUnavailable"),
              std::string::npos);

    // --no-rbr must override the config's rbr_enabled=true
    const CliResult r2 = run_cli("pipeline --config " + (dir / "run.json").string() +
                                     " --no-rbr --out " + (dir / "overridden").string(),
                                 dir);
    EXPECT_EQ(r2.exit_code, 0) << r2.err;
    EXPECT_EQ(slurp(dir / "overridden" / "predictions.csv").find("RefinementUnavailable"),
              std::string::npos);
}

TEST(CliPipeline, CorruptedPerImageInputsAreReportedAsExit2) {
    const fs::path dir = fresh_dir("pipe6");
    fs::create_directories(dir / "imgs");
    fs::create_directories(dir / "dets");
    write_text(dir / "scores.csv",
               "image_id,model_id,p_nmf,p_amf\n"
               "bad_png,m0,0.50,0.50\n"
               "bad_det,m0,0.50,0.50\n");
    write_text(dir / "imgs" / "bad_png.png", "not a png at all");
    io::write_png(tissue_tile(9), (dir / "imgs" / "bad_det.png").string());
    write_text(dir / "dets" / "bad_det.json", "{ this is not json");

    const CliResult r = run_cli("pipeline --scores " + (dir / "scores.csv").string() +
                                    " --images " + (dir / "imgs").string() + " --detections " +
                                    (dir / "dets").string() + " --rbr --out " +
                                    (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 2);
    EXPECT_NE(r.err.find("bad_png"), std::string::npos);
    EXPECT_NE(r.err.find("bad_det"), std::string::npos);
    // both rows still exist: the batch continues past per-image failures
    EXPECT_EQ(non_header_line_count(slurp(dir / "out" / "predictions.csv")), 2u);
}

TEST(CliNormalize, ConfigSuppliesTargetWhenFlagAbsent) {
    const fs::path dir = fresh_dir("norm5");
    io::write_png(tissue_tile(12), (dir / "tile.png").string());
    save_stain_profile(synthetic::default_macenko_target(), (dir / "profile.json").string());
    PipelineConfig cfg;
    cfg.macenko_target = (dir / "profile.json").string();
    write_text(dir / "run.json", nlohmann::json(cfg).dump(2));

    const CliResult r = run_cli("normalize " + (dir / "tile.png").string() +
                                    " --method macenko --config " + (dir / "run.json").string() +
                                    " --out " + (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "out" / "tile.png"));
}

TEST(CliPipeline, MacenkoTargetAsReferencePng) {
    const fs::path dir = fresh_dir("pipe7");
    fs::create_directories(dir / "imgs");
    io::write_png(tissue_tile(13), (dir / "imgs" / "i1.png").string());
    io::write_png(synthetic::default_target_tile(), (dir / "ref.png").string());
    write_text(dir / "scores.csv", "image_id,model_id,p_nmf,p_amf\ni1,m0,0.50,0.50\n");

    const CliResult r = run_cli("pipeline --scores " + (dir / "scores.csv").string() +
                                    " --images " + (dir / "imgs").string() + " --target " +
                                    (dir / "ref.png").string() + " --rbr --out " +
                                    (dir / "out").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
}

TEST(CliRefine, DetectionsDirAndConfigWeightsAreHonored) {
    const fs::path dir = fresh_dir("refine2");
    fs::create_directories(dir / "dets");
    // external detections only (no images): a centered round cell
    std::ostringstream det;
    det << R"({"image_id":"i1","width":64,"height":64,"cells":[{"polygon":[)";
    for (int i = 0; i < 32; ++i) {
        const double t = 2.0 * M_PI * i / 32;
        det << (i ? "," : "") << '[' << 32 + 9 * std::cos(t) << ',' << 32 + 9 * std::sin(t) << ']';
    }
    det << R"(],"score":0.9}]})";
    write_text(dir / "dets" / "i1.json", det.str());
    write_text(dir / "fused.csv", "image_id,p_nmf,p_amf\ni1,0.500000,0.500000\n");

    PipelineConfig cfg;
    cfg.rbr.weight_round = 0.4;  // non-default weight must reach the rule engine
    write_text(dir / "run.json", nlohmann::json(cfg).dump(2));

    const CliResult r = run_cli("refine --scores " + (dir / "fused.csv").string() +
                                    " --detections " + (dir / "dets").string() + " --config " +
                                    (dir / "run.json").string() + " --out " +
                                    (dir / "refined.csv").string(),
                                dir);
    EXPECT_EQ(r.exit_code, 0) << r.err;
    const auto rows = parse_predictions(csv::read_file((dir / "refined.csv").string()), "refined");
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].rule_id, "SingleShapeNmf");
    EXPECT_DOUBLE_EQ(rows[0].modifier_applied, 0.4);
    EXPECT_NEAR(rows[0].score.p_nmf, 0.9, 1e-9);
}
