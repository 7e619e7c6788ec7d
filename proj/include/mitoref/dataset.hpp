#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "mitoref/io/csv.hpp"
#include "mitoref/rng.hpp"
#include "mitoref/score.hpp"

namespace mitoref {

enum class Source { AMiBr, MIDOG25, Octopath };

inline const char* source_name(Source s) {
    switch (s) {
        case Source::AMiBr: return "AMiBr";
        case Source::MIDOG25: return "MIDOG25";
        case Source::Octopath: return "Octopath";
    }
    return "?";
}

inline Source parse_source(const std::string& s) {
    if (s == "AMiBr") return Source::AMiBr;
    if (s == "MIDOG25") return Source::MIDOG25;
    if (s == "Octopath") return Source::Octopath;
    throw SchemaError("unknown source '" + s + "'");
}

struct ManifestEntry {
    std::string image_id;
    std::string patient_id;
    Source source = Source::MIDOG25;
    Label label = Label::NMF;
};

/// Manifest CSV: header image_id,patient_id,source,label. Image ids must be
/// unique within one source.
inline std::vector<ManifestEntry> parse_manifest(
    const std::vector<std::vector<std::string>>& rows, const std::string& context) {
    if (rows.empty() ||
        rows[0] != std::vector<std::string>{"image_id", "patient_id", "source", "label"})
        throw SchemaError(context + ": expected header image_id,patient_id,source,label");
    std::vector<ManifestEntry> out;
    std::set<std::pair<std::string, std::string>> seen;  // (source, image_id)
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        if (r.size() != 4)
            throw SchemaError(context + ": row " + std::to_string(i) + " needs 4 fields");
        if (r[0].empty() || r[1].empty())
            throw SchemaError(context + ": empty id in row " + std::to_string(i));
        ManifestEntry e{r[0], r[1], parse_source(r[2]), parse_label(r[3])};
        if (!seen.insert({r[2], r[0]}).second)
            throw DuplicateImageId(context + ": duplicate image id '" + r[0] + "' in source " +
                                   r[2]);
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
    return parse_manifest(csv::read_file(path), path);
}

/// Drop every MIDOG25 entry whose image id also occurs under AMiBr; the two
/// datasets overlap and the AMi-Br copy wins. Order is preserved.
inline std::vector<ManifestEntry> dedup_overlap(const std::vector<ManifestEntry>& entries) {
    std::unordered_set<std::string> amibr_ids;
    for (const ManifestEntry& e : entries)
        if (e.source == Source::AMiBr) amibr_ids.insert(e.image_id);
    std::vector<ManifestEntry> out;
    out.reserve(entries.size());
    for (const ManifestEntry& e : entries) {
        if (e.source == Source::MIDOG25 && amibr_ids.count(e.image_id)) continue;
        out.push_back(e);
    }
    return out;
}

/// Patient-level train/test partition.
struct SplitAssignment {
    std::set<std::string> train;
    std::set<std::string> test;
};

/// Patient-stratified split: patients are shuffled by a seeded generator and
/// assigned to the test side until its tile count first reaches
/// test_fraction x total. Deterministic for fixed inputs and seed.
inline SplitAssignment stratified_split(const std::vector<ManifestEntry>& entries,
                                        double test_fraction, std::uint32_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error("test_fraction must be in (0, 1)");
    std::map<std::string, std::uint64_t> tiles_per_patient;
    for (const ManifestEntry& e : entries) ++tiles_per_patient[e.patient_id];
    if (tiles_per_patient.size() < 2)
        throw TooFewPatients("need at least 2 patients to split");

    std::vector<std::string> patients;
    patients.reserve(tiles_per_patient.size());
    for (const auto& [p, _] : tiles_per_patient) patients.push_back(p);
    std::mt19937 gen(seed);
    shuffle_portable(patients, gen);

    const double target =
        test_fraction * static_cast<double>(entries.size());
    SplitAssignment split;
    std::uint64_t test_tiles = 0;
    for (const std::string& p : patients) {
        if (static_cast<double>(test_tiles) < target) {
            split.test.insert(p);
            test_tiles += tiles_per_patient[p];
        } else {
            split.train.insert(p);
        }
    }
    return split;
}

}  // namespace mitoref
