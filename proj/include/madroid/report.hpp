#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "madroid/clients.hpp"
#include "madroid/detectors.hpp"
#include "madroid/explorer.hpp"
#include "madroid/extractor.hpp"
#include "madroid/hookmap.hpp"

namespace madroid::report {

struct TypeCounter {
    long total = 0;
    long devious = 0;
};

struct MappingSummary {
    std::size_t lib_count = 0;
    std::size_t host_count = 0;
    int iterations = 0;
    bool converged = true;
};

struct MessageCounts {
    std::size_t total = 0;
    std::size_t ad_load = 0;
    std::size_t ad_click = 0;
    std::size_t non_ad = 0;
};

struct VerdictRecord {
    std::string artifact_hash;
    std::string kind;
    std::string host;
    std::vector<detect::Verdict> verdicts;
    std::vector<detect::DetectorError> errors;
};

struct DeviousnessReport {
    std::string app_id;
    MappingSummary mapping;
    MessageCounts messages;
    std::map<std::string, TypeCounter> per_type;  // artifact kind -> counters
    std::vector<VerdictRecord> artifacts;
    // serving host -> devious group -> count
    std::map<std::string, std::map<std::string, long>> devious_by_host;
    // final landing-page / download origin domains
    std::map<std::string, long> landing_origins;
    std::map<std::string, long> download_origins;
    std::size_t chain_count = 0;
    std::size_t detector_errors = 0;

    // Volatile fields (timestamps) live under "header"; everything else is
    // the deterministic "body".
    nlohmann::json to_json() const;
    nlohmann::json body_json() const;
};

struct PipelineConfig {
    std::string app_id;  // the capture line format does not carry it
    std::optional<std::filesystem::path> suffix_rules;
    std::vector<std::string> close_words;     // empty -> bundled defaults
    std::vector<std::string> gambling_words;  // empty -> bundled defaults
    extract::ExtractOptions extract;
    detect::GridParams grid;
    std::vector<Raster> cross_templates;  // empty -> built-in bank
    std::vector<std::string> enabled_detectors;   // empty -> all
    explore::Screen screen{1080, 1920};
    explore::PlanOptions plan;
    std::optional<std::filesystem::path> out_dir;  // artifact store + documents
};

// parse -> build mapping -> classify -> extract -> reconstruct chains ->
// re-classify -> detect -> tally. Failures carry the stage name.
DeviousnessReport run_pipeline(const std::filesystem::path& capture_path,
                               const std::filesystem::path& hook_path,
                               const std::vector<std::filesystem::path>& view_tree_paths,
                               const hookmap::SeedConfig& seeds, const PipelineConfig& config,
                               const clients::ClientBundle& bundle);

struct CorpusSummary {
    std::size_t apps = 0;
    std::map<std::string, TypeCounter> per_type;
    std::map<std::string, std::map<std::string, long>> devious_by_host;
    std::map<std::string, long> landing_origins;
    std::map<std::string, long> download_origins;
    std::size_t detector_errors = 0;
    std::size_t non_converged = 0;

    nlohmann::json to_json(int top_n = 5) const;
    std::string render_table(int top_n = 5) const;
};

CorpusSummary aggregate(std::span<const DeviousnessReport> reports);
CorpusSummary merge(const CorpusSummary& a, const CorpusSummary& b);

// One decimal, half-up: the rounding rule for every percentage printed in
// reports and summaries.
double percent_of(long count, long total);

}  // namespace madroid::report
