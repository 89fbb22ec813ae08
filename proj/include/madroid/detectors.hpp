#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "madroid/clients.hpp"
#include "madroid/extractor.hpp"
#include "madroid/raster.hpp"

namespace madroid::detect {

struct DetectionBox {
    double x = 0;
    double y = 0;
    double w = 0;
    double h = 0;
    double confidence = 0;
};

struct GroundTruthBox {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;
};

// Grid-proposal parameters in the shape of a one-class single-object
// detector head: S*S cells, B boxes per cell, C = 1 class.
struct GridParams {
    int S = 13;
    int B = 2;
    static constexpr int C = 1;
    double iou_nms = 0.45;
    double conf_min = 0.6;
};

double iou(const DetectionBox& a, const DetectionBox& b);

// Greedy non-maximal suppression: repeatedly keep the highest-confidence box
// and drop boxes overlapping it with IoU > threshold. Output sorted by
// descending confidence, ties in input order.
std::vector<DetectionBox> nms(std::vector<DetectionBox> boxes, double iou_threshold);

// Baseline cross-symbol detector: per grid cell, up to B windows anchored in
// the cell at the template-bank scales, scored by the best normalized
// cross-correlation (negative correlations clamp to confidence 0); kept
// windows are conf >= conf_min, then suppressed with nms.
std::vector<DetectionBox> detect_cross(const Raster& image, const std::vector<Raster>& templates,
                                       const GridParams& params = {});

struct ScaleRange {
    double lo = 0.03;
    double hi = 0.10;
};

struct EmbedResult {
    Raster image;
    GroundTruthBox box;
};

// Composites the symbol onto the base at a seed-deterministic uniform-random
// position and scale (fraction of the min base dimension).
EmbedResult embed_cross(const Raster& base, const Raster& symbol, std::uint32_t seed,
                        const ScaleRange& scale_range = {});

// PASCAL-VOC-style annotation document for one image with "cross" objects.
std::string voc_annotation(const std::string& filename, int width, int height, int depth,
                           std::span<const GroundTruthBox> boxes);

enum class DeviousGroup {
    ClickDeceptive,
    CensoredPorn,
    CensoredViolence,
    CensoredMedical,
    CensoredGambling,
    MaliciousScript,
    MaliciousLink,
    MaliciousApp,
};

std::string_view devious_group_name(DeviousGroup group);

struct Verdict {
    bool devious = false;
    DeviousGroup group = DeviousGroup::ClickDeceptive;
    nlohmann::json evidence;  // detector-specific: boxes, keywords, likelihoods, engines
};

// Lowercased word tokens split on whitespace and ASCII punctuation;
// unsegmented CJK runs stay single tokens.
std::vector<std::string> tokenize(std::string_view text);

std::vector<std::string> default_close_words();
std::vector<std::string> default_gambling_words();

// ClickDeceptive when a token equals a close-word (ASCII words match whole
// tokens; CJK entries match by substring containment).
Verdict detect_close_keywords(const std::vector<std::string>& texts,
                              const std::vector<std::string>& close_words = default_close_words());

// Censored/Gambling by the same matching rule. Throws ConfigError on an
// empty keyword list.
Verdict detect_gambling(const std::vector<std::string>& texts,
                        const std::vector<std::string>& keywords);

// One verdict per category with likelihood >= 4. Throws InputError for
// values outside 1..5.
std::vector<Verdict> judge_censored(const clients::VisionResult& likelihoods);

// Devious when at least three engines flag the artifact; the group follows
// the artifact kind.
Verdict judge_malicious(const clients::ScanResult& scan, extract::ArtifactKind kind);

// ---------------------------------------------------------------------------
// Plugin registry

struct DetectorContext {
    clients::VisionClient* vision = nullptr;
    clients::OcrClient* ocr = nullptr;
    clients::ScannerClient* scanner = nullptr;
    std::vector<Raster> cross_templates;
    GridParams grid;
    std::vector<std::string> close_words = default_close_words();
    std::vector<std::string> gambling_words = default_gambling_words();
};

class Detector {
public:
    virtual ~Detector() = default;
    virtual std::string_view name() const = 0;
    virtual bool applies_to(extract::ArtifactKind kind) const = 0;
    virtual std::vector<Verdict> run(const extract::AdArtifact& artifact,
                                     DetectorContext& context) = 0;
};

using Registry = std::vector<std::unique_ptr<Detector>>;

// The five built-in plugins: cross, close-text, gambling, censored,
// malicious. `enabled` empty means all.
Registry default_registry(const std::vector<std::string>& enabled = {});

struct DetectorError {
    std::string detector;
    std::string message;
};

struct ArtifactFindings {
    std::size_t artifact_index = 0;
    std::vector<Verdict> verdicts;
    std::vector<DetectorError> errors;
};

struct DetectionRun {
    std::vector<ArtifactFindings> findings;  // one per artifact, in order
    bool any_errors() const;
};

// Routes every artifact through all applicable detectors; a detector failing
// on one artifact is recorded and the run continues.
DetectionRun run_detectors(const std::vector<extract::AdArtifact>& artifacts,
                           const Registry& registry, DetectorContext& context);

// Default cross-symbol template bank: a drawn multi-stroke X at several
// sizes. Real deployments load harvested symbol images instead.
std::vector<Raster> builtin_cross_templates(int min_side = 12, int max_side = 48, int step = 6);

// Draws a cross symbol (diagonal strokes on a filled disc) used for the
// synthetic corpus and the built-in template bank.
Raster draw_cross_symbol(int side, std::uint8_t foreground = 32, std::uint8_t background = 224);

}  // namespace madroid::detect
