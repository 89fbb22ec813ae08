#include "madroid/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "madroid/defaults.hpp"
#include "madroid/errors.hpp"
#include "madroid/util.hpp"

namespace madroid::detect {

using extract::AdArtifact;
using extract::ArtifactKind;
using nlohmann::json;

double iou(const DetectionBox& a, const DetectionBox& b) {
    double ax2 = a.x + a.w, ay2 = a.y + a.h;
    double bx2 = b.x + b.w, by2 = b.y + b.h;
    double ix = std::max(0.0, std::min(ax2, bx2) - std::max(a.x, b.x));
    double iy = std::max(0.0, std::min(ay2, by2) - std::max(a.y, b.y));
    double inter = ix * iy;
    double uni = a.w * a.h + b.w * b.h - inter;
    return uni > 0 ? inter / uni : 0.0;
}

std::vector<DetectionBox> nms(std::vector<DetectionBox> boxes, double iou_threshold) {
    if (iou_threshold <= 0.0 || iou_threshold >= 1.0)
        throw ConfigError("nms threshold must lie in (0,1)");
    std::stable_sort(boxes.begin(), boxes.end(), [](const DetectionBox& a, const DetectionBox& b) {
        return a.confidence > b.confidence;
    });
    std::vector<DetectionBox> kept;
    for (const auto& candidate : boxes) {
        bool suppressed = false;
        for (const auto& keeper : kept) {
            if (iou(candidate, keeper) > iou_threshold) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) kept.push_back(candidate);
    }
    return kept;
}

namespace {

struct IntegralImage {
    int width = 0, height = 0;
    std::vector<double> sum, sum_sq;

    explicit IntegralImage(const Raster& gray) : width(gray.width), height(gray.height) {
        sum.assign(static_cast<std::size_t>(width + 1) * (height + 1), 0.0);
        sum_sq.assign(sum.size(), 0.0);
        for (int y = 0; y < height; ++y) {
            double row = 0, row_sq = 0;
            for (int x = 0; x < width; ++x) {
                double v = gray.at(x, y, 0);
                row += v;
                row_sq += v * v;
                std::size_t idx = static_cast<std::size_t>(y + 1) * (width + 1) + (x + 1);
                sum[idx] = sum[idx - (width + 1)] + row;
                sum_sq[idx] = sum_sq[idx - (width + 1)] + row_sq;
            }
        }
    }

    // window sums over [x, x+w) x [y, y+h)
    void window(int x, int y, int w, int h, double& s1, double& s2) const {
        std::size_t stride = width + 1;
        std::size_t a = static_cast<std::size_t>(y) * stride + x;
        std::size_t b = a + w;
        std::size_t c = a + static_cast<std::size_t>(h) * stride;
        std::size_t d = c + w;
        s1 = sum[d] - sum[b] - sum[c] + sum[a];
        s2 = sum_sq[d] - sum_sq[b] - sum_sq[c] + sum_sq[a];
    }
};

struct PreparedTemplate {
    int w = 0, h = 0;
    std::vector<float> centered;  // mean-subtracted pixels
    double norm = 0;              // sqrt(sum of squares of centered)
};

PreparedTemplate prepare_template(const Raster& raw) {
    Raster gray = to_gray(raw);
    PreparedTemplate t;
    t.w = gray.width;
    t.h = gray.height;
    double mean = 0;
    for (std::uint8_t v : gray.pixels) mean += v;
    mean /= static_cast<double>(gray.pixels.size());
    t.centered.resize(gray.pixels.size());
    double norm_sq = 0;
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
        double c = gray.pixels[i] - mean;
        t.centered[i] = static_cast<float>(c);
        norm_sq += c * c;
    }
    t.norm = std::sqrt(norm_sq);
    return t;
}

// Normalized cross-correlation of the template against the window at (x, y),
// clamped to [0, 1] (anti-correlated windows score 0).
double ncc_at(const std::vector<float>& gray, int image_width, const IntegralImage& integral,
              const PreparedTemplate& t, int x, int y) {
    if (t.norm < 1e-9) return 0.0;
    double s1, s2;
    integral.window(x, y, t.w, t.h, s1, s2);
    double n = static_cast<double>(t.w) * t.h;
    double var = s2 - s1 * s1 / n;
    if (var < 1e-9) return 0.0;

    double dot = 0;
    const float* trow = t.centered.data();
    for (int j = 0; j < t.h; ++j) {
        const float* irow = gray.data() + static_cast<std::size_t>(y + j) * image_width + x;
        double acc = 0;
        for (int i = 0; i < t.w; ++i) acc += static_cast<double>(irow[i]) * trow[i];
        dot += acc;
        trow += t.w;
    }
    // dot already equals the centered cross term because the template has
    // zero mean.
    double r = dot / (std::sqrt(var) * t.norm);
    return std::clamp(r, 0.0, 1.0);
}

}  // namespace

std::vector<DetectionBox> detect_cross(const Raster& image, const std::vector<Raster>& templates,
                                       const GridParams& params) {
    if (templates.empty()) throw ConfigError("cross detector needs a non-empty template bank");
    if (image.empty()) throw InputError("cross detector needs a non-empty image");
    if (params.S < 1 || params.B < 1) throw ConfigError("grid parameters must be positive");
    if (params.iou_nms <= 0 || params.iou_nms >= 1 || params.conf_min <= 0 || params.conf_min >= 1)
        throw ConfigError("grid thresholds must lie in (0,1)");

    Raster gray_raster = to_gray(image);
    const int W = gray_raster.width, H = gray_raster.height;
    std::vector<float> gray(gray_raster.pixels.begin(), gray_raster.pixels.end());
    IntegralImage integral(gray_raster);

    auto cell_of = [&](int cx, int cy) {
        int col = std::min(params.S - 1, cx * params.S / W);
        int row = std::min(params.S - 1, cy * params.S / H);
        return row * params.S + col;
    };

    struct Candidate {
        int x, y, w, h;
        double conf;
        int cell;
    };
    std::vector<Candidate> candidates;
    const double refine_floor = params.conf_min / 2;

    for (const auto& raw : templates) {
        PreparedTemplate t = prepare_template(raw);
        if (t.w > W || t.h > H || t.w <= 0 || t.h <= 0) continue;
        const int stride = std::max(1, std::min(t.w, t.h) / 8);

        // best coarse hit per grid cell for this template scale
        std::map<int, Candidate> best;
        for (int y = 0; y + t.h <= H; y += stride) {
            for (int x = 0; x + t.w <= W; x += stride) {
                double conf = ncc_at(gray, W, integral, t, x, y);
                if (conf < refine_floor) continue;
                int cell = cell_of(x + t.w / 2, y + t.h / 2);
                auto it = best.find(cell);
                if (it == best.end() || conf > it->second.conf)
                    best[cell] = {x, y, t.w, t.h, conf, cell};
            }
        }
        // stride-1 refinement around each coarse winner
        for (auto& [cell, cand] : best) {
            if (stride > 1) {
                int x_lo = std::max(0, cand.x - (stride - 1));
                int x_hi = std::min(W - t.w, cand.x + (stride - 1));
                int y_lo = std::max(0, cand.y - (stride - 1));
                int y_hi = std::min(H - t.h, cand.y + (stride - 1));
                for (int y = y_lo; y <= y_hi; ++y) {
                    for (int x = x_lo; x <= x_hi; ++x) {
                        double conf = ncc_at(gray, W, integral, t, x, y);
                        if (conf > cand.conf) cand = {x, y, t.w, t.h, conf, cell};
                    }
                }
            }
            candidates.push_back(cand);
        }
    }

    // keep at most B boxes per cell across all template scales
    std::stable_sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
        return a.cell != b.cell ? a.cell < b.cell : a.conf > b.conf;
    });
    std::vector<DetectionBox> boxes;
    int run_cell = -1, run_count = 0;
    for (const auto& c : candidates) {
        if (c.cell != run_cell) {
            run_cell = c.cell;
            run_count = 0;
        }
        if (run_count >= params.B) continue;
        ++run_count;
        if (c.conf >= params.conf_min)
            boxes.push_back({static_cast<double>(c.x), static_cast<double>(c.y),
                             static_cast<double>(c.w), static_cast<double>(c.h), c.conf});
    }
    return nms(std::move(boxes), params.iou_nms);
}

EmbedResult embed_cross(const Raster& base, const Raster& symbol, std::uint32_t seed,
                        const ScaleRange& scale_range) {
    if (base.empty() || symbol.empty()) throw InputError("embed_cross needs non-empty rasters");
    if (scale_range.lo <= 0 || scale_range.hi < scale_range.lo)
        throw InputError("invalid scale range");

    std::mt19937 rng(seed);
    // derive uniforms from raw engine output: the mt19937 sequence is
    // specified, distribution adapters are not
    auto unit = [&] { return rng() * (1.0 / 4294967296.0); };

    const int min_dim = std::min(base.width, base.height);
    double frac = scale_range.lo + unit() * (scale_range.hi - scale_range.lo);
    int side = static_cast<int>(std::llround(frac * min_dim));
    side = std::max(side, 1);

    double factor = static_cast<double>(side) / std::max(symbol.width, symbol.height);
    int sw = std::max(1, static_cast<int>(std::lround(symbol.width * factor)));
    int sh = std::max(1, static_cast<int>(std::lround(symbol.height * factor)));
    if (sw > base.width || sh > base.height)
        throw InputError("symbol does not fit into the base image at the requested scale");
    Raster scaled = resize_bilinear(symbol, sw, sh);

    int max_x = base.width - sw;
    int max_y = base.height - sh;
    int x = static_cast<int>(rng() % static_cast<std::uint32_t>(max_x + 1));
    int y = static_cast<int>(rng() % static_cast<std::uint32_t>(max_y + 1));

    EmbedResult result;
    result.image = base;
    alpha_composite(result.image, scaled, x, y);
    result.box = {x, y, sw, sh};
    return result;
}

std::string voc_annotation(const std::string& filename, int width, int height, int depth,
                           std::span<const GroundTruthBox> boxes) {
    std::ostringstream xml;
    xml << "<annotation>\n";
    xml << "  <filename>" << filename << "</filename>\n";
    xml << "  <size>\n";
    xml << "    <width>" << width << "</width>\n";
    xml << "    <height>" << height << "</height>\n";
    xml << "    <depth>" << depth << "</depth>\n";
    xml << "  </size>\n";
    for (const auto& box : boxes) {
        xml << "  <object>\n";
        xml << "    <name>cross</name>\n";
        xml << "    <bndbox>\n";
        xml << "      <xmin>" << box.x << "</xmin>\n";
        xml << "      <ymin>" << box.y << "</ymin>\n";
        xml << "      <xmax>" << box.x + box.w << "</xmax>\n";
        xml << "      <ymax>" << box.y + box.h << "</ymax>\n";
        xml << "    </bndbox>\n";
        xml << "  </object>\n";
    }
    xml << "</annotation>\n";
    return xml.str();
}

std::string_view devious_group_name(DeviousGroup group) {
    switch (group) {
        case DeviousGroup::ClickDeceptive: return "click-deceptive";
        case DeviousGroup::CensoredPorn: return "censored-porn";
        case DeviousGroup::CensoredViolence: return "censored-violence";
        case DeviousGroup::CensoredMedical: return "censored-medical";
        case DeviousGroup::CensoredGambling: return "censored-gambling";
        case DeviousGroup::MaliciousScript: return "malicious-script";
        case DeviousGroup::MaliciousLink: return "malicious-link";
        case DeviousGroup::MaliciousApp: return "malicious-app";
    }
    return "click-deceptive";
}

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    bool current_ascii = true;
    auto flush = [&] {
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
    };
    for (unsigned char c : text) {
        if (c < 0x80) {
            if (std::isalnum(c)) {
                if (!current.empty() && !current_ascii) flush();
                current_ascii = true;
                current += static_cast<char>(std::tolower(c));
            } else {
                flush();
            }
        } else {
            // UTF-8 multibyte run (CJK and friends) forms its own token
            if (!current.empty() && current_ascii) flush();
            current_ascii = false;
            current += static_cast<char>(c);
        }
    }
    flush();
    return tokens;
}

namespace {

std::vector<std::string> keyword_list_from_text(std::string_view text) {
    std::vector<std::string> words;
    std::istringstream stream{std::string(text)};
    std::string line;
    while (std::getline(stream, line)) {
        std::string word = trim(line);
        if (word.empty() || word.front() == '#') continue;
        words.push_back(word);
    }
    return words;
}

bool is_plain_ascii_word(std::string_view keyword) {
    return std::all_of(keyword.begin(), keyword.end(), [](unsigned char c) {
        return c < 0x80 && std::isalnum(c);
    });
}

// Shared matching rule: plain ASCII keywords match whole tokens, everything
// else (CJK, phrases) matches by case-folded substring containment.
std::vector<std::string> match_keywords(const std::vector<std::string>& texts,
                                        const std::vector<std::string>& keywords) {
    std::set<std::string> tokens;
    std::vector<std::string> folded_texts;
    folded_texts.reserve(texts.size());
    for (const auto& text : texts) {
        for (auto& token : tokenize(text)) tokens.insert(std::move(token));
        folded_texts.push_back(to_lower(text));
    }
    std::set<std::string> matched;
    for (const auto& keyword : keywords) {
        std::string folded = to_lower(keyword);
        bool hit;
        if (is_plain_ascii_word(folded)) {
            hit = tokens.contains(folded);
        } else {
            hit = std::any_of(folded_texts.begin(), folded_texts.end(),
                              [&](const std::string& text) {
                                  return text.find(folded) != std::string::npos;
                              });
        }
        if (hit) matched.insert(keyword);
    }
    return {matched.begin(), matched.end()};
}

}  // namespace

std::vector<std::string> default_close_words() {
    static const std::vector<std::string> words =
        keyword_list_from_text(defaults::close_keywords());
    return words;
}

std::vector<std::string> default_gambling_words() {
    static const std::vector<std::string> words =
        keyword_list_from_text(defaults::gambling_keywords());
    return words;
}

Verdict detect_close_keywords(const std::vector<std::string>& texts,
                              const std::vector<std::string>& close_words) {
    auto matched = match_keywords(texts, close_words);
    Verdict verdict;
    verdict.group = DeviousGroup::ClickDeceptive;
    verdict.devious = !matched.empty();
    verdict.evidence = json{{"matched", matched}};
    return verdict;
}

Verdict detect_gambling(const std::vector<std::string>& texts,
                        const std::vector<std::string>& keywords) {
    if (keywords.empty()) throw ConfigError("gambling keyword list is empty");
    auto matched = match_keywords(texts, keywords);
    Verdict verdict;
    verdict.group = DeviousGroup::CensoredGambling;
    verdict.devious = !matched.empty();
    verdict.evidence = json{{"matched", matched}};
    return verdict;
}

std::vector<Verdict> judge_censored(const clients::VisionResult& likelihoods) {
    const std::pair<const char*, int> values[] = {
        {"porn", likelihoods.porn}, {"violence", likelihoods.violence},
        {"medical", likelihoods.medical}};
    for (const auto& [name, value] : values) {
        if (value < 1 || value > 5)
            throw InputError(std::string("likelihood for ") + name + " outside 1..5");
    }
    json raw{{"porn", likelihoods.porn},
             {"violence", likelihoods.violence},
             {"medical", likelihoods.medical}};
    std::vector<Verdict> verdicts;
    for (const auto& [name, value] : values) {
        if (value < 4) continue;
        Verdict v;
        v.devious = true;
        v.group = std::string_view(name) == "porn"       ? DeviousGroup::CensoredPorn
                  : std::string_view(name) == "violence" ? DeviousGroup::CensoredViolence
                                                         : DeviousGroup::CensoredMedical;
        v.evidence = json{{"category", name}, {"likelihoods", raw}};
        verdicts.push_back(std::move(v));
    }
    return verdicts;
}

Verdict judge_malicious(const clients::ScanResult& scan, ArtifactKind kind) {
    Verdict verdict;
    switch (kind) {
        case ArtifactKind::Script: verdict.group = DeviousGroup::MaliciousScript; break;
        case ArtifactKind::DownloadedApp: verdict.group = DeviousGroup::MaliciousApp; break;
        default: verdict.group = DeviousGroup::MaliciousLink; break;
    }
    int positives = scan.positives();
    verdict.devious = positives >= 3;
    verdict.evidence = json{{"positives", positives},
                            {"total_engines", scan.engines.size()},
                            {"engines", scan.positive_engines()}};
    return verdict;
}

namespace {

class CrossDetectorPlugin : public Detector {
public:
    std::string_view name() const override { return "cross"; }
    bool applies_to(ArtifactKind kind) const override { return kind == ArtifactKind::Image; }
    std::vector<Verdict> run(const AdArtifact& artifact, DetectorContext& context) override {
        Raster image = decode_image(artifact.payload);
        auto boxes = detect_cross(image, context.cross_templates, context.grid);
        if (boxes.empty()) return {};
        json box_list = json::array();
        for (const auto& b : boxes)
            box_list.push_back(json{
                {"x", b.x}, {"y", b.y}, {"w", b.w}, {"h", b.h}, {"conf", b.confidence}});
        Verdict verdict;
        verdict.devious = true;
        verdict.group = DeviousGroup::ClickDeceptive;
        verdict.evidence = json{{"boxes", box_list}};
        return {verdict};
    }
};

class CloseTextPlugin : public Detector {
public:
    std::string_view name() const override { return "close-text"; }
    bool applies_to(ArtifactKind kind) const override { return kind == ArtifactKind::Image; }
    std::vector<Verdict> run(const AdArtifact& artifact, DetectorContext& context) override {
        if (!context.ocr) throw ConfigError("close-text detector needs an OCR client");
        auto ocr = context.ocr->extract_text(artifact.payload);
        Verdict verdict = detect_close_keywords(ocr.texts(), context.close_words);
        if (!verdict.devious) return {};
        return {verdict};
    }
};

class GamblingPlugin : public Detector {
public:
    std::string_view name() const override { return "gambling"; }
    bool applies_to(ArtifactKind kind) const override { return kind == ArtifactKind::Image; }
    std::vector<Verdict> run(const AdArtifact& artifact, DetectorContext& context) override {
        if (!context.ocr) throw ConfigError("gambling detector needs an OCR client");
        auto ocr = context.ocr->extract_text(artifact.payload);
        Verdict verdict = detect_gambling(ocr.texts(), context.gambling_words);
        if (!verdict.devious) return {};
        return {verdict};
    }
};

class CensoredPlugin : public Detector {
public:
    std::string_view name() const override { return "censored"; }
    bool applies_to(ArtifactKind kind) const override { return kind == ArtifactKind::Image; }
    std::vector<Verdict> run(const AdArtifact& artifact, DetectorContext& context) override {
        if (!context.vision) throw ConfigError("censored detector needs a vision client");
        auto likelihoods = context.vision->classify(artifact.payload);
        return judge_censored(likelihoods);
    }
};

class MaliciousPlugin : public Detector {
public:
    std::string_view name() const override { return "malicious"; }
    bool applies_to(ArtifactKind kind) const override {
        return kind == ArtifactKind::Script || kind == ArtifactKind::RedirectChain ||
               kind == ArtifactKind::DownloadedApp;
    }
    std::vector<Verdict> run(const AdArtifact& artifact, DetectorContext& context) override {
        if (!context.scanner) throw ConfigError("malicious detector needs a scanner client");
        auto content = extract::artifact_content(artifact);
        auto scan = context.scanner->scan(content);
        Verdict verdict = judge_malicious(scan, artifact.kind);
        if (!verdict.devious) return {};
        return {verdict};
    }
};

}  // namespace

Registry default_registry(const std::vector<std::string>& enabled) {
    Registry registry;
    auto want = [&](std::string_view name) {
        return enabled.empty() ||
               std::find(enabled.begin(), enabled.end(), std::string(name)) != enabled.end();
    };
    if (want("cross")) registry.push_back(std::make_unique<CrossDetectorPlugin>());
    if (want("close-text")) registry.push_back(std::make_unique<CloseTextPlugin>());
    if (want("gambling")) registry.push_back(std::make_unique<GamblingPlugin>());
    if (want("censored")) registry.push_back(std::make_unique<CensoredPlugin>());
    if (want("malicious")) registry.push_back(std::make_unique<MaliciousPlugin>());
    return registry;
}

bool DetectionRun::any_errors() const {
    return std::any_of(findings.begin(), findings.end(),
                       [](const ArtifactFindings& f) { return !f.errors.empty(); });
}

DetectionRun run_detectors(const std::vector<AdArtifact>& artifacts, const Registry& registry,
                           DetectorContext& context) {
    if (registry.empty()) throw ConfigError("detector registry is empty");
    DetectionRun run;
    for (std::size_t i = 0; i < artifacts.size(); ++i) {
        ArtifactFindings findings;
        findings.artifact_index = i;
        for (const auto& detector : registry) {
            if (!detector->applies_to(artifacts[i].kind)) continue;
            try {
                auto verdicts = detector->run(artifacts[i], context);
                findings.verdicts.insert(findings.verdicts.end(),
                                         std::make_move_iterator(verdicts.begin()),
                                         std::make_move_iterator(verdicts.end()));
            } catch (const std::exception& e) {
                findings.errors.push_back({std::string(detector->name()), e.what()});
            }
        }
        run.findings.push_back(std::move(findings));
    }
    return run;
}

Raster draw_cross_symbol(int side, std::uint8_t foreground, std::uint8_t background) {
    if (side < 3) throw InputError("cross symbol side must be at least 3");
    Raster symbol = Raster::make(side, side, 4, background);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) symbol.at(x, y, 3) = 255;

    int border = std::max(1, side / 12);
    std::uint8_t border_color = static_cast<std::uint8_t>(background / 2 + foreground / 2);
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            bool edge = x < border || y < border || x >= side - border || y >= side - border;
            if (edge)
                for (int c = 0; c < 3; ++c) symbol.at(x, y, c) = border_color;
        }
    }

    int thickness = std::max(1, side / 8);
    int margin = std::max(border + 1, side / 5);
    for (int y = margin; y < side - margin; ++y) {
        for (int x = margin; x < side - margin; ++x) {
            int d1 = std::abs(x - y);
            int d2 = std::abs(x + y - (side - 1));
            if (d1 < thickness || d2 < thickness)
                for (int c = 0; c < 3; ++c) symbol.at(x, y, c) = foreground;
        }
    }
    return symbol;
}

std::vector<Raster> builtin_cross_templates(int min_side, int max_side, int step) {
    std::vector<Raster> templates;
    for (int side = min_side; side <= max_side; side += std::max(1, step))
        templates.push_back(draw_cross_symbol(side));
    return templates;
}

}  // namespace madroid::detect
