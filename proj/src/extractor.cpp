#include "madroid/extractor.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <set>

#include <json.hpp>

#include "madroid/errors.hpp"
#include "madroid/raster.hpp"
#include "madroid/util.hpp"

namespace madroid::extract {

using model::BlobStore;
using model::CaptureLog;
using model::HttpMessage;

std::string_view artifact_kind_name(ArtifactKind kind) {
    switch (kind) {
        case ArtifactKind::Image: return "image";
        case ArtifactKind::Script: return "script";
        case ArtifactKind::RedirectChain: return "redirect-chain";
        case ArtifactKind::DownloadedApp: return "downloaded-app";
        case ArtifactKind::StoreDeepLink: return "store-deep-link";
    }
    return "image";
}

std::string_view outcome_name(OutcomeKind kind) {
    switch (kind) {
        case OutcomeKind::LandingPage: return "landing-page";
        case OutcomeKind::StoreDeepLink: return "store-deep-link";
        case OutcomeKind::ApkDownload: return "apk-download";
        case OutcomeKind::Unresolved: return "unresolved";
    }
    return "unresolved";
}

namespace {

bool looks_textual(std::span<const std::uint8_t> bytes) {
    std::size_t probe = std::min<std::size_t>(bytes.size(), 512);
    for (std::size_t i = 0; i < probe; ++i)
        if (bytes[i] == 0) return false;
    return true;
}

bool mime_contains(const std::optional<std::string>& mime, std::string_view needle) {
    return mime && contains_ci(*mime, needle);
}

bool looks_like_html(std::string_view text) {
    size_t i = text.find_first_not_of(" \t\r\n");
    return i != std::string_view::npos && text[i] == '<';
}

}  // namespace

std::vector<std::string> extract_script_blocks(std::string_view html) {
    std::vector<std::string> blocks;
    size_t pos = 0;
    while (pos < html.size()) {
        size_t open = std::string_view::npos;
        for (size_t i = pos; i + 7 <= html.size(); ++i) {
            if (html[i] == '<' && starts_with_ci(html.substr(i), "<script")) {
                char next = i + 7 < html.size() ? html[i + 7] : '>';
                if (next == '>' || next == ' ' || next == '\t' || next == '\n' || next == '\r' ||
                    next == '/') {
                    open = i;
                    break;
                }
            }
        }
        if (open == std::string_view::npos) break;
        size_t tag_end = html.find('>', open);
        if (tag_end == std::string_view::npos) break;
        size_t content_start = tag_end + 1;
        size_t close = std::string_view::npos;
        for (size_t i = content_start; i + 9 <= html.size(); ++i) {
            if (html[i] == '<' && starts_with_ci(html.substr(i), "</script")) {
                close = i;
                break;
            }
        }
        // tolerate a missing close tag: take the rest of the document
        size_t content_end = close == std::string_view::npos ? html.size() : close;
        std::string content = trim(html.substr(content_start, content_end - content_start));
        if (!content.empty()) blocks.push_back(std::move(content));
        if (close == std::string_view::npos) break;
        pos = close + 9;
    }
    return blocks;
}

LoadExtraction extract_load_artifacts(const CaptureLog& capture, const LabelMap& labels,
                                      const PublicSuffixList& psl, const BlobStore& blobs) {
    LoadExtraction result;
    for (const auto& msg : capture.messages) {
        auto it = labels.find(msg.id);
        if (it == labels.end() || it->second.label != hookmap::TrafficLabel::Kind::AdLoad)
            continue;
        auto body = blobs.resolve(msg.body);
        if (!body || body->empty()) {
            ++result.bodyless_skipped;
            continue;
        }
        std::string host = registrable_domain(msg.url, psl);

        if (mime_contains(msg.mime, "image/") || sniff_image(*body)) {
            AdArtifact artifact;
            artifact.kind = ArtifactKind::Image;
            artifact.source_message_ids = {msg.id};
            artifact.payload = *body;
            artifact.host = host;
            result.artifacts.push_back(std::move(artifact));
            continue;
        }

        std::string_view text(reinterpret_cast<const char*>(body->data()), body->size());
        if (mime_contains(msg.mime, "javascript") || mime_contains(msg.mime, "ecmascript")) {
            AdArtifact artifact;
            artifact.kind = ArtifactKind::Script;
            artifact.source_message_ids = {msg.id};
            artifact.payload = *body;
            artifact.host = host;
            result.artifacts.push_back(std::move(artifact));
            continue;
        }
        if (mime_contains(msg.mime, "html") || (looks_textual(*body) && looks_like_html(text))) {
            bool emitted = false;
            for (auto& block : extract_script_blocks(text)) {
                AdArtifact artifact;
                artifact.kind = ArtifactKind::Script;
                artifact.source_message_ids = {msg.id};
                artifact.payload.assign(block.begin(), block.end());
                artifact.host = host;
                result.artifacts.push_back(std::move(artifact));
                emitted = true;
            }
            if (emitted) continue;
        }
        ++result.no_content_skipped;  // metadata / impression-style exchange
    }
    return result;
}

namespace {

struct Candidate {
    size_t position;
    std::string url;
};

bool acceptable_click_url(std::string_view text) {
    auto url = parse_url(text);
    if (!url) return false;
    if (url->is_http()) return !url->host.empty();
    return url->scheme == "market" || url->scheme == "intent";
}

std::string decode_entities(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '&') {
            if (text.substr(i, 5) == "&amp;") {
                out += '&';
                i += 5;
                continue;
            }
            if (text.substr(i, 6) == "&quot;") {
                out += '"';
                i += 6;
                continue;
            }
            if (text.substr(i, 5) == "&#39;") {
                out += '\'';
                i += 5;
                continue;
            }
            if (text.substr(i, 4) == "&lt;") {
                out += '<';
                i += 4;
                continue;
            }
            if (text.substr(i, 4) == "&gt;") {
                out += '>';
                i += 4;
                continue;
            }
        }
        out += text[i++];
    }
    return out;
}

// Attribute value starting right after `name=` at `pos`; handles quoted and
// bare values.
std::optional<std::string> read_attr_value(std::string_view text, size_t pos) {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    if (pos >= text.size()) return std::nullopt;
    if (text[pos] == '"' || text[pos] == '\'') {
        char quote = text[pos++];
        size_t end = text.find(quote, pos);
        if (end == std::string_view::npos) return std::nullopt;
        return std::string(text.substr(pos, end - pos));
    }
    size_t end = pos;
    while (end < text.size() && !std::strchr(" \t\r\n>", text[end])) ++end;
    if (end == pos) return std::nullopt;
    return std::string(text.substr(pos, end - pos));
}

// All name=value attribute matches for `name` in markup, case-insensitive,
// requiring a non-identifier character before the name.
void scan_attributes(std::string_view text, std::string_view name,
                     std::vector<Candidate>& candidates) {
    for (size_t i = 0; i + name.size() < text.size(); ++i) {
        if (!starts_with_ci(text.substr(i), name)) continue;
        if (i > 0 && (std::isalnum(static_cast<unsigned char>(text[i - 1])) || text[i - 1] == '_'))
            continue;
        size_t after = i + name.size();
        while (after < text.size() && (text[after] == ' ' || text[after] == '\t')) ++after;
        if (after >= text.size() || text[after] != '=') continue;
        if (auto value = read_attr_value(text, after + 1)) {
            std::string decoded = decode_entities(*value);
            if (acceptable_click_url(decoded)) candidates.push_back({i, std::move(decoded)});
        }
    }
}

void scan_json_value(const nlohmann::ordered_json& value,
                     const std::vector<std::string>& attr_names, size_t& order,
                     std::vector<Candidate>& candidates) {
    if (value.is_object()) {
        for (const auto& [key, child] : value.items()) {
            ++order;
            bool wanted = std::any_of(attr_names.begin(), attr_names.end(),
                                      [&](const std::string& name) {
                                          return key.size() == name.size() &&
                                                 starts_with_ci(key, name);
                                      });
            if (wanted && child.is_string()) {
                std::string url = child.get<std::string>();
                if (acceptable_click_url(url)) candidates.push_back({order, std::move(url)});
            }
            scan_json_value(child, attr_names, order, candidates);
        }
    } else if (value.is_array()) {
        for (const auto& child : value) {
            ++order;
            scan_json_value(child, attr_names, order, candidates);
        }
    }
}

void scan_script_urls(std::string_view html, const std::vector<std::string>& patterns,
                      std::vector<Candidate>& candidates) {
    size_t base = 0;
    for (const auto& block : extract_script_blocks(html)) {
        size_t block_pos = html.find(block, base);
        if (block_pos == std::string_view::npos) block_pos = base;
        std::string_view text = block;
        for (size_t i = 0; i + 7 < text.size(); ++i) {
            if (!starts_with_ci(text.substr(i), "http://") &&
                !starts_with_ci(text.substr(i), "https://"))
                continue;
            size_t end = i;
            while (end < text.size() && !std::strchr(" \t\r\n\"'<>()\\", text[end])) ++end;
            std::string url(text.substr(i, end - i));
            while (!url.empty() && (url.back() == ';' || url.back() == ',' || url.back() == '.'))
                url.pop_back();
            bool matches = std::any_of(patterns.begin(), patterns.end(),
                                       [&](const std::string& p) { return contains_ci(url, p); });
            if (matches && acceptable_click_url(url))
                candidates.push_back({block_pos + i, std::move(url)});
            i = end;
        }
        base = block_pos + block.size();
    }
}

}  // namespace

std::vector<std::string> extract_click_bindings(const HttpMessage& message,
                                                const ExtractOptions& options,
                                                const BlobStore& blobs) {
    std::vector<std::string> result;
    auto bytes_opt = blobs.resolve(message.body);
    if (!bytes_opt) return result;
    const auto& bytes = *bytes_opt;
    if (bytes.empty() || !looks_textual(bytes)) return result;
    std::string_view text(reinterpret_cast<const char*>(bytes.data()), bytes.size());

    std::vector<Candidate> candidates;

    // Structured bodies: walk keys in document order.
    std::string trimmed = trim(text);
    if (!trimmed.empty() && (trimmed.front() == '{' || trimmed.front() == '[')) {
        auto doc = nlohmann::ordered_json::parse(trimmed, nullptr, false);
        if (!doc.is_discarded()) {
            size_t order = 0;
            scan_json_value(doc, options.click_attr_names, order, candidates);
        }
    }

    // Markup: anchor hrefs, configured attribute names, script-block URLs.
    for (size_t i = 0; i + 2 < text.size(); ++i) {
        if (text[i] != '<') continue;
        if (!starts_with_ci(text.substr(i), "<a")) continue;
        char next = text[i + 2];
        if (next != ' ' && next != '\t' && next != '\n' && next != '\r') continue;
        size_t tag_end = text.find('>', i);
        std::string_view tag =
            text.substr(i, tag_end == std::string_view::npos ? text.size() - i : tag_end - i);
        std::vector<Candidate> hrefs;
        scan_attributes(tag, "href", hrefs);
        for (auto& h : hrefs) candidates.push_back({i + h.position, std::move(h.url)});
    }
    for (const auto& name : options.click_attr_names) scan_attributes(text, name, candidates);
    scan_script_urls(text, options.script_url_patterns, candidates);

    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.position < b.position; });
    std::set<std::string> seen;
    for (auto& c : candidates)
        if (seen.insert(c.url).second) result.push_back(std::move(c.url));
    return result;
}

namespace {

bool body_contains(const std::vector<std::uint8_t>& body, std::string_view needle) {
    if (needle.empty() || body.size() < needle.size()) return false;
    std::string_view text(reinterpret_cast<const char*>(body.data()), body.size());
    return text.find(needle) != std::string_view::npos;
}

}  // namespace

RedirectChain reconstruct_redirect_chain(const CaptureLog& capture, const std::string& click_url,
                                         std::int64_t window_ms, const BlobStore& blobs) {
    const auto& messages = capture.messages;  // sorted by (ts, id)
    auto start = std::find_if(messages.begin(), messages.end(),
                              [&](const HttpMessage& m) { return m.url == click_url; });
    if (start == messages.end())
        throw NotFoundError("click URL not present in capture: " + click_url);

    RedirectChain chain;
    std::set<std::string> used;
    auto current = start;
    chain.hops.push_back({current->id, current->url, current->status});
    used.insert(current->id);

    for (;;) {
        auto after = current + 1;
        const HttpMessage* next = nullptr;

        // (a) Location header of a redirect response
        if (current->status && *current->status >= 300 && *current->status < 400) {
            if (auto location = current->response_header("Location")) {
                auto target = resolve_reference(current->url, *location);
                if (target) {
                    for (auto it = after; it != messages.end(); ++it) {
                        if (it->url == *target) {
                            next = &*it;
                            break;
                        }
                    }
                }
            }
        }
        // (b) referer linkage
        if (!next) {
            for (auto it = after; it != messages.end(); ++it) {
                if (it->referer && *it->referer == current->url) {
                    next = &*it;
                    break;
                }
            }
        }
        // (c) same session, inside the window, URL present in the body
        if (!next) {
            if (auto body = blobs.resolve(current->body); body && looks_textual(*body)) {
                for (auto it = after; it != messages.end(); ++it) {
                    if (it->ts_ms - current->ts_ms > window_ms) break;
                    if (it->session_id == current->session_id && body_contains(*body, it->url)) {
                        next = &*it;
                        break;
                    }
                }
            }
        }
        if (!next || used.contains(next->id)) break;
        chain.hops.push_back({next->id, next->url, next->status});
        used.insert(next->id);
        current = messages.begin() + (next - messages.data());
    }

    chain.outcome = classify_click_outcome(chain, capture, blobs);
    return chain;
}

OutcomeKind classify_click_outcome(const RedirectChain& chain, const CaptureLog& capture,
                                   const BlobStore& blobs) {
    if (chain.hops.empty()) return OutcomeKind::Unresolved;
    for (const auto& hop : chain.hops) {
        const HttpMessage* msg = capture.find(hop.message_id);
        if (!msg) continue;
        if (auto body = blobs.resolve(msg->body); body && is_apk(*body))
            return OutcomeKind::ApkDownload;
    }
    for (const auto& hop : chain.hops) {
        auto url = parse_url(hop.url);
        if (url && (url->scheme == "market" || url->host == "play.google.com"))
            return OutcomeKind::StoreDeepLink;
    }
    const ChainHop& last = chain.hops.back();
    const HttpMessage* msg = capture.find(last.message_id);
    if (msg && msg->status && *msg->status >= 200 && *msg->status < 300) {
        if (mime_contains(msg->mime, "html")) return OutcomeKind::LandingPage;
        if (auto body = blobs.resolve(msg->body); body && looks_textual(*body)) {
            std::string_view text(reinterpret_cast<const char*>(body->data()), body->size());
            if (looks_like_html(text)) return OutcomeKind::LandingPage;
        }
    }
    return OutcomeKind::Unresolved;
}

namespace {

std::uint16_t read_u16le(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t read_u32le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

constexpr std::uint32_t kEocdSig = 0x06054b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;

}  // namespace

bool is_apk(std::span<const std::uint8_t> body) {
    if (body.size() < 22 + 4) return false;
    if (!(body[0] == 0x50 && body[1] == 0x4B && body[2] == 0x03 && body[3] == 0x04)) return false;

    // Scan backwards for the end-of-central-directory record; trailing junk
    // after a valid archive must not defeat the search.
    for (std::size_t pos = body.size() - 22 + 1; pos-- > 0;) {
        if (read_u32le(&body[pos]) != kEocdSig) continue;
        std::uint16_t total_entries = read_u16le(&body[pos + 10]);
        std::uint32_t cd_size = read_u32le(&body[pos + 12]);
        std::uint32_t cd_offset = read_u32le(&body[pos + 16]);
        if (static_cast<std::size_t>(cd_offset) + cd_size > pos) continue;  // implausible

        std::size_t entry = cd_offset;
        bool valid = true;
        for (std::uint16_t i = 0; i < total_entries; ++i) {
            if (entry + 46 > body.size() || read_u32le(&body[entry]) != kCentralSig) {
                valid = false;
                break;
            }
            std::uint16_t name_len = read_u16le(&body[entry + 28]);
            std::uint16_t extra_len = read_u16le(&body[entry + 30]);
            std::uint16_t comment_len = read_u16le(&body[entry + 32]);
            if (entry + 46 + name_len > body.size()) {
                valid = false;
                break;
            }
            std::string_view name(reinterpret_cast<const char*>(&body[entry + 46]), name_len);
            if (name == "AndroidManifest.xml") return true;
            entry += 46u + name_len + extra_len + comment_len;
        }
        if (valid) return false;  // well-formed archive without the entry
    }
    return false;
}

ArtifactStore::ArtifactStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::vector<std::uint8_t> artifact_content(const AdArtifact& artifact) {
    if (artifact.kind == ArtifactKind::RedirectChain ||
        artifact.kind == ArtifactKind::StoreDeepLink) {
        nlohmann::json doc;
        doc["urls"] = artifact.urls;
        std::string text = doc.dump(2);
        return {text.begin(), text.end()};
    }
    return artifact.payload;
}

std::string ArtifactStore::put(const AdArtifact& artifact) {
    std::vector<std::uint8_t> content = artifact_content(artifact);
    std::string hash = sha256_hex(content);
    std::filesystem::path path = dir_ / hash;
    if (!std::filesystem::exists(path)) {
        std::ofstream out(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(content.data()),
                  static_cast<std::streamsize>(content.size()));
    }
    entries_.push_back({std::string(artifact_kind_name(artifact.kind)), hash,
                        artifact.source_message_ids, artifact.host});
    return hash;
}

void ArtifactStore::write_index() const {
    nlohmann::json doc;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& entry : entries_) {
        nlohmann::json e;
        e["kind"] = entry.kind;
        e["hash"] = entry.hash;
        e["source_ids"] = entry.source_ids;
        e["host"] = entry.host;
        arr.push_back(e);
    }
    doc["artifacts"] = arr;
    std::ofstream out(dir_ / "index.json", std::ios::binary);
    out << doc.dump(2) << '\n';
}

}  // namespace madroid::extract
