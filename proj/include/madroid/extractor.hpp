#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "madroid/hookmap.hpp"
#include "madroid/model.hpp"
#include "madroid/psl.hpp"

namespace madroid::extract {

enum class ArtifactKind { Image, Script, RedirectChain, DownloadedApp, StoreDeepLink };

std::string_view artifact_kind_name(ArtifactKind kind);

struct AdArtifact {
    ArtifactKind kind = ArtifactKind::Image;
    std::vector<std::string> source_message_ids;
    std::vector<std::uint8_t> payload;  // Image / Script / DownloadedApp bytes
    std::vector<std::string> urls;      // RedirectChain hops / StoreDeepLink target
    std::string host;                   // registrable domain of origin
};

struct ChainHop {
    std::string message_id;
    std::string url;
    std::optional<int> status;
    bool operator==(const ChainHop&) const = default;
};

enum class OutcomeKind { LandingPage, StoreDeepLink, ApkDownload, Unresolved };

std::string_view outcome_name(OutcomeKind kind);

struct RedirectChain {
    std::vector<ChainHop> hops;
    OutcomeKind outcome = OutcomeKind::Unresolved;
};

struct ExtractOptions {
    // Attribute names whose values are click-binding URLs, matched in markup
    // attributes and structured-body keys.
    std::vector<std::string> click_attr_names = {"clickurl", "click_url", "clk", "landing",
                                                 "curl"};
    // Substrings an absolute URL inside a script block must contain to count
    // as a click candidate.
    std::vector<std::string> script_url_patterns = {"click", "clk", "redirect", "land"};
    std::int64_t window_ms = 10'000;
};

using LabelMap = std::map<std::string, hookmap::TrafficLabel>;  // message id -> label

struct LoadExtraction {
    std::vector<AdArtifact> artifacts;
    std::size_t bodyless_skipped = 0;
    std::size_t no_content_skipped = 0;  // ad messages carrying no image/script payload
};

// Images and scripts from ad-load responses. Impression pings and other
// payload-less exchanges yield nothing.
LoadExtraction extract_load_artifacts(const model::CaptureLog& capture, const LabelMap& labels,
                                      const PublicSuffixList& psl,
                                      const model::BlobStore& blobs = {});

// Candidate click URLs bound inside an ad-load response body: anchor hrefs,
// configured attribute/key names, and pattern-matched URLs in script blocks.
// Deduplicated, document order. Binary bodies yield an empty list.
std::vector<std::string> extract_click_bindings(const model::HttpMessage& message,
                                                const ExtractOptions& options = {},
                                                const model::BlobStore& blobs = {});

// Follows recorded messages from the earliest occurrence of click_url,
// linking hops by: (a) 3xx Location match, (b) referer match, (c) same
// session within window_ms with the next URL contained in the current body.
RedirectChain reconstruct_redirect_chain(const model::CaptureLog& capture,
                                         const std::string& click_url,
                                         std::int64_t window_ms = 10'000,
                                         const model::BlobStore& blobs = {});

// ApkDownload > StoreDeepLink > LandingPage; Unresolved when the final hop
// is not a 2xx HTML response.
OutcomeKind classify_click_outcome(const RedirectChain& chain, const model::CaptureLog& capture,
                                   const model::BlobStore& blobs = {});

// True iff the body starts with the ZIP local-file magic and the central
// directory lists an AndroidManifest.xml entry.
bool is_apk(std::span<const std::uint8_t> body);

// Inner text of <script> blocks, tolerant of malformed markup.
std::vector<std::string> extract_script_blocks(std::string_view html);

// Canonical byte content of an artifact: the payload for byte-carrying
// kinds, the hop-list document for chains and deep links. Drives both the
// artifact store layout and the scan-cache content hashes.
std::vector<std::uint8_t> artifact_content(const AdArtifact& artifact);

// Content-addressed artifact files plus an index document.
class ArtifactStore {
public:
    explicit ArtifactStore(std::filesystem::path dir);

    // Writes the payload (or the hop list for chain artifacts) under its
    // content hash and records an index entry. Returns the hash.
    std::string put(const AdArtifact& artifact);
    void write_index() const;

    struct IndexEntry {
        std::string kind;
        std::string hash;
        std::vector<std::string> source_ids;
        std::string host;
    };
    const std::vector<IndexEntry>& entries() const { return entries_; }
    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path path_of(const std::string& hash) const { return dir_ / hash; }

private:
    std::filesystem::path dir_;
    std::vector<IndexEntry> entries_;
};

}  // namespace madroid::extract
