#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "madroid/model.hpp"
#include "madroid/psl.hpp"

namespace madroid::hookmap {

// Iteration 0 marks a seed element; k > 0 marks an element added during
// half-pass k of the propagation.
constexpr int kSeedIteration = 0;

struct SeedConfig {
    std::set<std::string> seed_libs;   // package prefixes
    std::set<std::string> seed_hosts;  // host labels, normalized to eTLD+1 on use
    int max_iterations = 50;
};

// The bidirectional ad-library / ad-host association grown from hook records.
struct PkgDomainMapping {
    // element -> iteration at which it was added (0 = seed)
    std::map<std::string, int> ad_libs;
    std::map<std::string, int> ad_hosts;
    // (attributed package, registrable domain) pairs observed in the records
    std::set<std::pair<std::string, std::string>> edges;
    bool converged = true;
    int iterations = 0;  // productive half-passes
    std::size_t unattributable_records = 0;

    // Dot-segment prefix membership: true when some ad_libs entry is the
    // package itself or a dot-prefix of it.
    bool lib_matches(std::string_view package) const;
    bool host_matches(std::string_view domain) const { return ad_hosts.contains(std::string(domain)); }

    std::set<std::string> lib_set() const;
    std::set<std::string> host_set() const;

    std::string to_json_text() const;
    static PkgDomainMapping from_json_text(std::string_view text);
};

struct TrafficLabel {
    enum class Kind { AdLoad, AdClick, NonAd };
    Kind label = Kind::NonAd;
    std::string reason;
};

std::string_view traffic_label_name(TrafficLabel::Kind kind);

struct AttributeOptions {
    std::vector<std::string> framework_prefixes = {"android.", "java.", "javax.", "dalvik."};
};

// Package that initiated the hooked call. Prefers the innermost frame whose
// package matches a known lib prefix (returning the matched prefix,
// longest-prefix-wins); otherwise the package of the innermost non-framework
// frame truncated to three dot-segments. Returns nullopt when the stack is
// all framework frames.
std::optional<std::string> attribute_package(const model::HookRecord& record,
                                             const std::set<std::string>& known_libs,
                                             const AttributeOptions& options = {});

// Alternating propagation to the fixpoint: a host-expansion half-pass adds
// the domains of records attributed to ad libraries, a lib-expansion
// half-pass adds the packages of records hitting ad hosts. Stops when a full
// host+lib round adds nothing, or flags non-convergence at max_iterations.
PkgDomainMapping build_mapping(const std::vector<model::HookRecord>& records,
                               const SeedConfig& seeds, const PublicSuffixList& psl,
                               const AttributeOptions& options = {});

// AdClick when the message is part of a reconstructed click chain, AdLoad
// when its registrable domain is a known ad host, NonAd otherwise.
TrafficLabel classify_message(const model::HttpMessage& message, const PkgDomainMapping& mapping,
                              const std::set<std::string>& click_chain_ids,
                              const PublicSuffixList& psl);

// Seed list format: one package prefix or host per line, '#' comments.
std::set<std::string> parse_seed_list(std::string_view text);
std::set<std::string> load_seed_file(const std::filesystem::path& path);

}  // namespace madroid::hookmap
