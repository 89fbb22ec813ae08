#include "madroid/hookmap.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "madroid/errors.hpp"
#include "madroid/util.hpp"

namespace madroid::hookmap {

using nlohmann::json;

namespace {

// Visits the dot-prefixes of a package from longest to shortest
// ("a.b.c" -> "a.b.c", "a.b", "a") until the callback returns true.
template <typename Fn>
bool for_each_prefix_longest_first(std::string_view package, Fn&& fn) {
    std::string_view current = package;
    while (!current.empty()) {
        if (fn(current)) return true;
        size_t dot = current.rfind('.');
        if (dot == std::string_view::npos) break;
        current = current.substr(0, dot);
    }
    return false;
}

// Package of a fully-qualified method frame: drop the method and class
// segments. "com.startapp.sdk.Net.send" -> "com.startapp.sdk".
std::string frame_package(std::string_view frame) {
    size_t last = frame.rfind('.');
    if (last == std::string_view::npos) return "";
    size_t second = frame.rfind('.', last - 1);
    if (second == std::string_view::npos) return "";
    return std::string(frame.substr(0, second));
}

std::string truncate_segments(std::string_view package, int max_segments) {
    size_t pos = 0;
    int segments = 0;
    while (pos < package.size()) {
        size_t dot = package.find('.', pos);
        ++segments;
        if (dot == std::string_view::npos) break;
        if (segments == max_segments) return std::string(package.substr(0, dot));
        pos = dot + 1;
    }
    return std::string(package);
}

bool is_framework_frame(std::string_view frame, const AttributeOptions& options) {
    for (const auto& prefix : options.framework_prefixes)
        if (frame.substr(0, prefix.size()) == prefix) return true;
    return false;
}

}  // namespace

bool PkgDomainMapping::lib_matches(std::string_view package) const {
    return for_each_prefix_longest_first(
        package, [&](std::string_view p) { return ad_libs.contains(std::string(p)); });
}

std::set<std::string> PkgDomainMapping::lib_set() const {
    std::set<std::string> out;
    for (const auto& [lib, _] : ad_libs) out.insert(lib);
    return out;
}

std::set<std::string> PkgDomainMapping::host_set() const {
    std::set<std::string> out;
    for (const auto& [host, _] : ad_hosts) out.insert(host);
    return out;
}

std::optional<std::string> attribute_package(const model::HookRecord& record,
                                             const std::set<std::string>& known_libs,
                                             const AttributeOptions& options) {
    // First choice: innermost frame whose package matches a known lib prefix
    // (longest prefix wins for that frame).
    for (const auto& frame : record.stack) {
        if (is_framework_frame(frame, options)) continue;
        std::string package = frame_package(frame);
        if (package.empty()) continue;
        std::string matched;
        for_each_prefix_longest_first(package, [&](std::string_view p) {
            if (known_libs.contains(std::string(p))) {
                matched = p;
                return true;
            }
            return false;
        });
        if (!matched.empty()) return matched;
    }
    // Fallback: package of the innermost non-framework frame, capped at
    // three dot-segments.
    for (const auto& frame : record.stack) {
        if (is_framework_frame(frame, options)) continue;
        std::string package = frame_package(frame);
        if (package.empty()) continue;
        return truncate_segments(package, 3);
    }
    return std::nullopt;  // framework-only stack
}

PkgDomainMapping build_mapping(const std::vector<model::HookRecord>& records,
                               const SeedConfig& seeds, const PublicSuffixList& psl,
                               const AttributeOptions& options) {
    PkgDomainMapping mapping;
    for (const auto& lib : seeds.seed_libs) mapping.ad_libs.emplace(lib, kSeedIteration);
    for (const auto& host : seeds.seed_hosts)
        mapping.ad_hosts.emplace(psl.registrable_domain(host), kSeedIteration);

    // Usable records reduced to (stack, domain); attribution is re-evaluated
    // each pass because the known-lib set grows.
    struct Edge {
        const model::HookRecord* record;
        std::string domain;
    };
    std::vector<Edge> usable;
    usable.reserve(records.size());
    for (const auto& rec : records) {
        auto url = parse_url(rec.url);
        if (!url || url->host.empty()) {
            ++mapping.unattributable_records;
            continue;
        }
        if (!attribute_package(rec, {}, options)) {
            ++mapping.unattributable_records;
            continue;
        }
        usable.push_back({&rec, psl.registrable_domain(url->host)});
    }

    auto known_libs = mapping.lib_set();

    auto host_pass = [&](bool apply) {
        bool grew = false;
        for (const auto& edge : usable) {
            auto pkg = attribute_package(*edge.record, known_libs, options);
            if (!pkg || !mapping.lib_matches(*pkg)) continue;
            if (!mapping.ad_hosts.contains(edge.domain)) {
                if (!apply) return true;
                mapping.ad_hosts.emplace(edge.domain, mapping.iterations + 1);
                grew = true;
            }
        }
        return grew;
    };
    auto lib_pass = [&](bool apply) {
        bool grew = false;
        for (const auto& edge : usable) {
            if (!mapping.ad_hosts.contains(edge.domain)) continue;
            auto pkg = attribute_package(*edge.record, known_libs, options);
            if (!pkg || mapping.ad_libs.contains(*pkg)) continue;
            if (!apply) return true;
            mapping.ad_libs.emplace(*pkg, mapping.iterations + 1);
            known_libs.insert(*pkg);
            grew = true;
        }
        return grew;
    };
    auto at_fixpoint = [&] { return !host_pass(false) && !lib_pass(false); };

    for (;;) {
        if (mapping.iterations >= seeds.max_iterations) {
            mapping.converged = at_fixpoint();
            break;
        }
        bool grew_hosts = host_pass(true);
        if (grew_hosts) ++mapping.iterations;
        if (mapping.iterations >= seeds.max_iterations) {
            mapping.converged = at_fixpoint();
            break;
        }
        bool grew_libs = lib_pass(true);
        if (grew_libs) ++mapping.iterations;
        if (!grew_hosts && !grew_libs) {
            mapping.converged = true;
            break;
        }
    }

    for (const auto& edge : usable) {
        auto pkg = attribute_package(*edge.record, known_libs, options);
        if (pkg) mapping.edges.emplace(*pkg, edge.domain);
    }
    return mapping;
}

TrafficLabel classify_message(const model::HttpMessage& message, const PkgDomainMapping& mapping,
                              const std::set<std::string>& click_chain_ids,
                              const PublicSuffixList& psl) {
    TrafficLabel result;
    if (click_chain_ids.contains(message.id)) {
        result.label = TrafficLabel::Kind::AdClick;
        result.reason = "member of reconstructed click chain";
        return result;
    }
    std::string domain = registrable_domain(message.url, psl);
    if (mapping.host_matches(domain)) {
        result.label = TrafficLabel::Kind::AdLoad;
        result.reason = domain;
        return result;
    }
    result.label = TrafficLabel::Kind::NonAd;
    return result;
}

std::string_view traffic_label_name(TrafficLabel::Kind kind) {
    switch (kind) {
        case TrafficLabel::Kind::AdLoad: return "ad-load";
        case TrafficLabel::Kind::AdClick: return "ad-click";
        case TrafficLabel::Kind::NonAd: return "non-ad";
    }
    return "non-ad";
}

std::string PkgDomainMapping::to_json_text() const {
    json doc;
    auto dump_side = [](const std::map<std::string, int>& side) {
        json arr = json::array();
        for (const auto& [name, iteration] : side) {
            json entry;
            entry["name"] = name;
            entry["provenance"] = iteration == kSeedIteration ? "seed" : "propagated";
            entry["iteration"] = iteration;
            arr.push_back(entry);
        }
        return arr;
    };
    doc["ad_libs"] = dump_side(ad_libs);
    doc["ad_hosts"] = dump_side(ad_hosts);
    json edge_arr = json::array();
    for (const auto& [pkg, host] : edges) edge_arr.push_back(json::array({pkg, host}));
    doc["edges"] = edge_arr;
    doc["converged"] = converged;
    doc["iterations"] = iterations;
    doc["unattributable_records"] = unattributable_records;
    return doc.dump(2);
}

PkgDomainMapping PkgDomainMapping::from_json_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("mapping document is not valid JSON: ") + e.what());
    }
    PkgDomainMapping mapping;
    auto load_side = [](const json& arr, std::map<std::string, int>& side) {
        for (const auto& entry : arr)
            side.emplace(entry.at("name").get<std::string>(), entry.value("iteration", 0));
    };
    try {
        load_side(doc.at("ad_libs"), mapping.ad_libs);
        load_side(doc.at("ad_hosts"), mapping.ad_hosts);
        for (const auto& edge : doc.value("edges", json::array()))
            mapping.edges.emplace(edge.at(0).get<std::string>(), edge.at(1).get<std::string>());
        mapping.converged = doc.value("converged", true);
        mapping.iterations = doc.value("iterations", 0);
        mapping.unattributable_records = doc.value("unattributable_records", 0);
    } catch (const json::exception& e) {
        throw InputError(std::string("mapping schema violation: ") + e.what());
    }
    return mapping;
}

std::set<std::string> parse_seed_list(std::string_view text) {
    std::set<std::string> out;
    std::istringstream stream{std::string(text)};
    std::string line;
    while (std::getline(stream, line)) {
        std::string entry = trim(line);
        if (entry.empty() || entry.front() == '#') continue;
        out.insert(entry);
    }
    return out;
}

std::set<std::string> load_seed_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open seed file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_seed_list(buffer.str());
}

}  // namespace madroid::hookmap
