#include "madroid/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "madroid/errors.hpp"
#include "madroid/util.hpp"

namespace madroid::report {

using nlohmann::json;

double percent_of(long count, long total) {
    if (total <= 0) return 0.0;
    double raw = static_cast<double>(count) * 100.0 / static_cast<double>(total);
    return std::floor(raw * 10.0 + 0.5) / 10.0;
}

namespace {

json counters_json(const std::map<std::string, TypeCounter>& per_type) {
    json obj = json::object();
    for (const auto& [kind, counter] : per_type)
        obj[kind] = json{{"total", counter.total}, {"devious", counter.devious}};
    return obj;
}

json tally_json(const std::map<std::string, long>& tally) {
    json obj = json::object();
    for (const auto& [key, count] : tally) obj[key] = count;
    return obj;
}

json verdict_json(const detect::Verdict& verdict) {
    return json{{"devious", verdict.devious},
                {"group", std::string(detect::devious_group_name(verdict.group))},
                {"evidence", verdict.evidence}};
}

std::string now_iso8601() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buffer[32];
    std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buffer;
}

}  // namespace

json DeviousnessReport::body_json() const {
    json body;
    body["app_id"] = app_id;
    body["mapping"] = json{{"lib_count", mapping.lib_count},
                           {"host_count", mapping.host_count},
                           {"iterations", mapping.iterations},
                           {"converged", mapping.converged}};
    body["messages"] = json{{"total", messages.total},
                            {"ad_load", messages.ad_load},
                            {"ad_click", messages.ad_click},
                            {"non_ad", messages.non_ad}};
    body["artifact_counters"] = counters_json(per_type);
    json artifact_list = json::array();
    for (const auto& record : artifacts) {
        json entry;
        entry["hash"] = record.artifact_hash;
        entry["kind"] = record.kind;
        entry["host"] = record.host;
        json verdicts = json::array();
        for (const auto& v : record.verdicts) verdicts.push_back(verdict_json(v));
        entry["verdicts"] = verdicts;
        json errors = json::array();
        for (const auto& e : record.errors)
            errors.push_back(json{{"detector", e.detector}, {"message", e.message}});
        entry["errors"] = errors;
        artifact_list.push_back(entry);
    }
    body["artifacts"] = artifact_list;
    json host_tallies = json::object();
    for (const auto& [host, groups] : devious_by_host) host_tallies[host] = tally_json(groups);
    body["devious_by_host"] = host_tallies;
    body["landing_origins"] = tally_json(landing_origins);
    body["download_origins"] = tally_json(download_origins);
    body["chain_count"] = chain_count;
    body["detector_errors"] = detector_errors;
    return body;
}

json DeviousnessReport::to_json() const {
    json doc;
    doc["header"] = json{{"generated_at", now_iso8601()}, {"tool", "madroid"}, {"version", "0.1.0"}};
    doc["body"] = body_json();
    return doc;
}

namespace {

struct PipelineState {
    model::CaptureLog capture;
    model::BlobStore blobs;
    model::HookLog hooks;
    std::vector<model::ViewTree> trees;
    hookmap::PkgDomainMapping mapping;
    extract::LabelMap labels;
    std::vector<extract::AdArtifact> artifacts;
    std::vector<extract::RedirectChain> chains;
};

template <typename Fn>
auto stage(const char* name, Fn&& fn) {
    try {
        return fn();
    } catch (const PipelineError&) {
        throw;
    } catch (const std::exception& e) {
        throw PipelineError(name, e.what());
    }
}

std::string chain_origin_host(const extract::RedirectChain& chain, const PublicSuffixList& psl) {
    if (chain.hops.empty()) return "";
    auto url = parse_url(chain.hops.front().url);
    return url && !url->host.empty() ? psl.registrable_domain(url->host) : "";
}

std::string hop_domain(const std::string& url_text, const PublicSuffixList& psl) {
    auto url = parse_url(url_text);
    if (!url || url->host.empty()) return url ? url->scheme : "";
    return psl.registrable_domain(url->host);
}

}  // namespace

DeviousnessReport run_pipeline(const std::filesystem::path& capture_path,
                               const std::filesystem::path& hook_path,
                               const std::vector<std::filesystem::path>& view_tree_paths,
                               const hookmap::SeedConfig& seeds, const PipelineConfig& config,
                               const clients::ClientBundle& bundle) {
    PipelineState state;
    const PublicSuffixList psl = config.suffix_rules
                                     ? PublicSuffixList::from_file(*config.suffix_rules)
                                     : PublicSuffixList::bundled();

    stage("parse-capture", [&] {
        state.capture = model::parse_capture_file(capture_path);
        state.blobs = model::BlobStore(capture_path.parent_path());
        return 0;
    });
    stage("parse-hooks", [&] {
        state.hooks = model::parse_hook_log_file(hook_path);
        return 0;
    });
    stage("parse-view-trees", [&] {
        for (const auto& path : view_tree_paths)
            state.trees.push_back(model::parse_view_tree_file(path));
        return 0;
    });
    stage("build-mapping", [&] {
        state.mapping = hookmap::build_mapping(state.hooks.records, seeds, psl);
        return 0;
    });

    // First labeling pass has no chain knowledge; bindings harvested from
    // ad-load responses seed the chain reconstruction, whose member messages
    // are then relabeled as ad-click.
    stage("classify", [&] {
        for (const auto& msg : state.capture.messages)
            state.labels.emplace(msg.id, hookmap::classify_message(msg, state.mapping, {}, psl));
        return 0;
    });

    stage("extract", [&] {
        std::vector<std::string> bindings;
        std::set<std::string> seen_binding;
        for (const auto& msg : state.capture.messages) {
            auto it = state.labels.find(msg.id);
            if (it == state.labels.end() ||
                it->second.label != hookmap::TrafficLabel::Kind::AdLoad)
                continue;
            for (auto& url : extract::extract_click_bindings(msg, config.extract, state.blobs))
                if (seen_binding.insert(url).second) bindings.push_back(std::move(url));
        }
        std::set<std::string> chain_ids;
        for (const auto& click_url : bindings) {
            extract::RedirectChain chain;
            try {
                chain = extract::reconstruct_redirect_chain(state.capture, click_url,
                                                            config.extract.window_ms, state.blobs);
            } catch (const NotFoundError&) {
                continue;  // binding was never followed in this capture
            }
            for (const auto& hop : chain.hops) chain_ids.insert(hop.message_id);
            state.chains.push_back(std::move(chain));
        }
        for (const auto& msg : state.capture.messages)
            state.labels[msg.id] = hookmap::classify_message(msg, state.mapping, chain_ids, psl);

        auto loads = extract::extract_load_artifacts(state.capture, state.labels, psl, state.blobs);
        state.artifacts = std::move(loads.artifacts);

        for (const auto& chain : state.chains) {
            extract::AdArtifact chain_artifact;
            chain_artifact.kind = extract::ArtifactKind::RedirectChain;
            for (const auto& hop : chain.hops) {
                chain_artifact.source_message_ids.push_back(hop.message_id);
                chain_artifact.urls.push_back(hop.url);
            }
            chain_artifact.host = chain_origin_host(chain, psl);
            state.artifacts.push_back(std::move(chain_artifact));

            if (chain.outcome == extract::OutcomeKind::ApkDownload) {
                for (const auto& hop : chain.hops) {
                    const model::HttpMessage* msg = state.capture.find(hop.message_id);
                    if (!msg) continue;
                    auto body = state.blobs.resolve(msg->body);
                    if (body && extract::is_apk(*body)) {
                        extract::AdArtifact app;
                        app.kind = extract::ArtifactKind::DownloadedApp;
                        app.source_message_ids = {hop.message_id};
                        app.payload = std::move(*body);
                        app.host = hop_domain(hop.url, psl);
                        state.artifacts.push_back(std::move(app));
                        break;
                    }
                }
            } else if (chain.outcome == extract::OutcomeKind::StoreDeepLink) {
                for (const auto& hop : chain.hops) {
                    auto url = parse_url(hop.url);
                    if (url && (url->scheme == "market" || url->host == "play.google.com")) {
                        extract::AdArtifact link;
                        link.kind = extract::ArtifactKind::StoreDeepLink;
                        link.source_message_ids = {hop.message_id};
                        link.urls = {hop.url};
                        link.host = url->host.empty() ? url->scheme : url->host;
                        state.artifacts.push_back(std::move(link));
                        break;
                    }
                }
            }
        }
        return 0;
    });

    DeviousnessReport result;
    result.app_id = config.app_id.empty() ? state.capture.app_id : config.app_id;
    result.mapping = {state.mapping.ad_libs.size(), state.mapping.ad_hosts.size(),
                      state.mapping.iterations, state.mapping.converged};
    result.chain_count = state.chains.size();
    result.messages.total = state.capture.messages.size();
    for (const auto& [_, label] : state.labels) {
        switch (label.label) {
            case hookmap::TrafficLabel::Kind::AdLoad: ++result.messages.ad_load; break;
            case hookmap::TrafficLabel::Kind::AdClick: ++result.messages.ad_click; break;
            case hookmap::TrafficLabel::Kind::NonAd: ++result.messages.non_ad; break;
        }
    }

    detect::DetectionRun detection;
    stage("detect", [&] {
        detect::DetectorContext context;
        context.vision = bundle.vision.get();
        context.ocr = bundle.ocr.get();
        context.scanner = bundle.scanner.get();
        context.cross_templates =
            config.cross_templates.empty() ? detect::builtin_cross_templates()
                                           : config.cross_templates;
        context.grid = config.grid;
        if (!config.close_words.empty()) context.close_words = config.close_words;
        if (!config.gambling_words.empty()) context.gambling_words = config.gambling_words;
        auto registry = detect::default_registry(config.enabled_detectors);
        detection = detect::run_detectors(state.artifacts, registry, context);
        return 0;
    });

    stage("tally", [&] {
        std::optional<extract::ArtifactStore> store;
        if (config.out_dir) store.emplace(*config.out_dir / "artifacts");

        for (std::size_t i = 0; i < state.artifacts.size(); ++i) {
            const auto& artifact = state.artifacts[i];
            const auto& findings = detection.findings[i];
            VerdictRecord record;
            record.kind = std::string(extract::artifact_kind_name(artifact.kind));
            record.host = artifact.host;
            record.artifact_hash = store ? store->put(artifact)
                                         : sha256_hex(extract::artifact_content(artifact));
            record.verdicts = findings.verdicts;
            record.errors = findings.errors;
            result.detector_errors += findings.errors.size();

            auto& counter = result.per_type[record.kind];
            ++counter.total;
            bool devious = std::any_of(record.verdicts.begin(), record.verdicts.end(),
                                       [](const detect::Verdict& v) { return v.devious; });
            if (devious) {
                ++counter.devious;
                for (const auto& v : record.verdicts) {
                    if (!v.devious) continue;
                    ++result.devious_by_host[artifact.host]
                         [std::string(detect::devious_group_name(v.group))];
                }
            }
            result.artifacts.push_back(std::move(record));
        }

        for (const auto& chain : state.chains) {
            if (chain.hops.empty()) continue;
            if (chain.outcome == extract::OutcomeKind::LandingPage) {
                ++result.landing_origins[hop_domain(chain.hops.back().url, psl)];
            } else if (chain.outcome == extract::OutcomeKind::ApkDownload) {
                for (const auto& hop : chain.hops) {
                    const model::HttpMessage* msg = state.capture.find(hop.message_id);
                    if (!msg) continue;
                    auto body = state.blobs.resolve(msg->body);
                    if (body && extract::is_apk(*body)) {
                        ++result.download_origins[hop_domain(hop.url, psl)];
                        break;
                    }
                }
            }
        }

        if (store) store->write_index();
        if (config.out_dir) {
            std::ofstream out(*config.out_dir / "report.json", std::ios::binary);
            out << result.to_json().dump(2) << '\n';
            if (!state.trees.empty()) {
                auto graph = explore::graph_from_trees(state.trees, config.screen);
                auto plan = explore::plan_exploration(graph, config.screen, config.plan);
                std::ofstream plan_out(*config.out_dir / "plan.json", std::ios::binary);
                plan_out << plan.to_json_text() << '\n';
            }
        }
        return 0;
    });

    return result;
}

CorpusSummary aggregate(std::span<const DeviousnessReport> reports) {
    CorpusSummary summary;
    for (const auto& report : reports) {
        ++summary.apps;
        for (const auto& [kind, counter] : report.per_type) {
            summary.per_type[kind].total += counter.total;
            summary.per_type[kind].devious += counter.devious;
        }
        for (const auto& [host, groups] : report.devious_by_host)
            for (const auto& [group, count] : groups)
                summary.devious_by_host[host][group] += count;
        for (const auto& [domain, count] : report.landing_origins)
            summary.landing_origins[domain] += count;
        for (const auto& [domain, count] : report.download_origins)
            summary.download_origins[domain] += count;
        summary.detector_errors += report.detector_errors;
        if (!report.mapping.converged) ++summary.non_converged;
    }
    return summary;
}

CorpusSummary merge(const CorpusSummary& a, const CorpusSummary& b) {
    CorpusSummary out = a;
    out.apps += b.apps;
    for (const auto& [kind, counter] : b.per_type) {
        out.per_type[kind].total += counter.total;
        out.per_type[kind].devious += counter.devious;
    }
    for (const auto& [host, groups] : b.devious_by_host)
        for (const auto& [group, count] : groups) out.devious_by_host[host][group] += count;
    for (const auto& [domain, count] : b.landing_origins) out.landing_origins[domain] += count;
    for (const auto& [domain, count] : b.download_origins) out.download_origins[domain] += count;
    out.detector_errors += b.detector_errors;
    out.non_converged += b.non_converged;
    return out;
}

namespace {

struct RankedRow {
    std::string key;
    long count;
    double percent;
};

std::vector<RankedRow> top_rows(const std::map<std::string, long>& tally, int top_n) {
    long total = 0;
    for (const auto& [_, count] : tally) total += count;
    std::vector<std::pair<std::string, long>> rows(tally.begin(), tally.end());
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<RankedRow> out;
    for (const auto& [key, count] : rows) {
        if (static_cast<int>(out.size()) >= top_n) break;
        out.push_back({key, count, percent_of(count, total)});
    }
    return out;
}

std::map<std::string, long> group_tally(
    const std::map<std::string, std::map<std::string, long>>& by_host, const std::string& group) {
    std::map<std::string, long> tally;
    for (const auto& [host, groups] : by_host) {
        if (auto it = groups.find(group); it != groups.end()) tally[host] = it->second;
    }
    return tally;
}

json rows_json(const std::vector<RankedRow>& rows) {
    json arr = json::array();
    for (const auto& row : rows)
        arr.push_back(json{{"key", row.key}, {"count", row.count}, {"percent", row.percent}});
    return arr;
}

const char* kGroups[] = {"click-deceptive", "censored-porn",     "censored-violence",
                         "censored-medical", "censored-gambling", "malicious-script",
                         "malicious-link",   "malicious-app"};

}  // namespace

json CorpusSummary::to_json(int top_n) const {
    json doc;
    doc["apps"] = apps;
    doc["artifact_counters"] = counters_json(per_type);
    json top_hosts = json::object();
    for (const char* group : kGroups) {
        auto tally = group_tally(devious_by_host, group);
        if (!tally.empty()) top_hosts[group] = rows_json(top_rows(tally, top_n));
    }
    doc["top_hosts_by_group"] = top_hosts;
    doc["top_landing_origins"] = rows_json(top_rows(landing_origins, top_n));
    doc["top_download_origins"] = rows_json(top_rows(download_origins, top_n));
    doc["detector_errors"] = detector_errors;
    doc["non_converged_apps"] = non_converged;
    return doc;
}

std::string CorpusSummary::render_table(int top_n) const {
    std::ostringstream out;
    out << "apps analyzed: " << apps << "\n\n";
    out << "artifact counters (total / devious):\n";
    for (const auto& [kind, counter] : per_type) {
        out << "  " << kind << ": " << counter.total << " / " << counter.devious;
        char buffer[16];
        std::snprintf(buffer, sizeof(buffer), "%.1f",
                      percent_of(counter.devious, counter.total));
        out << " (" << buffer << "%)\n";
    }
    for (const char* group : kGroups) {
        auto tally = group_tally(devious_by_host, group);
        if (tally.empty()) continue;
        out << "\ntop hosts distributing " << group << ":\n";
        for (const auto& row : top_rows(tally, top_n)) {
            char buffer[16];
            std::snprintf(buffer, sizeof(buffer), "%.1f", row.percent);
            out << "  " << row.key << "  " << row.count << "  " << buffer << "%\n";
        }
    }
    auto print_origins = [&](const char* title, const std::map<std::string, long>& tally) {
        if (tally.empty()) return;
        out << "\n" << title << ":\n";
        for (const auto& row : top_rows(tally, top_n)) {
            char buffer[16];
            std::snprintf(buffer, sizeof(buffer), "%.1f", row.percent);
            out << "  " << row.key << "  " << row.count << "  " << buffer << "%\n";
        }
    };
    print_origins("top landing-page origins", landing_origins);
    print_origins("top download origins", download_origins);
    return out.str();
}

}  // namespace madroid::report
