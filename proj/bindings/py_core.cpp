#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "madroid/clients.hpp"
#include "madroid/detectors.hpp"
#include "madroid/errors.hpp"
#include "madroid/explorer.hpp"
#include "madroid/extractor.hpp"
#include "madroid/hookmap.hpp"
#include "madroid/model.hpp"
#include "madroid/psl.hpp"
#include "madroid/report.hpp"

namespace py = pybind11;
using namespace madroid;

namespace {

py::object json_to_py(const nlohmann::json& doc) {
    return py::module_::import("json").attr("loads")(doc.dump());
}

std::vector<std::uint8_t> to_bytes(const py::bytes& data) {
    std::string view = data;
    return {view.begin(), view.end()};
}

py::bytes from_bytes(const std::vector<std::uint8_t>& data) {
    return py::bytes(reinterpret_cast<const char*>(data.data()), data.size());
}

Raster decode_raster(const py::bytes& data) {
    return decode_image(to_bytes(data));
}

detect::DetectionBox box_from_tuple(const py::tuple& t) {
    if (t.size() != 5) throw InputError("box tuples are (x, y, w, h, confidence)");
    return {t[0].cast<double>(), t[1].cast<double>(), t[2].cast<double>(), t[3].cast<double>(),
            t[4].cast<double>()};
}

py::tuple box_to_tuple(const detect::DetectionBox& b) {
    return py::make_tuple(b.x, b.y, b.w, b.h, b.confidence);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "madroid core: ad traffic classification, ad content extraction, ad-first "
              "exploration planning and deviousness detection";

    py::register_exception<Error>(m, "MadroidError", PyExc_RuntimeError);

    // ---- traffic model -----------------------------------------------------
    py::class_<model::HttpMessage>(m, "HttpMessage")
        .def_readonly("id", &model::HttpMessage::id)
        .def_readonly("session_id", &model::HttpMessage::session_id)
        .def_readonly("ts_ms", &model::HttpMessage::ts_ms)
        .def_readonly("method", &model::HttpMessage::method)
        .def_readonly("url", &model::HttpMessage::url)
        .def_readonly("status", &model::HttpMessage::status)
        .def_readonly("mime", &model::HttpMessage::mime)
        .def_readonly("referer", &model::HttpMessage::referer)
        .def("__repr__", [](const model::HttpMessage& msg) {
            return "<HttpMessage " + msg.id + " " + msg.url + ">";
        });

    py::class_<model::CaptureLog>(m, "CaptureLog")
        .def_readonly("app_id", &model::CaptureLog::app_id)
        .def_readonly("messages", &model::CaptureLog::messages)
        .def_readonly("skipped_lines", &model::CaptureLog::skipped_lines)
        .def("__len__", [](const model::CaptureLog& log) { return log.messages.size(); });

    py::class_<model::HookRecord>(m, "HookRecord")
        .def(py::init([](std::int64_t ts_ms, const std::string& url,
                         const std::vector<std::string>& stack, const std::string& thread) {
                 model::HookRecord rec;
                 rec.ts_ms = ts_ms;
                 rec.url = url;
                 rec.stack = stack;
                 rec.thread = thread;
                 return rec;
             }),
             py::arg("ts_ms"), py::arg("url"), py::arg("stack"), py::arg("thread") = "")
        .def_readonly("ts_ms", &model::HookRecord::ts_ms)
        .def_readonly("url", &model::HookRecord::url)
        .def_readonly("stack", &model::HookRecord::stack);

    m.def(
        "parse_capture",
        [](const std::string& text) {
            std::istringstream in(text);
            return model::parse_capture(in);
        },
        py::arg("text"), "Parse a line-delimited capture log from a string.");

    m.def(
        "parse_hook_log",
        [](const std::string& text) {
            std::istringstream in(text);
            return model::parse_hook_log(in).records;
        },
        py::arg("text"), "Parse a line-delimited hook log from a string.");

    // ---- public suffix / hookmap -------------------------------------------
    m.def(
        "registrable_domain",
        [](const std::string& url, const std::optional<std::string>& rules) {
            if (rules) {
                auto psl = PublicSuffixList::from_text(*rules);
                return registrable_domain(url, psl);
            }
            return registrable_domain(url, PublicSuffixList::bundled());
        },
        py::arg("url"), py::arg("rules") = py::none(),
        "eTLD+1 of an absolute URL under the bundled (or given) suffix rules.");

    m.def(
        "attribute_package",
        [](const std::vector<std::string>& stack, const std::set<std::string>& known_libs) {
            model::HookRecord rec;
            rec.ts_ms = 1;
            rec.url = "http://x.invalid/";
            rec.stack = stack;
            return hookmap::attribute_package(rec, known_libs);
        },
        py::arg("stack"), py::arg("known_libs") = std::set<std::string>{},
        "Package initiating a call with the given stack, or None if unattributable.");

    py::class_<hookmap::PkgDomainMapping>(m, "PkgDomainMapping")
        .def_property_readonly("ad_libs", &hookmap::PkgDomainMapping::lib_set)
        .def_property_readonly("ad_hosts", &hookmap::PkgDomainMapping::host_set)
        .def_readonly("iterations", &hookmap::PkgDomainMapping::iterations)
        .def_readonly("converged", &hookmap::PkgDomainMapping::converged)
        .def("to_json", [](const hookmap::PkgDomainMapping& mapping) {
            return json_to_py(nlohmann::json::parse(mapping.to_json_text()));
        });

    m.def(
        "build_mapping",
        [](const std::vector<model::HookRecord>& records, const std::set<std::string>& seed_libs,
           const std::set<std::string>& seed_hosts, int max_iterations) {
            hookmap::SeedConfig seeds;
            seeds.seed_libs = seed_libs;
            seeds.seed_hosts = seed_hosts;
            seeds.max_iterations = max_iterations;
            return hookmap::build_mapping(records, seeds, PublicSuffixList::bundled());
        },
        py::arg("records"), py::arg("seed_libs") = std::set<std::string>{},
        py::arg("seed_hosts") = std::set<std::string>{}, py::arg("max_iterations") = 50,
        "Grow the pkg-domain mapping to its fixpoint by alternating propagation.");

    m.def(
        "classify_message",
        [](const model::HttpMessage& msg, const hookmap::PkgDomainMapping& mapping,
           const std::set<std::string>& click_chain_ids) {
            auto label =
                hookmap::classify_message(msg, mapping, click_chain_ids,
                                          PublicSuffixList::bundled());
            return py::make_tuple(std::string(hookmap::traffic_label_name(label.label)),
                                  label.reason);
        },
        py::arg("message"), py::arg("mapping"),
        py::arg("click_chain_ids") = std::set<std::string>{},
        "(label, reason) for one capture message.");

    // ---- extractor -----------------------------------------------------------
    m.def(
        "extract_click_bindings",
        [](const model::HttpMessage& msg) { return extract::extract_click_bindings(msg); },
        py::arg("message"), "Click-bound URLs inside an ad-load response body.");

    m.def(
        "is_apk", [](const py::bytes& body) { return extract::is_apk(to_bytes(body)); },
        py::arg("body"));

    m.def(
        "reconstruct_redirect_chain",
        [](const model::CaptureLog& capture, const std::string& click_url,
           std::int64_t window_ms) {
            auto chain = extract::reconstruct_redirect_chain(capture, click_url, window_ms);
            py::list hops;
            for (const auto& hop : chain.hops)
                hops.append(py::make_tuple(hop.message_id, hop.url,
                                           hop.status ? py::cast(*hop.status) : py::none()));
            return py::make_tuple(hops, std::string(extract::outcome_name(chain.outcome)));
        },
        py::arg("capture"), py::arg("click_url"), py::arg("window_ms") = 10'000,
        "(hops, outcome) for the chain starting at click_url.");

    // ---- explorer ------------------------------------------------------------
    m.def(
        "plan_exploration",
        [](const std::string& graph_json, int screen_w, int screen_h) {
            auto graph = explore::parse_state_graph_text(graph_json);
            explore::Screen screen{screen_w, screen_h};
            if (graph.screen.width > 0) screen = graph.screen;
            auto plan = explore::plan_exploration(graph, screen);
            py::list steps;
            for (const auto& step : plan.steps)
                steps.append(py::make_tuple(step.state_id, step.node_id, step.score));
            return steps;
        },
        py::arg("graph_json"), py::arg("screen_w") = 1080, py::arg("screen_h") = 1920,
        "Ad-first exploration plan over a UI state graph document.");

    m.def(
        "score_view",
        [](const std::string& view_tree_json, const std::string& node_id, int screen_w,
           int screen_h) {
            auto tree = model::parse_view_tree_text(view_tree_json);
            const model::ViewNode* node = tree.find(node_id);
            if (!node) throw NotFoundError("node not in tree: " + node_id);
            return explore::score_view(*node, explore::Screen{screen_w, screen_h});
        },
        py::arg("view_tree_json"), py::arg("node_id"), py::arg("screen_w") = 1080,
        py::arg("screen_h") = 1920);

    // ---- detectors -----------------------------------------------------------
    m.def(
        "iou",
        [](const py::tuple& a, const py::tuple& b) {
            return detect::iou(box_from_tuple(a), box_from_tuple(b));
        },
        py::arg("a"), py::arg("b"),
        "Intersection-over-union of (x, y, w, h, conf) boxes.");

    m.def(
        "nms",
        [](const std::vector<py::tuple>& boxes, double iou_threshold) {
            std::vector<detect::DetectionBox> parsed;
            for (const auto& t : boxes) parsed.push_back(box_from_tuple(t));
            py::list kept;
            for (const auto& b : detect::nms(std::move(parsed), iou_threshold))
                kept.append(box_to_tuple(b));
            return kept;
        },
        py::arg("boxes"), py::arg("iou_threshold") = 0.45);

    m.def(
        "detect_cross",
        [](const py::bytes& image, const std::vector<py::bytes>& templates, int grid_side,
           int boxes_per_cell, double iou_nms, double conf_min) {
            std::vector<Raster> bank;
            for (const auto& t : templates) bank.push_back(decode_raster(t));
            detect::GridParams params;
            params.S = grid_side;
            params.B = boxes_per_cell;
            params.iou_nms = iou_nms;
            params.conf_min = conf_min;
            py::list out;
            for (const auto& b : detect::detect_cross(decode_raster(image), bank, params))
                out.append(box_to_tuple(b));
            return out;
        },
        py::arg("image"), py::arg("templates"), py::arg("grid_side") = 13,
        py::arg("boxes_per_cell") = 2, py::arg("iou_nms") = 0.45, py::arg("conf_min") = 0.6,
        "Cross-symbol boxes in an encoded image using an encoded template bank.");

    m.def(
        "embed_cross",
        [](const py::bytes& base, const py::bytes& symbol, std::uint32_t seed, double scale_lo,
           double scale_hi) {
            auto result = detect::embed_cross(decode_raster(base), decode_raster(symbol), seed,
                                              {scale_lo, scale_hi});
            return py::make_tuple(from_bytes(encode_png(result.image)),
                                  py::make_tuple(result.box.x, result.box.y, result.box.w,
                                                 result.box.h));
        },
        py::arg("base"), py::arg("symbol"), py::arg("seed"), py::arg("scale_lo") = 0.03,
        py::arg("scale_hi") = 0.10,
        "(png_bytes, (x, y, w, h)) with the symbol composited at a seeded random spot.");

    m.def(
        "draw_cross_symbol",
        [](int side) { return from_bytes(encode_png(detect::draw_cross_symbol(side))); },
        py::arg("side") = 40, "PNG of the built-in cross close-button symbol.");

    m.def(
        "voc_annotation",
        [](const std::string& filename, int width, int height, int depth,
           const std::vector<py::tuple>& boxes) {
            std::vector<detect::GroundTruthBox> parsed;
            for (const auto& t : boxes)
                parsed.push_back({t[0].cast<int>(), t[1].cast<int>(), t[2].cast<int>(),
                                  t[3].cast<int>()});
            return detect::voc_annotation(filename, width, height, depth, parsed);
        },
        py::arg("filename"), py::arg("width"), py::arg("height"), py::arg("depth"),
        py::arg("boxes"));

    auto verdict_to_py = [](const detect::Verdict& v) {
        py::dict out;
        out["devious"] = v.devious;
        out["group"] = std::string(detect::devious_group_name(v.group));
        out["evidence"] = json_to_py(v.evidence);
        return out;
    };

    m.def(
        "detect_close_keywords",
        [verdict_to_py](const std::vector<std::string>& texts,
                        const std::optional<std::vector<std::string>>& words) {
            return verdict_to_py(detect::detect_close_keywords(
                texts, words ? *words : detect::default_close_words()));
        },
        py::arg("texts"), py::arg("words") = py::none());

    m.def(
        "detect_gambling",
        [verdict_to_py](const std::vector<std::string>& texts,
                        const std::optional<std::vector<std::string>>& words) {
            return verdict_to_py(detect::detect_gambling(
                texts, words ? *words : detect::default_gambling_words()));
        },
        py::arg("texts"), py::arg("words") = py::none());

    m.def(
        "judge_censored",
        [verdict_to_py](int porn, int violence, int medical) {
            py::list out;
            for (const auto& v : detect::judge_censored({porn, violence, medical}))
                out.append(verdict_to_py(v));
            return out;
        },
        py::arg("porn") = 1, py::arg("violence") = 1, py::arg("medical") = 1,
        "Verdicts for every category with likelihood >= 4.");

    m.def(
        "judge_malicious",
        [verdict_to_py](const std::vector<std::pair<std::string, bool>>& engines,
                        const std::string& kind) {
            clients::ScanResult scan;
            scan.engines = engines;
            extract::ArtifactKind artifact_kind = extract::ArtifactKind::RedirectChain;
            if (kind == "script") artifact_kind = extract::ArtifactKind::Script;
            if (kind == "downloaded-app") artifact_kind = extract::ArtifactKind::DownloadedApp;
            return verdict_to_py(detect::judge_malicious(scan, artifact_kind));
        },
        py::arg("engines"), py::arg("kind") = "redirect-chain",
        "Devious when at least three engines flag the artifact.");

    // ---- pipeline -------------------------------------------------------------
    m.def(
        "run_pipeline",
        [](const std::filesystem::path& capture_path, const std::filesystem::path& hook_path,
           const std::vector<std::filesystem::path>& view_tree_paths,
           const std::set<std::string>& seed_libs, const std::set<std::string>& seed_hosts,
           const std::optional<std::filesystem::path>& out_dir,
           const std::optional<std::filesystem::path>& mock_fixtures,
           const std::string& app_id) {
            hookmap::SeedConfig seeds;
            seeds.seed_libs = seed_libs;
            seeds.seed_hosts = seed_hosts;
            report::PipelineConfig config;
            config.app_id = app_id;
            config.out_dir = out_dir;
            if (out_dir) std::filesystem::create_directories(*out_dir);
            clients::ClientConfig client_config;
            client_config.mock_fixtures = mock_fixtures;
            client_config.quiet = true;
            auto bundle = clients::make_clients(client_config);
            auto result = report::run_pipeline(capture_path, hook_path, view_tree_paths, seeds,
                                               config, bundle);
            return json_to_py(result.to_json());
        },
        py::arg("capture_path"), py::arg("hook_path"),
        py::arg("view_tree_paths") = std::vector<std::filesystem::path>{},
        py::arg("seed_libs") = std::set<std::string>{},
        py::arg("seed_hosts") = std::set<std::string>{}, py::arg("out_dir") = py::none(),
        py::arg("mock_fixtures") = py::none(), py::arg("app_id") = "",
        "Full pipeline over one app bundle; returns the report document.");
}
