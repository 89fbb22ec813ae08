#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "madroid/clients.hpp"
#include "madroid/defaults.hpp"
#include "madroid/errors.hpp"
#include "madroid/explorer.hpp"
#include "madroid/hookmap.hpp"
#include "madroid/model.hpp"
#include "madroid/report.hpp"

namespace fs = std::filesystem;
using namespace madroid;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInputError = 2;
constexpr int kExitNonConverged = 3;
constexpr int kExitDetectorFailures = 4;

struct GlobalOptions {
    std::string seed_libs_path;
    std::string seed_hosts_path;
    std::string suffix_rules_path;
    std::string gambling_words_path;
    std::string close_words_path;
    std::string mock_fixtures_path;
    std::string out_dir = "madroid-out";
    std::vector<std::string> detectors;
    int max_iterations = 50;
    long window_ms = 10'000;
    int screen_w = 1080;
    int screen_h = 1920;
    int top_n = 5;
    int jobs = 0;
};

// MADROID_CONFIG points at a JSON file whose keys mirror the long flags;
// explicit flags override it.
void apply_config_file(GlobalOptions& options) {
    const char* path = std::getenv("MADROID_CONFIG");
    if (!path || !*path) return;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError(std::string("MADROID_CONFIG points at an unreadable file: ") + path);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("MADROID_CONFIG file is not valid JSON: ") + e.what());
    }
    options.seed_libs_path = doc.value("seed_libs", options.seed_libs_path);
    options.seed_hosts_path = doc.value("seed_hosts", options.seed_hosts_path);
    options.suffix_rules_path = doc.value("suffix_rules", options.suffix_rules_path);
    options.gambling_words_path = doc.value("gambling_words", options.gambling_words_path);
    options.close_words_path = doc.value("close_words", options.close_words_path);
    options.mock_fixtures_path = doc.value("mock_fixtures", options.mock_fixtures_path);
    options.out_dir = doc.value("out_dir", options.out_dir);
    options.max_iterations = doc.value("max_iterations", options.max_iterations);
    options.window_ms = doc.value("window_ms", options.window_ms);
    if (auto it = doc.find("screen"); it != doc.end()) {
        options.screen_w = it->at(0).get<int>();
        options.screen_h = it->at(1).get<int>();
    }
    options.top_n = doc.value("top_n", options.top_n);
    options.jobs = doc.value("jobs", options.jobs);
}

void add_global_flags(CLI::App* app, GlobalOptions& options) {
    app->add_option("--seed-libs", options.seed_libs_path,
                    "Ad-library seed list (default: bundled 52-entry list)");
    app->add_option("--seed-hosts", options.seed_hosts_path,
                    "Ad-host seed list (default: bundled 1,315-entry list)");
    app->add_option("--suffix-rules", options.suffix_rules_path,
                    "Public-suffix rule file (default: bundled rules)");
    app->add_option("--gambling-words", options.gambling_words_path,
                    "Gambling keyword list (default: bundled 100 words)");
    app->add_option("--close-words", options.close_words_path,
                    "Close-text keyword list (default: bundled set)");
    app->add_option("--mock-fixtures", options.mock_fixtures_path,
                    "Mock client fixture file (hash -> canned response)");
    app->add_option("--out", options.out_dir, "Output directory");
    app->add_option("--detectors", options.detectors,
                    "Enabled detector plugins (default: all)");
    app->add_option("--max-iterations", options.max_iterations,
                    "Propagation half-pass budget");
    app->add_option("--window-ms", options.window_ms, "Redirect chain session window");
    app->add_option("--screen-width", options.screen_w, "Screen width for view scoring");
    app->add_option("--screen-height", options.screen_h, "Screen height for view scoring");
    app->add_option("--top", options.top_n, "Rows per ranking table");
    app->add_option("--jobs", options.jobs, "Worker threads for corpus mode (0 = cores)");
}

hookmap::SeedConfig make_seeds(const GlobalOptions& options) {
    hookmap::SeedConfig seeds;
    seeds.seed_libs = options.seed_libs_path.empty()
                          ? hookmap::parse_seed_list(defaults::seed_ad_libraries())
                          : hookmap::load_seed_file(options.seed_libs_path);
    seeds.seed_hosts = options.seed_hosts_path.empty()
                           ? hookmap::parse_seed_list(defaults::seed_ad_hosts())
                           : hookmap::load_seed_file(options.seed_hosts_path);
    seeds.max_iterations = options.max_iterations;
    return seeds;
}

report::PipelineConfig make_pipeline_config(const GlobalOptions& options, const fs::path& out_dir) {
    report::PipelineConfig config;
    if (!options.suffix_rules_path.empty()) config.suffix_rules = options.suffix_rules_path;
    if (!options.gambling_words_path.empty()) {
        std::ifstream in(options.gambling_words_path, std::ios::binary);
        if (!in) throw InputError("cannot open " + options.gambling_words_path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        for (auto& line : hookmap::parse_seed_list(buffer.str()))
            config.gambling_words.push_back(line);
    }
    if (!options.close_words_path.empty()) {
        std::ifstream in(options.close_words_path, std::ios::binary);
        if (!in) throw InputError("cannot open " + options.close_words_path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        for (auto& line : hookmap::parse_seed_list(buffer.str()))
            config.close_words.push_back(line);
    }
    config.extract.window_ms = options.window_ms;
    config.enabled_detectors = options.detectors;
    config.screen = {options.screen_w, options.screen_h};
    config.out_dir = out_dir;
    return config;
}

clients::ClientBundle make_bundle(const GlobalOptions& options) {
    clients::ClientConfig config;
    if (!options.mock_fixtures_path.empty()) config.mock_fixtures = options.mock_fixtures_path;
    return clients::make_clients(config);
}

int exit_code_for(const report::DeviousnessReport& result) {
    if (!result.mapping.converged) return kExitNonConverged;
    if (result.detector_errors > 0) return kExitDetectorFailures;
    return kExitOk;
}

int run_analyze(const GlobalOptions& options, const std::string& capture,
                const std::string& hooks, const std::vector<std::string>& views,
                const std::string& app_id) {
    fs::path out_dir(options.out_dir);
    fs::create_directories(out_dir);
    auto config = make_pipeline_config(options, out_dir);
    config.app_id = app_id;
    std::vector<fs::path> view_paths(views.begin(), views.end());
    auto result = report::run_pipeline(capture, hooks, view_paths, make_seeds(options), config,
                                       make_bundle(options));
    std::cout << result.to_json().dump(2) << '\n';
    return exit_code_for(result);
}

int run_corpus(const GlobalOptions& options, const std::string& corpus_dir) {
    fs::path root(corpus_dir);
    if (!fs::is_directory(root)) throw InputError("corpus directory not found: " + corpus_dir);

    std::vector<fs::path> bundles;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::exists(entry.path() / "capture.jsonl"))
            bundles.push_back(entry.path());
    }
    std::sort(bundles.begin(), bundles.end());
    if (bundles.empty()) throw InputError("no app bundles under " + corpus_dir);

    auto seeds = make_seeds(options);
    auto bundle_clients = make_bundle(options);
    fs::path out_root(options.out_dir);
    fs::create_directories(out_root);

    std::vector<report::DeviousnessReport> reports(bundles.size());
    std::vector<std::string> failures;
    std::mutex failures_mutex;
    std::atomic<std::size_t> cursor{0};

    unsigned workers = options.jobs > 0 ? static_cast<unsigned>(options.jobs)
                                        : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, bundles.size());

    auto worker = [&] {
        for (;;) {
            std::size_t index = cursor.fetch_add(1);
            if (index >= bundles.size()) return;
            const fs::path& bundle = bundles[index];
            try {
                auto config = make_pipeline_config(options, out_root / bundle.filename());
                fs::create_directories(*config.out_dir);
                config.app_id = bundle.filename().string();
                std::vector<fs::path> views;
                if (fs::is_directory(bundle / "views")) {
                    for (const auto& v : fs::directory_iterator(bundle / "views"))
                        if (v.path().extension() == ".json") views.push_back(v.path());
                    std::sort(views.begin(), views.end());
                }
                reports[index] =
                    report::run_pipeline(bundle / "capture.jsonl", bundle / "hooks.jsonl", views,
                                         seeds, config, bundle_clients);
            } catch (const std::exception& e) {
                std::lock_guard lock(failures_mutex);
                failures.push_back(bundle.filename().string() + ": " + e.what());
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (const auto& failure : failures) std::cerr << "madroid: bundle failed: " << failure << '\n';

    auto summary = report::aggregate(reports);
    std::ofstream summary_out(out_root / "corpus_summary.json", std::ios::binary);
    summary_out << summary.to_json(options.top_n).dump(2) << '\n';
    std::cout << summary.render_table(options.top_n);

    if (!failures.empty()) return kExitInputError;
    if (summary.non_converged > 0) return kExitNonConverged;
    if (summary.detector_errors > 0) return kExitDetectorFailures;
    return kExitOk;
}

int run_mapping(const GlobalOptions& options, const std::string& hooks,
                const std::string& import_path, const std::string& export_path) {
    if (!import_path.empty()) {
        std::ifstream in(import_path, std::ios::binary);
        if (!in) throw InputError("cannot open mapping: " + import_path);
        std::ostringstream buffer;
        buffer << in.rdbuf();
        auto mapping = hookmap::PkgDomainMapping::from_json_text(buffer.str());
        std::cout << "ad libraries: " << mapping.ad_libs.size()
                  << "\nad hosts: " << mapping.ad_hosts.size()
                  << "\nedges: " << mapping.edges.size()
                  << "\niterations: " << mapping.iterations
                  << "\nconverged: " << (mapping.converged ? "yes" : "no") << '\n';
        return kExitOk;
    }
    if (hooks.empty()) throw InputError("mapping requires --hooks or --import");

    auto log = model::parse_hook_log_file(hooks);
    const PublicSuffixList psl = options.suffix_rules_path.empty()
                                     ? PublicSuffixList::bundled()
                                     : PublicSuffixList::from_file(options.suffix_rules_path);
    auto mapping = hookmap::build_mapping(log.records, make_seeds(options), psl);

    std::string text = mapping.to_json_text();
    if (export_path.empty() || export_path == "-") {
        std::cout << text << '\n';
    } else {
        std::ofstream out(export_path, std::ios::binary);
        out << text << '\n';
        std::cerr << "madroid: mapping written to " << export_path << '\n';
    }
    return mapping.converged ? kExitOk : kExitNonConverged;
}

int run_plan(const GlobalOptions& options, const std::string& graph_path,
             const std::vector<std::string>& views, const std::string& out_path) {
    explore::Screen screen{options.screen_w, options.screen_h};
    explore::UiStateGraph graph;
    if (!graph_path.empty()) {
        graph = explore::parse_state_graph_file(graph_path);
        if (graph.screen.width > 0) screen = graph.screen;
    } else {
        if (views.empty()) throw InputError("plan requires --graph or --view-tree");
        std::vector<model::ViewTree> trees;
        for (const auto& path : views) trees.push_back(model::parse_view_tree_file(path));
        graph = explore::graph_from_trees(std::move(trees), screen);
    }
    explore::PlanOptions plan_options;
    auto plan = explore::plan_exploration(graph, screen, plan_options);
    if (out_path.empty() || out_path == "-") {
        std::cout << plan.to_json_text() << '\n';
    } else {
        std::ofstream out(out_path, std::ios::binary);
        out << plan.to_json_text() << '\n';
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"madroid: offline ad-traffic classification, ad-content extraction and "
                 "deviousness detection over recorded app captures"};
    app.require_subcommand(1);

    GlobalOptions options;

    std::string capture, hooks, app_id, corpus_dir, import_path, export_path, graph_path, out_path;
    std::vector<std::string> views;

    auto* analyze = app.add_subcommand("analyze", "Run the full pipeline for one app");
    analyze->add_option("--capture", capture, "Capture log (JSON lines)")->required();
    analyze->add_option("--hooks", hooks, "Hook log (JSON lines)")->required();
    analyze->add_option("--view-tree", views, "View tree dump (repeatable)");
    analyze->add_option("--app-id", app_id, "Package name of the app under test");
    add_global_flags(analyze, options);

    auto* corpus = app.add_subcommand("corpus", "Analyze a directory of app bundles");
    corpus->add_option("dir", corpus_dir, "Directory of <app>/capture.jsonl bundles")->required();
    add_global_flags(corpus, options);

    auto* mapping = app.add_subcommand("mapping", "Build or inspect the pkg-domain mapping");
    mapping->add_option("--hooks", hooks, "Hook log (JSON lines)");
    mapping->add_option("--import", import_path, "Inspect an exported mapping");
    mapping->add_option("--export", export_path, "Write the mapping here ('-' = stdout)");
    add_global_flags(mapping, options);

    auto* plan = app.add_subcommand("plan", "Produce an ad-first exploration plan");
    plan->add_option("--graph", graph_path, "UI state graph document");
    plan->add_option("--view-tree", views, "View tree dump (repeatable)");
    plan->add_option("--plan-out", out_path, "Plan output path ('-' = stdout)");
    add_global_flags(plan, options);

    try {
        apply_config_file(options);
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const InputError& e) {
        std::cerr << "madroid: " << e.what() << '\n';
        return kExitInputError;
    }

    try {
        if (analyze->parsed()) return run_analyze(options, capture, hooks, views, app_id);
        if (corpus->parsed()) return run_corpus(options, corpus_dir);
        if (mapping->parsed()) return run_mapping(options, hooks, import_path, export_path);
        if (plan->parsed()) return run_plan(options, graph_path, views, out_path);
    } catch (const PipelineError& e) {
        std::cerr << "madroid: pipeline failed at stage " << e.stage << ": " << e.what() << '\n';
        return kExitInputError;
    } catch (const InputError& e) {
        std::cerr << "madroid: " << e.what() << '\n';
        return kExitInputError;
    } catch (const std::exception& e) {
        std::cerr << "madroid: " << e.what() << '\n';
        return kExitInputError;
    }
    return kExitOk;
}
