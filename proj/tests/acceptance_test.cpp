// Acceptance suite: one test case per criterion, each printing a
// "ACCEPTANCE C<n> <name>: PASS|FAIL" line. Runs fully offline against mock
// clients.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <doctest.h>

#include "helpers.hpp"
#include "madroid/clients.hpp"
#include "madroid/detectors.hpp"
#include "madroid/explorer.hpp"
#include "madroid/extractor.hpp"
#include "madroid/hookmap.hpp"
#include "madroid/report.hpp"

using namespace madroid;
using Clock = std::chrono::steady_clock;

namespace {

const Clock::time_point kSuiteStart = Clock::now();

void report_criterion(int number, const std::string& name, bool pass) {
    std::printf("ACCEPTANCE C%d %s: %s\n", number, name.c_str(), pass ? "PASS" : "FAIL");
    std::fflush(stdout);
    CHECK_MESSAGE(pass, "criterion ", number, " (", name, ")");
}

const PublicSuffixList& psl() {
    return PublicSuffixList::bundled();
}

model::HookRecord record_of(const std::string& package, const std::string& host,
                            std::int64_t ts = 1000) {
    model::HookRecord rec;
    rec.ts_ms = ts;
    rec.url = "http://" + host + "/p";
    rec.stack = {package + ".Cls.m"};
    rec.thread = "t";
    return rec;
}

struct RandomGraph {
    std::vector<std::pair<std::string, std::string>> edges;
    std::vector<model::HookRecord> records;
    std::vector<std::string> packages;
    std::vector<std::string> hosts;
};

RandomGraph make_random_graph(std::mt19937& rng, int max_pkgs, int max_hosts) {
    RandomGraph g;
    int n_pkgs = 2 + static_cast<int>(rng() % static_cast<std::uint32_t>(max_pkgs - 1));
    int n_hosts = 2 + static_cast<int>(rng() % static_cast<std::uint32_t>(max_hosts - 1));
    for (int i = 0; i < n_pkgs; ++i) g.packages.push_back("pkg" + std::to_string(i));
    for (int i = 0; i < n_hosts; ++i) g.hosts.push_back("host" + std::to_string(i) + ".test");
    int n_edges = 1 + static_cast<int>(rng() % static_cast<std::uint32_t>(2 * (n_pkgs + n_hosts)));
    for (int i = 0; i < n_edges; ++i) {
        const auto& pkg = g.packages[rng() % g.packages.size()];
        const auto& host = g.hosts[rng() % g.hosts.size()];
        g.edges.emplace_back(pkg, host);
        g.records.push_back(record_of(pkg, host, 1000 + i));
    }
    return g;
}

std::set<std::string> oracle_closure(const RandomGraph& g, const std::set<std::string>& seed_libs,
                                     const std::set<std::string>& seed_hosts) {
    std::map<std::string, std::set<std::string>> adjacency;
    for (const auto& [pkg, host] : g.edges) {
        adjacency[pkg].insert(host);
        adjacency[host].insert(pkg);
    }
    std::set<std::string> reached;
    std::vector<std::string> frontier;
    auto visit = [&](const std::string& node) {
        if (adjacency.contains(node) && reached.insert(node).second) frontier.push_back(node);
    };
    for (const auto& s : seed_libs) visit(s);
    for (const auto& s : seed_hosts) visit(s);
    while (!frontier.empty()) {
        auto node = frontier.back();
        frontier.pop_back();
        for (const auto& next : adjacency[node]) visit(next);
    }
    std::set<std::string> closure = reached;
    closure.insert(seed_libs.begin(), seed_libs.end());
    closure.insert(seed_hosts.begin(), seed_hosts.end());
    return closure;
}

std::set<std::string> fixpoint_set(const hookmap::PkgDomainMapping& mapping) {
    std::set<std::string> out;
    for (const auto& [lib, _] : mapping.ad_libs) out.insert(lib);
    for (const auto& [host, _] : mapping.ad_hosts) out.insert(host);
    return out;
}

// connected components over the record-induced bipartite graph
std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> components_of(
    const RandomGraph& g) {
    std::map<std::string, std::set<std::string>> adjacency;
    for (const auto& [pkg, host] : g.edges) {
        adjacency[pkg].insert(host);
        adjacency[host].insert(pkg);
    }
    std::set<std::string> seen;
    std::vector<std::pair<std::vector<std::string>, std::vector<std::string>>> components;
    for (const auto& [node, _] : adjacency) {
        if (seen.contains(node)) continue;
        std::vector<std::string> stack{node};
        seen.insert(node);
        std::vector<std::string> pkgs, hosts;
        while (!stack.empty()) {
            auto current = stack.back();
            stack.pop_back();
            if (current.starts_with("pkg"))
                pkgs.push_back(current);
            else
                hosts.push_back(current);
            for (const auto& next : adjacency[current])
                if (seen.insert(next).second) stack.push_back(next);
        }
        components.push_back({std::move(pkgs), std::move(hosts)});
    }
    return components;
}

}  // namespace

TEST_CASE("C1 fixpoint oracle equivalence") {
    std::mt19937 rng(1);
    bool all_equal = true;
    auto start = Clock::now();
    for (int round = 0; round < 100; ++round) {
        RandomGraph g = make_random_graph(rng, 200, 200);
        hookmap::SeedConfig seeds;
        int n_lib_seeds = static_cast<int>(rng() % 4);
        int n_host_seeds = 1 + static_cast<int>(rng() % 3);
        for (int i = 0; i < n_lib_seeds; ++i)
            seeds.seed_libs.insert(g.packages[rng() % g.packages.size()]);
        for (int i = 0; i < n_host_seeds; ++i)
            seeds.seed_hosts.insert(g.hosts[rng() % g.hosts.size()]);

        auto mapping = hookmap::build_mapping(g.records, seeds, psl());
        auto expected = oracle_closure(g, seeds.seed_libs, seeds.seed_hosts);
        if (fixpoint_set(mapping) != expected || !mapping.converged) {
            all_equal = false;
            break;
        }
    }
    double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    bool pass = all_equal && elapsed < 2.0;
    INFO("elapsed: ", elapsed, "s");
    report_criterion(1, "fixpoint-oracle-equivalence", pass);
}

TEST_CASE("C2 seed-cover invariance") {
    std::mt19937 rng(2);
    bool all_agree = true;
    for (int round = 0; round < 50 && all_agree; ++round) {
        RandomGraph g = make_random_graph(rng, 60, 60);
        auto components = components_of(g);
        if (components.empty()) continue;

        // choose a subset of components; seed them lib-only (S1-style),
        // host-only (S2-style) and combined (S3-style)
        hookmap::SeedConfig s1, s2, s3;
        for (const auto& [pkgs, hosts] : components) {
            if (rng() % 2 == 0) continue;
            const std::string& pkg = pkgs[rng() % pkgs.size()];
            const std::string& host = hosts[rng() % hosts.size()];
            s1.seed_libs.insert(pkg);
            s2.seed_hosts.insert(host);
            s3.seed_libs.insert(pkg);
            s3.seed_hosts.insert(host);
        }
        if (s1.seed_libs.empty()) continue;

        auto fp1 = fixpoint_set(hookmap::build_mapping(g.records, s1, psl()));
        auto fp2 = fixpoint_set(hookmap::build_mapping(g.records, s2, psl()));
        auto fp3 = fixpoint_set(hookmap::build_mapping(g.records, s3, psl()));
        auto expected = oracle_closure(g, s3.seed_libs, s3.seed_hosts);
        all_agree = fp1 == fp2 && fp2 == fp3 && fp3 == expected;
    }
    report_criterion(2, "seed-cover-invariance", all_agree);
}

TEST_CASE("C3 monotone staircase on a 15-layer chain") {
    // L0 seeds the chain; each half-pass adds exactly one element:
    // d0, L1, d1, L2, ..., d7 -- 15 productive half-passes.
    std::vector<model::HookRecord> records;
    int ts = 1000;
    for (int k = 0; k <= 7; ++k) {
        records.push_back(record_of("L" + std::to_string(k), "d" + std::to_string(k) + ".test",
                                    ts++));
        if (k < 7)
            records.push_back(record_of("L" + std::to_string(k + 1),
                                        "d" + std::to_string(k) + ".test", ts++));
    }
    hookmap::SeedConfig seeds;
    seeds.seed_libs = {"L0"};
    auto mapping = hookmap::build_mapping(records, seeds, psl());

    bool pass = mapping.iterations == 15 && mapping.converged;
    // staircase shape: every half-pass 1..15 added at least one element, and
    // cumulative sizes are non-decreasing by construction of the tags
    std::map<int, int> additions;
    for (const auto& [_, iteration] : mapping.ad_libs) ++additions[iteration];
    for (const auto& [_, iteration] : mapping.ad_hosts) ++additions[iteration];
    for (int k = 1; k <= 15; ++k) pass = pass && additions[k] == 1;
    // alternation: odd half-passes grow hosts, even ones grow libs
    for (const auto& [_, iteration] : mapping.ad_hosts)
        if (iteration > 0) pass = pass && iteration % 2 == 1;
    for (const auto& [_, iteration] : mapping.ad_libs)
        if (iteration > 0) pass = pass && iteration % 2 == 0;
    report_criterion(3, "monotone-staircase-15", pass);
}

TEST_CASE("C4 Table 1 golden fixture") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "madroid-acceptance-t1";
    fs::remove_all(dir);
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "capture.jsonl", std::ios::binary);
        out << testutil::table1_capture_jsonl();
    }
    {
        std::ofstream out(dir / "hooks.jsonl", std::ios::binary);
        out << testutil::table1_hooks_jsonl();
    }

    hookmap::SeedConfig seeds;
    seeds.seed_libs = {"com.startapp"};
    report::PipelineConfig config;
    config.app_id = "com.bbsoft.InternetPolyglot";
    clients::ClientBundle bundle;
    bundle.scanner = std::make_shared<clients::MockScannerClient>();
    bundle.vision = std::make_shared<clients::MockVisionClient>();
    bundle.ocr = std::make_shared<clients::MockOcrClient>();

    auto first = report::run_pipeline(dir / "capture.jsonl", dir / "hooks.jsonl", {}, seeds,
                                      config, bundle);
    auto second = report::run_pipeline(dir / "capture.jsonl", dir / "hooks.jsonl", {}, seeds,
                                       config, bundle);

    // exact labels: m1, m3, m4 ad-load; m2 non-ad; m5..m7 the click chain
    std::istringstream capture_in(testutil::table1_capture_jsonl());
    auto capture = model::parse_capture(capture_in);
    auto mapping = hookmap::build_mapping(
        model::parse_hook_log_file(dir / "hooks.jsonl").records, seeds, psl());
    std::set<std::string> chain_ids;
    auto chain = extract::reconstruct_redirect_chain(capture, "http://cl.untildogtop.com/t/clk");
    for (const auto& hop : chain.hops) chain_ids.insert(hop.message_id);

    auto label_of = [&](const char* id) {
        return hookmap::classify_message(*capture.find(id), mapping, chain_ids, psl()).label;
    };
    using Kind = hookmap::TrafficLabel::Kind;
    bool labels_ok = label_of("m1") == Kind::AdLoad && label_of("m3") == Kind::AdLoad &&
                     label_of("m4") == Kind::AdLoad && label_of("m2") == Kind::NonAd &&
                     label_of("m5") == Kind::AdClick && label_of("m6") == Kind::AdClick &&
                     label_of("m7") == Kind::AdClick;

    bool chain_ok = chain.hops.size() == 3 && chain.hops[0].message_id == "m5" &&
                    chain.hops[1].message_id == "m6" && chain.hops[2].message_id == "m7" &&
                    chain.outcome == extract::OutcomeKind::LandingPage;

    bool report_ok = first.messages.ad_load == 3 && first.messages.non_ad == 1 &&
                     first.chain_count == 1;
    for (const auto& [_, counter] : first.per_type) report_ok = report_ok && counter.devious == 0;

    bool rerun_identical = first.body_json().dump(2) == second.body_json().dump(2);

    report_criterion(4, "table1-golden-fixture",
                     labels_ok && chain_ok && report_ok && rerun_identical);
}

TEST_CASE("C5 cross detector on the synthetic corpus") {
    auto start = Clock::now();

    Raster symbol = detect::draw_cross_symbol(40);
    std::vector<Raster> bank;
    for (int side = 10; side <= 20; ++side) bank.push_back(resize_bilinear(symbol, side, side));
    detect::GridParams params;  // defaults: S=13, B=2, nms 0.45, conf 0.6
    detect::ScaleRange range{0.05, 0.10};

    int true_positives = 0, false_positives = 0, false_negatives = 0;
    for (std::uint32_t seed = 0; seed < 200; ++seed) {
        Raster base = testutil::make_ad_banner(256, 200, 50'000 + seed);
        auto embedded = detect::embed_cross(base, symbol, seed, range);
        auto boxes = detect::detect_cross(embedded.image, bank, params);

        detect::DetectionBox truth{static_cast<double>(embedded.box.x),
                                   static_cast<double>(embedded.box.y),
                                   static_cast<double>(embedded.box.w),
                                   static_cast<double>(embedded.box.h), 1.0};
        bool hit = false;
        for (const auto& b : boxes) {
            if (detect::iou(b, truth) >= 0.5 && !hit)
                hit = true;
            else
                ++false_positives;
        }
        if (hit)
            ++true_positives;
        else
            ++false_negatives;
    }
    for (std::uint32_t seed = 0; seed < 200; ++seed) {
        Raster clean = testutil::make_ad_banner(256, 200, 90'000 + seed);
        false_positives += static_cast<int>(detect::detect_cross(clean, bank, params).size());
    }

    double recall = true_positives / 200.0;
    double precision = true_positives + false_positives > 0
                           ? static_cast<double>(true_positives) /
                                 (true_positives + false_positives)
                           : 0.0;
    double elapsed = std::chrono::duration<double>(Clock::now() - start).count();

    std::printf("  cross detector: recall=%.3f precision=%.3f tp=%d fp=%d fn=%d elapsed=%.1fs\n",
                recall, precision, true_positives, false_positives, false_negatives, elapsed);
    bool pass = recall >= 0.90 && precision >= 0.90 && elapsed < 60.0;
    report_criterion(5, "cross-detector-synthetic-corpus", pass);
}

TEST_CASE("C6 threshold boundaries") {
    bool pass = true;
    // censored: flagged iff likelihood >= 4, exhaustively over 1..5
    for (int v = 1; v <= 5; ++v) {
        bool flagged = !detect::judge_censored({v, 1, 1}).empty();
        pass = pass && flagged == (v >= 4);
    }
    // malicious: flagged iff positives >= 3, exhaustively over 0..10
    for (int n = 0; n <= 10; ++n) {
        clients::ScanResult scan;
        for (int i = 0; i < 10; ++i) scan.engines.emplace_back("e" + std::to_string(i), i < n);
        bool flagged = detect::judge_malicious(scan, extract::ArtifactKind::Script).devious;
        pass = pass && flagged == (n >= 3);
    }
    report_criterion(6, "threshold-boundaries", pass);
}

TEST_CASE("C7 keyword detectors against the token-set oracle") {
    std::vector<std::string> keywords = {"casino", "poker", "jackpot", "lottery", "betting",
                                         "roulette", "bingo", "wager"};
    std::vector<std::string> noise = {"weather", "banana", "update", "puzzle", "galaxy",
                                      "candy", "runner", "saga", "clock", "news"};
    std::mt19937 rng(7);
    std::set<std::string> keyword_set(keywords.begin(), keywords.end());

    int agreements = 0;
    const int rounds = 1000;
    for (int round = 0; round < rounds; ++round) {
        std::vector<std::string> tokens;
        int n = static_cast<int>(rng() % 10);
        for (int i = 0; i < n; ++i) {
            if (rng() % 3 == 0)
                tokens.push_back(keywords[rng() % keywords.size()]);
            else
                tokens.push_back(noise[rng() % noise.size()]);
        }
        // brute-force oracle: non-empty token-set intersection
        bool expected = false;
        for (const auto& token : tokens) expected = expected || keyword_set.contains(token);

        bool got = detect::detect_gambling(tokens, keywords).devious;
        if (got == expected) ++agreements;
    }
    report_criterion(7, "keyword-oracle-agreement", agreements == rounds);
}

TEST_CASE("C8 NMS/IoU property suite") {
    std::mt19937 rng(8);
    long violations = 0;
    for (int round = 0; round < 10'000; ++round) {
        std::vector<detect::DetectionBox> boxes;
        int n = 1 + static_cast<int>(rng() % 12);
        for (int i = 0; i < n; ++i) {
            boxes.push_back({static_cast<double>(rng() % 100), static_cast<double>(rng() % 100),
                             1.0 + rng() % 40, 1.0 + rng() % 40, (rng() % 1000) / 1000.0});
        }
        double threshold = 0.05 + (rng() % 90) / 100.0;

        const auto& a = boxes[rng() % boxes.size()];
        const auto& b = boxes[rng() % boxes.size()];
        double ab = detect::iou(a, b), ba = detect::iou(b, a);
        if (std::abs(ab - ba) > 1e-12) ++violations;
        if (ab < 0.0 || ab > 1.0) ++violations;
        if (std::abs(detect::iou(a, a) - 1.0) > 1e-12) ++violations;

        auto kept = detect::nms(boxes, threshold);
        for (std::size_t i = 0; i < kept.size(); ++i) {
            for (std::size_t j = i + 1; j < kept.size(); ++j)
                if (detect::iou(kept[i], kept[j]) > threshold) ++violations;
        }
        auto again = detect::nms(kept, threshold);
        if (again.size() != kept.size()) ++violations;
    }
    report_criterion(8, "nms-iou-properties", violations == 0);
}

TEST_CASE("C9 APK sniffing and click outcomes over the three fixture chains") {
    auto make_chain_capture = [](const std::vector<std::uint8_t>* final_body,
                                 const std::string& final_url, const std::string& final_mime) {
        model::CaptureLog capture;
        model::HttpMessage click;
        click.id = "c1";
        click.session_id = "s";
        click.ts_ms = 1000;
        click.method = "GET";
        click.url = "http://clk.test/go";
        click.status = 302;
        click.response_headers.emplace_back("Location", final_url);
        capture.messages.push_back(click);

        model::HttpMessage last;
        last.id = "c2";
        last.session_id = "s";
        last.ts_ms = 1100;
        last.method = "GET";
        last.url = final_url;
        last.status = 200;
        if (!final_mime.empty()) last.mime = final_mime;
        if (final_body) last.body = model::Body::inline_of(*final_body);
        capture.messages.push_back(last);
        return capture;
    };

    auto apk = testutil::make_zip("AndroidManifest.xml", "<manifest/>");
    auto plain_zip = testutil::make_zip("readme.txt", "hello");

    auto capture_a = make_chain_capture(&apk, "http://dl.test/app.apk", "application/zip");
    auto chain_a = extract::reconstruct_redirect_chain(capture_a, "http://clk.test/go");
    bool a_ok = chain_a.outcome == extract::OutcomeKind::ApkDownload && extract::is_apk(apk);

    auto capture_b = make_chain_capture(&plain_zip, "http://dl.test/data.zip", "application/zip");
    auto chain_b = extract::reconstruct_redirect_chain(capture_b, "http://clk.test/go");
    bool b_ok = chain_b.outcome != extract::OutcomeKind::ApkDownload && !extract::is_apk(plain_zip);

    auto capture_c = make_chain_capture(nullptr, "market://details?id=com.foo", "");
    auto chain_c = extract::reconstruct_redirect_chain(capture_c, "http://clk.test/go");
    bool c_ok = chain_c.outcome == extract::OutcomeKind::StoreDeepLink;

    report_criterion(9, "apk-sniffing-and-outcomes", a_ok && b_ok && c_ok);
}

TEST_CASE("C10 exploration plan on the Fig. 4-style graph") {
    using model::PageRole;
    using model::ViewNode;

    auto leaf = [](const std::string& id, const std::string& cls, std::int64_t x, std::int64_t y,
                   std::int64_t w, std::int64_t h) {
        ViewNode node;
        node.id = id;
        node.class_name = cls;
        node.bounds = {x, y, w, h};
        node.clickable = true;
        return node;
    };
    auto page = [](const std::string& root_id, std::vector<ViewNode> leaves, PageRole role) {
        model::ViewTree tree;
        tree.page_role = role;
        tree.root.id = root_id;
        tree.root.class_name = "android.widget.FrameLayout";
        tree.root.bounds = {0, 0, 1080, 1920};
        tree.root.children = std::move(leaves);
        return tree;
    };

    explore::UiStateGraph graph;
    graph.states.push_back(
        {"main", page("r-main",
                      {leaf("m-btn", "android.widget.Button", 100, 800, 300, 120),
                       leaf("m-web", "android.webkit.WebView", 0, 1720, 1080, 200),
                       leaf("m-img", "android.widget.ImageView", 0, 0, 1080, 1824)},
                      PageRole::Main)});
    graph.states.push_back(
        {"detail", page("r-detail", {leaf("d-btn", "android.widget.Button", 0, 0, 100, 100)},
                        PageRole::Other)});
    graph.states.push_back(
        {"exitpage",
         page("r-exit",
              {leaf("x-flip", "android.widget.ViewFlipper", 0, 0, 1080, 1824),
               leaf("x-btn", "android.widget.Button", 10, 10, 80, 80)},
              PageRole::Exit)});
    graph.transitions.push_back({"main", "m-btn", "detail"});
    graph.transitions.push_back({"main", "m-btn", "exitpage"});

    auto plan = explore::plan_exploration(graph, explore::Screen{1080, 1920});

    std::set<std::string> ad_classes = {"m-web", "m-img", "x-flip"};
    std::map<std::string, std::vector<std::string>> order_by_state;
    std::set<std::pair<std::string, std::string>> seen;
    bool no_repeats = true;
    for (const auto& step : plan.steps) {
        order_by_state[step.state_id].push_back(step.node_id);
        no_repeats = no_repeats && seen.emplace(step.state_id, step.node_id).second;
    }

    // ad-class leaves precede every other leaf within their state
    bool ad_first = true;
    for (const auto& [state, nodes] : order_by_state) {
        bool seen_plain = false;
        for (const auto& node : nodes) {
            if (ad_classes.contains(node) && seen_plain) ad_first = false;
            if (!ad_classes.contains(node)) seen_plain = true;
        }
    }

    // exit-tagged state precedes its equal-depth sibling
    std::vector<std::string> state_order;
    for (const auto& step : plan.steps)
        if (state_order.empty() || state_order.back() != step.state_id)
            state_order.push_back(step.state_id);
    bool exit_first = state_order ==
                      std::vector<std::string>{"main", "exitpage", "detail"};

    bool complete = plan.steps.size() == 6;  // every clickable leaf exactly once
    report_criterion(10, "exploration-plan", ad_first && exit_first && complete && no_repeats);
}

TEST_CASE("C11 offline completeness") {
    // the suite constructs only fixture-driven mock clients; this criterion
    // asserts the whole binary stayed within the offline time budget
    double elapsed = std::chrono::duration<double>(Clock::now() - kSuiteStart).count();
    std::printf("  total suite elapsed: %.1fs\n", elapsed);
    bool pass = elapsed < 300.0;
    report_criterion(11, "offline-completeness", pass);
}
