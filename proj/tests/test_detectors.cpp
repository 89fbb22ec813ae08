#include "madroid/detectors.hpp"

#include <random>

#include <doctest.h>

#include "helpers.hpp"
#include "madroid/errors.hpp"

using namespace madroid;
using namespace madroid::detect;

namespace {

DetectionBox box(double x, double y, double w, double h, double conf) {
    return {x, y, w, h, conf};
}

// Template bank derived from the same symbol raster the tests embed, one
// template per integer side in [lo, hi].
std::vector<Raster> bank_from_symbol(const Raster& symbol, int lo, int hi) {
    std::vector<Raster> bank;
    for (int side = lo; side <= hi; ++side) bank.push_back(resize_bilinear(symbol, side, side));
    return bank;
}

bool hits_ground_truth(const std::vector<DetectionBox>& boxes, const GroundTruthBox& truth,
                       double min_iou = 0.5) {
    DetectionBox gt{static_cast<double>(truth.x), static_cast<double>(truth.y),
                    static_cast<double>(truth.w), static_cast<double>(truth.h), 1.0};
    for (const auto& b : boxes)
        if (iou(b, gt) >= min_iou) return true;
    return false;
}

}  // namespace

TEST_CASE("iou arithmetic") {
    CHECK(iou(box(0, 0, 10, 10, 1), box(0, 0, 10, 10, 1)) == doctest::Approx(1.0));
    CHECK(iou(box(0, 0, 10, 10, 1), box(20, 20, 10, 10, 1)) == doctest::Approx(0.0));
    // hand arithmetic: overlap 50, union 150
    CHECK(iou(box(0, 0, 10, 10, 1), box(5, 0, 10, 10, 1)) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("nms keeps the best box per overlap group") {
    SUBCASE("identical boxes collapse to the highest confidence") {
        auto kept = nms({box(0, 0, 10, 10, 0.9), box(0, 0, 10, 10, 0.8)}, 0.45);
        REQUIRE(kept.size() == 1);
        CHECK(kept[0].confidence == doctest::Approx(0.9));
    }
    SUBCASE("disjoint boxes both survive") {
        auto kept = nms({box(0, 0, 10, 10, 0.9), box(50, 50, 10, 10, 0.8)}, 0.45);
        CHECK(kept.size() == 2);
    }
    SUBCASE("IoU exactly at the threshold is kept") {
        // IoU = 1/3 <= 0.45
        auto kept = nms({box(0, 0, 10, 10, 0.9), box(5, 0, 10, 10, 0.8)}, 0.45);
        CHECK(kept.size() == 2);
    }
    SUBCASE("threshold domain is validated") {
        CHECK_THROWS_AS(nms({}, 0.0), ConfigError);
        CHECK_THROWS_AS(nms({}, 1.0), ConfigError);
    }
}

TEST_CASE("nms/iou property suite on random boxes") {
    std::mt19937 rng(404);
    auto random_box = [&] {
        double x = rng() % 200, y = rng() % 200;
        double w = 1 + rng() % 60, h = 1 + rng() % 60;
        double conf = (rng() % 1000) / 1000.0;
        return box(x, y, w, h, conf);
    };
    for (int round = 0; round < 300; ++round) {
        std::vector<DetectionBox> boxes;
        int n = 1 + static_cast<int>(rng() % 20);
        for (int i = 0; i < n; ++i) boxes.push_back(random_box());
        double threshold = 0.05 + (rng() % 90) / 100.0;

        for (int i = 0; i < 5; ++i) {
            auto a = boxes[rng() % boxes.size()];
            auto b = boxes[rng() % boxes.size()];
            double ab = iou(a, b);
            CHECK(ab == doctest::Approx(iou(b, a)));
            CHECK(ab >= 0.0);
            CHECK(ab <= 1.0);
            CHECK(iou(a, a) == doctest::Approx(1.0));
        }

        auto kept = nms(boxes, threshold);
        for (std::size_t i = 0; i < kept.size(); ++i) {
            for (std::size_t j = i + 1; j < kept.size(); ++j)
                CHECK(iou(kept[i], kept[j]) <= threshold);
            if (i + 1 < kept.size()) CHECK(kept[i].confidence >= kept[i + 1].confidence);
        }
        auto again = nms(kept, threshold);
        REQUIRE(again.size() == kept.size());
    }
}

TEST_CASE("detect_cross finds exact template pastes") {
    Raster base = testutil::make_ad_banner(256, 200, 77);
    Raster symbol = draw_cross_symbol(40);
    auto bank = bank_from_symbol(symbol, 14, 18);

    SUBCASE("single paste lands within 2px with near-perfect confidence") {
        Raster pasted = base;
        Raster scaled = resize_bilinear(symbol, 16, 16);
        alpha_composite(pasted, scaled, 180, 120);

        auto boxes = detect_cross(pasted, bank);
        REQUIRE(!boxes.empty());
        CHECK(boxes[0].confidence >= 0.99);
        CHECK(std::abs(boxes[0].x - 180) <= 2);
        CHECK(std::abs(boxes[0].y - 120) <= 2);
    }
    SUBCASE("uniform gray image yields nothing") {
        Raster gray = Raster::make(256, 200, 3, 128);
        CHECK(detect_cross(gray, bank).empty());
    }
    SUBCASE("two disjoint pastes yield two boxes after NMS") {
        Raster pasted = base;
        Raster scaled = resize_bilinear(symbol, 16, 16);
        alpha_composite(pasted, scaled, 20, 20);
        alpha_composite(pasted, scaled, 200, 150);
        auto boxes = detect_cross(pasted, bank);
        REQUIRE(boxes.size() == 2);
        bool near_first = (std::abs(boxes[0].x - 20) <= 2 && std::abs(boxes[0].y - 20) <= 2) ||
                          (std::abs(boxes[1].x - 20) <= 2 && std::abs(boxes[1].y - 20) <= 2);
        CHECK(near_first);
    }
    SUBCASE("empty template bank is a configuration error") {
        CHECK_THROWS_AS(detect_cross(base, {}), ConfigError);
    }
}

TEST_CASE("detect_cross recall on embedded symbols (exact-template property)") {
    Raster symbol = draw_cross_symbol(40);
    auto bank = bank_from_symbol(symbol, 10, 20);
    ScaleRange range{0.05, 0.10};  // sides 10..20 on a 200px min dimension

    for (std::uint32_t seed = 0; seed < 25; ++seed) {
        Raster base = testutil::make_ad_banner(256, 200, 9000 + seed);
        auto embedded = embed_cross(base, symbol, seed, range);
        auto boxes = detect_cross(embedded.image, bank);
        CHECK(hits_ground_truth(boxes, embedded.box));
    }
}

TEST_CASE("embed_cross is deterministic and respects the scale rule") {
    Raster base = testutil::make_ad_banner(300, 250, 1);
    Raster symbol = draw_cross_symbol(40);

    SUBCASE("seed 42 reproduces byte-identical output") {
        auto a = embed_cross(base, symbol, 42);
        auto b = embed_cross(base, symbol, 42);
        CHECK(a.image.pixels == b.image.pixels);
        CHECK(a.box.x == b.box.x);
        CHECK(a.box.w == b.box.w);
        CHECK(encode_png(a.image) == encode_png(b.image));
    }
    SUBCASE("degenerate scale range pins the box side") {
        auto result = embed_cross(base, symbol, 7, ScaleRange{0.03, 0.03});
        CHECK(result.box.w == 8);  // llround(0.03 * 250)
        CHECK(result.box.h == 8);
    }
    SUBCASE("box stays inside the base image") {
        for (std::uint32_t seed = 0; seed < 50; ++seed) {
            auto result = embed_cross(base, symbol, seed);
            CHECK(result.box.x >= 0);
            CHECK(result.box.y >= 0);
            CHECK(result.box.x + result.box.w <= base.width);
            CHECK(result.box.y + result.box.h <= base.height);
        }
    }
    SUBCASE("symbol that cannot fit is an input error") {
        Raster tiny = Raster::make(4, 4, 3, 10);
        CHECK_THROWS_AS(embed_cross(tiny, symbol, 0, ScaleRange{2.0, 2.0}), InputError);
    }
    SUBCASE("distinct seeds vary the outputs") {
        auto a = embed_cross(base, symbol, 1);
        auto b = embed_cross(base, symbol, 2);
        bool differs = a.box.x != b.box.x || a.box.y != b.box.y || a.box.w != b.box.w;
        CHECK(differs);
    }
}

TEST_CASE("a corpus of annotated embeds is reproducible") {
    Raster symbol = draw_cross_symbol(32);
    int generated = 0;
    for (std::uint32_t seed = 0; seed < 200; ++seed) {
        Raster base = testutil::make_ad_banner(96, 80, seed);
        auto result = embed_cross(base, symbol, seed);
        auto xml = voc_annotation("img" + std::to_string(seed) + ".png", base.width, base.height,
                                  3, std::vector<GroundTruthBox>{result.box});
        CHECK(xml.find("<name>cross</name>") != std::string::npos);
        CHECK(xml.find("<xmin>" + std::to_string(result.box.x) + "</xmin>") != std::string::npos);
        CHECK(xml.find("<xmax>" + std::to_string(result.box.x + result.box.w) + "</xmax>") !=
              std::string::npos);
        ++generated;
    }
    CHECK(generated == 200);
}

TEST_CASE("close-word detection matches whole tokens") {
    SUBCASE("skip in a button caption") {
        auto verdict = detect_close_keywords({"Download Now", "skip"});
        CHECK(verdict.devious);
        CHECK(verdict.group == DeviousGroup::ClickDeceptive);
        CHECK(verdict.evidence["matched"] == std::vector<std::string>{"skip"});
    }
    SUBCASE("no texts") { CHECK(!detect_close_keywords({}).devious); }
    SUBCASE("whole-token rule: skipping does not match") {
        CHECK(!detect_close_keywords({"skipping"}).devious);
    }
    SUBCASE("Chinese close words match inside unsegmented runs") {
        CHECK(detect_close_keywords({"点击跳过广告"}).devious);
    }
    SUBCASE("case folding") { CHECK(detect_close_keywords({"CLOSE"}).devious); }
}

TEST_CASE("gambling keyword detection") {
    auto keywords = default_gambling_words();
    REQUIRE(keywords.size() == 100);

    SUBCASE("casino matches") {
        auto verdict = detect_gambling({"Welcome", "casino", "bonus"}, keywords);
        CHECK(verdict.devious);
        CHECK(verdict.group == DeviousGroup::CensoredGambling);
        auto matched = verdict.evidence["matched"].get<std::vector<std::string>>();
        CHECK(std::find(matched.begin(), matched.end(), "casino") != matched.end());
    }
    SUBCASE("benign text does not match") {
        CHECK(!detect_gambling({"weather", "today"}, keywords).devious);
    }
    SUBCASE("the GoldenFlower Chinese form matches by containment") {
        CHECK(detect_gambling({"在线炸金花，现金提现"}, keywords).devious);
    }
    SUBCASE("empty keyword list is a configuration error") {
        CHECK_THROWS_AS(detect_gambling({"casino"}, {}), ConfigError);
    }
    SUBCASE("matching is order-invariant over the token multiset") {
        auto a = detect_gambling({"win", "casino", "今晚"}, keywords);
        auto b = detect_gambling({"今晚", "win", "casino"}, keywords);
        CHECK(a.devious == b.devious);
        CHECK(a.evidence == b.evidence);
    }
}

TEST_CASE("keyword detectors agree with a token-set-intersection oracle") {
    std::vector<std::string> keyword_pool = {"casino", "poker", "jackpot", "lottery", "betting"};
    std::vector<std::string> noise_pool = {"weather", "banana", "update", "puzzle",
                                           "galaxy",  "candy",  "runner", "saga"};
    std::mt19937 rng(606);
    for (int round = 0; round < 1000; ++round) {
        std::vector<std::string> tokens;
        int n = static_cast<int>(rng() % 8);
        bool expect = false;
        for (int i = 0; i < n; ++i) {
            if (rng() % 4 == 0) {
                tokens.push_back(keyword_pool[rng() % keyword_pool.size()]);
                expect = true;
            } else {
                tokens.push_back(noise_pool[rng() % noise_pool.size()]);
            }
        }
        auto verdict = detect_gambling(tokens, keyword_pool);
        REQUIRE(verdict.devious == expect);
    }
}

TEST_CASE("censored threshold is likelihood >= 4, per category") {
    SUBCASE("porn at 5") {
        auto verdicts = judge_censored({5, 1, 1});
        REQUIRE(verdicts.size() == 1);
        CHECK(verdicts[0].group == DeviousGroup::CensoredPorn);
        CHECK(verdicts[0].evidence["likelihoods"]["porn"] == 5);
    }
    SUBCASE("all at 3 stays benign") { CHECK(judge_censored({3, 3, 3}).empty()); }
    SUBCASE("two categories at 4 both flag") {
        auto verdicts = judge_censored({4, 1, 4});
        REQUIRE(verdicts.size() == 2);
        CHECK(verdicts[0].group == DeviousGroup::CensoredPorn);
        CHECK(verdicts[1].group == DeviousGroup::CensoredMedical);
    }
    SUBCASE("out-of-range likelihood is an input error") {
        CHECK_THROWS_AS(judge_censored({0, 1, 1}), InputError);
        CHECK_THROWS_AS(judge_censored({1, 6, 1}), InputError);
    }
    SUBCASE("monotonicity: raising a likelihood never unflags") {
        for (int v = 1; v <= 4; ++v) {
            bool lower = !judge_censored({v, 1, 1}).empty();
            bool higher = !judge_censored({std::min(5, v + 1), 1, 1}).empty();
            CHECK((!lower || higher));
        }
    }
}

TEST_CASE("malicious threshold is at least three engines") {
    auto scan_with = [](int positives, int total) {
        clients::ScanResult scan;
        for (int i = 0; i < total; ++i)
            scan.engines.emplace_back("engine" + std::to_string(i), i < positives);
        return scan;
    };
    SUBCASE("44 engines positive flags the kazakh keyboard dropper") {
        auto verdict = judge_malicious(scan_with(44, 60), extract::ArtifactKind::DownloadedApp);
        CHECK(verdict.devious);
        CHECK(verdict.group == DeviousGroup::MaliciousApp);
        CHECK(verdict.evidence["positives"] == 44);
    }
    SUBCASE("two positives stay benign") {
        CHECK(!judge_malicious(scan_with(2, 60), extract::ArtifactKind::Script).devious);
    }
    SUBCASE("exactly three positives flag") {
        auto verdict = judge_malicious(scan_with(3, 60), extract::ArtifactKind::RedirectChain);
        CHECK(verdict.devious);
        CHECK(verdict.group == DeviousGroup::MaliciousLink);
    }
    SUBCASE("monotone in the engine count") {
        for (int n = 0; n < 10; ++n) {
            bool lower = judge_malicious(scan_with(n, 10), extract::ArtifactKind::Script).devious;
            bool higher =
                judge_malicious(scan_with(n + 1, 11), extract::ArtifactKind::Script).devious;
            CHECK((!lower || higher));
        }
    }
}

TEST_CASE("run_detectors routes artifacts and records failures") {
    // one image whose hash the vision mock flags, one APK the scanner flags
    Raster banner = testutil::make_ad_banner(64, 48, 3);
    auto png = encode_png(banner);
    auto apk = testutil::make_zip("AndroidManifest.xml", "<m/>");

    extract::AdArtifact image;
    image.kind = extract::ArtifactKind::Image;
    image.source_message_ids = {"m1"};
    image.payload = png;
    image.host = "ads.test";

    extract::AdArtifact app;
    app.kind = extract::ArtifactKind::DownloadedApp;
    app.source_message_ids = {"m2"};
    app.payload = apk;
    app.host = "dl.test";

    std::map<std::string, clients::VisionResult> vision_table;
    vision_table[sha256_hex(png)] = {5, 1, 1};
    std::map<std::string, clients::ScanResult> scan_table;
    clients::ScanResult scan;
    for (int i = 0; i < 10; ++i) scan.engines.emplace_back("e" + std::to_string(i), true);
    scan_table[sha256_hex(apk)] = scan;

    clients::MockVisionClient vision(vision_table);
    clients::MockScannerClient scanner(scan_table);
    clients::MockOcrClient ocr;

    DetectorContext context;
    context.vision = &vision;
    context.scanner = &scanner;
    context.ocr = &ocr;
    context.cross_templates = builtin_cross_templates();

    SUBCASE("vision verdict reaches the image, scanner verdict the app") {
        auto registry = default_registry();
        auto run = run_detectors({image, app}, registry, context);
        REQUIRE(run.findings.size() == 2);

        bool censored = false;
        for (const auto& v : run.findings[0].verdicts)
            censored |= v.group == DeviousGroup::CensoredPorn && v.devious;
        CHECK(censored);

        REQUIRE(run.findings[1].verdicts.size() == 1);
        CHECK(run.findings[1].verdicts[0].group == DeviousGroup::MaliciousApp);
    }
    SUBCASE("disabling the cross detector leaves others intact") {
        extract::AdArtifact cross_image;
        cross_image.kind = extract::ArtifactKind::Image;
        cross_image.source_message_ids = {"m3"};
        Raster pasted = banner;
        alpha_composite(pasted, draw_cross_symbol(16), 10, 10);
        cross_image.payload = encode_png(pasted);
        cross_image.host = "ads.test";
        context.cross_templates = {draw_cross_symbol(16)};

        auto full = default_registry();
        auto without = default_registry({"close-text", "gambling", "censored", "malicious"});

        auto run_full = run_detectors({cross_image}, full, context);
        auto run_without = run_detectors({cross_image}, without, context);

        bool full_has_click = false;
        for (const auto& v : run_full.findings[0].verdicts)
            full_has_click |= v.group == DeviousGroup::ClickDeceptive;
        CHECK(full_has_click);
        for (const auto& v : run_without.findings[0].verdicts)
            CHECK(v.group != DeviousGroup::ClickDeceptive);
    }
    SUBCASE("a failing detector is recorded without aborting the run") {
        extract::AdArtifact broken;
        broken.kind = extract::ArtifactKind::Image;
        broken.source_message_ids = {"m4"};
        broken.payload = {'n', 'o', 't', ' ', 'a', 'n', ' ', 'i', 'm', 'g'};
        broken.host = "ads.test";
        auto registry = default_registry();
        auto run = run_detectors({broken, app}, registry, context);
        REQUIRE(run.findings.size() == 2);
        CHECK(!run.findings[0].errors.empty());  // cross plugin cannot decode
        CHECK(run.findings[1].verdicts.size() == 1);
        CHECK(run.any_errors());
    }
    SUBCASE("an empty registry is a configuration error") {
        Registry empty;
        CHECK_THROWS_AS(run_detectors({image}, empty, context), ConfigError);
    }
}

TEST_CASE("raster codecs round-trip") {
    Raster image = testutil::make_ad_banner(33, 21, 17);
    auto png = encode_png(image);
    CHECK(sniff_image(png));
    Raster decoded = decode_image(png);
    CHECK(decoded == image);

    auto pnm = encode_pnm(image);
    Raster decoded_pnm = decode_image(pnm);
    CHECK(decoded_pnm == image);

    Raster rgba = draw_cross_symbol(20);
    Raster rgba_decoded = decode_image(encode_png(rgba));
    CHECK(rgba_decoded == rgba);

    std::vector<std::uint8_t> jpeg_magic = {0xFF, 0xD8, 0xFF, 0xE0, 0x00};
    CHECK(sniff_image(jpeg_magic));
    CHECK_THROWS_AS(decode_image(jpeg_magic), InputError);
}
