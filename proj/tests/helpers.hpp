#pragma once

// Shared fixture builders for the test suites.

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <zlib.h>

#include "madroid/model.hpp"
#include "madroid/raster.hpp"
#include "madroid/util.hpp"

namespace testutil {

inline nlohmann::json capture_line(const std::string& id, const std::string& session,
                                   std::int64_t ts, const std::string& method,
                                   const std::string& url) {
    nlohmann::json obj;
    obj["id"] = id;
    obj["session_id"] = session;
    obj["ts_ms"] = ts;
    obj["method"] = method;
    obj["url"] = url;
    return obj;
}

inline void set_body(nlohmann::json& line, const std::string& body) {
    std::vector<std::uint8_t> bytes(body.begin(), body.end());
    line["body_b64"] = madroid::base64_encode(bytes);
}

inline void set_body(nlohmann::json& line, const std::vector<std::uint8_t>& body) {
    line["body_b64"] = madroid::base64_encode(body);
}

// The simplified request listing harvested from com.bbsoft.InternetPolyglot:
// three ad-domain messages, one analytics message, and a three-hop click
// chain ending at a VPN-app landing page.
inline std::string table1_capture_jsonl() {
    std::ostringstream out;
    {
        auto l = capture_line("m1", "s-load", 1000, "GET",
                              "http://info.static.startappservice.com/1.4/getadsmetadata");
        l["status"] = 200;
        l["mime"] = "application/json";
        set_body(l, std::string("{\"meta\":\"v1\"}"));
        out << l.dump() << "\n";
    }
    {
        auto l = capture_line("m2", "s-analytics", 1100, "POST", "http://data.flurry.com/aap.do");
        l["status"] = 200;
        out << l.dump() << "\n";
    }
    {
        auto l = capture_line("m3", "s-load", 1200, "GET",
                              "http://req.startappservice.com/1.4/gethtmlad");
        l["status"] = 200;
        l["mime"] = "text/html";
        set_body(l, std::string("<html><body>"
                                "<a href=\"http://cl.untildogtop.com/t/clk\">Install Now</a>"
                                "</body></html>"));
        out << l.dump() << "\n";
    }
    {
        auto l = capture_line("m4", "s-load", 1300, "GET",
                              "http://imp.startappservice.com/tracking/adImpression");
        l["status"] = 204;
        out << l.dump() << "\n";
    }
    {
        auto l = capture_line("m5", "s-click", 2000, "GET", "http://cl.untildogtop.com/t/clk");
        l["status"] = 302;
        l["resp_headers"] = nlohmann::json::array(
            {nlohmann::json::array({"Location", "http://my1trk.com/redirect/action"})});
        out << l.dump() << "\n";
    }
    {
        auto l = capture_line("m6", "s-click", 2100, "GET", "http://my1trk.com/redirect/action");
        l["status"] = 302;
        l["resp_headers"] = nlohmann::json::array(
            {nlohmann::json::array({"Location", "http://www.spyoff.com/geo"})});
        out << l.dump() << "\n";
    }
    {
        auto l = capture_line("m7", "s-click", 2200, "GET", "http://www.spyoff.com/geo");
        l["status"] = 200;
        l["mime"] = "text/html";
        set_body(l, std::string("<html><body>SpyOFF VPN</body></html>"));
        out << l.dump() << "\n";
    }
    return out.str();
}

inline std::string table1_hooks_jsonl() {
    std::ostringstream out;
    auto line = [&](std::int64_t ts, const std::string& url,
                    const std::vector<std::string>& stack) {
        nlohmann::json obj;
        obj["ts_ms"] = ts;
        obj["url"] = url;
        obj["thread"] = "main";
        obj["stack"] = stack;
        out << obj.dump() << "\n";
    };
    line(990, "http://info.static.startappservice.com/1.4/getadsmetadata",
         {"com.startapp.sdk.net.Http.send", "com.bbsoft.app.Main.onCreate"});
    line(1090, "http://data.flurry.com/aap.do",
         {"com.flurry.sdk.Agent.report", "com.bbsoft.app.Main.onCreate"});
    line(1190, "http://req.startappservice.com/1.4/gethtmlad",
         {"com.startapp.sdk.net.Http.send", "com.bbsoft.app.Main.onResume"});
    return out.str();
}

// One-entry stored ZIP with a correct central directory, the way a standard
// archiver lays it out.
inline std::vector<std::uint8_t> make_zip(const std::string& entry_name,
                                          const std::string& content) {
    std::vector<std::uint8_t> out;
    auto u16 = [&](std::uint16_t v) {
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
    };
    auto u32 = [&](std::uint32_t v) {
        out.push_back(static_cast<std::uint8_t>(v & 0xFF));
        out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
        out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
        out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
    };
    std::uint32_t crc = crc32(0L, reinterpret_cast<const Bytef*>(content.data()), content.size());
    std::uint32_t size = static_cast<std::uint32_t>(content.size());
    std::uint16_t name_len = static_cast<std::uint16_t>(entry_name.size());

    // local file header
    std::uint32_t local_offset = 0;
    u32(0x04034b50);
    u16(20);        // version needed
    u16(0);         // flags
    u16(0);         // method: stored
    u16(0);         // mod time
    u16(0);         // mod date
    u32(crc);
    u32(size);
    u32(size);
    u16(name_len);
    u16(0);  // extra len
    out.insert(out.end(), entry_name.begin(), entry_name.end());
    out.insert(out.end(), content.begin(), content.end());

    // central directory
    std::uint32_t cd_offset = static_cast<std::uint32_t>(out.size());
    u32(0x02014b50);
    u16(20);
    u16(20);
    u16(0);
    u16(0);
    u16(0);
    u16(0);
    u32(crc);
    u32(size);
    u32(size);
    u16(name_len);
    u16(0);
    u16(0);
    u16(0);
    u16(0);
    u32(0);
    u32(local_offset);
    out.insert(out.end(), entry_name.begin(), entry_name.end());
    std::uint32_t cd_size = static_cast<std::uint32_t>(out.size()) - cd_offset;

    // end of central directory
    u32(0x06054b50);
    u16(0);
    u16(0);
    u16(1);
    u16(1);
    u32(cd_size);
    u32(cd_offset);
    u16(0);
    return out;
}

// Procedural banner-style raster: gradient background, a few rectangles and
// horizontal "text" bars. Deterministic in the seed; never contains a cross.
inline madroid::Raster make_ad_banner(int width, int height, std::uint32_t seed) {
    std::mt19937 rng(seed);
    auto pick = [&](int lo, int hi) {
        return lo + static_cast<int>(rng() % static_cast<std::uint32_t>(hi - lo + 1));
    };
    madroid::Raster image = madroid::Raster::make(width, height, 3);
    int base_r = pick(40, 200), base_g = pick(40, 200), base_b = pick(40, 200);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            int shade = (x * 40) / width + (y * 30) / height;
            image.at(x, y, 0) = static_cast<std::uint8_t>(std::min(255, base_r + shade));
            image.at(x, y, 1) = static_cast<std::uint8_t>(std::min(255, base_g + shade));
            image.at(x, y, 2) = static_cast<std::uint8_t>(std::min(255, base_b + shade));
        }
    }
    int rects = pick(2, 4);
    for (int i = 0; i < rects; ++i) {
        int rw = pick(width / 6, width / 3), rh = pick(height / 6, height / 3);
        int rx = pick(0, width - rw), ry = pick(0, height - rh);
        std::uint8_t r = static_cast<std::uint8_t>(pick(0, 255));
        std::uint8_t g = static_cast<std::uint8_t>(pick(0, 255));
        std::uint8_t b = static_cast<std::uint8_t>(pick(0, 255));
        for (int y = ry; y < ry + rh; ++y)
            for (int x = rx; x < rx + rw; ++x) {
                image.at(x, y, 0) = r;
                image.at(x, y, 1) = g;
                image.at(x, y, 2) = b;
            }
    }
    int bars = pick(2, 5);
    for (int i = 0; i < bars; ++i) {
        int bw = pick(width / 4, (3 * width) / 4), bh = std::max(2, height / 40);
        int bx = pick(0, width - bw), by = pick(0, height - bh);
        std::uint8_t shade = static_cast<std::uint8_t>(pick(0, 60));
        for (int y = by; y < by + bh; ++y)
            for (int x = bx; x < bx + bw; ++x)
                for (int c = 0; c < 3; ++c) image.at(x, y, c) = shade;
    }
    return image;
}

}  // namespace testutil
