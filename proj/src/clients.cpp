#include "madroid/clients.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include <httplib.h>

#include "madroid/errors.hpp"
#include "madroid/util.hpp"

namespace madroid::clients {

using nlohmann::json;

int ScanResult::positives() const {
    int n = 0;
    for (const auto& [_, flagged] : engines) n += flagged ? 1 : 0;
    return n;
}

std::vector<std::string> ScanResult::positive_engines() const {
    std::vector<std::string> out;
    for (const auto& [name, flagged] : engines)
        if (flagged) out.push_back(name);
    return out;
}

std::vector<std::string> OcrResult::texts() const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (const auto& token : tokens) out.push_back(token.text);
    return out;
}

namespace detail {

template <typename Result>
Result CachingBase<Result>::run(std::span<const std::uint8_t> payload) {
    if (payload.empty()) throw InputError("payload must be non-empty");
    std::string hash = sha256_hex(payload);
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(hash); it != cache_.end()) return it->second;
    }
    semaphore_.acquire();
    Result result;
    try {
        result = transport(hash, payload);
    } catch (...) {
        semaphore_.release();
        throw;
    }
    semaphore_.release();
    std::lock_guard lock(mutex_);
    ++transport_calls_;
    cache_.emplace(hash, result);
    return result;
}

template <typename Result>
std::size_t CachingBase<Result>::transport_calls() const {
    std::lock_guard lock(mutex_);
    return transport_calls_;
}

template class CachingBase<ScanResult>;
template class CachingBase<VisionResult>;
template class CachingBase<OcrResult>;

}  // namespace detail

ScanResult ScannerClient::scan(std::span<const std::uint8_t> payload) {
    ScanResult result = run(payload);
    result.artifact_hash = sha256_hex(payload);
    return result;
}

VisionResult VisionClient::classify(std::span<const std::uint8_t> image) {
    return run(image);
}

OcrResult OcrClient::extract_text(std::span<const std::uint8_t> image) {
    return run(image);
}

MockScannerClient::MockScannerClient(std::map<std::string, ScanResult> table)
    : table_(std::move(table)) {}

ScanResult MockScannerClient::transport(const std::string& hash, std::span<const std::uint8_t>) {
    if (auto it = table_.find(hash); it != table_.end()) return it->second;
    return {};  // unknown content: no engines, zero positives
}

MockVisionClient::MockVisionClient(std::map<std::string, VisionResult> table)
    : table_(std::move(table)) {}

VisionResult MockVisionClient::transport(const std::string& hash, std::span<const std::uint8_t>) {
    if (auto it = table_.find(hash); it != table_.end()) return it->second;
    return {};  // very unlikely in every category
}

MockOcrClient::MockOcrClient(std::map<std::string, OcrResult> table) : table_(std::move(table)) {}

OcrResult MockOcrClient::transport(const std::string& hash, std::span<const std::uint8_t>) {
    if (auto it = table_.find(hash); it != table_.end()) return it->second;
    return {};
}

namespace {

int validated_likelihood(const json& doc, const char* key) {
    int value = doc.value(key, 1);
    if (value < 1 || value > 5)
        throw ValidationError(std::string("likelihood for ") + key + " outside 1..5: " +
                              std::to_string(value));
    return value;
}

ScanResult scan_result_from_json(const json& doc) {
    ScanResult result;
    for (const auto& engine : doc.value("engines", json::array())) {
        result.engines.emplace_back(engine.at("name").get<std::string>(),
                                    engine.value("positive", false));
    }
    result.scanned_at = doc.value("scanned_at", 0);
    return result;
}

VisionResult vision_result_from_json(const json& doc) {
    VisionResult result;
    result.porn = validated_likelihood(doc, "porn");
    result.violence = validated_likelihood(doc, "violence");
    result.medical = validated_likelihood(doc, "medical");
    return result;
}

OcrResult ocr_result_from_json(const json& doc) {
    OcrResult result;
    for (const auto& token : doc.value("tokens", json::array())) {
        OcrToken t;
        if (token.is_string()) {
            t.text = token.get<std::string>();
        } else {
            t.text = token.at("text").get<std::string>();
            if (auto it = token.find("box"); it != token.end() && !it->is_null()) {
                t.box = std::array<int, 4>{it->at(0).get<int>(), it->at(1).get<int>(),
                                           it->at(2).get<int>(), it->at(3).get<int>()};
            }
        }
        result.tokens.push_back(std::move(t));
    }
    return result;
}

// POSTs with retry on transport failures and 5xx; 429 surfaces the
// Retry-After hint without consuming the retry budget.
json post_with_retry(const HttpEndpoint& endpoint, const std::string& path,
                     std::span<const std::uint8_t> payload, const char* content_type) {
    int delay_ms = endpoint.retry.initial_delay_ms;
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < endpoint.retry.attempts; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms = static_cast<int>(delay_ms * endpoint.retry.multiplier);
        }
        httplib::Client client(endpoint.base_url);
        client.set_connection_timeout(10);
        client.set_read_timeout(30);
        httplib::Headers headers;
        if (!endpoint.api_key.empty())
            headers.emplace("Authorization", "Bearer " + endpoint.api_key);
        auto response = client.Post(path, headers,
                                    reinterpret_cast<const char*>(payload.data()),
                                    payload.size(), content_type);
        if (!response) {
            last_error = "transport failure: " + httplib::to_string(response.error());
            continue;
        }
        if (response->status == 429) {
            int hint_ms = 1000;
            if (response->has_header("Retry-After"))
                hint_ms = std::atoi(response->get_header_value("Retry-After").c_str()) * 1000;
            throw RateLimitError("service rate-limited: " + endpoint.base_url + path, hint_ms);
        }
        if (response->status >= 500) {
            last_error = "server error " + std::to_string(response->status);
            continue;
        }
        if (response->status != 200)
            throw ServiceError("unexpected status " + std::to_string(response->status) +
                               " from " + endpoint.base_url + path);
        try {
            return json::parse(response->body);
        } catch (const json::exception& e) {
            throw ValidationError(std::string("malformed service response: ") + e.what());
        }
    }
    throw ServiceError("service unavailable after " + std::to_string(endpoint.retry.attempts) +
                       " attempts (" + endpoint.base_url + path + "): " + last_error);
}

}  // namespace

HttpScannerClient::HttpScannerClient(HttpEndpoint endpoint)
    : ScannerClient(endpoint.max_concurrency), endpoint_(std::move(endpoint)) {}

ScanResult HttpScannerClient::transport(const std::string&, std::span<const std::uint8_t> payload) {
    return scan_result_from_json(
        post_with_retry(endpoint_, "/v1/scan", payload, "application/octet-stream"));
}

HttpVisionClient::HttpVisionClient(HttpEndpoint endpoint)
    : VisionClient(endpoint.max_concurrency), endpoint_(std::move(endpoint)) {}

VisionResult HttpVisionClient::transport(const std::string&, std::span<const std::uint8_t> image) {
    return vision_result_from_json(
        post_with_retry(endpoint_, "/v1/classify", image, "application/octet-stream"));
}

HttpOcrClient::HttpOcrClient(HttpEndpoint endpoint)
    : OcrClient(endpoint.max_concurrency), endpoint_(std::move(endpoint)) {}

OcrResult HttpOcrClient::transport(const std::string&, std::span<const std::uint8_t> image) {
    return ocr_result_from_json(
        post_with_retry(endpoint_, "/v1/ocr", image, "application/octet-stream"));
}

MockFixtures MockFixtures::from_json_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("mock fixture file is not valid JSON: ") + e.what());
    }
    MockFixtures fixtures;
    const json scanner_table = doc.value("scanner", json::object());
    const json vision_table = doc.value("vision", json::object());
    const json ocr_table = doc.value("ocr", json::object());
    for (const auto& [hash, entry] : scanner_table.items())
        fixtures.scanner.emplace(hash, scan_result_from_json(entry));
    for (const auto& [hash, entry] : vision_table.items())
        fixtures.vision.emplace(hash, vision_result_from_json(entry));
    for (const auto& [hash, entry] : ocr_table.items())
        fixtures.ocr.emplace(hash, ocr_result_from_json(entry));
    return fixtures;
}

MockFixtures MockFixtures::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open mock fixture file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

ClientBundle make_clients(const ClientConfig& config) {
    MockFixtures fixtures;
    if (config.mock_fixtures) fixtures = MockFixtures::from_file(*config.mock_fixtures);

    auto key_of = [](const char* name) {
        const char* value = std::getenv(name);
        return value ? std::string(value) : std::string();
    };
    auto warn_mock = [&](const char* service, const char* variable) {
        if (!config.quiet)
            std::cerr << "madroid: " << service << " running in mock mode (" << variable
                      << " not set or endpoint missing)\n";
    };

    ClientBundle bundle;
    if (std::string key = key_of("SCANNER_API_KEY"); !key.empty() && !config.scanner_url.empty()) {
        bundle.scanner = std::make_shared<HttpScannerClient>(
            HttpEndpoint{config.scanner_url, key, config.retry, config.max_concurrency});
    } else {
        warn_mock("scanner", "SCANNER_API_KEY");
        bundle.scanner = std::make_shared<MockScannerClient>(fixtures.scanner);
    }
    if (std::string key = key_of("VISION_API_KEY"); !key.empty() && !config.vision_url.empty()) {
        bundle.vision = std::make_shared<HttpVisionClient>(
            HttpEndpoint{config.vision_url, key, config.retry, config.max_concurrency});
    } else {
        warn_mock("vision", "VISION_API_KEY");
        bundle.vision = std::make_shared<MockVisionClient>(fixtures.vision);
    }
    if (std::string key = key_of("OCR_API_KEY"); !key.empty() && !config.ocr_url.empty()) {
        bundle.ocr = std::make_shared<HttpOcrClient>(
            HttpEndpoint{config.ocr_url, key, config.retry, config.max_concurrency});
    } else {
        warn_mock("ocr", "OCR_API_KEY");
        bundle.ocr = std::make_shared<MockOcrClient>(fixtures.ocr);
    }
    return bundle;
}

}  // namespace madroid::clients
