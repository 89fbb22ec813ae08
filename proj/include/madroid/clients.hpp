#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <span>
#include <string>
#include <vector>

namespace madroid::clients {

struct ScanResult {
    std::string artifact_hash;
    std::vector<std::pair<std::string, bool>> engines;  // (engine name, flagged)
    std::int64_t scanned_at = 0;

    int positives() const;
    std::vector<std::string> positive_engines() const;
};

// Likelihoods in 1..5 (very unlikely .. very likely) per censored category.
struct VisionResult {
    int porn = 1;
    int violence = 1;
    int medical = 1;
};

struct OcrToken {
    std::string text;
    std::optional<std::array<int, 4>> box;  // x, y, w, h
};

struct OcrResult {
    std::vector<OcrToken> tokens;
    std::vector<std::string> texts() const;
};

struct RetryPolicy {
    int attempts = 3;
    int initial_delay_ms = 1000;
    double multiplier = 2.0;
};

// Shared client behavior: results cached by content hash for the process
// lifetime, concurrent requests capped per service.
namespace detail {
template <typename Result>
class CachingBase {
public:
    explicit CachingBase(int max_concurrency = 4) : semaphore_(max_concurrency) {}
    virtual ~CachingBase() = default;

    Result run(std::span<const std::uint8_t> payload);
    std::size_t transport_calls() const;

protected:
    virtual Result transport(const std::string& hash, std::span<const std::uint8_t> payload) = 0;

private:
    mutable std::mutex mutex_;
    std::map<std::string, Result> cache_;
    std::counting_semaphore<> semaphore_;
    std::size_t transport_calls_ = 0;
};
}  // namespace detail

class ScannerClient : public detail::CachingBase<ScanResult> {
public:
    using CachingBase::CachingBase;
    ScanResult scan(std::span<const std::uint8_t> payload);
};

class VisionClient : public detail::CachingBase<VisionResult> {
public:
    using CachingBase::CachingBase;
    VisionResult classify(std::span<const std::uint8_t> image);
};

class OcrClient : public detail::CachingBase<OcrResult> {
public:
    using CachingBase::CachingBase;
    OcrResult extract_text(std::span<const std::uint8_t> image);
};

// Canned responses keyed by content hash, loaded from the mock fixture file:
// {"scanner": {hash: {...}}, "vision": {hash: {...}}, "ocr": {hash: {...}}}.
struct MockFixtures {
    std::map<std::string, ScanResult> scanner;
    std::map<std::string, VisionResult> vision;
    std::map<std::string, OcrResult> ocr;

    static MockFixtures from_json_text(std::string_view text);
    static MockFixtures from_file(const std::filesystem::path& path);
};

class MockScannerClient : public ScannerClient {
public:
    explicit MockScannerClient(std::map<std::string, ScanResult> table = {});

protected:
    ScanResult transport(const std::string& hash, std::span<const std::uint8_t>) override;

private:
    std::map<std::string, ScanResult> table_;
};

class MockVisionClient : public VisionClient {
public:
    explicit MockVisionClient(std::map<std::string, VisionResult> table = {});

protected:
    VisionResult transport(const std::string& hash, std::span<const std::uint8_t>) override;

private:
    std::map<std::string, VisionResult> table_;
};

class MockOcrClient : public OcrClient {
public:
    explicit MockOcrClient(std::map<std::string, OcrResult> table = {});

protected:
    OcrResult transport(const std::string& hash, std::span<const std::uint8_t>) override;

private:
    std::map<std::string, OcrResult> table_;
};

struct HttpEndpoint {
    std::string base_url;  // e.g. https://scanner.example
    std::string api_key;   // sent as a bearer token
    RetryPolicy retry;
    int max_concurrency = 4;
};

// POST /v1/scan with the raw payload; response:
//   {"engines": [{"name": "...", "positive": true}, ...]}
class HttpScannerClient : public ScannerClient {
public:
    explicit HttpScannerClient(HttpEndpoint endpoint);

protected:
    ScanResult transport(const std::string& hash, std::span<const std::uint8_t> payload) override;

private:
    HttpEndpoint endpoint_;
};

// POST /v1/classify; response {"porn": n, "violence": n, "medical": n},
// values validated into 1..5.
class HttpVisionClient : public VisionClient {
public:
    explicit HttpVisionClient(HttpEndpoint endpoint);

protected:
    VisionResult transport(const std::string& hash, std::span<const std::uint8_t> image) override;

private:
    HttpEndpoint endpoint_;
};

// POST /v1/ocr; response {"tokens": [{"text": "...", "box": [x,y,w,h]}]}.
class HttpOcrClient : public OcrClient {
public:
    explicit HttpOcrClient(HttpEndpoint endpoint);

protected:
    OcrResult transport(const std::string& hash, std::span<const std::uint8_t> image) override;

private:
    HttpEndpoint endpoint_;
};

struct ClientBundle {
    std::shared_ptr<ScannerClient> scanner;
    std::shared_ptr<VisionClient> vision;
    std::shared_ptr<OcrClient> ocr;
};

struct ClientConfig {
    std::string scanner_url;
    std::string vision_url;
    std::string ocr_url;
    std::optional<std::filesystem::path> mock_fixtures;
    RetryPolicy retry;
    int max_concurrency = 4;
    bool quiet = false;  // suppress the mock-mode warning
};

// Builds real clients where both the endpoint URL and the API-key variable
// (SCANNER_API_KEY / VISION_API_KEY / OCR_API_KEY) are present; otherwise
// falls back to fixture-driven mocks with a warning.
ClientBundle make_clients(const ClientConfig& config);

}  // namespace madroid::clients
