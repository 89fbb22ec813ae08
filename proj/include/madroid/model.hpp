#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace madroid::model {

// Ordered name/value pairs; duplicates allowed, order preserved.
using HeaderList = std::vector<std::pair<std::string, std::string>>;

// A message body is either carried inline or stored as a blob file next to
// the capture (relative reference). Large bodies use the blob form.
struct Body {
    std::vector<std::uint8_t> inline_bytes;
    std::string ref;
    bool is_ref = false;

    static Body inline_of(std::vector<std::uint8_t> bytes) {
        Body b;
        b.inline_bytes = std::move(bytes);
        return b;
    }
    static Body ref_of(std::string path) {
        Body b;
        b.ref = std::move(path);
        b.is_ref = true;
        return b;
    }
    bool operator==(const Body&) const = default;
};

// One recorded request/response pair.
struct HttpMessage {
    std::string id;
    std::string session_id;
    std::int64_t ts_ms = 0;
    std::string method;
    std::string url;
    HeaderList request_headers;
    HeaderList response_headers;
    std::optional<int> status;
    std::optional<std::string> mime;
    std::optional<Body> body;
    std::optional<std::string> referer;

    // First response header with the given name, case-insensitive.
    std::optional<std::string> response_header(std::string_view name) const;
    bool operator==(const HttpMessage&) const = default;
};

struct CaptureLog {
    std::string app_id;
    std::vector<HttpMessage> messages;  // sorted by (ts_ms, id)
    std::size_t skipped_lines = 0;

    const HttpMessage* find(std::string_view id) const;
    bool operator==(const CaptureLog& other) const {
        return app_id == other.app_id && messages == other.messages;
    }
};

// One hooked HTTP call: the URL plus the execution stack that issued it.
struct HookRecord {
    std::int64_t ts_ms = 0;
    std::string url;
    std::vector<std::string> stack;  // fully-qualified method frames, innermost first
    std::string thread;
    bool operator==(const HookRecord&) const = default;
};

struct HookLog {
    std::vector<HookRecord> records;  // file order
    std::size_t skipped_lines = 0;
};

struct ViewNode {
    std::string id;
    std::string class_name;
    std::array<std::int64_t, 4> bounds{0, 0, 0, 0};  // x, y, w, h in pixels
    bool clickable = false;
    std::optional<std::string> text;
    std::vector<ViewNode> children;

    bool is_leaf() const { return children.empty(); }
};

enum class PageRole { Main, Exit, Other };

std::string_view page_role_name(PageRole role);
PageRole page_role_from_name(std::string_view name);  // unknown -> Other

struct ViewTree {
    std::string app_id;
    PageRole page_role = PageRole::Other;
    ViewNode root;

    const ViewNode* find(std::string_view node_id) const;
    std::size_t node_count() const;
};

// Parses one JSON object per line. Malformed lines are skipped and counted;
// skipped + parsed always equals the total line count.
CaptureLog parse_capture(std::istream& stream);
CaptureLog parse_capture_file(const std::filesystem::path& path);
void serialize_capture(const CaptureLog& capture, std::ostream& out);

HookLog parse_hook_log(std::istream& stream);
HookLog parse_hook_log_file(const std::filesystem::path& path);
void serialize_hook_log(const HookLog& log, std::ostream& out);

ViewTree parse_view_tree(std::istream& stream);
ViewTree parse_view_tree_text(std::string_view text);
ViewTree parse_view_tree_file(const std::filesystem::path& path);
std::string serialize_view_tree(const ViewTree& tree);

// Resolves message bodies: inline bytes directly, blob references against
// base_dir. Returns nullopt when the body is absent or the blob is missing
// (body-less messages must be tolerated downstream).
class BlobStore {
public:
    BlobStore() = default;
    explicit BlobStore(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}
    std::optional<std::vector<std::uint8_t>> resolve(const std::optional<Body>& body) const;

private:
    std::optional<std::filesystem::path> base_dir_;
};

}  // namespace madroid::model
