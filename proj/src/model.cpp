#include "madroid/model.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "madroid/errors.hpp"
#include "madroid/util.hpp"

namespace madroid::model {

using nlohmann::json;

std::optional<std::string> HttpMessage::response_header(std::string_view name) const {
    for (const auto& [key, value] : response_headers) {
        if (key.size() == name.size() && starts_with_ci(key, name)) return value;
    }
    return std::nullopt;
}

const HttpMessage* CaptureLog::find(std::string_view id) const {
    for (const auto& m : messages)
        if (m.id == id) return &m;
    return nullptr;
}

std::string_view page_role_name(PageRole role) {
    switch (role) {
        case PageRole::Main: return "main";
        case PageRole::Exit: return "exit";
        case PageRole::Other: return "other";
    }
    return "other";
}

PageRole page_role_from_name(std::string_view name) {
    if (name == "main") return PageRole::Main;
    if (name == "exit") return PageRole::Exit;
    return PageRole::Other;
}

namespace {

HeaderList parse_headers(const json& value) {
    HeaderList headers;
    if (value.is_array()) {
        for (const auto& entry : value) {
            if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string() ||
                !entry[1].is_string())
                throw InputError("bad header entry");
            headers.emplace_back(entry[0].get<std::string>(), entry[1].get<std::string>());
        }
    } else if (value.is_object()) {
        for (const auto& [key, v] : value.items()) {
            if (!v.is_string()) throw InputError("bad header value");
            headers.emplace_back(key, v.get<std::string>());
        }
    } else {
        throw InputError("headers must be an array of pairs or an object");
    }
    return headers;
}

json headers_to_json(const HeaderList& headers) {
    json out = json::array();
    for (const auto& [key, value] : headers) out.push_back(json::array({key, value}));
    return out;
}

std::optional<std::string> optional_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw InputError(std::string("field ") + key + " must be a string");
    return it->get<std::string>();
}

HttpMessage parse_capture_line(const std::string& line) {
    json obj = json::parse(line);
    if (!obj.is_object()) throw InputError("record is not an object");

    HttpMessage msg;
    msg.id = obj.at("id").get<std::string>();
    if (msg.id.empty()) throw InputError("empty id");
    msg.session_id = obj.value("session_id", std::string());
    msg.ts_ms = obj.at("ts_ms").get<std::int64_t>();
    if (msg.ts_ms <= 0) throw InputError("timestamp must be positive");
    msg.method = obj.at("method").get<std::string>();

    msg.url = obj.at("url").get<std::string>();
    auto url = parse_url(msg.url);
    if (!url || url->host.empty()) throw InputError("url must be absolute with a host");

    if (auto it = obj.find("status"); it != obj.end() && !it->is_null()) {
        int status = it->get<int>();
        if (status < 100 || status > 599) throw InputError("status out of range");
        msg.status = status;
    }
    msg.mime = optional_string(obj, "mime");
    msg.referer = optional_string(obj, "referer");

    if (auto it = obj.find("req_headers"); it != obj.end() && !it->is_null())
        msg.request_headers = parse_headers(*it);
    if (auto it = obj.find("resp_headers"); it != obj.end() && !it->is_null())
        msg.response_headers = parse_headers(*it);

    bool has_b64 = obj.contains("body_b64") && !obj["body_b64"].is_null();
    bool has_ref = obj.contains("body_ref") && !obj["body_ref"].is_null();
    if (has_b64 && has_ref) throw InputError("body_b64 and body_ref are exclusive");
    if (has_b64) {
        auto bytes = base64_decode(obj["body_b64"].get<std::string>());
        if (!bytes) throw InputError("invalid base64 body");
        msg.body = Body::inline_of(std::move(*bytes));
    } else if (has_ref) {
        msg.body = Body::ref_of(obj["body_ref"].get<std::string>());
    }
    return msg;
}

}  // namespace

CaptureLog parse_capture(std::istream& stream) {
    if (!stream) throw InputError("capture stream is not readable");
    CaptureLog capture;
    std::set<std::string> seen_ids;
    std::string line;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        try {
            HttpMessage msg = parse_capture_line(line);
            if (!seen_ids.insert(msg.id).second) throw InputError("duplicate id");
            capture.messages.push_back(std::move(msg));
        } catch (const std::exception&) {
            ++capture.skipped_lines;
        }
    }
    if (stream.bad()) throw InputError("capture stream failed while reading");
    if (capture.messages.empty()) throw InputError("empty capture: no parseable records");
    std::sort(capture.messages.begin(), capture.messages.end(),
              [](const HttpMessage& a, const HttpMessage& b) {
                  return std::tie(a.ts_ms, a.id) < std::tie(b.ts_ms, b.id);
              });
    return capture;
}

CaptureLog parse_capture_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open capture file: " + path.string());
    return parse_capture(in);
}

void serialize_capture(const CaptureLog& capture, std::ostream& out) {
    for (const auto& msg : capture.messages) {
        json obj;
        obj["id"] = msg.id;
        obj["session_id"] = msg.session_id;
        obj["ts_ms"] = msg.ts_ms;
        obj["method"] = msg.method;
        obj["url"] = msg.url;
        if (msg.status) obj["status"] = *msg.status;
        if (msg.mime) obj["mime"] = *msg.mime;
        if (msg.referer) obj["referer"] = *msg.referer;
        obj["req_headers"] = headers_to_json(msg.request_headers);
        obj["resp_headers"] = headers_to_json(msg.response_headers);
        if (msg.body) {
            if (msg.body->is_ref)
                obj["body_ref"] = msg.body->ref;
            else
                obj["body_b64"] = base64_encode(msg.body->inline_bytes);
        }
        out << obj.dump() << '\n';
    }
}

HookLog parse_hook_log(std::istream& stream) {
    if (!stream) throw InputError("hook stream is not readable");
    HookLog log;
    std::string line;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        try {
            json obj = json::parse(line);
            HookRecord rec;
            rec.ts_ms = obj.at("ts_ms").get<std::int64_t>();
            rec.url = obj.at("url").get<std::string>();
            auto url = parse_url(rec.url);
            if (!url || url->host.empty()) throw InputError("url must have a host");
            rec.thread = obj.value("thread", std::string());
            for (const auto& frame : obj.at("stack"))
                rec.stack.push_back(frame.get<std::string>());
            if (rec.stack.empty()) throw InputError("empty stack");
            log.records.push_back(std::move(rec));
        } catch (const std::exception&) {
            ++log.skipped_lines;
        }
    }
    if (stream.bad()) throw InputError("hook stream failed while reading");
    return log;
}

HookLog parse_hook_log_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open hook log: " + path.string());
    return parse_hook_log(in);
}

void serialize_hook_log(const HookLog& log, std::ostream& out) {
    for (const auto& rec : log.records) {
        json obj;
        obj["ts_ms"] = rec.ts_ms;
        obj["url"] = rec.url;
        obj["thread"] = rec.thread;
        obj["stack"] = rec.stack;
        out << obj.dump() << '\n';
    }
}

namespace {

constexpr std::size_t kMaxViewTreeDepth = 10'000;

ViewNode parse_view_node(const json& obj, std::set<std::string>& ids, std::size_t depth) {
    if (depth > kMaxViewTreeDepth)
        throw StructureError("view tree nesting exceeds depth limit (cyclic dump?)");
    if (!obj.is_object()) throw StructureError("node must be an object");

    ViewNode node;
    node.id = obj.at("id").get<std::string>();
    if (!ids.insert(node.id).second) throw StructureError("duplicate node id: " + node.id);
    node.class_name = obj.at("class").get<std::string>();
    const auto& bounds = obj.at("bounds");
    if (!bounds.is_array() || bounds.size() != 4) throw StructureError("bounds must be [x,y,w,h]");
    for (std::size_t i = 0; i < 4; ++i) {
        node.bounds[i] = bounds[i].get<std::int64_t>();
        if (node.bounds[i] < 0) throw StructureError("negative bound");
    }
    node.clickable = obj.value("clickable", false);
    if (auto it = obj.find("text"); it != obj.end() && !it->is_null())
        node.text = it->get<std::string>();
    if (auto it = obj.find("children"); it != obj.end() && !it->is_null()) {
        for (const auto& child : *it)
            node.children.push_back(parse_view_node(child, ids, depth + 1));
    }
    return node;
}

json view_node_to_json(const ViewNode& node) {
    json obj;
    obj["id"] = node.id;
    obj["class"] = node.class_name;
    obj["bounds"] = node.bounds;
    obj["clickable"] = node.clickable;
    if (node.text) obj["text"] = *node.text;
    json children = json::array();
    for (const auto& child : node.children) children.push_back(view_node_to_json(child));
    obj["children"] = children;
    return obj;
}

const ViewNode* find_node(const ViewNode& node, std::string_view id) {
    if (node.id == id) return &node;
    for (const auto& child : node.children)
        if (const ViewNode* hit = find_node(child, id)) return hit;
    return nullptr;
}

std::size_t count_nodes(const ViewNode& node) {
    std::size_t n = 1;
    for (const auto& child : node.children) n += count_nodes(child);
    return n;
}

}  // namespace

const ViewNode* ViewTree::find(std::string_view node_id) const {
    return find_node(root, node_id);
}

std::size_t ViewTree::node_count() const {
    return count_nodes(root);
}

ViewTree parse_view_tree(std::istream& stream) {
    if (!stream) throw InputError("view tree stream is not readable");
    std::ostringstream buffer;
    buffer << stream.rdbuf();
    return parse_view_tree_text(buffer.str());
}

ViewTree parse_view_tree_text(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw InputError(std::string("view tree is not valid JSON: ") + e.what());
    }
    ViewTree tree;
    try {
        tree.app_id = doc.value("app_id", std::string());
        tree.page_role = page_role_from_name(doc.value("page_role", std::string("other")));
        std::set<std::string> ids;
        tree.root = parse_view_node(doc.at("root"), ids, 0);
    } catch (const json::exception& e) {
        throw StructureError(std::string("view tree schema violation: ") + e.what());
    }
    return tree;
}

ViewTree parse_view_tree_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open view tree: " + path.string());
    return parse_view_tree(in);
}

std::string serialize_view_tree(const ViewTree& tree) {
    json doc;
    doc["app_id"] = tree.app_id;
    doc["page_role"] = std::string(page_role_name(tree.page_role));
    doc["root"] = view_node_to_json(tree.root);
    return doc.dump(2);
}

std::optional<std::vector<std::uint8_t>> BlobStore::resolve(
    const std::optional<Body>& body) const {
    if (!body) return std::nullopt;
    if (!body->is_ref) return body->inline_bytes;
    if (!base_dir_) return std::nullopt;
    std::filesystem::path path = *base_dir_ / body->ref;
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace madroid::model
