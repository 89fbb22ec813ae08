#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace madroid {

// Minimal absolute-URL split. Handles hierarchical forms
// (scheme://host[:port]/path?query) and opaque forms (market:..., mailto:...).
struct Url {
    std::string scheme;      // lowercased
    std::string host;        // lowercased, brackets stripped for IPv6
    std::string port;        // digits, may be empty
    std::string path_query;  // everything after the authority, may be empty
    bool host_is_ip = false;

    bool is_http() const { return scheme == "http" || scheme == "https"; }
};

std::optional<Url> parse_url(std::string_view text);

bool is_ipv4_literal(std::string_view host);

// Resolves a possibly-relative reference (Location header) against a base URL.
// Returns the reference unchanged when it is already absolute, nullopt when
// the base cannot be parsed.
std::optional<std::string> resolve_reference(std::string_view base, std::string_view ref);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool starts_with_ci(std::string_view text, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text);

// SHA-256 of a byte buffer as lowercase hex; the content-address used by the
// artifact store and the client caches.
std::string sha256_hex(std::span<const std::uint8_t> bytes);

}  // namespace madroid
