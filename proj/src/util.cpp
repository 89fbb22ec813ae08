#include "madroid/util.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <openssl/evp.h>

namespace madroid {

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

bool starts_with_ci(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    for (size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(text[i])) !=
            std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    }
    return true;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return true;
    if (haystack.size() < needle.size()) return false;
    for (size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        if (starts_with_ci(haystack.substr(i), needle)) return true;
    }
    return false;
}

bool is_ipv4_literal(std::string_view host) {
    int dots = 0;
    size_t i = 0;
    while (i < host.size()) {
        size_t start = i;
        int value = 0;
        while (i < host.size() && std::isdigit(static_cast<unsigned char>(host[i]))) {
            value = value * 10 + (host[i] - '0');
            if (value > 255) return false;
            ++i;
        }
        if (i == start || i - start > 3) return false;
        if (i < host.size()) {
            if (host[i] != '.') return false;
            ++dots;
            ++i;
            if (i == host.size()) return false;  // trailing dot
        }
    }
    return dots == 3;
}

std::optional<Url> parse_url(std::string_view text) {
    // scheme
    size_t colon = text.find(':');
    if (colon == std::string_view::npos || colon == 0) return std::nullopt;
    if (!std::isalpha(static_cast<unsigned char>(text[0]))) return std::nullopt;
    for (size_t i = 1; i < colon; ++i) {
        char c = text[i];
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.')
            return std::nullopt;
    }
    Url url;
    url.scheme = to_lower(text.substr(0, colon));
    std::string_view rest = text.substr(colon + 1);

    if (rest.substr(0, 2) != "//") {
        // opaque form: no authority
        url.path_query = std::string(rest);
        return url;
    }
    rest.remove_prefix(2);
    size_t auth_end = rest.find_first_of("/?#");
    std::string_view authority = rest.substr(0, auth_end);
    url.path_query = auth_end == std::string_view::npos ? "" : std::string(rest.substr(auth_end));

    // strip userinfo
    if (size_t at = authority.rfind('@'); at != std::string_view::npos)
        authority = authority.substr(at + 1);
    if (authority.empty()) return std::nullopt;

    std::string_view host;
    std::string_view port;
    if (authority.front() == '[') {
        size_t close = authority.find(']');
        if (close == std::string_view::npos) return std::nullopt;
        host = authority.substr(1, close - 1);
        if (close + 1 < authority.size()) {
            if (authority[close + 1] != ':') return std::nullopt;
            port = authority.substr(close + 2);
        }
        url.host_is_ip = true;
    } else {
        size_t pcolon = authority.rfind(':');
        if (pcolon != std::string_view::npos) {
            host = authority.substr(0, pcolon);
            port = authority.substr(pcolon + 1);
        } else {
            host = authority;
        }
        url.host_is_ip = is_ipv4_literal(host);
    }
    if (host.empty()) return std::nullopt;
    for (char c : port)
        if (!std::isdigit(static_cast<unsigned char>(c))) return std::nullopt;
    url.host = to_lower(host);
    url.port = std::string(port);
    return url;
}

std::optional<std::string> resolve_reference(std::string_view base, std::string_view ref) {
    if (parse_url(ref)) return std::string(ref);
    auto base_url = parse_url(base);
    if (!base_url || !base_url->is_http()) return std::nullopt;
    std::string origin = base_url->scheme + "://" + base_url->host;
    if (!base_url->port.empty()) origin += ":" + base_url->port;
    if (ref.empty()) return origin + base_url->path_query;
    if (ref.substr(0, 2) == "//") return base_url->scheme + ":" + std::string(ref);
    if (ref.front() == '/') return origin + std::string(ref);
    // relative path: resolve against the directory of the base path
    std::string path = base_url->path_query;
    if (size_t q = path.find_first_of("?#"); q != std::string::npos) path.resize(q);
    size_t slash = path.rfind('/');
    path = slash == std::string::npos ? "/" : path.substr(0, slash + 1);
    return origin + path + std::string(ref);
}

namespace {
constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
        out += kB64Alphabet[(n >> 18) & 63];
        out += kB64Alphabet[(n >> 12) & 63];
        out += kB64Alphabet[(n >> 6) & 63];
        out += kB64Alphabet[n & 63];
    }
    size_t rem = bytes.size() - i;
    if (rem == 1) {
        std::uint32_t n = bytes[i] << 16;
        out += kB64Alphabet[(n >> 18) & 63];
        out += kB64Alphabet[(n >> 12) & 63];
        out += "==";
    } else if (rem == 2) {
        std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8);
        out += kB64Alphabet[(n >> 18) & 63];
        out += kB64Alphabet[(n >> 12) & 63];
        out += kB64Alphabet[(n >> 6) & 63];
        out += '=';
    }
    return out;
}

std::optional<std::vector<std::uint8_t>> base64_decode(std::string_view text) {
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    std::uint32_t acc = 0;
    int bits = 0;
    size_t pad = 0;
    for (char c : text) {
        if (c == '=') {
            ++pad;
            continue;
        }
        if (pad > 0) return std::nullopt;  // data after padding
        int v = b64_value(c);
        if (v < 0) return std::nullopt;
        acc = (acc << 6) | static_cast<std::uint32_t>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<std::uint8_t>((acc >> bits) & 0xFF));
        }
    }
    if (pad > 2) return std::nullopt;
    if (bits >= 6) return std::nullopt;  // stray characters
    return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[digest[i] >> 4];
        out += kHex[digest[i] & 15];
    }
    return out;
}

}  // namespace madroid
