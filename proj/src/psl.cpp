#include "madroid/psl.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "madroid/defaults.hpp"
#include "madroid/errors.hpp"
#include "madroid/util.hpp"

namespace madroid {

namespace {

std::vector<std::string_view> split_labels(std::string_view host) {
    std::vector<std::string_view> labels;
    size_t start = 0;
    while (start <= host.size()) {
        size_t dot = host.find('.', start);
        if (dot == std::string_view::npos) {
            labels.push_back(host.substr(start));
            break;
        }
        labels.push_back(host.substr(start, dot - start));
        start = dot + 1;
    }
    return labels;
}

std::string join_from(const std::vector<std::string_view>& labels, size_t from) {
    std::string out;
    for (size_t i = from; i < labels.size(); ++i) {
        if (i > from) out += '.';
        out += labels[i];
    }
    return out;
}

}  // namespace

PublicSuffixList PublicSuffixList::from_text(std::string_view text) {
    PublicSuffixList psl;
    std::istringstream stream{std::string(text)};
    std::string line;
    while (std::getline(stream, line)) {
        std::string rule = trim(line);
        if (rule.empty() || rule.starts_with("//") || rule.starts_with("#")) continue;
        // list entries may carry trailing comments
        if (size_t sp = rule.find_first_of(" \t"); sp != std::string::npos) rule.resize(sp);
        rule = to_lower(rule);
        if (rule.front() == '!') {
            psl.exception_.insert(rule.substr(1));
        } else if (rule.starts_with("*.")) {
            psl.wildcard_.insert(rule.substr(2));
        } else if (rule == "*") {
            // implicit default, always active
        } else {
            psl.exact_.insert(rule);
        }
    }
    return psl;
}

PublicSuffixList PublicSuffixList::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open suffix rule file: " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_text(buffer.str());
}

const PublicSuffixList& PublicSuffixList::bundled() {
    static const PublicSuffixList psl = from_text(defaults::public_suffix_rules());
    return psl;
}

std::size_t PublicSuffixList::rule_count() const {
    return exact_.size() + wildcard_.size() + exception_.size();
}

std::string PublicSuffixList::public_suffix(std::string_view host_in) const {
    std::string host = to_lower(host_in);
    while (!host.empty() && host.back() == '.') host.pop_back();
    if (host.empty()) return "";
    if (is_ipv4_literal(host) || host.find(':') != std::string::npos) return "";

    auto labels = split_labels(host);
    const size_t n = labels.size();

    // Exception rules win outright; the suffix is the rule minus its first label.
    for (size_t i = 0; i < n; ++i) {
        if (exception_.contains(join_from(labels, i))) return join_from(labels, i + 1);
    }
    // Otherwise the longest matching rule; the implicit '*' rule guarantees
    // at least the final label.
    size_t best = 1;
    for (size_t i = 0; i < n; ++i) {
        size_t len = n - i;
        std::string candidate = join_from(labels, i);
        if (exact_.contains(candidate) && len > best) best = len;
        if (len >= 2 && wildcard_.contains(join_from(labels, i + 1)) && len > best) best = len;
    }
    return join_from(labels, n - best);
}

std::string PublicSuffixList::registrable_domain(std::string_view host_in) const {
    std::string host = to_lower(host_in);
    while (!host.empty() && host.back() == '.') host.pop_back();
    if (host.empty()) return host;
    if (is_ipv4_literal(host) || host.find(':') != std::string::npos)
        return host;  // IP literals pass through

    std::string suffix = public_suffix(host);
    auto labels = split_labels(host);
    auto suffix_labels = split_labels(suffix);
    if (labels.size() <= suffix_labels.size()) return host;  // host is itself a suffix
    return join_from(labels, labels.size() - suffix_labels.size() - 1);
}

std::string registrable_domain(std::string_view url, const PublicSuffixList& psl) {
    auto parsed = parse_url(url);
    if (!parsed || parsed->host.empty())
        throw InputError("cannot derive registrable domain: unparseable URL " + std::string(url));
    return psl.registrable_domain(parsed->host);
}

}  // namespace madroid
