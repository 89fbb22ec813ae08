#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>

namespace madroid {

// Public-suffix rule set in the standard list format: one rule per line,
// '*' matches exactly one label, '!' marks an exception rule, '//' or '#'
// starts a comment. Unlisted TLDs fall back to the implicit '*' rule.
class PublicSuffixList {
public:
    static PublicSuffixList from_text(std::string_view text);
    static PublicSuffixList from_file(const std::filesystem::path& path);
    // The rule set embedded at build time from data/public_suffix_list.dat.
    static const PublicSuffixList& bundled();

    // eTLD+1 of a bare host name. IP literals pass through verbatim; a host
    // that is itself a public suffix is returned unchanged.
    std::string registrable_domain(std::string_view host) const;

    // Longest matching public suffix of the host ("" for IP literals).
    std::string public_suffix(std::string_view host) const;

    std::size_t rule_count() const;

private:
    std::unordered_set<std::string> exact_;      // "co.uk"
    std::unordered_set<std::string> wildcard_;   // "*.ck" stored as "ck"
    std::unordered_set<std::string> exception_;  // "!www.ck" stored as "www.ck"
};

// eTLD+1 of an absolute URL. Throws InputError when the URL does not parse
// or has an empty host.
std::string registrable_domain(std::string_view url, const PublicSuffixList& psl);

}  // namespace madroid
