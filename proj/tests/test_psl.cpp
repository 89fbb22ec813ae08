#include "madroid/psl.hpp"

#include <doctest.h>

#include "madroid/errors.hpp"

using namespace madroid;

TEST_CASE("registrable_domain follows the bundled suffix rules") {
    const auto& psl = PublicSuffixList::bundled();

    CHECK(registrable_domain("http://req.startappservice.com/1.4/gethtmlad", psl) ==
          "startappservice.com");
    CHECK(registrable_domain("http://10.0.0.1/x", psl) == "10.0.0.1");
    // evaluated by hand against the bundled rules: co.uk is listed, so the
    // registrable label is one to its left
    CHECK(registrable_domain("https://a.b.example.co.uk/p", psl) == "example.co.uk");

    CHECK(registrable_domain("http://info.static.startappservice.com/x", psl) ==
          "startappservice.com");
    CHECK(registrable_domain("http://googleads.g.doubleclick.net/pagead", psl) ==
          "doubleclick.net");
    CHECK(registrable_domain("https://take-your-prize-now1.life/win", psl) ==
          "take-your-prize-now1.life");
}

TEST_CASE("registrable_domain rejects unusable URLs") {
    const auto& psl = PublicSuffixList::bundled();
    CHECK_THROWS_AS(registrable_domain("not a url", psl), InputError);
    CHECK_THROWS_AS(registrable_domain("/relative/path", psl), InputError);
    CHECK_THROWS_AS(registrable_domain("http://", psl), InputError);
}

TEST_CASE("suffix rule semantics: wildcard, exception, default") {
    auto psl = PublicSuffixList::from_text("com\nco.uk\nck\n*.ck\n!www.ck\n");

    SUBCASE("plain rule") { CHECK(psl.registrable_domain("foo.example.com") == "example.com"); }
    SUBCASE("wildcard consumes one extra label") {
        CHECK(psl.public_suffix("thing.x.ck") == "x.ck");
        CHECK(psl.registrable_domain("thing.x.ck") == "thing.x.ck");
    }
    SUBCASE("exception rule beats the wildcard") {
        CHECK(psl.registrable_domain("www.ck") == "www.ck");
        CHECK(psl.registrable_domain("sub.www.ck") == "www.ck");
    }
    SUBCASE("unlisted TLD falls back to the implicit star rule") {
        CHECK(psl.registrable_domain("a.b.notlisted") == "b.notlisted");
    }
    SUBCASE("host equal to a suffix passes through") {
        CHECK(psl.registrable_domain("co.uk") == "co.uk");
        CHECK(psl.registrable_domain("com") == "com");
    }
    SUBCASE("case and trailing dots normalize") {
        CHECK(psl.registrable_domain("A.Example.COM.") == "example.com");
    }
}

TEST_CASE("IPv6 and IPv4 literals pass through") {
    const auto& psl = PublicSuffixList::bundled();
    CHECK(psl.registrable_domain("10.0.0.1") == "10.0.0.1");
    CHECK(registrable_domain("http://[2001:db8::1]:8080/x", psl) == "2001:db8::1");
    // not a valid IPv4 literal: boundary digits above 255 are host labels
    CHECK(psl.registrable_domain("999.999.999.999") == "999.999");
}

TEST_CASE("rule files accept comments and blank lines") {
    auto psl = PublicSuffixList::from_text(
        "// standard comment\n# hash comment\n\ncom\n   net   \n");
    CHECK(psl.rule_count() == 2);
    CHECK(psl.registrable_domain("x.example.net") == "example.net");
}
