#include "doctest.h"

#include "support/oracles.hpp"
#include "ttc/errors.hpp"
#include "ttc/tokenize.hpp"

#include <random>
#include <set>
#include <sstream>

using namespace ttc;
using namespace ttc::tokenize;

TEST_CASE("approximate count rounds bytes up in blocks of four") {
    CHECK(approx_token_count("") == 0);
    CHECK(approx_token_count("a") == 1);
    CHECK(approx_token_count("abcd") == 1);
    CHECK(approx_token_count("abcde") == 2);
    CHECK(approx_token_count(std::string(8, 'x')) == 2);
    CHECK(approx_token_count(std::string(9, 'x')) == 3);
    // Multibyte text counts bytes, not code points.
    CHECK(approx_token_count("\xc3\xa9\xc3\xa9") == 1);
    CHECK(approx_token_count("\xc3\xa9\xc3\xa9\xc3\xa9") == 2);
}

TEST_CASE("merge parsing assigns ranks by line order and skips comments") {
    std::istringstream in("# header\na b\n\nab c\n");
    MergeTable table = parse_merges(in, "inline");
    CHECK(table.size() == 2);
    CHECK(table.rank_of("a", "b") == 0);
    CHECK(table.rank_of("ab", "c") == 1);
    CHECK_FALSE(table.rank_of("b", "c").has_value());
}

TEST_CASE("merge parsing reports the offending source line") {
    std::istringstream bad("a b\nonly-one-field\n");
    CHECK_THROWS_WITH_AS(parse_merges(bad, "merges.txt"),
                         doctest::Contains("merges.txt:2"), ValidationError);

    std::istringstream dup("a b\na b\n");
    CHECK_THROWS_WITH_AS(parse_merges(dup, "dup.txt"), doctest::Contains("dup.txt:2"),
                         ValidationError);

    std::istringstream three("a b c\n");
    CHECK_THROWS_AS(parse_merges(three, "three.txt"), ValidationError);
}

TEST_CASE("segmentation applies lowest rank first, leftmost on ties") {
    MergeTable table("toy", {{"a", "b"}, {"ab", "c"}});
    CHECK(bpe_segment("abc", table) == std::vector<std::string>{"abc"});
    CHECK(bpe_segment("abab", table) == std::vector<std::string>{"ab", "ab"});
    CHECK(bpe_segment("xaby", table) == std::vector<std::string>{"x", "ab", "y"});
    CHECK(bpe_segment("", table).empty());

    // "b a" outranks "a b" here, so "aba" must merge the right pair first.
    MergeTable rev("rev", {{"b", "a"}, {"a", "b"}});
    CHECK(bpe_segment("aba", rev) == std::vector<std::string>{"a", "ba"});
}

TEST_CASE("segmentation with an empty table splits into single bytes") {
    MergeTable empty;
    auto pieces = bpe_segment("hi\xc3\xa9", empty);
    REQUIRE(pieces.size() == 4);
    CHECK(pieces[0] == "h");
    CHECK(pieces[1] == "i");
}

namespace {

MergeTable random_table(std::mt19937_64 &rng, int n_merges) {
    // Derive merges by replaying the greedy procedure on random byte
    // strings, so every learned pair is reachable and ranks are contiguous.
    std::vector<std::pair<std::string, std::string>> merges;
    std::set<std::pair<std::string, std::string>> seen;
    while (static_cast<int>(merges.size()) < n_merges) {
        std::string text;
        auto len = 2 + rng() % 12;
        for (std::uint64_t i = 0; i < len; ++i)
            text.push_back(static_cast<char>('a' + rng() % 4));
        MergeTable partial("partial", merges);
        auto pieces = bpe_segment(text, partial);
        if (pieces.size() < 2)
            continue;
        auto idx = rng() % (pieces.size() - 1);
        auto pair = std::make_pair(pieces[idx], pieces[idx + 1]);
        if (seen.insert(pair).second)
            merges.push_back(std::move(pair));
    }
    return MergeTable("random", std::move(merges));
}

} // namespace

TEST_CASE("segmentation agrees with a naive full-scan reference") {
    std::mt19937_64 rng(20260822);
    for (int t = 0; t < 5; ++t) {
        MergeTable table = random_table(rng, 12 + t * 5);
        for (int i = 0; i < 200; ++i) {
            std::string text;
            auto len = rng() % 48;
            for (std::uint64_t j = 0; j < len; ++j) {
                if (rng() % 4 == 0)
                    text.push_back(static_cast<char>(rng() % 256));
                else
                    text.push_back(static_cast<char>('a' + rng() % 4));
            }
            auto got = bpe_segment(text, table);
            auto want = oracle::naive_bpe_segment(text, table);
            CHECK(got == want);
            std::string joined;
            for (const auto &p : got)
                joined += p;
            CHECK(joined == text);
        }
    }
}

TEST_CASE("count strategies fall through in preference order") {
    MergeTable table("toy", {{"a", "b"}});
    TokenCountContext ctx;
    ctx.table = &table;

    SUBCASE("server usage wins when present") {
        ctx.server_count = 42;
        auto rec = count_tokens("abab", default_strategies(), ctx);
        CHECK(rec.count == 42);
        CHECK(rec.source == TokenSource::server_usage);
    }
    SUBCASE("client table used when no server count") {
        auto rec = count_tokens("abab", default_strategies(), ctx);
        CHECK(rec.count == 2);
        CHECK(rec.source == TokenSource::client_bpe);
    }
    SUBCASE("approximate is the last resort") {
        ctx.table = nullptr;
        auto rec = count_tokens("abcdefgh", default_strategies(), ctx);
        CHECK(rec.count == 2);
        CHECK(rec.source == TokenSource::approximate);
    }
    SUBCASE("empty strategy list is an error") {
        CHECK_THROWS_AS(count_tokens("x", {}, ctx), ValidationError);
    }
    SUBCASE("a count is always produced even when no listed strategy applies") {
        ctx.table = nullptr;
        auto rec = count_tokens("abcdefgh", {TokenSource::client_bpe}, ctx);
        CHECK(rec.source == TokenSource::approximate);
        CHECK(rec.count == 2);
    }
}

TEST_CASE("token source names round-trip") {
    for (auto s : {TokenSource::server_usage, TokenSource::client_bpe, TokenSource::approximate})
        CHECK(token_source_from_string(to_string(s)) == s);
    CHECK_THROWS_AS(token_source_from_string("bogus"), ValidationError);
}
