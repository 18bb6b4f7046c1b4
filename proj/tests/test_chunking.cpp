#include <doctest.h>

#include <algorithm>

#include "ragev/chunking.hpp"
#include "ragev/error.hpp"
#include "ragev/text.hpp"

using namespace ragev;

namespace {

Document numbered(std::size_t n) {
    std::vector<std::string> toks;
    for (std::size_t i = 0; i < n; ++i) toks.push_back("t" + std::to_string(i));
    return {"doc", "Doc", join(toks, " "), std::nullopt, {}};
}

std::vector<std::pair<std::size_t, std::size_t>> spans(const std::vector<Chunk>& chunks) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (const auto& c : chunks) out.emplace_back(c.start, c.end);
    return out;
}

using Spans = std::vector<std::pair<std::size_t, std::size_t>>;

}  // namespace

TEST_SUITE("chunking") {
    TEST_CASE("tokenize") {
        CHECK(tokenize("the cat sat") == std::vector<std::string>{"the", "cat", "sat"});
        CHECK(tokenize("").empty());
        CHECK(tokenize("a  b\tc") == std::vector<std::string>{"a", "b", "c"});
        CHECK(tokenize("x\xc2\xa0y\xe3\x80\x80z") == std::vector<std::string>{"x", "y", "z"});
        const std::string s = "  ab  cd";
        const auto sp = tokenize_spans(s);
        REQUIRE(sp.size() == 2);
        CHECK(s.substr(sp[1].begin, sp[1].end - sp[1].begin) == "cd");
    }

    TEST_CASE("metric tokens and sentences") {
        CHECK(metric_tokens("The Cat, sat!") == std::vector<std::string>{"the", "cat", "sat"});
        CHECK(metric_tokens("-- ... ").empty());
        CHECK(split_sentences("One two. Three? Four") == std::vector<std::string>{"One two.", "Three?", "Four"});
        CHECK(split_sentences("3.5 mg daily.") == std::vector<std::string>{"3.5 mg daily."});
    }

    TEST_CASE("fixed windows") {
        CHECK(spans(chunk_fixed(numbered(10), {4, 0})) == Spans{{0, 4}, {4, 8}, {8, 10}});
        CHECK(spans(chunk_fixed(numbered(3), {512, 0})) == Spans{{0, 3}});
        CHECK(spans(chunk_fixed(numbered(8), {4, 2})) == Spans{{0, 4}, {2, 6}, {4, 8}});
        CHECK(spans(chunk_fixed(numbered(9), {4, 2})) == Spans{{0, 4}, {2, 6}, {4, 8}, {6, 9}});
    }

    TEST_CASE("chunk ids and text") {
        const auto chunks = chunk_fixed(numbered(10), {4, 0});
        CHECK(chunks[0].chunk_id == "doc#0000");
        CHECK(chunks[2].chunk_id == "doc#0002");
        CHECK(chunks[1].text == "t4 t5 t6 t7");
        CHECK(chunks[2].token_count() == 2);
        CHECK(make_chunk_id("a", 12) == "a#0012");
    }

    TEST_CASE("every token lands in some chunk") {
        for (std::size_t n : {1u, 5u, 17u, 64u}) {
            for (std::size_t size : {1u, 3u, 8u}) {
                for (std::size_t overlap = 0; overlap < size; ++overlap) {
                    const auto chunks = chunk_fixed(numbered(n), {size, overlap});
                    std::vector<bool> seen(n, false);
                    for (const auto& c : chunks) {
                        CHECK(c.token_count() <= size);
                        for (std::size_t i = c.start; i < c.end; ++i) seen[i] = true;
                    }
                    CHECK(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }));
                }
            }
        }
    }

    TEST_CASE("invalid parameters") {
        CHECK_THROWS_AS(chunk_fixed(numbered(3), {0, 0}), Error);
        CHECK_THROWS_AS(chunk_fixed(numbered(3), {4, 4}), Error);
    }
}
