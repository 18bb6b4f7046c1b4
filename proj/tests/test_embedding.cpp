#include <doctest.h>

#include <cmath>
#include <random>

#include "ragev/embedding.hpp"
#include "ragev/error.hpp"

using namespace ragev;

namespace {

std::string random_word_string(std::mt19937_64& rng, std::size_t words) {
    std::string s;
    for (std::size_t w = 0; w < words; ++w) {
        if (w) s += ' ';
        const std::size_t len = 3 + rng() % 6;
        for (std::size_t i = 0; i < len; ++i) s += static_cast<char>('a' + rng() % 26);
    }
    return s;
}

}  // namespace

TEST_SUITE("embedding") {
    TEST_CASE("hashed embedder is deterministic and normalized") {
        const HashedNgramEmbedder e(256);
        const auto a = e.embed("Metformin lowers blood glucose.");
        const auto b = e.embed("Metformin lowers blood glucose.");
        CHECK(a == b);
        CHECK(a.dim() == 256);
        CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(e.embed("ABC").values() == e.embed("abc").values());
        CHECK(HashedNgramEmbedder(64).embed("x").dim() == 64);
    }

    TEST_CASE("single characters still embed") {
        const HashedNgramEmbedder e(16);
        const auto v = e.embed("a");
        CHECK(v.norm() == doctest::Approx(1.0));
    }

    TEST_CASE("unrelated random strings are far apart") {
        const HashedNgramEmbedder e(256);
        std::mt19937_64 rng(20240601);
        int below = 0;
        for (int t = 0; t < 100; ++t) {
            const auto a = e.embed(random_word_string(rng, 6));
            const auto b = e.embed(random_word_string(rng, 6));
            if (cosine(a, b) < 0.5) ++below;
        }
        CHECK(below >= 95);
    }

    TEST_CASE("embed_tokens") {
        const HashedNgramEmbedder e(128);
        CHECK(e.embed_tokens("the cat").size() == 2);
        const auto same = e.embed_tokens("cat cat");
        CHECK(same[0] == same[1]);
        const auto fwd = e.embed_tokens("alpha beta gamma");
        const auto perm = e.embed_tokens("gamma alpha beta");
        CHECK(perm[0] == fwd[2]);
        CHECK(perm[1] == fwd[0]);
        CHECK(perm[2] == fwd[1]);
    }

    TEST_CASE("cosine") {
        const EmbeddingVector v({0.3, -1.2, 2.0});
        CHECK(cosine(v, v) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(cosine(EmbeddingVector({1, 0}), EmbeddingVector({0, 1})) == doctest::Approx(0.0));
        CHECK(std::abs(cosine(EmbeddingVector({1, 1}), EmbeddingVector({1, 0})) - 0.70710678) < 1e-8);
        CHECK_THROWS_AS(cosine(EmbeddingVector({1, 0}), EmbeddingVector({1, 0, 0})), Error);
        CHECK_THROWS_AS(cosine(EmbeddingVector({0, 0}), EmbeddingVector({1, 0})), Error);
    }

    TEST_CASE("rejects bad input") {
        const HashedNgramEmbedder e(32);
        CHECK_THROWS_AS(e.embed("   "), Error);
        CHECK_THROWS_AS(EmbeddingVector({1.0, std::nan("")}), Error);
        ProviderConfig remote;
        remote.kind = ProviderKind::RemoteEndpoint;
        CHECK_THROWS_AS(remote.validate(), Error);
        ProviderConfig zero;
        zero.dim = 0;
        CHECK_THROWS_AS(zero.validate(), Error);
    }

    TEST_CASE("provider config front door") {
        ProviderConfig p;
        p.dim = 48;
        CHECK(embed(p, "hello").dim() == 48);
        CHECK(embed_tokens(p, "a b c").size() == 3);
        CHECK(make_embedder(p)->model_name() == "hashed");
    }
}
