#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "ragev/chunking.hpp"
#include "ragev/embedding.hpp"
#include "ragev/error.hpp"
#include "ragev/indexing.hpp"
#include "ragev/text.hpp"

using namespace ragev;

namespace {

// Textbook BM25 straight from the chunk texts.
std::vector<double> bm25_oracle(const std::vector<std::string>& texts, const std::string& query) {
    std::vector<std::vector<std::string>> docs;
    double total = 0;
    for (const auto& t : texts) {
        docs.push_back(metric_tokens(t));
        total += static_cast<double>(docs.back().size());
    }
    const double n = static_cast<double>(docs.size());
    const double avgdl = total / n;
    const auto q = metric_tokens(query);
    const std::set<std::string> terms(q.begin(), q.end());
    std::vector<double> scores(docs.size(), 0.0);
    for (const auto& term : terms) {
        double df = 0;
        for (const auto& d : docs) df += std::count(d.begin(), d.end(), term) > 0 ? 1 : 0;
        if (df == 0) continue;
        const double idf = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
        for (std::size_t i = 0; i < docs.size(); ++i) {
            const double tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), term));
            const double dl = static_cast<double>(docs[i].size());
            scores[i] += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * dl / avgdl));
        }
    }
    return scores;
}

Collection small_collection() {
    Collection c("col-test", "test", CollectionKind::Relevant);
    c.add({"a", "A", "aspirin reduces stroke risk in adults", std::nullopt, {}});
    c.add({"b", "B", "aspirin causes bleeding in some adults", std::nullopt, {}});
    c.add({"c", "C", "exercise improves mood and sleep quality", std::nullopt, {}});
    return c;
}

}  // namespace

TEST_SUITE("indexing") {
    TEST_CASE("one document, three chunks in both indexes") {
        Collection c("col-x", "x", CollectionKind::Relevant);
        c.add({"d", "D", "a b c d e f g h i j", std::nullopt, {}});
        const HashedNgramEmbedder e(32);
        const IndexSet set = build_indexes(c, {4, 0}, e);
        CHECK(set.chunks.size() == 3);
        CHECK(set.lexical.chunk_count() == 3);
        CHECK(set.vectors.size() == 3);
        CHECK(set.doc_chunks.at("d").size() == 3);
    }

    TEST_CASE("empty collection is rejected") {
        const Collection c("col-e", "e", CollectionKind::Relevant);
        const HashedNgramEmbedder e(32);
        CHECK_THROWS_AS(build_indexes(c, {4, 0}, e), Error);
    }

    TEST_CASE("shared terms list chunks from both documents") {
        const HashedNgramEmbedder e(32);
        const IndexSet set = build_indexes(small_collection(), {64, 0}, e);
        const auto& postings = set.lexical.postings().at("aspirin");
        std::set<std::string> ids;
        for (const auto& p : postings) ids.insert(set.lexical.chunk_ids()[p.chunk]);
        CHECK(ids == std::set<std::string>{"a#0000", "b#0000"});
        CHECK(set.lexical.postings().at("adults").size() == 2);
        CHECK(set.lexical.postings().count("exercise") == 1);
    }

    TEST_CASE("fulltext search") {
        const HashedNgramEmbedder e(32);
        const IndexSet set = build_indexes(small_collection(), {64, 0}, e);
        CHECK(fulltext_search(set, "zebra giraffe", 5).empty());
        const auto hits = fulltext_search(set, "mood", 5);
        REQUIRE(hits.size() == 1);
        CHECK(hits[0].chunk_id == "c#0000");
        CHECK(hits[0].doc_id == "c");
        CHECK(hits[0].rank == 1);
        CHECK(hits[0].score > 0.0);
    }

    TEST_CASE("higher term frequency ranks first") {
        Collection c("col-tf", "tf", CollectionKind::Relevant);
        c.add({"one", "", "insulin x y z w v", std::nullopt, {}});
        c.add({"three", "", "insulin insulin insulin x y z", std::nullopt, {}});
        c.add({"none", "", "p q r s t u", std::nullopt, {}});
        const HashedNgramEmbedder e(32);
        const IndexSet set = build_indexes(c, {64, 0}, e);
        const auto hits = fulltext_search(set, "insulin", 5);
        REQUIRE(hits.size() == 2);
        CHECK(hits[0].chunk_id == "three#0000");
        const auto oracle = bm25_oracle({"insulin x y z w v", "insulin insulin insulin x y z", "p q r s t u"}, "insulin");
        CHECK(oracle[1] > oracle[0]);
        CHECK(hits[0].score == doctest::Approx(oracle[1]).epsilon(1e-12));
        CHECK(hits[1].score == doctest::Approx(oracle[0]).epsilon(1e-12));
    }

    TEST_CASE("bm25 scores match the oracle on random corpora") {
        std::mt19937_64 rng(99);
        const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta"};
        for (int trial = 0; trial < 20; ++trial) {
            Collection c("col-r", "r", CollectionKind::Relevant);
            std::vector<std::string> texts;
            for (int d = 0; d < 8; ++d) {
                std::vector<std::string> words;
                const std::size_t len = 3 + rng() % 10;
                for (std::size_t i = 0; i < len; ++i) words.push_back(vocab[rng() % vocab.size()]);
                texts.push_back(join(words, " "));
                c.add({"d" + std::to_string(d), "", texts.back(), std::nullopt, {}});
            }
            const HashedNgramEmbedder e(16);
            const IndexSet set = build_indexes(c, {64, 0}, e);
            const std::string query = vocab[rng() % vocab.size()] + " " + vocab[rng() % vocab.size()];
            const auto oracle = bm25_oracle(texts, query);
            for (std::size_t i = 0; i < texts.size(); ++i) {
                CHECK(set.lexical.score(query, i) == doctest::Approx(oracle[i]).epsilon(1e-12));
            }
            const auto hits = fulltext_search(set, query, 8);
            for (std::size_t r = 1; r < hits.size(); ++r) CHECK(hits[r - 1].score >= hits[r].score);
            const auto positive = std::count_if(oracle.begin(), oracle.end(), [](double s) { return s > 0; });
            CHECK(hits.size() == static_cast<std::size_t>(positive));
        }
    }

    TEST_CASE("vector search") {
        VectorIndex index(3);
        index.add("a", EmbeddingVector({1, 0, 0}));
        index.add("b", EmbeddingVector({0, 1, 0}));
        index.add("c", EmbeddingVector({1, 1, 0}));
        const auto top = index.search(EmbeddingVector({0, 1, 0}), 1);
        REQUIRE(top.size() == 1);
        CHECK(index.ids()[top[0].chunk] == "b");
        CHECK(top[0].score == doctest::Approx(1.0));
        const auto all = index.search(EmbeddingVector({0, 1, 0}), 10);
        REQUIRE(all.size() == 3);
        CHECK(index.ids()[all[1].chunk] == "c");
        CHECK(index.ids()[all[2].chunk] == "a");
        CHECK_THROWS_AS(index.add("d", EmbeddingVector({1, 0})), Error);
    }

    TEST_CASE("vector search equals a brute-force sort") {
        std::mt19937_64 rng(5);
        std::normal_distribution<double> nd;
        VectorIndex index(16);
        std::vector<std::vector<double>> stored;
        for (int i = 0; i < 50; ++i) {
            std::vector<double> v(16);
            for (auto& x : v) x = nd(rng);
            index.add("v" + std::to_string(100 + i), EmbeddingVector(v));
            std::vector<double> q;
            for (const double x : v) q.push_back(static_cast<float>(x));
            stored.push_back(q);
        }
        std::vector<double> qv(16);
        for (auto& x : qv) x = nd(rng);
        const EmbeddingVector query(qv);
        std::vector<std::pair<double, std::string>> brute;
        for (std::size_t i = 0; i < stored.size(); ++i) {
            brute.emplace_back(cosine(query, EmbeddingVector(stored[i])), index.ids()[i]);
        }
        std::sort(brute.begin(), brute.end(), [](const auto& a, const auto& b) {
            return a.first != b.first ? a.first > b.first : a.second < b.second;
        });
        const auto hits = index.search(query, 5);
        REQUIRE(hits.size() == 5);
        for (std::size_t r = 0; r < 5; ++r) {
            CHECK(index.ids()[hits[r].chunk] == brute[r].second);
            CHECK(hits[r].score == doctest::Approx(brute[r].first).epsilon(1e-12));
        }
    }

    TEST_CASE("rank_and_truncate breaks ties by chunk id") {
        std::vector<ScoredChunk> items = {{"b", "", 1.0, 0}, {"a", "", 1.0, 0}, {"c", "", 2.0, 0}};
        rank_and_truncate(items, 2);
        REQUIRE(items.size() == 2);
        CHECK(items[0].chunk_id == "c");
        CHECK(items[1].chunk_id == "a");
        CHECK(items[1].rank == 2);
    }

    TEST_CASE("snapshot reload is exact") {
        fixtures::TempDir tmp("snapshot");
        const HashedNgramEmbedder e(64);
        const IndexSet set = build_indexes(small_collection(), {4, 1}, e);
        save_snapshot(set, tmp / "snap");
        const IndexSet back = load_snapshot(tmp / "snap");
        CHECK(back == set);
        CHECK(back.vectors.data() == set.vectors.data());
        CHECK(back.doc_chunks == set.doc_chunks);
        CHECK(back.chunk_doc_ids == set.chunk_doc_ids);
        const auto q = e.embed("aspirin bleeding");
        const auto a = vector_search(set, q, 5);
        const auto b = vector_search(back, q, 5);
        CHECK(a == b);
        CHECK(fulltext_search(set, "aspirin adults", 5) == fulltext_search(back, "aspirin adults", 5));
        CHECK_THROWS_AS(load_snapshot(tmp / "nowhere"), Error);
    }
}
