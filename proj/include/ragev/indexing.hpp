#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ragev/chunking.hpp"
#include "ragev/corpus_store.hpp"
#include "ragev/embedding.hpp"

namespace ragev {

struct ScoredChunk {
    std::string chunk_id;
    std::string doc_id;
    double score = 0.0;
    std::size_t rank = 0;  // 1-based

    bool operator==(const ScoredChunk&) const = default;
};

// Sorts by score descending then chunk_id ascending, truncates to k and assigns
// ranks 1..n.
void rank_and_truncate(std::vector<ScoredChunk>& items, std::size_t k);

// Chunks in build order with id lookup.
class ChunkTable {
public:
    void add(Chunk chunk);

    std::size_t size() const { return chunks_.size(); }
    const Chunk& at(std::size_t index) const { return chunks_.at(index); }
    const std::vector<Chunk>& chunks() const { return chunks_; }
    const Chunk* find(const std::string& chunk_id) const;
    std::size_t index_of(const std::string& chunk_id) const;  // throws NotFound

    bool operator==(const ChunkTable& other) const { return chunks_ == other.chunks_; }

private:
    std::vector<Chunk> chunks_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// A search hit by chunk index into the owning index.
struct Hit {
    std::size_t chunk = 0;
    double score = 0.0;
};

// Optional restriction of a search to some chunk indices. For lexical search the
// corpus statistics (chunk count, document frequency, average length) are then
// taken over the subset alone, so the subset behaves as a collection of its own.
using ChunkSubset = const std::vector<std::size_t>*;

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

class InvertedIndex {
public:
    struct Posting {
        std::uint32_t chunk = 0;  // index into chunk_ids()
        std::uint32_t term_frequency = 0;
        bool operator==(const Posting&) const = default;
    };

    // Terms are metric_tokens() of each chunk text.
    static InvertedIndex build(const ChunkTable& chunks);

    // Top-k by BM25 over the distinct query terms, ties by ascending chunk id;
    // zero-score chunks are never returned.
    std::vector<Hit> search(const std::string& query, std::size_t k, ChunkSubset subset = nullptr) const;

    // BM25 score of one chunk against the distinct query terms; statistics over
    // the whole index.
    double score(const std::string& query, std::size_t chunk) const;

    const std::map<std::string, std::vector<Posting>>& postings() const { return postings_; }
    const std::vector<std::string>& chunk_ids() const { return chunk_ids_; }
    const std::vector<std::uint32_t>& chunk_lengths() const { return lengths_; }
    std::size_t chunk_count() const { return chunk_ids_.size(); }
    double avg_chunk_length() const { return avg_length_; }
    const Bm25Params& params() const { return params_; }

    static InvertedIndex from_parts(std::vector<std::string> chunk_ids, std::vector<std::uint32_t> lengths,
                                    std::map<std::string, std::vector<Posting>> postings);

    bool operator==(const InvertedIndex& other) const {
        return chunk_ids_ == other.chunk_ids_ && lengths_ == other.lengths_ && postings_ == other.postings_;
    }

private:
    void finalize();

    std::vector<std::string> chunk_ids_;
    std::vector<std::uint32_t> lengths_;
    std::map<std::string, std::vector<Posting>> postings_;
    double avg_length_ = 0.0;
    Bm25Params params_;
};

// Exact (flat) cosine index. Rows are stored as 32-bit floats, the same
// precision as the on-disk snapshot, so reloads are bit-exact.
class VectorIndex {
public:
    explicit VectorIndex(std::size_t dim = 0) : dim_(dim) {}

    void add(const std::string& chunk_id, const EmbeddingVector& vec);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return ids_.size(); }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const float> row(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    const std::vector<float>& data() const { return data_; }

    // Cosine between the query and row i, computed in double precision.
    double similarity(const EmbeddingVector& query, std::size_t i) const;

    // Exact top-k by cosine, ties by ascending chunk id.
    std::vector<Hit> search(const EmbeddingVector& query, std::size_t k, ChunkSubset subset = nullptr) const;

    static VectorIndex from_parts(std::vector<std::string> ids, std::size_t dim, std::vector<float> data);

    bool operator==(const VectorIndex&) const = default;

private:
    std::size_t dim_;
    std::vector<std::string> ids_;
    std::vector<float> data_;
};

// Everything retrieval needs: chunk table, both indexes, and per-document chunk
// lists. Immutable after build; safe for concurrent searches.
struct IndexSet {
    ChunkTable chunks;
    InvertedIndex lexical;
    VectorIndex vectors;
    std::vector<std::string> chunk_doc_ids;  // parallel to chunks
    std::vector<std::string> doc_order;       // documents with >= 1 chunk, collection order
    std::map<std::string, std::vector<std::size_t>> doc_chunks;
    ChunkingParams chunking;
    std::string embedding_model;

    bool operator==(const IndexSet& other) const {
        return chunks == other.chunks && lexical == other.lexical && vectors == other.vectors &&
               doc_order == other.doc_order && chunking.size_tokens == other.chunking.size_tokens &&
               chunking.overlap_tokens == other.chunking.overlap_tokens &&
               embedding_model == other.embedding_model;
    }
};

IndexSet build_indexes(const Collection& collection, const ChunkingParams& params, const Embedder& embedder);
IndexSet build_indexes(const Collection& collection, const ChunkingParams& params,
                       const ProviderConfig& provider);

// Converts hits to ranked ScoredChunks carrying their document ids.
std::vector<ScoredChunk> to_scored(const IndexSet& indexes, const std::vector<Hit>& hits);

// k must be >= 1.
std::vector<ScoredChunk> fulltext_search(const IndexSet& indexes, const std::string& query, std::size_t k,
                                         ChunkSubset subset = nullptr);
std::vector<ScoredChunk> vector_search(const IndexSet& indexes, const EmbeddingVector& query_vec,
                                       std::size_t k, ChunkSubset subset = nullptr);

// Snapshot directory: chunks.jsonl, postings.jsonl, vectors.bin (header line of
// chunk ids as a JSON array, then little-endian float32 rows) and meta.json.
void save_snapshot(const IndexSet& indexes, const std::filesystem::path& dir);
IndexSet load_snapshot(const std::filesystem::path& dir);

}  // namespace ragev
