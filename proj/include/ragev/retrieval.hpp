#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ragev/embedding.hpp"
#include "ragev/indexing.hpp"

namespace ragev {

enum class PipelineKind { Vanilla, Vector, FullText, HybridRRF, SHy };

// Lowercase CLI name: vanilla, vector, fulltext, hybrid, shy.
const char* to_string(PipelineKind kind);
// Three-letter factor level code: VAN, VEC, TEX, HYB, SHY.
const char* level_code(PipelineKind kind);
// Accepts either form, case-insensitively.
PipelineKind parse_pipeline(std::string_view text);

// How Hybrid merges its two candidate lists. Rrf is the default; Interleave
// alternates vector/full-text candidates without fusion scores.
enum class FusionMode { Rrf, Interleave };

struct RetrievalParams {
    std::size_t top_k = 10;
    double rrf_k = 60.0;
    std::size_t per_doc_m = 2;
    FusionMode fusion = FusionMode::Rrf;
    double min_score = 0.0;  // items scoring below this are dropped; 0 disables
    bool shy_drop_zero = false;

    void validate() const;
};

struct ContextItem {
    ScoredChunk chunk;
    std::string text;

    bool operator==(const ContextItem&) const = default;
};

struct ContextGroup {
    std::string doc_id;
    std::vector<ContextItem> items;

    bool operator==(const ContextGroup&) const = default;
};

struct RetrievedContext {
    PipelineKind pipeline = PipelineKind::Vanilla;
    std::string query;
    std::vector<ContextItem> items;
    std::optional<std::vector<ContextGroup>> groups;  // SHy only, in item order

    std::vector<std::string> chunk_ids() const;
    bool operator==(const RetrievedContext&) const = default;
};

// score(c) = sum over lists containing c of 1 / (rrf_k + rank(c)), ranks 1-based.
// Sorted by score descending, ties by chunk id. doc_id is left empty.
std::vector<ScoredChunk> rrf_fuse(const std::vector<std::vector<std::string>>& rankings, double rrf_k);

// Hybrid over an optional chunk subset: fetches 2*limit candidates from both
// searches, merges them per params.fusion, keeps the best `limit`.
std::vector<ScoredChunk> hybrid_search(const IndexSet& indexes, const std::string& query,
                                       const EmbeddingVector& query_vec, const RetrievalParams& params,
                                       std::size_t limit, ChunkSubset subset = nullptr);

RetrievedContext retrieve(PipelineKind kind, const std::string& query, const IndexSet& indexes,
                          const RetrievalParams& params, const Embedder& embedder);
RetrievedContext retrieve(PipelineKind kind, const std::string& query, const IndexSet& indexes,
                          const RetrievalParams& params, const ProviderConfig& provider);

// Hybrid run separately inside each document; every document with at least one
// chunk contributes up to per_doc_m items. Groups are ordered by their best
// fused score (ties by doc id), items inside a group by fused score.
RetrievedContext shy_retrieve(const std::string& query, const IndexSet& indexes,
                              const RetrievalParams& params, const Embedder& embedder);

}  // namespace ragev
