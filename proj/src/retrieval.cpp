#include "ragev/retrieval.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <thread>
#include <unordered_set>

#include "ragev/error.hpp"
#include "ragev/parallel.hpp"
#include "ragev/text.hpp"

namespace ragev {

const char* to_string(PipelineKind kind) {
    switch (kind) {
        case PipelineKind::Vanilla: return "vanilla";
        case PipelineKind::Vector: return "vector";
        case PipelineKind::FullText: return "fulltext";
        case PipelineKind::HybridRRF: return "hybrid";
        case PipelineKind::SHy: return "shy";
    }
    return "vanilla";
}

const char* level_code(PipelineKind kind) {
    switch (kind) {
        case PipelineKind::Vanilla: return "VAN";
        case PipelineKind::Vector: return "VEC";
        case PipelineKind::FullText: return "TEX";
        case PipelineKind::HybridRRF: return "HYB";
        case PipelineKind::SHy: return "SHY";
    }
    return "VAN";
}

PipelineKind parse_pipeline(std::string_view text) {
    const std::string k = to_lower_ascii(text);
    if (k == "vanilla" || k == "van") return PipelineKind::Vanilla;
    if (k == "vector" || k == "vec") return PipelineKind::Vector;
    if (k == "fulltext" || k == "full-text" || k == "tex") return PipelineKind::FullText;
    if (k == "hybrid" || k == "hyb" || k == "hybridrrf") return PipelineKind::HybridRRF;
    if (k == "shy") return PipelineKind::SHy;
    throw_invalid("unknown pipeline '" + std::string(text) + "'");
}

void RetrievalParams::validate() const {
    if (top_k == 0) throw_invalid("top_k must be positive");
    if (!(rrf_k > 0.0)) throw_invalid("rrf_k must be positive");
    if (per_doc_m == 0) throw_invalid("per_doc_m must be positive");
    if (min_score < 0.0) throw_invalid("min_score must be non-negative");
}

std::vector<std::string> RetrievedContext::chunk_ids() const {
    std::vector<std::string> ids;
    ids.reserve(items.size());
    for (const auto& i : items) ids.push_back(i.chunk.chunk_id);
    return ids;
}

std::vector<ScoredChunk> rrf_fuse(const std::vector<std::vector<std::string>>& rankings, double rrf_k) {
    if (rankings.empty()) throw_invalid("rrf_fuse needs at least one ranking");
    if (!(rrf_k > 0.0)) throw_invalid("rrf_k must be positive");
    std::map<std::string, double> scores;
    for (const auto& list : rankings) {
        std::unordered_set<std::string> seen;
        for (std::size_t r = 0; r < list.size(); ++r) {
            if (!seen.insert(list[r]).second) continue;
            scores[list[r]] += 1.0 / (rrf_k + static_cast<double>(r + 1));
        }
    }
    std::vector<ScoredChunk> fused;
    fused.reserve(scores.size());
    for (const auto& [id, score] : scores) fused.push_back({id, "", score, 0});
    rank_and_truncate(fused, fused.size());
    return fused;
}

namespace {

std::vector<std::string> ids_of(const std::vector<ScoredChunk>& list) {
    std::vector<std::string> ids;
    ids.reserve(list.size());
    for (const auto& s : list) ids.push_back(s.chunk_id);
    return ids;
}

std::vector<ScoredChunk> interleave(const std::vector<ScoredChunk>& first, const std::vector<ScoredChunk>& second) {
    std::vector<ScoredChunk> out;
    std::unordered_set<std::string> seen;
    for (std::size_t i = 0; i < std::max(first.size(), second.size()); ++i) {
        for (const auto* list : {&first, &second}) {
            if (i < list->size() && seen.insert((*list)[i].chunk_id).second) out.push_back((*list)[i]);
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i].rank = i + 1;
        out[i].score = 1.0 / static_cast<double>(i + 1);
    }
    return out;
}

void apply_min_score(std::vector<ScoredChunk>& items, double min_score) {
    if (min_score <= 0.0) return;
    std::erase_if(items, [&](const ScoredChunk& s) { return s.score < min_score; });
    for (std::size_t i = 0; i < items.size(); ++i) items[i].rank = i + 1;
}

std::vector<ContextItem> resolve(const IndexSet& indexes, const std::vector<ScoredChunk>& scored) {
    std::vector<ContextItem> items;
    items.reserve(scored.size());
    for (const auto& s : scored) {
        const Chunk* chunk = indexes.chunks.find(s.chunk_id);
        if (chunk == nullptr) throw Error(ErrorKind::NotFound, "unknown chunk id '" + s.chunk_id + "'");
        items.push_back({s, chunk->text});
    }
    return items;
}

}  // namespace

std::vector<ScoredChunk> hybrid_search(const IndexSet& indexes, const std::string& query,
                                       const EmbeddingVector& query_vec, const RetrievalParams& params,
                                       std::size_t limit, ChunkSubset subset) {
    const std::size_t candidates = 2 * limit;
    const auto vec = vector_search(indexes, query_vec, candidates, subset);
    const auto lex = fulltext_search(indexes, query, candidates, subset);
    std::vector<ScoredChunk> merged;
    if (params.fusion == FusionMode::Interleave) {
        merged = interleave(vec, lex);
    } else {
        merged = rrf_fuse({ids_of(vec), ids_of(lex)}, params.rrf_k);
    }
    if (merged.size() > limit) merged.resize(limit);
    for (auto& m : merged) m.doc_id = indexes.chunk_doc_ids.at(indexes.chunks.index_of(m.chunk_id));
    return merged;
}

RetrievedContext shy_retrieve(const std::string& query, const IndexSet& indexes, const RetrievalParams& params,
                              const Embedder& embedder) {
    params.validate();
    RetrievedContext ctx;
    ctx.pipeline = PipelineKind::SHy;
    ctx.query = query;
    ctx.groups.emplace();
    if (indexes.doc_order.empty()) return ctx;

    const EmbeddingVector query_vec = embedder.embed(query);
    std::vector<std::vector<ScoredChunk>> per_doc(indexes.doc_order.size());
    parallel_for(per_doc.size(), std::thread::hardware_concurrency(), [&](std::size_t d) {
        const auto& subset = indexes.doc_chunks.at(indexes.doc_order[d]);
        auto fused = hybrid_search(indexes, query, query_vec, params, params.per_doc_m, &subset);
        if (params.shy_drop_zero) {
            std::set<std::string> lexical;
            for (const auto& s : fulltext_search(indexes, query, subset.size(), &subset)) lexical.insert(s.chunk_id);
            std::erase_if(fused, [&](const ScoredChunk& s) { return !lexical.count(s.chunk_id); });
        }
        apply_min_score(fused, params.min_score);
        per_doc[d] = std::move(fused);
    });

    std::vector<std::size_t> order;
    for (std::size_t d = 0; d < per_doc.size(); ++d) {
        if (!per_doc[d].empty()) order.push_back(d);
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double sa = per_doc[a].front().score;
        const double sb = per_doc[b].front().score;
        if (sa != sb) return sa > sb;
        return indexes.doc_order[a] < indexes.doc_order[b];
    });

    for (const auto d : order) {
        ContextGroup group{indexes.doc_order[d], resolve(indexes, per_doc[d])};
        for (auto item : group.items) {
            item.chunk.rank = ctx.items.size() + 1;
            ctx.items.push_back(std::move(item));
        }
        ctx.groups->push_back(std::move(group));
    }
    return ctx;
}

RetrievedContext retrieve(PipelineKind kind, const std::string& query, const IndexSet& indexes,
                          const RetrievalParams& params, const Embedder& embedder) {
    params.validate();
    if (kind == PipelineKind::SHy) return shy_retrieve(query, indexes, params, embedder);

    RetrievedContext ctx;
    ctx.pipeline = kind;
    ctx.query = query;
    std::vector<ScoredChunk> scored;
    switch (kind) {
        case PipelineKind::Vanilla:
            return ctx;
        case PipelineKind::Vector:
            scored = vector_search(indexes, embedder.embed(query), params.top_k);
            break;
        case PipelineKind::FullText:
            scored = fulltext_search(indexes, query, params.top_k);
            break;
        case PipelineKind::HybridRRF:
            scored = hybrid_search(indexes, query, embedder.embed(query), params, params.top_k);
            break;
        case PipelineKind::SHy:
            break;
    }
    apply_min_score(scored, params.min_score);
    ctx.items = resolve(indexes, scored);
    return ctx;
}

RetrievedContext retrieve(PipelineKind kind, const std::string& query, const IndexSet& indexes,
                          const RetrievalParams& params, const ProviderConfig& provider) {
    return retrieve(kind, query, indexes, params, *make_embedder(provider));
}

}  // namespace ragev
