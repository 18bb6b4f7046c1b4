#include "ragev/indexing.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "ragev/error.hpp"
#include "ragev/text.hpp"

namespace ragev {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

// Sorts hits by score descending, ties by ascending id, then truncates.
template <typename IdOf>
void sort_hits(std::vector<Hit>& hits, std::size_t k, IdOf id_of) {
    std::sort(hits.begin(), hits.end(), [&](const Hit& a, const Hit& b) {
        if (a.score != b.score) return a.score > b.score;
        return id_of(a.chunk) < id_of(b.chunk);
    });
    if (hits.size() > k) hits.resize(k);
}

std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

std::vector<std::string> distinct_terms(const std::string& query) {
    auto terms = metric_tokens(query);
    std::sort(terms.begin(), terms.end());
    terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
    return terms;
}

}  // namespace

void rank_and_truncate(std::vector<ScoredChunk>& items, std::size_t k) {
    std::sort(items.begin(), items.end(), [](const ScoredChunk& a, const ScoredChunk& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk_id < b.chunk_id;
    });
    if (items.size() > k) items.resize(k);
    for (std::size_t i = 0; i < items.size(); ++i) items[i].rank = i + 1;
}

// --- ChunkTable ---

void ChunkTable::add(Chunk chunk) {
    if (by_id_.count(chunk.chunk_id)) {
        throw Error(ErrorKind::Conflict, "duplicate chunk id '" + chunk.chunk_id + "'");
    }
    by_id_.emplace(chunk.chunk_id, chunks_.size());
    chunks_.push_back(std::move(chunk));
}

const Chunk* ChunkTable::find(const std::string& chunk_id) const {
    auto it = by_id_.find(chunk_id);
    return it == by_id_.end() ? nullptr : &chunks_[it->second];
}

std::size_t ChunkTable::index_of(const std::string& chunk_id) const {
    auto it = by_id_.find(chunk_id);
    if (it == by_id_.end()) throw Error(ErrorKind::NotFound, "unknown chunk id '" + chunk_id + "'");
    return it->second;
}

// --- InvertedIndex ---

InvertedIndex InvertedIndex::build(const ChunkTable& chunks) {
    InvertedIndex index;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
        const Chunk& chunk = chunks.at(i);
        const auto terms = metric_tokens(chunk.text);
        std::map<std::string, std::uint32_t> tf;
        for (const auto& t : terms) ++tf[t];
        for (const auto& [term, count] : tf) {
            index.postings_[term].push_back({static_cast<std::uint32_t>(i), count});
        }
        index.chunk_ids_.push_back(chunk.chunk_id);
        index.lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
    }
    index.finalize();
    return index;
}

InvertedIndex InvertedIndex::from_parts(std::vector<std::string> chunk_ids, std::vector<std::uint32_t> lengths,
                                        std::map<std::string, std::vector<Posting>> postings) {
    if (chunk_ids.size() != lengths.size()) throw_invalid("chunk ids and lengths differ in size");
    InvertedIndex index;
    index.chunk_ids_ = std::move(chunk_ids);
    index.lengths_ = std::move(lengths);
    index.postings_ = std::move(postings);
    for (const auto& [term, list] : index.postings_) {
        for (const auto& p : list) {
            if (p.chunk >= index.chunk_ids_.size()) {
                throw_invalid("posting for '" + term + "' references unknown chunk");
            }
        }
    }
    index.finalize();
    return index;
}

void InvertedIndex::finalize() {
    if (lengths_.empty()) {
        avg_length_ = 0.0;
        return;
    }
    double total = 0.0;
    for (const auto len : lengths_) total += len;
    avg_length_ = total / static_cast<double>(lengths_.size());
}

std::vector<Hit> InvertedIndex::search(const std::string& query, std::size_t k, ChunkSubset subset) const {
    if (k == 0) throw_invalid("k must be at least 1");

    // Collection statistics, over the subset when one is given.
    std::vector<char> member;
    double n = static_cast<double>(chunk_ids_.size());
    double avg = avg_length_;
    if (subset != nullptr) {
        member.assign(chunk_ids_.size(), 0);
        double total = 0.0;
        for (const auto i : *subset) {
            member.at(i) = 1;
            total += lengths_[i];
        }
        n = static_cast<double>(subset->size());
        avg = subset->empty() ? 0.0 : total / n;
    }
    if (n == 0.0) return {};

    std::map<std::size_t, double> scores;
    for (const auto& term : distinct_terms(query)) {
        auto it = postings_.find(term);
        if (it == postings_.end()) continue;
        std::size_t df = 0;
        for (const auto& p : it->second) {
            if (subset == nullptr || member[p.chunk]) ++df;
        }
        if (df == 0) continue;
        const double idf = std::log((n - static_cast<double>(df) + 0.5) / (static_cast<double>(df) + 0.5) + 1.0);
        for (const auto& p : it->second) {
            if (subset != nullptr && !member[p.chunk]) continue;
            const double tf = p.term_frequency;
            const double norm = avg > 0.0 ? lengths_[p.chunk] / avg : 0.0;
            const double denom = tf + params_.k1 * (1.0 - params_.b + params_.b * norm);
            scores[p.chunk] += idf * tf * (params_.k1 + 1.0) / denom;
        }
    }

    std::vector<Hit> hits;
    hits.reserve(scores.size());
    for (const auto& [chunk, score] : scores) {
        if (score > 0.0) hits.push_back({chunk, score});
    }
    sort_hits(hits, k, [&](std::size_t i) -> const std::string& { return chunk_ids_[i]; });
    return hits;
}

double InvertedIndex::score(const std::string& query, std::size_t chunk) const {
    const auto hits = search(query, chunk_ids_.size() == 0 ? 1 : chunk_ids_.size());
    for (const auto& h : hits) {
        if (h.chunk == chunk) return h.score;
    }
    return 0.0;
}

// --- VectorIndex ---

void VectorIndex::add(const std::string& chunk_id, const EmbeddingVector& vec) {
    if (dim_ == 0) dim_ = vec.dim();
    if (vec.dim() != dim_) {
        throw_invalid("vector for '" + chunk_id + "' has dimension " + std::to_string(vec.dim()) +
                      ", index expects " + std::to_string(dim_));
    }
    ids_.push_back(chunk_id);
    for (const double v : vec.values()) data_.push_back(static_cast<float>(v));
}

VectorIndex VectorIndex::from_parts(std::vector<std::string> ids, std::size_t dim, std::vector<float> data) {
    if (data.size() != ids.size() * dim) throw_invalid("vector data size does not match ids x dim");
    VectorIndex index(dim);
    index.ids_ = std::move(ids);
    index.data_ = std::move(data);
    return index;
}

double VectorIndex::similarity(const EmbeddingVector& query, std::size_t i) const {
    const auto r = row(i);
    const auto& q = query.values();
    double dot = 0.0, nq = 0.0, nr = 0.0;
    for (std::size_t d = 0; d < dim_; ++d) {
        const double x = r[d];
        dot += q[d] * x;
        nq += q[d] * q[d];
        nr += x * x;
    }
    if (nq == 0.0 || nr == 0.0) throw_invalid("cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(nq) * std::sqrt(nr)), -1.0, 1.0);
}

std::vector<Hit> VectorIndex::search(const EmbeddingVector& query, std::size_t k, ChunkSubset subset) const {
    if (k == 0) throw_invalid("k must be at least 1");
    if (query.dim() != dim_) {
        throw_invalid("query dimension " + std::to_string(query.dim()) + " does not match index dimension " +
                      std::to_string(dim_));
    }
    const std::vector<std::size_t> everything = subset == nullptr ? all_indices(ids_.size())
                                                                  : std::vector<std::size_t>{};
    const auto& candidates = subset == nullptr ? everything : *subset;
    std::vector<Hit> hits;
    hits.reserve(candidates.size());
    for (const auto i : candidates) hits.push_back({i, similarity(query, i)});
    sort_hits(hits, k, [&](std::size_t i) -> const std::string& { return ids_[i]; });
    return hits;
}

// --- IndexSet ---

IndexSet build_indexes(const Collection& collection, const ChunkingParams& params, const Embedder& embedder) {
    if (collection.empty()) throw_invalid("cannot index an empty collection");
    params.validate();

    IndexSet set;
    set.chunking = params;
    set.embedding_model = embedder.model_name();
    for (const auto& doc : collection.documents()) {
        auto chunks = chunk_fixed(doc, params);
        if (chunks.empty()) continue;
        set.doc_order.push_back(doc.doc_id);
        auto& list = set.doc_chunks[doc.doc_id];
        for (auto& c : chunks) {
            list.push_back(set.chunks.size());
            set.chunk_doc_ids.push_back(c.doc_id);
            set.chunks.add(std::move(c));
        }
    }
    set.lexical = InvertedIndex::build(set.chunks);

    constexpr std::size_t kBatch = 64;
    const std::size_t total = set.chunks.size();
    for (std::size_t begin = 0; begin < total; begin += kBatch) {
        const std::size_t end = std::min(total, begin + kBatch);
        std::vector<std::string> texts;
        for (std::size_t i = begin; i < end; ++i) texts.push_back(set.chunks.at(i).text);
        std::vector<EmbeddingVector> vecs;
        try {
            vecs = embedder.embed_batch(texts);
        } catch (const TransportError& e) {
            throw TransportError("indexing aborted after embedding " + std::to_string(begin) + " of " +
                                     std::to_string(total) + " chunks: " + e.what(),
                                 e.attempts(), e.last_status());
        }
        for (std::size_t i = begin; i < end; ++i) set.vectors.add(set.chunks.at(i).chunk_id, vecs[i - begin]);
    }
    return set;
}

IndexSet build_indexes(const Collection& collection, const ChunkingParams& params,
                       const ProviderConfig& provider) {
    return build_indexes(collection, params, *make_embedder(provider));
}

std::vector<ScoredChunk> to_scored(const IndexSet& indexes, const std::vector<Hit>& hits) {
    std::vector<ScoredChunk> out;
    out.reserve(hits.size());
    for (std::size_t i = 0; i < hits.size(); ++i) {
        const auto& h = hits[i];
        out.push_back({indexes.chunks.at(h.chunk).chunk_id, indexes.chunk_doc_ids.at(h.chunk), h.score, i + 1});
    }
    return out;
}

std::vector<ScoredChunk> fulltext_search(const IndexSet& indexes, const std::string& query, std::size_t k,
                                         ChunkSubset subset) {
    return to_scored(indexes, indexes.lexical.search(query, k, subset));
}

std::vector<ScoredChunk> vector_search(const IndexSet& indexes, const EmbeddingVector& query_vec,
                                       std::size_t k, ChunkSubset subset) {
    return to_scored(indexes, indexes.vectors.search(query_vec, k, subset));
}

// --- snapshot ---

namespace {

void write_le_floats(std::ostream& out, const std::vector<float>& data) {
    std::vector<char> bytes(data.size() * 4);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(data[i]);
        for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

std::vector<float> read_le_floats(const std::string& bytes) {
    std::vector<float> data(bytes.size() / 4);
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + b])) << (8 * b);
        }
        data[i] = std::bit_cast<float>(bits);
    }
    return data;
}

std::ifstream open_in(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
    return in;
}

}  // namespace

void save_snapshot(const IndexSet& indexes, const fs::path& dir) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "chunks.jsonl", std::ios::binary | std::ios::trunc);
        const auto& lengths = indexes.lexical.chunk_lengths();
        for (std::size_t i = 0; i < indexes.chunks.size(); ++i) {
            const Chunk& c = indexes.chunks.at(i);
            ordered_json j;
            j["id"] = c.chunk_id;
            j["doc_id"] = c.doc_id;
            j["ordinal"] = c.ordinal;
            j["start"] = c.start;
            j["end"] = c.end;
            j["terms"] = lengths[i];
            j["text"] = c.text;
            out << j.dump() << '\n';
        }
    }
    {
        std::ofstream out(dir / "postings.jsonl", std::ios::binary | std::ios::trunc);
        const auto& ids = indexes.lexical.chunk_ids();
        for (const auto& [term, list] : indexes.lexical.postings()) {
            ordered_json j;
            j["term"] = term;
            ordered_json arr = ordered_json::array();
            for (const auto& p : list) arr.push_back(ordered_json::array({ids[p.chunk], p.term_frequency}));
            j["postings"] = std::move(arr);
            out << j.dump() << '\n';
        }
    }
    {
        std::ofstream out(dir / "vectors.bin", std::ios::binary | std::ios::trunc);
        out << json(indexes.vectors.ids()).dump() << '\n';
        write_le_floats(out, indexes.vectors.data());
    }
    {
        ordered_json meta;
        meta["size_tokens"] = indexes.chunking.size_tokens;
        meta["overlap_tokens"] = indexes.chunking.overlap_tokens;
        meta["embedding_model"] = indexes.embedding_model;
        meta["dim"] = indexes.vectors.dim();
        meta["doc_order"] = indexes.doc_order;
        std::ofstream out(dir / "meta.json", std::ios::binary | std::ios::trunc);
        out << meta.dump(2) << '\n';
    }
}

IndexSet load_snapshot(const fs::path& dir) {
    IndexSet set;
    json meta;
    {
        auto in = open_in(dir / "meta.json");
        try {
            meta = json::parse(in);
        } catch (const json::exception& e) {
            throw ParseError(1, std::string("meta.json: ") + e.what());
        }
    }
    set.chunking.size_tokens = meta.at("size_tokens").get<std::size_t>();
    set.chunking.overlap_tokens = meta.at("overlap_tokens").get<std::size_t>();
    set.embedding_model = meta.at("embedding_model").get<std::string>();
    set.doc_order = meta.at("doc_order").get<std::vector<std::string>>();
    const auto dim = meta.at("dim").get<std::size_t>();

    std::vector<std::string> ids;
    std::vector<std::uint32_t> lengths;
    {
        auto in = open_in(dir / "chunks.jsonl");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const auto j = json::parse(line);
                Chunk c;
                c.chunk_id = j.at("id").get<std::string>();
                c.doc_id = j.at("doc_id").get<std::string>();
                c.ordinal = j.at("ordinal").get<std::size_t>();
                c.start = j.at("start").get<std::size_t>();
                c.end = j.at("end").get<std::size_t>();
                c.text = j.at("text").get<std::string>();
                ids.push_back(c.chunk_id);
                lengths.push_back(j.at("terms").get<std::uint32_t>());
                set.doc_chunks[c.doc_id].push_back(set.chunks.size());
                set.chunk_doc_ids.push_back(c.doc_id);
                set.chunks.add(std::move(c));
            } catch (const json::exception& e) {
                throw ParseError(line_no, std::string("chunks.jsonl: ") + e.what());
            }
        }
    }
    std::map<std::string, std::vector<InvertedIndex::Posting>> postings;
    {
        auto in = open_in(dir / "postings.jsonl");
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                const auto j = json::parse(line);
                auto& list = postings[j.at("term").get<std::string>()];
                for (const auto& p : j.at("postings")) {
                    const auto idx = set.chunks.index_of(p.at(0).get<std::string>());
                    list.push_back({static_cast<std::uint32_t>(idx), p.at(1).get<std::uint32_t>()});
                }
            } catch (const json::exception& e) {
                throw ParseError(line_no, std::string("postings.jsonl: ") + e.what());
            }
        }
    }
    set.lexical = InvertedIndex::from_parts(ids, std::move(lengths), std::move(postings));
    {
        auto in = open_in(dir / "vectors.bin");
        std::string header;
        std::getline(in, header);
        std::vector<std::string> vec_ids;
        try {
            vec_ids = json::parse(header).get<std::vector<std::string>>();
        } catch (const json::exception& e) {
            throw ParseError(1, std::string("vectors.bin header: ") + e.what());
        }
        if (vec_ids != ids) throw ParseError(1, "vectors.bin ids do not match chunks.jsonl");
        const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (bytes.size() != vec_ids.size() * dim * 4) {
            throw ParseError(2, "vectors.bin payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                                    std::to_string(vec_ids.size() * dim * 4));
        }
        set.vectors = VectorIndex::from_parts(std::move(vec_ids), dim, read_le_floats(bytes));
    }
    return set;
}

}  // namespace ragev
