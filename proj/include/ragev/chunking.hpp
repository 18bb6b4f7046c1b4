#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ragev/corpus_store.hpp"

namespace ragev {

struct ChunkingParams {
    std::size_t size_tokens = 256;
    std::size_t overlap_tokens = 32;

    // Throws InvalidArgument unless size > 0 and overlap < size.
    void validate() const;
};

// A half-open token range [start, end) of one document.
struct Chunk {
    std::string chunk_id;
    std::string doc_id;
    std::size_t ordinal = 0;
    std::size_t start = 0;
    std::size_t end = 0;
    std::string text;  // span tokens joined by single spaces

    std::size_t token_count() const { return end - start; }
    bool operator==(const Chunk&) const = default;
};

// "<doc_id>#<ordinal, zero padded to 4>" so lexical order follows ordinal order.
std::string make_chunk_id(const std::string& doc_id, std::size_t ordinal);

// Fixed-size sliding window over tokenize(doc.text). Windows start at multiples
// of size - overlap; a trailing window that lies inside its predecessor is
// dropped.
std::vector<Chunk> chunk_fixed(const Document& doc, const ChunkingParams& params);

}  // namespace ragev
