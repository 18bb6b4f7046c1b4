#include "ragev/chunking.hpp"

#include <algorithm>
#include <cstdio>

#include "ragev/error.hpp"
#include "ragev/text.hpp"

namespace ragev {

void ChunkingParams::validate() const {
    if (size_tokens == 0) throw_invalid("chunk size must be positive");
    if (overlap_tokens >= size_tokens) {
        throw_invalid("chunk overlap (" + std::to_string(overlap_tokens) +
                      ") must be smaller than chunk size (" + std::to_string(size_tokens) + ")");
    }
}

std::string make_chunk_id(const std::string& doc_id, std::size_t ordinal) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "#%04zu", ordinal);
    return doc_id + buf;
}

std::vector<Chunk> chunk_fixed(const Document& doc, const ChunkingParams& params) {
    params.validate();
    const auto tokens = tokenize(doc.text);
    const std::size_t count = tokens.size();
    const std::size_t stride = params.size_tokens - params.overlap_tokens;

    std::vector<Chunk> chunks;
    std::size_t prev_end = 0;
    for (std::size_t start = 0; start < count; start += stride) {
        const std::size_t end = std::min(start + params.size_tokens, count);
        if (!chunks.empty() && end <= prev_end) break;
        Chunk chunk;
        chunk.doc_id = doc.doc_id;
        chunk.ordinal = chunks.size();
        chunk.chunk_id = make_chunk_id(doc.doc_id, chunk.ordinal);
        chunk.start = start;
        chunk.end = end;
        chunk.text = join(std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(start),
                                                   tokens.begin() + static_cast<std::ptrdiff_t>(end)),
                          " ");
        chunks.push_back(std::move(chunk));
        prev_end = end;
    }
    return chunks;
}

}  // namespace ragev
