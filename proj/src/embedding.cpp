#include "ragev/embedding.hpp"

#include <algorithm>
#include <cmath>

#include "ragev/error.hpp"
#include "ragev/text.hpp"

namespace ragev {
namespace {

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

}  // namespace

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    for (const double v : values_) {
        if (!std::isfinite(v)) throw_invalid("embedding contains a non-finite value");
    }
}

double EmbeddingVector::norm() const {
    double sum = 0.0;
    for (const double v : values_) sum += v * v;
    return std::sqrt(sum);
}

double cosine(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw_invalid("cosine of vectors with different dimensions (" + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw_invalid("cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    return cosine(std::span<const double>(a.values()), std::span<const double>(b.values()));
}

void ProviderConfig::validate() const {
    if (kind == ProviderKind::RemoteEndpoint) {
        if (!endpoint_url || endpoint_url->empty()) {
            throw_invalid("remote embedding provider requires endpoint_url");
        }
    } else if (dim == 0) {
        throw_invalid("embedding dimension must be positive");
    }
}

EmbeddingVector Embedder::embed(std::string_view text) const {
    const std::string owned(text);
    auto out = embed_batch(std::span<const std::string>(&owned, 1));
    return std::move(out.front());
}

std::vector<EmbeddingVector> Embedder::embed_tokens(std::string_view text) const {
    if (trim(text).empty()) throw_invalid("cannot embed empty text");
    const auto tokens = tokenize(text);
    return embed_batch(tokens);
}

HashedNgramEmbedder::HashedNgramEmbedder(std::size_t dim, std::string model_name)
    : dim_(dim), model_name_(std::move(model_name)) {
    if (dim_ == 0) throw_invalid("embedding dimension must be positive");
}

EmbeddingVector HashedNgramEmbedder::embed_one(std::string_view text) const {
    if (trim(text).empty()) throw_invalid("cannot embed empty text");
    std::vector<char32_t> cps{U' '};
    const auto decoded = decode_utf8(to_lower_ascii(text));
    cps.insert(cps.end(), decoded.begin(), decoded.end());
    cps.push_back(U' ');

    std::vector<double> values(dim_, 0.0);
    for (std::size_t i = 0; i + 3 <= cps.size(); ++i) {
        std::string gram;
        for (std::size_t j = i; j < i + 3; ++j) append_utf8(gram, cps[j]);
        const std::uint64_t h = fnv1a64(gram, kHashSeed);
        const double sign = (h >> 63) ? -1.0 : 1.0;
        values[h % dim_] += sign;
    }
    double norm = 0.0;
    for (const double v : values) norm += v * v;
    if (norm == 0.0) {
        // Every gram cancelled out; fall back to a single whole-text bucket.
        values[fnv1a64(text, kHashSeed) % dim_] = 1.0;
        return EmbeddingVector(std::move(values));
    }
    norm = std::sqrt(norm);
    for (double& v : values) v /= norm;
    return EmbeddingVector(std::move(values));
}

std::vector<EmbeddingVector> HashedNgramEmbedder::embed_batch(std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed_one(t));
    return out;
}

RemoteEmbedder::RemoteEmbedder(const ProviderConfig& config) : model_name_(config.model_name) {
    config.validate();
    HttpSettings http = config.http;
    http.base_url = *config.endpoint_url;
    client_ = std::make_unique<JsonHttpClient>(settings_from_env(std::move(http)));
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const std::string> texts) const {
    for (const auto& t : texts) {
        if (trim(t).empty()) throw_invalid("cannot embed empty text");
    }
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    std::size_t dim = 0;
    for (std::size_t begin = 0; begin < texts.size(); begin += kBatchSize) {
        const std::size_t end = std::min(texts.size(), begin + kBatchSize);
        nlohmann::json body;
        body["model"] = model_name_;
        body["input"] = std::vector<std::string>(texts.begin() + static_cast<std::ptrdiff_t>(begin),
                                                 texts.begin() + static_cast<std::ptrdiff_t>(end));
        const auto response = client_->post("/v1/embeddings", body);
        const auto data = response.find("data");
        if (data == response.end() || !data->is_array() || data->size() != end - begin) {
            throw TransportError("embedding response has wrong 'data' length", 1, 200);
        }
        for (const auto& row : *data) {
            std::vector<double> values;
            try {
                values = row.at("embedding").get<std::vector<double>>();
            } catch (const nlohmann::json::exception& e) {
                throw TransportError(std::string("malformed embedding row: ") + e.what(), 1, 200);
            }
            if (values.empty()) throw TransportError("empty embedding in response", 1, 200);
            if (dim == 0) dim = values.size();
            if (values.size() != dim) throw TransportError("inconsistent embedding dimensions", 1, 200);
            out.emplace_back(std::move(values));
        }
    }
    return out;
}

std::shared_ptr<const Embedder> make_embedder(const ProviderConfig& config) {
    config.validate();
    if (config.kind == ProviderKind::RemoteEndpoint) return std::make_shared<RemoteEmbedder>(config);
    return std::make_shared<HashedNgramEmbedder>(config.dim, config.model_name);
}

EmbeddingVector embed(const ProviderConfig& provider, std::string_view text) {
    return make_embedder(provider)->embed(text);
}

std::vector<EmbeddingVector> embed_tokens(const ProviderConfig& provider, std::string_view text) {
    return make_embedder(provider)->embed_tokens(text);
}

}  // namespace ragev
