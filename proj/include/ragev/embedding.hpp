#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragev/http_client.hpp"

namespace ragev {

// Dense vector with all-finite components.
class EmbeddingVector {
public:
    EmbeddingVector() = default;
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dim() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double norm() const;

    bool operator==(const EmbeddingVector&) const = default;

private:
    std::vector<double> values_;
};

// dot(a,b) / (|a| |b|), clamped to [-1, 1]. Throws InvalidArgument on a
// dimension mismatch or a zero vector.
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine(std::span<const double> a, std::span<const double> b);

enum class ProviderKind { RemoteEndpoint, HashedNgram };

struct ProviderConfig {
    ProviderKind kind = ProviderKind::HashedNgram;
    std::string model_name = "hashed";
    std::optional<std::string> endpoint_url;
    std::size_t dim = 256;  // remote providers take the dimension from the response
    HttpSettings http;      // remote only; base_url is filled from endpoint_url

    void validate() const;
};

class Embedder {
public:
    virtual ~Embedder() = default;

    // One vector per input, same order. Throws InvalidArgument for blank input.
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const = 0;
    virtual std::string model_name() const = 0;

    EmbeddingVector embed(std::string_view text) const;
    // One vector per token of tokenize(text).
    std::vector<EmbeddingVector> embed_tokens(std::string_view text) const;
};

// Character 3-grams of the lowercased text (padded with one space on each
// side) hashed into `dim` signed buckets, then L2-normalized.
class HashedNgramEmbedder final : public Embedder {
public:
    static constexpr std::uint64_t kHashSeed = 0x9e3779b97f4a7c15ULL;

    explicit HashedNgramEmbedder(std::size_t dim = 256, std::string model_name = "hashed");

    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;
    std::string model_name() const override { return model_name_; }
    std::size_t dim() const { return dim_; }

    EmbeddingVector embed_one(std::string_view text) const;

private:
    std::size_t dim_;
    std::string model_name_;
};

// Speaks POST {base}/v1/embeddings with {"model","input":[...]}.
class RemoteEmbedder final : public Embedder {
public:
    static constexpr std::size_t kBatchSize = 64;

    explicit RemoteEmbedder(const ProviderConfig& config);

    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts) const override;
    std::string model_name() const override { return model_name_; }

private:
    std::string model_name_;
    std::unique_ptr<JsonHttpClient> client_;
};

std::shared_ptr<const Embedder> make_embedder(const ProviderConfig& config);

EmbeddingVector embed(const ProviderConfig& provider, std::string_view text);
std::vector<EmbeddingVector> embed_tokens(const ProviderConfig& provider, std::string_view text);

}  // namespace ragev
