#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ragev/embedding.hpp"
#include "ragev/labels.hpp"

namespace ragev {

// Counts of contiguous n-token tuples.
class NgramMultiset {
public:
    NgramMultiset(const std::vector<std::string>& tokens, std::size_t n);

    std::size_t n() const { return n_; }
    std::size_t total() const { return total_; }
    const std::map<std::vector<std::string>, std::size_t>& counts() const { return counts_; }

    // Sum over shared n-grams of min(count here, count there).
    std::size_t overlap(const NgramMultiset& other) const;

private:
    std::size_t n_;
    std::size_t total_ = 0;
    std::map<std::vector<std::string>, std::size_t> counts_;
};

struct RougeScore {
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
};

struct BertScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Harmonic mean, 0 when p + r == 0.
double f1_of(double precision, double recall);

// Texts are compared on metric_tokens(). Recall is matched reference n-grams
// over reference total; precision divides by the candidate total instead.
// Empty denominators give 0.
RougeScore rouge_n(std::string_view candidate, std::string_view reference, std::size_t n);
RougeScore rouge_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                   std::size_t n);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

// Sentence-level: each reference sentence takes the union of its LCS matches
// against every candidate sentence; matched tokens are clipped by the remaining
// token counts on both sides, then summed over the whole text.
RougeScore rouge_lsum(std::string_view candidate, std::string_view reference);

// Greedy max-cosine alignment, no idf weighting. Throws InvalidArgument when
// either side is empty.
BertScore bert_score(std::span<const EmbeddingVector> candidate, std::span<const EmbeddingVector> reference);

// Rows are gold yes/no/maybe, columns predicted yes/no/maybe. Predictions of
// None land in the per-row unparsed column.
struct ConfusionMatrix3 {
    std::array<std::array<std::size_t, 3>, 3> counts{};
    std::array<std::size_t, 3> unparsed{};

    std::size_t total() const;
    std::size_t trace() const;
    std::size_t unparsed_total() const;
    ConfusionMatrix3& operator+=(const ConfusionMatrix3& other);
    bool operator==(const ConfusionMatrix3&) const = default;
};

struct ClassificationReport {
    std::size_t n = 0;
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    ConfusionMatrix3 confusion;
};

// Gold labels must be yes/no/maybe. Macro averages run over the classes that
// occur in gold.
ClassificationReport classification_metrics(const std::vector<AnswerLabel>& predicted,
                                            const std::vector<AnswerLabel>& gold);
ClassificationReport classification_from_confusion(const ConfusionMatrix3& confusion);
// Same, restricted to items whose gold label is yes or no.
ClassificationReport binary_classification_metrics(const std::vector<AnswerLabel>& predicted,
                                                   const std::vector<AnswerLabel>& gold);

}  // namespace ragev
