#include "ragev/metrics.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>

#include "ragev/error.hpp"
#include "ragev/text.hpp"

namespace ragev {

NgramMultiset::NgramMultiset(const std::vector<std::string>& tokens, std::size_t n) : n_(n) {
    if (n == 0) throw_invalid("n-gram order must be positive");
    if (tokens.size() < n) return;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        ++counts_[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                           tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
        ++total_;
    }
}

std::size_t NgramMultiset::overlap(const NgramMultiset& other) const {
    std::size_t hits = 0;
    for (const auto& [gram, count] : counts_) {
        auto it = other.counts_.find(gram);
        if (it != other.counts_.end()) hits += std::min(count, it->second);
    }
    return hits;
}

double f1_of(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

namespace {

RougeScore make_score(std::size_t hits, std::size_t ref_total, std::size_t cand_total) {
    RougeScore s;
    s.recall = ref_total ? static_cast<double>(hits) / static_cast<double>(ref_total) : 0.0;
    s.precision = cand_total ? static_cast<double>(hits) / static_cast<double>(cand_total) : 0.0;
    s.f1 = f1_of(s.precision, s.recall);
    return s;
}

// Indices into `ref` of one longest common subsequence with `cand`.
std::vector<std::size_t> lcs_ref_indices(const std::vector<std::string>& ref, const std::vector<std::string>& cand) {
    const std::size_t m = ref.size(), n = cand.size();
    std::vector<std::vector<std::uint32_t>> table(m + 1, std::vector<std::uint32_t>(n + 1, 0));
    for (std::size_t i = 1; i <= m; ++i) {
        for (std::size_t j = 1; j <= n; ++j) {
            table[i][j] = ref[i - 1] == cand[j - 1] ? table[i - 1][j - 1] + 1
                                                    : std::max(table[i - 1][j], table[i][j - 1]);
        }
    }
    std::vector<std::size_t> out;
    std::size_t i = m, j = n;
    while (i > 0 && j > 0) {
        if (ref[i - 1] == cand[j - 1]) {
            out.push_back(i - 1);
            --i;
            --j;
        } else if (table[i - 1][j] >= table[i][j - 1]) {
            --i;
        } else {
            --j;
        }
    }
    std::reverse(out.begin(), out.end());
    return out;
}

}  // namespace

RougeScore rouge_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                   std::size_t n) {
    const NgramMultiset cand(candidate, n);
    const NgramMultiset ref(reference, n);
    return make_score(ref.overlap(cand), ref.total(), cand.total());
}

RougeScore rouge_n(std::string_view candidate, std::string_view reference, std::size_t n) {
    return rouge_n(metric_tokens(candidate), metric_tokens(reference), n);
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
    const auto cand = metric_tokens(candidate);
    const auto ref = metric_tokens(reference);
    return make_score(lcs_length(cand, ref), ref.size(), cand.size());
}

RougeScore rouge_lsum(std::string_view candidate, std::string_view reference) {
    std::vector<std::vector<std::string>> cand_sents, ref_sents;
    std::unordered_map<std::string, std::size_t> cand_counts, ref_counts;
    std::size_t cand_total = 0, ref_total = 0;
    for (const auto& s : split_sentences(candidate)) {
        auto toks = metric_tokens(s);
        if (toks.empty()) continue;
        for (const auto& t : toks) ++cand_counts[t];
        cand_total += toks.size();
        cand_sents.push_back(std::move(toks));
    }
    for (const auto& s : split_sentences(reference)) {
        auto toks = metric_tokens(s);
        if (toks.empty()) continue;
        for (const auto& t : toks) ++ref_counts[t];
        ref_total += toks.size();
        ref_sents.push_back(std::move(toks));
    }

    std::size_t hits = 0;
    for (const auto& ref : ref_sents) {
        std::vector<char> in_union(ref.size(), 0);
        for (const auto& cand : cand_sents) {
            for (const auto idx : lcs_ref_indices(ref, cand)) in_union[idx] = 1;
        }
        for (std::size_t i = 0; i < ref.size(); ++i) {
            if (!in_union[i]) continue;
            auto& rc = ref_counts[ref[i]];
            auto& cc = cand_counts[ref[i]];
            if (rc > 0 && cc > 0) {
                ++hits;
                --rc;
                --cc;
            }
        }
    }
    return make_score(hits, ref_total, cand_total);
}

BertScore bert_score(std::span<const EmbeddingVector> candidate, std::span<const EmbeddingVector> reference) {
    if (candidate.empty() || reference.empty()) throw_invalid("bert_score needs non-empty token lists");
    std::vector<double> best_cand(candidate.size(), -1.0);
    std::vector<double> best_ref(reference.size(), -1.0);
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        for (std::size_t j = 0; j < reference.size(); ++j) {
            const double sim = cosine(candidate[i], reference[j]);
            best_cand[i] = std::max(best_cand[i], sim);
            best_ref[j] = std::max(best_ref[j], sim);
        }
    }
    BertScore s;
    for (const double v : best_cand) s.precision += v;
    for (const double v : best_ref) s.recall += v;
    s.precision /= static_cast<double>(candidate.size());
    s.recall /= static_cast<double>(reference.size());
    s.f1 = f1_of(s.precision, s.recall);
    return s;
}

// --- classification ---

std::size_t ConfusionMatrix3::total() const {
    std::size_t t = unparsed_total();
    for (const auto& row : counts) {
        for (const auto c : row) t += c;
    }
    return t;
}

std::size_t ConfusionMatrix3::trace() const { return counts[0][0] + counts[1][1] + counts[2][2]; }

std::size_t ConfusionMatrix3::unparsed_total() const { return unparsed[0] + unparsed[1] + unparsed[2]; }

ConfusionMatrix3& ConfusionMatrix3::operator+=(const ConfusionMatrix3& other) {
    for (std::size_t g = 0; g < 3; ++g) {
        for (std::size_t p = 0; p < 3; ++p) counts[g][p] += other.counts[g][p];
        unparsed[g] += other.unparsed[g];
    }
    return *this;
}

ClassificationReport classification_from_confusion(const ConfusionMatrix3& m) {
    ClassificationReport r;
    r.confusion = m;
    r.n = m.total();
    if (r.n == 0) return r;
    r.accuracy = static_cast<double>(m.trace()) / static_cast<double>(r.n);
    std::size_t classes = 0;
    for (std::size_t c = 0; c < 3; ++c) {
        const std::size_t gold_count = m.counts[c][0] + m.counts[c][1] + m.counts[c][2] + m.unparsed[c];
        if (gold_count == 0) continue;
        ++classes;
        const std::size_t predicted = m.counts[0][c] + m.counts[1][c] + m.counts[2][c];
        const double tp = static_cast<double>(m.counts[c][c]);
        const double precision = predicted ? tp / static_cast<double>(predicted) : 0.0;
        const double recall = tp / static_cast<double>(gold_count);
        r.macro_precision += precision;
        r.macro_recall += recall;
        r.macro_f1 += f1_of(precision, recall);
    }
    if (classes > 0) {
        r.macro_precision /= static_cast<double>(classes);
        r.macro_recall /= static_cast<double>(classes);
        r.macro_f1 /= static_cast<double>(classes);
    }
    return r;
}

ClassificationReport classification_metrics(const std::vector<AnswerLabel>& predicted,
                                            const std::vector<AnswerLabel>& gold) {
    if (predicted.size() != gold.size()) {
        throw_invalid("prediction and gold lists differ in length (" + std::to_string(predicted.size()) + " vs " +
                      std::to_string(gold.size()) + ")");
    }
    ConfusionMatrix3 m;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] == AnswerLabel::None) throw_invalid("gold label 'none' cannot be scored");
        const auto g = static_cast<std::size_t>(gold[i]);
        if (predicted[i] == AnswerLabel::None) {
            ++m.unparsed[g];
        } else {
            ++m.counts[g][static_cast<std::size_t>(predicted[i])];
        }
    }
    return classification_from_confusion(m);
}

ClassificationReport binary_classification_metrics(const std::vector<AnswerLabel>& predicted,
                                                   const std::vector<AnswerLabel>& gold) {
    if (predicted.size() != gold.size()) throw_invalid("prediction and gold lists differ in length");
    std::vector<AnswerLabel> p, g;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (gold[i] == AnswerLabel::Yes || gold[i] == AnswerLabel::No) {
            p.push_back(predicted[i]);
            g.push_back(gold[i]);
        }
    }
    return classification_metrics(p, g);
}

}  // namespace ragev
