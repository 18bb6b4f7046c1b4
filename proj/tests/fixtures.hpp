#pragma once

// Shared fixtures for the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "ragev/bench.hpp"
#include "ragev/corpus_store.hpp"
#include "ragev/embedding.hpp"
#include "ragev/error.hpp"
#include "ragev/text.hpp"

namespace fixtures {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("ragev-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Looks texts up in a fixed table; anything else is an error.
class TableEmbedder final : public ragev::Embedder {
public:
    explicit TableEmbedder(std::map<std::string, std::vector<double>> table) : table_(std::move(table)) {}

    std::vector<ragev::EmbeddingVector> embed_batch(std::span<const std::string> texts) const override {
        std::vector<ragev::EmbeddingVector> out;
        for (const auto& t : texts) {
            auto it = table_.find(t);
            if (it == table_.end()) ragev::throw_invalid("no fixture vector for '" + t + "'");
            out.emplace_back(it->second);
        }
        return out;
    }
    std::string model_name() const override { return "table"; }

private:
    std::map<std::string, std::vector<double>> table_;
};

// Keyword / paraphrase corpus. Relevant chunks are "kw#0000" and "para#0000".
struct DominanceFixture {
    ragev::Collection collection;
    std::string query;
    std::map<std::string, std::vector<double>> vectors;
};

inline DominanceFixture dominance_fixture() {
    DominanceFixture f;
    f.collection = ragev::Collection("fixture-dominance", "dominance", ragev::CollectionKind::Relevant);
    const std::vector<std::pair<std::string, std::string>> docs = {
        {"kw", "zolpidem dosage guidance for elderly patients"},
        {"para", "recommended sleep aid amounts shrink for the elderly"},
        {"dV", "older adults need smaller hypnotic doses at night"},
        {"dF", "zolpidem dosage tables"},
    };
    for (const auto& [id, text] : docs) f.collection.add({id, id, text, std::nullopt, {}});
    f.query = "zolpidem dosage elderly";
    const double s = std::sqrt(1.0 - 0.9 * 0.9);
    const double h = std::sqrt(1.0 - 0.5 * 0.5);
    f.vectors = {
        {f.query, {1, 0, 0, 0}},
        {docs[0].second, {0.5, 0, h, 0}},
        {docs[1].second, {1, 0, 0, 0}},
        {docs[2].second, {0.9, s, 0, 0}},
        {docs[3].second, {0, 0, 0, 1}},
    };
    return f;
}

// Five documents about different topics; "dom" repeats the query terms in every
// chunk so it owns the global top ranks.
inline ragev::Collection horizontal_fixture() {
    ragev::Collection c("fixture-horizontal", "horizontal", ragev::CollectionKind::Relevant);
    c.add({"dom", "Insulin",
           "insulin resistance raises fasting glucose levels. insulin resistance and glucose tolerance tests. "
           "glucose uptake falls with insulin resistance. insulin resistance predicts type two diabetes glucose.",
           std::nullopt, {}});
    c.add({"bone", "Bone", "calcium and vitamin d support bone density in older women with osteoporosis.",
           std::nullopt, {}});
    c.add({"heart", "Heart", "statins lower cholesterol and reduce cardiovascular events in adults.",
           std::nullopt, {}});
    c.add({"lung", "Lung", "smoking cessation improves lung function and spirometry within months.",
           std::nullopt, {}});
    c.add({"skin", "Skin", "topical retinoids treat acne vulgaris with mild irritation of the skin.",
           std::nullopt, {}});
    return c;
}

// Synthetic yes/no/maybe items with 3-4 context snippets each, built from a
// small vocabulary with a fixed seed.
inline std::vector<ragev::QAItem> synthetic_dataset(std::size_t n, std::uint64_t seed = 7) {
    static const std::vector<std::string> drugs = {"metformin", "aspirin", "atorvastatin", "lisinopril",
                                                   "omeprazole", "sertraline", "warfarin", "insulin"};
    static const std::vector<std::string> conditions = {"mortality", "stroke", "hypertension", "relapse",
                                                        "fractures", "delirium", "infection", "pain"};
    static const std::vector<std::string> groups = {"elderly patients", "children", "pregnant women",
                                                    "smokers", "athletes", "outpatients"};
    static const std::vector<std::string> findings = {
        "reduced the incidence of", "did not change the rate of", "had an uncertain effect on"};
    std::mt19937_64 rng(seed);
    auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };
    std::vector<ragev::QAItem> items;
    for (std::size_t i = 0; i < n; ++i) {
        ragev::QAItem item;
        item.item_id = "q" + std::to_string(1000 + i);
        const std::string drug = pick(drugs), cond = pick(conditions), group = pick(groups);
        const int label = static_cast<int>(i % 3);
        item.gold_short = label == 0 ? ragev::AnswerLabel::Yes
                          : label == 1 ? ragev::AnswerLabel::No
                                       : ragev::AnswerLabel::Maybe;
        item.question = "Does " + drug + " reduce " + cond + " in " + group + "?";
        item.gold_long = "In a cohort of " + std::to_string(50 + rng() % 900) + " " + group + ", " + drug + " " +
                         findings[static_cast<std::size_t>(label)] + " " + cond +
                         ". Follow-up lasted " + std::to_string(1 + rng() % 10) + " years and adherence was " +
                         std::to_string(60 + rng() % 40) + " percent.";
        item.question_type = 1;
        const std::size_t ctx = 3 + rng() % 2;
        for (std::size_t c = 0; c < ctx; ++c) {
            item.contexts.push_back("Study " + std::to_string(c + 1) + " enrolled " + group + " receiving " + drug +
                                    " and measured " + cond + " over " + std::to_string(1 + rng() % 5) +
                                    " years with " + pick(findings) + " secondary outcomes.");
        }
        items.push_back(std::move(item));
    }
    return items;
}

inline ragev::Collection collection_of(const std::vector<ragev::QAItem>& items) {
    ragev::Collection c("fixture-contexts", "contexts", ragev::CollectionKind::Relevant);
    for (const auto& item : items) {
        for (std::size_t k = 0; k < item.contexts.size(); ++k) {
            c.add({item.item_id + "-c" + std::to_string(k), item.item_id, item.contexts[k], std::nullopt, {}});
        }
    }
    return c;
}

inline void write_dataset(const fs::path& path, const std::vector<ragev::QAItem>& items) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& item : items) out << ragev::qa_item_to_json(item).dump() << "\n";
}

}  // namespace fixtures
