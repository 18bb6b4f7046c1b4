#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ragev/chunking.hpp"
#include "ragev/corpus_store.hpp"
#include "ragev/embedding.hpp"
#include "ragev/generation.hpp"
#include "ragev/indexing.hpp"
#include "ragev/labels.hpp"
#include "ragev/metrics.hpp"
#include "ragev/retrieval.hpp"

namespace ragev {

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

// Question categories 0..6.
enum class QuestionType { GeneralSummary = 0, YesNo, Numerical, Table, Focused, Figure, Subtitles };

const char* to_string(QuestionType type);

struct QAItem {
    std::string item_id;
    std::string question;
    AnswerLabel gold_short = AnswerLabel::None;
    std::string gold_long;  // trimmed on load
    int question_type = 1;
    std::vector<std::string> contexts;
    std::vector<std::string> source_doc_ids;

    GoldAnswer gold() const { return {item_id, gold_short, gold_long}; }
};

// JSON Lines: id, question, short, long, type, optional contexts / source_docs.
// Throws ParseError(line) for malformed records and InvalidLabel for short
// answers outside yes/no/maybe/none.
std::vector<QAItem> load_qa_dataset(const std::filesystem::path& path);
QAItem qa_item_from_json(const nlohmann::json& record, std::size_t line);
nlohmann::ordered_json qa_item_to_json(const QAItem& item);

// Usability rubric score 0 (no or wrong answer) .. 5 (correct and complete).
struct HumanJudgment {
    std::string item_id;
    int score = 0;
    std::string comment;
};

std::vector<HumanJudgment> load_human_judgments(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Factorial design
// ---------------------------------------------------------------------------

namespace factor {
inline constexpr const char* kChunkSize = "CKw";
inline constexpr const char* kEmbedding = "EMB";
inline constexpr const char* kPipeline = "PIP";
inline constexpr const char* kTopK = "#c";
inline constexpr const char* kReranker = "RER";
inline constexpr const char* kThreshold = "RTH";
inline constexpr const char* kModel = "MOD";
}  // namespace factor

struct Factor {
    std::string code;
    std::vector<std::string> levels;
};

struct ExperimentFactors {
    std::vector<Factor> factors;
    std::vector<std::string> norag_models;
    // Optional per-level backends: EMB level -> embedder, MOD level -> generator.
    std::map<std::string, ProviderConfig> embedders;
    std::map<std::string, GeneratorConfig> generators;
};

// Factors file (JSON):
//   {"factors":[{"code":"CKw","levels":["100","256"]},...],
//    "norag":["GPT"],
//    "embedders":{"ADA":{"kind":"remote","model":"...","url":"..."}},
//    "generators":{"GPT":{"kind":"remote","model":"...","url":"..."}}}
ExperimentFactors load_factors(const std::filesystem::path& path);
ExperimentFactors factors_from_json(const nlohmann::json& j);

struct ExperimentConfig {
    std::vector<std::pair<std::string, std::string>> levels;  // factor code -> level code, factor order
    std::string mnemonic;
    bool norag = false;

    std::optional<std::string> level(const std::string& code) const;
    bool operator==(const ExperimentConfig&) const = default;
};

// Full Cartesian product (last factor varies fastest) followed by one
// NORAG-<model> config per model. Throws InvalidArgument on empty factors,
// duplicate factor or level codes, or level codes containing '-', '/' or
// whitespace.
std::vector<ExperimentConfig> expand_factorial(const ExperimentFactors& factors,
                                               const std::vector<std::string>& norag_models);

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

struct RunSettings {
    ChunkingParams chunking;             // CKw levels override size_tokens
    ProviderConfig provider;             // used for EMB levels without an explicit backend
    std::map<std::string, ProviderConfig> embedders;
    GeneratorConfig generator;           // used for MOD levels without an explicit backend
    std::map<std::string, GeneratorConfig> generators;
    RetrievalParams retrieval;
    PipelineKind pipeline = PipelineKind::HybridRRF;  // when no PIP factor is present
    ProviderConfig metric_provider;      // token vectors for BertScore
    std::uint64_t seed = 42;
    std::size_t concurrency = 4;
    double max_failure_fraction = 0.2;
};

// Everything a config needs, with factor levels applied over the settings.
struct ResolvedConfig {
    bool norag = false;
    ChunkingParams chunking;
    ProviderConfig provider;
    PipelineKind pipeline = PipelineKind::Vanilla;
    RetrievalParams retrieval;
    GeneratorConfig generator;
};

ResolvedConfig resolve_config(const ExperimentConfig& config, const RunSettings& settings);

// Shares built indexes between configs with the same chunking and embedder.
class IndexCache {
public:
    std::shared_ptr<const IndexSet> get(const Collection& collection, const ChunkingParams& chunking,
                                        const ProviderConfig& provider);
    std::size_t size() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const IndexSet>> cache_;
};

struct ItemResult {
    std::string item_id;
    bool failed = false;
    std::string error;
    std::vector<std::string> retrieved;
    AnswerLabel gold = AnswerLabel::None;
    AnswerLabel predicted = AnswerLabel::None;
    std::optional<bool> correct;  // unset when gold is none
    std::string answer;
    std::vector<std::string> cited;
    std::size_t unknown_citations = 0;
    bool unparsed = false;
    bool truncated = false;
    RougeScore rouge1, rouge2, rougeL, rougeLsum;
    BertScore bert;
};

struct MetricSummary {
    double mean = 0.0;
    double sem = 0.0;  // sample stdev / sqrt(n); 0 when n == 1
    std::size_t n = 0;
};

// mean and standard error of the mean; throws InvalidArgument on empty input.
MetricSummary summarize(const std::vector<double>& values);

// Metric names in report order: accuracy, rouge{1,2,L,Lsum}_{r,p,f}, bert_{p,r,f}.
const std::vector<std::string>& metric_names();
// Per-item value of a metric; nullopt when it does not apply (failed item,
// accuracy on gold none).
std::optional<double> metric_value(const ItemResult& item, const std::string& metric);

struct RunRecord {
    ExperimentConfig config;
    std::uint64_t seed = 0;
    std::string collection;
    std::string started_at;
    double wall_clock_s = 0.0;
    std::vector<ItemResult> items;
    std::map<std::string, MetricSummary> aggregates;
    ConfusionMatrix3 confusion;
    std::size_t failed = 0;
    bool complete = false;  // has an AGGREGATE line
};

// Aggregates over non-failed items.
std::map<std::string, MetricSummary> compute_aggregates(const std::vector<ItemResult>& items);
ConfusionMatrix3 compute_confusion(const std::vector<ItemResult>& items);

// Runs one config over the dataset. When record_path is given the header and
// item lines are written before aggregates are computed and appended. Items
// that fail with a transport error are recorded as failed; more than
// settings.max_failure_fraction failures aborts the run with TransportError
// and leaves the record without an AGGREGATE line.
RunRecord run_experiment(const ExperimentConfig& config, const Collection& collection,
                         const std::vector<QAItem>& dataset, const RunSettings& settings,
                         IndexCache& cache, const std::optional<std::filesystem::path>& record_path = {});

// Run record file: HEADER line, one ITEM line per dataset item, AGGREGATE line.
void write_run_record(const RunRecord& record, const std::filesystem::path& path);
RunRecord read_run_record(const std::filesystem::path& path);
std::string run_record_header_line(const RunRecord& record);
std::string run_record_item_line(const ItemResult& item);
std::string run_record_aggregate_line(const RunRecord& record);

struct SweepResult {
    std::vector<RunRecord> records;
    std::size_t executed = 0;
    std::size_t resumed = 0;
};

// Runs every config, writing <out_dir>/runs/<mnemonic>.jsonl. Configs whose
// record already holds an AGGREGATE line are loaded instead of re-run.
SweepResult run_sweep(const std::vector<ExperimentConfig>& configs, const Collection& collection,
                      const std::vector<QAItem>& dataset, const RunSettings& settings,
                      const std::filesystem::path& out_dir);

// Complete records under <run_dir>/runs, sorted by mnemonic.
std::vector<RunRecord> load_run_records(const std::filesystem::path& run_dir);

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

struct ReportRow {
    std::vector<std::string> key;  // one level per group_by code
    std::size_t runs = 0;
    std::map<std::string, MetricSummary> metrics;
    ConfusionMatrix3 confusion;
};

struct ReportTable {
    std::vector<std::string> group_by;
    std::vector<ReportRow> rows;  // sorted by key
};

// Pools per-item values of every record in a group. Configs without a level
// for a grouped factor fall under "NORAG" (baseline runs) or "-".
ReportTable aggregate(const std::vector<RunRecord>& records, const std::vector<std::string>& group_by);

std::string render_report_text(const ReportTable& table);
std::string render_report_csv(const ReportTable& table);
// Tidy per-item export for external statistics tooling.
std::string render_items_csv(const std::vector<RunRecord>& records);

struct Correlation {
    double r = 0.0;
    std::size_t n = 0;
    std::size_t dropped = 0;  // ids present on only one side
};

double pearson(const std::vector<double>& xs, const std::vector<double>& ys);

// Pearson r over the id-join of human scores and machine values. Throws
// InsufficientData with fewer than 3 pairs or a constant side.
Correlation correlate(const std::vector<HumanJudgment>& human, const std::map<std::string, double>& machine);

}  // namespace ragev
