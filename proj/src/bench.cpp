#include "ragev/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "ragev/error.hpp"
#include "ragev/parallel.hpp"
#include "ragev/text.hpp"

namespace ragev {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Datasets
// ---------------------------------------------------------------------------

const char* to_string(QuestionType type) {
    switch (type) {
        case QuestionType::GeneralSummary: return "general/summary";
        case QuestionType::YesNo: return "yes/no";
        case QuestionType::Numerical: return "numerical";
        case QuestionType::Table: return "table";
        case QuestionType::Focused: return "focused";
        case QuestionType::Figure: return "figure";
        case QuestionType::Subtitles: return "subtitles";
    }
    return "yes/no";
}

namespace {

template <typename Fn>
void for_each_jsonl(const fs::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::exception& e) {
            throw ParseError(line_no, e.what());
        }
        fn(record, line_no);
    }
}

std::string string_field(const json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw ParseError(line, std::string("missing or non-string '") + key + "'");
    }
    return it->get<std::string>();
}

std::vector<std::string> string_list(const json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_array()) throw ParseError(line, std::string("'") + key + "' must be a list");
    std::vector<std::string> out;
    for (const auto& v : *it) {
        if (!v.is_string()) throw ParseError(line, std::string("'") + key + "' must hold strings");
        out.push_back(v.get<std::string>());
    }
    return out;
}

}  // namespace

QAItem qa_item_from_json(const json& record, std::size_t line) {
    if (!record.is_object()) throw ParseError(line, "record must be an object");
    QAItem item;
    item.item_id = string_field(record, "id", line);
    item.question = string_field(record, "question", line);
    if (trim(item.question).empty()) throw ParseError(line, "question is empty");
    const std::string short_text = string_field(record, "short", line);
    const auto label = parse_label(short_text);
    if (!label) {
        throw Error(ErrorKind::InvalidLabel,
                    "line " + std::to_string(line) + ": short answer '" + short_text + "' is not yes/no/maybe/none");
    }
    item.gold_short = *label;
    item.gold_long = trim(string_field(record, "long", line));
    auto type = record.find("type");
    if (type == record.end() || !type->is_number_integer()) throw ParseError(line, "missing integer 'type'");
    item.question_type = type->get<int>();
    if (item.question_type < 0 || item.question_type > 6) {
        throw ParseError(line, "question type " + std::to_string(item.question_type) + " outside 0..6");
    }
    item.contexts = string_list(record, "contexts", line);
    item.source_doc_ids = string_list(record, "source_docs", line);
    return item;
}

ordered_json qa_item_to_json(const QAItem& item) {
    ordered_json j;
    j["id"] = item.item_id;
    j["question"] = item.question;
    j["short"] = to_string(item.gold_short);
    j["long"] = item.gold_long;
    j["type"] = item.question_type;
    if (!item.contexts.empty()) j["contexts"] = item.contexts;
    if (!item.source_doc_ids.empty()) j["source_docs"] = item.source_doc_ids;
    return j;
}

std::vector<QAItem> load_qa_dataset(const fs::path& path) {
    std::vector<QAItem> items;
    std::set<std::string> ids;
    for_each_jsonl(path, [&](const json& record, std::size_t line) {
        auto item = qa_item_from_json(record, line);
        if (!ids.insert(item.item_id).second) {
            throw Error(ErrorKind::Conflict, "line " + std::to_string(line) + ": duplicate item id '" +
                                                 item.item_id + "'");
        }
        items.push_back(std::move(item));
    });
    return items;
}

std::vector<HumanJudgment> load_human_judgments(const fs::path& path) {
    std::vector<HumanJudgment> out;
    for_each_jsonl(path, [&](const json& record, std::size_t line) {
        HumanJudgment h;
        h.item_id = string_field(record, "id", line);
        auto score = record.find("score");
        if (score == record.end() || !score->is_number_integer()) throw ParseError(line, "missing integer 'score'");
        h.score = score->get<int>();
        if (h.score < 0 || h.score > 5) throw ParseError(line, "score outside 0..5");
        if (auto c = record.find("comment"); c != record.end() && c->is_string()) h.comment = c->get<std::string>();
        out.push_back(std::move(h));
    });
    return out;
}

// ---------------------------------------------------------------------------
// Factorial design
// ---------------------------------------------------------------------------

namespace {

std::optional<std::string> env_base_url() {
    if (const char* v = std::getenv("RAGEV_BASE_URL"); v && *v) return std::string(v);
    return std::nullopt;
}

ProviderConfig provider_from_json(const json& j) {
    ProviderConfig p;
    const std::string kind = to_lower_ascii(j.value("kind", std::string("hashed")));
    if (kind == "remote") {
        p.kind = ProviderKind::RemoteEndpoint;
    } else if (kind == "hashed") {
        p.kind = ProviderKind::HashedNgram;
    } else {
        throw_invalid("unknown embedder kind '" + kind + "'");
    }
    p.model_name = j.value("model", p.model_name);
    if (j.contains("url")) {
        p.endpoint_url = j.at("url").get<std::string>();
    } else if (p.kind == ProviderKind::RemoteEndpoint) {
        p.endpoint_url = env_base_url();
    }
    p.dim = j.value("dim", p.dim);
    p.validate();
    return p;
}

GeneratorConfig generator_from_json(const json& j) {
    GeneratorConfig g;
    g.kind = parse_generator_kind(j.value("kind", std::string("echo")));
    g.model_name = j.value("model", g.model_name);
    if (j.contains("url")) {
        g.endpoint_url = j.at("url").get<std::string>();
    } else if (g.kind == GeneratorKind::RemoteChat) {
        g.endpoint_url = env_base_url();
    }
    g.temperature = j.value("temperature", g.temperature);
    g.max_tokens = j.value("max_tokens", g.max_tokens);
    g.corrupt_level = j.value("corrupt_level", g.corrupt_level);
    g.validate();
    return g;
}

void check_level_code(const std::string& factor, const std::string& level) {
    if (level.empty()) throw_invalid("factor " + factor + " has an empty level code");
    for (const char c : level) {
        if (c == '-' || c == '/' || c == '\\' || std::isspace(static_cast<unsigned char>(c))) {
            throw_invalid("level code '" + level + "' of factor " + factor +
                          " may not contain '-', slashes or whitespace");
        }
    }
}

}  // namespace

ExperimentFactors factors_from_json(const json& j) {
    if (!j.is_object() || !j.contains("factors") || !j.at("factors").is_array()) {
        throw_invalid("factors file needs a 'factors' array");
    }
    ExperimentFactors f;
    for (const auto& entry : j.at("factors")) {
        Factor factor;
        factor.code = entry.at("code").get<std::string>();
        factor.levels = entry.at("levels").get<std::vector<std::string>>();
        f.factors.push_back(std::move(factor));
    }
    if (j.contains("norag")) f.norag_models = j.at("norag").get<std::vector<std::string>>();
    if (j.contains("embedders")) {
        for (const auto& [code, cfg] : j.at("embedders").items()) f.embedders.emplace(code, provider_from_json(cfg));
    }
    if (j.contains("generators")) {
        for (const auto& [code, cfg] : j.at("generators").items()) {
            f.generators.emplace(code, generator_from_json(cfg));
        }
    }
    return f;
}

ExperimentFactors load_factors(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open factors file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError(1, std::string("factors file: ") + e.what());
    }
    try {
        return factors_from_json(j);
    } catch (const json::exception& e) {
        throw ParseError(1, std::string("factors file: ") + e.what());
    }
}

std::optional<std::string> ExperimentConfig::level(const std::string& code) const {
    for (const auto& [c, l] : levels) {
        if (c == code) return l;
    }
    return std::nullopt;
}

std::vector<ExperimentConfig> expand_factorial(const ExperimentFactors& factors,
                                               const std::vector<std::string>& norag_models) {
    std::set<std::string> codes;
    for (const auto& f : factors.factors) {
        if (f.code.empty()) throw_invalid("factor with an empty code");
        if (!codes.insert(f.code).second) throw_invalid("duplicate factor code '" + f.code + "'");
        if (f.levels.empty()) throw_invalid("factor " + f.code + " has no levels");
        std::set<std::string> seen;
        for (const auto& l : f.levels) {
            check_level_code(f.code, l);
            if (!seen.insert(l).second) throw_invalid("duplicate level '" + l + "' in factor " + f.code);
        }
    }

    std::vector<ExperimentConfig> out;
    if (!factors.factors.empty()) {
        std::vector<std::size_t> odometer(factors.factors.size(), 0);
        while (true) {
            ExperimentConfig cfg;
            std::vector<std::string> parts;
            for (std::size_t f = 0; f < factors.factors.size(); ++f) {
                const auto& level = factors.factors[f].levels[odometer[f]];
                cfg.levels.emplace_back(factors.factors[f].code, level);
                parts.push_back(level);
            }
            cfg.mnemonic = join(parts, "-");
            out.push_back(std::move(cfg));

            std::size_t f = factors.factors.size();
            while (f > 0) {
                --f;
                if (++odometer[f] < factors.factors[f].levels.size()) break;
                odometer[f] = 0;
                if (f == 0) {
                    f = factors.factors.size() + 1;
                    break;
                }
            }
            if (f == factors.factors.size() + 1) break;
        }
    }

    std::set<std::string> models;
    for (const auto& model : norag_models) {
        check_level_code("NORAG", model);
        if (!models.insert(model).second) throw_invalid("duplicate NORAG model '" + model + "'");
        ExperimentConfig cfg;
        cfg.levels.emplace_back(factor::kModel, model);
        cfg.mnemonic = "NORAG-" + model;
        cfg.norag = true;
        out.push_back(std::move(cfg));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

namespace {

std::size_t parse_count(const std::string& text, const char* what) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(text, &used);
        if (used != text.size() || v <= 0) throw std::invalid_argument(text);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw_invalid(std::string(what) + " level '" + text + "' is not a positive integer");
    }
}

double parse_real(const std::string& text, const char* what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw_invalid(std::string(what) + " level '" + text + "' is not a number");
    }
}

std::string provider_key(const ProviderConfig& p) {
    return std::to_string(static_cast<int>(p.kind)) + "|" + p.model_name + "|" + std::to_string(p.dim) + "|" +
           p.endpoint_url.value_or("");
}

}  // namespace

ResolvedConfig resolve_config(const ExperimentConfig& config, const RunSettings& settings) {
    ResolvedConfig r;
    r.norag = config.norag;
    r.chunking = settings.chunking;
    r.provider = settings.provider;
    r.pipeline = config.norag ? PipelineKind::Vanilla : settings.pipeline;
    r.retrieval = settings.retrieval;
    r.generator = settings.generator;
    r.generator.seed = settings.seed;

    if (auto v = config.level(factor::kChunkSize)) {
        // "<size>" or "<size>o<overlap>"
        const auto o = v->find('o');
        r.chunking.size_tokens = parse_count(v->substr(0, o), "CKw");
        if (o != std::string::npos) {
            const std::string overlap = v->substr(o + 1);
            r.chunking.overlap_tokens = overlap == "0" ? 0 : parse_count(overlap, "CKw overlap");
        } else if (r.chunking.overlap_tokens >= r.chunking.size_tokens) {
            r.chunking.overlap_tokens = r.chunking.size_tokens / 4;
        }
        r.chunking.validate();
    }
    if (auto v = config.level(factor::kEmbedding)) {
        if (auto it = settings.embedders.find(*v); it != settings.embedders.end()) {
            r.provider = it->second;
        } else {
            r.provider.model_name = *v;
        }
    }
    if (auto v = config.level(factor::kPipeline); v && !config.norag) r.pipeline = parse_pipeline(*v);
    if (auto v = config.level(factor::kTopK)) r.retrieval.top_k = parse_count(*v, "#c");
    if (auto v = config.level(factor::kReranker)) {
        const std::string code = to_lower_ascii(*v);
        if (code == "int" || code == "off" || code == "none") {
            r.retrieval.fusion = FusionMode::Interleave;
        } else if (code.rfind("rrf", 0) == 0) {
            r.retrieval.fusion = FusionMode::Rrf;
            if (code.size() > 3) r.retrieval.rrf_k = parse_real(code.substr(3), "RER");
        } else {
            throw_invalid("RER level '" + *v + "' is not RRF, RRF<k>, INT or OFF");
        }
    }
    if (auto v = config.level(factor::kThreshold)) r.retrieval.min_score = parse_real(*v, "RTH");
    if (auto v = config.level(factor::kModel)) {
        if (auto it = settings.generators.find(*v); it != settings.generators.end()) {
            r.generator = it->second;
            r.generator.seed = settings.seed;
        } else {
            r.generator.model_name = *v;
        }
    }
    r.retrieval.validate();
    r.generator.validate();
    return r;
}

std::shared_ptr<const IndexSet> IndexCache::get(const Collection& collection, const ChunkingParams& chunking,
                                                const ProviderConfig& provider) {
    const std::string key = collection.collection_id() + "|" + std::to_string(chunking.size_tokens) + "|" +
                            std::to_string(chunking.overlap_tokens) + "|" + provider_key(provider);
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    auto built = std::make_shared<const IndexSet>(build_indexes(collection, chunking, provider));
    cache_.emplace(key, built);
    return built;
}

std::size_t IndexCache::size() const {
    std::lock_guard lock(mutex_);
    return cache_.size();
}

MetricSummary summarize(const std::vector<double>& values) {
    if (values.empty()) throw_invalid("cannot summarize an empty sample");
    MetricSummary s;
    s.n = values.size();
    double sum = 0.0;
    for (const double v : values) sum += v;
    s.mean = sum / static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (const double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sem = std::sqrt(ss / static_cast<double>(s.n - 1)) / std::sqrt(static_cast<double>(s.n));
    }
    return s;
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {
        "accuracy",  "rouge1_r",    "rouge1_p",    "rouge1_f",    "rouge2_r", "rouge2_p", "rouge2_f",
        "rougeL_r",  "rougeL_p",    "rougeL_f",    "rougeLsum_r", "rougeLsum_p", "rougeLsum_f",
        "bert_p",    "bert_r",      "bert_f",
    };
    return names;
}

std::optional<double> metric_value(const ItemResult& item, const std::string& metric) {
    if (item.failed) return std::nullopt;
    if (metric == "accuracy") {
        if (!item.correct) return std::nullopt;
        return *item.correct ? 1.0 : 0.0;
    }
    const auto rouge = [&](const RougeScore& s, char part) {
        return part == 'r' ? s.recall : part == 'p' ? s.precision : s.f1;
    };
    const char part = metric.back();
    if (metric.rfind("rouge1_", 0) == 0) return rouge(item.rouge1, part);
    if (metric.rfind("rouge2_", 0) == 0) return rouge(item.rouge2, part);
    if (metric.rfind("rougeLsum_", 0) == 0) return rouge(item.rougeLsum, part);
    if (metric.rfind("rougeL_", 0) == 0) return rouge(item.rougeL, part);
    if (metric == "bert_p") return item.bert.precision;
    if (metric == "bert_r") return item.bert.recall;
    if (metric == "bert_f") return item.bert.f1;
    throw_invalid("unknown metric '" + metric + "'");
}

std::map<std::string, MetricSummary> compute_aggregates(const std::vector<ItemResult>& items) {
    std::map<std::string, MetricSummary> out;
    for (const auto& name : metric_names()) {
        std::vector<double> values;
        for (const auto& item : items) {
            if (auto v = metric_value(item, name)) values.push_back(*v);
        }
        if (!values.empty()) out.emplace(name, summarize(values));
    }
    return out;
}

ConfusionMatrix3 compute_confusion(const std::vector<ItemResult>& items) {
    std::vector<AnswerLabel> predicted, gold;
    for (const auto& item : items) {
        if (item.failed || item.gold == AnswerLabel::None) continue;
        predicted.push_back(item.predicted);
        gold.push_back(item.gold);
    }
    return classification_metrics(predicted, gold).confusion;
}

namespace {

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ItemResult score_item(const QAItem& item, const ResolvedConfig& rc, const IndexSet* indexes,
                      const Embedder* retrieval_embedder, const Generator& generator,
                      const Embedder& metric_embedder) {
    ItemResult r;
    r.item_id = item.item_id;
    r.gold = item.gold_short;
    try {
        RetrievedContext ctx;
        ctx.query = item.question;
        if (!rc.norag && rc.pipeline != PipelineKind::Vanilla) {
            ctx = retrieve(rc.pipeline, item.question, *indexes, rc.retrieval, *retrieval_embedder);
        }
        r.retrieved = ctx.chunk_ids();
        const PromptBundle prompt = assemble_prompt(item.question, ctx);
        const GoldAnswer gold = item.gold();
        const Completion completion = generator.generate(prompt, &gold);
        const GeneratedAnswer answer = parse_answer(completion, prompt);
        r.predicted = answer.short_label;
        if (item.gold_short != AnswerLabel::None) r.correct = answer.short_label == item.gold_short;
        r.answer = answer.long_text;
        r.cited = answer.cited_labels;
        r.unknown_citations = answer.unknown_citations;
        r.unparsed = answer.unparsed;
        r.truncated = answer.truncated;

        r.rouge1 = rouge_n(answer.long_text, item.gold_long, 1);
        r.rouge2 = rouge_n(answer.long_text, item.gold_long, 2);
        r.rougeL = rouge_l(answer.long_text, item.gold_long);
        r.rougeLsum = rouge_lsum(answer.long_text, item.gold_long);
        if (!trim(answer.long_text).empty() && !trim(item.gold_long).empty()) {
            const auto cand = metric_embedder.embed_tokens(answer.long_text);
            const auto ref = metric_embedder.embed_tokens(item.gold_long);
            r.bert = bert_score(cand, ref);
        }
    } catch (const TransportError& e) {
        r = ItemResult{};
        r.item_id = item.item_id;
        r.gold = item.gold_short;
        r.failed = true;
        r.error = e.what();
    }
    return r;
}

ordered_json rouge_json(const RougeScore& s) { return ordered_json{{"r", s.recall}, {"p", s.precision}, {"f", s.f1}}; }

RougeScore rouge_from_json(const json& j) { return {j.at("r").get<double>(), j.at("p").get<double>(), j.at("f").get<double>()}; }

AnswerLabel label_from_json(const json& j) {
    const auto l = parse_label(j.get<std::string>());
    if (!l) throw_invalid("bad label in run record");
    return *l;
}

ordered_json classification_json(const ClassificationReport& c) {
    return ordered_json{{"n", c.n},
                        {"accuracy", c.accuracy},
                        {"macro_precision", c.macro_precision},
                        {"macro_recall", c.macro_recall},
                        {"macro_f1", c.macro_f1}};
}

}  // namespace

std::string run_record_header_line(const RunRecord& record) {
    ordered_json h;
    h["type"] = "HEADER";
    h["mnemonic"] = record.config.mnemonic;
    h["norag"] = record.config.norag;
    ordered_json levels = ordered_json::array();
    for (const auto& [code, level] : record.config.levels) levels.push_back(ordered_json::array({code, level}));
    h["levels"] = std::move(levels);
    h["seed"] = record.seed;
    h["collection"] = record.collection;
    h["dataset_size"] = record.items.size();
    h["started_at"] = record.started_at;
    return h.dump();
}

std::string run_record_item_line(const ItemResult& item) {
    ordered_json j;
    j["type"] = "ITEM";
    j["id"] = item.item_id;
    j["status"] = item.failed ? "failed" : "ok";
    if (item.failed) j["error"] = item.error;
    j["retrieved"] = item.retrieved;
    j["gold"] = to_string(item.gold);
    j["predicted"] = to_string(item.predicted);
    j["correct"] = item.correct ? json(*item.correct) : json(nullptr);
    j["answer"] = item.answer;
    j["cited"] = item.cited;
    j["unknown_citations"] = item.unknown_citations;
    j["unparsed"] = item.unparsed;
    j["truncated"] = item.truncated;
    j["rouge1"] = rouge_json(item.rouge1);
    j["rouge2"] = rouge_json(item.rouge2);
    j["rougeL"] = rouge_json(item.rougeL);
    j["rougeLsum"] = rouge_json(item.rougeLsum);
    j["bert"] = ordered_json{{"p", item.bert.precision}, {"r", item.bert.recall}, {"f", item.bert.f1}};
    return j.dump();
}

std::string run_record_aggregate_line(const RunRecord& record) {
    ordered_json a;
    a["type"] = "AGGREGATE";
    a["n_items"] = record.items.size();
    a["failed"] = record.failed;
    ordered_json metrics = ordered_json::object();
    for (const auto& name : metric_names()) {
        auto it = record.aggregates.find(name);
        if (it == record.aggregates.end()) continue;
        metrics[name] = ordered_json{{"mean", it->second.mean}, {"sem", it->second.sem}, {"n", it->second.n}};
    }
    a["metrics"] = std::move(metrics);

    std::vector<AnswerLabel> predicted, gold;
    for (const auto& item : record.items) {
        if (item.failed || item.gold == AnswerLabel::None) continue;
        predicted.push_back(item.predicted);
        gold.push_back(item.gold);
    }
    a["classification"] = classification_json(classification_from_confusion(record.confusion));
    a["binary"] = classification_json(binary_classification_metrics(predicted, gold));
    ordered_json matrix = ordered_json::array();
    for (const auto& row : record.confusion.counts) matrix.push_back(row);
    a["confusion"] = ordered_json{{"labels", {"yes", "no", "maybe"}},
                                  {"matrix", std::move(matrix)},
                                  {"unparsed", record.confusion.unparsed}};
    a["wall_clock_s"] = record.wall_clock_s;
    return a.dump();
}

void write_run_record(const RunRecord& record, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::NotFound, "cannot write " + path.string());
    out << run_record_header_line(record) << '\n';
    for (const auto& item : record.items) out << run_record_item_line(item) << '\n';
    if (record.complete) out << run_record_aggregate_line(record) << '\n';
}

RunRecord read_run_record(const fs::path& path) {
    RunRecord record;
    bool have_header = false;
    for_each_jsonl(path, [&](const json& j, std::size_t line) {
        try {
            const std::string type = j.at("type").get<std::string>();
            if (type == "HEADER") {
                have_header = true;
                record.config.mnemonic = j.at("mnemonic").get<std::string>();
                record.config.norag = j.at("norag").get<bool>();
                for (const auto& pair : j.at("levels")) {
                    record.config.levels.emplace_back(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
                }
                record.seed = j.at("seed").get<std::uint64_t>();
                record.collection = j.at("collection").get<std::string>();
                record.started_at = j.at("started_at").get<std::string>();
            } else if (type == "ITEM") {
                ItemResult item;
                item.item_id = j.at("id").get<std::string>();
                item.failed = j.at("status").get<std::string>() == "failed";
                if (item.failed) item.error = j.value("error", std::string());
                item.retrieved = j.at("retrieved").get<std::vector<std::string>>();
                item.gold = label_from_json(j.at("gold"));
                item.predicted = label_from_json(j.at("predicted"));
                if (!j.at("correct").is_null()) item.correct = j.at("correct").get<bool>();
                item.answer = j.at("answer").get<std::string>();
                item.cited = j.at("cited").get<std::vector<std::string>>();
                item.unknown_citations = j.at("unknown_citations").get<std::size_t>();
                item.unparsed = j.at("unparsed").get<bool>();
                item.truncated = j.at("truncated").get<bool>();
                item.rouge1 = rouge_from_json(j.at("rouge1"));
                item.rouge2 = rouge_from_json(j.at("rouge2"));
                item.rougeL = rouge_from_json(j.at("rougeL"));
                item.rougeLsum = rouge_from_json(j.at("rougeLsum"));
                const auto& b = j.at("bert");
                item.bert = {b.at("p").get<double>(), b.at("r").get<double>(), b.at("f").get<double>()};
                record.items.push_back(std::move(item));
            } else if (type == "AGGREGATE") {
                record.complete = true;
                record.failed = j.at("failed").get<std::size_t>();
                for (const auto& [name, m] : j.at("metrics").items()) {
                    record.aggregates[name] = {m.at("mean").get<double>(), m.at("sem").get<double>(),
                                               m.at("n").get<std::size_t>()};
                }
                const auto& c = j.at("confusion");
                for (std::size_t g = 0; g < 3; ++g) {
                    for (std::size_t p = 0; p < 3; ++p) {
                        record.confusion.counts[g][p] = c.at("matrix").at(g).at(p).get<std::size_t>();
                    }
                    record.confusion.unparsed[g] = c.at("unparsed").at(g).get<std::size_t>();
                }
                record.wall_clock_s = j.at("wall_clock_s").get<double>();
            } else {
                throw ParseError(line, "unknown record type '" + type + "'");
            }
        } catch (const json::exception& e) {
            throw ParseError(line, e.what());
        }
    });
    if (!have_header) throw ParseError(1, "run record has no HEADER line: " + path.string());
    return record;
}

RunRecord run_experiment(const ExperimentConfig& config, const Collection& collection,
                         const std::vector<QAItem>& dataset, const RunSettings& settings, IndexCache& cache,
                         const std::optional<fs::path>& record_path) {
    const auto t0 = std::chrono::steady_clock::now();
    const ResolvedConfig rc = resolve_config(config, settings);

    RunRecord record;
    record.config = config;
    record.seed = settings.seed;
    record.collection = collection.name();
    record.started_at = utc_timestamp();

    std::shared_ptr<const IndexSet> indexes;
    std::shared_ptr<const Embedder> retrieval_embedder;
    if (!rc.norag && rc.pipeline != PipelineKind::Vanilla) {
        indexes = cache.get(collection, rc.chunking, rc.provider);
        retrieval_embedder = make_embedder(rc.provider);
    }
    const Generator generator(rc.generator);
    const auto metric_embedder = make_embedder(settings.metric_provider);

    record.items.resize(dataset.size());
    parallel_for(dataset.size(), settings.concurrency, [&](std::size_t i) {
        record.items[i] = score_item(dataset[i], rc, indexes.get(), retrieval_embedder.get(), generator,
                                     *metric_embedder);
    });
    record.failed = static_cast<std::size_t>(
        std::count_if(record.items.begin(), record.items.end(), [](const ItemResult& r) { return r.failed; }));

    if (record_path) write_run_record(record, *record_path);

    if (!dataset.empty() && static_cast<double>(record.failed) >
                                settings.max_failure_fraction * static_cast<double>(dataset.size())) {
        throw TransportError("run " + config.mnemonic + " aborted: " + std::to_string(record.failed) + " of " +
                                 std::to_string(dataset.size()) + " items failed",
                             0, std::nullopt);
    }

    record.aggregates = compute_aggregates(record.items);
    record.confusion = compute_confusion(record.items);
    record.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    record.complete = true;
    if (record_path) {
        std::ofstream out(*record_path, std::ios::binary | std::ios::app);
        out << run_record_aggregate_line(record) << '\n';
    }
    return record;
}

SweepResult run_sweep(const std::vector<ExperimentConfig>& configs, const Collection& collection,
                      const std::vector<QAItem>& dataset, const RunSettings& settings, const fs::path& out_dir) {
    SweepResult result;
    IndexCache cache;
    const fs::path runs = out_dir / "runs";
    fs::create_directories(runs);
    for (const auto& cfg : configs) {
        const fs::path path = runs / (cfg.mnemonic + ".jsonl");
        if (fs::exists(path)) {
            try {
                RunRecord existing = read_run_record(path);
                if (existing.complete && existing.seed == settings.seed && existing.config == cfg) {
                    result.records.push_back(std::move(existing));
                    ++result.resumed;
                    continue;
                }
            } catch (const Error&) {
                // unreadable partial record: rerun it
            }
        }
        result.records.push_back(run_experiment(cfg, collection, dataset, settings, cache, path));
        ++result.executed;
    }
    return result;
}

std::vector<RunRecord> load_run_records(const fs::path& run_dir) {
    const fs::path runs = run_dir / "runs";
    if (!fs::is_directory(runs)) throw Error(ErrorKind::NotFound, "no runs directory under " + run_dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(runs)) {
        if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    std::vector<RunRecord> records;
    for (const auto& f : files) {
        auto r = read_run_record(f);
        if (r.complete) records.push_back(std::move(r));
    }
    return records;
}

// ---------------------------------------------------------------------------
// Reporting
// ---------------------------------------------------------------------------

ReportTable aggregate(const std::vector<RunRecord>& records, const std::vector<std::string>& group_by) {
    if (records.empty()) throw_invalid("cannot aggregate zero run records");
    struct Acc {
        std::size_t runs = 0;
        std::vector<ItemResult> items;
        ConfusionMatrix3 confusion;
    };
    std::map<std::vector<std::string>, Acc> groups;
    for (const auto& rec : records) {
        std::vector<std::string> key;
        for (const auto& code : group_by) {
            if (auto l = rec.config.level(code); l && !(rec.config.norag && code != factor::kModel)) {
                key.push_back(*l);
            } else {
                key.push_back(rec.config.norag ? "NORAG" : "-");
            }
        }
        auto& acc = groups[key];
        ++acc.runs;
        acc.items.insert(acc.items.end(), rec.items.begin(), rec.items.end());
        acc.confusion += compute_confusion(rec.items);
    }
    ReportTable table;
    table.group_by = group_by;
    for (auto& [key, acc] : groups) {
        table.rows.push_back({key, acc.runs, compute_aggregates(acc.items), acc.confusion});
    }
    return table;
}

namespace {

std::string fixed(double v, int precision = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(precision) << v;
    return os.str();
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string key_label(const std::vector<std::string>& key) { return key.empty() ? "all" : join(key, "/"); }

}  // namespace

std::string render_report_text(const ReportTable& table) {
    static const std::vector<std::string> shown = {"accuracy", "rouge1_r", "rouge2_r", "rougeL_r",
                                                   "rougeLsum_r", "bert_p",  "bert_r",   "bert_f"};
    std::ostringstream os;
    const std::string by = table.group_by.empty() ? "all" : join(table.group_by, "/");
    os << "Pipeline comparison (grouped by " << by << "; mean +/- standard error)\n";
    std::size_t key_width = by.size();
    for (const auto& row : table.rows) key_width = std::max(key_width, key_label(row.key).size());
    os << std::left << std::setw(static_cast<int>(key_width) + 2) << by << std::setw(6) << "runs";
    for (const auto& m : shown) os << std::setw(19) << m;
    os << "\n";
    for (const auto& row : table.rows) {
        os << std::left << std::setw(static_cast<int>(key_width) + 2) << key_label(row.key) << std::setw(6)
           << row.runs;
        for (const auto& m : shown) {
            auto it = row.metrics.find(m);
            std::string cell = "n/a";
            if (it != row.metrics.end()) {
                cell = fixed(it->second.mean) + " +/- " + fixed(it->second.sem);
                if (it->second.n == 1) cell += "*";
            }
            os << std::setw(19) << cell;
        }
        os << "\n";
    }
    os << "(* n=1, standard error reported as 0)\n";

    static const char* labels[] = {"yes", "no", "maybe"};
    for (const auto& row : table.rows) {
        os << "\nConfusion matrix [" << key_label(row.key) << "] (rows = gold, columns = predicted)\n";
        os << std::left << std::setw(8) << "" << std::right << std::setw(8) << "yes" << std::setw(8) << "no"
           << std::setw(8) << "maybe" << std::setw(10) << "unparsed" << "\n";
        for (std::size_t g = 0; g < 3; ++g) {
            os << std::left << std::setw(8) << labels[g] << std::right;
            for (std::size_t p = 0; p < 3; ++p) os << std::setw(8) << row.confusion.counts[g][p];
            os << std::setw(10) << row.confusion.unparsed[g] << "\n";
        }
    }
    return os.str();
}

std::string render_report_csv(const ReportTable& table) {
    std::ostringstream os;
    for (const auto& code : table.group_by) os << csv_escape(code) << ",";
    os << "runs,metric,mean,sem,n\n";
    for (const auto& row : table.rows) {
        for (const auto& name : metric_names()) {
            auto it = row.metrics.find(name);
            if (it == row.metrics.end()) continue;
            for (const auto& k : row.key) os << csv_escape(k) << ",";
            std::ostringstream mean, sem;
            mean << std::setprecision(17) << it->second.mean;
            sem << std::setprecision(17) << it->second.sem;
            os << row.runs << "," << name << "," << mean.str() << "," << sem.str() << "," << it->second.n << "\n";
        }
    }
    return os.str();
}

std::string render_items_csv(const std::vector<RunRecord>& records) {
    std::set<std::string> codes;
    for (const auto& r : records) {
        for (const auto& [code, level] : r.config.levels) codes.insert(code);
    }
    std::ostringstream os;
    os << "mnemonic,norag";
    for (const auto& c : codes) os << "," << csv_escape(c);
    os << ",item_id,status,gold,predicted,correct";
    for (const auto& m : metric_names()) {
        if (m != "accuracy") os << "," << m;
    }
    os << "\n";
    for (const auto& r : records) {
        for (const auto& item : r.items) {
            os << csv_escape(r.config.mnemonic) << "," << (r.config.norag ? 1 : 0);
            for (const auto& c : codes) os << "," << csv_escape(r.config.level(c).value_or(""));
            os << "," << csv_escape(item.item_id) << "," << (item.failed ? "failed" : "ok") << ","
               << to_string(item.gold) << "," << to_string(item.predicted) << ","
               << (item.correct ? (*item.correct ? "1" : "0") : "");
            for (const auto& m : metric_names()) {
                if (m == "accuracy") continue;
                os << ",";
                if (auto v = metric_value(item, m)) {
                    std::ostringstream num;
                    num << std::setprecision(17) << *v;
                    os << num.str();
                }
            }
            os << "\n";
        }
    }
    return os.str();
}

double pearson(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw_invalid("pearson needs equally long samples");
    if (xs.size() < 3) throw Error(ErrorKind::InsufficientData, "pearson needs at least 3 pairs");
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) throw Error(ErrorKind::InsufficientData, "pearson of a constant sample");
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Correlation correlate(const std::vector<HumanJudgment>& human, const std::map<std::string, double>& machine) {
    std::vector<double> xs, ys;
    std::set<std::string> human_ids;
    Correlation c;
    for (const auto& h : human) {
        human_ids.insert(h.item_id);
        auto it = machine.find(h.item_id);
        if (it == machine.end()) {
            ++c.dropped;
            continue;
        }
        xs.push_back(static_cast<double>(h.score));
        ys.push_back(it->second);
    }
    for (const auto& [id, v] : machine) {
        if (!human_ids.count(id)) ++c.dropped;
    }
    c.n = xs.size();
    if (c.n < 3) {
        throw Error(ErrorKind::InsufficientData,
                    "correlation needs at least 3 paired items, got " + std::to_string(c.n));
    }
    c.r = pearson(xs, ys);
    return c;
}

}  // namespace ragev
