#include "ragev/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "ragev/bench.hpp"
#include "ragev/chunking.hpp"
#include "ragev/corpus_store.hpp"
#include "ragev/embedding.hpp"
#include "ragev/error.hpp"
#include "ragev/generation.hpp"
#include "ragev/indexing.hpp"
#include "ragev/retrieval.hpp"
#include "ragev/text.hpp"

namespace ragev {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string collection;
    std::string collection_dir = "ragev_data";
    std::string pipeline = "hybrid";
    std::size_t top_k = 10;
    std::size_t per_doc_m = 2;
    double rrf_k = 60.0;
    double min_score = 0.0;
    std::size_t chunk_size = 256;
    std::size_t overlap = 32;
    std::string provider = "hashed";
    std::string embed_model = "hashed";
    std::string embed_url;
    std::size_t dim = 256;
    std::string generator = "echo";
    std::string model = "stub";
    std::string chat_url;
    double corrupt_level = 0.0;
    double temperature = 0.0;
    std::size_t max_tokens = 512;
    std::uint64_t seed = 42;
    std::size_t concurrency = 4;
    std::string out;
    bool force = false;

    // subcommand arguments
    std::vector<std::string> paths;
    std::string name;
    std::string kind = "relevant";
    std::string question;
    bool repl = false;
    std::string dataset;
    std::string factors;
    std::string run_dir;
    std::vector<std::string> group_by = {"PIP"};
    std::string human;
    std::string record;
    std::string metric = "bert_f";
};

std::optional<std::string> env_base_url() {
    if (const char* v = std::getenv("RAGEV_BASE_URL"); v && *v) return std::string(v);
    return std::nullopt;
}

ChunkingParams chunking_of(const Options& o) {
    ChunkingParams c;
    c.size_tokens = o.chunk_size;
    c.overlap_tokens = o.overlap;
    c.validate();
    return c;
}

ProviderConfig provider_of(const Options& o) {
    ProviderConfig p;
    const std::string kind = to_lower_ascii(o.provider);
    if (kind == "hashed") {
        p.kind = ProviderKind::HashedNgram;
    } else if (kind == "remote") {
        p.kind = ProviderKind::RemoteEndpoint;
        p.endpoint_url = o.embed_url.empty() ? env_base_url() : std::optional<std::string>(o.embed_url);
    } else {
        throw_invalid("--provider must be hashed or remote, got '" + o.provider + "'");
    }
    p.model_name = o.embed_model;
    p.dim = o.dim;
    p.validate();
    return p;
}

GeneratorConfig generator_of(const Options& o) {
    GeneratorConfig g;
    g.kind = parse_generator_kind(o.generator);
    g.model_name = o.model;
    if (g.kind == GeneratorKind::RemoteChat) {
        g.endpoint_url = o.chat_url.empty() ? env_base_url() : std::optional<std::string>(o.chat_url);
    }
    g.corrupt_level = o.corrupt_level;
    g.temperature = o.temperature;
    g.max_tokens = o.max_tokens;
    g.seed = o.seed;
    g.validate();
    return g;
}

RetrievalParams retrieval_of(const Options& o) {
    RetrievalParams r;
    r.top_k = o.top_k;
    r.per_doc_m = o.per_doc_m;
    r.rrf_k = o.rrf_k;
    r.min_score = o.min_score;
    r.validate();
    return r;
}

// --- collections and index snapshots ---

struct LoadedCollection {
    Collection collection;
    fs::path root;  // index snapshots live under <root>/index
};

LoadedCollection open_collection(const Options& o) {
    if (o.collection.empty()) throw_invalid("--collection is required");
    const fs::path p(o.collection);
    if (fs::is_directory(p) && fs::exists(p / "manifest.json")) return {load_manifest(p / "manifest.json"), p};
    if (fs::is_regular_file(p)) {
        if (p.extension() == ".jsonl") return {load_collection(p), p.parent_path() / (p.stem().string() + ".ragev")};
        return {load_manifest(p), p.parent_path()};
    }
    const fs::path named = fs::path(o.collection_dir) / o.collection;
    if (fs::exists(named / "manifest.json")) return {load_manifest(named / "manifest.json"), named};
    throw Error(ErrorKind::NotFound, "collection not found: " + o.collection);
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (const char c : s) out += std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' ? c : '_';
    return out;
}

fs::path snapshot_dir(const fs::path& root, const ChunkingParams& c, const ProviderConfig& p) {
    const std::string kind = p.kind == ProviderKind::HashedNgram ? "hashed" : "remote";
    return root / "index" /
           ("c" + std::to_string(c.size_tokens) + "o" + std::to_string(c.overlap_tokens) + "-" + kind + "-" +
            sanitize(p.model_name) + "-" + std::to_string(p.dim));
}

IndexSet load_or_build(const LoadedCollection& lc, const ChunkingParams& c, const ProviderConfig& p, bool force,
                       bool* built = nullptr) {
    const fs::path dir = snapshot_dir(lc.root, c, p);
    if (!force && fs::exists(dir / "meta.json")) {
        if (built) *built = false;
        return load_snapshot(dir);
    }
    IndexSet set = build_indexes(lc.collection, c, p);
    save_snapshot(set, dir);
    if (built) *built = true;
    return set;
}

// --- ingest ---

void ingest_file(Collection& col, const fs::path& path) {
    if (path.extension() == ".jsonl") {
        for (const auto& doc : load_collection(path).documents()) col.add(doc);
        return;
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::NotFound, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    Document doc;
    doc.doc_id = path.stem().string();
    doc.title = path.stem().string();
    doc.text = ss.str();
    doc.source_uri = path.string();
    col.add(std::move(doc));
}

int cmd_ingest(const Options& o, std::ostream& out) {
    if (o.name.empty()) throw_invalid("--name is required");
    for (const auto& p : o.paths) {
        if (!fs::exists(p)) throw Error(ErrorKind::NotFound, "no such file or directory: " + p);
    }
    const fs::path dir = fs::path(o.collection_dir) / o.name;
    if (fs::exists(dir / "manifest.json") && !o.force) {
        throw Error(ErrorKind::Conflict, "collection '" + o.name + "' already exists at " + dir.string() +
                                             " (use --force to replace it)");
    }
    Collection col = create_collection(o.name, parse_collection_kind(o.kind));
    for (const auto& p : o.paths) {
        if (fs::is_directory(p)) {
            std::vector<fs::path> files;
            for (const auto& e : fs::directory_iterator(p)) {
                if (e.is_regular_file()) files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
            for (const auto& f : files) ingest_file(col, f);
        } else {
            ingest_file(col, p);
        }
    }
    if (col.empty()) throw_invalid("no documents found in the given paths");
    if (o.force && fs::exists(dir / "index")) fs::remove_all(dir / "index");
    const fs::path manifest = save_manifest(col, dir);
    out << manifest.string() << "\n" << col.size() << " documents\n";
    return kExitOk;
}

// --- index ---

int cmd_index(const Options& o, std::ostream& out) {
    const LoadedCollection lc = open_collection(o);
    const ChunkingParams c = chunking_of(o);
    const ProviderConfig p = provider_of(o);
    bool built = false;
    const IndexSet set = load_or_build(lc, c, p, o.force, &built);
    out << (built ? "built " : "loaded ") << set.chunks.size() << " chunks from " << set.doc_order.size()
        << " documents: " << snapshot_dir(lc.root, c, p).string() << "\n";
    return kExitOk;
}

// --- ask ---

// Stubs need a reference answer; without a dataset it is drawn from the
// retrieved passages, each cited by its label.
GoldAnswer pseudo_gold(const std::string& question, const PromptBundle& prompt) {
    GoldAnswer g;
    g.item_id = question;
    g.short_label = AnswerLabel::Maybe;
    if (prompt.context_blocks.empty()) {
        g.long_text = "No context available.";
        return g;
    }
    std::vector<std::string> parts;
    for (const auto& block : prompt.context_blocks) {
        auto toks = tokenize(block.text);
        if (toks.size() > 30) toks.resize(30);
        parts.push_back(join(toks, " ") + " " + block.label);
    }
    g.long_text = join(parts, "\n");
    return g;
}

std::string title_of(const Collection& col, const std::string& doc_id) {
    const Document* d = col.find(doc_id);
    return d && !d->title.empty() ? d->title : doc_id;
}

void print_answer(std::ostream& out, const GeneratedAnswer& answer, const PromptBundle& prompt,
                  const RetrievedContext& ctx, const Collection& col) {
    out << "SHORT: " << to_string(answer.short_label) << "\n";
    if (!answer.long_text.empty()) out << answer.long_text << "\n";
    if (answer.truncated) out << "(answer truncated at the token limit)\n";
    out << "\nReferences:\n";
    const std::set<std::string> cited(answer.cited_labels.begin(), answer.cited_labels.end());
    std::map<std::string, const ContextBlock*> by_chunk;
    for (const auto& b : prompt.context_blocks) {
        if (cited.count(b.label)) by_chunk.emplace(b.chunk_id, &b);
    }
    if (by_chunk.empty()) {
        out << "  (none)\n";
        return;
    }
    if (ctx.groups) {
        for (const auto& group : *ctx.groups) {
            bool header = false;
            for (const auto& item : group.items) {
                auto it = by_chunk.find(item.chunk.chunk_id);
                if (it == by_chunk.end()) continue;
                if (!header) {
                    out << "  " << title_of(col, group.doc_id) << " (" << group.doc_id << ")\n";
                    header = true;
                }
                out << "    " << it->second->label << " " << item.chunk.chunk_id << "\n";
            }
        }
        return;
    }
    for (const auto& b : prompt.context_blocks) {
        if (!cited.count(b.label)) continue;
        out << "  " << b.label << " " << title_of(col, b.doc_id) << " (" << b.chunk_id << ")\n";
    }
}

int cmd_ask(const Options& o, std::istream& in, std::ostream& out) {
    const PipelineKind pipeline = parse_pipeline(o.pipeline);
    const RetrievalParams params = retrieval_of(o);
    const Generator generator(generator_of(o));
    const ProviderConfig provider = provider_of(o);

    std::optional<LoadedCollection> lc;
    std::optional<IndexSet> indexes;
    std::shared_ptr<const Embedder> embedder;
    if (pipeline != PipelineKind::Vanilla) {
        lc = open_collection(o);
        indexes = load_or_build(*lc, chunking_of(o), provider, false);
        embedder = make_embedder(provider);
    } else if (!o.collection.empty()) {
        lc = open_collection(o);
    }
    const Collection empty;
    const Collection& col = lc ? lc->collection : empty;

    std::vector<Turn> history;
    const auto answer_one = [&](const std::string& question) {
        RetrievedContext ctx;
        ctx.query = question;
        if (indexes) ctx = retrieve(pipeline, question, *indexes, params, *embedder);
        const PromptBundle prompt = assemble_prompt(question, ctx, history);
        const GoldAnswer gold = pseudo_gold(question, prompt);
        const Completion completion = generator.generate(prompt, &gold);
        const GeneratedAnswer answer = parse_answer(completion, prompt);
        print_answer(out, answer, prompt, ctx, col);
        history.push_back({"user", question});
        history.push_back({"assistant", completion.text});
    };

    if (!o.repl) {
        if (trim(o.question).empty()) throw_invalid("a question is required (or use --repl)");
        answer_one(o.question);
        return kExitOk;
    }
    if (!trim(o.question).empty()) answer_one(o.question);
    std::string line;
    while (true) {
        out << "> " << std::flush;
        if (!std::getline(in, line)) break;
        const std::string q = trim(line);
        if (q.empty()) continue;
        if (q == "exit" || q == "quit") break;
        answer_one(q);
        out << "\n";
    }
    return kExitOk;
}

// --- eval / report ---

// Without a collection the dataset's own context passages form one.
Collection collection_from_dataset(const std::vector<QAItem>& dataset) {
    Collection col = create_collection("dataset-contexts");
    for (const auto& item : dataset) {
        for (std::size_t i = 0; i < item.contexts.size(); ++i) {
            if (trim(item.contexts[i]).empty()) continue;
            Document d;
            d.doc_id = item.item_id + "-ctx" + std::to_string(i);
            d.title = item.item_id;
            d.text = item.contexts[i];
            col.add(std::move(d));
        }
    }
    if (col.empty()) throw_invalid("dataset has no contexts; pass --collection");
    return col;
}

std::vector<std::string> present_group_by(const std::vector<RunRecord>& records, const std::vector<std::string>& want) {
    std::vector<std::string> out;
    for (const auto& code : want) {
        const bool present = std::any_of(records.begin(), records.end(),
                                         [&](const RunRecord& r) { return r.config.level(code).has_value(); });
        if (present) out.push_back(code);
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::NotFound, "cannot write " + path.string());
    f << text;
}

std::string write_reports(const std::vector<RunRecord>& records, const std::vector<std::string>& group_by,
                          const fs::path& dir) {
    const ReportTable table = aggregate(records, present_group_by(records, group_by));
    const std::string text = render_report_text(table);
    fs::create_directories(dir);
    write_text(dir / "report.txt", text);
    write_text(dir / "report.csv", render_report_csv(table));
    write_text(dir / "items.csv", render_items_csv(records));
    return text;
}

int cmd_eval(const Options& o, std::ostream& out) {
    if (o.out.empty()) throw_invalid("--out is required");
    const auto dataset = load_qa_dataset(o.dataset);
    if (dataset.empty()) throw_invalid("dataset " + o.dataset + " is empty");
    const ExperimentFactors factors = load_factors(o.factors);
    const auto configs = expand_factorial(factors, factors.norag_models);
    if (configs.empty()) throw_invalid("factors file yields no configurations");

    const Collection col = o.collection.empty() ? collection_from_dataset(dataset) : open_collection(o).collection;

    RunSettings s;
    s.chunking = chunking_of(o);
    s.provider = provider_of(o);
    s.embedders = factors.embedders;
    s.generator = generator_of(o);
    s.generators = factors.generators;
    s.retrieval = retrieval_of(o);
    s.pipeline = parse_pipeline(o.pipeline);
    s.metric_provider.model_name = "metric";
    s.seed = o.seed;
    s.concurrency = std::max<std::size_t>(1, o.concurrency);

    const SweepResult sweep = run_sweep(configs, col, dataset, s, o.out);
    out << configs.size() << " configurations: " << sweep.executed << " run, " << sweep.resumed << " resumed\n";
    out << write_reports(sweep.records, o.group_by, o.out);
    return kExitOk;
}

int cmd_report(const Options& o, std::ostream& out) {
    const auto records = load_run_records(o.run_dir);
    if (records.empty()) throw Error(ErrorKind::NotFound, "no complete run records under " + o.run_dir);
    out << write_reports(records, o.group_by, o.out.empty() ? fs::path(o.run_dir) : fs::path(o.out));
    return kExitOk;
}

int cmd_correlate(const Options& o, std::ostream& out) {
    const auto human = load_human_judgments(o.human);
    const RunRecord record = read_run_record(o.record);
    std::map<std::string, double> machine;
    for (const auto& item : record.items) {
        if (auto v = metric_value(item, o.metric)) machine[item.item_id] = *v;
    }
    const Correlation c = correlate(human, machine);
    out << "pearson r(" << o.metric << ", human) = " << c.r << " over " << c.n << " items";
    if (c.dropped) out << " (" << c.dropped << " unpaired ids skipped)";
    out << "\n";
    return kExitOk;
}

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::Conflict: return kExitConflict;
        case ErrorKind::TransportError: return kExitTransport;
        default: return kExitUsage;
    }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"ragev: retrieval-augmented QA evaluation"};
    app.set_config("--config", "", "Key-value config file (TOML/INI) mirroring the long flags");
    app.require_subcommand(1);
    app.fallthrough();

    app.add_option("--collection", o.collection, "Collection name, manifest, directory or .jsonl file");
    app.add_option("--collection-dir", o.collection_dir, "Where named collections live")->capture_default_str();
    app.add_option("--pipeline", o.pipeline, "vanilla|vector|fulltext|hybrid|shy")->capture_default_str();
    app.add_option("--top-k", o.top_k, "Context chunks per question")->capture_default_str();
    app.add_option("--per-doc-m", o.per_doc_m, "SHy chunks per document")->capture_default_str();
    app.add_option("--rrf-k", o.rrf_k, "RRF constant")->capture_default_str();
    app.add_option("--min-score", o.min_score, "Drop retrieved chunks scoring below this")->capture_default_str();
    app.add_option("--chunk-size", o.chunk_size, "Chunk window in tokens")->capture_default_str();
    app.add_option("--overlap", o.overlap, "Chunk overlap in tokens")->capture_default_str();
    app.add_option("--provider", o.provider, "hashed|remote")->capture_default_str();
    app.add_option("--embed-model", o.embed_model, "Embedding model name")->capture_default_str();
    app.add_option("--embed-url", o.embed_url, "Embedding endpoint base URL (default $RAGEV_BASE_URL)");
    app.add_option("--dim", o.dim, "Hashed embedding dimension")->capture_default_str();
    app.add_option("--generator", o.generator, "echo|corrupt|contradict|remote")->capture_default_str();
    app.add_option("--model", o.model, "Chat model name")->capture_default_str();
    app.add_option("--chat-url", o.chat_url, "Chat endpoint base URL (default $RAGEV_BASE_URL)");
    app.add_option("--corrupt-level", o.corrupt_level, "Fraction of answer tokens the corrupt stub replaces")
        ->capture_default_str();
    app.add_option("--temperature", o.temperature)->capture_default_str();
    app.add_option("--max-tokens", o.max_tokens)->capture_default_str();
    app.add_option("--seed", o.seed, "Seed for all stubbed randomness")->capture_default_str();
    app.add_option("--concurrency", o.concurrency, "Items evaluated in parallel")->capture_default_str();
    app.add_option("--out", o.out, "Output directory");
    app.add_flag("--force", o.force, "Overwrite existing collections or indexes");

    auto* ingest = app.add_subcommand("ingest", "Load documents into a named collection");
    ingest->add_option("paths", o.paths, "Text files, .jsonl document files or directories")->required();
    ingest->add_option("--name", o.name, "Collection name")->required();
    ingest->add_option("--kind", o.kind, "relevant|some_noise|noise_only|contrafactual")->capture_default_str();

    auto* index = app.add_subcommand("index", "Build (or load) the chunk indexes of a collection");

    auto* ask = app.add_subcommand("ask", "Answer a question over a collection");
    ask->add_option("question", o.question, "Question text");
    ask->add_flag("--repl", o.repl, "Read further questions from stdin, keeping history");

    auto* eval = app.add_subcommand("eval", "Run a factorial sweep over a QA dataset");
    eval->add_option("--dataset", o.dataset, "QA dataset (.jsonl)")->required();
    eval->add_option("--factors", o.factors, "Factors file (JSON)")->required();
    eval->add_option("--group-by", o.group_by, "Factor codes for the report rows")->capture_default_str();

    auto* report = app.add_subcommand("report", "Summarize the run records of a sweep");
    report->add_option("run_dir", o.run_dir, "Sweep output directory")->required();
    report->add_option("--group-by", o.group_by, "Factor codes for the report rows")->capture_default_str();

    auto* corr = app.add_subcommand("correlate", "Pearson r between human scores and a metric");
    corr->add_option("--human", o.human, "Human judgments (.jsonl)")->required();
    corr->add_option("--record", o.record, "Run record (.jsonl)")->required();
    corr->add_option("--metric", o.metric, "Metric name, e.g. bert_f or rouge1_r")->capture_default_str();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (ingest->parsed()) return cmd_ingest(o, out);
        if (index->parsed()) return cmd_index(o, out);
        if (ask->parsed()) return cmd_ask(o, in, out);
        if (eval->parsed()) return cmd_eval(o, out);
        if (report->parsed()) return cmd_report(o, out);
        if (corr->parsed()) return cmd_correlate(o, out);
    } catch (const TransportError& e) {
        err << "ragev: " << e.what();
        if (e.last_status()) err << " (last HTTP status " << *e.last_status() << ")";
        err << "\n";
        return kExitTransport;
    } catch (const Error& e) {
        err << "ragev: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const fs::filesystem_error& e) {
        err << "ragev: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "ragev: internal error: " << e.what() << "\n";
        return 1;
    }
    return kExitUsage;
}

}  // namespace ragev
