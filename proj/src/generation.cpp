#include "ragev/generation.hpp"

#include <algorithm>
#include <cctype>
#include <random>
#include <regex>
#include <set>
#include <sstream>

#include "ragev/error.hpp"
#include "ragev/text.hpp"

namespace ragev {

// --- prompt ---

namespace {

constexpr const char* kGroundedInstruction =
    "You are a careful research assistant. Answer the question using only the numbered context "
    "passages below. If the passages do not contain the answer, say so.\n"
    "Begin your reply with a single line of the form `SHORT: yes`, `SHORT: no` or `SHORT: maybe`, "
    "then give a detailed answer.\n"
    "After every statement that is supported by a passage, cite that passage's label, e.g. [C1]. "
    "Cite each statement separately rather than listing references at the end.";

constexpr const char* kOpenInstruction =
    "You are a careful research assistant. Answer the question from your own knowledge.\n"
    "Begin your reply with a single line of the form `SHORT: yes`, `SHORT: no` or `SHORT: maybe`, "
    "then give a detailed answer.";

}  // namespace

bool PromptBundle::has_label(const std::string& label) const {
    return std::any_of(context_blocks.begin(), context_blocks.end(),
                       [&](const ContextBlock& b) { return b.label == label; });
}

PromptBundle assemble_prompt(const std::string& query, const RetrievedContext& context,
                             const std::vector<Turn>& history) {
    PromptBundle prompt;
    prompt.question = query;
    prompt.history = history;
    for (std::size_t i = 0; i < context.items.size(); ++i) {
        const auto& item = context.items[i];
        prompt.context_blocks.push_back(
            {"[C" + std::to_string(i + 1) + "]", item.text, item.chunk.doc_id, item.chunk.chunk_id});
    }
    prompt.system_instruction = prompt.context_blocks.empty() ? kOpenInstruction : kGroundedInstruction;
    return prompt;
}

std::vector<Turn> to_messages(const PromptBundle& prompt) {
    std::vector<Turn> messages;
    messages.push_back({"system", prompt.system_instruction});
    messages.insert(messages.end(), prompt.history.begin(), prompt.history.end());
    std::ostringstream user;
    if (!prompt.context_blocks.empty()) {
        user << "Context:\n";
        for (const auto& b : prompt.context_blocks) {
            user << b.label << " (source: " << b.doc_id << ") " << b.text << "\n";
        }
        user << "\n";
    }
    user << "Question: " << prompt.question;
    messages.push_back({"user", user.str()});
    return messages;
}

std::string render_prompt(const PromptBundle& prompt) {
    std::ostringstream out;
    for (const auto& m : to_messages(prompt)) out << "### " << m.role << "\n" << m.text << "\n";
    return out.str();
}

// --- generator ---

const char* to_string(GeneratorKind kind) {
    switch (kind) {
        case GeneratorKind::RemoteChat: return "remote";
        case GeneratorKind::EchoStub: return "echo";
        case GeneratorKind::CorruptStub: return "corrupt";
        case GeneratorKind::ContradictStub: return "contradict";
    }
    return "echo";
}

GeneratorKind parse_generator_kind(std::string_view text) {
    const std::string k = to_lower_ascii(text);
    if (k == "remote") return GeneratorKind::RemoteChat;
    if (k == "echo") return GeneratorKind::EchoStub;
    if (k == "corrupt") return GeneratorKind::CorruptStub;
    if (k == "contradict") return GeneratorKind::ContradictStub;
    throw_invalid("unknown generator '" + std::string(text) + "'");
}

void GeneratorConfig::validate() const {
    if (kind == GeneratorKind::RemoteChat && (!endpoint_url || endpoint_url->empty())) {
        throw_invalid("remote chat generator requires endpoint_url");
    }
    if (max_tokens == 0) throw_invalid("max_tokens must be positive");
    if (corrupt_level < 0.0 || corrupt_level > 1.0) throw_invalid("corrupt_level must lie in [0, 1]");
}

const std::vector<std::string>& corruption_vocabulary() {
    static const std::vector<std::string> words = {
        "vorqz",   "xylkp",   "qwzzy",    "jexbr",   "pflumx",  "zibbok",  "kroxal",   "quabbit",
        "snorvix", "gluxen",  "threbz",   "yazzik",  "muqlo",   "fribzo",  "wexqua",   "drozzel",
        "plixor",  "zunkav",  "kweebo",   "orzzim",  "vexlup",  "blorquin", "skwazzo", "trunxle",
        "jibbzor", "quozzle", "hexqib",   "wabzork", "zintrax", "fubblex", "grozvik",  "nurqzal",
    };
    return words;
}

std::string echo_completion(const GoldAnswer& gold) {
    return std::string("SHORT: ") + to_string(gold.short_label) + "\n" + gold.long_text;
}

std::string corrupt_completion(const GoldAnswer& gold, double level, std::uint64_t seed) {
    if (level < 0.0 || level > 1.0) throw_invalid("corrupt_level must lie in [0, 1]");
    const AnswerLabel label = level >= 0.5 ? invert_label(gold.short_label) : gold.short_label;
    const auto spans = tokenize_spans(gold.long_text);
    const std::size_t n = spans.size();
    const auto replace = std::min(n, static_cast<std::size_t>(level * static_cast<double>(n) + 0.5));
    if (replace == 0) {
        return std::string("SHORT: ") + to_string(label) + "\n" + gold.long_text;
    }

    // Position order is drawn independently of the level, so the replaced set at
    // a lower level is a subset of the one at any higher level.
    const std::uint64_t item_seed = seed ^ fnv1a64(gold.item_id);
    std::mt19937_64 rng(item_seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);

    const auto gold_terms = metric_tokens(gold.long_text);
    const std::set<std::string> gold_set(gold_terms.begin(), gold_terms.end());
    std::vector<std::string> vocab;
    for (const auto& w : corruption_vocabulary()) {
        if (!gold_set.count(w)) vocab.push_back(w);
    }
    if (vocab.empty()) throw_invalid("corruption vocabulary fully overlaps the gold answer");

    std::vector<const std::string*> replacement(n, nullptr);
    for (std::size_t i = 0; i < replace; ++i) {
        const std::size_t pos = order[i];
        const auto h = fnv1a64(gold.item_id + "#" + std::to_string(pos), item_seed);
        replacement[pos] = &vocab[h % vocab.size()];
    }

    std::string out = std::string("SHORT: ") + to_string(label) + "\n";
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < n; ++i) {
        out.append(gold.long_text, cursor, spans[i].begin - cursor);
        if (replacement[i] != nullptr) {
            out += *replacement[i];
        } else {
            out.append(gold.long_text, spans[i].begin, spans[i].end - spans[i].begin);
        }
        cursor = spans[i].end;
    }
    out.append(gold.long_text, cursor, std::string::npos);
    return out;
}

std::string contradict_completion(const GoldAnswer& gold) {
    std::string body = gold.long_text;
    if (body.size() >= 2 && std::isupper(static_cast<unsigned char>(body[0])) &&
        std::islower(static_cast<unsigned char>(body[1]))) {
        body[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(body[0])));
    }
    return std::string("SHORT: ") + to_string(invert_label(gold.short_label)) +
           "\nIt is not the case that " + body;
}

Generator::Generator(GeneratorConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.kind == GeneratorKind::RemoteChat) {
        HttpSettings http = config_.http;
        http.base_url = *config_.endpoint_url;
        client_ = std::make_unique<JsonHttpClient>(settings_from_env(std::move(http)));
    }
}

Generator::~Generator() = default;

Completion Generator::generate(const PromptBundle& prompt, const GoldAnswer* gold) const {
    if (config_.kind != GeneratorKind::RemoteChat && gold == nullptr) {
        throw_invalid(std::string(to_string(config_.kind)) + " generator needs a gold answer");
    }
    switch (config_.kind) {
        case GeneratorKind::EchoStub:
            return {echo_completion(*gold), "stop"};
        case GeneratorKind::CorruptStub:
            return {corrupt_completion(*gold, config_.corrupt_level, config_.seed), "stop"};
        case GeneratorKind::ContradictStub:
            return {contradict_completion(*gold), "stop"};
        case GeneratorKind::RemoteChat:
            break;
    }
    nlohmann::json body;
    body["model"] = config_.model_name;
    body["messages"] = nlohmann::json::array();
    for (const auto& m : to_messages(prompt)) {
        body["messages"].push_back({{"role", m.role}, {"content", m.text}});
    }
    body["temperature"] = config_.temperature;
    body["max_tokens"] = config_.max_tokens;
    const auto response = client_->post("/v1/chat/completions", body);
    try {
        const auto& choice = response.at("choices").at(0);
        Completion c;
        c.text = choice.at("message").at("content").get<std::string>();
        if (auto it = choice.find("finish_reason"); it != choice.end() && it->is_string()) {
            c.finish_reason = it->get<std::string>();
        }
        return c;
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed chat completion: ") + e.what(), 1, 200);
    }
}

Completion generate(const GeneratorConfig& config, const PromptBundle& prompt, const GoldAnswer* gold) {
    return Generator(config).generate(prompt, gold);
}

// --- parsing ---

namespace {

bool starts_with_ci(std::string_view text, std::string_view prefix) {
    if (text.size() < prefix.size()) return false;
    return to_lower_ascii(text.substr(0, prefix.size())) == prefix;
}

}  // namespace

GeneratedAnswer parse_answer(const std::string& raw, const PromptBundle& prompt) {
    GeneratedAnswer answer;
    answer.raw = raw;

    bool found_short_line = false;
    std::size_t line_start = 0;
    while (line_start <= raw.size()) {
        std::size_t line_end = raw.find('\n', line_start);
        const bool last = line_end == std::string::npos;
        if (last) line_end = raw.size();
        const std::string line = trim(std::string_view(raw).substr(line_start, line_end - line_start));
        if (starts_with_ci(line, "short:")) {
            found_short_line = true;
            const auto value = metric_tokens(line.substr(6));
            const auto label = value.empty() ? std::nullopt : parse_label(value.front());
            answer.short_label = label.value_or(AnswerLabel::None);
            answer.unparsed = !label.has_value();
            const std::size_t cut_end = last ? raw.size() : line_end + 1;
            answer.long_text = trim(raw.substr(0, line_start) + raw.substr(cut_end));
            break;
        }
        if (last) break;
        line_start = line_end + 1;
    }

    if (!found_short_line) {
        answer.long_text = trim(raw);
        const auto sentences = split_sentences(raw);
        std::optional<AnswerLabel> label;
        if (!sentences.empty()) {
            const auto words = metric_tokens(sentences.front());
            if (!words.empty()) label = parse_label(words.front());
            if (label == AnswerLabel::None) label.reset();
        }
        answer.short_label = label.value_or(AnswerLabel::None);
        answer.unparsed = !label.has_value();
    }

    static const std::regex citation(R"(\[C(\d+)\])");
    for (auto it = std::sregex_iterator(raw.begin(), raw.end(), citation); it != std::sregex_iterator(); ++it) {
        const std::string label = it->str();
        if (!prompt.has_label(label)) {
            ++answer.unknown_citations;
        } else if (std::find(answer.cited_labels.begin(), answer.cited_labels.end(), label) ==
                   answer.cited_labels.end()) {
            answer.cited_labels.push_back(label);
        }
    }
    return answer;
}

GeneratedAnswer parse_answer(const Completion& completion, const PromptBundle& prompt) {
    GeneratedAnswer answer = parse_answer(completion.text, prompt);
    answer.truncated = completion.finish_reason == "length";
    return answer;
}

}  // namespace ragev
