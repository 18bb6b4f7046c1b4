#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ragev/http_client.hpp"
#include "ragev/labels.hpp"
#include "ragev/retrieval.hpp"

namespace ragev {

struct Turn {
    std::string role;  // "system", "user" or "assistant"
    std::string text;

    bool operator==(const Turn&) const = default;
};

struct ContextBlock {
    std::string label;  // "[C1]", "[C2]", ...
    std::string text;
    std::string doc_id;
    std::string chunk_id;

    bool operator==(const ContextBlock&) const = default;
};

struct PromptBundle {
    std::string system_instruction;
    std::vector<Turn> history;
    std::vector<ContextBlock> context_blocks;
    std::string question;

    bool has_label(const std::string& label) const;
    bool operator==(const PromptBundle&) const = default;
};

// Labels context blocks [C1].. in retrieval order. With context, the system
// instruction restricts answers to the labeled passages; either way it asks for
// a leading "SHORT: yes|no|maybe" line and per-statement [Ck] citations.
PromptBundle assemble_prompt(const std::string& query, const RetrievedContext& context,
                             const std::vector<Turn>& history = {});

// Chat messages: system, history verbatim, then one user turn holding the
// context section (omitted when empty) and the question.
std::vector<Turn> to_messages(const PromptBundle& prompt);
// Deterministic flat rendering of to_messages(), one "### <role>" header per turn.
std::string render_prompt(const PromptBundle& prompt);

enum class GeneratorKind { RemoteChat, EchoStub, CorruptStub, ContradictStub };

const char* to_string(GeneratorKind kind);
GeneratorKind parse_generator_kind(std::string_view text);

struct GeneratorConfig {
    GeneratorKind kind = GeneratorKind::EchoStub;
    std::string model_name = "stub";
    std::optional<std::string> endpoint_url;
    double temperature = 0.0;
    std::size_t max_tokens = 512;
    double corrupt_level = 0.0;
    std::uint64_t seed = 42;
    HttpSettings http;  // RemoteChat only; base_url comes from endpoint_url

    void validate() const;
};

// Reference answer the stub generators echo or distort.
struct GoldAnswer {
    std::string item_id;
    AnswerLabel short_label = AnswerLabel::None;
    std::string long_text;
};

struct Completion {
    std::string text;
    std::string finish_reason;  // "stop", "length", ...; stubs report "stop"
};

class Generator {
public:
    explicit Generator(GeneratorConfig config);
    ~Generator();
    Generator(const Generator&) = delete;
    Generator& operator=(const Generator&) = delete;

    // Stubs need gold (InvalidArgument otherwise). RemoteChat throws
    // TransportError once retries are exhausted. Safe to call concurrently.
    Completion generate(const PromptBundle& prompt, const GoldAnswer* gold) const;

    const GeneratorConfig& config() const { return config_; }

private:
    GeneratorConfig config_;
    std::unique_ptr<JsonHttpClient> client_;
};

Completion generate(const GeneratorConfig& config, const PromptBundle& prompt, const GoldAnswer* gold);

// Stub outputs, exposed for tests.
std::string echo_completion(const GoldAnswer& gold);
std::string corrupt_completion(const GoldAnswer& gold, double level, std::uint64_t seed);
std::string contradict_completion(const GoldAnswer& gold);

// Replacement vocabulary for CorruptStub; none of these words is English.
const std::vector<std::string>& corruption_vocabulary();

struct GeneratedAnswer {
    AnswerLabel short_label = AnswerLabel::None;
    std::string long_text;
    std::vector<std::string> cited_labels;  // distinct, first-appearance order, all present in the prompt
    std::size_t unknown_citations = 0;
    bool unparsed = false;   // no short label could be found
    bool truncated = false;  // completion stopped on the token limit
    std::string raw;
};

// Short label from the first "SHORT:" line, else a leading yes/no/maybe in the
// first sentence, else None (flagged). long_text is the remaining text, trimmed.
GeneratedAnswer parse_answer(const std::string& raw, const PromptBundle& prompt);
GeneratedAnswer parse_answer(const Completion& completion, const PromptBundle& prompt);

}  // namespace ragev
