#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ragev/error.hpp"
#include "ragev/generation.hpp"
#include "ragev/text.hpp"

using namespace ragev;

namespace {

RetrievedContext context_of(std::size_t n) {
    RetrievedContext ctx;
    ctx.pipeline = PipelineKind::Vector;
    ctx.query = "q";
    for (std::size_t i = 0; i < n; ++i) {
        ScoredChunk s{"doc" + std::to_string(i) + "#0000", "doc" + std::to_string(i), 1.0 / double(i + 1), i + 1};
        ctx.items.push_back({s, "passage number " + std::to_string(i)});
    }
    return ctx;
}

GoldAnswer sample_gold() {
    return {"item-7", AnswerLabel::Yes,
            "Daily aspirin lowered the rate of recurrent stroke by a third. Bleeding events were rare."};
}

std::set<std::string> content_tokens(const std::string& s) {
    const auto t = metric_tokens(s);
    return {t.begin(), t.end()};
}

}  // namespace

TEST_SUITE("generation") {
    TEST_CASE("labels") {
        CHECK(parse_label("YES") == AnswerLabel::Yes);
        CHECK(parse_label("maybe") == AnswerLabel::Maybe);
        CHECK_FALSE(parse_label("perhaps").has_value());
        CHECK(invert_label(AnswerLabel::Yes) == AnswerLabel::No);
        CHECK(invert_label(AnswerLabel::No) == AnswerLabel::Yes);
        CHECK(invert_label(AnswerLabel::Maybe) == AnswerLabel::No);
        CHECK(invert_label(AnswerLabel::None) == AnswerLabel::None);
    }

    TEST_CASE("prompt without context") {
        const PromptBundle p = assemble_prompt("Is it safe?", context_of(0));
        CHECK(p.context_blocks.empty());
        const std::string text = render_prompt(p);
        CHECK(text.find("Context:") == std::string::npos);
        CHECK(text.find("Question: Is it safe?") != std::string::npos);
        CHECK(text.find("SHORT:") != std::string::npos);
    }

    TEST_CASE("prompt with context") {
        const PromptBundle p = assemble_prompt("Is it safe?", context_of(3));
        REQUIRE(p.context_blocks.size() == 3);
        CHECK(p.context_blocks[0].label == "[C1]");
        CHECK(p.context_blocks[1].label == "[C2]");
        CHECK(p.context_blocks[2].label == "[C3]");
        CHECK(p.context_blocks[1].chunk_id == "doc1#0000");
        CHECK(p.has_label("[C3]"));
        CHECK_FALSE(p.has_label("[C4]"));
        const std::string text = render_prompt(p);
        CHECK(text.find("[C2] (source: doc1) passage number 1") != std::string::npos);
        CHECK(text == render_prompt(assemble_prompt("Is it safe?", context_of(3))));
        CHECK(p.system_instruction != assemble_prompt("Is it safe?", context_of(0)).system_instruction);
    }

    TEST_CASE("history is threaded into the messages") {
        const std::vector<Turn> history = {{"user", "first"}, {"assistant", "SHORT: no\nanswer"}};
        const auto msgs = to_messages(assemble_prompt("second", context_of(1), history));
        REQUIRE(msgs.size() == 4);
        CHECK(msgs[0].role == "system");
        CHECK(msgs[1] == history[0]);
        CHECK(msgs[2] == history[1]);
        CHECK(msgs[3].role == "user");
        CHECK(msgs[3].text.find("second") != std::string::npos);
    }

    TEST_CASE("echo stub") {
        const auto gold = sample_gold();
        const std::string raw = echo_completion(gold);
        CHECK(raw.rfind("SHORT: yes", 0) == 0);
        const auto parsed = parse_answer(raw, assemble_prompt("q", context_of(0)));
        CHECK(parsed.short_label == AnswerLabel::Yes);
        CHECK(parsed.long_text == gold.long_text);
        CHECK_FALSE(parsed.unparsed);
    }

    TEST_CASE("corrupt stub") {
        const auto gold = sample_gold();
        CHECK(corrupt_completion(gold, 0.0, 42) == echo_completion(gold));
        CHECK(corrupt_completion(gold, 0.5, 42) == corrupt_completion(gold, 0.5, 42));

        const auto prompt = assemble_prompt("q", context_of(0));
        const auto full = parse_answer(corrupt_completion(gold, 1.0, 42), prompt);
        const auto gold_tokens = content_tokens(gold.long_text);
        for (const auto& t : content_tokens(full.long_text)) CHECK(gold_tokens.count(t) == 0);
        CHECK(tokenize(full.long_text).size() == tokenize(gold.long_text).size());
        CHECK(full.short_label == AnswerLabel::No);
        CHECK(parse_answer(corrupt_completion(gold, 0.25, 42), prompt).short_label == AnswerLabel::Yes);

        // replaced positions grow with the level
        const auto gold_words = tokenize(gold.long_text);
        std::set<std::size_t> previous;
        for (const double level : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const auto words = tokenize(parse_answer(corrupt_completion(gold, level, 42), prompt).long_text);
            std::set<std::size_t> changed;
            for (std::size_t i = 0; i < words.size(); ++i) {
                if (words[i] != gold_words[i]) changed.insert(i);
            }
            const auto expected = static_cast<std::size_t>(std::floor(level * double(gold_words.size()) + 0.5));
            CHECK(changed.size() == expected);
            CHECK(std::includes(changed.begin(), changed.end(), previous.begin(), previous.end()));
            previous = changed;
        }
        CHECK(corrupt_completion(gold, 0.5, 1) != corrupt_completion(gold, 0.5, 2));
    }

    TEST_CASE("contradict stub") {
        const auto gold = sample_gold();
        const auto parsed = parse_answer(contradict_completion(gold), assemble_prompt("q", context_of(0)));
        CHECK(parsed.short_label == AnswerLabel::No);
        CHECK(parsed.long_text.rfind("It is not the case that daily aspirin", 0) == 0);
    }

    TEST_CASE("generator front door") {
        GeneratorConfig cfg;
        cfg.kind = GeneratorKind::CorruptStub;
        cfg.corrupt_level = 0.5;
        const auto gold = sample_gold();
        const auto prompt = assemble_prompt("q", context_of(0));
        CHECK(generate(cfg, prompt, &gold).text == corrupt_completion(gold, 0.5, 42));
        CHECK(generate(cfg, prompt, &gold).finish_reason == "stop");
        CHECK_THROWS_AS(generate(cfg, prompt, nullptr), Error);
        cfg.corrupt_level = 1.5;
        CHECK_THROWS_AS(cfg.validate(), Error);
        GeneratorConfig remote;
        remote.kind = GeneratorKind::RemoteChat;
        CHECK_THROWS_AS(remote.validate(), Error);
        CHECK(parse_generator_kind("contradict") == GeneratorKind::ContradictStub);
        CHECK_THROWS_AS(parse_generator_kind("gpt"), Error);
    }

    TEST_CASE("parse_answer") {
        const auto prompt = assemble_prompt("q", context_of(2));
        const auto a = parse_answer("SHORT: no\nThe study found no effect.", prompt);
        CHECK(a.short_label == AnswerLabel::No);
        CHECK(a.long_text == "The study found no effect.");

        const auto b = parse_answer("Yes, based on my analysis, further research is needed.", prompt);
        CHECK(b.short_label == AnswerLabel::Yes);
        CHECK_FALSE(b.unparsed);

        const auto c = parse_answer("It depends on context.", prompt);
        CHECK(c.short_label == AnswerLabel::None);
        CHECK(c.unparsed);

        const auto d = parse_answer("Preamble line\nshort:  Maybe.\nEvidence is mixed [C2] and [C1] [C2] [C9].", prompt);
        CHECK(d.short_label == AnswerLabel::Maybe);
        CHECK(d.long_text == "Preamble line\nEvidence is mixed [C2] and [C1] [C2] [C9].");
        CHECK(d.cited_labels == std::vector<std::string>{"[C2]", "[C1]"});
        CHECK(d.unknown_citations == 1);

        const auto e = parse_answer("SHORT: probably\ntext", prompt);
        CHECK(e.unparsed);
        CHECK(e.short_label == AnswerLabel::None);

        const auto f = parse_answer(Completion{"SHORT: yes\ncut off mid", "length"}, prompt);
        CHECK(f.truncated);
        CHECK(f.short_label == AnswerLabel::Yes);
    }
}
