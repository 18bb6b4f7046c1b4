#include "ragev/labels.hpp"

#include "ragev/text.hpp"

namespace ragev {

const char* to_string(AnswerLabel label) {
    switch (label) {
        case AnswerLabel::Yes: return "yes";
        case AnswerLabel::No: return "no";
        case AnswerLabel::Maybe: return "maybe";
        case AnswerLabel::None: return "none";
    }
    return "none";
}

std::optional<AnswerLabel> parse_label(std::string_view text) {
    const std::string k = to_lower_ascii(trim(text));
    if (k == "yes") return AnswerLabel::Yes;
    if (k == "no") return AnswerLabel::No;
    if (k == "maybe") return AnswerLabel::Maybe;
    if (k == "none") return AnswerLabel::None;
    return std::nullopt;
}

AnswerLabel invert_label(AnswerLabel label) {
    switch (label) {
        case AnswerLabel::Yes: return AnswerLabel::No;
        case AnswerLabel::No: return AnswerLabel::Yes;
        case AnswerLabel::Maybe: return AnswerLabel::No;
        case AnswerLabel::None: return AnswerLabel::None;
    }
    return AnswerLabel::None;
}

}  // namespace ragev
