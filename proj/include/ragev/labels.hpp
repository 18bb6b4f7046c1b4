#pragma once

#include <optional>
#include <string_view>

namespace ragev {

// Short answer of a yes/no/maybe question. None marks a missing or unparseable answer.
enum class AnswerLabel { Yes, No, Maybe, None };

const char* to_string(AnswerLabel label);
// Case-insensitive "yes"/"no"/"maybe"/"none"; nullopt for anything else.
std::optional<AnswerLabel> parse_label(std::string_view text);
// yes <-> no; maybe -> no; none stays none.
AnswerLabel invert_label(AnswerLabel label);

}  // namespace ragev
