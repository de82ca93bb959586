#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace biaslens {

// Placeholder token that stands for masked content. The tokenizer emits it
// for any run of three or more dots (and for U+2026), so a masked text
// re-tokenizes to the same token sequence it was built from.
inline constexpr std::string_view kMaskToken = "...";

// Splits text into lowercased word tokens. Words are maximal runs of
// alphanumeric code points; ASCII punctuation and the common Unicode
// punctuation/space blocks separate words and are dropped. Lowercasing
// covers ASCII and Latin-1 letters. Pure function of the input.
std::vector<std::string> tokenize(std::string_view text);

}  // namespace biaslens
