#pragma once

#include <string>
#include <vector>

namespace mmsr {

// Splits on single spaces, dropping empty tokens.
std::vector<std::string> split_words(const std::string& text);

// Word-level edit distance (unit costs) over max(1, reference words), as %.
double wer(const std::string& reference, const std::string& hypothesis);

}  // namespace mmsr
