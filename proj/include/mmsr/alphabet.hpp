#pragma once

#include <string>
#include <vector>

#include "mmsr/errors.hpp"

namespace mmsr {

// Character alphabet of the recognizer: blank (0), space, apostrophe, a-z.
class Alphabet {
  public:
    static constexpr int kBlank = 0;
    static constexpr int kSize = 29;

    static char symbol(int index) {
        static const char table[kSize + 1] = "\0 'abcdefghijklmnopqrstuvwxyz";
        if (index <= 0 || index >= kSize)
            throw ParameterError("alphabet index out of range: " + std::to_string(index));
        return table[index];
    }

    static int index(char c) {
        if (c == ' ') return 1;
        if (c == '\'') return 2;
        if (c >= 'a' && c <= 'z') return 3 + (c - 'a');
        if (c >= 'A' && c <= 'Z') return 3 + (c - 'A');
        throw DataError(std::string("character outside alphabet: '") + c + "'");
    }

    static bool contains(char c) {
        return c == ' ' || c == '\'' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
    }

    // Encodes lowercased text; throws DataError naming the first bad character.
    static std::vector<int> encode(const std::string& text) {
        std::vector<int> out;
        out.reserve(text.size());
        for (char c : text) out.push_back(index(c));
        return out;
    }

    static std::string decode(const std::vector<int>& symbols) {
        std::string out;
        out.reserve(symbols.size());
        for (int s : symbols) out.push_back(symbol(s));
        return out;
    }
};

}  // namespace mmsr
