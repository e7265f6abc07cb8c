#include "mmsr/wer.hpp"

#include <algorithm>

namespace mmsr {

std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (char c : text) {
        if (c == ' ') {
            if (!cur.empty()) words.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

double wer(const std::string& reference, const std::string& hypothesis) {
    const auto ref = split_words(reference);
    const auto hyp = split_words(hypothesis);
    const std::size_t n = ref.size(), m = hyp.size();

    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
            cur[j] = std::min({sub, prev[j] + 1, cur[j - 1] + 1});
        }
        std::swap(prev, cur);
    }
    const std::size_t dist = prev[m];
    return 100.0 * double(dist) / double(std::max<std::size_t>(1, n));
}

}  // namespace mmsr
