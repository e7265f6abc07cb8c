#include "mmsr/charlm.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mmsr/alphabet.hpp"
#include "mmsr/errors.hpp"

namespace mmsr {

namespace {
std::string lowercase(const std::string& s) {
    std::string out = s;
    for (char& c : out)
        if (c >= 'A' && c <= 'Z') c += 'a' - 'A';
    return out;
}
}  // namespace

NGramModel NGramModel::train(const std::vector<std::string>& corpus, int order, double k) {
    if (corpus.empty()) throw DataError("LM training corpus is empty");
    if (order < 1) throw ParameterError("LM order must be >= 1");

    NGramModel m(order, k);
    for (const auto& raw : corpus) {
        const std::string text = lowercase(raw);
        for (char c : text)
            if (!Alphabet::contains(c))
                throw DataError(std::string("character outside alphabet: '") + c + "'");
        const std::string padded = std::string(order - 1, kStart) + text;
        for (std::size_t i = order - 1; i < padded.size(); ++i) {
            const char next = padded[i];
            for (int len = 0; len < order; ++len) {
                const std::string ctx = padded.substr(i - len, len);
                auto& cc = m.counts_[ctx];
                ++cc.total;
                ++cc.next[next];
            }
        }
    }
    return m;
}

double NGramModel::score(char next, const std::string& history) const {
    std::string ctx = lowercase(history);
    if (!Alphabet::contains(next) && next != kStart)
        throw ParameterError(std::string("cannot score character '") + next + "'");
    if (ctx.size() > static_cast<std::size_t>(order_ - 1))
        ctx = ctx.substr(ctx.size() - (order_ - 1));
    while (ctx.size() < static_cast<std::size_t>(order_ - 1))
        ctx.insert(ctx.begin(), kStart);

    double backoff = 0.0;
    for (;;) {
        auto it = counts_.find(ctx);
        if (it != counts_.end() && it->second.total > 0) {
            auto nx = it->second.next.find(next);
            const long c = nx == it->second.next.end() ? 0 : nx->second;
            const double p = (double(c) + k_) / (double(it->second.total) + k_ * vocab_size());
            return backoff + std::log(p);
        }
        if (ctx.empty())
            // Empty corpus is rejected at training time, so unreachable.
            return backoff + std::log(k_ / (k_ * vocab_size()));
        ctx.erase(ctx.begin());
        backoff += std::log(kBackoff);
    }
}

double NGramModel::sequence_logprob(const std::string& text) const {
    const std::string t = lowercase(text);
    double lp = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
        lp += score(t[i], t.substr(i < 3 ? 0 : i - 3, i < 3 ? i : 3));
    return lp;
}

long NGramModel::count(const std::string& context, char next) const {
    auto it = counts_.find(context);
    if (it == counts_.end()) return 0;
    auto nx = it->second.next.find(next);
    return nx == it->second.next.end() ? 0 : nx->second;
}

long NGramModel::context_total(const std::string& context) const {
    auto it = counts_.find(context);
    return it == counts_.end() ? 0 : it->second.total;
}

void NGramModel::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["format"] = "char-ngram";
    j["order"] = order_;
    j["k"] = k_;
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [ctx, cc] : counts_) {
        nlohmann::json entry = nlohmann::json::object();
        for (const auto& [ch, n] : cc.next) entry[std::string(1, ch)] = n;
        counts[ctx] = entry;
    }
    j["counts"] = counts;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

NGramModel NGramModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open LM file: " + path.string());
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "char-ngram")
        throw DataError("not a character n-gram model: " + path.string());
    NGramModel m(j["order"], j["k"]);
    for (const auto& [ctx, entry] : j["counts"].items()) {
        auto& cc = m.counts_[ctx];
        for (const auto& [ch, n] : entry.items()) {
            cc.next[ch[0]] = n;
            cc.total += n.get<long>();
        }
    }
    return m;
}

}  // namespace mmsr
