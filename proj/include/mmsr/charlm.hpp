#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mmsr {

// Character 4-gram model with add-k smoothing and stupid backoff.
// Vocabulary is the 28 text symbols (space, apostrophe, a-z); the CTC blank
// is excluded. Histories shorter than 3 characters are padded with a start
// marker, matching how counts are accumulated during training.
class NGramModel {
  public:
    static constexpr char kStart = '^';
    static constexpr double kBackoff = 0.4;

    NGramModel() = default;
    NGramModel(int order, double k) : order_(order), k_(k) {}

    // Accumulates counts for every context length 0..order-1.
    static NGramModel train(const std::vector<std::string>& corpus, int order = 4,
                            double k = 0.1);

    // log P(next | history), finite for any in-alphabet arguments.
    double score(char next, const std::string& history) const;

    // Sum of per-character scores with start padding; used for fusion and
    // perplexity checks.
    double sequence_logprob(const std::string& text) const;

    int order() const { return order_; }
    double add_k() const { return k_; }
    int vocab_size() const { return 28; }

    void save(const std::filesystem::path& path) const;
    static NGramModel load(const std::filesystem::path& path);

    // Exposed for tests: raw count of (context, next).
    long count(const std::string& context, char next) const;
    long context_total(const std::string& context) const;

  private:
    struct ContextCounts {
        long total = 0;
        std::map<char, long> next;
    };

    int order_ = 4;
    double k_ = 0.1;
    std::map<std::string, ContextCounts> counts_;
};

}  // namespace mmsr
