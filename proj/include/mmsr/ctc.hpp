#pragma once

#include <string>
#include <vector>

#include "mmsr/charlm.hpp"
#include "mmsr/tensor.hpp"

namespace mmsr {

// Log-space arithmetic with a -inf sentinel well below any real score.
constexpr double kLogZero = -1e300;
double log_sum_exp(double a, double b);

struct CtcResult {
    double loss = 0.0;        // negative log likelihood, nats; +inf if infeasible
    Tensor grad;              // T x C, w.r.t. pre-softmax logits
    bool feasible = true;
};

// probs: T x C softmax outputs (rows sum to 1); label: indices without blanks.
// Only the first t_true rows participate.
CtcResult ctc_loss(const Tensor& probs, const std::vector<int>& label, std::size_t t_true);

inline CtcResult ctc_loss(const Tensor& probs, const std::vector<int>& label) {
    return ctc_loss(probs, label, probs.shape.empty() ? 0 : probs.shape[0]);
}

// Best-path decoding: per-step argmax (ties to the lowest index), collapse
// consecutive repeats, delete blanks.
std::string greedy_decode(const Tensor& probs);

struct BeamSearchParams {
    std::size_t beam_width = 16;
    double lm_alpha = 0.5;
    double len_beta = 0.6;
    const NGramModel* lm = nullptr;  // optional
};

// Prefix beam search with optional n-gram shallow fusion. Deterministic:
// ties broken by lexicographic prefix.
std::string beam_search_decode(const Tensor& probs, const BeamSearchParams& params);

}  // namespace mmsr
