#include "mmsr/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mmsr/alphabet.hpp"
#include "mmsr/errors.hpp"

namespace mmsr {

double log_sum_exp(double a, double b) {
    if (a <= kLogZero / 2) return b;
    if (b <= kLogZero / 2) return a;
    const double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

CtcResult ctc_loss(const Tensor& probs, const std::vector<int>& label, std::size_t t_true) {
    if (probs.shape.size() != 2) throw ParameterError("ctc_loss expects a T x C matrix");
    const std::size_t t_max = probs.shape[0];
    const std::size_t c = probs.shape[1];
    if (t_true > t_max) throw ParameterError("t_true exceeds the probability matrix length");
    for (int s : label)
        if (s <= 0 || s >= static_cast<int>(c))
            throw ParameterError("CTC label contains blank or out-of-range symbol");

    CtcResult res;
    res.grad = Tensor({t_max, c});

    const std::size_t l = label.size();
    std::size_t repeats = 0;
    for (std::size_t i = 1; i < l; ++i)
        if (label[i] == label[i - 1]) ++repeats;
    if (t_true < l + repeats) {
        res.loss = std::numeric_limits<double>::infinity();
        res.feasible = false;
        return res;
    }
    if (t_true == 0) {  // empty label, zero frames: probability one
        res.loss = 0.0;
        return res;
    }

    const std::size_t s_len = 2 * l + 1;
    auto ext = [&](std::size_t s) -> int {
        return s % 2 == 1 ? label[s / 2] : Alphabet::kBlank;
    };
    auto lp = [&](std::size_t t, int sym) {
        return std::log(std::max(probs.at2(t, static_cast<std::size_t>(sym)), 1e-300));
    };
    auto skip_ok = [&](std::size_t s) {
        return s >= 2 && ext(s) != Alphabet::kBlank && ext(s) != ext(s - 2);
    };

    std::vector<double> alpha(t_true * s_len, kLogZero);
    std::vector<double> beta(t_true * s_len, kLogZero);
    auto a = [&](std::size_t t, std::size_t s) -> double& { return alpha[t * s_len + s]; };
    auto b = [&](std::size_t t, std::size_t s) -> double& { return beta[t * s_len + s]; };

    a(0, 0) = lp(0, ext(0));
    if (s_len > 1) a(0, 1) = lp(0, ext(1));
    for (std::size_t t = 1; t < t_true; ++t)
        for (std::size_t s = 0; s < s_len; ++s) {
            double acc = a(t - 1, s);
            if (s >= 1) acc = log_sum_exp(acc, a(t - 1, s - 1));
            if (skip_ok(s)) acc = log_sum_exp(acc, a(t - 1, s - 2));
            if (acc > kLogZero / 2) a(t, s) = acc + lp(t, ext(s));
        }

    double log_p = a(t_true - 1, s_len - 1);
    if (s_len > 1) log_p = log_sum_exp(log_p, a(t_true - 1, s_len - 2));
    res.loss = -log_p;

    b(t_true - 1, s_len - 1) = lp(t_true - 1, ext(s_len - 1));
    if (s_len > 1) b(t_true - 1, s_len - 2) = lp(t_true - 1, ext(s_len - 2));
    for (std::size_t t = t_true - 1; t-- > 0;)
        for (std::size_t s = 0; s < s_len; ++s) {
            double acc = b(t + 1, s);
            if (s + 1 < s_len) acc = log_sum_exp(acc, b(t + 1, s + 1));
            if (s + 2 < s_len && skip_ok(s + 2)) acc = log_sum_exp(acc, b(t + 1, s + 2));
            if (acc > kLogZero / 2) b(t, s) = acc + lp(t, ext(s));
        }

    // Gradient w.r.t. logits: softmax output minus the label posterior.
    // alpha*beta double-counts the frame probability, hence the -lp term.
    for (std::size_t t = 0; t < t_true; ++t) {
        std::vector<double> gamma(c, kLogZero);
        for (std::size_t s = 0; s < s_len; ++s) {
            const double ab = a(t, s) + b(t, s);
            if (ab > kLogZero / 2) {
                const int sym = ext(s);
                gamma[sym] = log_sum_exp(gamma[sym], ab - lp(t, sym));
            }
        }
        for (std::size_t k = 0; k < c; ++k) {
            const double post = gamma[k] > kLogZero / 2 ? std::exp(gamma[k] - log_p) : 0.0;
            res.grad.at2(t, k) = probs.at2(t, k) - post;
        }
    }
    return res;
}

std::string greedy_decode(const Tensor& probs) {
    if (probs.shape.size() != 2 || probs.shape[0] == 0) return "";
    const std::size_t t_len = probs.shape[0], c = probs.shape[1];
    std::string out;
    int prev = Alphabet::kBlank;
    for (std::size_t t = 0; t < t_len; ++t) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < c; ++k)
            if (probs.at2(t, k) > probs.at2(t, best)) best = k;
        const int sym = static_cast<int>(best);
        if (sym != Alphabet::kBlank && sym != prev) out.push_back(Alphabet::symbol(sym));
        prev = sym;
    }
    return out;
}

namespace {

struct BeamEntry {
    double p_b = kLogZero;
    double p_nb = kLogZero;
    double lm_score = 0.0;

    double total() const { return log_sum_exp(p_b, p_nb); }
};

double combined_score(const std::string& prefix, const BeamEntry& e,
                      const BeamSearchParams& p) {
    double s = e.total();
    if (p.lm) s += p.lm_alpha * e.lm_score;
    return s + p.len_beta * double(prefix.size());
}

}  // namespace

std::string beam_search_decode(const Tensor& probs, const BeamSearchParams& params) {
    if (params.beam_width < 1) throw ParameterError("beam width must be >= 1");
    if (probs.shape.size() != 2 || probs.shape[0] == 0) return "";
    const std::size_t t_len = probs.shape[0], c = probs.shape[1];

    std::map<std::string, BeamEntry> beams;
    beams[""].p_b = 0.0;

    for (std::size_t t = 0; t < t_len; ++t) {
        std::map<std::string, BeamEntry> next;
        for (const auto& [prefix, entry] : beams) {
            const double total = entry.total();
            for (std::size_t k = 0; k < c; ++k) {
                const double lp = std::log(std::max(probs.at2(t, k), 1e-300));
                if (k == Alphabet::kBlank) {
                    auto& e = next[prefix];
                    e.p_b = log_sum_exp(e.p_b, total + lp);
                    e.lm_score = entry.lm_score;
                    continue;
                }
                const char ch = Alphabet::symbol(static_cast<int>(k));
                const bool repeat = !prefix.empty() && prefix.back() == ch;
                if (repeat) {
                    // Same prefix: the repeated frame merges into the last symbol.
                    auto& same = next[prefix];
                    same.p_nb = log_sum_exp(same.p_nb, entry.p_nb + lp);
                    same.lm_score = entry.lm_score;
                }
                const double src = repeat ? entry.p_b : total;
                if (src <= kLogZero / 2) continue;
                auto& ext = next[prefix + ch];
                ext.p_nb = log_sum_exp(ext.p_nb, src + lp);
                if (params.lm)
                    // A prefix's LM score is a function of the prefix alone,
                    // so repeated assignment from different parents agrees.
                    ext.lm_score = entry.lm_score +
                                   params.lm->score(ch, prefix.size() <= 3
                                                            ? prefix
                                                            : prefix.substr(prefix.size() - 3));
            }
        }

        if (next.size() > params.beam_width) {
            std::vector<std::pair<double, std::string>> ranked;
            ranked.reserve(next.size());
            for (const auto& [prefix, entry] : next)
                ranked.emplace_back(combined_score(prefix, entry, params), prefix);
            std::sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
                if (x.first != y.first) return x.first > y.first;
                return x.second < y.second;
            });
            std::map<std::string, BeamEntry> pruned;
            for (std::size_t i = 0; i < params.beam_width; ++i)
                pruned.emplace(ranked[i].second, next[ranked[i].second]);
            next = std::move(pruned);
        }
        beams = std::move(next);
    }

    std::string best;
    double best_score = -std::numeric_limits<double>::infinity();
    for (const auto& [prefix, entry] : beams) {
        const double s = combined_score(prefix, entry, params);
        if (s > best_score || (s == best_score && prefix < best)) {
            best_score = s;
            best = prefix;
        }
    }
    return best;
}

}  // namespace mmsr
