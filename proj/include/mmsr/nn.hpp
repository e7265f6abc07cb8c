#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "mmsr/rng.hpp"
#include "mmsr/tensor.hpp"

namespace mmsr {

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;

    Param(std::string n, std::vector<std::size_t> shape)
        : name(std::move(n)), value(std::move(shape)) {
        grad = Tensor(value.shape);
    }
};

void glorot_init(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng);

// ---------------------------------------------------------------------------
// Layers. Each stores its forward activations and differentiates exactly the
// recorded pass; backward before forward is a StateError.

// Per-timestep affine map y = W x + b over a T x In sequence.
class Dense {
  public:
    Dense(std::string name, std::size_t in, std::size_t out);
    Tensor forward(const Tensor& x);   // T x In -> T x Out
    Tensor backward(const Tensor& dy); // returns dx
    std::vector<Param*> params() { return {&w_, &b_}; }
    void init(Rng& rng);

    std::size_t in_dim() const { return in_; }
    std::size_t out_dim() const { return out_; }

  private:
    std::size_t in_, out_;
    Param w_, b_;
    Tensor x_;
    bool have_tape_ = false;
};

// Row-stabilized softmax over the last axis; rows sum to 1.
Tensor softmax_rows(const Tensor& logits);

// Standard GRU returning the full hidden sequence.
class Gru {
  public:
    Gru(std::string name, std::size_t in, std::size_t hidden);
    Tensor forward(const Tensor& x, const std::vector<double>* h0 = nullptr);
    Tensor backward(const Tensor& dh);
    std::vector<Param*> params();
    void init(Rng& rng);

    std::size_t hidden_dim() const { return hidden_; }

  private:
    std::size_t in_, hidden_;
    Param wz_, wr_, wh_, uz_, ur_, uh_, bz_, br_, bh_;
    Tensor x_, h_;                    // inputs and hidden states
    std::vector<double> h0_;
    Tensor z_, r_, hc_, rh_;          // gate activations per step
    bool have_tape_ = false;
};

// Valid cross-correlation with kernel (1,3) along the width axis, channel-last
// layout (H x W x Cin), bias and ReLU.
class Conv2d {
  public:
    Conv2d(std::string name, std::size_t in_channels, std::size_t filters);
    Tensor forward(const Tensor& x);   // H x W x Cin -> H x (W-2) x Cout
    Tensor backward(const Tensor& dy);
    std::vector<Param*> params() { return {&w_, &b_}; }
    void init(Rng& rng);

  private:
    std::size_t cin_, cout_;
    Param w_;  // Cout x (3*Cin), kernel-major then channel
    Param b_;
    Tensor x_, y_;
    bool have_tape_ = false;
};

// Non-overlapping max over width pairs; odd trailing column dropped.
class MaxPool2d {
  public:
    Tensor forward(const Tensor& x);   // H x W x C -> H x (W/2) x C
    Tensor backward(const Tensor& dy);

  private:
    std::vector<std::size_t> arg_;     // chosen source index per output element
    std::vector<std::size_t> in_shape_;
    bool have_tape_ = false;
};

// One causal residual block: conv1d(k=3, d=1, left pad 2) -> ReLU ->
// conv1d(k=3) -> ReLU, plus a 1x1 projection skip when widths differ.
class TcnBlock {
  public:
    TcnBlock(std::string name, std::size_t in, std::size_t filters);
    Tensor forward(const Tensor& x);   // T x In -> T x Filters
    Tensor backward(const Tensor& dy);
    std::vector<Param*> params();
    void init(Rng& rng);

  private:
    void causal_conv(const Param& w, const Param& b, const Tensor& x, Tensor& relu_out);
    Tensor causal_conv_backward(const Param& w, Param& wp, const Tensor& x,
                                const Tensor& relu_out, const Tensor& dy);

    std::size_t in_, filters_;
    Param w1_, b1_, w2_, b2_;          // Filters x (3*In), Filters x (3*Filters)
    std::unique_ptr<Dense> proj_;      // skip projection when in != filters
    Tensor x_, h1_, h2_;
    bool have_tape_ = false;
};

// Inverted dropout; identity outside training.
class Dropout {
  public:
    explicit Dropout(double rate);
    Tensor forward(const Tensor& x, bool training, Rng& rng);
    Tensor backward(const Tensor& dy);

  private:
    double rate_;
    std::vector<double> mask_;
    bool have_tape_ = false;
};

// ---------------------------------------------------------------------------
// Full recognizer

enum class ModelMode { fusion, video_only, side_only };

struct ModelConfig {
    ModelMode mode = ModelMode::fusion;
    std::size_t side_dim = 43;      // GRU branch input width (0 in video_only)
    std::size_t alphabet_size = 29; // incl. blank
    std::size_t conv_filters = 100;
    std::size_t video_embed = 32;   // learned projection after flatten
    std::size_t video_height = 100, video_width = 100;
    std::size_t gru_units[3] = {128, 64, 32};
    std::size_t tcn_filters = 32;
    double dropout_rate = 0.1;
};

class SpeechModel {
  public:
    SpeechModel(const ModelConfig& cfg, Rng& rng);

    const ModelConfig& config() const { return cfg_; }

    // video: T x H x W grayscale in [0,1] (empty outside video modes);
    // side: T x side_dim (empty in video_only). Returns T x C probabilities;
    // logits are retained for the loss gradient.
    Tensor forward(const Tensor& video, const Tensor& side, bool training, Rng& rng);
    const Tensor& logits() const;

    // dlogits: T x C gradient w.r.t. pre-softmax logits; accumulates into
    // parameter grads (call zero_grads between batches as needed).
    void backward(const Tensor& dlogits);

    std::vector<Param*> params();
    void zero_grads();

    void save(const std::filesystem::path& dir) const;
    static std::unique_ptr<SpeechModel> load(const std::filesystem::path& dir);

  private:
    ModelConfig cfg_;
    // Video branch
    std::unique_ptr<Conv2d> conv1_, conv2_;
    std::unique_ptr<MaxPool2d> pool_;
    std::unique_ptr<Dense> video_proj_;
    // Side branch
    std::unique_ptr<Gru> gru1_, gru2_, gru3_;
    std::unique_ptr<Dropout> drop1_, drop2_, drop3_;
    // Trunk
    std::unique_ptr<TcnBlock> tcn_;
    std::unique_ptr<Dense> out_;

    std::size_t seq_len_ = 0;
    Tensor logits_;
    bool have_tape_ = false;
};

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    long step = 0;
    std::vector<Tensor> m, v;  // aligned with the parameter list

    explicit AdamState(const std::vector<Param*>& params, AdamConfig cfg = {});
};

void adam_step(AdamState& state, const std::vector<Param*>& params);

}  // namespace mmsr
