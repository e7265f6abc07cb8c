#include "mmsr/nn.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mmsr/container.hpp"
#include "mmsr/errors.hpp"
#include "mmsr/kernels.hpp"

namespace mmsr {

namespace {

const kernels::Ops& ops() { return kernels::active(); }

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void check_2d(const Tensor& t, std::size_t cols, const char* who) {
    if (t.shape.size() != 2 || t.shape[1] != cols)
        throw ShapeError(std::string(who) + ": expected T x " + std::to_string(cols) +
                         ", got " + shape_str(t.shape));
}

}  // namespace

void glorot_init(Tensor& t, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / double(fan_in + fan_out));
    for (double& v : t.data) v = rng.uniform(-bound, bound);
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, std::size_t in, std::size_t out)
    : in_(in), out_(out), w_(name + ".w", {out, in}), b_(name + ".b", {out}) {}

void Dense::init(Rng& rng) { glorot_init(w_.value, in_, out_, rng); }

Tensor Dense::forward(const Tensor& x) {
    check_2d(x, in_, "dense");
    const std::size_t t_len = x.shape[0];
    Tensor y({t_len, out_});
    for (std::size_t t = 0; t < t_len; ++t) {
        ops().gemv(w_.value.data.data(), out_, in_, &x.data[t * in_], &y.data[t * out_]);
        ops().axpy(1.0, b_.value.data.data(), &y.data[t * out_], out_);
    }
    x_ = x;
    have_tape_ = true;
    return y;
}

Tensor Dense::backward(const Tensor& dy) {
    if (!have_tape_) throw StateError("dense backward without a recorded forward");
    check_2d(dy, out_, "dense backward");
    const std::size_t t_len = x_.shape[0];
    Tensor dx({t_len, in_});
    for (std::size_t t = 0; t < t_len; ++t) {
        const double* g = &dy.data[t * out_];
        ops().ger_acc(1.0, g, &x_.data[t * in_], w_.grad.data.data(), out_, in_);
        ops().axpy(1.0, g, b_.grad.data.data(), out_);
        ops().gemv_t_acc(w_.value.data.data(), out_, in_, g, &dx.data[t * in_]);
    }
    return dx;
}

Tensor softmax_rows(const Tensor& logits) {
    if (logits.shape.size() != 2) throw ShapeError("softmax expects a T x C matrix");
    const std::size_t t_len = logits.shape[0], c = logits.shape[1];
    Tensor p({t_len, c});
    for (std::size_t t = 0; t < t_len; ++t) {
        double mx = logits.at2(t, 0);
        for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, logits.at2(t, k));
        double sum = 0.0;
        for (std::size_t k = 0; k < c; ++k) {
            const double e = std::exp(logits.at2(t, k) - mx);
            p.at2(t, k) = e;
            sum += e;
        }
        for (std::size_t k = 0; k < c; ++k) p.at2(t, k) /= sum;
    }
    return p;
}

// ---------------------------------------------------------------------------
// GRU

Gru::Gru(std::string name, std::size_t in, std::size_t hidden)
    : in_(in),
      hidden_(hidden),
      wz_(name + ".wz", {hidden, in}),
      wr_(name + ".wr", {hidden, in}),
      wh_(name + ".wh", {hidden, in}),
      uz_(name + ".uz", {hidden, hidden}),
      ur_(name + ".ur", {hidden, hidden}),
      uh_(name + ".uh", {hidden, hidden}),
      bz_(name + ".bz", {hidden}),
      br_(name + ".br", {hidden}),
      bh_(name + ".bh", {hidden}) {}

std::vector<Param*> Gru::params() {
    return {&wz_, &wr_, &wh_, &uz_, &ur_, &uh_, &bz_, &br_, &bh_};
}

void Gru::init(Rng& rng) {
    glorot_init(wz_.value, in_, hidden_, rng);
    glorot_init(wr_.value, in_, hidden_, rng);
    glorot_init(wh_.value, in_, hidden_, rng);
    glorot_init(uz_.value, hidden_, hidden_, rng);
    glorot_init(ur_.value, hidden_, hidden_, rng);
    glorot_init(uh_.value, hidden_, hidden_, rng);
}

Tensor Gru::forward(const Tensor& x, const std::vector<double>* h0) {
    check_2d(x, in_, "gru");
    const std::size_t t_len = x.shape[0];
    if (h0 && h0->size() != hidden_) throw ShapeError("gru: h0 size mismatch");
    h0_.assign(hidden_, 0.0);
    if (h0) h0_ = *h0;

    x_ = x;
    h_ = Tensor({t_len, hidden_});
    z_ = Tensor({t_len, hidden_});
    r_ = Tensor({t_len, hidden_});
    hc_ = Tensor({t_len, hidden_});
    rh_ = Tensor({t_len, hidden_});

    std::vector<double> tmp_w(hidden_), tmp_u(hidden_);
    const double* hprev = h0_.data();
    for (std::size_t t = 0; t < t_len; ++t) {
        const double* xt = &x.data[t * in_];
        double* zt = &z_.data[t * hidden_];
        double* rt = &r_.data[t * hidden_];
        double* hct = &hc_.data[t * hidden_];
        double* rht = &rh_.data[t * hidden_];
        double* ht = &h_.data[t * hidden_];

        ops().gemv(wz_.value.data.data(), hidden_, in_, xt, tmp_w.data());
        ops().gemv(uz_.value.data.data(), hidden_, hidden_, hprev, tmp_u.data());
        for (std::size_t i = 0; i < hidden_; ++i)
            zt[i] = sigmoid(tmp_w[i] + tmp_u[i] + bz_.value.data[i]);

        ops().gemv(wr_.value.data.data(), hidden_, in_, xt, tmp_w.data());
        ops().gemv(ur_.value.data.data(), hidden_, hidden_, hprev, tmp_u.data());
        for (std::size_t i = 0; i < hidden_; ++i)
            rt[i] = sigmoid(tmp_w[i] + tmp_u[i] + br_.value.data[i]);

        for (std::size_t i = 0; i < hidden_; ++i) rht[i] = rt[i] * hprev[i];
        ops().gemv(wh_.value.data.data(), hidden_, in_, xt, tmp_w.data());
        ops().gemv(uh_.value.data.data(), hidden_, hidden_, rht, tmp_u.data());
        for (std::size_t i = 0; i < hidden_; ++i)
            hct[i] = std::tanh(tmp_w[i] + tmp_u[i] + bh_.value.data[i]);

        for (std::size_t i = 0; i < hidden_; ++i)
            ht[i] = (1.0 - zt[i]) * hprev[i] + zt[i] * hct[i];
        hprev = ht;
    }
    have_tape_ = true;
    return h_;
}

Tensor Gru::backward(const Tensor& dh_seq) {
    if (!have_tape_) throw StateError("gru backward without a recorded forward");
    check_2d(dh_seq, hidden_, "gru backward");
    const std::size_t t_len = x_.shape[0];
    if (dh_seq.shape[0] != t_len) throw ShapeError("gru backward length mismatch");

    Tensor dx({t_len, in_});
    std::vector<double> carry(hidden_, 0.0);
    std::vector<double> dh(hidden_), dpre(hidden_), drh(hidden_), dr(hidden_);
    for (std::size_t t = t_len; t-- > 0;) {
        const double* xt = &x_.data[t * in_];
        const double* zt = &z_.data[t * hidden_];
        const double* rt = &r_.data[t * hidden_];
        const double* hct = &hc_.data[t * hidden_];
        const double* rht = &rh_.data[t * hidden_];
        const double* hprev = t == 0 ? h0_.data() : &h_.data[(t - 1) * hidden_];
        double* dxt = &dx.data[t * in_];

        for (std::size_t i = 0; i < hidden_; ++i)
            dh[i] = dh_seq.data[t * hidden_ + i] + carry[i];

        // candidate path
        for (std::size_t i = 0; i < hidden_; ++i) {
            const double dhc = dh[i] * zt[i];
            dpre[i] = dhc * (1.0 - hct[i] * hct[i]);
            carry[i] = dh[i] * (1.0 - zt[i]);
        }
        ops().ger_acc(1.0, dpre.data(), xt, wh_.grad.data.data(), hidden_, in_);
        ops().ger_acc(1.0, dpre.data(), rht, uh_.grad.data.data(), hidden_, hidden_);
        ops().axpy(1.0, dpre.data(), bh_.grad.data.data(), hidden_);
        ops().gemv_t_acc(wh_.value.data.data(), hidden_, in_, dpre.data(), dxt);
        std::fill(drh.begin(), drh.end(), 0.0);
        ops().gemv_t_acc(uh_.value.data.data(), hidden_, hidden_, dpre.data(), drh.data());
        for (std::size_t i = 0; i < hidden_; ++i) {
            dr[i] = drh[i] * hprev[i];
            carry[i] += drh[i] * rt[i];
        }

        // update gate
        for (std::size_t i = 0; i < hidden_; ++i) {
            const double dz = dh[i] * (hct[i] - hprev[i]);
            dpre[i] = dz * zt[i] * (1.0 - zt[i]);
        }
        ops().ger_acc(1.0, dpre.data(), xt, wz_.grad.data.data(), hidden_, in_);
        ops().ger_acc(1.0, dpre.data(), hprev, uz_.grad.data.data(), hidden_, hidden_);
        ops().axpy(1.0, dpre.data(), bz_.grad.data.data(), hidden_);
        ops().gemv_t_acc(wz_.value.data.data(), hidden_, in_, dpre.data(), dxt);
        ops().gemv_t_acc(uz_.value.data.data(), hidden_, hidden_, dpre.data(), carry.data());

        // reset gate
        for (std::size_t i = 0; i < hidden_; ++i)
            dpre[i] = dr[i] * rt[i] * (1.0 - rt[i]);
        ops().ger_acc(1.0, dpre.data(), xt, wr_.grad.data.data(), hidden_, in_);
        ops().ger_acc(1.0, dpre.data(), hprev, ur_.grad.data.data(), hidden_, hidden_);
        ops().axpy(1.0, dpre.data(), br_.grad.data.data(), hidden_);
        ops().gemv_t_acc(wr_.value.data.data(), hidden_, in_, dpre.data(), dxt);
        ops().gemv_t_acc(ur_.value.data.data(), hidden_, hidden_, dpre.data(), carry.data());
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Conv2d (1,3)

Conv2d::Conv2d(std::string name, std::size_t in_channels, std::size_t filters)
    : cin_(in_channels),
      cout_(filters),
      w_(name + ".w", {filters, 3 * in_channels}),
      b_(name + ".b", {filters}) {}

void Conv2d::init(Rng& rng) { glorot_init(w_.value, 3 * cin_, cout_, rng); }

Tensor Conv2d::forward(const Tensor& x) {
    if (x.shape.size() != 3 || x.shape[2] != cin_)
        throw ShapeError("conv2d: expected H x W x " + std::to_string(cin_) + ", got " +
                         shape_str(x.shape));
    const std::size_t h = x.shape[0], w = x.shape[1];
    if (w < 3) throw ShapeError("conv2d: width must be at least 3");
    const std::size_t wo = w - 2;

    Tensor y({h, wo, cout_});
    for (std::size_t row = 0; row < h; ++row)
        for (std::size_t col = 0; col < wo; ++col) {
            const double* slice = &x.data[(row * w + col) * cin_];
            double* out = &y.data[(row * wo + col) * cout_];
            ops().gemv(w_.value.data.data(), cout_, 3 * cin_, slice, out);
            ops().axpy(1.0, b_.value.data.data(), out, cout_);
            ops().relu(out, out, cout_);
        }
    x_ = x;
    y_ = y;
    have_tape_ = true;
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    if (!have_tape_) throw StateError("conv2d backward without a recorded forward");
    if (dy.shape != y_.shape) throw ShapeError("conv2d backward shape mismatch");
    const std::size_t h = x_.shape[0], w = x_.shape[1], wo = w - 2;

    Tensor dx(x_.shape);
    std::vector<double> g(cout_);
    for (std::size_t row = 0; row < h; ++row)
        for (std::size_t col = 0; col < wo; ++col) {
            const std::size_t o = (row * wo + col) * cout_;
            ops().relu_grad(&y_.data[o], &dy.data[o], g.data(), cout_);
            ops().axpy(1.0, g.data(), b_.grad.data.data(), cout_);
            const double* slice = &x_.data[(row * w + col) * cin_];
            ops().ger_acc(1.0, g.data(), slice, w_.grad.data.data(), cout_, 3 * cin_);
            ops().gemv_t_acc(w_.value.data.data(), cout_, 3 * cin_, g.data(),
                             &dx.data[(row * w + col) * cin_]);
        }
    return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2d (1,2)

Tensor MaxPool2d::forward(const Tensor& x) {
    if (x.shape.size() != 3) throw ShapeError("maxpool expects H x W x C");
    const std::size_t h = x.shape[0], w = x.shape[1], c = x.shape[2];
    if (w < 2) throw ShapeError("maxpool: width must be at least 2");
    const std::size_t wo = w / 2;

    Tensor y({h, wo, c});
    arg_.assign(h * wo * c, 0);
    for (std::size_t row = 0; row < h; ++row)
        for (std::size_t col = 0; col < wo; ++col)
            for (std::size_t ch = 0; ch < c; ++ch) {
                const std::size_t i0 = (row * w + 2 * col) * c + ch;
                const std::size_t i1 = i0 + c;
                const std::size_t best = x.data[i1] > x.data[i0] ? i1 : i0;
                const std::size_t o = (row * wo + col) * c + ch;
                y.data[o] = x.data[best];
                arg_[o] = best;
            }
    in_shape_ = x.shape;
    have_tape_ = true;
    return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
    if (!have_tape_) throw StateError("maxpool backward without a recorded forward");
    if (dy.size() != arg_.size()) throw ShapeError("maxpool backward shape mismatch");
    Tensor dx(in_shape_);
    for (std::size_t i = 0; i < arg_.size(); ++i) dx.data[arg_[i]] += dy.data[i];
    return dx;
}

// ---------------------------------------------------------------------------
// TCN block

TcnBlock::TcnBlock(std::string name, std::size_t in, std::size_t filters)
    : in_(in),
      filters_(filters),
      w1_(name + ".w1", {filters, 3 * in}),
      b1_(name + ".b1", {filters}),
      w2_(name + ".w2", {filters, 3 * filters}),
      b2_(name + ".b2", {filters}) {
    if (in_ != filters_) proj_ = std::make_unique<Dense>(name + ".proj", in_, filters_);
}

std::vector<Param*> TcnBlock::params() {
    std::vector<Param*> out = {&w1_, &b1_, &w2_, &b2_};
    if (proj_)
        for (Param* p : proj_->params()) out.push_back(p);
    return out;
}

void TcnBlock::init(Rng& rng) {
    glorot_init(w1_.value, 3 * in_, filters_, rng);
    glorot_init(w2_.value, 3 * filters_, filters_, rng);
    if (proj_) proj_->init(rng);
}

void TcnBlock::causal_conv(const Param& w, const Param& b, const Tensor& x,
                           Tensor& relu_out) {
    const std::size_t t_len = x.shape[0], d = x.shape[1];
    // Two zero rows in front make the window at t cover t-2..t.
    std::vector<double> padded((t_len + 2) * d, 0.0);
    std::copy(x.data.begin(), x.data.end(), padded.begin() + 2 * d);

    relu_out = Tensor({t_len, filters_});
    for (std::size_t t = 0; t < t_len; ++t) {
        double* out = &relu_out.data[t * filters_];
        ops().gemv(w.value.data.data(), filters_, 3 * d, &padded[t * d], out);
        ops().axpy(1.0, b.value.data.data(), out, filters_);
        ops().relu(out, out, filters_);
    }
}

Tensor TcnBlock::causal_conv_backward(const Param& w, Param& wp, const Tensor& x,
                                      const Tensor& relu_out, const Tensor& dy) {
    const std::size_t t_len = x.shape[0], d = x.shape[1];
    std::vector<double> padded((t_len + 2) * d, 0.0);
    std::copy(x.data.begin(), x.data.end(), padded.begin() + 2 * d);
    std::vector<double> dpadded((t_len + 2) * d, 0.0);

    std::vector<double> g(filters_);
    Param& bias = (&wp == &w1_) ? b1_ : b2_;
    for (std::size_t t = 0; t < t_len; ++t) {
        ops().relu_grad(&relu_out.data[t * filters_], &dy.data[t * filters_], g.data(),
                        filters_);
        ops().axpy(1.0, g.data(), bias.grad.data.data(), filters_);
        ops().ger_acc(1.0, g.data(), &padded[t * d], wp.grad.data.data(), filters_, 3 * d);
        ops().gemv_t_acc(w.value.data.data(), filters_, 3 * d, g.data(), &dpadded[t * d]);
    }
    Tensor dx({t_len, d});
    std::copy(dpadded.begin() + 2 * d, dpadded.end(), dx.data.begin());
    return dx;
}

Tensor TcnBlock::forward(const Tensor& x) {
    check_2d(x, in_, "tcn");
    x_ = x;
    causal_conv(w1_, b1_, x, h1_);
    causal_conv(w2_, b2_, h1_, h2_);
    Tensor res = proj_ ? proj_->forward(x) : x;
    Tensor out(h2_.shape);
    ops().add(h2_.data.data(), res.data.data(), out.data.data(), out.size());
    have_tape_ = true;
    return out;
}

Tensor TcnBlock::backward(const Tensor& dy) {
    if (!have_tape_) throw StateError("tcn backward without a recorded forward");
    check_2d(dy, filters_, "tcn backward");
    Tensor dh1 = causal_conv_backward(w2_, w2_, h1_, h2_, dy);
    Tensor dx = causal_conv_backward(w1_, w1_, x_, h1_, dh1);
    Tensor dres = proj_ ? proj_->backward(dy) : dy;
    Tensor out(dx.shape);
    ops().add(dx.data.data(), dres.data.data(), out.data.data(), out.size());
    return out;
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0) throw ParameterError("dropout rate must lie in [0, 1)");
}

Tensor Dropout::forward(const Tensor& x, bool training, Rng& rng) {
    have_tape_ = true;
    if (!training || rate_ == 0.0) {
        mask_.clear();
        return x;
    }
    const double keep_scale = 1.0 / (1.0 - rate_);
    mask_.resize(x.size());
    Tensor y(x.shape);
    for (std::size_t i = 0; i < x.size(); ++i) {
        mask_[i] = rng.uniform() < rate_ ? 0.0 : keep_scale;
        y.data[i] = x.data[i] * mask_[i];
    }
    return y;
}

Tensor Dropout::backward(const Tensor& dy) {
    if (!have_tape_) throw StateError("dropout backward without a recorded forward");
    if (mask_.empty()) return dy;
    if (dy.size() != mask_.size()) throw ShapeError("dropout backward shape mismatch");
    Tensor dx(dy.shape);
    ops().mul(dy.data.data(), mask_.data(), dx.data.data(), dy.size());
    return dx;
}

// ---------------------------------------------------------------------------
// SpeechModel

namespace {

std::size_t pooled_width(std::size_t w) {
    if (w < 6) throw ShapeError("video width must be at least 6 for conv/conv/pool");
    return (w - 4) / 2;
}

}  // namespace

SpeechModel::SpeechModel(const ModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    const bool has_video = cfg.mode != ModelMode::side_only;
    const bool has_side = cfg.mode != ModelMode::video_only;

    std::size_t trunk_in = 0;
    if (has_video) {
        conv1_ = std::make_unique<Conv2d>("conv1", 1, cfg.conv_filters);
        conv2_ = std::make_unique<Conv2d>("conv2", cfg.conv_filters, cfg.conv_filters);
        pool_ = std::make_unique<MaxPool2d>();
        const std::size_t flat =
            cfg.video_height * pooled_width(cfg.video_width) * cfg.conv_filters;
        video_proj_ = std::make_unique<Dense>("video_proj", flat, cfg.video_embed);
        trunk_in += cfg.video_embed;
    }
    if (has_side) {
        if (cfg.side_dim == 0) throw ConfigError("side_dim must be positive in this mode");
        gru1_ = std::make_unique<Gru>("gru1", cfg.side_dim, cfg.gru_units[0]);
        gru2_ = std::make_unique<Gru>("gru2", cfg.gru_units[0], cfg.gru_units[1]);
        gru3_ = std::make_unique<Gru>("gru3", cfg.gru_units[1], cfg.gru_units[2]);
        drop1_ = std::make_unique<Dropout>(cfg.dropout_rate);
        drop2_ = std::make_unique<Dropout>(cfg.dropout_rate);
        drop3_ = std::make_unique<Dropout>(cfg.dropout_rate);
        trunk_in += cfg.gru_units[2];
    }
    tcn_ = std::make_unique<TcnBlock>("tcn", trunk_in, cfg.tcn_filters);
    out_ = std::make_unique<Dense>("out", cfg.tcn_filters, cfg.alphabet_size);

    for (auto* layer : {conv1_.get(), conv2_.get()})
        if (layer) layer->init(rng);
    if (video_proj_) video_proj_->init(rng);
    for (auto* g : {gru1_.get(), gru2_.get(), gru3_.get()})
        if (g) g->init(rng);
    tcn_->init(rng);
    out_->init(rng);
}

Tensor SpeechModel::forward(const Tensor& video, const Tensor& side, bool training,
                            Rng& rng) {
    const bool has_video = cfg_.mode != ModelMode::side_only;
    const bool has_side = cfg_.mode != ModelMode::video_only;

    std::size_t t_len = 0;
    if (has_video) {
        if (video.shape.size() != 3 || video.shape[1] != cfg_.video_height ||
            video.shape[2] != cfg_.video_width)
            throw ShapeError("video input must be T x " + std::to_string(cfg_.video_height) +
                             " x " + std::to_string(cfg_.video_width));
        t_len = video.shape[0];
    }
    if (has_side) {
        check_2d(side, cfg_.side_dim, "side input");
        if (has_video && side.shape[0] != t_len)
            throw ShapeError("video and side streams disagree on T");
        t_len = side.shape[0];
    }
    if (!has_side && side.size() != 0)
        throw ShapeError("video_only model accepts no side input");
    if (t_len == 0) throw ShapeError("model input has zero timesteps");
    seq_len_ = t_len;

    std::vector<const Tensor*> branches;
    Tensor video_embed, side_out;
    if (has_video) {
        // The (1,3)/(1,2) kernels act along width only, so T frames of H rows
        // behave exactly like one image with T*H independent rows.
        Tensor stacked({t_len * cfg_.video_height, cfg_.video_width, 1});
        stacked.data = video.data;
        Tensor pooled = pool_->forward(conv2_->forward(conv1_->forward(stacked)));
        const std::size_t flat = pooled.size() / t_len;
        Tensor flat_seq({t_len, flat});
        flat_seq.data = std::move(pooled.data);
        video_embed = video_proj_->forward(flat_seq);
        branches.push_back(&video_embed);
    }
    if (has_side) {
        Tensor a = drop1_->forward(gru1_->forward(side), training, rng);
        Tensor b = drop2_->forward(gru2_->forward(a), training, rng);
        side_out = drop3_->forward(gru3_->forward(b), training, rng);
        branches.push_back(&side_out);
    }

    Tensor trunk_in;
    if (branches.size() == 1) {
        trunk_in = *branches[0];
    } else {
        const std::size_t d1 = branches[0]->shape[1], d2 = branches[1]->shape[1];
        trunk_in = Tensor({t_len, d1 + d2});
        for (std::size_t t = 0; t < t_len; ++t) {
            std::copy_n(&branches[0]->data[t * d1], d1, &trunk_in.data[t * (d1 + d2)]);
            std::copy_n(&branches[1]->data[t * d2], d2, &trunk_in.data[t * (d1 + d2) + d1]);
        }
    }

    logits_ = out_->forward(tcn_->forward(trunk_in));
    have_tape_ = true;
    return softmax_rows(logits_);
}

const Tensor& SpeechModel::logits() const {
    if (!have_tape_) throw StateError("no recorded forward pass");
    return logits_;
}

void SpeechModel::backward(const Tensor& dlogits) {
    if (!have_tape_) throw StateError("backward without a recorded forward");
    const bool has_video = cfg_.mode != ModelMode::side_only;
    const bool has_side = cfg_.mode != ModelMode::video_only;

    Tensor dtrunk = tcn_->backward(out_->backward(dlogits));

    Tensor dvideo_embed, dside;
    if (has_video && has_side) {
        const std::size_t d1 = cfg_.video_embed, d2 = cfg_.gru_units[2];
        dvideo_embed = Tensor({seq_len_, d1});
        dside = Tensor({seq_len_, d2});
        for (std::size_t t = 0; t < seq_len_; ++t) {
            std::copy_n(&dtrunk.data[t * (d1 + d2)], d1, &dvideo_embed.data[t * d1]);
            std::copy_n(&dtrunk.data[t * (d1 + d2) + d1], d2, &dside.data[t * d2]);
        }
    } else if (has_video) {
        dvideo_embed = std::move(dtrunk);
    } else {
        dside = std::move(dtrunk);
    }

    if (has_video) {
        Tensor dflat = video_proj_->backward(dvideo_embed);
        const std::size_t wp = pooled_width(cfg_.video_width);
        Tensor dpooled({seq_len_ * cfg_.video_height, wp, cfg_.conv_filters});
        dpooled.data = std::move(dflat.data);
        conv1_->backward(conv2_->backward(pool_->backward(dpooled)));
    }
    if (has_side) {
        Tensor d3 = gru3_->backward(drop3_->backward(dside));
        Tensor d2 = gru2_->backward(drop2_->backward(d3));
        gru1_->backward(drop1_->backward(d2));
    }
}

std::vector<Param*> SpeechModel::params() {
    std::vector<Param*> out;
    auto push = [&](std::vector<Param*> v) {
        out.insert(out.end(), v.begin(), v.end());
    };
    if (conv1_) push(conv1_->params());
    if (conv2_) push(conv2_->params());
    if (video_proj_) push(video_proj_->params());
    if (gru1_) push(gru1_->params());
    if (gru2_) push(gru2_->params());
    if (gru3_) push(gru3_->params());
    push(tcn_->params());
    push(out_->params());
    return out;
}

void SpeechModel::zero_grads() {
    for (Param* p : params()) p->grad.fill(0.0);
}

namespace {
const char* mode_name(ModelMode m) {
    switch (m) {
        case ModelMode::fusion: return "fusion";
        case ModelMode::video_only: return "video_only";
        case ModelMode::side_only: return "side_only";
    }
    return "fusion";
}
ModelMode mode_from(const std::string& s) {
    if (s == "fusion") return ModelMode::fusion;
    if (s == "video_only") return ModelMode::video_only;
    if (s == "side_only") return ModelMode::side_only;
    throw DataError("unknown model mode: " + s);
}
}  // namespace

void SpeechModel::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json j;
    j["format"] = "speech-model";
    j["mode"] = mode_name(cfg_.mode);
    j["side_dim"] = cfg_.side_dim;
    j["alphabet_size"] = cfg_.alphabet_size;
    j["conv_filters"] = cfg_.conv_filters;
    j["video_embed"] = cfg_.video_embed;
    j["video_height"] = cfg_.video_height;
    j["video_width"] = cfg_.video_width;
    j["gru_units"] = {cfg_.gru_units[0], cfg_.gru_units[1], cfg_.gru_units[2]};
    j["tcn_filters"] = cfg_.tcn_filters;
    j["dropout_rate"] = cfg_.dropout_rate;

    auto* self = const_cast<SpeechModel*>(this);
    nlohmann::json files = nlohmann::json::object();
    for (Param* p : self->params()) {
        const std::string fname = p->name + ".mtns";
        write_f32(dir / fname, p->value);
        files[p->name] = fname;
    }
    j["params"] = files;
    std::ofstream out(dir / "model.json");
    if (!out) throw DataError("cannot write checkpoint to " + dir.string());
    out << j.dump(2) << "\n";
}

std::unique_ptr<SpeechModel> SpeechModel::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "model.json");
    if (!in) throw DataError("cannot open checkpoint: " + (dir / "model.json").string());
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "speech-model")
        throw DataError("not a model checkpoint: " + dir.string());

    ModelConfig cfg;
    cfg.mode = mode_from(j["mode"]);
    cfg.side_dim = j["side_dim"];
    cfg.alphabet_size = j["alphabet_size"];
    cfg.conv_filters = j["conv_filters"];
    cfg.video_embed = j["video_embed"];
    cfg.video_height = j["video_height"];
    cfg.video_width = j["video_width"];
    cfg.gru_units[0] = j["gru_units"][0];
    cfg.gru_units[1] = j["gru_units"][1];
    cfg.gru_units[2] = j["gru_units"][2];
    cfg.tcn_filters = j["tcn_filters"];
    cfg.dropout_rate = j["dropout_rate"];

    Rng rng(0);
    auto model = std::make_unique<SpeechModel>(cfg, rng);
    for (Param* p : model->params()) {
        const auto it = j["params"].find(p->name);
        if (it == j["params"].end())
            throw DataError("checkpoint missing parameter " + p->name);
        Tensor t = read_tensor_file(dir / it->get<std::string>()).to_tensor();
        if (t.shape != p->value.shape)
            throw DataError("checkpoint shape mismatch for " + p->name);
        p->value = std::move(t);
    }
    return model;
}

// ---------------------------------------------------------------------------
// Adam

AdamState::AdamState(const std::vector<Param*>& params, AdamConfig c) : cfg(c) {
    for (const Param* p : params) {
        m.emplace_back(p->value.shape);
        v.emplace_back(p->value.shape);
    }
}

void adam_step(AdamState& state, const std::vector<Param*>& params) {
    if (params.size() != state.m.size())
        throw ParameterError("adam state does not match the parameter list");
    ++state.step;
    const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
    const double bc1 = 1.0 - std::pow(b1, double(state.step));
    const double bc2 = 1.0 - std::pow(b2, double(state.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Param& p = *params[i];
        if (state.m[i].shape != p.value.shape)
            throw ParameterError("adam moment shape mismatch for " + p.name);
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad.data[k];
            double& mk = state.m[i].data[k];
            double& vk = state.v[i].data[k];
            mk = b1 * mk + (1.0 - b1) * g;
            vk = b2 * vk + (1.0 - b2) * g * g;
            const double mhat = mk / bc1;
            const double vhat = vk / bc2;
            p.value.data[k] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.epsilon);
        }
    }
}

}  // namespace mmsr
