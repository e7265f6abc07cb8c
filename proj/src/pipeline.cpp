#include "mmsr/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mmsr/alphabet.hpp"
#include "mmsr/charlm.hpp"
#include "mmsr/container.hpp"
#include "mmsr/ctc.hpp"
#include "mmsr/dsp.hpp"
#include "mmsr/errors.hpp"
#include "mmsr/kernels.hpp"
#include "mmsr/kpca.hpp"
#include "mmsr/video.hpp"
#include "mmsr/wer.hpp"

namespace mmsr {

// ---------------------------------------------------------------------------
// Conditions and config

Condition condition_from(const std::string& name) {
    if (name == "video") return Condition::video;
    if (name == "video+mfcc") return Condition::video_mfcc;
    if (name == "video+eeg") return Condition::video_eeg;
    if (name == "video+eeg+mfcc") return Condition::video_eeg_mfcc;
    if (name == "mfcc") return Condition::mfcc;
    throw ConfigError("unknown feature condition: " + name);
}

std::string condition_name(Condition c) {
    switch (c) {
        case Condition::video: return "video";
        case Condition::video_mfcc: return "video+mfcc";
        case Condition::video_eeg: return "video+eeg";
        case Condition::video_eeg_mfcc: return "video+eeg+mfcc";
        case Condition::mfcc: return "mfcc";
    }
    return "video";
}

namespace {

bool uses_video(Condition c) { return c != Condition::mfcc; }
bool uses_eeg(Condition c) {
    return c == Condition::video_eeg || c == Condition::video_eeg_mfcc;
}
bool uses_mfcc(Condition c) {
    return c == Condition::mfcc || c == Condition::video_mfcc ||
           c == Condition::video_eeg_mfcc;
}

std::size_t side_dim_for(const ExperimentConfig& cfg) {
    return (uses_eeg(cfg.condition) ? cfg.kpca_components : 0) +
           (uses_mfcc(cfg.condition) ? 13 : 0);
}

}  // namespace

void ExperimentConfig::apply_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    nlohmann::json j;
    in >> j;
    if (j.contains("condition")) condition = condition_from(j["condition"]);
    if (j.contains("seed")) seed = j["seed"];
    if (j.contains("epochs")) epochs = j["epochs"];
    if (j.contains("batch_size")) batch_size = j["batch_size"];
    if (j.contains("validation_split")) validation_split = j["validation_split"];
    if (j.contains("learning_rate")) learning_rate = j["learning_rate"];
    if (j.contains("dropout_rate")) dropout_rate = j["dropout_rate"];
    if (j.contains("video_size")) video_size = j["video_size"];
    if (j.contains("time_stride")) time_stride = j["time_stride"];
    if (j.contains("kpca_components")) kpca_components = j["kpca_components"];
    if (j.contains("kpca_max_points")) kpca_max_points = j["kpca_max_points"];
    if (j.contains("beam_width")) beam_width = j["beam_width"];
    if (j.contains("lm_alpha")) lm_alpha = j["lm_alpha"];
    if (j.contains("len_beta")) len_beta = j["len_beta"];
    if (j.contains("lm_path")) lm_path = j["lm_path"].get<std::string>();
    if (time_stride == 0) throw ConfigError("time_stride must be >= 1");
    if (validation_split < 0.0 || validation_split >= 1.0)
        throw ConfigError("validation_split must lie in [0, 1)");
}

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
    ExperimentConfig cfg;
    cfg.apply_json_file(path);
    return cfg;
}

// ---------------------------------------------------------------------------
// Extraction commands

namespace {

std::filesystem::path feat_dir(const std::filesystem::path& manifest_path) {
    return manifest_path.parent_path() / "feat";
}

}  // namespace

void extract_eeg_all(const std::filesystem::path& manifest_path) {
    Manifest m = load_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    std::filesystem::create_directories(feat_dir(manifest_path));
    const BiquadCascade bp = design_bandpass(4, 0.1, 70.0, 1000.0);
    const BiquadCascade notch = design_notch(60.0, 1000.0, 30.0);

    for (auto& u : m.utterances) {
        const Tensor raw = read_tensor_file(root / u.eeg).to_tensor();
        if (raw.shape.size() != 2) throw DataError("EEG tensor must be C x N: " + u.eeg);
        EegRecording rec;
        rec.sample_rate_hz = 1000;
        rec.channels.resize(raw.shape[0]);
        for (std::size_t c = 0; c < raw.shape[0]; ++c)
            rec.channels[c].assign(raw.data.begin() + c * raw.shape[1],
                                   raw.data.begin() + (c + 1) * raw.shape[1]);
        const FeatureSequence feats = extract_eeg_features(rec, bp, notch);
        u.feat_eeg = "feat/" + u.id + ".eeg.mtns";
        write_f32(root / u.feat_eeg, feats.frames);
    }
    save_manifest(m, manifest_path);
}

void extract_mfcc_all(const std::filesystem::path& manifest_path) {
    Manifest m = load_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    std::filesystem::create_directories(feat_dir(manifest_path));
    for (auto& u : m.utterances) {
        const Tensor raw = read_tensor_file(root / u.audio).to_tensor();
        AudioRecording audio;
        audio.sample_rate_hz = 16000;
        audio.samples = raw.data;
        const FeatureSequence feats = extract_mfcc(audio);
        u.feat_mfcc = "feat/" + u.id + ".mfcc.mtns";
        write_f32(root / u.feat_mfcc, feats.frames);
    }
    save_manifest(m, manifest_path);
}

void extract_video_all(const std::filesystem::path& manifest_path, std::size_t size) {
    Manifest m = load_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    std::filesystem::create_directories(feat_dir(manifest_path));
    for (auto& u : m.utterances) {
        const TensorFile raw = read_tensor_file(root / u.video);
        std::size_t t_len, h, w, ch = 1;
        if (raw.shape.size() == 3) {
            t_len = raw.shape[0], h = raw.shape[1], w = raw.shape[2];
        } else if (raw.shape.size() == 4 && raw.shape[3] == 3) {
            t_len = raw.shape[0], h = raw.shape[1], w = raw.shape[2], ch = 3;
        } else {
            throw DataError("video tensor must be T x H x W (x3): " + u.video);
        }
        if (raw.dtype != Dtype::u8) throw DataError("video tensor must be uint8: " + u.video);

        std::vector<std::uint8_t> out_frames(t_len * size * size);
        for (std::size_t t = 0; t < t_len; ++t) {
            std::vector<std::uint8_t> frame(raw.u8.begin() + t * h * w * ch,
                                            raw.u8.begin() + (t + 1) * h * w * ch);
            if (ch == 3) frame = grayscale(frame, h, w, 3);
            const auto resized = resize_bilinear(frame, h, w, size, size);
            std::copy(resized.begin(), resized.end(), out_frames.begin() + t * size * size);
        }
        u.feat_video = "feat/" + u.id + ".video.mtns";
        write_u8(root / u.feat_video, {t_len, size, size}, out_frames);
    }
    save_manifest(m, manifest_path);
}

// ---------------------------------------------------------------------------
// KPCA commands

void kpca_fit_cmd(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& model_json, const ExperimentConfig& cfg) {
    const Manifest m = load_manifest(manifest_path);
    const auto root = manifest_path.parent_path();

    std::vector<Tensor> blocks;
    std::size_t total = 0, dim = 0;
    for (const auto& u : m.utterances) {
        if (u.split != "train") continue;  // fit on training subjects only
        if (u.feat_eeg.empty())
            throw DataError("missing EEG features for " + u.id + "; run extract-eeg first");
        Tensor f = read_tensor_file(root / u.feat_eeg).to_tensor();
        dim = f.shape[1];
        total += f.shape[0];
        blocks.push_back(std::move(f));
    }
    if (total == 0) throw DataError("no training-split EEG features found");

    const std::size_t want = std::min(cfg.kpca_max_points, total);
    const std::size_t stride = std::max<std::size_t>(1, total / want);
    Tensor sample({want, dim});
    std::size_t row = 0, idx = 0;
    for (const auto& b : blocks)
        for (std::size_t t = 0; t < b.shape[0]; ++t, ++idx)
            if (idx % stride == 0 && row < want) {
                std::copy_n(&b.data[t * dim], dim, &sample.data[row * dim]);
                ++row;
            }
    sample.shape[0] = row;
    sample.data.resize(row * dim);

    const KpcaModel model = kpca_fit(sample, cfg.kpca_components);
    if (!model_json.parent_path().empty())
        std::filesystem::create_directories(model_json.parent_path());
    save_kpca(model, model_json);
}

void kpca_apply_cmd(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& model_json) {
    Manifest m = load_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    const KpcaModel model = load_kpca(model_json);
    for (auto& u : m.utterances) {
        if (u.feat_eeg.empty())
            throw DataError("missing EEG features for " + u.id + "; run extract-eeg first");
        const Tensor f = read_tensor_file(root / u.feat_eeg).to_tensor();
        const Tensor reduced = kpca_transform_all(model, f);
        u.feat_kpca = "feat/" + u.id + ".kpca.mtns";
        write_f32(root / u.feat_kpca, reduced);
    }
    save_manifest(m, manifest_path);
}

// ---------------------------------------------------------------------------
// Feature loading for train/eval

namespace {

struct LoadedUtterance {
    std::string id;
    std::string transcript;
    std::vector<int> label;
    Tensor video;  // T x S x S in [0,1], empty when unused
    Tensor side;   // T x Ds, empty when unused
    std::size_t length = 0;
};

Tensor load_video_features(const std::filesystem::path& root, const UtteranceMeta& u,
                           std::size_t size) {
    if (u.feat_video.empty())
        throw DataError("missing video features for " + u.id + "; run extract-video first");
    const TensorFile raw = read_tensor_file(root / u.feat_video);
    if (raw.shape.size() != 3 || raw.dtype != Dtype::u8)
        throw DataError("video features must be uint8 T x S x S: " + u.feat_video);
    const std::size_t t_len = raw.shape[0], h = raw.shape[1], w = raw.shape[2];

    Tensor out({t_len, size, size});
    for (std::size_t t = 0; t < t_len; ++t) {
        std::vector<std::uint8_t> frame(raw.u8.begin() + t * h * w,
                                        raw.u8.begin() + (t + 1) * h * w);
        if (h != size || w != size) frame = resize_bilinear(frame, h, w, size, size);
        for (std::size_t i = 0; i < size * size; ++i)
            out.data[t * size * size + i] = frame[i] / 255.0;
    }
    return out;
}

LoadedUtterance load_utterance(const std::filesystem::path& root, const UtteranceMeta& u,
                               const ExperimentConfig& cfg) {
    LoadedUtterance out;
    out.id = u.id;
    out.transcript = u.transcript;
    out.label = Alphabet::encode(u.transcript);

    std::vector<Tensor> side_parts;
    if (uses_eeg(cfg.condition)) {
        if (u.feat_kpca.empty())
            throw DataError("missing KPCA features for " + u.id + "; run kpca-apply first");
        side_parts.push_back(read_tensor_file(root / u.feat_kpca).to_tensor());
    }
    if (uses_mfcc(cfg.condition)) {
        if (u.feat_mfcc.empty())
            throw DataError("missing MFCC features for " + u.id + "; run extract-mfcc first");
        side_parts.push_back(read_tensor_file(root / u.feat_mfcc).to_tensor());
    }
    Tensor video;
    if (uses_video(cfg.condition)) video = load_video_features(root, u, cfg.video_size);

    // Align all 100 Hz streams by truncation to the shortest, then stride.
    std::vector<std::size_t> lengths;
    if (uses_video(cfg.condition)) lengths.push_back(video.shape[0]);
    for (const auto& p : side_parts) lengths.push_back(p.shape[0]);
    const std::size_t t_aligned = aligned_length(lengths);
    const std::size_t t_out = (t_aligned + cfg.time_stride - 1) / cfg.time_stride;
    out.length = t_out;

    if (uses_video(cfg.condition)) {
        const std::size_t px = cfg.video_size * cfg.video_size;
        out.video = Tensor({t_out, cfg.video_size, cfg.video_size});
        for (std::size_t t = 0; t < t_out; ++t)
            std::copy_n(&video.data[(t * cfg.time_stride) * px], px, &out.video.data[t * px]);
    }
    if (!side_parts.empty()) {
        std::size_t ds = 0;
        for (const auto& p : side_parts) ds += p.shape[1];
        out.side = Tensor({t_out, ds});
        for (std::size_t t = 0; t < t_out; ++t) {
            std::size_t off = 0;
            for (const auto& p : side_parts) {
                std::copy_n(&p.data[(t * cfg.time_stride) * p.shape[1]], p.shape[1],
                            &out.side.data[t * ds + off]);
                off += p.shape[1];
            }
        }
    }
    return out;
}

struct Standardizer {
    std::vector<double> mean, stdev;

    void fit(const std::vector<LoadedUtterance>& utts, std::size_t dim) {
        mean.assign(dim, 0.0);
        stdev.assign(dim, 0.0);
        std::size_t n = 0;
        for (const auto& u : utts) {
            for (std::size_t t = 0; t < u.side.shape[0]; ++t)
                for (std::size_t d = 0; d < dim; ++d) mean[d] += u.side.at2(t, d);
            n += u.side.shape[0];
        }
        for (double& v : mean) v /= double(n);
        for (const auto& u : utts)
            for (std::size_t t = 0; t < u.side.shape[0]; ++t)
                for (std::size_t d = 0; d < dim; ++d) {
                    const double diff = u.side.at2(t, d) - mean[d];
                    stdev[d] += diff * diff;
                }
        for (double& v : stdev) v = std::max(std::sqrt(v / double(n)), 1e-8);
    }

    void apply(Tensor& side) const {
        for (std::size_t t = 0; t < side.shape[0]; ++t)
            for (std::size_t d = 0; d < mean.size(); ++d)
                side.at2(t, d) = (side.at2(t, d) - mean[d]) / stdev[d];
    }

    void save(const std::filesystem::path& path) const {
        nlohmann::json j = {{"format", "feature-norm"}, {"mean", mean}, {"std", stdev}};
        std::ofstream out(path);
        if (!out) throw DataError("cannot write " + path.string());
        out << j.dump(2) << "\n";
    }

    static Standardizer load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open " + path.string());
        nlohmann::json j;
        in >> j;
        Standardizer s;
        s.mean = j["mean"].get<std::vector<double>>();
        s.stdev = j["std"].get<std::vector<double>>();
        return s;
    }
};

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Training

TrainResult run_training(const ExperimentConfig& cfg,
                         const std::filesystem::path& manifest_path,
                         const std::filesystem::path& out_dir) {
    const Manifest manifest = load_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    std::filesystem::create_directories(out_dir);

    std::vector<LoadedUtterance> train_utts;
    std::vector<std::string> train_texts;
    for (const auto& u : manifest.utterances) {
        if (u.split != "train") continue;
        train_utts.push_back(load_utterance(root, u, cfg));
        train_texts.push_back(u.transcript);
    }
    if (train_utts.empty()) throw DataError("manifest has no training utterances");

    const std::size_t side_dim = side_dim_for(cfg);
    for (const auto& u : train_utts)
        if (side_dim > 0 && u.side.shape[1] != side_dim)
            throw DataError("side feature width " + std::to_string(u.side.shape[1]) +
                            " does not match the configured " + std::to_string(side_dim) +
                            " for " + u.id);
    Standardizer norm;
    if (side_dim > 0) {
        norm.fit(train_utts, side_dim);
        for (auto& u : train_utts) norm.apply(u.side);
    }

    const Rng master(cfg.seed);

    // Deterministic validation split by seeded shuffle.
    std::vector<std::size_t> order(train_utts.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    {
        Rng split_rng = master.fork(0x5117);
        split_rng.shuffle(order);
    }
    std::size_t n_val = std::size_t(std::llround(cfg.validation_split * double(order.size())));
    if (n_val >= order.size()) n_val = order.size() - 1;
    std::vector<std::size_t> val_idx(order.end() - n_val, order.end());
    std::vector<std::size_t> fit_idx(order.begin(), order.end() - n_val);

    ModelConfig mc;
    mc.mode = cfg.condition == Condition::video ? ModelMode::video_only
              : cfg.condition == Condition::mfcc ? ModelMode::side_only
                                                 : ModelMode::fusion;
    mc.side_dim = side_dim;
    mc.video_height = mc.video_width = cfg.video_size;
    mc.dropout_rate = cfg.dropout_rate;

    Rng init_rng = master.fork(0x1217);
    SpeechModel model(mc, init_rng);
    AdamConfig ac;
    ac.lr = cfg.learning_rate;
    AdamState adam(model.params(), ac);
    Rng drop_rng = master.fork(0xD20);

    TrainResult result;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng epoch_rng = master.fork(0xE000 + epoch);
        epoch_rng.shuffle(fit_idx);

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        for (std::size_t start = 0; start < fit_idx.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, fit_idx.size());
            model.zero_grads();
            const double inv = 1.0 / double(end - start);
            for (std::size_t i = start; i < end; ++i) {
                LoadedUtterance& u = train_utts[fit_idx[i]];
                const Tensor probs = model.forward(u.video, u.side, true, drop_rng);
                CtcResult res = ctc_loss(probs, u.label);
                if (!res.feasible) continue;
                loss_sum += res.loss;
                ++loss_count;
                kernels::active().scale(inv, res.grad.data.data(), res.grad.size());
                model.backward(res.grad);
            }
            adam_step(adam, model.params());
        }
        result.train_loss.push_back(loss_count ? loss_sum / double(loss_count) : 0.0);

        double val_sum = 0.0;
        std::size_t val_count = 0;
        for (std::size_t i : val_idx) {
            LoadedUtterance& u = train_utts[i];
            const Tensor probs = model.forward(u.video, u.side, false, drop_rng);
            const CtcResult res = ctc_loss(probs, u.label);
            if (!res.feasible) continue;
            val_sum += res.loss;
            ++val_count;
        }
        result.val_loss.push_back(val_count ? val_sum / double(val_count) : 0.0);
    }

    // Artifacts: loss curve, checkpoint, LM, feature normalization, config echo.
    {
        std::ofstream csv(out_dir / "loss.csv");
        csv << "epoch,train_loss,val_loss\n";
        for (std::size_t e = 0; e < cfg.epochs; ++e)
            csv << (e + 1) << "," << fmt_double(result.train_loss[e]) << ","
                << fmt_double(result.val_loss[e]) << "\n";
    }
    result.checkpoint_dir = out_dir / "checkpoint";
    model.save(result.checkpoint_dir);
    if (side_dim > 0) norm.save(out_dir / "norm.json");
    NGramModel::train(train_texts).save(out_dir / "lm.json");
    {
        nlohmann::json j = {{"condition", condition_name(cfg.condition)},
                            {"seed", cfg.seed},
                            {"epochs", cfg.epochs},
                            {"batch_size", cfg.batch_size},
                            {"video_size", cfg.video_size},
                            {"time_stride", cfg.time_stride}};
        std::ofstream out(out_dir / "train_config.json");
        out << j.dump(2) << "\n";
    }
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

struct EvalContext {
    std::unique_ptr<SpeechModel> model;
    Standardizer norm;
    bool has_norm = false;
    NGramModel lm;
};

EvalContext load_eval_context(const ExperimentConfig& cfg,
                              const std::filesystem::path& train_out_dir) {
    EvalContext ctx;
    ctx.model = SpeechModel::load(train_out_dir / "checkpoint");
    if (ctx.model->config().alphabet_size != Alphabet::kSize)
        throw ConfigError("checkpoint alphabet size does not match the decoder alphabet");
    if (side_dim_for(cfg) != ctx.model->config().side_dim)
        throw ConfigError("checkpoint was trained for a different feature condition");
    if (ctx.model->config().side_dim > 0) {
        ctx.norm = Standardizer::load(train_out_dir / "norm.json");
        ctx.has_norm = true;
    }
    ctx.lm = NGramModel::load(cfg.lm_path.empty() ? train_out_dir / "lm.json" : cfg.lm_path);
    return ctx;
}

std::string decode_one(EvalContext& ctx, const ExperimentConfig& cfg, LoadedUtterance& u) {
    Rng unused(0);
    const Tensor probs = ctx.model->forward(u.video, u.side, false, unused);
    BeamSearchParams bp;
    bp.beam_width = cfg.beam_width;
    bp.lm_alpha = cfg.lm_alpha;
    bp.len_beta = cfg.len_beta;
    bp.lm = &ctx.lm;
    return beam_search_decode(probs, bp);
}

}  // namespace

EvalReport run_eval(const ExperimentConfig& cfg, const std::filesystem::path& manifest_path,
                    const std::filesystem::path& train_out_dir, const std::string& split,
                    const std::filesystem::path& report_path) {
    const Manifest manifest = load_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    EvalContext ctx = load_eval_context(cfg, train_out_dir);

    nlohmann::json rows = nlohmann::json::array();
    double wer_sum = 0.0;
    std::size_t count = 0;
    for (const auto& meta : manifest.utterances) {
        if (meta.split != split) continue;
        LoadedUtterance u = load_utterance(root, meta, cfg);
        if (ctx.has_norm) ctx.norm.apply(u.side);
        const std::string hyp = decode_one(ctx, cfg, u);
        const double w = wer(meta.transcript, hyp);
        wer_sum += w;
        ++count;
        rows.push_back({{"id", meta.id}, {"ref", meta.transcript}, {"hyp", hyp}, {"wer", w}});
    }
    if (count == 0) throw DataError("no utterances in split '" + split + "'");

    EvalReport report;
    report.mean_wer = wer_sum / double(count);
    report.utterance_count = count;

    nlohmann::json j = {{"format", "eval-report"},
                        {"condition", condition_name(cfg.condition)},
                        {"seed", cfg.seed},
                        {"split", split},
                        {"decoder",
                         {{"beam_width", cfg.beam_width},
                          {"lm_alpha", cfg.lm_alpha},
                          {"len_beta", cfg.len_beta}}},
                        {"utterances", std::move(rows)},
                        {"mean_wer", report.mean_wer}};
    if (!report_path.parent_path().empty())
        std::filesystem::create_directories(report_path.parent_path());
    std::ofstream out(report_path);
    if (!out) throw DataError("cannot write report: " + report_path.string());
    out << j.dump(2) << "\n";
    return report;
}

std::string decode_utterance(const ExperimentConfig& cfg,
                             const std::filesystem::path& manifest_path,
                             const std::filesystem::path& train_out_dir,
                             const std::string& utterance_id) {
    const Manifest manifest = load_manifest(manifest_path);
    const auto root = manifest_path.parent_path();
    for (const auto& meta : manifest.utterances) {
        if (meta.id != utterance_id) continue;
        EvalContext ctx = load_eval_context(cfg, train_out_dir);
        LoadedUtterance u = load_utterance(root, meta, cfg);
        if (ctx.has_norm) ctx.norm.apply(u.side);
        return decode_one(ctx, cfg, u);
    }
    throw DataError("utterance id not found in manifest: " + utterance_id);
}

}  // namespace mmsr
