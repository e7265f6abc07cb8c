#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mmsr/ctc.hpp"
#include "mmsr/errors.hpp"
#include "mmsr/nn.hpp"
#include "mmsr/pipeline.hpp"
#include "mmsr/rng.hpp"
#include "mmsr/synth.hpp"

namespace {

using namespace mmsr;

// Finite-difference check of the full model gradient on a small random
// problem. Returns the worst relative error over a deterministic subsample
// of every parameter tensor.
int run_gradcheck(std::uint64_t seed) {
    ModelConfig mc;
    mc.mode = ModelMode::fusion;
    mc.side_dim = 5;
    mc.conv_filters = 4;
    mc.video_embed = 6;
    mc.video_height = 8;
    mc.video_width = 8;
    mc.gru_units[0] = 6;
    mc.gru_units[1] = 5;
    mc.gru_units[2] = 4;
    mc.tcn_filters = 4;
    mc.dropout_rate = 0.0;

    Rng rng(seed);
    SpeechModel model(mc, rng);

    const std::size_t t_len = 7;
    Tensor video({t_len, mc.video_height, mc.video_width});
    Tensor side({t_len, mc.side_dim});
    for (double& v : video.data) v = rng.uniform();
    for (double& v : side.data) v = rng.normal();
    const std::vector<int> label = {2, 3, 4};  // "ab" style short target

    Rng unused(0);
    auto loss_at = [&]() {
        const Tensor probs = model.forward(video, side, false, unused);
        return ctc_loss(probs, label).loss;
    };

    const double base = loss_at();
    {
        const Tensor probs = model.forward(video, side, false, unused);
        CtcResult res = ctc_loss(probs, label);
        model.zero_grads();
        model.backward(res.grad);
    }

    const double eps = 1e-5;
    double worst = 0.0;
    std::string worst_param;
    for (Param* p : model.params()) {
        const std::size_t n = p->value.size();
        const std::size_t step = std::max<std::size_t>(1, n / 5);
        for (std::size_t i = 0; i < n; i += step) {
            const double keep = p->value.data[i];
            p->value.data[i] = keep + eps;
            const double up = loss_at();
            p->value.data[i] = keep - eps;
            const double dn = loss_at();
            p->value.data[i] = keep;
            const double fd = (up - dn) / (2.0 * eps);
            const double an = p->grad.data[i];
            const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
            if (rel > worst) {
                worst = rel;
                worst_param = p->name;
            }
        }
    }
    std::printf("loss=%.6f  max relative gradient error=%.3e (%s)\n", base, worst,
                worst_param.c_str());
    if (worst > 1e-3) {
        std::printf("gradcheck: FAIL\n");
        return 1;
    }
    std::printf("gradcheck: PASS\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multimodal speech recognition pipeline"};
    app.require_subcommand(1);
    app.fallthrough();  // let global flags appear after the subcommand name

    std::string config_path, out_dir = ".";
    std::uint64_t seed = 1234;
    bool seed_set = false;
    app.add_option("--config", config_path, "JSON experiment config")->expected(1);
    app.add_option("--seed", seed, "master RNG seed")
        ->expected(1)
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--out-dir", out_dir, "output directory");

    // synth-data
    auto* synth = app.add_subcommand("synth-data", "generate a synthetic corpus");
    SynthConfig sc;
    synth->add_option("--sentences", sc.n_sentences, "distinct sentences");
    synth->add_option("--reps", sc.n_reps, "repetitions per sentence and subject");
    synth->add_option("--subjects", sc.n_subjects, "number of subjects");
    synth->add_option("--train-subjects", sc.train_subjects, "leading subjects used for training");
    synth->add_option("--eeg-noise", sc.eeg_noise, "EEG noise sigma");
    synth->add_option("--audio-noise", sc.audio_noise, "audio noise sigma");
    synth->add_option("--video-noise", sc.video_noise, "video noise amplitude");

    // extraction
    std::string manifest;
    auto add_manifest = [&](CLI::App* cmd) {
        cmd->add_option("--manifest", manifest, "dataset manifest path")->required();
    };
    auto* x_eeg = app.add_subcommand("extract-eeg", "band-pass, notch and window statistics");
    add_manifest(x_eeg);
    auto* x_mfcc = app.add_subcommand("extract-mfcc", "13 MFCCs per 10 ms hop");
    add_manifest(x_mfcc);
    auto* x_video = app.add_subcommand("extract-video", "grayscale and resize frames");
    add_manifest(x_video);
    std::size_t video_size = 100;
    x_video->add_option("--size", video_size, "output side length");

    // KPCA
    std::string kpca_model;
    auto* k_fit = app.add_subcommand("kpca-fit", "fit polynomial-kernel PCA on EEG features");
    add_manifest(k_fit);
    k_fit->add_option("--model", kpca_model, "output model path")->required();
    auto* k_apply = app.add_subcommand("kpca-apply", "project EEG features through a KPCA model");
    add_manifest(k_apply);
    k_apply->add_option("--model", kpca_model, "KPCA model path")->required();

    // train
    auto* train = app.add_subcommand("train", "train a recognizer for one feature condition");
    add_manifest(train);
    std::string condition;
    std::size_t epochs = 0;
    train->add_option("--condition", condition,
                      "video | video+mfcc | video+eeg | video+eeg+mfcc | mfcc");
    train->add_option("--epochs", epochs, "override the configured epoch count");

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "decode a split and report word error rate");
    add_manifest(eval);
    std::string model_dir, split = "test", report = "report.json";
    auto add_decode_opts = [&](CLI::App* cmd, ExperimentConfig& cfg) {
        cmd->add_option("--model-dir", model_dir, "training output directory")->required();
        cmd->add_option("--beam-width", cfg.beam_width, "beam width");
        cmd->add_option("--lm-alpha", cfg.lm_alpha, "LM fusion weight");
        cmd->add_option("--len-beta", cfg.len_beta, "length bonus weight");
        cmd->add_option("--lm-path", cfg.lm_path, "override the trained LM");
        cmd->add_option("--condition", condition,
                        "video | video+mfcc | video+eeg | video+eeg+mfcc | mfcc");
    };
    ExperimentConfig cfg;
    add_decode_opts(eval, cfg);
    eval->add_option("--split", split, "manifest split to decode");
    eval->add_option("--report", report, "report JSON path");

    // decode
    auto* decode = app.add_subcommand("decode", "decode a single utterance by id");
    add_manifest(decode);
    std::string utt_id;
    add_decode_opts(decode, cfg);
    decode->add_option("--id", utt_id, "utterance id")->required();

    // gradcheck
    app.add_subcommand("gradcheck", "finite-difference check of the model gradient");

    CLI11_PARSE(app, argc, argv);

    try {
        if (!config_path.empty()) cfg.apply_json_file(config_path);
        if (seed_set) cfg.seed = seed;
        if (!condition.empty()) cfg.condition = condition_from(condition);
        if (epochs > 0) cfg.epochs = epochs;

        if (synth->parsed()) {
            sc.seed = cfg.seed;
            const Manifest m = synth_dataset(sc, out_dir);
            std::printf("wrote %zu utterances under %s\n", m.utterances.size(), out_dir.c_str());
        } else if (x_eeg->parsed()) {
            extract_eeg_all(manifest);
        } else if (x_mfcc->parsed()) {
            extract_mfcc_all(manifest);
        } else if (x_video->parsed()) {
            extract_video_all(manifest, video_size);
        } else if (k_fit->parsed()) {
            kpca_fit_cmd(manifest, kpca_model, cfg);
        } else if (k_apply->parsed()) {
            kpca_apply_cmd(manifest, kpca_model);
        } else if (train->parsed()) {
            const TrainResult r = run_training(cfg, manifest, out_dir);
            std::printf("final train loss %.4f, val loss %.4f, checkpoint at %s\n",
                        r.train_loss.back(), r.val_loss.back(),
                        r.checkpoint_dir.string().c_str());
        } else if (eval->parsed()) {
            const EvalReport r = run_eval(cfg, manifest, model_dir, split, report);
            std::printf("%zu utterances, mean WER %.2f%%\n", r.utterance_count, r.mean_wer);
        } else if (decode->parsed()) {
            std::printf("%s\n", decode_utterance(cfg, manifest, model_dir, utt_id).c_str());
        } else {
            return run_gradcheck(cfg.seed);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
