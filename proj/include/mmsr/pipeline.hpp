#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mmsr/nn.hpp"
#include "mmsr/synth.hpp"
#include "mmsr/tensor.hpp"

namespace mmsr {

enum class Condition { video, video_mfcc, video_eeg, video_eeg_mfcc, mfcc };

Condition condition_from(const std::string& name);
std::string condition_name(Condition c);

struct ExperimentConfig {
    Condition condition = Condition::video_eeg_mfcc;
    std::uint64_t seed = 1234;

    // training
    std::size_t epochs = 120;
    std::size_t batch_size = 100;
    double validation_split = 0.1;
    double learning_rate = 1e-3;
    double dropout_rate = 0.1;

    // desk-scale reductions applied identically at train and eval time
    std::size_t video_size = 8;     // side length after downsampling
    std::size_t time_stride = 2;    // keep every k-th aligned frame

    // KPCA
    std::size_t kpca_components = 30;
    std::size_t kpca_max_points = 800;

    // decoder
    std::size_t beam_width = 16;
    double lm_alpha = 0.5;
    double len_beta = 0.6;
    std::filesystem::path lm_path;  // empty: use the LM trained alongside the model

    static ExperimentConfig from_json_file(const std::filesystem::path& path);
    void apply_json_file(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Feature extraction over a manifest (writes feat/ tensors, updates manifest)

void extract_eeg_all(const std::filesystem::path& manifest_path);
void extract_mfcc_all(const std::filesystem::path& manifest_path);
// Grayscale + resize to size x size; stored as u8.
void extract_video_all(const std::filesystem::path& manifest_path, std::size_t size = 100);

void kpca_fit_cmd(const std::filesystem::path& manifest_path,
                  const std::filesystem::path& model_json, const ExperimentConfig& cfg);
void kpca_apply_cmd(const std::filesystem::path& manifest_path,
                    const std::filesystem::path& model_json);

// ---------------------------------------------------------------------------
// Training / evaluation

struct TrainResult {
    std::filesystem::path checkpoint_dir;
    std::vector<double> train_loss;  // one entry per epoch
    std::vector<double> val_loss;
};

// Trains the model for cfg.condition on the manifest's train split and writes
// <out_dir>/checkpoint/, <out_dir>/loss.csv and <out_dir>/lm.json.
TrainResult run_training(const ExperimentConfig& cfg,
                         const std::filesystem::path& manifest_path,
                         const std::filesystem::path& out_dir);

struct EvalReport {
    double mean_wer = 0.0;
    std::size_t utterance_count = 0;
};

// Decodes every utterance of the given split and writes a JSON report.
EvalReport run_eval(const ExperimentConfig& cfg, const std::filesystem::path& manifest_path,
                    const std::filesystem::path& train_out_dir, const std::string& split,
                    const std::filesystem::path& report_path);

// Decode a single utterance by id; returns the hypothesis text.
std::string decode_utterance(const ExperimentConfig& cfg,
                             const std::filesystem::path& manifest_path,
                             const std::filesystem::path& train_out_dir,
                             const std::string& utterance_id);

}  // namespace mmsr
