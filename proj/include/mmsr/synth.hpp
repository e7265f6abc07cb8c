#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mmsr {

// Synthetic corpus generator. Each character of a transcript drives a
// class-conditioned latent code that shapes all three modalities, so the
// transcript is recoverable from EEG, audio and video alike:
//   EEG   - per-channel sinusoid mixtures at a character-specific frequency
//   audio - character-specific tones at 16 kHz
//   video - a Gaussian blob at a character-specific grid position, 100 fps
struct SynthConfig {
    std::size_t n_sentences = 30;
    std::size_t n_reps = 3;
    std::size_t n_subjects = 7;
    std::size_t train_subjects = 6;  // leading subjects; the rest are test
    std::uint64_t seed = 1234;
    double eeg_noise = 1.0;      // additive white noise, signal amplitude ~10
    double audio_noise = 0.05;   // tone amplitude 0.4
    double video_noise = 12.0;   // uint8 counts, blob peak 180
    double seconds_per_char = 0.085;
};

struct UtteranceMeta {
    std::string id;
    std::string transcript;
    int subject = 0;
    int rep = 0;
    std::string split;  // "train" or "test"
    // Paths relative to the manifest directory; feature entries are filled
    // in by the extraction commands.
    std::string eeg, audio, video;
    std::string feat_eeg, feat_mfcc, feat_video, feat_kpca;
};

struct Manifest {
    std::vector<UtteranceMeta> utterances;
};

const std::vector<std::string>& builtin_sentences();

// Writes raw tensors under out_dir/raw and out_dir/manifest.json.
// Byte-identical output for identical config.
Manifest synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir);

void save_manifest(const Manifest& m, const std::filesystem::path& path);
Manifest load_manifest(const std::filesystem::path& path);

}  // namespace mmsr
