#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "mmsr/tensor.hpp"

namespace mmsr {

// ---------------------------------------------------------------------------
// Domain types

struct EegRecording {
    // channels[c] holds the raw voltage trace of one electrode (microvolts).
    std::vector<std::vector<double>> channels;
    int sample_rate_hz = 1000;

    std::size_t channel_count() const { return channels.size(); }
    void validate() const;  // equal lengths, positive rate
};

struct AudioRecording {
    std::vector<double> samples;
    int sample_rate_hz = 16000;
};

enum class FeatureKind { eeg_stat, mfcc, kpca_reduced, concatenated, video_embed };

struct FeatureSequence {
    Tensor frames;  // T x D
    double frame_rate_hz = 100.0;
    FeatureKind kind = FeatureKind::eeg_stat;

    std::size_t length() const { return frames.shape.empty() ? 0 : frames.shape[0]; }
    std::size_t width() const { return frames.shape.size() < 2 ? 0 : frames.shape[1]; }
};

// One second-order IIR section; a0 normalized to 1.
struct Biquad {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    bool stable() const;  // poles strictly inside the unit circle
};

struct BiquadCascade {
    std::vector<Biquad> sections;

    bool stable() const;
    // |H(e^{j 2 pi f / fs})| evaluated analytically from the coefficients.
    double magnitude(double freq_hz, double fs_hz) const;
};

// Five per-window statistics, in this order:
// rms, zero-crossing rate, moving-window average, kurtosis, power spectral entropy.
struct StatFeatures {
    std::array<double, 5> values{};
    bool degenerate = false;  // zero-variance window; kurtosis/pse defined as 0
};

// ---------------------------------------------------------------------------
// Filter design and application

// Butterworth band-pass from an analog low-pass prototype of the given
// (even) order via the low-pass to band-pass transform and bilinear mapping
// with frequency prewarping; yields `order` biquad sections.
BiquadCascade design_bandpass(int order, double low_hz, double high_hz, double fs_hz);

// Mains notch (band-stop) biquad at center_hz with quality factor q.
BiquadCascade design_notch(double center_hz, double fs_hz, double q);

// Causal direct-form filtering with zero initial state.
std::vector<double> apply_filter(const std::vector<double>& x, const BiquadCascade& f);

// ---------------------------------------------------------------------------
// Framing and statistical features

// Slices x into windows of window_ms at hop fs/frame_rate, zero-padding the
// trailing partial windows on the right. Frame count = ceil(len / hop).
std::vector<std::vector<double>> frame_windows(const std::vector<double>& x, int fs_hz,
                                               int frame_rate_hz, int window_ms);

StatFeatures stat_features(const std::vector<double>& window);

// Per channel: band-pass, notch, frame at 100 Hz, five statistics;
// channel blocks concatenated in channel order (D = 5 * channel_count).
FeatureSequence extract_eeg_features(const EegRecording& rec, const BiquadCascade& bandpass,
                                     const BiquadCascade& notch);

// ---------------------------------------------------------------------------
// MFCC

struct MfccConfig {
    double pre_emphasis = 0.97;
    int window_samples = 400;  // 25 ms at 16 kHz
    int hop_samples = 160;     // 10 ms
    int fft_size = 512;
    int mel_filters = 26;
    int coefficients = 13;
    double log_floor = 1e-10;
};

// Triangular mel filterbank as weight rows over the one-sided FFT bins.
// Returned matrix is mel_filters x (fft_size/2 + 1).
Tensor mel_filterbank(int fft_size, int mel_filters, double fs_hz);

// Log mel filterbank energies per frame (T x mel_filters), before the DCT.
Tensor log_mel_energies(const AudioRecording& audio, const MfccConfig& cfg = {});

// 13 MFCCs per 10 ms frame at 16 kHz input; rejects other sample rates.
FeatureSequence extract_mfcc(const AudioRecording& audio, const MfccConfig& cfg = {});

}  // namespace mmsr
