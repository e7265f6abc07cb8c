#include <doctest.h>

#include <cmath>
#include <vector>

#include "mmsr/dsp.hpp"
#include "mmsr/errors.hpp"

using namespace mmsr;

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

AudioRecording tone(double hz, double seconds) {
    AudioRecording a;
    a.sample_rate_hz = 16000;
    a.samples.resize(std::size_t(seconds * 16000.0));
    for (std::size_t n = 0; n < a.samples.size(); ++n)
        a.samples[n] = std::sin(2.0 * M_PI * hz * double(n) / 16000.0);
    return a;
}

}  // namespace

TEST_CASE("shapes and frame counts") {
    const FeatureSequence f = extract_mfcc(tone(440.0, 1.0));
    CHECK(f.frames.shape[1] == 13);
    // floor((16000 - 400)/160) + 1 = 98
    CHECK(f.frames.shape[0] == 98);
    CHECK(f.frame_rate_hz == 100.0);
    CHECK(f.frames.all_finite());

    AudioRecording wrong;
    wrong.sample_rate_hz = 8000;
    wrong.samples.resize(8000);
    CHECK_THROWS_AS(extract_mfcc(wrong), ParameterError);
}

TEST_CASE("all-zero audio yields constant finite frames") {
    AudioRecording a;
    a.sample_rate_hz = 16000;
    a.samples.assign(16000, 0.0);
    const FeatureSequence f = extract_mfcc(a);
    CHECK(f.frames.all_finite());
    for (std::size_t t = 1; t < f.frames.shape[0]; ++t)
        for (std::size_t d = 0; d < 13; ++d)
            CHECK(f.frames.at2(t, d) == doctest::Approx(f.frames.at2(0, d)));
    // log floor makes every filter energy equal, so only c0 survives the DCT
    for (std::size_t d = 1; d < 13; ++d)
        CHECK(std::abs(f.frames.at2(0, d)) < 1e-9);
}

TEST_CASE("mel filterbank structure") {
    const Tensor fb = mel_filterbank(512, 26, 16000.0);
    REQUIRE(fb.shape == std::vector<std::size_t>{26, 257});
    for (double v : fb.data) CHECK(v >= 0.0);
    // every filter has support, peaks at most 1
    for (std::size_t m = 0; m < 26; ++m) {
        double peak = 0.0;
        for (std::size_t k = 0; k < 257; ++k) peak = std::max(peak, fb.at2(m, k));
        CHECK(peak > 0.0);
        CHECK(peak <= 1.0 + 1e-12);
    }
}

TEST_CASE("1 kHz tone concentrates energy in the covering mel bands") {
    const Tensor logmel = log_mel_energies(tone(1000.0, 0.5));
    REQUIRE(logmel.shape[1] == 26);

    // find which triangular filters cover 1 kHz from the mel grid definition
    const double mel_lo = hz_to_mel(0.0), mel_hi = hz_to_mel(8000.0);
    const double mel_tone = hz_to_mel(1000.0);
    // filter m spans mel points [m, m+2] of a 28-point uniform grid
    const double grid_step = (mel_hi - mel_lo) / 27.0;
    const double pos = (mel_tone - mel_lo) / grid_step;  // in grid units

    std::size_t best = 0;
    double best_val = -1e30;
    for (std::size_t m = 0; m < 26; ++m) {
        double mean = 0.0;
        for (std::size_t t = 0; t < logmel.shape[0]; ++t) mean += logmel.at2(t, m);
        mean /= double(logmel.shape[0]);
        if (mean > best_val) {
            best_val = mean;
            best = m;
        }
    }
    // the winning filter's center (grid index m+1) must be adjacent to the tone
    CHECK(std::abs(double(best) + 1.0 - pos) <= 1.5);
}
