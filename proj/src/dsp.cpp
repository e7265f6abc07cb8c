#include "mmsr/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <mutex>

#include "mmsr/errors.hpp"
#include "mmsr/kernels.hpp"

namespace mmsr {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

// ---------------------------------------------------------------------------
// Types

void EegRecording::validate() const {
    if (channels.empty()) throw DataError("EEG recording has no channels");
    if (sample_rate_hz <= 0) throw DataError("EEG sample rate must be positive");
    const std::size_t len = channels.front().size();
    for (const auto& ch : channels)
        if (ch.size() != len) throw DataError("EEG channel length mismatch");
}

bool Biquad::stable() const {
    // Triangle criterion for a 2nd-order denominator.
    return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
}

bool BiquadCascade::stable() const {
    for (const auto& s : sections)
        if (!s.stable()) return false;
    return true;
}

double BiquadCascade::magnitude(double freq_hz, double fs_hz) const {
    const double w = 2.0 * kPi * freq_hz / fs_hz;
    const std::complex<double> z1 = std::polar(1.0, -w);   // z^-1
    const std::complex<double> z2 = std::polar(1.0, -2 * w);
    std::complex<double> h = 1.0;
    for (const auto& s : sections)
        h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return std::abs(h);
}

// ---------------------------------------------------------------------------
// Filter design

namespace {

using cplx = std::complex<double>;

// Group 2n poles that are closed under conjugation into n (a1, a2) pairs.
std::vector<std::pair<double, double>> pair_poles(std::vector<cplx> poles) {
    std::vector<std::pair<double, double>> out;
    const double eps = 1e-9;
    std::vector<cplx> reals;
    for (const auto& p : poles) {
        if (std::abs(p.imag()) > eps) {
            if (p.imag() > 0) out.emplace_back(-2.0 * p.real(), std::norm(p));
        } else {
            reals.push_back(p);
        }
    }
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2) {
        double r1 = reals[i].real(), r2 = reals[i + 1].real();
        out.emplace_back(-(r1 + r2), r1 * r2);
    }
    return out;
}

}  // namespace

BiquadCascade design_bandpass(int order, double low_hz, double high_hz, double fs_hz) {
    if (order < 2 || order % 2 != 0)
        throw ParameterError("band-pass order must be a positive even number");
    if (!(0.0 < low_hz && low_hz < high_hz && high_hz < fs_hz / 2.0))
        throw ParameterError("band-pass cutoffs must satisfy 0 < low < high < fs/2");

    // "order" names the analog low-pass prototype order, as in the common
    // design-tool convention; the band-pass transform doubles the pole count.
    const int n = order;
    const double fs2 = 2.0 * fs_hz;
    const double wl = fs2 * std::tan(kPi * low_hz / fs_hz);
    const double wh = fs2 * std::tan(kPi * high_hz / fs_hz);
    const double w0 = std::sqrt(wl * wh);
    const double bw = wh - wl;

    // Butterworth prototype poles, low-pass to band-pass transform,
    // then the bilinear map into z.
    std::vector<cplx> zpoles;
    for (int k = 0; k < n; ++k) {
        const double ang = kPi * (2.0 * k + n + 1.0) / (2.0 * n);
        const cplx p = std::polar(1.0, ang);
        const cplx bp = bw * p;
        const cplx disc = std::sqrt(bp * bp - 4.0 * w0 * w0);
        for (const cplx s : {(bp + disc) / 2.0, (bp - disc) / 2.0})
            zpoles.push_back((fs2 + s) / (fs2 - s));
    }

    BiquadCascade cas;
    for (const auto& [a1, a2] : pair_poles(std::move(zpoles))) {
        // n zeros at z=1 (from s=0) and n at z=-1 (from s=inf):
        // one of each per section gives numerator z^2 - 1.
        Biquad s;
        s.b0 = 1.0;
        s.b1 = 0.0;
        s.b2 = -1.0;
        s.a1 = a1;
        s.a2 = a2;
        cas.sections.push_back(s);
    }

    // Unit gain at the (warped) center frequency.
    const double w0d = 2.0 * std::atan(w0 / fs2);
    const double f0d = w0d * fs_hz / (2.0 * kPi);
    const double g = cas.magnitude(f0d, fs_hz);
    if (g <= 0.0) throw NumericError("band-pass design produced zero center gain");
    cas.sections[0].b0 /= g;
    cas.sections[0].b1 /= g;
    cas.sections[0].b2 /= g;
    if (!cas.stable()) throw NumericError("band-pass design produced unstable poles");
    return cas;
}

BiquadCascade design_notch(double center_hz, double fs_hz, double q) {
    if (!(0.0 < center_hz && center_hz < fs_hz / 2.0))
        throw ParameterError("notch center must lie strictly below Nyquist");
    if (!(q > 0.0)) throw ParameterError("notch quality factor must be positive");

    const double w0 = 2.0 * kPi * center_hz / fs_hz;
    const double alpha = std::sin(w0) / (2.0 * q);
    const double c = std::cos(w0);
    const double a0 = 1.0 + alpha;
    Biquad s;
    s.b0 = 1.0 / a0;
    s.b1 = -2.0 * c / a0;
    s.b2 = 1.0 / a0;
    s.a1 = -2.0 * c / a0;
    s.a2 = (1.0 - alpha) / a0;
    BiquadCascade cas;
    cas.sections.push_back(s);
    return cas;
}

std::vector<double> apply_filter(const std::vector<double>& x, const BiquadCascade& f) {
    for (double v : x)
        if (!std::isfinite(v)) throw DataError("non-finite sample in filter input");

    std::vector<double> y = x;
    for (const auto& s : f.sections) {
        // Direct form II transposed, zero initial state.
        double s1 = 0.0, s2 = 0.0;
        for (double& v : y) {
            const double in = v;
            const double out = s.b0 * in + s1;
            s1 = s.b1 * in - s.a1 * out + s2;
            s2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}

// ---------------------------------------------------------------------------
// Framing and statistics

std::vector<std::vector<double>> frame_windows(const std::vector<double>& x, int fs_hz,
                                               int frame_rate_hz, int window_ms) {
    if (fs_hz <= 0 || frame_rate_hz <= 0 || fs_hz % frame_rate_hz != 0)
        throw ParameterError("sample rate must be a positive multiple of the frame rate");
    const std::size_t hop = static_cast<std::size_t>(fs_hz / frame_rate_hz);
    const std::size_t wlen = static_cast<std::size_t>(window_ms) * fs_hz / 1000;
    if (wlen == 0) throw ParameterError("window length must be positive");

    const std::size_t frames = (x.size() + hop - 1) / hop;
    std::vector<std::vector<double>> out(frames);
    for (std::size_t i = 0; i < frames; ++i) {
        out[i].assign(wlen, 0.0);
        const std::size_t start = i * hop;
        const std::size_t avail = std::min(wlen, x.size() - start);
        std::copy(x.begin() + start, x.begin() + start + avail, out[i].begin());
    }
    return out;
}

namespace {

// Cached one-sided DFT basis for windows of a given length: rows are
// cos/sin at bins 1..N/2 (DC excluded).
struct DftBasis {
    std::size_t bins = 0;
    std::vector<double> cosr, sinr;  // bins x N, row-major
};

const DftBasis& dft_basis(std::size_t n) {
    static std::mutex mu;
    static std::map<std::size_t, DftBasis> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    DftBasis b;
    b.bins = n / 2;
    b.cosr.resize(b.bins * n);
    b.sinr.resize(b.bins * n);
    for (std::size_t k = 1; k <= b.bins; ++k)
        for (std::size_t m = 0; m < n; ++m) {
            const double a = 2.0 * kPi * static_cast<double>(k * m) / static_cast<double>(n);
            b.cosr[(k - 1) * n + m] = std::cos(a);
            b.sinr[(k - 1) * n + m] = std::sin(a);
        }
    return cache.emplace(n, std::move(b)).first->second;
}

}  // namespace

StatFeatures stat_features(const std::vector<double>& w) {
    const std::size_t n = w.size();
    if (n < 2) throw ParameterError("statistics window must hold at least 2 samples");

    const auto& ops = kernels::active();
    StatFeatures out;

    double maxabs = 0.0;
    for (double v : w) maxabs = std::max(maxabs, std::abs(v));

    double sum = 0.0;
    for (double v : w) sum += v;
    const double mean = sum / double(n);
    double m2 = 0.0, m4 = 0.0, sumsq = 0.0;
    int sign_changes = 0;
    int prev_sign = 0;
    for (double v : w) {
        const double d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
        sumsq += v * v;
        const int s = v > 0.0 ? 1 : (v < 0.0 ? -1 : prev_sign);
        if (prev_sign != 0 && s != 0 && s != prev_sign) ++sign_changes;
        prev_sign = s;
    }
    m2 /= double(n);
    m4 /= double(n);

    out.values[0] = std::sqrt(sumsq / double(n));                    // rms
    out.values[1] = double(sign_changes) / double(n - 1);            // zcr
    out.values[2] = mean;                                            // mwa

    const bool zero_var = m2 <= 1e-20 * maxabs * maxabs || maxabs == 0.0;
    if (zero_var) {
        out.values[3] = 0.0;
        out.degenerate = true;
    } else {
        out.values[3] = m4 / (m2 * m2);  // Pearson kurtosis
    }

    // Power spectral entropy of the DC-excluded one-sided periodogram. A
    // zero-variance window has no spectrum beyond numerical dust; pse = 0.
    if (zero_var) {
        out.values[4] = 0.0;
        return out;
    }
    const auto& basis = dft_basis(n);
    double total = 0.0;
    std::vector<double> power(basis.bins);
    for (std::size_t k = 0; k < basis.bins; ++k) {
        const double re = ops.dot(basis.cosr.data() + k * n, w.data(), n);
        const double im = ops.dot(basis.sinr.data() + k * n, w.data(), n);
        power[k] = re * re + im * im;
        total += power[k];
    }
    if (total <= 1e-280) {
        out.values[4] = 0.0;
        out.degenerate = true;
    } else {
        double h = 0.0;
        for (double p : power) {
            const double q = p / total;
            if (q > 0.0) h -= q * std::log(q);
        }
        out.values[4] = h;
    }
    return out;
}

FeatureSequence extract_eeg_features(const EegRecording& rec, const BiquadCascade& bandpass,
                                     const BiquadCascade& notch) {
    rec.validate();
    const std::size_t channels = rec.channel_count();

    std::vector<std::vector<StatFeatures>> per_channel(channels);
    std::size_t frames = 0;
    for (std::size_t c = 0; c < channels; ++c) {
        auto filtered = apply_filter(apply_filter(rec.channels[c], bandpass), notch);
        auto windows = frame_windows(filtered, rec.sample_rate_hz, 100, 100);
        frames = windows.size();
        per_channel[c].reserve(windows.size());
        for (const auto& win : windows) per_channel[c].push_back(stat_features(win));
    }

    FeatureSequence seq;
    seq.kind = FeatureKind::eeg_stat;
    seq.frame_rate_hz = 100.0;
    seq.frames = Tensor({frames, channels * 5});
    for (std::size_t t = 0; t < frames; ++t)
        for (std::size_t c = 0; c < channels; ++c)
            for (std::size_t k = 0; k < 5; ++k)
                seq.frames.at2(t, c * 5 + k) = per_channel[c][t].values[k];
    return seq;
}

// ---------------------------------------------------------------------------
// MFCC

namespace {

// In-place iterative radix-2 FFT (decimation in time).
void fft_radix2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / double(len);
        const std::complex<double> wl = std::polar(1.0, ang);
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w = 1.0;
            for (std::size_t k = 0; k < len / 2; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

}  // namespace

Tensor mel_filterbank(int fft_size, int mel_filters, double fs_hz) {
    const int bins = fft_size / 2 + 1;
    const double mel_hi = hz_to_mel(fs_hz / 2.0);
    std::vector<double> edges(mel_filters + 2);
    for (int i = 0; i < mel_filters + 2; ++i)
        edges[i] = mel_to_hz(mel_hi * double(i) / double(mel_filters + 1));

    Tensor fb({static_cast<std::size_t>(mel_filters), static_cast<std::size_t>(bins)});
    for (int m = 0; m < mel_filters; ++m) {
        const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
        for (int k = 0; k < bins; ++k) {
            const double fk = double(k) * fs_hz / double(fft_size);
            double wgt = 0.0;
            if (fk > lo && fk < mid)
                wgt = (fk - lo) / (mid - lo);
            else if (fk >= mid && fk < hi)
                wgt = (hi - fk) / (hi - mid);
            fb.at2(m, k) = wgt;
        }
    }
    return fb;
}

Tensor log_mel_energies(const AudioRecording& audio, const MfccConfig& cfg) {
    if (audio.sample_rate_hz != 16000)
        throw ParameterError("MFCC extraction expects 16 kHz audio");

    const auto& x = audio.samples;
    std::vector<double> emph(x.size());
    if (!x.empty()) {
        emph[0] = x[0];
        for (std::size_t i = 1; i < x.size(); ++i)
            emph[i] = x[i] - cfg.pre_emphasis * x[i - 1];
    }

    const std::size_t wlen = cfg.window_samples, hop = cfg.hop_samples;
    const std::size_t frames = emph.size() >= wlen ? (emph.size() - wlen) / hop + 1 : 0;

    std::vector<double> hamming(wlen);
    for (std::size_t i = 0; i < wlen; ++i)
        hamming[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * double(i) / double(wlen - 1));

    const Tensor fb = mel_filterbank(cfg.fft_size, cfg.mel_filters, audio.sample_rate_hz);
    const int bins = cfg.fft_size / 2 + 1;

    Tensor out({frames, static_cast<std::size_t>(cfg.mel_filters)});
    std::vector<std::complex<double>> buf(cfg.fft_size);
    std::vector<double> power(bins);
    for (std::size_t t = 0; t < frames; ++t) {
        std::fill(buf.begin(), buf.end(), std::complex<double>(0.0));
        for (std::size_t i = 0; i < wlen; ++i)
            buf[i] = emph[t * hop + i] * hamming[i];
        fft_radix2(buf);
        for (int k = 0; k < bins; ++k) power[k] = std::norm(buf[k]);
        for (int m = 0; m < cfg.mel_filters; ++m) {
            const double e = kernels::active().dot(&fb.data[m * bins], power.data(), bins);
            out.at2(t, m) = std::log(std::max(e, cfg.log_floor));
        }
    }
    return out;
}

FeatureSequence extract_mfcc(const AudioRecording& audio, const MfccConfig& cfg) {
    const Tensor logmel = log_mel_energies(audio, cfg);
    const std::size_t frames = logmel.shape[0];
    const int nm = cfg.mel_filters;
    const int nc = cfg.coefficients;

    // Orthonormal DCT-II basis.
    std::vector<double> dct(nc * nm);
    for (int k = 0; k < nc; ++k) {
        const double a = k == 0 ? std::sqrt(1.0 / nm) : std::sqrt(2.0 / nm);
        for (int m = 0; m < nm; ++m)
            dct[k * nm + m] = a * std::cos(kPi * k * (2.0 * m + 1.0) / (2.0 * nm));
    }

    FeatureSequence seq;
    seq.kind = FeatureKind::mfcc;
    seq.frame_rate_hz = 100.0;
    seq.frames = Tensor({frames, static_cast<std::size_t>(nc)});
    for (std::size_t t = 0; t < frames; ++t)
        kernels::active().gemv(dct.data(), nc, nm, &logmel.data[t * nm],
                               &seq.frames.data[t * nc]);
    return seq;
}

}  // namespace mmsr
