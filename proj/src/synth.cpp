#include "mmsr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mmsr/alphabet.hpp"
#include "mmsr/container.hpp"
#include "mmsr/errors.hpp"
#include "mmsr/rng.hpp"
#include "mmsr/tensor.hpp"

namespace mmsr {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr int kCodes = 28;     // alphabet symbols excluding blank
constexpr int kChannels = 31;  // EEG signal channels
}  // namespace

const std::vector<std::string>& builtin_sentences() {
    static const std::vector<std::string> s = {
        "the sun is hot",     "a cat sat here",    "we like tea",
        "dogs can run",       "she sees the sea",  "birds fly high",
        "it is my book",      "he has a red hat",  "rain falls down",
        "fish swim fast",     "the moon is far",   "bees make honey",
        "i hear a song",      "cold wind blows",   "the cup is full",
        "ants are small",     "we walk to town",   "snow is white",
        "owls hunt mice",     "the fire is warm",  "kids play games",
        "stars shine bright", "the road is long",  "ships sail away",
        "time goes by",       "the dog barks",     "green grass grows",
        "bells ring loud",    "the box is empty",  "night comes soon",
    };
    return s;
}

namespace {

struct Codebook {
    // amplitude and phase per (character code, EEG channel)
    std::vector<double> amp, phase;
    double tone_hz[kCodes];
    int blob_x[kCodes], blob_y[kCodes];
};

Codebook make_codebook(Rng rng) {
    Codebook cb;
    cb.amp.resize(kCodes * kChannels);
    cb.phase.resize(kCodes * kChannels);
    for (double& a : cb.amp) a = rng.uniform(0.5, 2.0);
    for (double& p : cb.phase) p = rng.uniform(0.0, kTwoPi);
    for (int c = 0; c < kCodes; ++c) {
        cb.tone_hz[c] = 250.0 + 35.0 * c;          // well inside the mel range
        cb.blob_x[c] = 14 + (c % 7) * 12;          // 7 x 4 grid on the frame
        cb.blob_y[c] = 20 + (c / 7) * 15;
    }
    return cb;
}

struct SubjectTraits {
    double tone_detune = 0.0;
    double eeg_gain = 1.0;
    int jitter_x = 0, jitter_y = 0;
};

SubjectTraits make_subject(Rng rng) {
    SubjectTraits t;
    t.tone_detune = rng.normal() * 4.0;
    t.eeg_gain = rng.uniform(0.9, 1.1);
    t.jitter_x = int(rng.below(7)) - 3;
    t.jitter_y = int(rng.below(7)) - 3;
    return t;
}

}  // namespace

Manifest synth_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    const auto& sentences = builtin_sentences();
    if (cfg.n_sentences == 0 || cfg.n_sentences > sentences.size())
        throw ParameterError("n_sentences must lie in [1, " +
                             std::to_string(sentences.size()) + "]");
    if (cfg.n_subjects == 0) throw ParameterError("need at least one subject");

    std::filesystem::create_directories(out_dir / "raw");
    const Rng master(cfg.seed);
    const Codebook cb = make_codebook(master.fork(0xC0DEB001));

    Manifest manifest;
    for (std::size_t subject = 1; subject <= cfg.n_subjects; ++subject) {
        const SubjectTraits traits = make_subject(master.fork(0x50000000ULL + subject));
        for (std::size_t sent = 0; sent < cfg.n_sentences; ++sent) {
            for (std::size_t rep = 1; rep <= cfg.n_reps; ++rep) {
                Rng rng = master.fork(subject * 1000000 + sent * 1000 + rep);
                const std::string& text = sentences[sent];
                const std::vector<int> symbols = Alphabet::encode(text);
                const std::size_t len = symbols.size();

                const double duration = std::clamp(
                    cfg.seconds_per_char * double(len) + rng.uniform(-0.05, 0.05), 1.0, 3.0);
                const std::size_t n_audio = std::size_t(duration * 16000.0);
                const std::size_t n_eeg = std::size_t(duration * 1000.0);
                const std::size_t n_video = std::size_t(duration * 100.0);

                auto code_at = [&](std::size_t pos, std::size_t total) {
                    const std::size_t i = std::min(len - 1, pos * len / total);
                    return symbols[i] - 1;  // 0..27
                };

                // --- audio: per-character tone
                Tensor audio({n_audio});
                for (std::size_t n = 0; n < n_audio; ++n) {
                    const int c = code_at(n, n_audio);
                    const double f = cb.tone_hz[c] + traits.tone_detune;
                    audio.data[n] = 0.4 * std::sin(kTwoPi * f * double(n) / 16000.0) +
                                    cfg.audio_noise * rng.normal();
                }

                // --- EEG: channel-specific sinusoid mixture per character
                Tensor eeg({kChannels, n_eeg});
                for (std::size_t n = 0; n < n_eeg; ++n) {
                    const int c = code_at(n, n_eeg);
                    const double f = 5.0 + 1.3 * c;  // 5..40 Hz, inside the passband
                    const double t = double(n) / 1000.0;
                    for (int ch = 0; ch < kChannels; ++ch) {
                        const double a = cb.amp[c * kChannels + ch];
                        const double p = cb.phase[c * kChannels + ch];
                        eeg.data[std::size_t(ch) * n_eeg + n] =
                            10.0 * traits.eeg_gain * a * std::sin(kTwoPi * f * t + p) +
                            cfg.eeg_noise * rng.normal();
                    }
                }

                // --- video: noisy frames with a character-positioned blob
                std::vector<std::uint8_t> frames(n_video * 100 * 100);
                std::uint64_t lcg = rng.next_u64() | 1;
                const int nv = std::max(1, int(cfg.video_noise));
                for (std::size_t fidx = 0; fidx < n_video; ++fidx) {
                    const int c = code_at(fidx, n_video);
                    const double cx = cb.blob_x[c] + traits.jitter_x + rng.uniform(-2.0, 2.0);
                    const double cy = cb.blob_y[c] + traits.jitter_y + rng.uniform(-2.0, 2.0);
                    std::uint8_t* f = frames.data() + fidx * 100 * 100;
                    for (int y = 0; y < 100; ++y)
                        for (int x = 0; x < 100; ++x) {
                            lcg = lcg * 6364136223846793005ULL + 1442695040888963407ULL;
                            const int noise = int((lcg >> 33) % std::uint64_t(2 * nv + 1)) - nv;
                            double v = 30.0 + noise;
                            const double dx = x - cx, dy = y - cy;
                            if (std::abs(dx) < 22.0 && std::abs(dy) < 22.0)
                                v += 180.0 * std::exp(-(dx * dx + dy * dy) / (2.0 * 49.0));
                            f[y * 100 + x] =
                                std::uint8_t(std::clamp(v, 0.0, 255.0) + 0.5);
                        }
                }

                UtteranceMeta meta;
                meta.id = "s" + std::to_string(subject) + "_u" +
                          (sent < 10 ? "0" : "") + std::to_string(sent) + "_r" +
                          std::to_string(rep);
                meta.transcript = text;
                meta.subject = int(subject);
                meta.rep = int(rep);
                meta.split = subject <= cfg.train_subjects ? "train" : "test";
                meta.eeg = "raw/" + meta.id + ".eeg.mtns";
                meta.audio = "raw/" + meta.id + ".audio.mtns";
                meta.video = "raw/" + meta.id + ".video.mtns";
                write_f32(out_dir / meta.eeg, eeg);
                write_f32(out_dir / meta.audio, audio);
                write_u8(out_dir / meta.video, {n_video, 100, 100}, frames);
                manifest.utterances.push_back(std::move(meta));
            }
        }
    }
    save_manifest(manifest, out_dir / "manifest.json");
    return manifest;
}

void save_manifest(const Manifest& m, const std::filesystem::path& path) {
    nlohmann::json j;
    j["format"] = "dataset-manifest";
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& u : m.utterances) {
        nlohmann::json e = {{"id", u.id},           {"transcript", u.transcript},
                            {"subject", u.subject}, {"rep", u.rep},
                            {"split", u.split},     {"eeg", u.eeg},
                            {"audio", u.audio},     {"video", u.video}};
        if (!u.feat_eeg.empty()) e["feat_eeg"] = u.feat_eeg;
        if (!u.feat_mfcc.empty()) e["feat_mfcc"] = u.feat_mfcc;
        if (!u.feat_video.empty()) e["feat_video"] = u.feat_video;
        if (!u.feat_kpca.empty()) e["feat_kpca"] = u.feat_kpca;
        arr.push_back(std::move(e));
    }
    j["utterances"] = std::move(arr);
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    out << j.dump(2) << "\n";
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "dataset-manifest")
        throw DataError("not a dataset manifest: " + path.string());

    Manifest m;
    for (const auto& e : j["utterances"]) {
        UtteranceMeta u;
        u.id = e["id"];
        u.transcript = e["transcript"];
        u.subject = e["subject"];
        u.rep = e["rep"];
        u.split = e["split"];
        u.eeg = e["eeg"];
        u.audio = e["audio"];
        u.video = e["video"];
        u.feat_eeg = e.value("feat_eeg", "");
        u.feat_mfcc = e.value("feat_mfcc", "");
        u.feat_video = e.value("feat_video", "");
        u.feat_kpca = e.value("feat_kpca", "");
        m.utterances.push_back(std::move(u));
    }
    return m;
}

}  // namespace mmsr
