#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "mmsr/alphabet.hpp"
#include "mmsr/container.hpp"
#include "mmsr/errors.hpp"
#include "mmsr/pipeline.hpp"
#include "mmsr/synth.hpp"

using namespace mmsr;
namespace fs = std::filesystem;

namespace {

std::vector<char> slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("corpus scale and split structure") {
    const auto& sentences = builtin_sentences();
    REQUIRE(sentences.size() == 30);
    for (const auto& s : sentences) CHECK_NOTHROW(Alphabet::encode(s));

    TempDir dir("synth_scale");
    SynthConfig cfg;
    cfg.n_sentences = 4;
    cfg.n_reps = 2;
    cfg.n_subjects = 3;
    cfg.train_subjects = 2;
    const Manifest m = synth_dataset(cfg, dir.path);
    CHECK(m.utterances.size() == 4 * 2 * 3);

    std::set<int> train_subjects, test_subjects;
    for (const auto& u : m.utterances) {
        (u.split == "train" ? train_subjects : test_subjects).insert(u.subject);
        CHECK(fs::exists(dir.path / u.eeg));
        CHECK(fs::exists(dir.path / u.audio));
        CHECK(fs::exists(dir.path / u.video));
    }
    // split never mixes subjects
    for (int s : train_subjects) CHECK(test_subjects.count(s) == 0);
    CHECK(train_subjects.size() == 2);
    CHECK(test_subjects.size() == 1);

    // raw tensor shapes
    const TensorFile eeg = read_tensor_file(dir.path / m.utterances[0].eeg);
    CHECK(eeg.shape[0] == 31);
    const TensorFile video = read_tensor_file(dir.path / m.utterances[0].video);
    CHECK(video.shape[1] == 100);
    CHECK(video.shape[2] == 100);
    CHECK(video.dtype == Dtype::u8);

    // manifest round-trip
    const Manifest back = load_manifest(dir.path / "manifest.json");
    REQUIRE(back.utterances.size() == m.utterances.size());
    CHECK(back.utterances[5].id == m.utterances[5].id);
    CHECK(back.utterances[5].transcript == m.utterances[5].transcript);
}

TEST_CASE("same seed produces byte-identical corpora") {
    TempDir a("synth_det_a"), b("synth_det_b");
    SynthConfig cfg;
    cfg.n_sentences = 2;
    cfg.n_reps = 1;
    cfg.n_subjects = 2;
    synth_dataset(cfg, a.path);
    synth_dataset(cfg, b.path);
    const Manifest m = load_manifest(a.path / "manifest.json");
    for (const auto& u : m.utterances) {
        CHECK(slurp(a.path / u.eeg) == slurp(b.path / u.eeg));
        CHECK(slurp(a.path / u.audio) == slurp(b.path / u.audio));
        CHECK(slurp(a.path / u.video) == slurp(b.path / u.video));
    }
    CHECK(slurp(a.path / "manifest.json") == slurp(b.path / "manifest.json"));
}

TEST_CASE("extraction, training and evaluation smoke") {
    TempDir dir("pipe_smoke");
    SynthConfig sc;
    sc.n_sentences = 3;
    sc.n_reps = 2;
    sc.n_subjects = 2;
    sc.train_subjects = 1;
    synth_dataset(sc, dir.path);
    const fs::path manifest = dir.path / "manifest.json";

    ExperimentConfig cfg;
    cfg.condition = Condition::video_eeg_mfcc;
    cfg.epochs = 2;
    cfg.batch_size = 4;
    cfg.video_size = 8;
    cfg.kpca_components = 10;
    cfg.kpca_max_points = 120;
    cfg.beam_width = 4;

    // training before extraction names the first missing artifact
    CHECK_THROWS_WITH_AS(run_training(cfg, manifest, dir.path / "run0"),
                         doctest::Contains("run kpca-apply first"), DataError);

    extract_eeg_all(manifest);
    extract_mfcc_all(manifest);
    extract_video_all(manifest, 8);
    {
        const Manifest m = load_manifest(manifest);
        const TensorFile eeg = read_tensor_file(dir.path / m.utterances[0].feat_eeg);
        CHECK(eeg.shape[1] == 155);
        const TensorFile mfcc = read_tensor_file(dir.path / m.utterances[0].feat_mfcc);
        CHECK(mfcc.shape[1] == 13);
        const TensorFile video = read_tensor_file(dir.path / m.utterances[0].feat_video);
        CHECK(video.shape[1] == 8);
    }

    kpca_fit_cmd(manifest, dir.path / "kpca.json", cfg);
    kpca_apply_cmd(manifest, dir.path / "kpca.json");
    {
        const Manifest m = load_manifest(manifest);
        const TensorFile red = read_tensor_file(dir.path / m.utterances[0].feat_kpca);
        CHECK(red.shape[1] == 10);
    }

    const TrainResult r = run_training(cfg, manifest, dir.path / "run");
    CHECK(r.train_loss.size() == 2);
    CHECK(fs::exists(r.checkpoint_dir / "model.json"));
    CHECK(fs::exists(dir.path / "run" / "lm.json"));
    // header + one row per epoch
    CHECK(line_count(dir.path / "run" / "loss.csv") == 3);

    const EvalReport report =
        run_eval(cfg, manifest, dir.path / "run", "test", dir.path / "report.json");
    CHECK(report.utterance_count == 6);
    CHECK(report.mean_wer >= 0.0);
    CHECK(fs::exists(dir.path / "report.json"));

    const Manifest m = load_manifest(manifest);
    const std::string hyp = decode_utterance(cfg, manifest, dir.path / "run", m.utterances[0].id);
    CHECK_NOTHROW(Alphabet::encode(hyp));
    CHECK_THROWS_AS(decode_utterance(cfg, manifest, dir.path / "run", "nope"), DataError);

    // a checkpoint trained for one condition refuses another's feature widths
    ExperimentConfig other = cfg;
    other.condition = Condition::video_eeg;
    CHECK_THROWS_AS(run_eval(other, manifest, dir.path / "run", "test", dir.path / "r2.json"),
                    ConfigError);
}

TEST_CASE("experiment config parsing") {
    TempDir dir("cfg_parse");
    const fs::path p = dir.path / "cfg.json";
    {
        std::ofstream out(p);
        out << R"({"condition": "video+eeg", "epochs": 7, "time_stride": 3,
                   "lm_alpha": 0.25, "beam_width": 5})";
    }
    const ExperimentConfig cfg = ExperimentConfig::from_json_file(p);
    CHECK(cfg.condition == Condition::video_eeg);
    CHECK(cfg.epochs == 7);
    CHECK(cfg.time_stride == 3);
    CHECK(cfg.lm_alpha == 0.25);
    CHECK(cfg.beam_width == 5);

    {
        std::ofstream out(p);
        out << R"({"condition": "audio-only"})";
    }
    CHECK_THROWS_AS(ExperimentConfig::from_json_file(p), ConfigError);
    {
        std::ofstream out(p);
        out << R"({"time_stride": 0})";
    }
    CHECK_THROWS_AS(ExperimentConfig::from_json_file(p), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_file(dir.path / "missing.json"), ConfigError);
}
