#include <gtest/gtest.h>

#include <fstream>
#include <functional>
#include <sstream>

#include "support/scratch_dir.hpp"
#include "ucodec/checkpoint.hpp"
#include "ucodec/error.hpp"
#include "ucodec/wav.hpp"
#include "ucodec/workflows.hpp"

using namespace ucodec;
using ucodec::testing::ScratchDir;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::Usage;
}

RunConfig small_run(long long steps) {
    RunConfig c;
    c.train.steps = steps;
    c.train.checkpoint_every = 2;
    c.train.excerpt = 640;
    c.lm.global = {1, 16, 2, 32, true};
    c.lm.local = {1, 16, 2, 32, true};
    c.lm_train.steps = 3;
    c.max_frames = 6;
    return c;
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    for (std::string l; std::getline(in, l);) {
        out.push_back(l);
    }
    return out;
}

std::vector<double> tone(std::size_t n) {
    auto clip = five_sine_corpus(16000).clips()[0];
    clip.resize(n);
    return clip;
}

}  // namespace

TEST(Corpus, CropsAreWholeFramesOnTheHopGrid) {
    std::vector<double> clip(48000);
    for (std::size_t i = 0; i < clip.size(); ++i) {
        clip[i] = static_cast<double>(i);
    }
    const WaveCorpus corpus({clip});
    for (long long step = 0; step < 1000; ++step) {
        const Tensor b = corpus.sample(1, 16000, 3200, 9, step);
        ASSERT_EQ(b.dim(1), 16000);
        EXPECT_EQ(b.dim(1) / 3200, 5);
        const auto start = static_cast<long long>(b.data()[0]);
        EXPECT_EQ(start % 3200, 0) << step;
        EXPECT_EQ(static_cast<long long>(b.data()[15999]), start + 15999);
    }
}

TEST(Corpus, WaveDirectoryLoading) {
    ScratchDir dir;
    EXPECT_EQ(kind_of([&] { load_wave_corpus(dir.path(), 16000); }), ErrorKind::Dataset);
    write_wav(dir / "b.wav", std::vector<double>(100, 0.25));
    write_wav(dir / "a.wav", std::vector<double>(50, -0.5));
    const WaveCorpus c = load_wave_corpus(dir.path(), 16000);
    ASSERT_EQ(c.clips().size(), 2u);
    EXPECT_EQ(c.clips()[0].size(), 50u);
    EXPECT_EQ(kind_of([] { load_wave_corpus("/nonexistent", 16000); }), ErrorKind::Dataset);
}

TEST(CodecWorkflow, ResumeReproducesTheUninterruptedRun) {
    ScratchDir dir;
    const WaveCorpus corpus = five_sine_corpus(16000);
    std::ostringstream full;
    train_codec(small_run(4), corpus, dir / "full", &full);

    std::ostringstream first;
    train_codec(small_run(2), corpus, dir / "split", &first);
    std::ostringstream second;
    train_codec(small_run(4), corpus, dir / "split", &second, true);

    const auto a = lines(full.str());
    const auto b = lines(first.str());
    const auto c = lines(second.str());
    ASSERT_EQ(a.size(), 4u);
    ASSERT_EQ(b.size(), 2u);
    ASSERT_EQ(c.size(), 2u);
    EXPECT_EQ(a[0], b[0]);
    EXPECT_EQ(a[1], b[1]);
    EXPECT_EQ(a[2], c[0]);
    EXPECT_EQ(a[3], c[1]);
    EXPECT_EQ(read_checkpoint_info(dir / "split").step, 4);
}

TEST(CodecWorkflow, ResumeRejectsDifferentCodec) {
    ScratchDir dir;
    const WaveCorpus corpus = five_sine_corpus(16000);
    train_codec(small_run(1), corpus, dir.path(), nullptr);
    RunConfig other = small_run(2);
    other.codec.codebook_size = 32;
    other.lm.codebook_size = 32;
    EXPECT_EQ(kind_of([&] { train_codec(other, corpus, dir.path(), nullptr, true); }), ErrorKind::Compatibility);
    EXPECT_EQ(kind_of([&] { load_codec(dir.path(), &other); }), ErrorKind::Compatibility);
}

class TrainedCodec : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new ScratchDirHolder;
        train_codec(small_run(2), five_sine_corpus(16000), dir_->path, nullptr);
    }
    static void TearDownTestSuite() { delete dir_; }

    struct ScratchDirHolder {
        fs::path path = fs::temp_directory_path() / ("ucodec-trained-" + std::to_string(::getpid()));
        ~ScratchDirHolder() { fs::remove_all(path); }
    };
    static ScratchDirHolder* dir_;
};

TrainedCodec::ScratchDirHolder* TrainedCodec::dir_ = nullptr;

TEST_F(TrainedCodec, EncodeDecodeShapes) {
    const LoadedCodec codec = load_codec(dir_->path);
    const std::vector<double> x(1000, 0.1);
    const Unpacked enc = encode_samples(*codec.model, x);
    EXPECT_EQ(enc.grid.frames, 4);  // ceil(1000 / 320)
    EXPECT_EQ(enc.header.original_length, 1000u);
    EXPECT_EQ(enc.header.frame_rate_num, 50);
    EXPECT_EQ(enc.header.frame_rate_den, 1);
    const Unpacked back = unpack(pack(enc.grid, enc.header));
    EXPECT_EQ(back.grid, enc.grid);
    EXPECT_EQ(decode_stream(*codec.model, back).size(), 1000u);
}

TEST_F(TrainedCodec, EncodingIsDeterministic) {
    const LoadedCodec a = load_codec(dir_->path);
    const LoadedCodec b = load_codec(dir_->path);
    const auto x = tone(3200);
    EXPECT_EQ(encode_samples(*a.model, x).grid, encode_samples(*b.model, x).grid);
}

TEST_F(TrainedCodec, EvalBitrateMatchesTheFormula) {
    const LoadedCodec codec = load_codec(dir_->path);
    const auto x = tone(16000);
    const EvalReport r = evaluate_codec(*codec.model, x);
    const CodecConfig& c = codec.model->config();
    EXPECT_EQ(r.frames, 50);
    EXPECT_DOUBLE_EQ(r.seconds, 1.0);
    EXPECT_NEAR(r.kbps, bitrate_bps(50.0, c.n_quantizers, c.codebook_size) / 1000.0, 1e-12);
    EXPECT_NE(r.to_json().find("\"kbps\""), std::string::npos);
}

TEST_F(TrainedCodec, MismatchedStreamIsRejected) {
    const LoadedCodec codec = load_codec(dir_->path);
    Unpacked enc = encode_samples(*codec.model, std::vector<double>(640, 0.0));
    Unpacked wrong_c = enc;
    wrong_c.header.codebook_size = 128;
    EXPECT_EQ(kind_of([&] { decode_stream(*codec.model, wrong_c); }), ErrorKind::Compatibility);
    Unpacked wrong_rate = enc;
    wrong_rate.header.frame_rate_num = 25;
    EXPECT_EQ(kind_of([&] { decode_stream(*codec.model, wrong_rate); }), ErrorKind::Compatibility);
}

TEST_F(TrainedCodec, TruncatedStreamFileIsCorrupt) {
    ScratchDir dir;
    const LoadedCodec codec = load_codec(dir_->path);
    const Unpacked enc = encode_samples(*codec.model, std::vector<double>(3200, 0.05));
    write_stream(dir / "x.ucb", enc.grid, enc.header);
    fs::resize_file(dir / "x.ucb", fs::file_size(dir / "x.ucb") - 3);
    EXPECT_EQ(kind_of([&] { read_stream(dir / "x.ucb"); }), ErrorKind::CorruptStream);
}

TEST_F(TrainedCodec, LmTrainSynthesizeRoundTrip) {
    ScratchDir dir;
    const LoadedCodec codec = load_codec(dir_->path);
    const RunConfig cfg = small_run(2);
    const auto corpus_dir = dir / "corpus";
    fs::create_directories(corpus_dir);
    EXPECT_EQ(kind_of([&] { load_lm_corpus(corpus_dir, cfg.lm); }), ErrorKind::Dataset);
    const Unpacked enc = encode_samples(*codec.model, tone(1600));
    write_stream(corpus_dir / "u1.ucb", enc.grid, enc.header);
    EXPECT_EQ(kind_of([&] { load_lm_corpus(corpus_dir, cfg.lm); }), ErrorKind::Dataset);
    std::ofstream(corpus_dir / "u1.txt") << "hi\n";
    const auto layouts = load_lm_corpus(corpus_dir, cfg.lm);
    ASSERT_EQ(layouts.size(), 1u);
    EXPECT_EQ(layouts[0].text, (std::vector<int>{'h', 'i'}));
    EXPECT_EQ(layouts[0].grid, enc.grid);

    LmConfig wrong = cfg.lm;
    wrong.n_quantizers = 2;
    EXPECT_EQ(kind_of([&] { load_lm_corpus(corpus_dir, wrong); }), ErrorKind::Compatibility);

    std::ostringstream metrics;
    train_lm(cfg, layouts, dir / "lm", &metrics);
    EXPECT_EQ(lines(metrics.str()).size(), 3u);
    const LoadedLm lm = load_lm(dir / "lm", &codec.model->config());
    const Synthesis a = synthesize_speech(*lm.model, *codec.model, "hi", nullptr, 6, cfg.sampler, 11);
    const Synthesis b = synthesize_speech(*lm.model, *codec.model, "hi", nullptr, 6, cfg.sampler, 11);
    EXPECT_EQ(a.grid, b.grid);
    EXPECT_EQ(a.wave, b.wave);
    EXPECT_LE(a.grid.frames, 6);
    EXPECT_EQ(a.wave.size(), static_cast<std::size_t>(a.grid.frames) * 320);

    CodecConfig other = codec.model->config();
    other.codebook_size = 128;
    EXPECT_EQ(kind_of([&] { load_lm(dir / "lm", &other); }), ErrorKind::Compatibility);
    EXPECT_EQ(kind_of([&] { load_codec(dir / "lm"); }), ErrorKind::Compatibility);
}

TEST(BenchWorkflow, MacReportListsPublishedThenAnalyticRows) {
    const RunConfig cfg;
    const auto rows = mac_report(cfg);
    const auto published = published_mac_table();
    ASSERT_GT(rows.size(), published.size());
    for (std::size_t i = 0; i < published.size(); ++i) {
        EXPECT_EQ(rows[i].model, published[i].row.model);
    }
    EXPECT_EQ(rows[published.size()].model.rfind("desk:", 0), 0u);
}

TEST(BenchWorkflow, RtfCountsPositions) {
    RunConfig cfg = small_run(1);
    const auto rows = rtf_report(cfg, 2.0, 3, 1);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].counters.frame_positions, 10);
    EXPECT_EQ(rows[1].counters.frame_positions, 25);
    EXPECT_EQ(rows[2].counters.frame_positions, 10);
    EXPECT_EQ(rows[0].counters.local_positions, 80);
    EXPECT_EQ(rows[2].counters.local_positions, 320);
    for (const auto& r : rows) {
        EXPECT_GT(r.timing.rtf, 0.0);
    }
}
