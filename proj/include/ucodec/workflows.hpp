#pragma once

// End-to-end operations behind the command-line tool: corpus loading,
// checkpointed training, encode/decode/eval and LM synthesis.

#include <filesystem>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "ucodec/bench.hpp"
#include "ucodec/bitstream.hpp"
#include "ucodec/codec_model.hpp"
#include "ucodec/hier_lm.hpp"
#include "ucodec/run_config.hpp"
#include "ucodec/trainer.hpp"

namespace ucodec {

namespace fs = std::filesystem;

// Every *.wav in `dir` (sorted by name). No files is a dataset error.
WaveCorpus load_wave_corpus(const fs::path& dir, int sample_rate);

// Byte-level text ids.
std::vector<int> text_to_ids(const std::string& text);

// Pairs name.ucb with name.txt. Streams must match the LM's N and C.
std::vector<SequenceLayout> load_lm_corpus(const fs::path& dir, const LmConfig& lm);

// Codec training -------------------------------------------------------------

void save_codec_checkpoint(const fs::path& dir, CodecTrainer& trainer, const RunConfig& cfg);
// Restores parameters, optimizer moments, step count and the repair stream.
void restore_codec_trainer(const fs::path& dir, CodecTrainer& trainer);

// Trains up to cfg.train.steps, writing a checkpoint every checkpoint_every
// steps and at the end, and one JSON line per step to `metrics`. With
// `resume` the run continues from the checkpoint already in `out`.
StepReport train_codec(const RunConfig& cfg, const WaveCorpus& corpus, const fs::path& out, std::ostream* metrics,
                       bool resume = false);

// Codec inference ------------------------------------------------------------

struct LoadedCodec {
    RunConfig config;
    std::unique_ptr<CodecModel> model;
};

// Run configuration stored in a codec checkpoint; reads only the manifest.
RunConfig read_codec_config(const fs::path& dir);

// Config comes from the checkpoint; `expected` (when given) must agree on
// the [codec] section or a compatibility error is raised before any model
// memory is allocated.
LoadedCodec load_codec(const fs::path& dir, const RunConfig* expected = nullptr);

StreamHeader stream_header(const CodecConfig& codec, const TokenGrid& grid, std::size_t original_length);

// Pads to a whole number of frames and quantizes.
Unpacked encode_samples(const CodecModel& model, const std::vector<double>& samples);

// Compatibility error unless N, C, sample rate and frame rate agree.
void check_stream_matches(const CodecConfig& codec, const StreamHeader& header);

// Stream parameters must match the codec. Output is trimmed to the stored
// original length.
std::vector<double> decode_stream(const CodecModel& model, const Unpacked& stream);

struct EvalReport {
    double si_snr = 0.0;
    double mel_l1 = 0.0;
    double kbps = 0.0;
    int frames = 0;
    double seconds = 0.0;

    std::string to_json() const;
};

EvalReport evaluate_codec(const CodecModel& model, const std::vector<double>& samples);

// Token LM -------------------------------------------------------------------

void save_lm_checkpoint(const fs::path& dir, const HierLm& lm, LmTrainer* trainer, const RunConfig& cfg);

struct LoadedLm {
    RunConfig config;
    std::unique_ptr<HierLm> model;
};

// The LM must agree with the codec on N and C.
LoadedLm load_lm(const fs::path& dir, const CodecConfig* codec = nullptr);

LmStepReport train_lm(const RunConfig& cfg, const std::vector<SequenceLayout>& corpus, const fs::path& out,
                      std::ostream* metrics, bool resume = false);

struct Synthesis {
    TokenGrid grid;
    std::vector<double> wave;
    LmCounters counters;
};

Synthesis synthesize_speech(const HierLm& lm, const CodecModel& codec, const std::string& text, const TokenGrid* prompt,
                            int max_frames, const SamplerConfig& sampler, std::uint64_t seed);

// Benchmarks -----------------------------------------------------------------

// Published per-frame figures followed by analytic rows for the configured
// desk-scale LM at each preset's frame rate and depth.
std::vector<MacBreakdown> mac_report(const RunConfig& cfg);

struct RtfRow {
    MacBreakdown row;
    RtfReport timing;
    LmCounters counters;
};

// Times desk-scale token generation for `seconds` of audio at 5 Hz with 8
// and 32 layers and at 12.5 Hz with 8 layers, identical transformer dims.
std::vector<RtfRow> rtf_report(const RunConfig& cfg, double seconds, int runs, std::uint64_t seed);

}  // namespace ucodec
