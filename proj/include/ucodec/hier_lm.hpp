#pragma once

// Global/local token LM over TokenGrids. The global Transformer sees one
// position per frame (the sum of that frame's code embeddings); the local
// Transformer predicts the N codes of the next frame from the global hidden
// state, one layer at a time.

#include <cstdint>
#include <string>
#include <span>
#include <vector>

#include "ucodec/nn.hpp"
#include "ucodec/optim.hpp"
#include "ucodec/rng.hpp"
#include "ucodec/token_grid.hpp"

namespace ucodec {

struct LmConfig {
    int n_quantizers = 8;
    int codebook_size = 1024;
    int text_vocab = 256;  // byte-level text ids
    TransformerConfig global{2, 128, 4, 512, true};
    TransformerConfig local{2, 128, 4, 512, true};
    int max_positions = 15000;

    void validate() const;
    // Layer-1 vocabulary carries one extra id that marks end of speech.
    int eos_id() const { return codebook_size; }
    // Vocabulary of RVQ layer k, 0-based.
    int vocab(int k) const { return k == 0 ? codebook_size + 1 : codebook_size; }

    static LmConfig desk(int n_quantizers, int codebook_size);
};

// Text prefix plus speech frames. The global sequence is
// [text..., BOS, frame_1, ..., frame_T]: |text| + T + 1 positions.
struct SequenceLayout {
    std::vector<int> text;
    TokenGrid grid;
    bool with_eos = true;

    int global_length() const { return static_cast<int>(text.size()) + grid.frames + 1; }
};

struct SamplerConfig {
    int k_top = 5;
    double temperature = 1.0;
    // When false the EOS id is never drawn (fixed-length generation).
    bool allow_eos = true;
};

// Top-k multinomial draw from one logit vector. k_top = 1 is greedy and
// ignores the temperature; ties resolve to the lowest id.
int sample_top_k(std::span<const double> logits, const SamplerConfig& cfg, Rng& rng);

// Probabilities sample_top_k draws from.
std::vector<double> top_k_distribution(std::span<const double> logits, const SamplerConfig& cfg);

// Instrumentation for generation cost.
struct LmCounters {
    std::int64_t text_positions = 0;
    std::int64_t bos_positions = 0;
    std::int64_t frame_positions = 0;  // global positions holding a speech frame
    std::int64_t local_positions = 0;

    std::int64_t global_positions() const { return text_positions + bos_positions + frame_positions; }
};

class HierLm {
public:
    HierLm(const LmConfig& cfg, Rng& rng);

    // Σ_k E_k[codes_k] as a [1, d_global] row.
    Tensor embed_patch(std::span<const int> codes) const;

    // Hidden states for every global position, [|text| + T + 1, d_global].
    Tensor global_forward(const std::vector<int>& text, const TokenGrid& grid) const;

    // Logits for RVQ layer k = prefix.size() (0-based) given the frame's
    // conditioning state h ([1, d_global] or d_global values) and the codes
    // already chosen in this frame.
    Tensor local_logits(const Tensor& h, std::span<const int> prefix) const;

    // Mean teacher-forced cross entropy over every speech token, plus the
    // layer-1 EOS token when with_eos is set. Text positions carry no loss.
    Tensor sequence_nll(const SequenceLayout& layout) const;

    // Samples the N codes of one frame. Stops early with {eos} when layer 1
    // draws the EOS id.
    std::vector<int> sample_patch(std::span<const double> h, const SamplerConfig& cfg, Rng& rng,
                                  LmCounters* counters = nullptr) const;

    // Autoregressive generation. `prompt` frames are fed as fixed context and
    // are not part of the result. Stops at EOS or after max_frames.
    TokenGrid synthesize(const std::vector<int>& text, const TokenGrid* prompt, int max_frames,
                         const SamplerConfig& cfg, Rng& rng, LmCounters* counters = nullptr) const;

    void collect(ParameterList& out) const;
    const LmConfig& config() const { return cfg_; }

private:
    Tensor global_inputs(const std::vector<int>& text, const TokenGrid& grid) const;
    std::vector<double> embed_patch_values(std::span<const int> codes) const;
    std::vector<double> local_input_values(int layer, int code) const;
    std::vector<double> head_logits(int layer, std::span<const double> hidden) const;
    void check_text(const std::vector<int>& text) const;
    void check_grid(const TokenGrid& grid) const;

    LmConfig cfg_;
    Tensor text_table_;                 // [text_vocab, dg]
    Tensor bos_;                        // [1, dg]
    std::vector<Tensor> patch_tables_;  // E_k: [vocab(k), dg]
    Transformer global_;
    Linear condition_;                  // dg -> dl
    std::vector<Tensor> local_tables_;  // layers 0..N-2: [vocab(k), dl]
    Transformer local_;
    std::vector<Linear> heads_;         // dl -> vocab(k)
};

struct LmTrainConfig {
    int steps = 500;
    double lr = 1e-3;
    int warmup_steps = 20;
    double max_grad_norm = 1.0;
    std::uint64_t seed = 0;

    void validate() const;
};

struct LmStepReport {
    int step = 0;
    double nll = 0.0;
    double lr = 0.0;

    std::string to_json() const;
};

// Teacher-forced training over a fixed set of layouts, one layout per step
// in seeded shuffled order, in 32-bit arithmetic.
class LmTrainer {
public:
    LmTrainer(HierLm& model, std::vector<SequenceLayout> corpus, const LmTrainConfig& cfg);

    LmStepReport step();
    int steps_done() const { return steps_done_; }
    void set_steps_done(int s);
    Adam& optimizer() { return adam_; }

private:
    HierLm& model_;
    std::vector<SequenceLayout> corpus_;
    LmTrainConfig cfg_;
    ParameterList params_;
    Adam adam_;
    int steps_done_ = 0;
};

}  // namespace ucodec
