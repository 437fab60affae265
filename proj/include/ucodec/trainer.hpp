#pragma once

// Codec training: one discriminator update then one generator update per
// batch, linear learning-rate warmup, 32-bit arithmetic.

#include <cstdint>
#include <string>
#include <vector>

#include "ucodec/codec_model.hpp"
#include "ucodec/objectives.hpp"
#include "ucodec/optim.hpp"

namespace ucodec {

struct TrainConfig {
    long long steps = 2000;
    double lr = 1e-4;
    int warmup = 1000;
    int batch = 1;
    int excerpt = 3200;
    LossWeights weights;
    double max_grad_norm = 0.0;
    std::uint64_t seed = 0;
    int checkpoint_every = 500;

    void validate(const CodecConfig& codec) const;
    // GAN terms off, higher learning rate, short warmup and three-frame
    // excerpts; tuned for the miniature codec on one CPU core.
    static TrainConfig desk();
};

struct StepReport {
    long long step = 0;
    double d_loss = 0.0;
    double mel = 0.0;
    double adv = 0.0;
    double fm = 0.0;
    double cb = 0.0;
    double commit = 0.0;
    double lr = 0.0;

    // One-line JSON object with exactly these keys.
    std::string to_json() const;
};

// Waveform clips sampled as fixed-length excerpts.
class WaveCorpus {
public:
    WaveCorpus() = default;
    explicit WaveCorpus(std::vector<std::vector<double>> clips);

    // `batch` excerpts starting at multiples of `align`; the draw depends
    // only on (seed, step). Clips shorter than the excerpt are zero padded.
    Tensor sample(int batch, int excerpt, int align, std::uint64_t seed, long long step) const;
    const std::vector<std::vector<double>>& clips() const { return clips_; }

private:
    std::vector<std::vector<double>> clips_;
};

// One second of five summed sines at multiples of 50 Hz, so excerpts that
// start on a 20 ms grid all share the same phase.
WaveCorpus five_sine_corpus(int sample_rate);

class CodecTrainer {
public:
    CodecTrainer(const CodecConfig& codec, const DiscriminatorConfig& disc, const TrainConfig& train);

    // Discriminator update (skipped when both GAN weights are 0), generator
    // update, codebook repair.
    StepReport step(const Tensor& batch);
    // The two halves of step(); each touches only its own parameters.
    void discriminator_step(const Tensor& batch, StepReport& report);
    void generator_step(const Tensor& batch, StepReport& report);

    long long steps_done() const { return step_; }
    void set_steps_done(long long s) { step_ = s; }
    bool adversarial() const;

    CodecModel& model() { return model_; }
    const CodecModel& model() const { return model_; }
    Discriminators& discriminators() { return disc_; }
    Adam& generator_optimizer() { return gen_opt_; }
    Adam& discriminator_optimizer() { return disc_opt_; }
    const TrainConfig& config() const { return train_; }
    // Stream used to redraw dead codebook rows; part of the resumable state.
    Rng& repair_rng() { return repair_rng_; }

private:
    TrainConfig train_;
    CodecModel model_;
    Discriminators disc_;
    ParameterList gen_params_;
    ParameterList disc_params_;
    Adam gen_opt_;
    Adam disc_opt_;
    Rng repair_rng_;
    long long step_ = 0;
};

}  // namespace ucodec
