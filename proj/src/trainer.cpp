#include "ucodec/trainer.hpp"

#include <cmath>
#include <numbers>

#include "json.hpp"

#include "ucodec/error.hpp"

namespace ucodec {

void TrainConfig::validate(const CodecConfig& codec) const {
    require(steps >= 0 && lr > 0.0 && warmup >= 0 && batch >= 1, ErrorKind::Configuration,
            "train: steps, lr, warmup and batch must be positive");
    require(excerpt >= codec.hop() && excerpt % codec.hop() == 0, ErrorKind::Alignment,
            "train: excerpt must be a positive multiple of hop " + std::to_string(codec.hop()));
    require(checkpoint_every >= 1, ErrorKind::Configuration, "train: checkpoint_every must be positive");
    weights.validate();
}

TrainConfig TrainConfig::desk() {
    TrainConfig t;
    t.lr = 3e-3;
    t.warmup = 100;
    t.excerpt = 960;
    t.weights.adversarial = 0.0;
    t.weights.feature_matching = 0.0;
    return t;
}

std::string StepReport::to_json() const {
    nlohmann::ordered_json j;
    j["step"] = step;
    j["d_loss"] = d_loss;
    j["mel"] = mel;
    j["adv"] = adv;
    j["fm"] = fm;
    j["cb"] = cb;
    j["commit"] = commit;
    j["lr"] = lr;
    return j.dump();
}

WaveCorpus::WaveCorpus(std::vector<std::vector<double>> clips) : clips_(std::move(clips)) {
    require(!clips_.empty(), ErrorKind::Dataset, "corpus has no clips");
    for (const auto& c : clips_) {
        require(!c.empty(), ErrorKind::Dataset, "corpus contains an empty clip");
    }
}

Tensor WaveCorpus::sample(int batch, int excerpt, int align, std::uint64_t seed, long long step) const {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(step)));
    std::vector<double> out(static_cast<std::size_t>(batch) * excerpt, 0.0);
    for (int b = 0; b < batch; ++b) {
        const auto& clip = clips_[rng() % clips_.size()];
        const std::size_t span = clip.size() > static_cast<std::size_t>(excerpt) ? clip.size() - excerpt : 0;
        const std::size_t slots = span / static_cast<std::size_t>(align) + 1;
        const std::size_t start = (rng() % slots) * static_cast<std::size_t>(align);
        const std::size_t n = std::min<std::size_t>(excerpt, clip.size() - start);
        std::copy_n(clip.begin() + static_cast<std::ptrdiff_t>(start), n, out.begin() + static_cast<std::ptrdiff_t>(b) * excerpt);
    }
    return Tensor::from({batch, excerpt}, std::move(out));
}

WaveCorpus five_sine_corpus(int sample_rate) {
    const double freqs[] = {150.0, 400.0, 850.0, 1300.0, 2200.0};
    const double amps[] = {0.25, 0.2, 0.15, 0.1, 0.08};
    const double phases[] = {0.0, 1.1, 2.3, 0.7, 4.0};
    std::vector<double> clip(static_cast<std::size_t>(sample_rate));
    for (std::size_t i = 0; i < clip.size(); ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        double v = 0.0;
        for (int k = 0; k < 5; ++k) {
            v += amps[k] * std::sin(2.0 * std::numbers::pi * freqs[k] * t + phases[k]);
        }
        clip[i] = v;
    }
    return WaveCorpus({clip});
}

CodecTrainer::CodecTrainer(const CodecConfig& codec, const DiscriminatorConfig& disc, const TrainConfig& train)
    : train_(train), repair_rng_(derive_seed(train.seed, 0x5eed)) {
    codec.validate();
    train.validate(codec);
    Rng rng(train.seed);
    model_ = CodecModel(codec, rng);
    model_.collect(gen_params_);
    if (adversarial()) {
        disc_ = Discriminators(disc, rng);
        disc_.collect(disc_params_);
    }
    set_precision(gen_params_, Precision::F32);
    set_precision(disc_params_, Precision::F32);
    AdamConfig ac;
    ac.max_grad_norm = train.max_grad_norm;
    gen_opt_ = Adam(gen_params_, ac);
    disc_opt_ = Adam(disc_params_, ac);
}

bool CodecTrainer::adversarial() const {
    return train_.weights.adversarial > 0.0 || train_.weights.feature_matching > 0.0;
}

namespace {

Tensor item(const Tensor& batch, int b) {
    return ops::reshape(ops::slice_rows(batch, b, b + 1), {batch.dim(1)});
}

void check_finite(double v, const char* what, long long step) {
    require(std::isfinite(v), ErrorKind::TrainingDivergence,
            std::string("non-finite ") + what + " at step " + std::to_string(step));
}

}  // namespace

StepReport CodecTrainer::step(const Tensor& batch) {
    StepReport report;
    report.step = step_;
    report.lr = warmup_lr(train_.lr, train_.warmup, step_);
    if (adversarial()) {
        discriminator_step(batch, report);
    }
    generator_step(batch, report);
    model_.quantizer().repair_codebooks(repair_rng_);
    ++step_;
    return report;
}

void CodecTrainer::discriminator_step(const Tensor& batch, StepReport& report) {
    PrecisionScope f32(Precision::F32);
    const int items = batch.dim(0);
    {
        zero_grads(disc_params_);
        Tensor fake;
        {
            NoGradScope no_grad;
            fake = model_.forward(batch, true).reconstruction;
        }
        Tape tape;
        TapeScope scope(tape);
        std::vector<Tensor> losses;
        for (int b = 0; b < items; ++b) {
            std::vector<Tensor> real_logits;
            std::vector<Tensor> fake_logits;
            for (auto& o : disc_.forward(item(batch, b))) {
                real_logits.push_back(o.logits);
            }
            for (auto& o : disc_.forward(item(fake, b))) {
                fake_logits.push_back(o.logits);
            }
            losses.push_back(lsgan_d_loss(real_logits, fake_logits));
        }
        const Tensor d_loss = ops::scale(ops::add_n(losses), 1.0 / items);
        report.d_loss = d_loss.item();
        check_finite(report.d_loss, "discriminator loss", step_);
        tape.backward(d_loss);
        disc_opt_.step(report.lr);
    }
}

void CodecTrainer::generator_step(const Tensor& batch, StepReport& report) {
    PrecisionScope f32(Precision::F32);
    const MelConfig mel_cfg{.sample_rate = model_.config().sample_rate};
    const int items = batch.dim(0);
    zero_grads(gen_params_);
    {
        Tape tape;
        TapeScope scope(tape);
        const auto out = model_.forward(batch, true);
        LossTerms terms;
        terms.mel = multiscale_mel_loss(batch, out.reconstruction, mel_cfg);
        if (adversarial()) {
            std::vector<Tensor> adv;
            std::vector<Tensor> fm;
            for (int b = 0; b < items; ++b) {
                std::vector<std::vector<Tensor>> real_feats;
                {
                    NoGradScope no_grad;
                    for (auto& o : disc_.forward(item(batch, b))) {
                        real_feats.push_back(o.features);
                    }
                }
                std::vector<Tensor> fake_logits;
                std::vector<std::vector<Tensor>> fake_feats;
                for (auto& o : disc_.forward(item(out.reconstruction, b))) {
                    fake_logits.push_back(o.logits);
                    fake_feats.push_back(o.features);
                }
                adv.push_back(lsgan_g_loss(fake_logits));
                fm.push_back(feature_matching_loss(real_feats, fake_feats));
            }
            terms.adversarial = ops::scale(ops::add_n(adv), 1.0 / items);
            terms.feature_matching = ops::scale(ops::add_n(fm), 1.0 / items);
            report.adv = terms.adversarial.item();
            report.fm = terms.feature_matching.item();
        }
        const VqLosses vq = vq_losses(out.quantized.projected, out.quantized.selected);
        terms.codebook = vq.codebook;
        terms.commitment = vq.commitment;
        report.mel = terms.mel.item();
        report.cb = vq.codebook.item();
        report.commit = vq.commitment.item();
        const Tensor total = generator_loss(terms, train_.weights);
        check_finite(total.item(), "generator loss", step_);
        tape.backward(total);
    }
    gen_opt_.step(report.lr);
}

}  // namespace ucodec
