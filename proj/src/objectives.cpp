#include "ucodec/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "ucodec/error.hpp"

namespace ucodec {

void LossWeights::validate() const {
    require(mel >= 0 && adversarial >= 0 && feature_matching >= 0 && codebook >= 0 && commitment >= 0,
            ErrorKind::Configuration, "loss weights must be non-negative");
}

DiscriminatorConfig DiscriminatorConfig::miniature() {
    DiscriminatorConfig c;
    c.period_channels = 2;
    c.stft_channels = 4;
    return c;
}

PeriodBranch::PeriodBranch(int period, int channels, double slope, Rng& rng, const std::string& name)
    : period_(period), slope_(slope) {
    require(period >= 1 && channels >= 1, ErrorKind::Configuration, "period branch: bad period or width");
    const int widths[] = {channels, 4 * channels, 16 * channels, 32 * channels, 32 * channels};
    int in = 1;
    for (int i = 0; i < 5; ++i) {
        const int stride = i < 4 ? 3 : 1;
        convs_.emplace_back(in, widths[i], ops::Pair{5, 1}, rng, name + ".convs." + std::to_string(i),
                            ops::Pair{stride, 1}, ops::Pair{1, 1}, ops::Pair{2, 0});
        in = widths[i];
    }
    post_ = WnConv2d(in, 1, ops::Pair{3, 1}, rng, name + ".post", ops::Pair{1, 1}, ops::Pair{1, 1}, ops::Pair{1, 0});
}

BranchOutput PeriodBranch::forward(const Tensor& wave) const {
    require(wave.rank() == 1, ErrorKind::Configuration, "period branch expects a 1-d waveform");
    const int len = wave.dim(0);
    const int rows = (len + period_ - 1) / period_;
    Tensor x = ops::reshape(ops::pad(wave, 0, rows * period_ - len), {1, rows, period_});
    BranchOutput out;
    for (const auto& c : convs_) {
        x = ops::leaky_relu(c.forward(x), slope_);
        out.features.push_back(x);
    }
    out.logits = post_.forward(x);
    return out;
}

void PeriodBranch::collect(ParameterList& out) const {
    for (const auto& c : convs_) {
        c.collect(out);
    }
    post_.collect(out);
}

StftBranch::StftBranch(int n_fft, int channels, double slope, Rng& rng, const std::string& name)
    : n_fft_(n_fft), slope_(slope) {
    require(n_fft >= 4 && channels >= 1, ErrorKind::Configuration, "stft branch: bad size or width");
    convs_.emplace_back(2, channels, ops::Pair{3, 9}, rng, name + ".convs.0", ops::Pair{1, 1}, ops::Pair{1, 1},
                        ops::Pair{1, 4});
    const int dilations[] = {1, 2, 4};
    for (int i = 0; i < 3; ++i) {
        convs_.emplace_back(channels, channels, ops::Pair{3, 9}, rng, name + ".convs." + std::to_string(i + 1),
                            ops::Pair{1, 2}, ops::Pair{dilations[i], 1}, ops::Pair{dilations[i], 4});
    }
    convs_.emplace_back(channels, channels, ops::Pair{3, 3}, rng, name + ".convs.4", ops::Pair{1, 1}, ops::Pair{1, 1},
                        ops::Pair{1, 1});
    post_ = WnConv2d(channels, 1, ops::Pair{3, 3}, rng, name + ".post", ops::Pair{1, 1}, ops::Pair{1, 1},
                     ops::Pair{1, 1});
}

BranchOutput StftBranch::forward(const Tensor& wave) const {
    require(wave.rank() == 1, ErrorKind::Configuration, "stft branch expects a 1-d waveform");
    Tensor x = ops::stft(wave, n_fft_, std::max(1, n_fft_ / 4));
    BranchOutput out;
    for (const auto& c : convs_) {
        x = ops::leaky_relu(c.forward(x), slope_);
        out.features.push_back(x);
    }
    out.logits = post_.forward(x);
    return out;
}

void StftBranch::collect(ParameterList& out) const {
    for (const auto& c : convs_) {
        c.collect(out);
    }
    post_.collect(out);
}

Discriminators::Discriminators(const DiscriminatorConfig& cfg, Rng& rng) {
    for (int p : cfg.periods) {
        periods_.emplace_back(p, cfg.period_channels, cfg.slope, rng, "disc.period." + std::to_string(p));
    }
    for (int n : cfg.fft_sizes) {
        stfts_.emplace_back(n, cfg.stft_channels, cfg.slope, rng, "disc.stft." + std::to_string(n));
    }
}

std::vector<BranchOutput> Discriminators::forward(const Tensor& wave) const {
    std::vector<BranchOutput> out;
    for (const auto& b : periods_) {
        out.push_back(b.forward(wave));
    }
    for (const auto& b : stfts_) {
        out.push_back(b.forward(wave));
    }
    return out;
}

void Discriminators::collect(ParameterList& out) const {
    for (const auto& b : periods_) {
        b.collect(out);
    }
    for (const auto& b : stfts_) {
        b.collect(out);
    }
}

Tensor lsgan_d_loss(const std::vector<Tensor>& real_logits, const std::vector<Tensor>& fake_logits) {
    require(!real_logits.empty() && real_logits.size() == fake_logits.size(), ErrorKind::Usage,
            "lsgan: mismatched branch lists");
    std::vector<Tensor> terms;
    for (std::size_t i = 0; i < real_logits.size(); ++i) {
        terms.push_back(ops::mean(ops::square(ops::add_scalar(real_logits[i], -1.0))));
        terms.push_back(ops::mean(ops::square(fake_logits[i])));
    }
    return ops::add_n(terms);
}

Tensor lsgan_g_loss(const std::vector<Tensor>& fake_logits) {
    require(!fake_logits.empty(), ErrorKind::Usage, "lsgan: no branches");
    std::vector<Tensor> terms;
    for (const auto& f : fake_logits) {
        terms.push_back(ops::mean(ops::square(ops::add_scalar(f, -1.0))));
    }
    return ops::add_n(terms);
}

Tensor feature_matching_loss(const std::vector<std::vector<Tensor>>& real, const std::vector<std::vector<Tensor>>& fake) {
    require(!real.empty() && real.size() == fake.size(), ErrorKind::Usage, "feature matching: mismatched branch lists");
    std::vector<Tensor> terms;
    for (std::size_t b = 0; b < real.size(); ++b) {
        require(real[b].size() == fake[b].size(), ErrorKind::Usage, "feature matching: mismatched depths");
        for (std::size_t d = 0; d < real[b].size(); ++d) {
            const Tensor& r = real[b][d];
            require(r.shape() == fake[b][d].shape(), ErrorKind::Usage,
                    "feature matching: shape " + shape_string(r.shape()) + " vs " + shape_string(fake[b][d].shape()));
            double scale = 0.0;
            for (double v : r.data()) {
                scale += std::abs(v);
            }
            scale = std::max(scale / static_cast<double>(r.numel()), 1e-8);
            terms.push_back(ops::scale(ops::l1_loss(ops::stop_gradient(r), fake[b][d]), 1.0 / scale));
        }
    }
    return ops::scale(ops::add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

Tensor generator_loss(const LossTerms& terms, const LossWeights& weights) {
    std::vector<Tensor> parts;
    auto add = [&](const Tensor& t, double w) {
        if (t.defined() && w != 0.0) {
            parts.push_back(ops::scale(t, w));
        }
    };
    add(terms.mel, weights.mel);
    add(terms.adversarial, weights.adversarial);
    add(terms.feature_matching, weights.feature_matching);
    add(terms.codebook, weights.codebook);
    add(terms.commitment, weights.commitment);
    require(!parts.empty(), ErrorKind::Configuration, "generator loss has no active terms");
    return ops::add_n(parts);
}

}  // namespace ucodec
