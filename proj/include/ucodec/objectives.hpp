#pragma once

// Adversarial discriminators and the loss terms of codec training.

#include <string>
#include <vector>

#include "ucodec/frvq.hpp"
#include "ucodec/nn.hpp"
#include "ucodec/spectral.hpp"

namespace ucodec {

struct LossWeights {
    double mel = 15.0;
    double adversarial = 1.0;
    double feature_matching = 1.0;
    double codebook = 1.0;
    double commitment = 0.25;

    void validate() const;
};

struct DiscriminatorConfig {
    std::vector<int> periods{2, 3, 5, 7, 11};
    std::vector<int> fft_sizes{78, 126, 206, 334, 542, 876, 1418, 2296};
    // First-layer widths; the period branches widen x4, x16, x32, x32.
    int period_channels = 32;
    int stft_channels = 32;
    double slope = 0.1;

    static DiscriminatorConfig miniature();
};

// One branch's verdict: a logit map and its intermediate activations in
// layer order.
struct BranchOutput {
    Tensor logits;
    std::vector<Tensor> features;
};

// Waveform reshaped to [1, ceil(L/p), p] (zero padded) and scanned by
// (k, 1) convolutions along the folded time axis.
class PeriodBranch {
public:
    PeriodBranch() = default;
    PeriodBranch(int period, int channels, double slope, Rng& rng, const std::string& name);
    BranchOutput forward(const Tensor& wave) const;
    void collect(ParameterList& out) const;

private:
    int period_ = 2;
    double slope_ = 0.1;
    std::vector<WnConv2d> convs_;
    WnConv2d post_;
};

// Complex STFT (real and imaginary planes as two channels, hop n_fft/4)
// followed by five 2-d convolutions over (time, frequency).
class StftBranch {
public:
    StftBranch() = default;
    StftBranch(int n_fft, int channels, double slope, Rng& rng, const std::string& name);
    BranchOutput forward(const Tensor& wave) const;
    void collect(ParameterList& out) const;

private:
    int n_fft_ = 64;
    double slope_ = 0.1;
    std::vector<WnConv2d> convs_;
    WnConv2d post_;
};

class Discriminators {
public:
    Discriminators() = default;
    Discriminators(const DiscriminatorConfig& cfg, Rng& rng);

    // wave [L]; one output per branch, period branches first.
    std::vector<BranchOutput> forward(const Tensor& wave) const;
    void collect(ParameterList& out) const;
    std::size_t branches() const { return periods_.size() + stfts_.size(); }

private:
    std::vector<PeriodBranch> periods_;
    std::vector<StftBranch> stfts_;
};

// Least-squares GAN terms with targets 1 (real) and 0 (fake), averaged
// within each branch and summed over branches.
Tensor lsgan_d_loss(const std::vector<Tensor>& real_logits, const std::vector<Tensor>& fake_logits);
Tensor lsgan_g_loss(const std::vector<Tensor>& fake_logits);

// Mean over all (branch, depth) pairs of mean|real - fake| / mean|real|.
// Real features act as constants. Mismatched shapes are a usage error.
Tensor feature_matching_loss(const std::vector<std::vector<Tensor>>& real,
                             const std::vector<std::vector<Tensor>>& fake);

struct LossTerms {
    Tensor mel;
    Tensor adversarial;
    Tensor feature_matching;
    Tensor codebook;
    Tensor commitment;
};

// Weighted sum; terms that are undefined or carry weight 0 are skipped.
Tensor generator_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace ucodec
