#pragma once

// Factorized residual vector quantizer. Each layer projects the running
// residual from D down to d dimensions, picks the codebook row with the
// highest cosine similarity, and projects that row back up to D.

#include <span>
#include <vector>

#include "ucodec/nn.hpp"
#include "ucodec/token_grid.hpp"

namespace ucodec {

// Index of the row of codebook [C, d] with the largest cosine similarity to
// p; lowest index on ties and 0 when ||p|| < 1e-8.
int cosine_lookup(std::span<const double> p, std::span<const double> codebook, int dim);

struct QuantizerLayer {
    Tensor in_proj;   // [d, D]
    Tensor codebook;  // [C, d]
    Tensor out_proj;  // [D, d]

    int codebook_size() const { return codebook.dim(0); }
};

struct QuantizationResult {
    TokenGrid codes;                  // one row per input row
    Tensor quantized;                 // [M, D], sum of the layer contributions
    std::vector<Tensor> projected;    // per layer p, [M, d]
    std::vector<Tensor> selected;     // per layer c*, [M, d]
    std::vector<Tensor> contributions;  // per layer out_proj(c*), [M, D]
};

// Code path captured at one input, used to differentiate the quantizer with
// the selection held fixed: layer i outputs p_i + offsets[i] where offsets
// are the constant c* - p at capture time.
struct FrozenPath {
    TokenGrid codes;
    std::vector<Tensor> offsets;
};

class Frvq {
public:
    Frvq() = default;
    Frvq(int n_layers, int latent_dim, int proj_dim, int codebook_size, Rng& rng);
    explicit Frvq(std::vector<QuantizerLayer> layers);

    // latents [M, D]. With `training`, each low-dimensional code passes the
    // gradient straight through to p.
    QuantizationResult quantize(const Tensor& latents, bool training) const;
    // Same arithmetic as quantize; out-of-range codes are a corrupt-stream error.
    Tensor dequantize(const TokenGrid& codes) const;

    FrozenPath capture(const Tensor& latents) const;
    QuantizationResult quantize_frozen(const Tensor& latents, const FrozenPath& path) const;

    // Redraws codebook rows whose norm fell below 1e-8; returns how many.
    int repair_codebooks(Rng& rng);

    int layers() const { return static_cast<int>(layers_.size()); }
    int latent_dim() const { return latent_dim_; }
    int proj_dim() const { return proj_dim_; }
    int codebook_size() const { return codebook_size_; }
    const QuantizerLayer& layer(int i) const { return layers_.at(static_cast<std::size_t>(i)); }
    void collect(ParameterList& out) const;

private:
    std::vector<QuantizerLayer> layers_;
    int latent_dim_ = 0;
    int proj_dim_ = 0;
    int codebook_size_ = 0;
};

struct VqLosses {
    Tensor codebook;    // mean |stopgrad(p) - c*|, moves the codebooks
    Tensor commitment;  // mean |p - stopgrad(c*)|, moves the encoder
};

// Element means, averaged over layers.
VqLosses vq_losses(const std::vector<Tensor>& projected, const std::vector<Tensor>& selected);

struct CodebookUsage {
    std::vector<long long> histogram;
    double perplexity = 0.0;
};

CodebookUsage codebook_usage(const TokenGrid& codes, int layer, int codebook_size);

}  // namespace ucodec
