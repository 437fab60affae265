#pragma once

// Layers shared by the codec, the discriminators and the token LM.

#include <string>
#include <vector>

#include "ucodec/ops.hpp"
#include "ucodec/rng.hpp"
#include "ucodec/tensor.hpp"

namespace ucodec {

struct Parameter {
    std::string name;
    Tensor tensor;
};

using ParameterList = std::vector<Parameter>;

void zero_grads(ParameterList& params);
std::size_t parameter_count(const ParameterList& params);
// Marks parameters for 32- or 64-bit training and rounds their values.
void set_precision(ParameterList& params, Precision p);

class Linear {
public:
    Linear() = default;
    Linear(int in, int out, Rng& rng, const std::string& name, bool bias = true, double init_scale = 1.0);

    Tensor forward(const Tensor& x) const { return ops::linear(x, weight_, bias_); }
    void collect(ParameterList& out) const;

    const Tensor& weight() const { return weight_; }
    const Tensor& bias() const { return bias_; }
    int in_features() const { return weight_.dim(1); }
    int out_features() const { return weight_.dim(0); }

private:
    Tensor weight_;  // [out, in]
    Tensor bias_;    // [out] or undefined
};

// Weight-normalised 1-d convolution.
class WnConv1d {
public:
    WnConv1d() = default;
    WnConv1d(int in, int out, int kernel, Rng& rng, const std::string& name, int stride = 1, int dilation = 1,
             int padding = 0);

    Tensor forward(const Tensor& x) const;
    void collect(ParameterList& out) const;

    int stride() const { return stride_; }
    int out_channels() const { return v_.dim(0); }

private:
    Tensor v_;  // [out, in, k]
    Tensor g_;  // [out]
    Tensor b_;  // [out]
    int stride_ = 1;
    int dilation_ = 1;
    int padding_ = 0;
};

// Weight-normalised transposed convolution; the norm runs over the stored
// leading (input-channel) axis.
class WnConvTranspose1d {
public:
    WnConvTranspose1d() = default;
    WnConvTranspose1d(int in, int out, int kernel, Rng& rng, const std::string& name, int stride, int padding);

    Tensor forward(const Tensor& x) const;
    void collect(ParameterList& out) const;

private:
    Tensor v_;  // [in, out, k]
    Tensor g_;  // [in]
    Tensor b_;  // [out]
    int stride_ = 1;
    int padding_ = 0;
};

class WnConv2d {
public:
    WnConv2d() = default;
    WnConv2d(int in, int out, ops::Pair kernel, Rng& rng, const std::string& name, ops::Pair stride = {1, 1},
             ops::Pair dilation = {1, 1}, ops::Pair padding = {0, 0});

    Tensor forward(const Tensor& x) const;
    void collect(ParameterList& out) const;

private:
    Tensor v_;
    Tensor g_;
    Tensor b_;
    ops::Pair stride_;
    ops::Pair dilation_;
    ops::Pair padding_;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(int dim, const std::string& name);

    Tensor forward(const Tensor& x) const { return ops::layer_norm(x, gamma_, beta_); }
    void collect(ParameterList& out) const;

private:
    Tensor gamma_;
    Tensor beta_;
};

struct TransformerConfig {
    int layers = 2;
    int d_model = 32;
    int heads = 4;
    int ff = 64;
    bool causal = false;
};

// Per-layer key/value history for incremental decoding. Keys are stored
// after the rotary embedding.
struct KvCache {
    std::vector<std::vector<double>> keys;    // [layer][pos * d_model]
    std::vector<std::vector<double>> values;  // [layer][pos * d_model]
    int length = 0;

    void reset(int layers);
};

// Pre-norm Transformer with rotary multi-head attention and a GELU MLP.
class Transformer {
public:
    Transformer() = default;
    Transformer(const TransformerConfig& cfg, Rng& rng, const std::string& name);

    // x is [batch*len, d_model] holding `batch` independent sequences.
    Tensor forward(const Tensor& x, int batch, int len) const;

    // One position of an incremental causal pass; `row` is d_model wide.
    // Untaped. Equivalent to the last row of forward() over all cached
    // positions plus this one.
    std::vector<double> step(std::span<const double> row, KvCache& cache) const;

    void collect(ParameterList& out) const;
    const TransformerConfig& config() const { return cfg_; }

private:
    struct Block {
        LayerNorm ln_attn;
        Linear q;
        Linear k;
        Linear v;
        Linear o;
        LayerNorm ln_mlp;
        Linear up;
        Linear down;
    };

    TransformerConfig cfg_;
    std::vector<Block> blocks_;
    LayerNorm final_norm_;
};

}  // namespace ucodec
