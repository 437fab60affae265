#include "ucodec/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ucodec/error.hpp"

namespace ucodec {

void zero_grads(ParameterList& params) {
    for (auto& p : params) {
        p.tensor.zero_grad();
    }
}

std::size_t parameter_count(const ParameterList& params) {
    std::size_t n = 0;
    for (const auto& p : params) {
        n += p.tensor.numel();
    }
    return n;
}

void set_precision(ParameterList& params, Precision p) {
    for (auto& param : params) {
        param.tensor.impl()->precision = p;
        detail::round_to_precision(param.tensor.mutable_data(), p);
    }
}

namespace {

std::vector<double> row_norms_as_gain(const std::vector<double>& v, int rows) {
    const std::size_t width = v.size() / static_cast<std::size_t>(rows);
    std::vector<double> g(static_cast<std::size_t>(rows));
    for (int r = 0; r < rows; ++r) {
        double ss = 0.0;
        for (std::size_t j = 0; j < width; ++j) {
            ss += v[r * width + j] * v[r * width + j];
        }
        g[r] = std::sqrt(ss);
    }
    return g;
}

}  // namespace

Linear::Linear(int in, int out, Rng& rng, const std::string& name, bool bias, double init_scale) {
    weight_ = Tensor::parameter({out, in}, normal_values(rng, static_cast<std::size_t>(in) * out, init_scale / std::sqrt(in)),
                                name + ".weight");
    if (bias) {
        bias_ = Tensor::parameter({out}, std::vector<double>(static_cast<std::size_t>(out), 0.0), name + ".bias");
    }
}

void Linear::collect(ParameterList& out) const {
    out.push_back({weight_.name(), weight_});
    if (bias_.defined()) {
        out.push_back({bias_.name(), bias_});
    }
}

WnConv1d::WnConv1d(int in, int out, int kernel, Rng& rng, const std::string& name, int stride, int dilation, int padding)
    : stride_(stride), dilation_(dilation), padding_(padding) {
    auto v = normal_values(rng, static_cast<std::size_t>(out) * in * kernel, 1.0 / std::sqrt(in * kernel));
    auto g = row_norms_as_gain(v, out);
    v_ = Tensor::parameter({out, in, kernel}, std::move(v), name + ".v");
    g_ = Tensor::parameter({out}, std::move(g), name + ".g");
    b_ = Tensor::parameter({out}, std::vector<double>(static_cast<std::size_t>(out), 0.0), name + ".bias");
}

Tensor WnConv1d::forward(const Tensor& x) const {
    return ops::conv1d(x, ops::weight_norm(v_, g_), b_, stride_, dilation_, padding_);
}

void WnConv1d::collect(ParameterList& out) const {
    out.push_back({v_.name(), v_});
    out.push_back({g_.name(), g_});
    out.push_back({b_.name(), b_});
}

WnConvTranspose1d::WnConvTranspose1d(int in, int out, int kernel, Rng& rng, const std::string& name, int stride,
                                     int padding)
    : stride_(stride), padding_(padding) {
    auto v = normal_values(rng, static_cast<std::size_t>(in) * out * kernel, 1.0 / std::sqrt(in * kernel / std::max(1, stride)));
    auto g = row_norms_as_gain(v, in);
    v_ = Tensor::parameter({in, out, kernel}, std::move(v), name + ".v");
    g_ = Tensor::parameter({in}, std::move(g), name + ".g");
    b_ = Tensor::parameter({out}, std::vector<double>(static_cast<std::size_t>(out), 0.0), name + ".bias");
}

Tensor WnConvTranspose1d::forward(const Tensor& x) const {
    return ops::conv_transpose1d(x, ops::weight_norm(v_, g_), b_, stride_, padding_);
}

void WnConvTranspose1d::collect(ParameterList& out) const {
    out.push_back({v_.name(), v_});
    out.push_back({g_.name(), g_});
    out.push_back({b_.name(), b_});
}

WnConv2d::WnConv2d(int in, int out, ops::Pair kernel, Rng& rng, const std::string& name, ops::Pair stride,
                   ops::Pair dilation, ops::Pair padding)
    : stride_(stride), dilation_(dilation), padding_(padding) {
    const int fan_in = in * kernel.h * kernel.w;
    auto v = normal_values(rng, static_cast<std::size_t>(out) * fan_in, 1.0 / std::sqrt(fan_in));
    auto g = row_norms_as_gain(v, out);
    v_ = Tensor::parameter({out, in, kernel.h, kernel.w}, std::move(v), name + ".v");
    g_ = Tensor::parameter({out}, std::move(g), name + ".g");
    b_ = Tensor::parameter({out}, std::vector<double>(static_cast<std::size_t>(out), 0.0), name + ".bias");
}

Tensor WnConv2d::forward(const Tensor& x) const {
    return ops::conv2d(x, ops::weight_norm(v_, g_), b_, stride_, dilation_, padding_);
}

void WnConv2d::collect(ParameterList& out) const {
    out.push_back({v_.name(), v_});
    out.push_back({g_.name(), g_});
    out.push_back({b_.name(), b_});
}

LayerNorm::LayerNorm(int dim, const std::string& name) {
    gamma_ = Tensor::parameter({dim}, std::vector<double>(static_cast<std::size_t>(dim), 1.0), name + ".gamma");
    beta_ = Tensor::parameter({dim}, std::vector<double>(static_cast<std::size_t>(dim), 0.0), name + ".beta");
}

void LayerNorm::collect(ParameterList& out) const {
    out.push_back({gamma_.name(), gamma_});
    out.push_back({beta_.name(), beta_});
}

void KvCache::reset(int layers) {
    keys.assign(static_cast<std::size_t>(layers), {});
    values.assign(static_cast<std::size_t>(layers), {});
    length = 0;
}

Transformer::Transformer(const TransformerConfig& cfg, Rng& rng, const std::string& name) : cfg_(cfg) {
    require(cfg.layers >= 1 && cfg.d_model >= 2 && cfg.heads >= 1 && cfg.ff >= 1, ErrorKind::Configuration,
            "transformer dimensions must be positive");
    require(cfg.d_model % cfg.heads == 0, ErrorKind::Configuration, "transformer hidden size must be divisible by heads");
    require((cfg.d_model / cfg.heads) % 2 == 0, ErrorKind::Configuration, "transformer head dimension must be even");
    // Residual-branch outputs start small so a fresh stack is close to identity.
    const double residual_scale = 1.0 / std::sqrt(2.0 * cfg.layers);
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = name + ".layers." + std::to_string(l);
        Block b;
        b.ln_attn = LayerNorm(cfg.d_model, p + ".ln_attn");
        b.q = Linear(cfg.d_model, cfg.d_model, rng, p + ".attn.q");
        b.k = Linear(cfg.d_model, cfg.d_model, rng, p + ".attn.k");
        b.v = Linear(cfg.d_model, cfg.d_model, rng, p + ".attn.v");
        b.o = Linear(cfg.d_model, cfg.d_model, rng, p + ".attn.o", true, residual_scale);
        b.ln_mlp = LayerNorm(cfg.d_model, p + ".ln_mlp");
        b.up = Linear(cfg.d_model, cfg.ff, rng, p + ".mlp.up");
        b.down = Linear(cfg.ff, cfg.d_model, rng, p + ".mlp.down", true, residual_scale);
        blocks_.push_back(std::move(b));
    }
    final_norm_ = LayerNorm(cfg.d_model, name + ".final_norm");
}

Tensor Transformer::forward(const Tensor& x, int batch, int len) const {
    require(x.rank() == 2 && x.dim(0) == batch * len && x.dim(1) == cfg_.d_model, ErrorKind::Configuration,
            "transformer input " + shape_string(x.shape()) + " does not match batch*len x d_model");
    Tensor h = x;
    for (const auto& b : blocks_) {
        const Tensor a = b.ln_attn.forward(h);
        const Tensor q = ops::split_heads(b.q.forward(a), batch, len, cfg_.heads);
        const Tensor k = ops::split_heads(b.k.forward(a), batch, len, cfg_.heads);
        const Tensor v = ops::split_heads(b.v.forward(a), batch, len, cfg_.heads);
        const Tensor att = ops::merge_heads(ops::attention(q, k, v, cfg_.causal), batch, cfg_.heads);
        h = ops::add(h, b.o.forward(att));
        const Tensor f = b.down.forward(ops::gelu(b.up.forward(b.ln_mlp.forward(h))));
        h = ops::add(h, f);
    }
    return final_norm_.forward(h);
}

std::vector<double> Transformer::step(std::span<const double> row, KvCache& cache) const {
    require(static_cast<int>(row.size()) == cfg_.d_model, ErrorKind::Configuration, "transformer step: row width");
    if (cache.keys.size() != blocks_.size()) {
        cache.reset(static_cast<int>(blocks_.size()));
    }
    NoGradScope no_grad;
    const int d = cfg_.d_model;
    const int heads = cfg_.heads;
    const int dh = d / heads;
    const int pos = cache.length;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    Tensor h = Tensor::from({1, d}, std::vector<double>(row.begin(), row.end()));
    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const auto& b = blocks_[l];
        const Tensor a = b.ln_attn.forward(h);
        const Tensor q = ops::rope(ops::reshape(b.q.forward(a), {heads, 1, dh}), pos);
        const Tensor k = ops::rope(ops::reshape(b.k.forward(a), {heads, 1, dh}), pos);
        const Tensor v = b.v.forward(a);
        auto& keys = cache.keys[l];
        auto& vals = cache.values[l];
        keys.insert(keys.end(), k.data().begin(), k.data().end());
        vals.insert(vals.end(), v.data().begin(), v.data().end());
        const int n = pos + 1;
        std::vector<double> mixed(static_cast<std::size_t>(d), 0.0);
        std::vector<double> weights(static_cast<std::size_t>(n));
        for (int hd = 0; hd < heads; ++hd) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int p = 0; p < n; ++p) {
                double dot = 0.0;
                for (int j = 0; j < dh; ++j) {
                    dot += q[static_cast<std::size_t>(hd) * dh + j] * keys[static_cast<std::size_t>(p) * d + hd * dh + j];
                }
                weights[p] = dot * inv_sqrt;
                mx = std::max(mx, weights[p]);
            }
            double z = 0.0;
            for (int p = 0; p < n; ++p) {
                weights[p] = std::exp(weights[p] - mx);
                z += weights[p];
            }
            for (int p = 0; p < n; ++p) {
                const double w = weights[p] / z;
                for (int j = 0; j < dh; ++j) {
                    mixed[static_cast<std::size_t>(hd) * dh + j] += w * vals[static_cast<std::size_t>(p) * d + hd * dh + j];
                }
            }
        }
        h = ops::add(h, b.o.forward(Tensor::from({1, d}, std::move(mixed))));
        const Tensor f = b.down.forward(ops::gelu(b.up.forward(b.ln_mlp.forward(h))));
        h = ops::add(h, f);
    }
    cache.length += 1;
    return final_norm_.forward(h).to_vector();
}

void Transformer::collect(ParameterList& out) const {
    for (const auto& b : blocks_) {
        b.ln_attn.collect(out);
        b.q.collect(out);
        b.k.collect(out);
        b.v.collect(out);
        b.o.collect(out);
        b.ln_mlp.collect(out);
        b.up.collect(out);
        b.down.collect(out);
    }
    final_norm_.collect(out);
}

}  // namespace ucodec
