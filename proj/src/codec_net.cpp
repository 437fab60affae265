#include "ucodec/codec_net.hpp"

#include <numeric>
#include <string>

#include "ucodec/error.hpp"

namespace ucodec {

Rational frame_rate(std::span<const int> strides, int sample_rate) {
    require(!strides.empty(), ErrorKind::Configuration, "frame_rate: no strides");
    std::int64_t hop = 1;
    for (int s : strides) {
        require(s >= 1, ErrorKind::Configuration, "frame_rate: stride " + std::to_string(s) + " < 1");
        hop *= s;
    }
    const std::int64_t g = std::gcd(static_cast<std::int64_t>(sample_rate), hop);
    return {sample_rate / g, hop / g};
}

int CodecConfig::hop() const {
    int h = 1;
    for (int s : strides) {
        h *= s;
    }
    return h;
}

Rational CodecConfig::frame_rate() const { return ucodec::frame_rate(strides, sample_rate); }

void CodecConfig::validate() const {
    auto positive = [](int v, const char* what) {
        require(v >= 1, ErrorKind::Configuration, std::string(what) + " must be positive, got " + std::to_string(v));
    };
    positive(sample_rate, "sample_rate");
    require(!strides.empty(), ErrorKind::Configuration, "strides must not be empty");
    for (int s : strides) {
        positive(s, "stride");
    }
    positive(base_channels, "base_channels");
    positive(latent_dim, "latent_dim");
    positive(bottleneck.layers, "bottleneck layers");
    positive(bottleneck.heads, "bottleneck heads");
    positive(bottleneck.hidden, "bottleneck hidden");
    positive(bottleneck.mlp, "bottleneck mlp");
    require(bottleneck.hidden % bottleneck.heads == 0, ErrorKind::Configuration,
            "bottleneck hidden " + std::to_string(bottleneck.hidden) + " not divisible by heads " +
                std::to_string(bottleneck.heads));
    require((bottleneck.hidden / bottleneck.heads) % 2 == 0, ErrorKind::Configuration,
            "bottleneck head dimension must be even");
    positive(decoder_start_channels, "decoder_start_channels");
    require((decoder_start_channels >> strides.size()) >= 1, ErrorKind::Configuration,
            "decoder_start_channels too small to halve once per stage");
    positive(n_quantizers, "n_quantizers");
    require(codebook_size >= 2, ErrorKind::Configuration, "codebook_size must be at least 2");
    positive(proj_dim, "proj_dim");
}

CodecConfig CodecConfig::paper_5hz() { return CodecConfig{}; }

CodecConfig CodecConfig::paper_12_5hz() {
    CodecConfig c;
    c.strides = {5, 4, 4, 4, 4};
    return c;
}

CodecConfig CodecConfig::miniature() {
    CodecConfig c;
    c.strides = {8, 8, 5};
    c.base_channels = 8;
    c.latent_dim = 16;
    c.bottleneck = {.layers = 2, .heads = 4, .hidden = 32, .mlp = 64};
    c.decoder_start_channels = 64;
    c.n_quantizers = 4;
    c.codebook_size = 64;
    c.proj_dim = 8;
    return c;
}

PaddedWave pad_to_hop(std::span<const double> wave, int hop) {
    require(!wave.empty(), ErrorKind::Format, "pad_to_hop: empty waveform");
    require(hop >= 1, ErrorKind::Configuration, "pad_to_hop: hop must be positive");
    PaddedWave out;
    out.original_length = wave.size();
    const std::size_t h = static_cast<std::size_t>(hop);
    const std::size_t padded = (wave.size() + h - 1) / h * h;
    out.samples.assign(wave.begin(), wave.end());
    out.samples.resize(padded, 0.0);
    return out;
}

ResampleGeometry resample_geometry(int stride) { return {2 * stride + (stride % 2), (stride + 1) / 2}; }

ResidualUnit::ResidualUnit(int channels, Rng& rng, const std::string& name) {
    const int dilations[] = {1, 3, 9};
    for (int i = 0; i < 3; ++i) {
        convs_.emplace_back(channels, channels, 7, rng, name + ".convs." + std::to_string(i), 1, dilations[i],
                            3 * dilations[i]);
    }
}

Tensor ResidualUnit::forward(const Tensor& x) const {
    Tensor y = x;
    for (const auto& c : convs_) {
        y = c.forward(ops::elu(y));
    }
    return ops::add(x, y);
}

void ResidualUnit::collect(ParameterList& out) const {
    for (const auto& c : convs_) {
        c.collect(out);
    }
}

std::vector<int> encoder_widths(const CodecConfig& cfg) {
    const int n = static_cast<int>(cfg.strides.size());
    std::vector<int> w;
    for (int i = 0; i < n; ++i) {
        w.push_back(cfg.base_channels << std::min(i + 1, n - 1));
    }
    return w;
}

std::vector<int> decoder_widths(const CodecConfig& cfg) {
    std::vector<int> w;
    int c = cfg.decoder_start_channels;
    for (std::size_t i = 0; i < cfg.strides.size(); ++i) {
        c /= 2;
        w.push_back(c);
    }
    return w;
}

Encoder::Encoder(const CodecConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    conv_in_ = WnConv1d(1, cfg.base_channels, 7, rng, "encoder.conv_in", 1, 1, 3);
    const auto widths = encoder_widths(cfg);
    int width = cfg.base_channels;
    for (std::size_t i = 0; i < cfg.strides.size(); ++i) {
        const std::string p = "encoder.stages." + std::to_string(i);
        units_.emplace_back(width, rng, p + ".res");
        const auto g = resample_geometry(cfg.strides[i]);
        down_.emplace_back(width, widths[i], g.kernel, rng, p + ".down", cfg.strides[i], 1, g.padding);
        width = widths[i];
    }
    to_hidden_ = Linear(width, cfg.bottleneck.hidden, rng, "encoder.to_hidden");
    transformer_ = Transformer({.layers = cfg.bottleneck.layers,
                                .d_model = cfg.bottleneck.hidden,
                                .heads = cfg.bottleneck.heads,
                                .ff = cfg.bottleneck.mlp,
                                .causal = false},
                               rng, "encoder.bottleneck");
    to_latent_ = Linear(cfg.bottleneck.hidden, cfg.latent_dim, rng, "encoder.to_latent");
}

Tensor Encoder::features(const Tensor& wave) const {
    require(wave.rank() == 2, ErrorKind::Configuration, "encoder: expected [batch, samples], got " + shape_string(wave.shape()));
    const int batch = wave.dim(0);
    const int len = wave.dim(1);
    const int hop = cfg_.hop();
    require(len > 0 && len % hop == 0, ErrorKind::Alignment,
            "encoder: " + std::to_string(len) + " samples is not a positive multiple of hop " + std::to_string(hop));
    Tensor x = conv_in_.forward(ops::reshape(wave, {batch, 1, len}));
    for (std::size_t i = 0; i < units_.size(); ++i) {
        x = down_[i].forward(ops::elu(units_[i].forward(x)));
    }
    const int channels = x.dim(1);
    const int frames = x.dim(2);
    // [B, C, T] -> [B*T, C]
    const Tensor rows = ops::reshape(ops::transpose(x), {batch * frames, channels});
    return to_hidden_.forward(ops::elu(rows));
}

Tensor Encoder::bottleneck(const Tensor& features, int batch, int frames) const {
    return transformer_.forward(features, batch, frames);
}

Tensor Encoder::forward(const Tensor& wave) const {
    const int batch = wave.rank() == 2 ? wave.dim(0) : 1;
    const Tensor f = features(wave);
    const int frames = f.dim(0) / batch;
    return to_latent_.forward(bottleneck(f, batch, frames));
}

void Encoder::collect(ParameterList& out) const {
    conv_in_.collect(out);
    for (std::size_t i = 0; i < units_.size(); ++i) {
        units_[i].collect(out);
        down_[i].collect(out);
    }
    to_hidden_.collect(out);
    transformer_.collect(out);
    to_latent_.collect(out);
}

Decoder::Decoder(const CodecConfig& cfg, Rng& rng) : cfg_(cfg) {
    cfg.validate();
    from_latent_ = Linear(cfg.latent_dim, cfg.decoder_start_channels, rng, "decoder.from_latent");
    const auto widths = decoder_widths(cfg);
    int width = cfg.decoder_start_channels;
    const int n = static_cast<int>(cfg.strides.size());
    for (int i = 0; i < n; ++i) {
        const int stride = cfg.strides[n - 1 - i];
        const std::string p = "decoder.stages." + std::to_string(i);
        const auto g = resample_geometry(stride);
        up_.emplace_back(width, widths[i], g.kernel, rng, p + ".up", stride, g.padding);
        units_.emplace_back(widths[i], rng, p + ".res");
        width = widths[i];
    }
    conv_out_ = WnConv1d(width, 1, 7, rng, "decoder.conv_out", 1, 1, 3);
}

Tensor Decoder::forward(const Tensor& latents, int batch) const {
    require(latents.rank() == 2 && latents.dim(1) == cfg_.latent_dim, ErrorKind::Configuration,
            "decoder: latents " + shape_string(latents.shape()) + " do not have width " + std::to_string(cfg_.latent_dim));
    require(batch >= 1 && latents.dim(0) % batch == 0, ErrorKind::Configuration, "decoder: rows not divisible by batch");
    const int frames = latents.dim(0) / batch;
    const Tensor h = from_latent_.forward(latents);
    Tensor x = ops::transpose(ops::reshape(h, {batch, frames, cfg_.decoder_start_channels}));
    for (std::size_t i = 0; i < up_.size(); ++i) {
        x = units_[i].forward(up_[i].forward(ops::elu(x)));
    }
    x = ops::tanh(conv_out_.forward(ops::elu(x)));
    return ops::reshape(x, {batch, x.dim(2)});
}

void Decoder::collect(ParameterList& out) const {
    from_latent_.collect(out);
    for (std::size_t i = 0; i < up_.size(); ++i) {
        up_[i].collect(out);
        units_[i].collect(out);
    }
    conv_out_.collect(out);
}

}  // namespace ucodec
