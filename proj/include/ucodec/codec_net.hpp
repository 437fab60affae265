#pragma once

// Convolutional encoder with a Transformer bottleneck, and the mirrored
// transposed-convolution decoder.

#include <cstdint>
#include <span>
#include <vector>

#include "ucodec/nn.hpp"

namespace ucodec {

// Exact rational rate in Hz, kept in lowest terms.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

Rational frame_rate(std::span<const int> strides, int sample_rate);

struct BottleneckConfig {
    int layers = 8;
    int heads = 8;
    int hidden = 512;
    int mlp = 2048;
};

struct CodecConfig {
    int sample_rate = 16000;
    std::vector<int> strides{8, 5, 5, 4, 4};
    int base_channels = 64;
    int latent_dim = 1024;
    BottleneckConfig bottleneck;
    int decoder_start_channels = 2048;
    int n_quantizers = 8;
    int codebook_size = 1024;
    int proj_dim = 8;

    int hop() const;
    Rational frame_rate() const;
    // Throws Configuration on any inconsistent field.
    void validate() const;

    // 16 kHz, 5 Hz frames, 8 x 1024 codes.
    static CodecConfig paper_5hz();
    // 16 kHz, 12.5 Hz frames (strides 5,4,4,4,4).
    static CodecConfig paper_12_5hz();
    // Small enough to train on one CPU core: hop 320, 50 Hz frames.
    static CodecConfig miniature();
};

struct PaddedWave {
    std::vector<double> samples;
    std::size_t original_length = 0;
};

// Right-pads with zeros to the next multiple of hop. Empty input is a
// format error.
PaddedWave pad_to_hop(std::span<const double> wave, int hop);

// Kernel and padding of the strided conv for a given stride; chosen so the
// output length is exactly L / stride (and L * stride when transposed).
struct ResampleGeometry {
    int kernel;
    int padding;
};
ResampleGeometry resample_geometry(int stride);

// Skip connection around three dilated kernel-7 convolutions (dilations 1, 3,
// 9), each preceded by ELU.
class ResidualUnit {
public:
    ResidualUnit() = default;
    ResidualUnit(int channels, Rng& rng, const std::string& name);

    Tensor forward(const Tensor& x) const;
    void collect(ParameterList& out) const;

private:
    std::vector<WnConv1d> convs_;
};

class Encoder {
public:
    Encoder() = default;
    Encoder(const CodecConfig& cfg, Rng& rng);

    // wave [B, L] with L a positive multiple of hop -> latents [B*T, D].
    Tensor forward(const Tensor& wave) const;
    // Probes: the conv stack output as [B*T, hidden], and the Transformer
    // applied to such features.
    Tensor features(const Tensor& wave) const;
    Tensor bottleneck(const Tensor& features, int batch, int frames) const;

    void collect(ParameterList& out) const;

private:
    CodecConfig cfg_;
    WnConv1d conv_in_;
    std::vector<ResidualUnit> units_;
    std::vector<WnConv1d> down_;
    Linear to_hidden_;
    Transformer transformer_;
    Linear to_latent_;
};

class Decoder {
public:
    Decoder() = default;
    Decoder(const CodecConfig& cfg, Rng& rng);

    // latents [B*T, D] -> wave [B, T * hop], bounded by tanh.
    Tensor forward(const Tensor& latents, int batch) const;
    void collect(ParameterList& out) const;

private:
    CodecConfig cfg_;
    Linear from_latent_;
    std::vector<WnConvTranspose1d> up_;
    std::vector<ResidualUnit> units_;
    WnConv1d conv_out_;
};

// Channel width after each encoder stage, and of each decoder stage input.
std::vector<int> encoder_widths(const CodecConfig& cfg);
std::vector<int> decoder_widths(const CodecConfig& cfg);

}  // namespace ucodec
