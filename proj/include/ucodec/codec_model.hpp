#pragma once

#include <span>
#include <vector>

#include "ucodec/codec_net.hpp"
#include "ucodec/frvq.hpp"

namespace ucodec {

// Encoder, quantizer and decoder with shared configuration.
class CodecModel {
public:
    CodecModel() = default;
    CodecModel(const CodecConfig& cfg, Rng& rng);

    // Full differentiable path for a [B, L] batch.
    struct Output {
        Tensor latents;
        QuantizationResult quantized;
        Tensor reconstruction;  // [B, L]
    };
    Output forward(const Tensor& wave, bool training) const;

    // Inference helpers for a single hop-aligned waveform.
    TokenGrid encode(std::span<const double> samples) const;
    std::vector<double> decode(const TokenGrid& codes) const;

    const CodecConfig& config() const { return cfg_; }
    const Encoder& encoder() const { return encoder_; }
    const Decoder& decoder() const { return decoder_; }
    const Frvq& quantizer() const { return quantizer_; }
    Frvq& quantizer() { return quantizer_; }
    void collect(ParameterList& out) const;

private:
    CodecConfig cfg_;
    Encoder encoder_;
    Frvq quantizer_;
    Decoder decoder_;
};

}  // namespace ucodec
