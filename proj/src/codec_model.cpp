#include "ucodec/codec_model.hpp"

#include "ucodec/error.hpp"

namespace ucodec {

CodecModel::CodecModel(const CodecConfig& cfg, Rng& rng)
    : cfg_(cfg),
      encoder_(cfg, rng),
      quantizer_(cfg.n_quantizers, cfg.latent_dim, cfg.proj_dim, cfg.codebook_size, rng),
      decoder_(cfg, rng) {}

CodecModel::Output CodecModel::forward(const Tensor& wave, bool training) const {
    Output out;
    out.latents = encoder_.forward(wave);
    out.quantized = quantizer_.quantize(out.latents, training);
    out.reconstruction = decoder_.forward(out.quantized.quantized, wave.dim(0));
    return out;
}

TokenGrid CodecModel::encode(std::span<const double> samples) const {
    NoGradScope no_grad;
    const Tensor wave = Tensor::from({1, static_cast<int>(samples.size())}, {samples.begin(), samples.end()});
    return quantizer_.quantize(encoder_.forward(wave), false).codes;
}

std::vector<double> CodecModel::decode(const TokenGrid& codes) const {
    NoGradScope no_grad;
    require(codes.frames >= 1, ErrorKind::Format, "decode: empty token grid");
    return decoder_.forward(quantizer_.dequantize(codes), 1).to_vector();
}

void CodecModel::collect(ParameterList& out) const {
    encoder_.collect(out);
    quantizer_.collect(out);
    decoder_.collect(out);
}

}  // namespace ucodec
