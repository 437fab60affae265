#pragma once

// Randomised instances of every differentiable op, shared by the unit tests
// and the acceptance runner. Each maker draws shapes and values from the
// generator and returns a scalar loss plus the inputs to perturb.

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "support/gradcheck.hpp"
#include "ucodec/codec_model.hpp"
#include "ucodec/ops.hpp"
#include "ucodec/spectral.hpp"

namespace ucodec::testing {

using GradInstance = std::pair<std::function<Tensor()>, std::vector<Tensor>>;

struct GradCase {
    std::string label;
    double tol = 1e-5;
    std::function<GradInstance(Rng&)> make;
    double h = 1e-5;
};

inline int rand_int(Rng& rng, int lo, int hi) {
    return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Weighted sum so every output element has a distinct sensitivity.
inline Tensor probe(const Tensor& y, const Tensor& weights) { return ops::sum(ops::mul(y, weights)); }

inline Tensor probe_weights(const Tensor& like, std::uint64_t seed) {
    Rng rng(seed);
    return random_tensor(rng, like.shape());
}

inline void add_elementwise_cases(std::vector<GradCase>& cases) {
    using Maker = std::function<Tensor(const Tensor&)>;
    const std::vector<std::pair<std::string, Maker>> unary = {
        {"square", [](const Tensor& a) { return ops::square(a); }},
        {"abs", [](const Tensor& a) { return ops::abs(a); }},
        {"tanh", [](const Tensor& a) { return ops::tanh(a); }},
        {"elu", [](const Tensor& a) { return ops::elu(a); }},
        {"gelu", [](const Tensor& a) { return ops::gelu(a); }},
        {"leaky_relu", [](const Tensor& a) { return ops::leaky_relu(a, 0.1); }},
        {"scale", [](const Tensor& a) { return ops::scale(a, -1.7); }},
        {"add_scalar", [](const Tensor& a) { return ops::add_scalar(a, 0.3); }},
        {"log10_clamped", [](const Tensor& a) { return ops::log10_clamped(ops::abs(a), 1e-5); }},
        {"softmax", [](const Tensor& a) { return ops::softmax(a); }},
        {"transpose", [](const Tensor& a) { return ops::transpose(a); }},
        {"pad", [](const Tensor& a) { return ops::pad(ops::reshape(a, {static_cast<int>(a.numel())}), 2, 3); }},
        {"mean", [](const Tensor& a) { return ops::mean(a); }},
    };
    for (const auto& [label, op] : unary) {
        cases.push_back({label, 1e-5, [op = op](Rng& rng) {
            Tensor a = random_tensor(rng, {rand_int(rng, 1, 5), rand_int(rng, 1, 7)});
            if (rng() % 3 == 0) {
                a = random_tensor(rng, {2, rand_int(rng, 1, 4), rand_int(rng, 1, 4)});
            }
            Tensor w = probe_weights(op(a), rng());
            return std::pair{std::function<Tensor()>([=] { return probe(op(a), w); }), std::vector<Tensor>{a}};
        }});
    }
}

inline void add_binary_cases(std::vector<GradCase>& cases) {
    using Maker = std::function<Tensor(const Tensor&, const Tensor&)>;
    const std::vector<std::pair<std::string, Maker>> binary = {
        {"add", [](const Tensor& a, const Tensor& b) { return ops::add(a, b); }},
        {"sub", [](const Tensor& a, const Tensor& b) { return ops::sub(a, b); }},
        {"mul", [](const Tensor& a, const Tensor& b) { return ops::mul(a, b); }},
        {"add_n", [](const Tensor& a, const Tensor& b) { return ops::add_n({a, b, a}); }},
        {"l1_loss", [](const Tensor& a, const Tensor& b) { return ops::l1_loss(a, b); }},
        {"concat_rows", [](const Tensor& a, const Tensor& b) { return ops::concat_rows({a, b}); }},
    };
    for (const auto& [label, op] : binary) {
        cases.push_back({label, 1e-5, [op = op](Rng& rng) {
            const Shape s{rand_int(rng, 1, 5), rand_int(rng, 1, 6)};
            Tensor a = random_tensor(rng, s);
            Tensor b = random_tensor(rng, s);
            Tensor w = probe_weights(op(a, b), rng());
            return std::pair{std::function<Tensor()>([=] { return probe(op(a, b), w); }), std::vector<Tensor>{a, b}};
        }});
    }
}

inline void add_linear_cases(std::vector<GradCase>& cases) {
    cases.push_back({"matmul", 1e-5, [](Rng& rng) {
        const int m = rand_int(rng, 1, 6), n = rand_int(rng, 1, 6), kk = rand_int(rng, 1, 6);
        const bool ta = rng() % 2, tb = rng() % 2;
        Tensor a = random_tensor(rng, ta ? Shape{kk, m} : Shape{m, kk});
        Tensor b = random_tensor(rng, tb ? Shape{n, kk} : Shape{kk, n});
        Tensor w = random_tensor(rng, {m, n});
        return std::pair{std::function<Tensor()>([=] { return probe(ops::matmul(a, b, ta, tb), w); }),
                         std::vector<Tensor>{a, b}};
    }});
    cases.push_back({"linear", 1e-5, [](Rng& rng) {
        const int m = rand_int(rng, 1, 6), in = rand_int(rng, 1, 6), out = rand_int(rng, 1, 6);
        Tensor x = random_tensor(rng, {m, in});
        Tensor wt = random_tensor(rng, {out, in});
        Tensor b = random_tensor(rng, {out});
        Tensor w = random_tensor(rng, {m, out});
        return std::pair{std::function<Tensor()>([=] { return probe(ops::linear(x, wt, b), w); }),
                         std::vector<Tensor>{x, wt, b}};
    }});
    cases.push_back({"bmm", 1e-5, [](Rng& rng) {
        const int bt = rand_int(rng, 1, 3), m = rand_int(rng, 1, 4), n = rand_int(rng, 1, 4), kk = rand_int(rng, 1, 4);
        const bool tb = rng() % 2;
        Tensor a = random_tensor(rng, {bt, m, kk});
        Tensor b = random_tensor(rng, tb ? Shape{bt, n, kk} : Shape{bt, kk, n});
        Tensor w = random_tensor(rng, {bt, m, n});
        return std::pair{std::function<Tensor()>([=] { return probe(ops::bmm(a, b, tb), w); }),
                         std::vector<Tensor>{a, b}};
    }});
    cases.push_back({"add_row_bias", 1e-5, [](Rng& rng) {
        const int m = rand_int(rng, 1, 5), n = rand_int(rng, 1, 5);
        Tensor x = random_tensor(rng, {m, n});
        Tensor b = random_tensor(rng, {n});
        Tensor w = random_tensor(rng, {m, n});
        return std::pair{std::function<Tensor()>([=] { return probe(ops::add_row_bias(x, b), w); }),
                         std::vector<Tensor>{x, b}};
    }});
    cases.push_back({"embedding", 1e-5, [](Rng& rng) {
        const int vocab = rand_int(rng, 2, 6), d = rand_int(rng, 1, 4), n = rand_int(rng, 1, 8);
        std::vector<int> ids(n);
        for (int& id : ids) {
            id = rand_int(rng, 0, vocab - 1);
        }
        Tensor table = random_tensor(rng, {vocab, d});
        Tensor w = random_tensor(rng, {n, d});
        return std::pair{std::function<Tensor()>([=] { return probe(ops::embedding(table, ids), w); }),
                         std::vector<Tensor>{table}};
    }});
}

inline void add_convolutions_cases(std::vector<GradCase>& cases) {
    cases.push_back({"conv1d", 1e-6, [](Rng& rng) {
        const int cin = rand_int(rng, 1, 3), cout = rand_int(rng, 1, 3), kk = rand_int(rng, 1, 4);
        const int stride = rand_int(rng, 1, 3), dil = rand_int(rng, 1, 2), padding = rand_int(rng, 0, 2);
        const int len = dil * (kk - 1) + 1 + rand_int(rng, 0, 9);
        const bool batched = rng() % 2;
        Tensor x = random_tensor(rng, batched ? Shape{2, cin, len} : Shape{cin, len});
        Tensor wt = random_tensor(rng, {cout, cin, kk});
        Tensor b = random_tensor(rng, {cout});
        const Tensor y = ops::conv1d(x, wt, b, stride, dil, padding);
        Tensor w = probe_weights(y, rng());
        return std::pair{std::function<Tensor()>([=] { return probe(ops::conv1d(x, wt, b, stride, dil, padding), w); }),
                         std::vector<Tensor>{x, wt, b}};
    }});
    cases.push_back({"conv_transpose1d", 1e-6, [](Rng& rng) {
        const int cin = rand_int(rng, 1, 3), cout = rand_int(rng, 1, 3), kk = rand_int(rng, 1, 6);
        const int stride = rand_int(rng, 1, 4), padding = rand_int(rng, 0, (kk - 1) / 2);
        const int len = rand_int(rng, 1, 7);
        Tensor x = random_tensor(rng, {cin, len});
        Tensor wt = random_tensor(rng, {cin, cout, kk});
        Tensor b = random_tensor(rng, {cout});
        const Tensor y = ops::conv_transpose1d(x, wt, b, stride, padding);
        Tensor w = probe_weights(y, rng());
        return std::pair{
            std::function<Tensor()>([=] { return probe(ops::conv_transpose1d(x, wt, b, stride, padding), w); }),
            std::vector<Tensor>{x, wt, b}};
    }});
    cases.push_back({"conv2d", 1e-6, [](Rng& rng) {
        const int cin = rand_int(rng, 1, 2), cout = rand_int(rng, 1, 3);
        const ops::Pair k{rand_int(rng, 1, 3), rand_int(rng, 1, 3)};
        const ops::Pair s{rand_int(rng, 1, 2), rand_int(rng, 1, 2)};
        const ops::Pair d{rand_int(rng, 1, 2), 1};
        const ops::Pair p{rand_int(rng, 0, 1), rand_int(rng, 0, 1)};
        Tensor x = random_tensor(rng, {cin, d.h * (k.h - 1) + 1 + rand_int(rng, 0, 4), k.w + rand_int(rng, 0, 4)});
        Tensor wt = random_tensor(rng, {cout, cin, k.h, k.w});
        Tensor b = random_tensor(rng, {cout});
        const Tensor y = ops::conv2d(x, wt, b, s, d, p);
        Tensor w = probe_weights(y, rng());
        return std::pair{std::function<Tensor()>([=] { return probe(ops::conv2d(x, wt, b, s, d, p), w); }),
                         std::vector<Tensor>{x, wt, b}};
    }});
    cases.push_back({"weight_norm", 1e-5, [](Rng& rng) {
        // Rows of width 1 have an identically zero v-gradient, which a
        // relative check cannot score.
        Tensor v = random_tensor(rng, {rand_int(rng, 1, 3), rand_int(rng, 1, 3), rand_int(rng, 2, 4)});
        Tensor g = random_tensor(rng, {v.dim(0)});
        Tensor w = probe_weights(v, rng());
        return std::pair{std::function<Tensor()>([=] { return probe(ops::weight_norm(v, g), w); }),
                         std::vector<Tensor>{v, g}};
    }});
}

inline void add_sequence_ops_cases(std::vector<GradCase>& cases) {
    cases.push_back({"layer_norm", 1e-5, [](Rng& rng) {
        const int m = rand_int(rng, 1, 4), n = rand_int(rng, 2, 8);
        Tensor x = random_tensor(rng, {m, n});
        Tensor g = random_tensor(rng, {n});
        Tensor b = random_tensor(rng, {n});
        Tensor w = random_tensor(rng, {m, n});
        return std::pair{std::function<Tensor()>([=] { return probe(ops::layer_norm(x, g, b), w); }),
                         std::vector<Tensor>{x, g, b}};
    }});
    cases.push_back({"rope", 1e-5, [](Rng& rng) {
        Tensor x = random_tensor(rng, {rand_int(rng, 1, 3), rand_int(rng, 1, 5), 2 * rand_int(rng, 1, 3)});
        const int offset = rand_int(rng, 0, 20);
        Tensor w = probe_weights(x, rng());
        return std::pair{std::function<Tensor()>([=] { return probe(ops::rope(x, offset), w); }),
                         std::vector<Tensor>{x}};
    }});
    cases.push_back({"attention", 1e-5, [](Rng& rng) {
        const int h = rand_int(rng, 1, 2), len = rand_int(rng, 1, 5), dh = 2 * rand_int(rng, 1, 2);
        const bool causal = rng() % 2;
        Tensor q = random_tensor(rng, {h, len, dh});
        Tensor k = random_tensor(rng, {h, len, dh});
        Tensor v = random_tensor(rng, {h, len, dh});
        Tensor w = probe_weights(q, rng());
        return std::pair{std::function<Tensor()>([=] { return probe(ops::attention(q, k, v, causal), w); }),
                         std::vector<Tensor>{q, k, v}};
    }});
    cases.push_back({"split_merge_heads", 1e-5, [](Rng& rng) {
        const int b = rand_int(rng, 1, 2), len = rand_int(rng, 1, 4), heads = rand_int(rng, 1, 3), dh = rand_int(rng, 1, 3);
        Tensor x = random_tensor(rng, {b * len, heads * dh});
        Tensor w1 = random_tensor(rng, {b * heads, len, dh});
        Tensor w2 = random_tensor(rng, {b * len, heads * dh});
        return std::pair{std::function<Tensor()>([=] {
                             const Tensor s = ops::split_heads(x, b, len, heads);
                             return ops::add(probe(s, w1), probe(ops::merge_heads(ops::square(s), b, heads), w2));
                         }),
                         std::vector<Tensor>{x}};
    }});
    cases.push_back({"cross_entropy_rows", 1e-5, [](Rng& rng) {
        const int m = rand_int(rng, 1, 5), n = rand_int(rng, 2, 6);
        std::vector<int> targets(m);
        for (int& t : targets) {
            t = rand_int(rng, -1, n - 1);
        }
        Tensor x = random_tensor(rng, {m, n});
        return std::pair{std::function<Tensor()>([=] { return ops::sum(ops::cross_entropy_rows(x, targets)); }),
                         std::vector<Tensor>{x}};
    }});
    cases.push_back({"slice_rows", 1e-5, [](Rng& rng) {
        const int m = rand_int(rng, 2, 6), n = rand_int(rng, 1, 4);
        const int b = rand_int(rng, 0, m - 1), e = rand_int(rng, b + 1, m);
        Tensor x = random_tensor(rng, {m, n});
        Tensor w = random_tensor(rng, {e - b, n});
        return std::pair{std::function<Tensor()>([=] { return probe(ops::slice_rows(x, b, e), w); }),
                         std::vector<Tensor>{x}};
    }});
}

inline void add_spectral_cases(std::vector<GradCase>& cases) {
    cases.push_back({"stft_magnitude", 1e-5, [](Rng& rng) {
        const int n_fft = 2 * rand_int(rng, 2, 8) + static_cast<int>(rng() % 2);
        const int hop = rand_int(rng, 1, n_fft);
        Tensor x = random_tensor(rng, {rand_int(rng, n_fft, 3 * n_fft)});
        const Tensor y = ops::complex_magnitude(ops::stft(x, n_fft, hop));
        Tensor w = probe_weights(y, rng());
        return std::pair{
            std::function<Tensor()>([=] { return probe(ops::complex_magnitude(ops::stft(x, n_fft, hop)), w); }),
            std::vector<Tensor>{x}};
    }});
}

inline void add_codec_cases(std::vector<GradCase>& cases) {
    // The straight-through estimator itself has a constant forward value, so
    // its Jacobian is checked along the frozen code path instead.
    cases.push_back({"quantize_frozen", 1e-5, [](Rng& rng) {
        const int depth = rand_int(rng, 1, 3), latent = rand_int(rng, 2, 6), proj = rand_int(rng, 2, 4);
        auto q = std::make_shared<Frvq>(depth, latent, proj, rand_int(rng, 2, 6), rng);
        Tensor z = random_tensor(rng, {rand_int(rng, 1, 4), latent});
        auto path = std::make_shared<FrozenPath>(q->capture(z));
        Tensor w = random_tensor(rng, z.shape());
        ParameterList params;
        q->collect(params);
        std::vector<Tensor> inputs{z};
        for (auto& p : params) {
            if (p.name.ends_with("proj")) {
                inputs.push_back(p.tensor);
            }
        }
        return GradInstance{[=] { return probe(q->quantize_frozen(z, *path).quantized, w); }, inputs};
    }});
    cases.push_back({"log_mel", 1e-4, [](Rng& rng) {
        const int window = 32 << rand_int(rng, 0, 1);
        Tensor x = random_tensor(rng, {rand_int(rng, window, 3 * window)}, 0.3);
        const Tensor y = log_mel(x, window, window / 8, 16000, 1e-5);
        Tensor w = probe_weights(y, rng());
        return GradInstance{[=] { return probe(log_mel(x, window, window / 8, 16000, 1e-5), w); }, {x}};
    }, 1e-6});
    cases.push_back({"multiscale_mel_loss", 1e-4, [](Rng& rng) {
        MelConfig cfg;
        cfg.windows = {32, 64};
        cfg.mel_bins = {5, 10};
        const int len = rand_int(rng, 100, 240);
        Tensor x = random_tensor(rng, {len}, 0.3);
        const Tensor y = random_tensor(rng, {len}, 0.3);
        return GradInstance{[=] { return multiscale_mel_loss(y, x, cfg); }, {x}};
    }, 1e-6});
}

// Tiny codec (hop 8) so a full finite-difference sweep stays cheap.
inline CodecConfig gradcheck_codec() {
    CodecConfig c;
    c.strides = {2, 2, 2};
    c.base_channels = 2;
    c.latent_dim = 8;
    c.bottleneck = {1, 2, 8, 16};
    c.decoder_start_channels = 8;
    c.n_quantizers = 2;
    c.codebook_size = 4;
    c.proj_dim = 4;
    return c;
}

// Encoder, quantizer with its code selection frozen at the base point,
// decoder, multi-scale mel loss against a fixed target. Perturbs the input
// waveform and one parameter tensor from each stage.
inline GradInstance composed_codec_instance(Rng& rng) {
    PrecisionScope f64(Precision::F64);
    const CodecConfig cfg = gradcheck_codec();
    auto model = std::make_shared<CodecModel>(cfg, rng);
    const int len = cfg.hop() * rand_int(rng, 8, 12);
    Tensor x = random_tensor(rng, {1, len}, 0.3);
    const Tensor target = random_tensor(rng, {1, len}, 0.3);
    auto path = std::make_shared<FrozenPath>();
    {
        NoGradScope no_grad;
        *path = model->quantizer().capture(model->encoder().forward(x));
    }
    MelConfig mel;
    mel.windows = {32, 64};
    mel.mel_bins = {5, 10};
    ParameterList params;
    model->collect(params);
    std::vector<Tensor> inputs{x};
    const char* picks[] = {"encoder.conv_in.v", "encoder.to_latent.weight", "quantizer.layers.0.in_proj",
                           "quantizer.layers.1.out_proj", "decoder.conv_out.v"};
    for (const char* name : picks) {
        for (auto& p : params) {
            if (p.name == name) {
                inputs.push_back(p.tensor);
            }
        }
    }
    auto loss = [=] {
        const Tensor z = model->encoder().forward(x);
        const Tensor q = model->quantizer().quantize_frozen(z, *path).quantized;
        const Tensor y = model->decoder().forward(q, 1);
        return multiscale_mel_loss(ops::reshape(target, {len}), ops::reshape(y, {len}), mel);
    };
    return {loss, inputs};
}

inline std::vector<GradCase> primitive_gradient_cases() {
    std::vector<GradCase> cases;
    add_elementwise_cases(cases);
    add_binary_cases(cases);
    add_linear_cases(cases);
    add_convolutions_cases(cases);
    add_sequence_ops_cases(cases);
    add_spectral_cases(cases);
    add_codec_cases(cases);
    return cases;
}

}  // namespace ucodec::testing
