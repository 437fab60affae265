#include <gtest/gtest.h>

#include <cmath>

#include "support/gradcheck.hpp"
#include "ucodec/error.hpp"
#include "ucodec/frvq.hpp"

using namespace ucodec;
using ucodec::testing::random_tensor;

namespace {

Tensor identity(int n, const std::string& name) {
    std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        v[static_cast<std::size_t>(i) * n + i] = 1.0;
    }
    return Tensor::parameter({n, n}, v, name);
}

QuantizerLayer identity_layer(int d, std::vector<double> codebook) {
    const int rows = static_cast<int>(codebook.size()) / d;
    return {identity(d, "in"), Tensor::parameter({rows, d}, std::move(codebook), "cb"), identity(d, "out")};
}

int brute_force(const std::vector<double>& p, const std::vector<double>& cb, int d) {
    const int rows = static_cast<int>(cb.size()) / d;
    double pn = 0.0;
    for (double x : p) {
        pn += x * x;
    }
    int best = 0;
    double best_cos = -1e300;
    for (int j = 0; j < rows; ++j) {
        double dot = 0.0, cn = 0.0;
        for (int i = 0; i < d; ++i) {
            dot += p[i] * cb[j * d + i];
            cn += cb[j * d + i] * cb[j * d + i];
        }
        const double cos = dot / std::sqrt(pn * cn);
        if (cos > best_cos) {
            best_cos = cos;
            best = j;
        }
    }
    return best;
}

}  // namespace

TEST(CosineLookup, Examples) {
    const std::vector<double> cb{1, 0, 0, 1};
    EXPECT_EQ(cosine_lookup(std::vector<double>{0.9, 0.1}, cb, 2), 0);
    EXPECT_EQ(cosine_lookup(std::vector<double>{0.1, 0.9}, cb, 2), 1);
    EXPECT_EQ(cosine_lookup(std::vector<double>{0.0, 0.0}, cb, 2), 0);
    // Exact tie resolves to the lower index.
    EXPECT_EQ(cosine_lookup(std::vector<double>{1.0, 1.0}, cb, 2), 0);
}

TEST(CosineLookup, MatchesEnumeration) {
    Rng rng(1);
    for (int draw = 0; draw < 1000; ++draw) {
        const auto cb = normal_values(rng, 16 * 4, 1.0);
        const auto p = normal_values(rng, 4, 1.0);
        ASSERT_EQ(cosine_lookup(p, cb, 4), brute_force(p, cb, 4));
    }
}

TEST(Quantize, ScaledCodebookRowIsSelected) {
    Frvq q({identity_layer(2, {1, 0, 0.6, 0.8, 0, 1})});
    const auto r = q.quantize(Tensor::from({1, 2}, {1.2, 1.6}), false);
    EXPECT_EQ(r.codes.at(0, 0), 1);
    const auto z = q.quantize(Tensor::from({1, 2}, {0.0, 0.0}), false);
    EXPECT_EQ(z.codes.at(0, 0), 0);
    EXPECT_EQ(z.quantized.to_vector(), (std::vector<double>{1, 0}));
}

TEST(Quantize, ContributionMatchesMatrixOracle) {
    Rng rng(2);
    Frvq q(1, 6, 3, 5, rng);
    const Tensor z = random_tensor(rng, {4, 6});
    const auto r = q.quantize(z, false);
    const auto& l = q.layer(0);
    for (int t = 0; t < 4; ++t) {
        const int c = r.codes.at(t, 0);
        for (int o = 0; o < 6; ++o) {
            double acc = 0.0;
            for (int j = 0; j < 3; ++j) {
                acc += l.out_proj[o * 3 + j] * l.codebook[c * 3 + j];
            }
            EXPECT_NEAR(r.contributions[0][t * 6 + o], acc, 1e-12);
        }
        // p is in_proj * z
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int i = 0; i < 6; ++i) {
                acc += l.in_proj[j * 6 + i] * z[t * 6 + i];
            }
            EXPECT_NEAR(r.projected[0][t * 3 + j], acc, 1e-12);
        }
    }
}

TEST(Quantize, ExactMatchReconstructsForAnyDepth) {
    for (int n = 1; n <= 4; ++n) {
        std::vector<QuantizerLayer> layers;
        for (int i = 0; i < n; ++i) {
            layers.push_back(identity_layer(2, {0.6, 0.8, -1, 0}));
        }
        Frvq q(layers);
        const Tensor z = Tensor::from({1, 2}, {0.6, 0.8});
        const auto r = q.quantize(z, false);
        if (n == 1) {
            EXPECT_EQ(r.quantized.to_vector(), z.to_vector());
        } else {
            // Later layers see a zero residual and add codebook row 0; only
            // the one-layer case is exact. The residual after layer 1 is 0.
            const Tensor residual = ops::sub(z, r.contributions[0]);
            EXPECT_EQ(residual.to_vector(), (std::vector<double>{0, 0}));
        }
    }
}

TEST(Quantize, TwoLayerHandTrace) {
    // Layer 1 codebook {(1,0),(0,1)}, layer 2 codebook {(1,1),(-1,0)}, both
    // with identity projections. z = (3, 1):
    //   layer 1: cos with (1,0) = 0.949, with (0,1) = 0.316 -> idx 0, q1 = (1,0)
    //   residual (2, 1): cos with (1,1) = 0.949, with (-1,0) = -0.894 -> idx 0, q2 = (1,1)
    //   z_hat = (2, 1)
    Frvq q({identity_layer(2, {1, 0, 0, 1}), identity_layer(2, {1, 1, -1, 0})});
    const auto r = q.quantize(Tensor::from({1, 2}, {3, 1}), false);
    EXPECT_EQ(r.codes.at(0, 0), 0);
    EXPECT_EQ(r.codes.at(0, 1), 0);
    EXPECT_EQ(r.quantized.to_vector(), (std::vector<double>{2, 1}));
    // z = (-2, 0.5): layer 1 picks (0,1) (cos 0.24 vs -0.97); residual (-2,-0.5)
    // picks (-1,0) (cos 0.97 vs -0.86); z_hat = (-1, 1).
    const auto s = q.quantize(Tensor::from({1, 2}, {-2, 0.5}), false);
    EXPECT_EQ(s.codes.at(0, 0), 1);
    EXPECT_EQ(s.codes.at(0, 1), 1);
    EXPECT_EQ(s.quantized.to_vector(), (std::vector<double>{-1, 1}));
}

TEST(Quantize, AdditiveCompositionAndDequantizeAreExact) {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        Frvq q(1 + trial % 5, 12, 4, 16, rng);
        const Tensor z = random_tensor(rng, {7, 12});
        const auto r = q.quantize(z, trial % 2 == 0);
        Tensor sum = r.contributions[0];
        for (std::size_t i = 1; i < r.contributions.size(); ++i) {
            sum = ops::add(sum, r.contributions[i]);
        }
        ASSERT_EQ(sum.to_vector(), r.quantized.to_vector());
        ASSERT_EQ(q.dequantize(r.codes).to_vector(), r.quantized.to_vector());
    }
}

TEST(Quantize, LayerOneIndicesIgnorePositiveScaling) {
    Rng rng(4);
    Frvq q(3, 10, 4, 32, rng);
    for (int draw = 0; draw < 200; ++draw) {
        const Tensor z = random_tensor(rng, {3, 10});
        const double lambda = std::exp(4.0 * (uniform01(rng) - 0.5));
        const auto a = q.quantize(z, false);
        const auto b = q.quantize(ops::scale(z, lambda), false);
        for (int t = 0; t < 3; ++t) {
            ASSERT_EQ(a.codes.at(t, 0), b.codes.at(t, 0));
        }
    }
}

TEST(Dequantize, AllZeroCodesAndRangeCheck) {
    Rng rng(5);
    Frvq q(2, 4, 2, 3, rng);
    TokenGrid g(2, 2);
    const Tensor out = q.dequantize(g);
    for (int t = 0; t < 2; ++t) {
        for (int o = 0; o < 4; ++o) {
            double acc = 0.0;
            for (int i = 0; i < 2; ++i) {
                const auto& l = q.layer(i);
                acc += l.out_proj[o * 2] * l.codebook[0] + l.out_proj[o * 2 + 1] * l.codebook[1];
            }
            EXPECT_NEAR(out[t * 4 + o], acc, 1e-15);
        }
    }
    g.at(1, 1) = 3;
    try {
        q.dequantize(g);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::CorruptStream);
    }
}

TEST(Quantize, StraightThroughJacobianMatchesFrozenPath) {
    Rng rng(6);
    Frvq q(3, 6, 3, 8, rng);
    Tensor z = random_tensor(rng, {2, 6});
    const FrozenPath path = q.capture(z);
    Tensor w = random_tensor(rng, {2, 6});
    // Taped straight-through gradient at z ...
    Tensor zp = Tensor::parameter(z.shape(), z.to_vector(), "z");
    {
        Tape tape;
        TapeScope scope(tape);
        tape.backward(ops::sum(ops::mul(q.quantize(zp, true).quantized, w)));
    }
    // ... equals finite differences along the frozen code path.
    Tensor zf = z.clone();
    const auto r = ucodec::testing::check_gradients(
        [&] { return ops::sum(ops::mul(q.quantize_frozen(zf, path).quantized, w)); }, {zf});
    EXPECT_LT(r.max_rel_error, 1e-6);
    for (std::size_t i = 0; i < z.numel(); ++i) {
        EXPECT_NEAR(zp.grad()[i], zf.grad()[i], 1e-12);
    }
}

TEST(VqLosses, ClosedFormAndRouting) {
    const Tensor p = Tensor::from({1, 2}, {1, 0});
    const Tensor c = Tensor::from({1, 2}, {0, 1});
    const auto l = vq_losses({p}, {c});
    EXPECT_EQ(l.codebook.item(), 1.0);
    EXPECT_EQ(l.commitment.item(), 1.0);
    const auto zero = vq_losses({p}, {p});
    EXPECT_EQ(zero.codebook.item(), 0.0);

    Rng rng(7);
    Frvq q(2, 4, 2, 5, rng);
    Tensor z = Tensor::parameter({3, 4}, normal_values(rng, 12, 1.0), "z");
    ParameterList params;
    q.collect(params);
    auto grads_after = [&](bool commitment) {
        zero_grads(params);
        z.zero_grad();
        Tape tape;
        TapeScope scope(tape);
        const auto r = q.quantize(z, true);
        const auto v = vq_losses(r.projected, r.selected);
        tape.backward(commitment ? v.commitment : v.codebook);
    };
    auto all_zero = [](const Tensor& t) {
        for (double g : t.grad()) {
            if (g != 0.0) {
                return false;
            }
        }
        return true;
    };
    grads_after(true);
    EXPECT_TRUE(all_zero(q.layer(0).codebook) && all_zero(q.layer(1).codebook));
    EXPECT_FALSE(all_zero(z));
    grads_after(false);
    EXPECT_TRUE(all_zero(z));
    EXPECT_FALSE(all_zero(q.layer(0).codebook));
}

TEST(CodebookUsage, Perplexity) {
    TokenGrid zeros(10, 1);
    EXPECT_NEAR(codebook_usage(zeros, 0, 4).perplexity, 1.0, 1e-12);
    TokenGrid uniform(8, 1);
    for (int t = 0; t < 8; ++t) {
        uniform.at(t, 0) = t % 4;
    }
    EXPECT_NEAR(codebook_usage(uniform, 0, 4).perplexity, 4.0, 1e-12);

    Rng rng(8);
    TokenGrid g(500, 2);
    for (int& c : g.codes) {
        c = static_cast<int>(rng() % 7);
    }
    std::vector<double> counts(7, 0.0);
    for (int t = 0; t < 500; ++t) {
        counts[g.at(t, 1)] += 1.0;
    }
    double h = 0.0;
    for (double n : counts) {
        if (n > 0) {
            h -= n / 500 * std::log(n / 500);
        }
    }
    const auto u = codebook_usage(g, 1, 7);
    EXPECT_NEAR(u.perplexity, std::exp(h), 1e-9);
    EXPECT_EQ(u.histogram[3], static_cast<long long>(counts[3]));
}

TEST(Codebook, InitialRowsAreUnitNorm) {
    Rng rng(9);
    Frvq q(2, 8, 4, 32, rng);
    for (int j = 0; j < 32; ++j) {
        double ss = 0.0;
        for (int i = 0; i < 4; ++i) {
            ss += q.layer(1).codebook[j * 4 + i] * q.layer(1).codebook[j * 4 + i];
        }
        EXPECT_NEAR(ss, 1.0, 1e-12);
    }
    Tensor cb = q.layer(0).codebook;
    std::fill(cb.mutable_data().begin(), cb.mutable_data().begin() + 4, 0.0);
    EXPECT_EQ(q.repair_codebooks(rng), 1);
}
