#include <gtest/gtest.h>

#include "support/gradcheck.hpp"
#include "ucodec/codec_net.hpp"
#include "ucodec/error.hpp"

using namespace ucodec;
using ucodec::testing::random_tensor;

namespace {

// Narrow channels keep paper-stride configs cheap enough to run for real.
CodecConfig narrow(std::vector<int> strides) {
    CodecConfig c;
    c.strides = std::move(strides);
    c.base_channels = 2;
    c.latent_dim = 8;
    c.bottleneck = {.layers = 1, .heads = 2, .hidden = 8, .mlp = 16};
    c.decoder_start_channels = 64;
    return c;
}

template <typename F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::Io;
}

}  // namespace

TEST(FrameRate, PaperStrideSets) {
    const std::vector<int> five{8, 5, 5, 4, 4};
    const std::vector<int> twelve{5, 4, 4, 4, 4};
    const std::vector<int> one{1};
    EXPECT_EQ(frame_rate(five, 16000), (Rational{5, 1}));
    EXPECT_EQ(frame_rate(twelve, 16000), (Rational{25, 2}));
    EXPECT_EQ(frame_rate(twelve, 16000).value(), 12.5);
    EXPECT_EQ(frame_rate(one, 16000), (Rational{16000, 1}));
    EXPECT_EQ(CodecConfig::paper_5hz().hop(), 3200);
}

TEST(PadToHop, Examples) {
    std::vector<double> a(3200, 0.5);
    EXPECT_EQ(pad_to_hop(a, 3200).samples.size(), 3200u);
    const auto b = pad_to_hop(std::vector<double>{0.25}, 3200);
    ASSERT_EQ(b.samples.size(), 3200u);
    EXPECT_EQ(b.original_length, 1u);
    EXPECT_EQ(b.samples[0], 0.25);
    for (std::size_t i = 1; i < b.samples.size(); ++i) {
        ASSERT_EQ(b.samples[i], 0.0);
    }
    EXPECT_EQ(pad_to_hop(std::vector<double>(16001, 0.0), 3200).samples.size(), 19200u);
    EXPECT_EQ(kind_of([] { pad_to_hop(std::vector<double>{}, 4); }), ErrorKind::Format);
}

TEST(ResampleGeometry, StridedLengthsAreExact) {
    for (int s = 1; s <= 9; ++s) {
        const auto g = resample_geometry(s);
        for (int frames = 1; frames <= 5; ++frames) {
            const int len = frames * s;
            EXPECT_EQ((len + 2 * g.padding - (g.kernel - 1) - 1) / s + 1, frames) << s;
            EXPECT_EQ((frames - 1) * s - 2 * g.padding + g.kernel, len) << s;
        }
    }
}

TEST(Encoder, MiniatureShapes) {
    CodecConfig c = narrow({2, 2});
    Rng rng(1);
    Encoder enc(c, rng);
    Decoder dec(c, rng);
    for (int samples : {4, 8, 12}) {
        Rng r(samples);
        const Tensor z = enc.forward(random_tensor(r, {1, samples}, 0.3));
        EXPECT_EQ(z.shape(), (Shape{samples / 4, 8}));
        EXPECT_EQ(dec.forward(z, 1).shape(), (Shape{1, samples}));
    }
}

TEST(Encoder, PaperStridesGiveFramesAtFiveAndTwelvePointFiveHz) {
    Rng rng(2);
    {
        CodecConfig c = narrow({8, 5, 5, 4, 4});
        Encoder enc(c, rng);
        Decoder dec(c, rng);
        Rng r(3);
        const Tensor z = enc.forward(random_tensor(r, {1, 16000}, 0.3));
        EXPECT_EQ(z.dim(0), 5);
        EXPECT_EQ(dec.forward(z, 1).dim(1), 16000);
        EXPECT_EQ(enc.forward(random_tensor(r, {1, 3200}, 0.3)).dim(0), 1);
        EXPECT_EQ(dec.forward(random_tensor(r, {1, 8}), 1).dim(1), 3200);
    }
    {
        CodecConfig c = narrow({5, 4, 4, 4, 4});
        Encoder enc(c, rng);
        Rng r(4);
        // Two seconds is 25 frames at 12.5 Hz.
        EXPECT_EQ(enc.forward(random_tensor(r, {1, 32000}, 0.3)).dim(0), 25);
    }
}

TEST(Encoder, Errors) {
    CodecConfig c = narrow({2, 2});
    Rng rng(5);
    Encoder enc(c, rng);
    Decoder dec(c, rng);
    EXPECT_EQ(kind_of([&] { enc.forward(Tensor::zeros({1, 6})); }), ErrorKind::Alignment);
    EXPECT_EQ(kind_of([&] { dec.forward(Tensor::zeros({3, 7}), 1); }), ErrorKind::Configuration);
    CodecConfig bad = c;
    bad.bottleneck.heads = 3;
    EXPECT_EQ(kind_of([&] { bad.validate(); }), ErrorKind::Configuration);
}

TEST(Encoder, DeterministicAndBounded) {
    CodecConfig c = narrow({2, 4});
    Rng a(9), b(9);
    Encoder e1(c, a), e2(c, b);
    Decoder d1(c, a);
    Rng r(10);
    const Tensor x = random_tensor(r, {2, 32}, 0.5);
    EXPECT_EQ(e1.forward(x).to_vector(), e2.forward(x).to_vector());
    const Tensor y = d1.forward(e1.forward(x), 2);
    for (double v : y.data()) {
        EXPECT_LE(std::abs(v), 1.0);
    }
}

TEST(Encoder, BatchRowsMatchSingleItems) {
    CodecConfig c = narrow({2, 2});
    Rng rng(11);
    Encoder enc(c, rng);
    Rng r(12);
    const Tensor x = random_tensor(r, {2, 16}, 0.5);
    const Tensor both = enc.forward(x);
    const Tensor second = enc.forward(Tensor::from({1, 16}, std::vector<double>(x.data().begin() + 16, x.data().end())));
    for (std::size_t i = 0; i < second.numel(); ++i) {
        EXPECT_NEAR(both[both.numel() / 2 + i], second[i], 1e-12);
    }
}

TEST(Encoder, BottleneckMixesFrames) {
    CodecConfig c = narrow({2, 2});
    Rng rng(13);
    Encoder enc(c, rng);
    Rng r(14);
    const Tensor f = enc.features(random_tensor(r, {1, 24}, 0.5));
    ASSERT_EQ(f.dim(0), 6);
    const auto base = enc.bottleneck(f, 1, 6).to_vector();
    Tensor moved = f.clone();
    for (int j = 0; j < 8; ++j) {
        // Not a constant shift, which the layer norms would erase.
        moved.mutable_data()[2 * 8 + j] += 0.1 * (j + 1);
    }
    const auto after = enc.bottleneck(moved, 1, 6).to_vector();
    for (int t = 0; t < 6; ++t) {
        if (t == 2) {
            continue;
        }
        double diff = 0.0;
        for (int j = 0; j < 8; ++j) {
            diff += std::abs(after[t * 8 + j] - base[t * 8 + j]);
        }
        EXPECT_GT(diff, 1e-9) << "frame " << t;
    }
}
