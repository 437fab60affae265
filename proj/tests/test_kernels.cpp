#include <gtest/gtest.h>

#include <vector>

#include "support/gradcheck.hpp"
#include "ucodec/kernels.hpp"

namespace k = ucodec::kernels;
using ucodec::Rng;
using ucodec::normal_values;

namespace {

std::vector<double> naive_conv1d(const k::Conv1dGeometry& g, const std::vector<double>& x,
                                 const std::vector<double>& w, const std::vector<double>& b) {
    const int lout = g.out_length();
    std::vector<double> y(static_cast<std::size_t>(g.batch) * g.out_channels * lout, 0.0);
    for (int n = 0; n < g.batch; ++n) {
        for (int c = 0; c < g.out_channels; ++c) {
            for (int t = 0; t < lout; ++t) {
                double acc = b.empty() ? 0.0 : b[c];
                for (int i = 0; i < g.in_channels; ++i) {
                    for (int kk = 0; kk < g.kernel; ++kk) {
                        const int src = t * g.stride + kk * g.dilation - g.padding;
                        if (src >= 0 && src < g.length) {
                            acc += x[(static_cast<std::size_t>(n) * g.in_channels + i) * g.length + src] *
                                   w[(static_cast<std::size_t>(c) * g.in_channels + i) * g.kernel + kk];
                        }
                    }
                }
                y[(static_cast<std::size_t>(n) * g.out_channels + c) * lout + t] = acc;
            }
        }
    }
    return y;
}

std::vector<double> naive_conv_transpose1d(const k::ConvTranspose1dGeometry& g, const std::vector<double>& x,
                                           const std::vector<double>& w, const std::vector<double>& b) {
    const int lout = g.out_length();
    std::vector<double> y(static_cast<std::size_t>(g.batch) * g.out_channels * lout, 0.0);
    for (int n = 0; n < g.batch; ++n) {
        for (int o = 0; o < g.out_channels; ++o) {
            for (int t = 0; t < lout; ++t) {
                y[(static_cast<std::size_t>(n) * g.out_channels + o) * lout + t] = b.empty() ? 0.0 : b[o];
            }
        }
        for (int i = 0; i < g.in_channels; ++i) {
            for (int m = 0; m < g.length; ++m) {
                for (int o = 0; o < g.out_channels; ++o) {
                    for (int kk = 0; kk < g.kernel; ++kk) {
                        const int t = m * g.stride + kk - g.padding;
                        if (t >= 0 && t < lout) {
                            y[(static_cast<std::size_t>(n) * g.out_channels + o) * lout + t] +=
                                x[(static_cast<std::size_t>(n) * g.in_channels + i) * g.length + m] *
                                w[(static_cast<std::size_t>(i) * g.out_channels + o) * g.kernel + kk];
                        }
                    }
                }
            }
        }
    }
    return y;
}

class ThreadCap {
public:
    explicit ThreadCap(int n) : saved_(k::max_threads()) { k::set_max_threads(n); }
    ~ThreadCap() { k::set_max_threads(saved_); }

private:
    int saved_;
};

}  // namespace

TEST(Conv1dKernel, DifferenceKernel) {
    k::Conv1dGeometry g{.length = 4, .kernel = 3};
    std::vector<double> y(2);
    k::serial::conv1d_forward(g, std::vector<double>{1, 2, 3, 4}, std::vector<double>{1, 0, -1}, {}, y);
    EXPECT_EQ(y, (std::vector<double>{-2, -2}));
}

TEST(Conv1dKernel, StridedIdentitySubsamples) {
    k::Conv1dGeometry g{.length = 4, .kernel = 1, .stride = 2};
    std::vector<double> y(2);
    k::serial::conv1d_forward(g, std::vector<double>{1, 2, 3, 4}, std::vector<double>{1}, {}, y);
    EXPECT_EQ(y, (std::vector<double>{1, 3}));
}

TEST(Conv1dKernel, MatchesLoopNestOracle) {
    Rng rng(7);
    k::Conv1dGeometry g{.batch = 2, .in_channels = 3, .out_channels = 4, .length = 17, .kernel = 5, .stride = 3};
    const auto x = normal_values(rng, 2 * 3 * 17, 1.0);
    const auto w = normal_values(rng, 4 * 3 * 5, 1.0);
    const auto b = normal_values(rng, 4, 1.0);
    const auto expected = naive_conv1d(g, x, w, b);
    std::vector<double> y(expected.size());
    k::serial::conv1d_forward(g, x, w, b, y);
    for (std::size_t i = 0; i < y.size(); ++i) {
        EXPECT_NEAR(y[i], expected[i], 1e-12);
    }
}

TEST(Conv1dKernel, LengthFormulaOverGrid) {
    Rng rng(3);
    for (int stride = 1; stride <= 4; ++stride) {
        for (int dilation = 1; dilation <= 3; ++dilation) {
            for (int padding = 0; padding <= 2; ++padding) {
                k::Conv1dGeometry g{.in_channels = 2, .out_channels = 2, .length = 13, .kernel = 3,
                                    .stride = stride, .dilation = dilation, .padding = padding};
                const int expected = (13 + 2 * padding - dilation * 2 - 1) / stride + 1;
                ASSERT_EQ(g.out_length(), expected);
                const auto x = normal_values(rng, 2 * 13, 1.0);
                const auto w = normal_values(rng, 2 * 2 * 3, 1.0);
                const auto ref = naive_conv1d(g, x, w, {});
                std::vector<double> y(ref.size());
                k::serial::conv1d_forward(g, x, w, {}, y);
                for (std::size_t i = 0; i < y.size(); ++i) {
                    ASSERT_NEAR(y[i], ref[i], 1e-12);
                }
            }
        }
    }
}

TEST(ConvTranspose1dKernel, KernelStamping) {
    k::ConvTranspose1dGeometry g{.length = 2, .kernel = 2, .stride = 2};
    std::vector<double> y(4);
    k::serial::conv_transpose1d_forward(g, std::vector<double>{1, 2}, std::vector<double>{1, 1}, {}, y);
    EXPECT_EQ(y, (std::vector<double>{1, 1, 2, 2}));

    k::ConvTranspose1dGeometry single{.length = 1, .kernel = 3};
    std::vector<double> z(3);
    k::serial::conv_transpose1d_forward(single, std::vector<double>{5}, std::vector<double>{1, 0, 0}, {}, z);
    EXPECT_EQ(z, (std::vector<double>{5, 0, 0}));
}

TEST(ConvTranspose1dKernel, MatchesScatterOracleOverGrid) {
    Rng rng(11);
    for (int stride = 1; stride <= 4; ++stride) {
        for (int padding = 0; padding <= 2; ++padding) {
            k::ConvTranspose1dGeometry g{.batch = 2, .in_channels = 3, .out_channels = 2, .length = 6, .kernel = 5,
                                         .stride = stride, .padding = padding};
            ASSERT_EQ(g.out_length(), 5 * stride - 2 * padding + 5);
            const auto x = normal_values(rng, 2 * 3 * 6, 1.0);
            const auto w = normal_values(rng, 3 * 2 * 5, 1.0);
            const auto b = normal_values(rng, 2, 1.0);
            const auto ref = naive_conv_transpose1d(g, x, w, b);
            std::vector<double> y(ref.size());
            k::serial::conv_transpose1d_forward(g, x, w, b, y);
            for (std::size_t i = 0; i < y.size(); ++i) {
                ASSERT_NEAR(y[i], ref[i], 1e-12);
            }
        }
    }
}

TEST(Gemm, AllTransposeCombinationsMatchTripleLoop) {
    Rng rng(5);
    const int m = 7;
    const int n = 5;
    const int kk = 9;
    for (int ta = 0; ta < 2; ++ta) {
        for (int tb = 0; tb < 2; ++tb) {
            const auto a = normal_values(rng, m * kk, 1.0);
            const auto b = normal_values(rng, kk * n, 1.0);
            std::vector<double> c(m * n, 0.5);
            k::serial::gemm({ta == 1, tb == 1, m, n, kk}, a, b, c, true);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    double acc = 0.5;
                    for (int p = 0; p < kk; ++p) {
                        const double av = ta ? a[p * m + i] : a[i * kk + p];
                        const double bv = tb ? b[j * kk + p] : b[p * n + j];
                        acc += av * bv;
                    }
                    EXPECT_NEAR(c[i * n + j], acc, 1e-12);
                }
            }
        }
    }
}

// The OpenMP kernels split work along the same rows as the serial ones, so
// any thread count reproduces the serial bits.
TEST(ParallelKernels, BitIdenticalToSerial) {
    ThreadCap cap(4);
    Rng rng(99);
    {
        k::GemmShape s{false, true, 33, 17, 29};
        const auto a = normal_values(rng, 33 * 29, 1.0);
        const auto b = normal_values(rng, 17 * 29, 1.0);
        std::vector<double> c1(33 * 17), c2(33 * 17);
        k::serial::gemm(s, a, b, c1, false);
        k::parallel::gemm(s, a, b, c2, false);
        EXPECT_EQ(c1, c2);
        s.trans_b = false;
        s.trans_a = true;
        k::serial::gemm(s, a, b, c1, true);
        k::parallel::gemm(s, a, b, c2, true);
        EXPECT_EQ(c1, c2);
    }
    {
        k::Conv1dGeometry g{.batch = 2, .in_channels = 5, .out_channels = 6, .length = 40, .kernel = 7,
                            .stride = 2, .dilation = 3, .padding = 4};
        const int lout = g.out_length();
        const auto x = normal_values(rng, 2 * 5 * 40, 1.0);
        const auto w = normal_values(rng, 6 * 5 * 7, 1.0);
        const auto b = normal_values(rng, 6, 1.0);
        const auto dy = normal_values(rng, 2 * 6 * lout, 1.0);
        std::vector<double> y1(dy.size()), y2(dy.size());
        k::serial::conv1d_forward(g, x, w, b, y1);
        k::parallel::conv1d_forward(g, x, w, b, y2);
        EXPECT_EQ(y1, y2);
        std::vector<double> dx1(x.size()), dx2(x.size()), dw1(w.size()), dw2(w.size());
        k::serial::conv1d_backward_input(g, dy, w, dx1);
        k::parallel::conv1d_backward_input(g, dy, w, dx2);
        EXPECT_EQ(dx1, dx2);
        k::serial::conv1d_backward_weight(g, dy, x, dw1);
        k::parallel::conv1d_backward_weight(g, dy, x, dw2);
        EXPECT_EQ(dw1, dw2);
    }
    {
        k::ConvTranspose1dGeometry g{.batch = 2, .in_channels = 4, .out_channels = 3, .length = 11, .kernel = 8,
                                     .stride = 4, .padding = 2};
        const int lout = g.out_length();
        const auto x = normal_values(rng, 2 * 4 * 11, 1.0);
        const auto w = normal_values(rng, 4 * 3 * 8, 1.0);
        const auto dy = normal_values(rng, 2 * 3 * lout, 1.0);
        std::vector<double> y1(dy.size()), y2(dy.size());
        k::serial::conv_transpose1d_forward(g, x, w, {}, y1);
        k::parallel::conv_transpose1d_forward(g, x, w, {}, y2);
        EXPECT_EQ(y1, y2);
        std::vector<double> dx1(x.size()), dx2(x.size()), dw1(w.size()), dw2(w.size());
        k::serial::conv_transpose1d_backward_input(g, dy, w, dx1);
        k::parallel::conv_transpose1d_backward_input(g, dy, w, dx2);
        EXPECT_EQ(dx1, dx2);
        k::serial::conv_transpose1d_backward_weight(g, dy, x, dw1);
        k::parallel::conv_transpose1d_backward_weight(g, dy, x, dw2);
        EXPECT_EQ(dw1, dw2);
    }
    {
        k::Conv2dGeometry g{.in_channels = 2, .out_channels = 3, .height = 12, .width = 9, .kernel_h = 3,
                            .kernel_w = 5, .stride_h = 1, .stride_w = 2, .dilation_h = 2, .dilation_w = 1,
                            .padding_h = 2, .padding_w = 2};
        const int n_out = 3 * g.out_height() * g.out_width();
        const auto x = normal_values(rng, 2 * 12 * 9, 1.0);
        const auto w = normal_values(rng, 3 * 2 * 3 * 5, 1.0);
        const auto b = normal_values(rng, 3, 1.0);
        const auto dy = normal_values(rng, n_out, 1.0);
        std::vector<double> y1(n_out), y2(n_out);
        k::serial::conv2d_forward(g, x, w, b, y1);
        k::parallel::conv2d_forward(g, x, w, b, y2);
        EXPECT_EQ(y1, y2);
        std::vector<double> dx1(x.size()), dx2(x.size()), dw1(w.size()), dw2(w.size());
        k::serial::conv2d_backward_input(g, dy, w, dx1);
        k::parallel::conv2d_backward_input(g, dy, w, dx2);
        EXPECT_EQ(dx1, dx2);
        k::serial::conv2d_backward_weight(g, dy, x, dw1);
        k::parallel::conv2d_backward_weight(g, dy, x, dw2);
        EXPECT_EQ(dw1, dw2);
    }
}

TEST(ParallelKernels, DispatchFollowsThreadCap) {
    ThreadCap cap(1);
    EXPECT_EQ(k::max_threads(), 1);
    k::set_max_threads(0);
    EXPECT_EQ(k::max_threads(), 1);
    k::set_max_threads(3);
    EXPECT_EQ(k::max_threads(), 3);
}
