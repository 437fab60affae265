#include <cmath>

#include "op_util.hpp"
#include "ucodec/kernels.hpp"
#include "ucodec/ops.hpp"

namespace ucodec::ops {

using detail::grad_of;
using detail::record;
namespace kn = ucodec::kernels;

Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a, bool trans_b) {
    detail::check_rank(a, 2, "matmul");
    detail::check_rank(b, 2, "matmul");
    const int m = trans_a ? a.dim(1) : a.dim(0);
    const int k = trans_a ? a.dim(0) : a.dim(1);
    const int kb = trans_b ? b.dim(1) : b.dim(0);
    const int n = trans_b ? b.dim(0) : b.dim(1);
    require(k == kb, ErrorKind::Configuration,
            "matmul inner dimension mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    std::vector<double> out(static_cast<std::size_t>(m) * n);
    kn::gemm({trans_a, trans_b, m, n, k}, a.data(), b.data(), out, false);
    Tensor y = ucodec::detail::make_output({m, n}, std::move(out));
    if (ucodec::detail::needs_tape({&a, &b})) {
        record("matmul", y, [ai = a.impl(), bi = b.impl(), trans_a, trans_b, m, n, k](std::span<const double> gy) {
            auto ga = grad_of(ai);
            if (!ga.empty()) {
                if (!trans_a) {
                    kn::gemm({false, !trans_b, m, k, n}, gy, bi->value, ga, true);
                } else {
                    kn::gemm({trans_b, true, k, m, n}, bi->value, gy, ga, true);
                }
            }
            auto gb = grad_of(bi);
            if (!gb.empty()) {
                if (!trans_b) {
                    kn::gemm({!trans_a, false, k, n, m}, ai->value, gy, gb, true);
                } else {
                    kn::gemm({true, trans_a, n, k, m}, gy, ai->value, gb, true);
                }
            }
        });
    }
    return y;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    detail::check_rank(x, 2, "linear");
    detail::check_rank(w, 2, "linear");
    const int rows = x.dim(0);
    const int in = x.dim(1);
    const int out_dim = w.dim(0);
    require(w.dim(1) == in, ErrorKind::Configuration,
            "linear: input width " + std::to_string(in) + " vs weight " + shape_string(w.shape()));
    require(!b.defined() || static_cast<int>(b.numel()) == out_dim, ErrorKind::Configuration,
            "linear: bias length mismatch");
    std::vector<double> out(static_cast<std::size_t>(rows) * out_dim);
    kn::gemm({false, true, rows, out_dim, in}, x.data(), w.data(), out, false);
    if (b.defined()) {
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < out_dim; ++c) {
                out[static_cast<std::size_t>(r) * out_dim + c] += b[c];
            }
        }
    }
    Tensor y = ucodec::detail::make_output({rows, out_dim}, std::move(out));
    if (ucodec::detail::needs_tape({&x, &w, &b})) {
        detail::ImplPtr bi = b.defined() ? b.impl() : nullptr;
        record("linear", y, [xi = x.impl(), wi = w.impl(), bi, rows, in, out_dim](std::span<const double> gy) {
            auto gx = grad_of(xi);
            if (!gx.empty()) {
                kn::gemm({false, false, rows, in, out_dim}, gy, wi->value, gx, true);
            }
            auto gw = grad_of(wi);
            if (!gw.empty()) {
                kn::gemm({true, false, out_dim, in, rows}, gy, xi->value, gw, true);
            }
            auto gb = grad_of(bi);
            if (!gb.empty()) {
                for (int r = 0; r < rows; ++r) {
                    for (int c = 0; c < out_dim; ++c) {
                        gb[c] += gy[static_cast<std::size_t>(r) * out_dim + c];
                    }
                }
            }
        });
    }
    return y;
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
    detail::check_rank(a, 3, "bmm");
    detail::check_rank(b, 3, "bmm");
    const int batch = a.dim(0);
    const int m = a.dim(1);
    const int k = a.dim(2);
    const int n = trans_b ? b.dim(1) : b.dim(2);
    require(b.dim(0) == batch && (trans_b ? b.dim(2) : b.dim(1)) == k, ErrorKind::Configuration,
            "bmm shape mismatch " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    const std::size_t sa = static_cast<std::size_t>(m) * k;
    const std::size_t sb = static_cast<std::size_t>(k) * n;
    const std::size_t sc = static_cast<std::size_t>(m) * n;
    std::vector<double> out(batch * sc);
    for (int i = 0; i < batch; ++i) {
        kn::gemm({false, trans_b, m, n, k}, a.data().subspan(i * sa, sa), b.data().subspan(i * sb, sb),
                 std::span<double>(out).subspan(i * sc, sc), false);
    }
    Tensor y = ucodec::detail::make_output({batch, m, n}, std::move(out));
    if (ucodec::detail::needs_tape({&a, &b})) {
        record("bmm", y, [ai = a.impl(), bi = b.impl(), trans_b, batch, m, n, k, sa, sb, sc](std::span<const double> gy) {
            auto ga = grad_of(ai);
            auto gb = grad_of(bi);
            const std::span<const double> av(ai->value);
            const std::span<const double> bv(bi->value);
            for (int i = 0; i < batch; ++i) {
                const auto g = gy.subspan(i * sc, sc);
                if (!ga.empty()) {
                    kn::gemm({false, !trans_b, m, k, n}, g, bv.subspan(i * sb, sb), ga.subspan(i * sa, sa), true);
                }
                if (!gb.empty()) {
                    if (!trans_b) {
                        kn::gemm({true, false, k, n, m}, av.subspan(i * sa, sa), g, gb.subspan(i * sb, sb), true);
                    } else {
                        kn::gemm({true, false, n, k, m}, g, av.subspan(i * sa, sa), gb.subspan(i * sb, sb), true);
                    }
                }
            }
        });
    }
    return y;
}

namespace {

void bias_grad(std::span<double> gb, std::span<const double> gy, int batch, int channels, std::size_t per_channel) {
    if (gb.empty()) {
        return;
    }
    for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < channels; ++c) {
            const auto row = gy.subspan((static_cast<std::size_t>(b) * channels + c) * per_channel, per_channel);
            double acc = 0.0;
            for (double v : row) {
                acc += v;
            }
            gb[c] += acc;
        }
    }
}

std::span<const double> bias_span(const Tensor& bias) {
    return bias.defined() ? bias.data() : std::span<const double>{};
}

}  // namespace

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int dilation, int padding) {
    require(x.rank() == 2 || x.rank() == 3, ErrorKind::Configuration,
            "conv1d: input must be [Cin,L] or [B,Cin,L], got " + shape_string(x.shape()));
    detail::check_rank(w, 3, "conv1d");
    require(stride >= 1 && dilation >= 1 && padding >= 0, ErrorKind::Configuration,
            "conv1d: stride and dilation must be >= 1 and padding >= 0");
    const bool batched = x.rank() == 3;
    kn::Conv1dGeometry g;
    g.batch = batched ? x.dim(0) : 1;
    g.in_channels = x.dim(batched ? 1 : 0);
    g.length = x.dim(batched ? 2 : 1);
    g.out_channels = w.dim(0);
    g.kernel = w.dim(2);
    g.stride = stride;
    g.dilation = dilation;
    g.padding = padding;
    require(w.dim(1) == g.in_channels, ErrorKind::Configuration,
            "conv1d: weight " + shape_string(w.shape()) + " does not match input channels " + std::to_string(g.in_channels));
    require(!bias.defined() || static_cast<int>(bias.numel()) == g.out_channels, ErrorKind::Configuration,
            "conv1d: bias length mismatch");
    const int lout = g.out_length();
    require(lout >= 1, ErrorKind::InputTooShort,
            "conv1d: input length " + std::to_string(g.length) + " too short for kernel " + std::to_string(g.kernel));
    std::vector<double> out(static_cast<std::size_t>(g.batch) * g.out_channels * lout);
    kn::conv1d_forward(g, x.data(), w.data(), bias_span(bias), out);
    Shape shape = batched ? Shape{g.batch, g.out_channels, lout} : Shape{g.out_channels, lout};
    Tensor y = ucodec::detail::make_output(std::move(shape), std::move(out));
    if (ucodec::detail::needs_tape({&x, &w, &bias})) {
        detail::ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
        record("conv1d", y, [xi = x.impl(), wi = w.impl(), bi, g, lout](std::span<const double> gy) {
            auto gx = grad_of(xi);
            if (!gx.empty()) {
                kn::conv1d_backward_input(g, gy, wi->value, gx);
            }
            auto gw = grad_of(wi);
            if (!gw.empty()) {
                kn::conv1d_backward_weight(g, gy, xi->value, gw);
            }
            bias_grad(grad_of(bi), gy, g.batch, g.out_channels, static_cast<std::size_t>(lout));
        });
    }
    return y;
}

Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int padding) {
    require(x.rank() == 2 || x.rank() == 3, ErrorKind::Configuration,
            "conv_transpose1d: input must be [Cin,L] or [B,Cin,L], got " + shape_string(x.shape()));
    detail::check_rank(w, 3, "conv_transpose1d");
    require(stride >= 1 && padding >= 0, ErrorKind::Configuration, "conv_transpose1d: invalid stride/padding");
    const bool batched = x.rank() == 3;
    kn::ConvTranspose1dGeometry g;
    g.batch = batched ? x.dim(0) : 1;
    g.in_channels = x.dim(batched ? 1 : 0);
    g.length = x.dim(batched ? 2 : 1);
    g.out_channels = w.dim(1);
    g.kernel = w.dim(2);
    g.stride = stride;
    g.padding = padding;
    require(w.dim(0) == g.in_channels, ErrorKind::Configuration,
            "conv_transpose1d: weight " + shape_string(w.shape()) + " does not match input channels");
    require(!bias.defined() || static_cast<int>(bias.numel()) == g.out_channels, ErrorKind::Configuration,
            "conv_transpose1d: bias length mismatch");
    const int lout = g.out_length();
    require(lout >= 1, ErrorKind::InputTooShort, "conv_transpose1d: output length would be < 1");
    std::vector<double> out(static_cast<std::size_t>(g.batch) * g.out_channels * lout);
    kn::conv_transpose1d_forward(g, x.data(), w.data(), bias_span(bias), out);
    Shape shape = batched ? Shape{g.batch, g.out_channels, lout} : Shape{g.out_channels, lout};
    Tensor y = ucodec::detail::make_output(std::move(shape), std::move(out));
    if (ucodec::detail::needs_tape({&x, &w, &bias})) {
        detail::ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
        record("conv_transpose1d", y, [xi = x.impl(), wi = w.impl(), bi, g, lout](std::span<const double> gy) {
            auto gx = grad_of(xi);
            if (!gx.empty()) {
                kn::conv_transpose1d_backward_input(g, gy, wi->value, gx);
            }
            auto gw = grad_of(wi);
            if (!gw.empty()) {
                kn::conv_transpose1d_backward_weight(g, gy, xi->value, gw);
            }
            bias_grad(grad_of(bi), gy, g.batch, g.out_channels, static_cast<std::size_t>(lout));
        });
    }
    return y;
}

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, Pair stride, Pair dilation, Pair padding) {
    detail::check_rank(x, 3, "conv2d");
    detail::check_rank(w, 4, "conv2d");
    kn::Conv2dGeometry g;
    g.in_channels = x.dim(0);
    g.height = x.dim(1);
    g.width = x.dim(2);
    g.out_channels = w.dim(0);
    g.kernel_h = w.dim(2);
    g.kernel_w = w.dim(3);
    g.stride_h = stride.h;
    g.stride_w = stride.w;
    g.dilation_h = dilation.h;
    g.dilation_w = dilation.w;
    g.padding_h = padding.h;
    g.padding_w = padding.w;
    require(w.dim(1) == g.in_channels, ErrorKind::Configuration, "conv2d: weight/input channel mismatch");
    require(!bias.defined() || static_cast<int>(bias.numel()) == g.out_channels, ErrorKind::Configuration,
            "conv2d: bias length mismatch");
    const int oh = g.out_height();
    const int ow = g.out_width();
    require(oh >= 1 && ow >= 1 && g.height + 2 * g.padding_h >= g.dilation_h * (g.kernel_h - 1) + 1 &&
                g.width + 2 * g.padding_w >= g.dilation_w * (g.kernel_w - 1) + 1,
            ErrorKind::InputTooShort, "conv2d: input " + shape_string(x.shape()) + " too small for kernel");
    std::vector<double> out(static_cast<std::size_t>(g.out_channels) * oh * ow);
    kn::conv2d_forward(g, x.data(), w.data(), bias_span(bias), out);
    Tensor y = ucodec::detail::make_output({g.out_channels, oh, ow}, std::move(out));
    if (ucodec::detail::needs_tape({&x, &w, &bias})) {
        detail::ImplPtr bi = bias.defined() ? bias.impl() : nullptr;
        record("conv2d", y, [xi = x.impl(), wi = w.impl(), bi, g, oh, ow](std::span<const double> gy) {
            auto gx = grad_of(xi);
            if (!gx.empty()) {
                kn::conv2d_backward_input(g, gy, wi->value, gx);
            }
            auto gw = grad_of(wi);
            if (!gw.empty()) {
                kn::conv2d_backward_weight(g, gy, xi->value, gw);
            }
            bias_grad(grad_of(bi), gy, 1, g.out_channels, static_cast<std::size_t>(oh) * ow);
        });
    }
    return y;
}

Tensor weight_norm(const Tensor& v, const Tensor& g) {
    require(v.rank() >= 1, ErrorKind::Configuration, "weight_norm: scalar v");
    const int rows = v.dim(0);
    require(static_cast<int>(g.numel()) == rows, ErrorKind::Configuration,
            "weight_norm: g length " + std::to_string(g.numel()) + " vs " + std::to_string(rows) + " channels");
    const std::size_t width = v.numel() / static_cast<std::size_t>(rows);
    std::vector<double> norms(static_cast<std::size_t>(rows));
    std::vector<double> out(v.numel());
    for (int c = 0; c < rows; ++c) {
        const auto row = v.data().subspan(c * width, width);
        double ss = 0.0;
        for (double e : row) {
            ss += e * e;
        }
        const double n = std::sqrt(ss);
        require(n > 0.0, ErrorKind::NumericDegeneracy, "weight_norm: channel " + std::to_string(c) + " has zero norm");
        norms[c] = n;
        for (std::size_t j = 0; j < width; ++j) {
            out[c * width + j] = g[c] * row[j] / n;
        }
    }
    Tensor y = ucodec::detail::make_output(v.shape(), std::move(out));
    if (ucodec::detail::needs_tape({&v, &g})) {
        record("weight_norm", y, [vi = v.impl(), gi = g.impl(), norms = std::move(norms), rows, width](std::span<const double> gy) {
            auto gv = grad_of(vi);
            auto gg = grad_of(gi);
            for (int c = 0; c < rows; ++c) {
                const double n = norms[c];
                double dot = 0.0;
                for (std::size_t j = 0; j < width; ++j) {
                    dot += gy[c * width + j] * vi->value[c * width + j];
                }
                if (!gg.empty()) {
                    gg[c] += dot / n;
                }
                if (!gv.empty()) {
                    const double gc = gi->value[c];
                    for (std::size_t j = 0; j < width; ++j) {
                        gv[c * width + j] += gc / n * (gy[c * width + j] - dot * vi->value[c * width + j] / (n * n));
                    }
                }
            }
        });
    }
    return y;
}

}  // namespace ucodec::ops
