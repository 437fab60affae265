#pragma once

// Dense loop kernels behind the autodiff ops. Every kernel exists twice: a
// serial reference in ucodec::kernels::serial and an OpenMP version in
// ucodec::kernels::parallel. Both split work by output row/channel and share
// the same per-row loop bodies, so their results are bit-identical for any
// thread count. The unqualified entry points dispatch on max_threads().

#include <span>

namespace ucodec::kernels {

struct Conv1dGeometry {
    int batch = 1;
    int in_channels = 1;
    int out_channels = 1;
    int length = 1;
    int kernel = 1;
    int stride = 1;
    int dilation = 1;
    int padding = 0;

    // Floor division that stays correct for negative numerators.
    int out_length() const {
        const int span = length + 2 * padding - dilation * (kernel - 1) - 1;
        return (span >= 0 ? span / stride : -((-span + stride - 1) / stride)) + 1;
    }
};

struct ConvTranspose1dGeometry {
    int batch = 1;
    int in_channels = 1;
    int out_channels = 1;
    int length = 1;
    int kernel = 1;
    int stride = 1;
    int padding = 0;

    int out_length() const { return (length - 1) * stride - 2 * padding + kernel; }
};

struct Conv2dGeometry {
    int in_channels = 1;
    int out_channels = 1;
    int height = 1;
    int width = 1;
    int kernel_h = 1;
    int kernel_w = 1;
    int stride_h = 1;
    int stride_w = 1;
    int dilation_h = 1;
    int dilation_w = 1;
    int padding_h = 0;
    int padding_w = 0;

    int out_height() const {
        return (height + 2 * padding_h - dilation_h * (kernel_h - 1) - 1) / stride_h + 1;
    }
    int out_width() const {
        return (width + 2 * padding_w - dilation_w * (kernel_w - 1) - 1) / stride_w + 1;
    }
};

// C[m,n] (+)= op(A)[m,k] * op(B)[k,n], all row-major. op(A) = A^T when
// trans_a, in which case A is stored [k,m]; likewise for B ([n,k]).
struct GemmShape {
    bool trans_a = false;
    bool trans_b = false;
    int m = 0;
    int n = 0;
    int k = 0;
};

#define UCODEC_KERNEL_DECLS                                                                    \
    void gemm(const GemmShape& s, std::span<const double> a, std::span<const double> b,       \
              std::span<double> c, bool accumulate);                                           \
    void conv1d_forward(const Conv1dGeometry& g, std::span<const double> x,                    \
                        std::span<const double> w, std::span<const double> bias,               \
                        std::span<double> y);                                                  \
    void conv1d_backward_input(const Conv1dGeometry& g, std::span<const double> dy,            \
                               std::span<const double> w, std::span<double> dx);               \
    void conv1d_backward_weight(const Conv1dGeometry& g, std::span<const double> dy,           \
                                std::span<const double> x, std::span<double> dw);              \
    void conv_transpose1d_forward(const ConvTranspose1dGeometry& g, std::span<const double> x,  \
                                  std::span<const double> w, std::span<const double> bias,     \
                                  std::span<double> y);                                        \
    void conv_transpose1d_backward_input(const ConvTranspose1dGeometry& g,                     \
                                         std::span<const double> dy,                           \
                                         std::span<const double> w, std::span<double> dx);     \
    void conv_transpose1d_backward_weight(const ConvTranspose1dGeometry& g,                    \
                                          std::span<const double> dy,                          \
                                          std::span<const double> x, std::span<double> dw);    \
    void conv2d_forward(const Conv2dGeometry& g, std::span<const double> x,                     \
                        std::span<const double> w, std::span<const double> bias,               \
                        std::span<double> y);                                                  \
    void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> dy,            \
                               std::span<const double> w, std::span<double> dx);               \
    void conv2d_backward_weight(const Conv2dGeometry& g, std::span<const double> dy,           \
                                std::span<const double> x, std::span<double> dw);

// Backward kernels accumulate into their output buffers; forward kernels
// overwrite. An empty bias span means no bias.
namespace serial {
UCODEC_KERNEL_DECLS
}  // namespace serial

namespace parallel {
UCODEC_KERNEL_DECLS
}  // namespace parallel

UCODEC_KERNEL_DECLS

#undef UCODEC_KERNEL_DECLS

// Thread cap for the dispatching entry points. Initialised from the
// UCODEC_THREADS environment variable (default 1).
int max_threads();
void set_max_threads(int threads);

}  // namespace ucodec::kernels
