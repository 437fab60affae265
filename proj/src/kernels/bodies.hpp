#pragma once

// Per-row loop bodies shared by the serial and OpenMP kernels. Each body
// writes a disjoint slice of the output, which is what makes the two
// implementations agree bit for bit.

#include <algorithm>
#include <cstddef>

#include "ucodec/kernels.hpp"

namespace ucodec::kernels::detail {

inline int ceil_div_pos(int a, int b) { return (a + b - 1) / b; }

// Range of output positions t with 0 <= t*stride + offset < length, clipped
// to [0, out_len).
inline void valid_range(int offset, int stride, int length, int out_len, int& lo, int& hi) {
    lo = offset >= 0 ? 0 : ceil_div_pos(-offset, stride);
    const int last = length - 1 - offset;
    hi = last < 0 ? -1 : last / stride;
    hi = std::min(hi, out_len - 1);
}

inline void gemm_row(const GemmShape& s, const double* a, const double* b, double* c, bool accumulate,
                     int i) {
    double* crow = c + static_cast<std::size_t>(i) * s.n;
    if (!s.trans_b) {
        if (!accumulate) {
            std::fill(crow, crow + s.n, 0.0);
        }
        for (int p = 0; p < s.k; ++p) {
            const double av = s.trans_a ? a[static_cast<std::size_t>(p) * s.m + i]
                                        : a[static_cast<std::size_t>(i) * s.k + p];
            if (av == 0.0) {
                continue;
            }
            const double* brow = b + static_cast<std::size_t>(p) * s.n;
            for (int j = 0; j < s.n; ++j) {
                crow[j] += av * brow[j];
            }
        }
        return;
    }
    for (int j = 0; j < s.n; ++j) {
        const double* brow = b + static_cast<std::size_t>(j) * s.k;
        double acc0 = 0.0;
        double acc1 = 0.0;
        double acc2 = 0.0;
        double acc3 = 0.0;
        int p = 0;
        if (!s.trans_a) {
            const double* arow = a + static_cast<std::size_t>(i) * s.k;
            for (; p + 4 <= s.k; p += 4) {
                acc0 += arow[p] * brow[p];
                acc1 += arow[p + 1] * brow[p + 1];
                acc2 += arow[p + 2] * brow[p + 2];
                acc3 += arow[p + 3] * brow[p + 3];
            }
            for (; p < s.k; ++p) {
                acc0 += arow[p] * brow[p];
            }
        } else {
            for (; p < s.k; ++p) {
                acc0 += a[static_cast<std::size_t>(p) * s.m + i] * brow[p];
            }
        }
        const double acc = (acc0 + acc1) + (acc2 + acc3);
        crow[j] = accumulate ? crow[j] + acc : acc;
    }
}

inline void conv1d_forward_row(const Conv1dGeometry& g, const double* x, const double* w,
                               const double* bias, double* y, int b, int c) {
    const int lout = g.out_length();
    double* yrow = y + (static_cast<std::size_t>(b) * g.out_channels + c) * lout;
    std::fill(yrow, yrow + lout, bias != nullptr ? bias[c] : 0.0);
    for (int i = 0; i < g.in_channels; ++i) {
        const double* xrow = x + (static_cast<std::size_t>(b) * g.in_channels + i) * g.length;
        const double* wrow = w + (static_cast<std::size_t>(c) * g.in_channels + i) * g.kernel;
        for (int k = 0; k < g.kernel; ++k) {
            const double wv = wrow[k];
            const int off = k * g.dilation - g.padding;
            int lo = 0;
            int hi = 0;
            valid_range(off, g.stride, g.length, lout, lo, hi);
            if (g.stride == 1) {
                for (int t = lo; t <= hi; ++t) {
                    yrow[t] += wv * xrow[t + off];
                }
            } else {
                for (int t = lo; t <= hi; ++t) {
                    yrow[t] += wv * xrow[t * g.stride + off];
                }
            }
        }
    }
}

inline void conv1d_backward_input_row(const Conv1dGeometry& g, const double* dy, const double* w,
                                      double* dx, int b, int i) {
    const int lout = g.out_length();
    double* dxrow = dx + (static_cast<std::size_t>(b) * g.in_channels + i) * g.length;
    for (int c = 0; c < g.out_channels; ++c) {
        const double* dyrow = dy + (static_cast<std::size_t>(b) * g.out_channels + c) * lout;
        const double* wrow = w + (static_cast<std::size_t>(c) * g.in_channels + i) * g.kernel;
        for (int k = 0; k < g.kernel; ++k) {
            const double wv = wrow[k];
            const int off = k * g.dilation - g.padding;
            int lo = 0;
            int hi = 0;
            valid_range(off, g.stride, g.length, lout, lo, hi);
            for (int t = lo; t <= hi; ++t) {
                dxrow[t * g.stride + off] += wv * dyrow[t];
            }
        }
    }
}

inline void conv1d_backward_weight_row(const Conv1dGeometry& g, const double* dy, const double* x,
                                       double* dw, int c) {
    const int lout = g.out_length();
    for (int i = 0; i < g.in_channels; ++i) {
        double* dwrow = dw + (static_cast<std::size_t>(c) * g.in_channels + i) * g.kernel;
        for (int k = 0; k < g.kernel; ++k) {
            const int off = k * g.dilation - g.padding;
            int lo = 0;
            int hi = 0;
            valid_range(off, g.stride, g.length, lout, lo, hi);
            double acc = 0.0;
            for (int b = 0; b < g.batch; ++b) {
                const double* dyrow = dy + (static_cast<std::size_t>(b) * g.out_channels + c) * lout;
                const double* xrow = x + (static_cast<std::size_t>(b) * g.in_channels + i) * g.length;
                for (int t = lo; t <= hi; ++t) {
                    acc += dyrow[t] * xrow[t * g.stride + off];
                }
            }
            dwrow[k] += acc;
        }
    }
}

// Transposed convolution: y[o, m*stride + k - padding] += x[i, m] * w[i, o, k].
inline void conv_transpose1d_forward_row(const ConvTranspose1dGeometry& g, const double* x,
                                         const double* w, const double* bias, double* y, int b,
                                         int o) {
    const int lout = g.out_length();
    double* yrow = y + (static_cast<std::size_t>(b) * g.out_channels + o) * lout;
    std::fill(yrow, yrow + lout, bias != nullptr ? bias[o] : 0.0);
    for (int i = 0; i < g.in_channels; ++i) {
        const double* xrow = x + (static_cast<std::size_t>(b) * g.in_channels + i) * g.length;
        const double* wrow = w + (static_cast<std::size_t>(i) * g.out_channels + o) * g.kernel;
        for (int k = 0; k < g.kernel; ++k) {
            const double wv = wrow[k];
            const int off = k - g.padding;
            // positions m with 0 <= m*stride + off < lout, m in [0, length)
            int lo = 0;
            int hi = 0;
            valid_range(off, g.stride, lout, g.length, lo, hi);
            for (int m = lo; m <= hi; ++m) {
                yrow[m * g.stride + off] += wv * xrow[m];
            }
        }
    }
}

inline void conv_transpose1d_backward_input_row(const ConvTranspose1dGeometry& g, const double* dy,
                                                const double* w, double* dx, int b, int i) {
    const int lout = g.out_length();
    double* dxrow = dx + (static_cast<std::size_t>(b) * g.in_channels + i) * g.length;
    for (int o = 0; o < g.out_channels; ++o) {
        const double* dyrow = dy + (static_cast<std::size_t>(b) * g.out_channels + o) * lout;
        const double* wrow = w + (static_cast<std::size_t>(i) * g.out_channels + o) * g.kernel;
        for (int k = 0; k < g.kernel; ++k) {
            const double wv = wrow[k];
            const int off = k - g.padding;
            int lo = 0;
            int hi = 0;
            valid_range(off, g.stride, lout, g.length, lo, hi);
            for (int m = lo; m <= hi; ++m) {
                dxrow[m] += wv * dyrow[m * g.stride + off];
            }
        }
    }
}

inline void conv_transpose1d_backward_weight_row(const ConvTranspose1dGeometry& g, const double* dy,
                                                 const double* x, double* dw, int i) {
    const int lout = g.out_length();
    for (int o = 0; o < g.out_channels; ++o) {
        double* dwrow = dw + (static_cast<std::size_t>(i) * g.out_channels + o) * g.kernel;
        for (int k = 0; k < g.kernel; ++k) {
            const int off = k - g.padding;
            int lo = 0;
            int hi = 0;
            valid_range(off, g.stride, lout, g.length, lo, hi);
            double acc = 0.0;
            for (int b = 0; b < g.batch; ++b) {
                const double* dyrow = dy + (static_cast<std::size_t>(b) * g.out_channels + o) * lout;
                const double* xrow = x + (static_cast<std::size_t>(b) * g.in_channels + i) * g.length;
                for (int m = lo; m <= hi; ++m) {
                    acc += xrow[m] * dyrow[m * g.stride + off];
                }
            }
            dwrow[k] += acc;
        }
    }
}

inline void conv2d_forward_row(const Conv2dGeometry& g, const double* x, const double* w,
                               const double* bias, double* y, int c) {
    const int oh_n = g.out_height();
    const int ow_n = g.out_width();
    double* yc = y + static_cast<std::size_t>(c) * oh_n * ow_n;
    std::fill(yc, yc + static_cast<std::size_t>(oh_n) * ow_n, bias != nullptr ? bias[c] : 0.0);
    for (int i = 0; i < g.in_channels; ++i) {
        const double* xi = x + static_cast<std::size_t>(i) * g.height * g.width;
        for (int kh = 0; kh < g.kernel_h; ++kh) {
            const int offh = kh * g.dilation_h - g.padding_h;
            int hlo = 0;
            int hhi = 0;
            valid_range(offh, g.stride_h, g.height, oh_n, hlo, hhi);
            for (int kw = 0; kw < g.kernel_w; ++kw) {
                const double wv =
                    w[((static_cast<std::size_t>(c) * g.in_channels + i) * g.kernel_h + kh) * g.kernel_w + kw];
                const int offw = kw * g.dilation_w - g.padding_w;
                int wlo = 0;
                int whi = 0;
                valid_range(offw, g.stride_w, g.width, ow_n, wlo, whi);
                for (int oh = hlo; oh <= hhi; ++oh) {
                    const double* xrow = xi + static_cast<std::size_t>(oh * g.stride_h + offh) * g.width;
                    double* yrow = yc + static_cast<std::size_t>(oh) * ow_n;
                    for (int ow = wlo; ow <= whi; ++ow) {
                        yrow[ow] += wv * xrow[ow * g.stride_w + offw];
                    }
                }
            }
        }
    }
}

inline void conv2d_backward_input_row(const Conv2dGeometry& g, const double* dy, const double* w,
                                      double* dx, int i) {
    const int oh_n = g.out_height();
    const int ow_n = g.out_width();
    double* dxi = dx + static_cast<std::size_t>(i) * g.height * g.width;
    for (int c = 0; c < g.out_channels; ++c) {
        const double* dyc = dy + static_cast<std::size_t>(c) * oh_n * ow_n;
        for (int kh = 0; kh < g.kernel_h; ++kh) {
            const int offh = kh * g.dilation_h - g.padding_h;
            int hlo = 0;
            int hhi = 0;
            valid_range(offh, g.stride_h, g.height, oh_n, hlo, hhi);
            for (int kw = 0; kw < g.kernel_w; ++kw) {
                const double wv =
                    w[((static_cast<std::size_t>(c) * g.in_channels + i) * g.kernel_h + kh) * g.kernel_w + kw];
                const int offw = kw * g.dilation_w - g.padding_w;
                int wlo = 0;
                int whi = 0;
                valid_range(offw, g.stride_w, g.width, ow_n, wlo, whi);
                for (int oh = hlo; oh <= hhi; ++oh) {
                    double* dxrow = dxi + static_cast<std::size_t>(oh * g.stride_h + offh) * g.width;
                    const double* dyrow = dyc + static_cast<std::size_t>(oh) * ow_n;
                    for (int ow = wlo; ow <= whi; ++ow) {
                        dxrow[ow * g.stride_w + offw] += wv * dyrow[ow];
                    }
                }
            }
        }
    }
}

inline void conv2d_backward_weight_row(const Conv2dGeometry& g, const double* dy, const double* x,
                                       double* dw, int c) {
    const int oh_n = g.out_height();
    const int ow_n = g.out_width();
    const double* dyc = dy + static_cast<std::size_t>(c) * oh_n * ow_n;
    for (int i = 0; i < g.in_channels; ++i) {
        const double* xi = x + static_cast<std::size_t>(i) * g.height * g.width;
        for (int kh = 0; kh < g.kernel_h; ++kh) {
            const int offh = kh * g.dilation_h - g.padding_h;
            int hlo = 0;
            int hhi = 0;
            valid_range(offh, g.stride_h, g.height, oh_n, hlo, hhi);
            for (int kw = 0; kw < g.kernel_w; ++kw) {
                const int offw = kw * g.dilation_w - g.padding_w;
                int wlo = 0;
                int whi = 0;
                valid_range(offw, g.stride_w, g.width, ow_n, wlo, whi);
                double acc = 0.0;
                for (int oh = hlo; oh <= hhi; ++oh) {
                    const double* xrow = xi + static_cast<std::size_t>(oh * g.stride_h + offh) * g.width;
                    const double* dyrow = dyc + static_cast<std::size_t>(oh) * ow_n;
                    for (int ow = wlo; ow <= whi; ++ow) {
                        acc += dyrow[ow] * xrow[ow * g.stride_w + offw];
                    }
                }
                dw[((static_cast<std::size_t>(c) * g.in_channels + i) * g.kernel_h + kh) * g.kernel_w + kw] += acc;
            }
        }
    }
}

}  // namespace ucodec::kernels::detail
