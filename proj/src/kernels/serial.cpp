#include "ucodec/kernels.hpp"

#include "bodies.hpp"

namespace ucodec::kernels::serial {

namespace {
const double* ptr_or_null(std::span<const double> s) { return s.empty() ? nullptr : s.data(); }
}  // namespace


void gemm(const GemmShape& s, std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate) {
    for (int i = 0; i < s.m; ++i) {
        detail::gemm_row(s, a.data(), b.data(), c.data(), accumulate, i);
    }
}

void conv1d_forward(const Conv1dGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
    const double* bp = ptr_or_null(bias);
    for (int b = 0; b < g.batch; ++b) {
        for (int c = 0; c < g.out_channels; ++c) {
            detail::conv1d_forward_row(g, x.data(), w.data(), bp, y.data(), b, c);
        }
    }
}

void conv1d_backward_input(const Conv1dGeometry& g, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx) {
    for (int b = 0; b < g.batch; ++b) {
        for (int i = 0; i < g.in_channels; ++i) {
            detail::conv1d_backward_input_row(g, dy.data(), w.data(), dx.data(), b, i);
        }
    }
}

void conv1d_backward_weight(const Conv1dGeometry& g, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw) {
    for (int c = 0; c < g.out_channels; ++c) {
        detail::conv1d_backward_weight_row(g, dy.data(), x.data(), dw.data(), c);
    }
}

void conv_transpose1d_forward(const ConvTranspose1dGeometry& g, std::span<const double> x,
                              std::span<const double> w, std::span<const double> bias, std::span<double> y) {
    const double* bp = ptr_or_null(bias);
    for (int b = 0; b < g.batch; ++b) {
        for (int o = 0; o < g.out_channels; ++o) {
            detail::conv_transpose1d_forward_row(g, x.data(), w.data(), bp, y.data(), b, o);
        }
    }
}

void conv_transpose1d_backward_input(const ConvTranspose1dGeometry& g, std::span<const double> dy,
                                     std::span<const double> w, std::span<double> dx) {
    for (int b = 0; b < g.batch; ++b) {
        for (int i = 0; i < g.in_channels; ++i) {
            detail::conv_transpose1d_backward_input_row(g, dy.data(), w.data(), dx.data(), b, i);
        }
    }
}

void conv_transpose1d_backward_weight(const ConvTranspose1dGeometry& g, std::span<const double> dy,
                                      std::span<const double> x, std::span<double> dw) {
    for (int i = 0; i < g.in_channels; ++i) {
        detail::conv_transpose1d_backward_weight_row(g, dy.data(), x.data(), dw.data(), i);
    }
}

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
    const double* bp = ptr_or_null(bias);
    for (int c = 0; c < g.out_channels; ++c) {
        detail::conv2d_forward_row(g, x.data(), w.data(), bp, y.data(), c);
    }
}

void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx) {
    for (int i = 0; i < g.in_channels; ++i) {
        detail::conv2d_backward_input_row(g, dy.data(), w.data(), dx.data(), i);
    }
}

void conv2d_backward_weight(const Conv2dGeometry& g, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw) {
    for (int c = 0; c < g.out_channels; ++c) {
        detail::conv2d_backward_weight_row(g, dy.data(), x.data(), dw.data(), c);
    }
}

}  // namespace ucodec::kernels::serial
