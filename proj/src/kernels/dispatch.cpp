#include <algorithm>
#include <atomic>
#include <cstdlib>

#include "ucodec/kernels.hpp"

namespace ucodec::kernels {

namespace {

int threads_from_env() {
    const char* env = std::getenv("UCODEC_THREADS");
    if (env == nullptr) {
        return 1;
    }
    const int value = std::atoi(env);
    return std::max(1, value);
}

std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{threads_from_env()};
    return cap;
}

}  // namespace

int max_threads() { return thread_cap().load(std::memory_order_relaxed); }

void set_max_threads(int threads) { thread_cap().store(std::max(1, threads), std::memory_order_relaxed); }

#define UCODEC_DISPATCH(name, ...)  \
    if (max_threads() > 1) {        \
        parallel::name(__VA_ARGS__); \
    } else {                        \
        serial::name(__VA_ARGS__);   \
    }

void gemm(const GemmShape& s, std::span<const double> a, std::span<const double> b, std::span<double> c,
          bool accumulate) {
    UCODEC_DISPATCH(gemm, s, a, b, c, accumulate)
}

void conv1d_forward(const Conv1dGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
    UCODEC_DISPATCH(conv1d_forward, g, x, w, bias, y)
}

void conv1d_backward_input(const Conv1dGeometry& g, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx) {
    UCODEC_DISPATCH(conv1d_backward_input, g, dy, w, dx)
}

void conv1d_backward_weight(const Conv1dGeometry& g, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw) {
    UCODEC_DISPATCH(conv1d_backward_weight, g, dy, x, dw)
}

void conv_transpose1d_forward(const ConvTranspose1dGeometry& g, std::span<const double> x,
                              std::span<const double> w, std::span<const double> bias, std::span<double> y) {
    UCODEC_DISPATCH(conv_transpose1d_forward, g, x, w, bias, y)
}

void conv_transpose1d_backward_input(const ConvTranspose1dGeometry& g, std::span<const double> dy,
                                     std::span<const double> w, std::span<double> dx) {
    UCODEC_DISPATCH(conv_transpose1d_backward_input, g, dy, w, dx)
}

void conv_transpose1d_backward_weight(const ConvTranspose1dGeometry& g, std::span<const double> dy,
                                      std::span<const double> x, std::span<double> dw) {
    UCODEC_DISPATCH(conv_transpose1d_backward_weight, g, dy, x, dw)
}

void conv2d_forward(const Conv2dGeometry& g, std::span<const double> x, std::span<const double> w,
                    std::span<const double> bias, std::span<double> y) {
    UCODEC_DISPATCH(conv2d_forward, g, x, w, bias, y)
}

void conv2d_backward_input(const Conv2dGeometry& g, std::span<const double> dy, std::span<const double> w,
                           std::span<double> dx) {
    UCODEC_DISPATCH(conv2d_backward_input, g, dy, w, dx)
}

void conv2d_backward_weight(const Conv2dGeometry& g, std::span<const double> dy, std::span<const double> x,
                            std::span<double> dw) {
    UCODEC_DISPATCH(conv2d_backward_weight, g, dy, x, dw)
}

#undef UCODEC_DISPATCH

}  // namespace ucodec::kernels
