#include <cmath>
#include <complex>
#include <numbers>

#include "fft.hpp"
#include "op_util.hpp"
#include "ucodec/ops.hpp"

namespace ucodec::ops {

using detail::grad_of;
using detail::record;

namespace {

std::vector<double> periodic_hann(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    }
    return w;
}

}  // namespace

Tensor stft(const Tensor& signal, int n_fft, int hop) {
    detail::check_rank(signal, 1, "stft");
    require(n_fft >= 2 && hop >= 1, ErrorKind::Configuration, "stft: n_fft must be >= 2 and hop >= 1");
    const int len = signal.dim(0);
    const int half = n_fft / 2;
    const int padded = len + 2 * half;
    require(padded >= n_fft, ErrorKind::InputTooShort, "stft: signal shorter than one frame");
    const int frames = 1 + (padded - n_fft) / hop;
    const int bins = n_fft / 2 + 1;
    const auto window = periodic_hann(n_fft);

    std::vector<double> out(2 * static_cast<std::size_t>(frames) * bins);
    std::vector<double> frame(static_cast<std::size_t>(n_fft));
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(bins));
    const auto x = signal.data();
    for (int f = 0; f < frames; ++f) {
        for (int j = 0; j < n_fft; ++j) {
            const int src = f * hop + j - half;
            frame[j] = (src >= 0 && src < len) ? x[src] * window[j] : 0.0;
        }
        fft::forward_real(frame, spec);
        for (int k = 0; k < bins; ++k) {
            out[static_cast<std::size_t>(f) * bins + k] = spec[k].real();
            out[(static_cast<std::size_t>(frames) + f) * bins + k] = spec[k].imag();
        }
    }
    Tensor y = ucodec::detail::make_output({2, frames, bins}, std::move(out));
    if (ucodec::detail::needs_tape({&signal})) {
        record("stft", y, [si = signal.impl(), window, n_fft, hop, frames, bins, half, len](std::span<const double> gy) {
            auto gx = grad_of(si);
            std::vector<std::complex<double>> g(static_cast<std::size_t>(bins));
            std::vector<double> back(static_cast<std::size_t>(n_fft));
            const bool even = n_fft % 2 == 0;
            for (int f = 0; f < frames; ++f) {
                for (int k = 0; k < bins; ++k) {
                    const double re = gy[static_cast<std::size_t>(f) * bins + k];
                    const double im = gy[(static_cast<std::size_t>(frames) + f) * bins + k];
                    const bool edge = k == 0 || (even && k == bins - 1);
                    g[k] = edge ? std::complex<double>(re, 0.0) : std::complex<double>(0.5 * re, 0.5 * im);
                }
                fft::inverse_real(g, back);
                for (int j = 0; j < n_fft; ++j) {
                    const int dst = f * hop + j - half;
                    if (dst >= 0 && dst < len) {
                        gx[dst] += window[j] * back[j];
                    }
                }
            }
        });
    }
    return y;
}

Tensor complex_magnitude(const Tensor& spec) {
    detail::check_rank(spec, 3, "complex_magnitude");
    require(spec.dim(0) == 2, ErrorKind::Configuration, "complex_magnitude: expected [2, frames, bins]");
    const int frames = spec.dim(1);
    const int bins = spec.dim(2);
    const std::size_t n = static_cast<std::size_t>(frames) * bins;
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = std::hypot(spec[i], spec[n + i]);
    }
    Tensor y = ucodec::detail::make_output({frames, bins}, std::move(out));
    if (ucodec::detail::needs_tape({&spec})) {
        record("complex_magnitude", y, [si = spec.impl(), yi = y.impl(), n](std::span<const double> gy) {
            auto gs = grad_of(si);
            for (std::size_t i = 0; i < n; ++i) {
                const double m = yi->value[i];
                if (m > 0.0) {
                    gs[i] += gy[i] * si->value[i] / m;
                    gs[n + i] += gy[i] * si->value[n + i] / m;
                }
            }
        });
    }
    return y;
}

}  // namespace ucodec::ops
