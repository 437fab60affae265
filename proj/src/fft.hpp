#pragma once

#include <complex>
#include <span>

namespace ucodec::fft {

// Real-input DFT of length n (any n >= 1) backed by FFTW. out receives
// n/2 + 1 bins, X[k] = sum_j in[j] exp(-2 pi i k j / n).
void forward_real(std::span<const double> in, std::span<std::complex<double>> out);

// Unnormalised Hermitian inverse: out[j] = sum over the full conjugate-
// symmetric extension of bins, i.e. Y0 + 2 Re sum_{interior} Y_k e^{+i..} +
// Y_{n/2} (-1)^j. bins holds n/2 + 1 entries.
void inverse_real(std::span<const std::complex<double>> bins, std::span<double> out);

}  // namespace ucodec::fft
