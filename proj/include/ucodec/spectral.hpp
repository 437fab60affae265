#pragma once

// Log-mel features and the multi-resolution mel reconstruction loss.

#include <vector>

#include "ucodec/tensor.hpp"

namespace ucodec {

struct MelConfig {
    std::vector<int> windows{32, 64, 128, 256, 512, 1024, 2048};
    std::vector<int> mel_bins{5, 10, 20, 40, 80, 160, 320};
    int sample_rate = 16000;
    double log_floor = 1e-5;

    void validate() const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular HTK-scale filters from 0 Hz to Nyquist with unit peaks,
// [n_mels, n_fft/2 + 1].
std::vector<double> mel_filterbank(int n_fft, int n_mels, int sample_rate);

// log10(max(mel(|STFT(x)|), floor)) of a 1-d signal, [frames, n_mels].
// Hop is window / 4.
Tensor log_mel(const Tensor& signal, int window, int n_mels, int sample_rate, double floor);

// Mean over scales of the mean absolute log-mel difference. Accepts [L] or
// [B, L]; batched inputs average over items. Length mismatch is a usage error.
Tensor multiscale_mel_loss(const Tensor& x, const Tensor& y, const MelConfig& cfg);

}  // namespace ucodec
