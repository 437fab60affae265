#include "ucodec/spectral.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "ucodec/error.hpp"
#include "ucodec/ops.hpp"

namespace ucodec {

void MelConfig::validate() const {
    require(!windows.empty() && windows.size() == mel_bins.size(), ErrorKind::Configuration,
            "mel config needs one bin count per window");
    for (std::size_t i = 0; i < windows.size(); ++i) {
        require(windows[i] >= 4, ErrorKind::Configuration, "mel window " + std::to_string(windows[i]) + " too small");
        require(mel_bins[i] >= 1 && mel_bins[i] < windows[i] / 2, ErrorKind::Configuration,
                "mel bins must be below window/2");
    }
    require(sample_rate > 0 && log_floor > 0.0, ErrorKind::Configuration, "mel sample rate and floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filterbank(int n_fft, int n_mels, int sample_rate) {
    const int bins = n_fft / 2 + 1;
    const double top = hz_to_mel(sample_rate / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (int i = 0; i < n_mels + 2; ++i) {
        edges[i] = mel_to_hz(top * i / (n_mels + 1));
    }
    std::vector<double> fb(static_cast<std::size_t>(n_mels) * bins, 0.0);
    for (int m = 0; m < n_mels; ++m) {
        const double lo = edges[m];
        const double mid = edges[m + 1];
        const double hi = edges[m + 2];
        for (int k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * sample_rate / n_fft;
            const double up = (f - lo) / (mid - lo);
            const double down = (hi - f) / (hi - mid);
            fb[static_cast<std::size_t>(m) * bins + k] = std::max(0.0, std::min(up, down));
        }
    }
    return fb;
}

namespace {

const Tensor& cached_filterbank(int n_fft, int n_mels, int sample_rate) {
    static std::mutex mu;
    static std::map<std::tuple<int, int, int>, Tensor> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_tuple(n_fft, n_mels, sample_rate);
    auto it = cache.find(key);
    if (it == cache.end()) {
        it = cache.emplace(key, Tensor::from({n_mels, n_fft / 2 + 1}, mel_filterbank(n_fft, n_mels, sample_rate))).first;
    }
    return it->second;
}

}  // namespace

Tensor log_mel(const Tensor& signal, int window, int n_mels, int sample_rate, double floor) {
    const Tensor mag = ops::complex_magnitude(ops::stft(signal, window, window / 4));
    const Tensor mel = ops::matmul(mag, cached_filterbank(window, n_mels, sample_rate), false, true);
    return ops::log10_clamped(mel, floor);
}

Tensor multiscale_mel_loss(const Tensor& x, const Tensor& y, const MelConfig& cfg) {
    require(x.shape() == y.shape(), ErrorKind::Usage,
            "mel loss: length mismatch " + shape_string(x.shape()) + " vs " + shape_string(y.shape()));
    require(x.rank() == 1 || x.rank() == 2, ErrorKind::Usage, "mel loss: expected [L] or [B, L]");
    const int batch = x.rank() == 2 ? x.dim(0) : 1;
    const int len = x.rank() == 2 ? x.dim(1) : x.dim(0);
    std::vector<Tensor> terms;
    for (int b = 0; b < batch; ++b) {
        const Tensor xb = x.rank() == 2 ? ops::reshape(ops::slice_rows(x, b, b + 1), {len}) : x;
        const Tensor yb = y.rank() == 2 ? ops::reshape(ops::slice_rows(y, b, b + 1), {len}) : y;
        for (std::size_t s = 0; s < cfg.windows.size(); ++s) {
            const int w = cfg.windows[s];
            const int m = cfg.mel_bins[s];
            terms.push_back(ops::l1_loss(log_mel(xb, w, m, cfg.sample_rate, cfg.log_floor),
                                         log_mel(yb, w, m, cfg.sample_rate, cfg.log_floor)));
        }
    }
    return ops::scale(ops::add_n(terms), 1.0 / static_cast<double>(terms.size()));
}

}  // namespace ucodec
