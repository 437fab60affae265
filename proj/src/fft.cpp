#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>

#include "ucodec/error.hpp"

namespace ucodec::fft {

namespace {

// FFTW plans with their own aligned buffers; inputs are copied in so the
// plans can be reused for any caller-owned span.
struct Plan {
    int n = 0;
    double* real = nullptr;
    fftw_complex* bins = nullptr;
    fftw_plan r2c = nullptr;
    fftw_plan c2r = nullptr;

    explicit Plan(int size) : n(size) {
        real = fftw_alloc_real(static_cast<std::size_t>(n));
        bins = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
        r2c = fftw_plan_dft_r2c_1d(n, real, bins, FFTW_ESTIMATE);
        c2r = fftw_plan_dft_c2r_1d(n, bins, real, FFTW_ESTIMATE);
    }
    ~Plan() {
        fftw_destroy_plan(r2c);
        fftw_destroy_plan(c2r);
        fftw_free(real);
        fftw_free(bins);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
};

std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

Plan& plan_for(int n) {
    static std::map<int, std::unique_ptr<Plan>> plans;
    std::lock_guard<std::mutex> lock(plan_mutex());
    auto it = plans.find(n);
    if (it == plans.end()) {
        it = plans.emplace(n, std::make_unique<Plan>(n)).first;
    }
    return *it->second;
}

}  // namespace

void forward_real(std::span<const double> in, std::span<std::complex<double>> out) {
    const int n = static_cast<int>(in.size());
    require(n >= 1 && out.size() == static_cast<std::size_t>(n / 2 + 1), ErrorKind::Configuration,
            "fft: buffer sizes do not match transform length");
    Plan& p = plan_for(n);
    std::copy(in.begin(), in.end(), p.real);
    fftw_execute(p.r2c);
    for (int k = 0; k <= n / 2; ++k) {
        out[k] = {p.bins[k][0], p.bins[k][1]};
    }
}

void inverse_real(std::span<const std::complex<double>> bins, std::span<double> out) {
    const int n = static_cast<int>(out.size());
    require(n >= 1 && bins.size() == static_cast<std::size_t>(n / 2 + 1), ErrorKind::Configuration,
            "ifft: buffer sizes do not match transform length");
    Plan& p = plan_for(n);
    for (int k = 0; k <= n / 2; ++k) {
        p.bins[k][0] = bins[k].real();
        p.bins[k][1] = bins[k].imag();
    }
    fftw_execute(p.c2r);
    std::copy(p.real, p.real + n, out.begin());
}

}  // namespace ucodec::fft
