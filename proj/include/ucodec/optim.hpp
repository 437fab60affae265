#pragma once

#include <vector>

#include "ucodec/nn.hpp"

namespace ucodec {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
    // Global gradient-norm clip; 0 disables it.
    double max_grad_norm = 0.0;
};

// Adam with bias correction. Moments are kept per parameter so a checkpoint
// can restore the exact optimizer state.
class Adam {
public:
    Adam() = default;
    Adam(ParameterList params, AdamConfig cfg = {});

    // Applies one update with learning rate lr and returns the pre-clip
    // gradient norm. Parameters without a gradient are left unchanged.
    double step(double lr);

    const ParameterList& params() const { return params_; }
    long long steps() const { return steps_; }
    void set_steps(long long s) { steps_ = s; }
    std::vector<std::vector<double>>& first_moments() { return m_; }
    std::vector<std::vector<double>>& second_moments() { return v_; }
    const std::vector<std::vector<double>>& first_moments() const { return m_; }
    const std::vector<std::vector<double>>& second_moments() const { return v_; }

private:
    ParameterList params_;
    AdamConfig cfg_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    long long steps_ = 0;
};

// Linear warmup over `warmup` steps, then constant. `step` counts from 0.
double warmup_lr(double base, int warmup, long long step);

}  // namespace ucodec
