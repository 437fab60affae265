#include "ucodec/optim.hpp"

#include <algorithm>
#include <cmath>

#include "ucodec/error.hpp"

namespace ucodec {

Adam::Adam(ParameterList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    for (const auto& p : params_) {
        m_.emplace_back(p.tensor.numel(), 0.0);
        v_.emplace_back(p.tensor.numel(), 0.0);
    }
}

double Adam::step(double lr) {
    double sq = 0.0;
    for (const auto& p : params_) {
        for (double g : p.tensor.grad()) {
            sq += g * g;
        }
    }
    const double norm = std::sqrt(sq);
    require(std::isfinite(norm), ErrorKind::TrainingDivergence, "non-finite gradient norm");
    double clip = 1.0;
    if (cfg_.max_grad_norm > 0.0 && norm > cfg_.max_grad_norm) {
        clip = cfg_.max_grad_norm / norm;
    }

    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        Tensor& t = params_[i].tensor;
        if (!t.has_grad()) {
            continue;
        }
        const auto g = t.grad();
        auto w = t.mutable_data();
        auto& m = m_[i];
        auto& v = v_[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g[j] * clip;
            m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
            v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
            w[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
        }
        detail::round_to_precision(w, t.precision());
        detail::round_to_precision(m, t.precision());
        detail::round_to_precision(v, t.precision());
    }
    return norm;
}

double warmup_lr(double base, int warmup, long long step) {
    if (warmup <= 0) {
        return base;
    }
    return base * std::min(1.0, static_cast<double>(step + 1) / warmup);
}

}  // namespace ucodec
