#pragma once

#include <memory>
#include <span>
#include <string>
#include <utility>

#include "ucodec/error.hpp"
#include "ucodec/tensor.hpp"

namespace ucodec::ops::detail {

using ImplPtr = std::shared_ptr<TensorImpl>;

// Gradient buffer of t, or an empty span when t is a constant.
inline std::span<double> grad_of(const ImplPtr& t) {
    if (!t || !t->requires_grad) {
        return {};
    }
    return t->ensure_grad();
}

// Records fn(upstream_grad) for `out` on the active tape.
template <class Fn>
void record(std::string_view name, Tensor& out, Fn&& fn) {
    out.set_requires_grad(true);
    active_tape()->record(name, [o = out.impl(), f = std::forward<Fn>(fn)]() {
        if (o->grad.empty()) {
            return;
        }
        f(std::span<const double>(o->grad));
    });
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    require(a.shape() == b.shape(), ErrorKind::Configuration,
            std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
}

inline void check_rank(const Tensor& a, std::size_t rank, const char* op) {
    require(a.rank() == rank, ErrorKind::Configuration,
            std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_string(a.shape()));
}

}  // namespace ucodec::ops::detail
