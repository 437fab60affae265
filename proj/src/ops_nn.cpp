#include <algorithm>
#include <cmath>
#include <limits>

#include "op_util.hpp"
#include "ucodec/ops.hpp"

namespace ucodec::ops {

using detail::grad_of;
using detail::record;

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    detail::check_rank(x, 2, "layer_norm");
    const int rows = x.dim(0);
    const int d = x.dim(1);
    require(static_cast<int>(gamma.numel()) == d && static_cast<int>(beta.numel()) == d, ErrorKind::Configuration,
            "layer_norm: gamma/beta width mismatch");
    std::vector<double> xhat(x.numel());
    std::vector<double> inv_std(static_cast<std::size_t>(rows));
    std::vector<double> out(x.numel());
    for (int r = 0; r < rows; ++r) {
        const auto row = x.data().subspan(static_cast<std::size_t>(r) * d, d);
        double mu = 0.0;
        for (double v : row) {
            mu += v;
        }
        mu /= d;
        double var = 0.0;
        for (double v : row) {
            var += (v - mu) * (v - mu);
        }
        var /= d;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[r] = is;
        for (int j = 0; j < d; ++j) {
            const std::size_t i = static_cast<std::size_t>(r) * d + j;
            xhat[i] = (row[j] - mu) * is;
            out[i] = gamma[j] * xhat[i] + beta[j];
        }
    }
    Tensor y = ucodec::detail::make_output(x.shape(), std::move(out));
    if (ucodec::detail::needs_tape({&x, &gamma, &beta})) {
        record("layer_norm", y,
               [xi = x.impl(), gi = gamma.impl(), bi = beta.impl(), xhat = std::move(xhat), inv_std = std::move(inv_std),
                rows, d](std::span<const double> gy) {
                   auto gx = grad_of(xi);
                   auto gg = grad_of(gi);
                   auto gb = grad_of(bi);
                   std::vector<double> dxhat(static_cast<std::size_t>(d));
                   for (int r = 0; r < rows; ++r) {
                       const std::size_t base = static_cast<std::size_t>(r) * d;
                       double mean_dxhat = 0.0;
                       double mean_dxhat_xhat = 0.0;
                       for (int j = 0; j < d; ++j) {
                           const double g = gy[base + j];
                           if (!gg.empty()) {
                               gg[j] += g * xhat[base + j];
                           }
                           if (!gb.empty()) {
                               gb[j] += g;
                           }
                           dxhat[j] = g * gi->value[j];
                           mean_dxhat += dxhat[j];
                           mean_dxhat_xhat += dxhat[j] * xhat[base + j];
                       }
                       if (gx.empty()) {
                           continue;
                       }
                       mean_dxhat /= d;
                       mean_dxhat_xhat /= d;
                       for (int j = 0; j < d; ++j) {
                           gx[base + j] += inv_std[r] * (dxhat[j] - mean_dxhat - xhat[base + j] * mean_dxhat_xhat);
                       }
                   }
               });
    }
    return y;
}

namespace {

// Softmax over rows of width `cols`; when `causal`, row r of each [L,L] block
// only sees columns <= r.
Tensor softmax_impl(std::string_view name, const Tensor& x, bool causal) {
    const int cols = x.dim(x.rank() - 1);
    const std::size_t rows = x.numel() / static_cast<std::size_t>(cols);
    const int block = causal ? x.dim(x.rank() - 2) : 0;
    std::vector<double> out(x.numel(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const int visible = causal ? static_cast<int>(r % static_cast<std::size_t>(block)) + 1 : cols;
        const auto row = x.data().subspan(r * cols, cols);
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < visible; ++j) {
            mx = std::max(mx, row[j]);
        }
        double z = 0.0;
        for (int j = 0; j < visible; ++j) {
            out[r * cols + j] = std::exp(row[j] - mx);
            z += out[r * cols + j];
        }
        for (int j = 0; j < visible; ++j) {
            out[r * cols + j] /= z;
        }
    }
    Tensor y = ucodec::detail::make_output(x.shape(), std::move(out));
    if (ucodec::detail::needs_tape({&x})) {
        record(name, y, [xi = x.impl(), yi = y.impl(), rows, cols](std::span<const double> gy) {
            auto gx = grad_of(xi);
            const auto& p = yi->value;
            for (std::size_t r = 0; r < rows; ++r) {
                double dot = 0.0;
                for (int j = 0; j < cols; ++j) {
                    dot += gy[r * cols + j] * p[r * cols + j];
                }
                for (int j = 0; j < cols; ++j) {
                    gx[r * cols + j] += p[r * cols + j] * (gy[r * cols + j] - dot);
                }
            }
        });
    }
    return y;
}

void rotate_pairs(std::span<const double> in, std::span<double> out, int batch, int len, int dh, int offset,
                  double base, double direction) {
    const int half = dh / 2;
    std::vector<double> inv_freq(static_cast<std::size_t>(half));
    for (int i = 0; i < half; ++i) {
        inv_freq[i] = std::pow(base, -2.0 * i / dh);
    }
    for (int b = 0; b < batch; ++b) {
        for (int l = 0; l < len; ++l) {
            const double pos = static_cast<double>(l + offset);
            const std::size_t row = (static_cast<std::size_t>(b) * len + l) * dh;
            for (int i = 0; i < half; ++i) {
                const double angle = pos * inv_freq[i];
                const double c = std::cos(angle);
                const double s = direction * std::sin(angle);
                const double x0 = in[row + 2 * i];
                const double x1 = in[row + 2 * i + 1];
                out[row + 2 * i] += x0 * c - x1 * s;
                out[row + 2 * i + 1] += x0 * s + x1 * c;
            }
        }
    }
}

}  // namespace

Tensor softmax(const Tensor& x) { return softmax_impl("softmax", x, false); }

Tensor masked_softmax(const Tensor& scores, bool causal) {
    detail::check_rank(scores, 3, "masked_softmax");
    require(!causal || scores.dim(1) == scores.dim(2), ErrorKind::Configuration,
            "masked_softmax: causal mask needs square score blocks");
    return softmax_impl("masked_softmax", scores, causal);
}

Tensor rope(const Tensor& x, int position_offset, double base) {
    detail::check_rank(x, 3, "rope");
    const int dh = x.dim(2);
    require(dh >= 2 && dh % 2 == 0, ErrorKind::Configuration, "rope: head dimension must be even and >= 2");
    std::vector<double> out(x.numel(), 0.0);
    rotate_pairs(x.data(), out, x.dim(0), x.dim(1), dh, position_offset, base, 1.0);
    Tensor y = ucodec::detail::make_output(x.shape(), std::move(out));
    if (ucodec::detail::needs_tape({&x})) {
        record("rope", y, [xi = x.impl(), position_offset, base](std::span<const double> gy) {
            auto gx = grad_of(xi);
            rotate_pairs(gy, gx, xi->shape[0], xi->shape[1], xi->shape[2], position_offset, base, -1.0);
        });
    }
    return y;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal) {
    detail::check_rank(q, 3, "attention");
    require(q.shape() == k.shape() && k.shape() == v.shape(), ErrorKind::Configuration,
            "attention: Q/K/V shapes differ");
    const int dh = q.dim(2);
    const Tensor qr = rope(q);
    const Tensor kr = rope(k);
    const Tensor scores = scale(bmm(qr, kr, true), 1.0 / std::sqrt(static_cast<double>(dh)));
    return bmm(masked_softmax(scores, causal), v);
}

Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets) {
    detail::check_rank(logits, 2, "cross_entropy_rows");
    const int rows = logits.dim(0);
    const int vocab = logits.dim(1);
    require(static_cast<int>(targets.size()) == rows, ErrorKind::Configuration, "cross_entropy_rows: target count");
    std::vector<double> probs(logits.numel());
    std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
    for (int r = 0; r < rows; ++r) {
        const int t = targets[r];
        require(t >= -1 && t < vocab, ErrorKind::Index,
                "cross_entropy target " + std::to_string(t) + " outside vocabulary of " + std::to_string(vocab));
        const auto row = logits.data().subspan(static_cast<std::size_t>(r) * vocab, vocab);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (int j = 0; j < vocab; ++j) {
            probs[static_cast<std::size_t>(r) * vocab + j] = std::exp(row[j] - mx);
            z += probs[static_cast<std::size_t>(r) * vocab + j];
        }
        for (int j = 0; j < vocab; ++j) {
            probs[static_cast<std::size_t>(r) * vocab + j] /= z;
        }
        if (t >= 0) {
            out[r] = std::log(z) + mx - row[t];
        }
    }
    Tensor y = ucodec::detail::make_output({rows}, std::move(out));
    if (ucodec::detail::needs_tape({&logits})) {
        record("cross_entropy", y, [li = logits.impl(), probs = std::move(probs), targets, rows, vocab](std::span<const double> gy) {
            auto gl = grad_of(li);
            for (int r = 0; r < rows; ++r) {
                if (targets[r] < 0) {
                    continue;
                }
                for (int j = 0; j < vocab; ++j) {
                    const double onehot = j == targets[r] ? 1.0 : 0.0;
                    gl[static_cast<std::size_t>(r) * vocab + j] += gy[r] * (probs[static_cast<std::size_t>(r) * vocab + j] - onehot);
                }
            }
        });
    }
    return y;
}

Tensor cross_entropy(const Tensor& logits, int target) {
    require(target >= 0, ErrorKind::Index, "cross_entropy target must be non-negative");
    const Tensor row = reshape(logits, {1, static_cast<int>(logits.numel())});
    return reshape(cross_entropy_rows(row, {target}), {1});
}

}  // namespace ucodec::ops
