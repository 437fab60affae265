#include <algorithm>
#include <cmath>
#include <numbers>

#include "op_util.hpp"
#include "ucodec/ops.hpp"

namespace ucodec::ops {

using detail::grad_of;
using detail::record;

namespace {

// Elementwise unary op with derivative expressed through (x, y).
template <class Fwd, class Deriv>
Tensor unary(std::string_view name, const Tensor& a, Fwd fwd, Deriv deriv) {
    std::vector<double> out(a.numel());
    const auto x = a.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = fwd(x[i]);
    }
    Tensor y = ucodec::detail::make_output(a.shape(), std::move(out));
    if (ucodec::detail::needs_tape({&a})) {
        record(name, y, [ai = a.impl(), yi = y.impl(), deriv](std::span<const double> gy) {
            auto ga = grad_of(ai);
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += gy[i] * deriv(ai->value[i], yi->value[i]);
            }
        });
    }
    return y;
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] + b[i];
    }
    Tensor y = ucodec::detail::make_output(a.shape(), std::move(out));
    if (ucodec::detail::needs_tape({&a, &b})) {
        record("add", y, [ai = a.impl(), bi = b.impl()](std::span<const double> gy) {
            for (auto* t : {&ai, &bi}) {
                auto g = grad_of(*t);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += gy[i];
                }
            }
        });
    }
    return y;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] - b[i];
    }
    Tensor y = ucodec::detail::make_output(a.shape(), std::move(out));
    if (ucodec::detail::needs_tape({&a, &b})) {
        record("sub", y, [ai = a.impl(), bi = b.impl()](std::span<const double> gy) {
            auto ga = grad_of(ai);
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += gy[i];
            }
            auto gb = grad_of(bi);
            for (std::size_t i = 0; i < gb.size(); ++i) {
                gb[i] -= gy[i];
            }
        });
    }
    return y;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = a[i] * b[i];
    }
    Tensor y = ucodec::detail::make_output(a.shape(), std::move(out));
    if (ucodec::detail::needs_tape({&a, &b})) {
        record("mul", y, [ai = a.impl(), bi = b.impl()](std::span<const double> gy) {
            auto ga = grad_of(ai);
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += gy[i] * bi->value[i];
            }
            auto gb = grad_of(bi);
            for (std::size_t i = 0; i < gb.size(); ++i) {
                gb[i] += gy[i] * ai->value[i];
            }
        });
    }
    return y;
}

Tensor add_n(const std::vector<Tensor>& terms) {
    require(!terms.empty(), ErrorKind::Usage, "add_n of an empty list");
    Tensor acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) {
        acc = add(acc, terms[i]);
    }
    return acc;
}

Tensor scale(const Tensor& a, double s) {
    return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor square(const Tensor& a) {
    return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor abs(const Tensor& a) {
    return unary(
        "abs", a, [](double x) { return std::fabs(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Tensor tanh(const Tensor& a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor elu(const Tensor& a) {
    return unary(
        "elu", a, [](double x) { return x > 0.0 ? x : std::expm1(x); },
        [](double x, double) { return x > 0.0 ? 1.0 : std::exp(x); });
}

Tensor gelu(const Tensor& a) {
    return unary(
        "gelu", a, [](double x) { return x * std_normal_cdf(x); },
        [](double x, double) {
            const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
            return std_normal_cdf(x) + x * pdf;
        });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    return unary(
        "leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
        [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor log10_clamped(const Tensor& a, double floor) {
    return unary(
        "log10_clamped", a, [floor](double x) { return std::log10(std::max(x, floor)); },
        [floor](double x, double) { return x > floor ? 1.0 / (x * std::numbers::ln10) : 0.0; });
}

Tensor add_row_bias(const Tensor& x, const Tensor& bias) {
    detail::check_rank(x, 2, "add_row_bias");
    const int rows = x.dim(0);
    const int cols = x.dim(1);
    require(static_cast<int>(bias.numel()) == cols, ErrorKind::Configuration, "add_row_bias: bias length mismatch");
    std::vector<double> out(x.numel());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            out[static_cast<std::size_t>(r) * cols + c] = x[static_cast<std::size_t>(r) * cols + c] + bias[c];
        }
    }
    Tensor y = ucodec::detail::make_output(x.shape(), std::move(out));
    if (ucodec::detail::needs_tape({&x, &bias})) {
        record("add_row_bias", y, [xi = x.impl(), bi = bias.impl(), rows, cols](std::span<const double> gy) {
            auto gx = grad_of(xi);
            for (std::size_t i = 0; i < gx.size(); ++i) {
                gx[i] += gy[i];
            }
            auto gb = grad_of(bi);
            if (!gb.empty()) {
                for (int r = 0; r < rows; ++r) {
                    for (int c = 0; c < cols; ++c) {
                        gb[c] += gy[static_cast<std::size_t>(r) * cols + c];
                    }
                }
            }
        });
    }
    return y;
}

Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data()) {
        acc += v;
    }
    Tensor y = ucodec::detail::make_output({1}, {acc});
    if (ucodec::detail::needs_tape({&a})) {
        record("sum", y, [ai = a.impl()](std::span<const double> gy) {
            auto ga = grad_of(ai);
            for (double& g : ga) {
                g += gy[0];
            }
        });
    }
    return y;
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.numel())); }

Tensor l1_loss(const Tensor& a, const Tensor& b) { return mean(abs(sub(a, b))); }

Tensor reshape(const Tensor& a, Shape shape) {
    require(shape_numel(shape) == a.numel(), ErrorKind::Configuration,
            "reshape " + shape_string(a.shape()) + " -> " + shape_string(shape));
    Tensor y = Tensor::from(std::move(shape), a.to_vector());
    if (ucodec::detail::needs_tape({&a})) {
        record("reshape", y, [ai = a.impl()](std::span<const double> gy) {
            auto ga = grad_of(ai);
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += gy[i];
            }
        });
    }
    return y;
}

Tensor transpose(const Tensor& a) {
    require(a.rank() == 2 || a.rank() == 3, ErrorKind::Configuration,
            "transpose: expected rank 2 or 3, got " + shape_string(a.shape()));
    const bool batched = a.rank() == 3;
    const int batch = batched ? a.dim(0) : 1;
    const int rows = a.dim(batched ? 1 : 0);
    const int cols = a.dim(batched ? 2 : 1);
    const std::size_t plane = static_cast<std::size_t>(rows) * cols;
    std::vector<double> out(a.numel());
    for (int b = 0; b < batch; ++b) {
        const std::size_t off = b * plane;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                out[off + static_cast<std::size_t>(c) * rows + r] = a[off + static_cast<std::size_t>(r) * cols + c];
            }
        }
    }
    Tensor y = Tensor::from(batched ? Shape{batch, cols, rows} : Shape{cols, rows}, std::move(out));
    if (ucodec::detail::needs_tape({&a})) {
        record("transpose", y, [ai = a.impl(), batch, rows, cols, plane](std::span<const double> gy) {
            auto ga = grad_of(ai);
            for (int b = 0; b < batch; ++b) {
                const std::size_t off = b * plane;
                for (int r = 0; r < rows; ++r) {
                    for (int c = 0; c < cols; ++c) {
                        ga[off + static_cast<std::size_t>(r) * cols + c] += gy[off + static_cast<std::size_t>(c) * rows + r];
                    }
                }
            }
        });
    }
    return y;
}

Tensor slice_rows(const Tensor& a, int begin, int end) {
    require(a.rank() >= 1 && begin >= 0 && begin < end && end <= a.dim(0), ErrorKind::Index,
            "slice_rows [" + std::to_string(begin) + "," + std::to_string(end) + ") of " + shape_string(a.shape()));
    const std::size_t row = a.numel() / static_cast<std::size_t>(a.dim(0));
    Shape shape = a.shape();
    shape[0] = end - begin;
    std::vector<double> out(a.data().begin() + static_cast<std::ptrdiff_t>(begin * row),
                            a.data().begin() + static_cast<std::ptrdiff_t>(end * row));
    Tensor y = Tensor::from(std::move(shape), std::move(out));
    if (ucodec::detail::needs_tape({&a})) {
        record("slice_rows", y, [ai = a.impl(), offset = begin * row](std::span<const double> gy) {
            auto ga = grad_of(ai);
            for (std::size_t i = 0; i < gy.size(); ++i) {
                ga[offset + i] += gy[i];
            }
        });
    }
    return y;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    require(!parts.empty(), ErrorKind::Usage, "concat_rows of an empty list");
    Shape shape = parts.front().shape();
    int rows = 0;
    std::vector<double> out;
    bool taped = false;
    for (const auto& p : parts) {
        require(p.rank() == shape.size() && std::equal(shape.begin() + 1, shape.end(), p.shape().begin() + 1),
                ErrorKind::Configuration, "concat_rows: trailing shape mismatch");
        rows += p.dim(0);
        out.insert(out.end(), p.data().begin(), p.data().end());
        taped = taped || ucodec::detail::needs_tape({&p});
    }
    shape[0] = rows;
    Tensor y = Tensor::from(std::move(shape), std::move(out));
    if (taped) {
        std::vector<detail::ImplPtr> impls;
        for (const auto& p : parts) {
            impls.push_back(p.impl());
        }
        record("concat_rows", y, [impls = std::move(impls)](std::span<const double> gy) {
            std::size_t offset = 0;
            for (const auto& p : impls) {
                auto g = grad_of(p);
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += gy[offset + i];
                }
                offset += p->value.size();
            }
        });
    }
    return y;
}

Tensor pad(const Tensor& a, int left, int right) {
    detail::check_rank(a, 1, "pad");
    require(left >= 0 && right >= 0, ErrorKind::Usage, "pad: negative padding");
    const int n = a.dim(0);
    std::vector<double> out(static_cast<std::size_t>(n + left + right), 0.0);
    std::copy(a.data().begin(), a.data().end(), out.begin() + left);
    Tensor y = Tensor::from({n + left + right}, std::move(out));
    if (ucodec::detail::needs_tape({&a})) {
        record("pad", y, [ai = a.impl(), left](std::span<const double> gy) {
            auto ga = grad_of(ai);
            for (std::size_t i = 0; i < ga.size(); ++i) {
                ga[i] += gy[i + static_cast<std::size_t>(left)];
            }
        });
    }
    return y;
}

Tensor split_heads(const Tensor& x, int batch, int len, int heads) {
    detail::check_rank(x, 2, "split_heads");
    require(x.dim(0) == batch * len && x.dim(1) % heads == 0, ErrorKind::Configuration,
            "split_heads: " + shape_string(x.shape()) + " incompatible with batch/len/heads");
    const int dh = x.dim(1) / heads;
    const int width = x.dim(1);
    std::vector<double> out(x.numel());
    // out[(b*H + h), l, d] = x[b*L + l, h*dh + d]
    auto src_index = [=](int b, int h, int l, int d) {
        return (static_cast<std::size_t>(b) * len + l) * width + static_cast<std::size_t>(h) * dh + d;
    };
    std::size_t o = 0;
    for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
            for (int l = 0; l < len; ++l) {
                for (int d = 0; d < dh; ++d) {
                    out[o++] = x[src_index(b, h, l, d)];
                }
            }
        }
    }
    Tensor y = Tensor::from({batch * heads, len, dh}, std::move(out));
    if (ucodec::detail::needs_tape({&x})) {
        record("split_heads", y, [xi = x.impl(), batch, heads, len, dh, src_index](std::span<const double> gy) {
            auto gx = grad_of(xi);
            std::size_t o = 0;
            for (int b = 0; b < batch; ++b) {
                for (int h = 0; h < heads; ++h) {
                    for (int l = 0; l < len; ++l) {
                        for (int d = 0; d < dh; ++d) {
                            gx[src_index(b, h, l, d)] += gy[o++];
                        }
                    }
                }
            }
        });
    }
    return y;
}

Tensor merge_heads(const Tensor& x, int batch, int heads) {
    detail::check_rank(x, 3, "merge_heads");
    require(x.dim(0) == batch * heads, ErrorKind::Configuration, "merge_heads: leading dim mismatch");
    const int len = x.dim(1);
    const int dh = x.dim(2);
    const int width = heads * dh;
    std::vector<double> out(x.numel());
    std::size_t i = 0;
    for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
            for (int l = 0; l < len; ++l) {
                for (int d = 0; d < dh; ++d) {
                    out[(static_cast<std::size_t>(b) * len + l) * width + static_cast<std::size_t>(h) * dh + d] = x[i++];
                }
            }
        }
    }
    Tensor y = Tensor::from({batch * len, width}, std::move(out));
    if (ucodec::detail::needs_tape({&x})) {
        record("merge_heads", y, [xi = x.impl(), batch, heads, len, dh, width](std::span<const double> gy) {
            auto gx = grad_of(xi);
            std::size_t i = 0;
            for (int b = 0; b < batch; ++b) {
                for (int h = 0; h < heads; ++h) {
                    for (int l = 0; l < len; ++l) {
                        for (int d = 0; d < dh; ++d) {
                            gx[i++] += gy[(static_cast<std::size_t>(b) * len + l) * width +
                                          static_cast<std::size_t>(h) * dh + d];
                        }
                    }
                }
            }
        });
    }
    return y;
}

Tensor stop_gradient(const Tensor& a) { return a.detach(); }

Tensor straight_through(const Tensor& input, const Tensor& code) {
    detail::check_same_shape(input, code, "straight_through");
    Tensor y = Tensor::from(code.shape(), code.to_vector());
    if (ucodec::detail::needs_tape({&input})) {
        record("straight_through", y, [ii = input.impl()](std::span<const double> gy) {
            auto gi = grad_of(ii);
            for (std::size_t i = 0; i < gi.size(); ++i) {
                gi[i] += gy[i];
            }
        });
    }
    return y;
}

Tensor embedding(const Tensor& table, const std::vector<int>& ids) {
    detail::check_rank(table, 2, "embedding");
    const int vocab = table.dim(0);
    const int width = table.dim(1);
    std::vector<double> out;
    out.reserve(ids.size() * static_cast<std::size_t>(width));
    for (int id : ids) {
        require(id >= 0 && id < vocab, ErrorKind::Index,
                "embedding id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
        const auto row = table.data().subspan(static_cast<std::size_t>(id) * width, width);
        out.insert(out.end(), row.begin(), row.end());
    }
    require(!ids.empty(), ErrorKind::Usage, "embedding with no ids");
    Tensor y = Tensor::from({static_cast<int>(ids.size()), width}, std::move(out));
    if (ucodec::detail::needs_tape({&table})) {
        record("embedding", y, [ti = table.impl(), ids, width](std::span<const double> gy) {
            auto gt = grad_of(ti);
            for (std::size_t r = 0; r < ids.size(); ++r) {
                for (int d = 0; d < width; ++d) {
                    gt[static_cast<std::size_t>(ids[r]) * width + d] += gy[r * width + d];
                }
            }
        });
    }
    return y;
}

}  // namespace ucodec::ops
