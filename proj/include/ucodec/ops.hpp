#pragma once

// Differentiable primitives. Every op computes its forward value eagerly and,
// when a tape is active and an input requires a gradient, records a backward
// closure. Layouts are row-major; sequence tensors are [length, features] and
// convolution tensors are [channels, length] (optionally with a leading batch).

#include <utility>
#include <vector>

#include "ucodec/tensor.hpp"

namespace ucodec::ops {

// elementwise ------------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_n(const std::vector<Tensor>& terms);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor square(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor elu(const Tensor& a);
// Exact form x * Phi(x) with the Gaussian CDF.
Tensor gelu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
// log10(max(a, floor)); zero gradient below the floor.
Tensor log10_clamped(const Tensor& a, double floor);
// [M, N] + bias[N] broadcast over rows.
Tensor add_row_bias(const Tensor& x, const Tensor& bias);

// reductions -------------------------------------------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// mean |a - b| over all elements.
Tensor l1_loss(const Tensor& a, const Tensor& b);

// shape ------------------------------------------------------------------
Tensor reshape(const Tensor& a, Shape shape);
// Swaps the last two axes of a 2-d or 3-d tensor.
Tensor transpose(const Tensor& a);
Tensor slice_rows(const Tensor& a, int begin, int end);
Tensor concat_rows(const std::vector<Tensor>& parts);
// 1-d zero padding.
Tensor pad(const Tensor& a, int left, int right);
// [batch*len, heads*dh] -> [batch*heads, len, dh]
Tensor split_heads(const Tensor& x, int batch, int len, int heads);
// inverse of split_heads
Tensor merge_heads(const Tensor& x, int batch, int heads);
Tensor stop_gradient(const Tensor& a);
// Forward value is exactly `code`; the gradient flows to `input` unchanged
// and nothing reaches `code`.
Tensor straight_through(const Tensor& input, const Tensor& code);
// Rows of table[V, d] gathered by id -> [ids.size(), d]. Index error when out of range.
Tensor embedding(const Tensor& table, const std::vector<int>& ids);

// linear algebra ---------------------------------------------------------
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);
// x[M, in] * w[out, in]^T + b[out]; b may be undefined.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);
// a[B, M, K] * b[B, K, N] (b stored [B, N, K] when trans_b).
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);

// convolution ------------------------------------------------------------
// x [Cin, L] or [B, Cin, L]; w [Cout, Cin, K]; bias [Cout] or undefined.
// Cross-correlation, zero padding on both sides.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride = 1, int dilation = 1,
              int padding = 0);
// x [Cin, L] or [B, Cin, L]; w [Cin, Cout, K].
Tensor conv_transpose1d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride = 1,
                        int padding = 0);
struct Pair {
    int h = 1;
    int w = 1;
};
// x [Cin, H, W]; w [Cout, Cin, KH, KW].
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, Pair stride = {1, 1},
              Pair dilation = {1, 1}, Pair padding = {0, 0});
// w_c = g_c * v_c / ||v_c|| over all dims except the leading one.
Tensor weight_norm(const Tensor& v, const Tensor& g);

// normalisation, attention, losses ---------------------------------------
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
// Softmax over the last axis.
Tensor softmax(const Tensor& x);
// Softmax over the last axis of [B, L, L] scores, optionally with a strictly
// upper-triangular -inf mask.
Tensor masked_softmax(const Tensor& scores, bool causal);
// Rotary embedding over [B, L, dh] with positions offset, offset+1, ...
Tensor rope(const Tensor& x, int position_offset = 0, double base = 10000.0);
// softmax((rope(Q) rope(K)^T) / sqrt(dh) + mask) V for [H, L, dh] inputs.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, bool causal);
// Per-row cross entropy -log softmax(logits)[target]; rows with target -1 give 0.
Tensor cross_entropy_rows(const Tensor& logits, const std::vector<int>& targets);
// Scalar cross entropy for a single logit vector.
Tensor cross_entropy(const Tensor& logits, int target);

// spectral ---------------------------------------------------------------
// Periodic Hann-windowed STFT of a 1-d signal, centred by zero padding of
// n_fft/2 on each side. Output [2, frames, n_fft/2 + 1] (real, imaginary).
Tensor stft(const Tensor& signal, int n_fft, int hop);
// sqrt(re^2 + im^2) of an stft output, [frames, bins].
Tensor complex_magnitude(const Tensor& spec);

}  // namespace ucodec::ops
