#pragma once

#include <cstddef>
#include <span>

#include "cir/ad/var.hpp"

// Differentiable primitives. Every function records its adjoint rule when
// any input requires gradients and throws ShapeError on incompatible inputs.
namespace cir::ad {

// Guard used inside log and normalisation terms.
inline constexpr float kLogEps = 1e-12f;

// Elementwise binary ops on equal shapes. Use broadcast_to first otherwise.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // Hadamard product

Var scale(const Var& a, float factor);
Var add_scalar(const Var& a, float offset);

Var relu(const Var& x);
Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var exp(const Var& x);
/// log(x + eps)
Var log(const Var& x, float eps = kLogEps);
Var softplus(const Var& x);
Var square(const Var& x);
/// Gradient passes only where lo < x < hi.
Var clamp(const Var& x, float lo, float hi);

/// Numpy-style broadcast: `x` may have fewer axes (aligned right) and any
/// axis of extent 1 expands.
Var broadcast_to(const Var& x, const Shape& shape);
Var reshape(const Var& x, const Shape& shape);
/// Rows (slices along axis 0) picked by index; repeated indices allowed.
Var gather_rows(const Var& x, std::span<const std::size_t> rows);
/// Concatenates two matrices along axis 1.
Var concat_cols(const Var& a, const Var& b);

Var sum(const Var& x);
Var mean(const Var& x);
/// Mean over every axis but the first: (N, ...) -> (N).
Var row_mean(const Var& x);
/// Max-shifted log(sum(exp(x))) over a 1-D batch (or (N,1)) tensor.
Var logsumexp(const Var& x);
/// log(mean(exp(x))); exactly max(x) when all entries are equal.
Var logmeanexp(const Var& x);

/// x (N, in) * W^T + b with W (out, in), b (out).
Var affine(const Var& x, const Var& weight, const Var& bias);

/// x (N, C, H, W), weight (O, C, k, k), bias (O).
Var conv2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t pad);

/// Adjoint of conv2d. x (N, C, H, W), weight (C, O, k, k), bias (O). The
/// output extent is given explicitly; it must map back onto H x W under the
/// forward convolution geometry (this absorbs output padding).
Var conv_transpose2d(const Var& x, const Var& weight, const Var& bias, std::size_t stride, std::size_t pad,
                     std::size_t out_h, std::size_t out_w);

/// Constant copy cut from the graph.
Var detach(const Var& x);
Var constant(Tensor value);

}  // namespace cir::ad
