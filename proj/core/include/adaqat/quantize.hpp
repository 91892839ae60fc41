#pragma once

#include <utility>

#include "adaqat/tensor.hpp"

namespace adaqat {

// Reserved bit-width meaning "no quantization": the forward paths return
// their input untouched (weights) or clip-only (activations).
inline constexpr int kPassThroughBits = 32;

// Guard for the tanh normalization denominator when all weights are zero.
inline constexpr double kWeightQuantEps = 1e-12;

inline constexpr float kAlphaInit = 8.0f;
inline constexpr float kAlphaMin = 1e-3f;

// Uniform quantizer on [0,1]: round(x * s) / s with s = 2^k - 1, ties
// rounding half away from zero. Throws std::domain_error outside [0,1].
float quantize_unit(float x, int k);

// DoReFa-style weight quantization. Forward maps w through
// f(w) = tanh(w) / (2 max|tanh(w)| + eps), then 2 q(f(w) + 1/2) - 1.
// k == kPassThroughBits returns the input tensor unchanged.
Tensor quantize_weights_forward(const Tensor& w, int k);

// Straight-through backward of the weight quantizer: the rounding is
// treated as identity and the normalization max as a constant, leaving
// upstream * 2 (1 - tanh(w)^2) / (2 max|tanh(w)| + eps).
Tensor quantize_weights_backward(const Tensor& upstream, const Tensor& w, int k);

// PACT activation: clip to [0, alpha], then quantize on the grid
// {i * alpha / (2^k - 1)}. k == kPassThroughBits clips without rounding.
Tensor pact_forward(const Tensor& x, float alpha, int k);

// Backward of the PACT activation. Gradient flows to x inside [0, alpha];
// alpha collects the upstream gradient where the input saturated (x > alpha).
std::pair<Tensor, float> pact_backward(const Tensor& upstream, const Tensor& x,
                                       float alpha);

// Tape-recording wrappers used by the layers.
Tensor quantize_weights(const Tensor& w, int k);
Tensor pact(const Tensor& x, const Tensor& alpha, int k);  // alpha: [1] param

// Activation of the quantizer-free reference path: clip to [0, alpha] with
// the same gradient routing as the quantized activation, implemented
// independently so the pass-through sentinel can be checked against it.
Tensor clip_alpha(const Tensor& x, const Tensor& alpha);

}  // namespace adaqat
