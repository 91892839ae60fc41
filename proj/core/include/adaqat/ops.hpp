#pragma once

#include <vector>

#include "adaqat/tensor.hpp"

namespace adaqat {

// All ops run eagerly and, when a tape is active and an input is attached,
// record a backward closure. Shape violations throw std::invalid_argument
// with both shapes in the message.

Tensor matmul(const Tensor& a, const Tensor& b);           // [m,k]x[k,n]
Tensor conv2d(const Tensor& x, const Tensor& f, int stride, int padding);
Tensor add(const Tensor& a, const Tensor& b);              // same shape
Tensor mul(const Tensor& a, const Tensor& b);              // elementwise
Tensor scale(const Tensor& a, float s);
Tensor add_bias(const Tensor& x, const Tensor& b);         // [N,K]+[K] or [N,C,H,W]+[C]
Tensor sum(const Tensor& a);                               // scalar
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor global_avg_pool(const Tensor& x);                   // [N,C,H,W] -> [N,C]
Tensor cross_entropy_loss(const Tensor& logits, const std::vector<int>& labels);

// Raw kernels, shared with the layers. C is accumulated into.
void gemm_nn(const float* a, const float* b, float* c, int m, int k, int n);
void gemm_nt(const float* a, const float* b, float* c, int m, int k, int n);
void gemm_tn(const float* a, const float* b, float* c, int m, int k, int n);

struct ConvGeom {
  int out_h, out_w;
};
ConvGeom conv2d_geometry(int h, int w, int kh, int kw, int stride, int padding);

}  // namespace adaqat
