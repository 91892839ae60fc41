#pragma once

#include <cstdint>
#include <vector>

#include "adaqat/rng.hpp"
#include "adaqat/tensor.hpp"

namespace adaqat {

// Forward-pass mode for stateful layers. kTrain uses batch statistics and
// updates running statistics; kProbe uses batch statistics without touching
// them (side-effect-free loss probes); kEval uses running statistics.
enum class Mode { kTrain, kProbe, kEval };

class Conv2d {
 public:
  // Kaiming-initialized [out_ch, in_ch, ksize, ksize] filter; bias zeros.
  Conv2d(int in_ch, int out_ch, int ksize, int stride, int padding,
         bool has_bias, Rng& rng);

  // Convolves with the weight quantized at k_w bits (pass-through at the
  // 32 sentinel). Master weights are never overwritten.
  Tensor forward(const Tensor& x, int k_w);
  // Quantizer-free reference: master weights used directly.
  Tensor forward_raw(const Tensor& x);

  int64_t weight_count() const { return weight.size(); }

  Tensor weight;
  Tensor bias;  // undefined when constructed without bias
  int in_ch, out_ch, ksize, stride, padding;
};

class Linear {
 public:
  // Weight stored [in, out] so the forward is x(W) + b; Kaiming init.
  Linear(int in, int out, Rng& rng);

  Tensor forward(const Tensor& x, int k_w);
  Tensor forward_raw(const Tensor& x);

  int64_t weight_count() const { return weight.size(); }

  Tensor weight;
  Tensor bias;
  int in, out;
};

// Full-precision batch normalization over [N, C, H, W]. Uses biased batch
// variance both for normalization and for the running estimate.
class BatchNorm2d {
 public:
  explicit BatchNorm2d(int channels);

  Tensor forward(const Tensor& x, Mode mode);

  int channels() const { return channels_; }

  Tensor gamma;  // [C]
  Tensor beta;   // [C]
  std::vector<float> running_mean;
  std::vector<float> running_var;
  float momentum = 0.1f;
  float eps = 1e-5f;

 private:
  int channels_;
};

// Clipped activation with a learnable bound, quantized at k_a bits.
class PactActivation {
 public:
  PactActivation();

  Tensor forward(const Tensor& x, int k_a);
  // Quantizer-free reference: clip only.
  Tensor forward_raw(const Tensor& x);

  Tensor alpha;  // [1] parameter
};

}  // namespace adaqat
