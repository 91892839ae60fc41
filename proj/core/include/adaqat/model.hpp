#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "adaqat/cost.hpp"
#include "adaqat/layers.hpp"

namespace adaqat {

// Handle to one trainable parameter; the tensor shares storage with the
// owning layer. Alphas get special optimizer treatment (configurable weight
// decay, positivity projection).
struct ParamInfo {
  std::string name;
  Tensor tensor;
  bool is_alpha = false;
};

// Non-trained state (batch-norm running statistics).
struct BufferInfo {
  std::string name;
  std::vector<float>* data;
};

// One of three fixed architectures: "mlp" (flatten, two dense layers),
// "cnn-small" (four convolutions), "resnet-thin" (three residual stages of
// {8,16,32} channels). First and last layers are always pinned to 8 bits;
// interior layers follow the network-wide searched bit-widths.
class Model {
 public:
  static Model build(const std::string& arch, int in_channels, int in_h,
                     int in_w, int classes, uint64_t seed);

  // Effective bits for one layer: the 32 pass-through sentinel wins over
  // pinning; otherwise pinned layers run at 8 bits.
  static int layer_bits(int global_bits, bool pinned);

  // Forward with quantized weights/activations at network-wide (k_w, k_a).
  Tensor forward(const Tensor& x, Mode mode, int k_w, int k_a);
  // Quantizer-free reference path: master weights and clip-only activations.
  Tensor forward_raw(const Tensor& x, Mode mode);

  std::vector<ParamInfo> params();
  std::vector<BufferInfo> buffers();
  NetworkCost cost_spec() const;

  const std::string& arch() const { return arch_; }
  int classes() const { return classes_; }
  // Number of weight-carrying layers not pinned to fixed precision.
  int searchable_layer_count() const;

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

 private:
  Model() = default;

  struct ResBlock {
    std::optional<Conv2d> conv1;
    std::optional<BatchNorm2d> bn1;
    std::optional<PactActivation> act1;
    std::optional<Conv2d> conv2;
    std::optional<BatchNorm2d> bn2;
    std::optional<Conv2d> down;  // 1x1 projection when the shape changes
    std::optional<BatchNorm2d> down_bn;
    std::optional<PactActivation> act_out;
  };

  Tensor forward_impl(const Tensor& x, Mode mode, int k_w, int k_a,
                      bool quantized);
  void check_input(const Tensor& x) const;

  std::string arch_;
  int classes_ = 0;
  int in_ch_ = 0, in_h_ = 0, in_w_ = 0;

  // mlp
  std::optional<Linear> fc1_;
  std::optional<PactActivation> mlp_act_;
  std::optional<Linear> fc2_;

  // cnn-small
  std::vector<Conv2d> convs_;
  std::vector<BatchNorm2d> conv_bns_;
  std::vector<PactActivation> conv_acts_;

  // resnet-thin
  std::optional<Conv2d> stem_;
  std::optional<BatchNorm2d> stem_bn_;
  std::optional<PactActivation> stem_act_;
  std::vector<ResBlock> blocks_;
  std::optional<Linear> head_;
};

}  // namespace adaqat
