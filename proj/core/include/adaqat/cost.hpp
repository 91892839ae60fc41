#pragma once

#include <cstdint>
#include <vector>

namespace adaqat {

// Per-layer geometry feeding the bit-operation count. filters is the filter
// cardinality |f| (output channels x input channels for conv); w_f, h_f are
// the filter's spatial extents and s_f its stride. Dense layers use
// filters == param_count and w_f = h_f = s_f = 1.
struct LayerCost {
  enum class Kind { kConv, kDense };
  Kind kind = Kind::kConv;
  int64_t filters = 1;
  int w_f = 1;
  int h_f = 1;
  int s_f = 1;
  bool pinned = false;      // fixed-precision layer (first/last)
  int pinned_w = 8;
  int pinned_a = 8;
  int64_t param_count = 1;
};

struct NetworkCost {
  std::vector<LayerCost> layers;
  int baseline_bits = 32;
};

// Hardware penalty: the product k_w * k_a.
double hard_loss(int k_w, int k_a);

// k_w * k_a * |f| * w_f * h_f / s_f^2; pinned layers use their pinned bits.
double bitops_layer(const LayerCost& layer, int k_w, int k_a);

// Sum of bitops_layer over the network.
double bitops_network(const NetworkCost& net, int k_w, int k_a);

// baseline_bits over the parameter-count-weighted mean weight bit-width
// (pinned layers contribute their pinned bits).
double weight_compression_rate(const NetworkCost& net, int k_w);

}  // namespace adaqat
