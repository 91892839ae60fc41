#include "adaqat/cost.hpp"

#include <stdexcept>
#include <string>

namespace adaqat {

namespace {

void check_bits(int k, const char* what) {
  if (k < 1) {
    throw std::domain_error(std::string(what) + " bit-width must be >= 1, got " +
                            std::to_string(k));
  }
}

void check_layer(const LayerCost& layer) {
  if (layer.filters < 1 || layer.w_f < 1 || layer.h_f < 1 || layer.s_f < 1 ||
      layer.param_count < 1) {
    throw std::invalid_argument("layer cost geometry must be positive");
  }
  if (layer.pinned) {
    check_bits(layer.pinned_w, "pinned weight");
    check_bits(layer.pinned_a, "pinned activation");
  }
}

}  // namespace

double hard_loss(int k_w, int k_a) {
  check_bits(k_w, "weight");
  check_bits(k_a, "activation");
  return static_cast<double>(k_w) * static_cast<double>(k_a);
}

double bitops_layer(const LayerCost& layer, int k_w, int k_a) {
  check_layer(layer);
  const int kw = layer.pinned ? layer.pinned_w : k_w;
  const int ka = layer.pinned ? layer.pinned_a : k_a;
  check_bits(kw, "weight");
  check_bits(ka, "activation");
  const double spatial = static_cast<double>(layer.w_f) *
                         static_cast<double>(layer.h_f) /
                         (static_cast<double>(layer.s_f) *
                          static_cast<double>(layer.s_f));
  return static_cast<double>(kw) * static_cast<double>(ka) *
         static_cast<double>(layer.filters) * spatial;
}

double bitops_network(const NetworkCost& net, int k_w, int k_a) {
  if (net.layers.empty()) throw std::invalid_argument("network cost spec is empty");
  double total = 0.0;
  for (const LayerCost& layer : net.layers) {
    total += bitops_layer(layer, k_w, k_a);
  }
  return total;
}

double weight_compression_rate(const NetworkCost& net, int k_w) {
  if (net.layers.empty()) throw std::invalid_argument("network cost spec is empty");
  check_bits(k_w, "weight");
  double weighted_bits = 0.0;
  double params = 0.0;
  for (const LayerCost& layer : net.layers) {
    check_layer(layer);
    const int bits = layer.pinned ? layer.pinned_w : k_w;
    weighted_bits += static_cast<double>(layer.param_count) * bits;
    params += static_cast<double>(layer.param_count);
  }
  return static_cast<double>(net.baseline_bits) / (weighted_bits / params);
}

}  // namespace adaqat
