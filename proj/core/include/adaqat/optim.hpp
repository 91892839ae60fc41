#pragma once

#include <string>
#include <vector>

#include "adaqat/tensor.hpp"

namespace adaqat {

// v <- momentum*v + (grad + weight_decay*param); param <- param - lr*v.
// velocity is resized to the parameter on first use. Throws std::logic_error
// when the parameter carries no gradient buffer.
void sgd_step(Tensor& param, std::vector<float>& velocity, float lr,
              float momentum, float weight_decay);

// Momentum SGD over a fixed parameter list. Per-entry weight-decay scaling
// covers the alpha-decay toggle, and an optional lower clamp keeps clipping
// bounds positive after each step.
class SGD {
 public:
  struct Entry {
    std::string name;
    Tensor param;
    float wd_scale = 1.0f;
    bool has_min = false;
    float min_value = 0.0f;
  };

  SGD(std::vector<Entry> entries, float momentum, float weight_decay);

  void step(float lr);
  void zero_grad();

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<std::vector<float>>& velocities() { return velocities_; }
  const std::vector<std::vector<float>>& velocities() const {
    return velocities_;
  }
  float momentum() const { return momentum_; }
  float weight_decay() const { return weight_decay_; }

 private:
  std::vector<Entry> entries_;
  std::vector<std::vector<float>> velocities_;
  float momentum_;
  float weight_decay_;
};

}  // namespace adaqat
