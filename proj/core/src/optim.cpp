#include "adaqat/optim.hpp"

#include <algorithm>
#include <stdexcept>

namespace adaqat {

void sgd_step(Tensor& param, std::vector<float>& velocity, float lr,
              float momentum, float weight_decay) {
  if (!param.has_grad()) {
    throw std::logic_error("sgd_step: parameter " + param.shape_str() +
                           " has no gradient buffer");
  }
  const int64_t n = param.size();
  if (velocity.empty()) velocity.assign(static_cast<size_t>(n), 0.0f);
  if (static_cast<int64_t>(velocity.size()) != n) {
    throw std::logic_error("sgd_step: velocity size mismatch");
  }
  float* p = param.data();
  const float* g = param.grad();
  for (int64_t i = 0; i < n; ++i) {
    velocity[static_cast<size_t>(i)] =
        momentum * velocity[static_cast<size_t>(i)] +
        (g[i] + weight_decay * p[i]);
    p[i] -= lr * velocity[static_cast<size_t>(i)];
  }
}

SGD::SGD(std::vector<Entry> entries, float momentum, float weight_decay)
    : entries_(std::move(entries)), momentum_(momentum),
      weight_decay_(weight_decay) {
  if (momentum_ < 0.0f || momentum_ >= 1.0f) {
    throw std::invalid_argument("momentum must be in [0, 1)");
  }
  if (weight_decay_ < 0.0f) {
    throw std::invalid_argument("weight decay must be nonnegative");
  }
  velocities_.resize(entries_.size());
}

void SGD::step(float lr) {
  for (size_t i = 0; i < entries_.size(); ++i) {
    Entry& e = entries_[i];
    sgd_step(e.param, velocities_[i], lr, momentum_,
             weight_decay_ * e.wd_scale);
    if (e.has_min) {
      float* p = e.param.data();
      for (int64_t j = 0; j < e.param.size(); ++j) {
        p[j] = std::max(p[j], e.min_value);
      }
    }
  }
}

void SGD::zero_grad() {
  for (Entry& e : entries_) e.param.zero_grad();
}

}  // namespace adaqat
