#include "adaqat/controller.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <utility>

namespace adaqat {

BitWidth BitWidth::searched(float init, float lr, int min_bits, int max_bits) {
  if (init <= 0.0f) throw std::invalid_argument("bit-width init must be positive");
  if (lr <= 0.0f) throw std::invalid_argument("bit-width lr must be positive");
  if (min_bits < 1 || max_bits < min_bits) {
    throw std::invalid_argument("bit-width bounds must satisfy 1 <= min <= max");
  }
  BitWidth b;
  b.value = std::min(std::max(init, static_cast<float>(min_bits)),
                     static_cast<float>(max_bits));
  b.lr = lr;
  b.min_bits = min_bits;
  b.max_bits = max_bits;
  return b;
}

BitWidth BitWidth::fixed(int bits) {
  if (bits < 1) throw std::invalid_argument("fixed bit-width must be >= 1");
  BitWidth b;
  b.value = static_cast<float>(bits);
  b.frozen = true;
  b.frozen_value = bits;
  b.max_bits = std::max(b.max_bits, bits);
  return b;
}

int BitWidth::effective() const {
  if (frozen) return frozen_value;
  return static_cast<int>(std::ceil(value));
}

int BitWidth::lower_probe() const {
  return std::max(static_cast<int>(std::floor(value)), min_bits);
}

bool BitWidth::integral() const { return value == std::floor(value); }

void BitWidth::push_point(int point) {
  if (has_point && point != last_point) {
    const int delta = point - last_point;
    if (std::abs(delta) == 1 && last_dir != 0 && delta == -last_dir) {
      ++osc_count;
    } else {
      osc_count = 0;
    }
    last_dir = (std::abs(delta) == 1) ? delta : 0;
    prev_point = last_point;
  }
  last_point = point;
  has_point = true;
  history.push_back(point);
  if (static_cast<int>(history.size()) > kHistoryCap) {
    history.erase(history.begin());
  }
}

bool BitWidth::update(float grad) {
  if (frozen) return false;
  const float lo = static_cast<float>(min_bits) - 1.0f + kBitFloorEps;
  const float hi = static_cast<float>(max_bits);
  value = std::min(std::max(value - lr * grad, lo), hi);
  push_point(static_cast<int>(std::floor(value)));
  return true;
}

bool BitWidth::detect_and_freeze(int threshold) {
  if (frozen) return true;
  if (threshold < 1) throw std::invalid_argument("oscillation threshold must be >= 1");
  if (osc_count >= threshold) {
    frozen = true;
    frozen_value = std::max(last_point, prev_point);
  }
  return frozen;
}

namespace {

// Floor-probe loss along one axis; partner held at its effective bits.
float fd_along(const LossOracle& loss_at, const BitWidth& moving,
               int partner_eff, bool moving_is_w) {
  const int ceil_pt = moving.effective();
  const int floor_pt = moving.lower_probe();
  if (floor_pt == ceil_pt) return 0.0f;
  const float at_ceil = moving_is_w ? loss_at(ceil_pt, partner_eff)
                                    : loss_at(partner_eff, ceil_pt);
  const float at_floor = moving_is_w ? loss_at(floor_pt, partner_eff)
                                     : loss_at(partner_eff, floor_pt);
  return at_ceil - at_floor;
}

}  // namespace

float fd_gradient_w(const LossOracle& loss_at, const BitWidth& w,
                    const BitWidth& a) {
  if (w.frozen || w.integral()) return 0.0f;
  return fd_along(loss_at, w, a.effective(), true);
}

float fd_gradient_a(const LossOracle& loss_at, const BitWidth& w,
                    const BitWidth& a) {
  if (a.frozen || a.integral()) return 0.0f;
  return fd_along(loss_at, a, w.effective(), false);
}

float total_gradient(float task_grad, float hard_grad, float lambda) {
  return task_grad + lambda * hard_grad;
}

BitWidthController::BitWidthController(const ControllerConfig& cfg)
    : w_(cfg.search_w
             ? BitWidth::searched(cfg.init_w, cfg.eta_w, cfg.min_bits, cfg.max_bits)
             : BitWidth::fixed(static_cast<int>(std::ceil(cfg.init_w)))),
      a_(cfg.search_a
             ? BitWidth::searched(cfg.init_a, cfg.eta_a, cfg.min_bits, cfg.max_bits)
             : BitWidth::fixed(static_cast<int>(std::ceil(cfg.init_a)))),
      lambda_(cfg.lambda),
      osc_threshold_(cfg.osc_threshold) {
  if (cfg.lambda < 0.0f) throw std::invalid_argument("lambda must be nonnegative");
  if (cfg.update_every < 1) {
    throw std::invalid_argument("controller cadence must be >= 1");
  }
}

BitWidthController::BitWidthController(BitWidth w, BitWidth a, float lambda,
                                       int osc_threshold)
    : w_(std::move(w)), a_(std::move(a)), lambda_(lambda),
      osc_threshold_(osc_threshold) {}

ControllerReport BitWidthController::step(const LossOracle& loss_at,
                                          float base_loss) {
  ControllerReport r;
  const int eff_w = w_.effective();
  const int eff_a = a_.effective();

  // Memoized oracle seeded with the already-computed base loss, so the
  // ceiling configuration never costs an extra pass.
  std::map<std::pair<int, int>, float> cache{{{eff_w, eff_a}, base_loss}};
  auto probe = [&](int kw, int ka) {
    auto it = cache.find({kw, ka});
    if (it != cache.end()) return it->second;
    const float v = loss_at(kw, ka);
    ++r.extra_passes;
    cache.emplace(std::make_pair(kw, ka), v);
    return v;
  };
  const LossOracle memo = probe;

  const bool move_w = !w_.frozen;
  const bool move_a = !a_.frozen;

  if (move_w) {
    r.task_grad_w = fd_gradient_w(memo, w_, a_);
    r.clamped_w = !w_.integral() &&
                  static_cast<int>(std::floor(w_.value)) < w_.min_bits;
    r.hard_grad_w = static_cast<float>(eff_a);
    r.total_grad_w = total_gradient(r.task_grad_w, r.hard_grad_w, lambda_);
  }
  if (move_a) {
    r.task_grad_a = fd_gradient_a(memo, w_, a_);
    r.clamped_a = !a_.integral() &&
                  static_cast<int>(std::floor(a_.value)) < a_.min_bits;
    r.hard_grad_a = static_cast<float>(eff_w);
    r.total_grad_a = total_gradient(r.task_grad_a, r.hard_grad_a, lambda_);
  }

  if (move_w) {
    w_.update(r.total_grad_w);
    r.froze_w = w_.detect_and_freeze(osc_threshold_);
  }
  if (move_a) {
    a_.update(r.total_grad_a);
    r.froze_a = a_.detect_and_freeze(osc_threshold_);
  }

  r.value_w = w_.value;
  r.value_a = a_.value;
  r.frozen_w = w_.frozen;
  r.frozen_a = a_.frozen;
  return r;
}

}  // namespace adaqat
