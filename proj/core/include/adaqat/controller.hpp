#pragma once

#include <functional>
#include <vector>

namespace adaqat {

// Task loss of the current mini-batch evaluated at integer bit-widths
// (k_w, k_a). Must be free of side effects on any training state.
using LossOracle = std::function<float(int k_w, int k_a)>;

// Lower clamp for the relaxed value is min_bits - 1 + kBitFloorEps, so the
// ceiling can still reach min_bits while the floor probe stays clamped.
inline constexpr float kBitFloorEps = 1e-3f;

// Cap on the retained oscillation history; the alternation counter is
// maintained incrementally, so truncation never changes freezing behavior.
inline constexpr int kHistoryCap = 64;

// A relaxed real-valued bit-width updated by gradient descent. Quantizers
// use ceil(value) until the search freezes, then the frozen integer forever.
//
// After every update the lower probe point (clamped floor of the new value)
// is recorded; an oscillation event is a +-1 step in that record reversing
// the previous +-1 step, and any other change resets the run. Once the run
// reaches the configured threshold the bit-width freezes at the larger of
// the two alternating integers.
struct BitWidth {
  float value = 8.0f;
  float lr = 0.001f;
  bool frozen = false;
  int frozen_value = 0;
  int min_bits = 1;
  int max_bits = 32;

  std::vector<int> history;  // recorded probe points, newest last, bounded
  int osc_count = 0;
  int last_point = 0;   // most recent recorded point
  int prev_point = 0;   // point before the most recent transition
  int last_dir = 0;     // direction of the most recent +-1 transition
  bool has_point = false;

  static BitWidth searched(float init, float lr, int min_bits = 1,
                           int max_bits = 32);
  static BitWidth fixed(int bits);  // pre-frozen, e.g. the 32 sentinel

  // Bit-width the quantizers actually use.
  int effective() const;
  // Lower finite-difference probe point: floor(value) clamped to min_bits.
  int lower_probe() const;
  bool integral() const;

  // Appends a probe point and advances the alternation counter.
  void push_point(int point);

  // value <- clamp(value - lr * grad, bounds), then records the new lower
  // probe point. No-op returning false when frozen.
  bool update(float grad);

  // Freezes at the larger of the alternating pair once the counter reaches
  // the threshold. Returns the frozen flag; a frozen bit-width never changes.
  bool detect_and_freeze(int threshold);
};

struct ControllerConfig {
  float eta_w = 0.001f;
  float eta_a = 0.0005f;
  float lambda = 0.15f;
  int osc_threshold = 10;
  int update_every = 1;  // controller cadence in training iterations
  float init_w = 8.0f;
  float init_a = 8.0f;
  int min_bits = 1;
  int max_bits = 32;
  bool search_w = true;  // false: bit-width pre-frozen at ceil(init)
  bool search_a = true;
};

// Finite-difference task-loss gradients: loss at the ceiling configuration
// minus loss at the floor configuration along one axis, the other axis held
// at its effective bits. Exactly 0 (no oracle calls) for frozen or integral
// values.
float fd_gradient_w(const LossOracle& loss_at, const BitWidth& w,
                    const BitWidth& a);
float fd_gradient_a(const LossOracle& loss_at, const BitWidth& w,
                    const BitWidth& a);

// task_grad + lambda * hard_grad.
float total_gradient(float task_grad, float hard_grad, float lambda);

struct ControllerReport {
  float task_grad_w = 0.0f, task_grad_a = 0.0f;
  float hard_grad_w = 0.0f, hard_grad_a = 0.0f;
  float total_grad_w = 0.0f, total_grad_a = 0.0f;
  float value_w = 0.0f, value_a = 0.0f;  // post-update relaxed values
  bool froze_w = false, froze_a = false;  // freeze fired on this step
  bool frozen_w = false, frozen_a = false;
  bool clamped_w = false, clamped_a = false;  // floor probe hit min_bits
  int extra_passes = 0;  // oracle calls beyond the cached base loss
};

// Owns the two bit-widths and runs one gradient-descent update per call.
class BitWidthController {
 public:
  explicit BitWidthController(const ControllerConfig& cfg);
  BitWidthController(BitWidth w, BitWidth a, float lambda, int osc_threshold);

  // One update on the current mini-batch. base_loss must be the task loss
  // already computed at (weight_bits(), activation_bits()); it seeds the
  // probe cache so only genuinely new configurations cost a forward pass.
  ControllerReport step(const LossOracle& loss_at, float base_loss);

  int weight_bits() const { return w_.effective(); }
  int activation_bits() const { return a_.effective(); }
  bool converged() const { return w_.frozen && a_.frozen; }

  BitWidth& w() { return w_; }
  BitWidth& a() { return a_; }
  const BitWidth& w() const { return w_; }
  const BitWidth& a() const { return a_; }
  float lambda() const { return lambda_; }
  int threshold() const { return osc_threshold_; }

 private:
  BitWidth w_;
  BitWidth a_;
  float lambda_;
  int osc_threshold_;
};

}  // namespace adaqat
