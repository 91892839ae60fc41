#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adaqat/checkpoint.hpp"
#include "adaqat/config.hpp"
#include "adaqat/controller.hpp"
#include "adaqat/data.hpp"
#include "adaqat/metrics.hpp"
#include "adaqat/model.hpp"
#include "adaqat/optim.hpp"

namespace adaqat {

// base_lr * 0.5 * (1 + cos(pi * epoch / total_epochs)).
float cosine_lr(int epoch, int total_epochs, float base_lr);

struct EvalMetrics {
  float loss = 0.0f;
  float accuracy = 0.0f;
};

// Top-1 accuracy and mean loss over the split at the given bits, running
// statistics and no augmentation; mutates nothing.
EvalMetrics evaluate(Model& model, const DatasetSplit& split, int k_w, int k_a,
                     int batch_size, bool quantize = true);

struct StepResult {
  float task_loss = 0.0f;
  float batch_acc = 0.0f;
  bool ctl_ran = false;
  ControllerReport ctl;
};

// Owns the full training state for one experiment: model, optimizer,
// bit-width controller, data splits, and the per-epoch random streams.
class Trainer {
 public:
  // Loads the datasets named by the config.
  explicit Trainer(const TrainConfig& cfg);
  // Injected data (unit tests, synthetic experiments).
  Trainer(const TrainConfig& cfg, DatasetSplit train, DatasetSplit test);

  // Forward/backward/controller/SGD on one prepared batch.
  StepResult train_step(const Tensor& batch, const std::vector<int>& labels,
                        float lr);

  // Shuffles, augments, and steps through one epoch, appending one metrics
  // row per iteration plus an evaluation row when due.
  void run_epoch(int epoch, MetricsWriter* metrics);

  // Evaluation at the current effective bits.
  EvalMetrics evaluate_test();

  ExperimentReport final_report(double wall_clock_s) const;

  Model& model() { return model_; }
  SGD& optimizer() { return opt_; }
  BitWidthController& controller() { return ctl_; }
  const TrainConfig& config() const { return cfg_; }
  const DatasetSplit& train_split() const { return train_; }
  const DatasetSplit& test_split() const { return test_; }
  int iters_per_epoch() const;
  float last_val_acc() const { return last_val_acc_; }

  // Fine-tune initialization (parameters and buffers only).
  void load_params(const Checkpoint& ck);
  // Full-state restore; continues from ck.next_epoch.
  void load_full(const Checkpoint& ck);
  Checkpoint make_checkpoint(int next_epoch);
  int start_epoch() const { return start_epoch_; }

 private:
  void init(const TrainConfig& cfg);

  TrainConfig cfg_;
  DatasetSplit train_;
  DatasetSplit test_;
  Model model_;
  SGD opt_;
  BitWidthController ctl_;
  int start_epoch_ = 0;
  int64_t global_iter_ = 0;
  float last_val_acc_ = 0.0f;
};

// Called after each completed epoch (progress reporting).
using EpochHook = std::function<void(int epoch, Trainer& trainer)>;

// Full run: epochs of training with checkpointing and metrics under
// cfg.out_dir (metrics.csv, report.json, ckpt-e<N>.bin, ckpt-final.bin).
ExperimentReport run_experiment(const TrainConfig& cfg,
                                const EpochHook& on_epoch = nullptr);

}  // namespace adaqat
