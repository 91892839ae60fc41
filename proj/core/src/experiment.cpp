#include "adaqat/experiment.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "adaqat/ops.hpp"
#include "adaqat/quantize.hpp"
#include "adaqat/rng.hpp"

namespace adaqat {
namespace {

constexpr double kPi = 3.14159265358979323846;

// Stream salts; must stay distinct from the model-init and data-selection
// salts so no two consumers share a sequence.
constexpr uint64_t kShuffleSalt = 0x73687566ULL;
constexpr uint64_t kAugmentSalt = 0x617567ULL;
constexpr uint64_t kBlobTestSalt = 0x74657374ULL;

int correct_count(const Tensor& logits, const std::vector<int>& labels) {
  const int n = logits.dim(0);
  const int k = logits.dim(1);
  const float* p = logits.data();
  int correct = 0;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < k; ++j) {
      if (p[i * k + j] > p[i * k + best]) best = j;
    }
    if (best == labels[static_cast<size_t>(i)]) ++correct;
  }
  return correct;
}

float batch_accuracy(const Tensor& logits, const std::vector<int>& labels) {
  return static_cast<float>(correct_count(logits, labels)) /
         static_cast<float>(logits.dim(0));
}

DatasetSplit take_subset(const DatasetSplit& full, int64_t target,
                         uint64_t seed, uint64_t salt) {
  if (target <= 0 || target >= full.count()) return full;
  Rng rng = Rng::stream(seed, salt);
  std::vector<int64_t> idx =
      stratified_subset(full.labels, full.class_count, target, rng);
  auto [images, labels] = make_batch(full, idx, nullptr, nullptr);
  DatasetSplit out;
  out.images = images;
  out.labels = labels;
  out.class_count = full.class_count;
  return out;
}

std::pair<DatasetSplit, DatasetSplit> load_data(const TrainConfig& cfg) {
  if (cfg.dataset == "cifar10") {
    return load_cifar10(cfg.data_dir, cfg.train_subset, cfg.test_subset,
                        cfg.seed);
  }
  if (cfg.dataset == "mnist") {
    auto [train, test] = load_mnist(cfg.data_dir);
    return {take_subset(train, cfg.train_subset, cfg.seed, 0x747261696eULL),
            take_subset(test, cfg.test_subset, cfg.seed, 0x74657374ULL)};
  }
  if (cfg.dataset == "blobs") {
    int64_t test_n = std::max<int64_t>(cfg.blob_count / 4, cfg.blob_classes);
    return {synthetic_blobs(cfg.blob_classes, cfg.blob_dims, cfg.blob_count,
                            cfg.seed, cfg.blob_separation, cfg.blob_spread),
            synthetic_blobs(cfg.blob_classes, cfg.blob_dims, test_n,
                            cfg.seed ^ kBlobTestSalt, cfg.blob_separation,
                            cfg.blob_spread)};
  }
  throw ConfigError("unknown dataset '" + cfg.dataset + "'");
}

Model build_model(const TrainConfig& cfg) {
  int c = 0, h = 0, w = 0;
  cfg.input_dims(c, h, w);
  return Model::build(cfg.arch, c, h, w, cfg.class_count(), cfg.seed);
}

SGD build_optimizer(Model& model, const TrainConfig& cfg) {
  std::vector<SGD::Entry> entries;
  for (ParamInfo& p : model.params()) {
    SGD::Entry e;
    e.name = p.name;
    e.param = p.tensor;
    if (p.is_alpha) {
      e.wd_scale = cfg.alpha_decay ? 1.0f : 0.0f;
      e.has_min = true;
      e.min_value = kAlphaMin;
    }
    entries.push_back(std::move(e));
  }
  return SGD(std::move(entries), cfg.momentum, cfg.weight_decay);
}

}  // namespace

float cosine_lr(int epoch, int total_epochs, float base_lr) {
  if (total_epochs < 1) {
    throw std::invalid_argument("cosine_lr: total_epochs must be >= 1, got " +
                                std::to_string(total_epochs));
  }
  if (epoch < 0 || epoch >= total_epochs) {
    throw std::invalid_argument(
        "cosine_lr: epoch " + std::to_string(epoch) + " outside [0, " +
        std::to_string(total_epochs) + ")");
  }
  double phase = kPi * static_cast<double>(epoch) / total_epochs;
  return static_cast<float>(base_lr * 0.5 * (1.0 + std::cos(phase)));
}

EvalMetrics evaluate(Model& model, const DatasetSplit& split, int k_w, int k_a,
                     int batch_size, bool quantize) {
  if (split.count() <= 0) {
    throw std::logic_error("evaluate: empty dataset split");
  }
  if (batch_size < 1) {
    throw std::invalid_argument("evaluate: batch_size must be >= 1");
  }
  NoGradGuard guard;
  const int64_t n = split.count();
  double loss_sum = 0.0;
  int64_t correct = 0;
  for (int64_t start = 0; start < n; start += batch_size) {
    int64_t len = std::min<int64_t>(batch_size, n - start);
    std::vector<int64_t> idx(static_cast<size_t>(len));
    std::iota(idx.begin(), idx.end(), start);
    auto [batch, labels] = make_batch(split, idx, nullptr, nullptr);
    Tensor logits = quantize ? model.forward(batch, Mode::kEval, k_w, k_a)
                             : model.forward_raw(batch, Mode::kEval);
    loss_sum += static_cast<double>(cross_entropy_loss(logits, labels).item()) *
                static_cast<double>(len);
    correct += correct_count(logits, labels);
  }
  EvalMetrics out;
  out.loss = static_cast<float>(loss_sum / static_cast<double>(n));
  out.accuracy =
      static_cast<float>(static_cast<double>(correct) / static_cast<double>(n));
  return out;
}

Trainer::Trainer(const TrainConfig& cfg)
    : cfg_(cfg),
      model_(build_model(cfg)),
      opt_(build_optimizer(model_, cfg)),
      ctl_(cfg.controller) {
  auto [train, test] = load_data(cfg_);
  train_ = std::move(train);
  test_ = std::move(test);
  if (train_.count() <= 0 || test_.count() <= 0) {
    throw ConfigError("dataset '" + cfg_.dataset + "' produced an empty split");
  }
}

Trainer::Trainer(const TrainConfig& cfg, DatasetSplit train, DatasetSplit test)
    : cfg_(cfg),
      train_(std::move(train)),
      test_(std::move(test)),
      model_(build_model(cfg)),
      opt_(build_optimizer(model_, cfg)),
      ctl_(cfg.controller) {
  if (train_.count() <= 0 || test_.count() <= 0) {
    throw std::invalid_argument("Trainer: injected split is empty");
  }
}

int Trainer::iters_per_epoch() const {
  const int64_t n = train_.count();
  const int64_t b = cfg_.batch_size;
  return n >= b ? static_cast<int>(n / b) : 1;
}

StepResult Trainer::train_step(const Tensor& batch,
                               const std::vector<int>& labels, float lr) {
  Tape tape;
  Tape::Scope scope(tape);
  Tensor logits = cfg_.quantize
                      ? model_.forward(batch, Mode::kTrain, ctl_.weight_bits(),
                                       ctl_.activation_bits())
                      : model_.forward_raw(batch, Mode::kTrain);
  Tensor loss = cross_entropy_loss(logits, labels);

  StepResult r;
  r.task_loss = loss.item();
  r.batch_acc = batch_accuracy(logits, labels);
  if (!std::isfinite(r.task_loss)) {
    std::ostringstream msg;
    msg << "training diverged: loss " << r.task_loss << " at iteration "
        << global_iter_ << " (lr " << lr << ", bits " << ctl_.weight_bits()
        << "/" << ctl_.activation_bits() << ")";
    throw std::runtime_error(msg.str());
  }
  tape.backward(loss);

  if (cfg_.quantize && !ctl_.converged() &&
      global_iter_ % cfg_.controller.update_every == 0) {
    LossOracle probe = [&](int kw, int ka) {
      NoGradGuard guard;
      Tensor lg = model_.forward(batch, Mode::kProbe, kw, ka);
      return cross_entropy_loss(lg, labels).item();
    };
    r.ctl = ctl_.step(probe, r.task_loss);
    r.ctl_ran = true;
  }

  opt_.step(lr);
  opt_.zero_grad();
  ++global_iter_;
  return r;
}

void Trainer::run_epoch(int epoch, MetricsWriter* metrics) {
  const int iters = iters_per_epoch();
  const float lr = cosine_lr(epoch, cfg_.epochs, cfg_.base_lr);
  const int64_t n = train_.count();
  const int64_t batch_n = std::min<int64_t>(cfg_.batch_size, n);

  std::vector<int64_t> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng = Rng::stream(cfg_.seed, kShuffleSalt,
                                static_cast<uint64_t>(epoch));
  shuffle_rng.shuffle(order);
  Rng aug_rng = Rng::stream(cfg_.seed, kAugmentSalt,
                            static_cast<uint64_t>(epoch));
  AugmentPolicy policy;
  const bool use_aug = cfg_.augment && train_.images.rank() == 4;

  double acc_sum = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::vector<int64_t> idx(order.begin() + it * batch_n,
                             order.begin() + it * batch_n + batch_n);
    auto [batch, labels] =
        make_batch(train_, idx, use_aug ? &policy : nullptr,
                   use_aug ? &aug_rng : nullptr);
    StepResult s = train_step(batch, labels, lr);
    acc_sum += s.batch_acc;

    if (metrics != nullptr) {
      MetricsRow row;
      row.epoch = epoch;
      row.iteration = it;
      row.task_loss = s.task_loss;
      row.hard_loss = static_cast<float>(
          hard_loss(ctl_.weight_bits(), ctl_.activation_bits()));
      row.total_loss = s.task_loss + cfg_.controller.lambda * row.hard_loss;
      row.n_w = ctl_.w().value;
      row.n_a = ctl_.a().value;
      row.ceil_n_w = ctl_.weight_bits();
      row.ceil_n_a = ctl_.activation_bits();
      row.frozen_w = ctl_.w().frozen ? 1 : 0;
      row.frozen_a = ctl_.a().frozen ? 1 : 0;
      row.train_acc = s.batch_acc;
      row.val_acc = std::numeric_limits<float>::quiet_NaN();
      row.lr = lr;
      row.extra_forward_passes = s.ctl_ran ? s.ctl.extra_passes : 0;
      metrics->append(row);
    }
  }

  const bool eval_due =
      (epoch + 1) % cfg_.eval_every == 0 || epoch == cfg_.epochs - 1;
  if (eval_due) {
    EvalMetrics ev = evaluate_test();
    if (metrics != nullptr) {
      MetricsRow row;
      row.epoch = epoch;
      row.iteration = iters;
      row.task_loss = ev.loss;
      row.hard_loss = static_cast<float>(
          hard_loss(ctl_.weight_bits(), ctl_.activation_bits()));
      row.total_loss = ev.loss + cfg_.controller.lambda * row.hard_loss;
      row.n_w = ctl_.w().value;
      row.n_a = ctl_.a().value;
      row.ceil_n_w = ctl_.weight_bits();
      row.ceil_n_a = ctl_.activation_bits();
      row.frozen_w = ctl_.w().frozen ? 1 : 0;
      row.frozen_a = ctl_.a().frozen ? 1 : 0;
      row.train_acc = static_cast<float>(acc_sum / iters);
      row.val_acc = ev.accuracy;
      row.lr = lr;
      row.extra_forward_passes = 0;
      metrics->append(row);
    }
  }
}

EvalMetrics Trainer::evaluate_test() {
  EvalMetrics ev = evaluate(model_, test_, ctl_.weight_bits(),
                            ctl_.activation_bits(), cfg_.batch_size,
                            cfg_.quantize);
  last_val_acc_ = ev.accuracy;
  return ev;
}

ExperimentReport Trainer::final_report(double wall_clock_s) const {
  ExperimentReport r;
  r.final_w = ctl_.weight_bits();
  r.final_a = ctl_.activation_bits();
  r.top1 = last_val_acc_;
  r.delta_acc = std::numeric_limits<float>::quiet_NaN();
  NetworkCost cost = model_.cost_spec();
  r.wcr = weight_compression_rate(cost, r.final_w);
  r.bitops_g = bitops_network(cost, r.final_w, r.final_a) / 1e9;
  r.wall_clock_s = wall_clock_s;
  r.seed = cfg_.seed;
  r.config_echo = cfg_.echo();
  return r;
}

void Trainer::load_params(const Checkpoint& ck) { restore_params(model_, ck); }

void Trainer::load_full(const Checkpoint& ck) {
  if (ck.seed != cfg_.seed) {
    throw ConfigError("resume seed " + std::to_string(ck.seed) +
                      " does not match configured seed " +
                      std::to_string(cfg_.seed));
  }
  restore_full(model_, opt_, ctl_, ck);
  start_epoch_ = ck.next_epoch;
  global_iter_ = static_cast<int64_t>(start_epoch_) * iters_per_epoch();
}

Checkpoint Trainer::make_checkpoint(int next_epoch) {
  return snapshot(model_, opt_, ctl_, next_epoch, cfg_.seed, cfg_.echo());
}

ExperimentReport run_experiment(const TrainConfig& cfg,
                                const EpochHook& on_epoch) {
  auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(cfg.out_dir);

  Trainer trainer(cfg);
  if (cfg.mode == "finetune") {
    trainer.load_params(load_checkpoint(cfg.checkpoint));
  }
  if (!cfg.resume.empty()) {
    trainer.load_full(load_checkpoint(cfg.resume));
  }

  MetricsWriter metrics(cfg.out_dir + "/metrics.csv");
  for (int epoch = trainer.start_epoch(); epoch < cfg.epochs; ++epoch) {
    trainer.run_epoch(epoch, &metrics);
    if (on_epoch) on_epoch(epoch, trainer);
    const bool last = epoch + 1 == cfg.epochs;
    if (!last && cfg.checkpoint_every > 0 &&
        (epoch + 1) % cfg.checkpoint_every == 0) {
      save_checkpoint(cfg.out_dir + "/ckpt-e" + std::to_string(epoch + 1) +
                          ".bin",
                      trainer.make_checkpoint(epoch + 1));
    }
  }
  if (trainer.start_epoch() >= cfg.epochs) {
    trainer.evaluate_test();  // resumed past the end: still report accuracy
  }
  save_checkpoint(cfg.out_dir + "/ckpt-final.bin",
                  trainer.make_checkpoint(cfg.epochs));

  double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count();
  ExperimentReport report = trainer.final_report(wall);
  write_report_json(cfg.out_dir + "/report.json", report);
  return report;
}

}  // namespace adaqat
