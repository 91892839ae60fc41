#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

#include "adaqat/controller.hpp"

namespace adaqat {

// Configuration problems (bad keys, types, inconsistent modes, missing
// files named in the config). The CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// key = value file with [section] headers; entries are stored flattened as
// "section.key". '#' and ';' start comments. Unknown keys are rejected
// against the known-key table when building a TrainConfig.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_text(const std::string& text, const std::string& origin);

  // Applies one "key=value" override. A bare key (no dot) resolves to the
  // unique known key with that name; ambiguity or unknown keys raise
  // ConfigError.
  void set_override(const std::string& assignment);

  bool has(const std::string& key) const;
  std::string get_str(const std::string& key, const std::string& fallback) const;
  double get_num(const std::string& key, double fallback) const;
  int64_t get_int(const std::string& key, int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
  std::string origin_ = "<config>";
};

// Fully resolved experiment description.
struct TrainConfig {
  // [train]
  std::string mode = "scratch";  // scratch | finetune
  std::string arch = "resnet-thin";
  std::string dataset = "cifar10";  // cifar10 | mnist | blobs
  int epochs = 30;
  int batch_size = 128;
  float base_lr = 0.1f;
  float momentum = 0.9f;
  float weight_decay = 1e-4f;
  uint64_t seed = 1;
  int eval_every = 1;        // epochs between held-out evaluations
  int checkpoint_every = 1;  // epochs between checkpoint writes
  bool quantize = true;      // false: quantizer-free reference harness
  bool alpha_decay = true;   // weight decay on clipping bounds
  std::string checkpoint;    // finetune initialization (tensors only)
  std::string resume;        // full-state training continuation
  std::string out_dir = "runs/exp";

  // [data]
  std::string data_dir;
  int64_t train_subset = 0;  // 0 = full split
  int64_t test_subset = 0;
  bool augment = true;
  int blob_classes = 10;
  int blob_dims = 32;
  int64_t blob_count = 4000;
  double blob_separation = 10.0;
  double blob_spread = 1.0;

  // [controller]
  ControllerConfig controller;

  // Validates keys, types, ranges, and mode consistency; fills mode-keyed
  // defaults (base_lr 0.1/0.01 and epochs 30/15 for scratch/finetune).
  static TrainConfig from(const Config& cfg);

  // Input geometry implied by the dataset.
  void input_dims(int& channels, int& h, int& w) const;
  int class_count() const;

  // Canonical "section.key = value" lines for reports and checkpoints;
  // parse_text() of this round-trips.
  std::string echo() const;
};

}  // namespace adaqat
