#include "adaqat/config.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace adaqat {

namespace {

constexpr std::array kKnownKeys = {
    "train.mode",          "train.arch",
    "train.dataset",       "train.epochs",
    "train.batch_size",    "train.base_lr",
    "train.momentum",      "train.weight_decay",
    "train.seed",          "train.eval_every",
    "train.checkpoint_every", "train.quantize",
    "train.alpha_decay",   "train.checkpoint",
    "train.resume",        "train.out_dir",
    "data.dir",            "data.train_subset",
    "data.test_subset",    "data.augment",
    "data.blob_classes",   "data.blob_dims",
    "data.blob_count",     "data.blob_separation",
    "data.blob_spread",    "controller.eta_w",
    "controller.eta_a",    "controller.lambda",
    "controller.osc_threshold", "controller.update_every",
    "controller.init_w",   "controller.init_a",
    "controller.min_bits", "controller.max_bits",
    "controller.search_w", "controller.search_a",
};

bool known_key(const std::string& key) {
  for (const char* k : kKnownKeys) {
    if (key == k) return true;
  }
  return false;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string fmt_float(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

Config Config::parse_text(const std::string& text, const std::string& origin) {
  Config cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const size_t comment = line.find_first_of("#;");
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": malformed section header '" + line + "'");
      }
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value', got '" + line + "'");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": empty key");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    cfg.kv_[full] = value;
  }
  return cfg;
}

Config Config::parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::ostringstream text;
  text << f.rdbuf();
  return parse_text(text.str(), path);
}

void Config::set_override(const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment +
                      "' must have the form key=value");
  }
  std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  if (key.find('.') == std::string::npos) {
    std::string resolved;
    int matches = 0;
    for (const char* k : kKnownKeys) {
      const std::string full(k);
      if (full.size() > key.size() &&
          full.compare(full.size() - key.size(), key.size(), key) == 0 &&
          full[full.size() - key.size() - 1] == '.') {
        ++matches;
        resolved = full;
      }
    }
    if (matches == 0) {
      throw ConfigError("override key '" + key + "' matches no known key");
    }
    if (matches > 1) {
      throw ConfigError("override key '" + key +
                        "' is ambiguous; qualify it as section.key");
    }
    key = resolved;
  } else if (!known_key(key)) {
    throw ConfigError("unknown config key '" + key + "'");
  }
  kv_[key] = value;
}

bool Config::has(const std::string& key) const { return kv_.count(key) > 0; }

std::string Config::get_str(const std::string& key,
                            const std::string& fallback) const {
  auto it = kv_.find(key);
  return it == kv_.end() ? fallback : it->second;
}

double Config::get_num(const std::string& key, double fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  char* end = nullptr;
  const double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError(origin_ + ": key '" + key + "' needs a number, got '" +
                      it->second + "'");
  }
  return v;
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  char* end = nullptr;
  const long long v = std::strtoll(it->second.c_str(), &end, 10);
  if (end == it->second.c_str() || *end != '\0') {
    throw ConfigError(origin_ + ": key '" + key + "' needs an integer, got '" +
                      it->second + "'");
  }
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  auto it = kv_.find(key);
  if (it == kv_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(origin_ + ": key '" + key + "' needs a boolean, got '" +
                    v + "'");
}

TrainConfig TrainConfig::from(const Config& cfg) {
  for (const auto& [key, value] : cfg.entries()) {
    (void)value;
    if (!known_key(key)) {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }

  TrainConfig tc;
  tc.mode = cfg.get_str("train.mode", tc.mode);
  if (tc.mode != "scratch" && tc.mode != "finetune") {
    throw ConfigError("train.mode must be scratch or finetune, got '" +
                      tc.mode + "'");
  }
  const bool scratch = tc.mode == "scratch";

  tc.arch = cfg.get_str("train.arch", tc.arch);
  if (tc.arch != "mlp" && tc.arch != "cnn-small" && tc.arch != "resnet-thin") {
    throw ConfigError("train.arch must be mlp, cnn-small or resnet-thin, "
                      "got '" + tc.arch + "'");
  }
  tc.dataset = cfg.get_str("train.dataset", tc.dataset);
  if (tc.dataset != "cifar10" && tc.dataset != "mnist" &&
      tc.dataset != "blobs") {
    throw ConfigError("train.dataset must be cifar10, mnist or blobs, got '" +
                      tc.dataset + "'");
  }
  if (tc.dataset == "blobs" && tc.arch != "mlp") {
    throw ConfigError("dataset blobs provides vector data; train.arch must "
                      "be mlp");
  }

  tc.epochs = static_cast<int>(cfg.get_int("train.epochs", scratch ? 30 : 15));
  tc.batch_size = static_cast<int>(cfg.get_int("train.batch_size", 128));
  tc.base_lr = static_cast<float>(
      cfg.get_num("train.base_lr", scratch ? 0.1 : 0.01));
  tc.momentum = static_cast<float>(cfg.get_num("train.momentum", 0.9));
  tc.weight_decay = static_cast<float>(cfg.get_num("train.weight_decay", 1e-4));
  tc.seed = static_cast<uint64_t>(cfg.get_int("train.seed", 1));
  tc.eval_every = static_cast<int>(cfg.get_int("train.eval_every", 1));
  tc.checkpoint_every =
      static_cast<int>(cfg.get_int("train.checkpoint_every", 1));
  tc.quantize = cfg.get_bool("train.quantize", true);
  tc.alpha_decay = cfg.get_bool("train.alpha_decay", true);
  tc.checkpoint = cfg.get_str("train.checkpoint", "");
  tc.resume = cfg.get_str("train.resume", "");
  tc.out_dir = cfg.get_str("train.out_dir", tc.out_dir);

  if (tc.epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (tc.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (tc.base_lr <= 0.0f) throw ConfigError("train.base_lr must be positive");
  if (tc.momentum < 0.0f || tc.momentum >= 1.0f) {
    throw ConfigError("train.momentum must be in [0, 1)");
  }
  if (tc.weight_decay < 0.0f) {
    throw ConfigError("train.weight_decay must be nonnegative");
  }
  if (tc.eval_every < 1) throw ConfigError("train.eval_every must be >= 1");
  if (tc.checkpoint_every < 0) {
    throw ConfigError("train.checkpoint_every must be >= 0");
  }
  if (scratch && !tc.checkpoint.empty()) {
    throw ConfigError("train.checkpoint is only valid in finetune mode; "
                      "scratch runs start from random initialization");
  }
  if (!scratch && tc.checkpoint.empty()) {
    throw ConfigError("finetune mode requires train.checkpoint");
  }

  tc.data_dir = cfg.get_str("data.dir", "");
  tc.train_subset = cfg.get_int("data.train_subset", 0);
  tc.test_subset = cfg.get_int("data.test_subset", 0);
  tc.augment = cfg.get_bool("data.augment", true);
  tc.blob_classes = static_cast<int>(cfg.get_int("data.blob_classes", 10));
  tc.blob_dims = static_cast<int>(cfg.get_int("data.blob_dims", 32));
  tc.blob_count = cfg.get_int("data.blob_count", 4000);
  tc.blob_separation = cfg.get_num("data.blob_separation", 10.0);
  tc.blob_spread = cfg.get_num("data.blob_spread", 1.0);
  if (tc.train_subset < 0 || tc.test_subset < 0) {
    throw ConfigError("data subsets must be nonnegative");
  }
  if (tc.blob_classes < 2 || tc.blob_dims < 1 || tc.blob_count < 1) {
    throw ConfigError("blob geometry must be positive (>= 2 classes)");
  }

  ControllerConfig& cc = tc.controller;
  cc.eta_w = static_cast<float>(cfg.get_num("controller.eta_w", cc.eta_w));
  cc.eta_a = static_cast<float>(cfg.get_num("controller.eta_a", cc.eta_a));
  cc.lambda = static_cast<float>(cfg.get_num("controller.lambda", cc.lambda));
  cc.osc_threshold =
      static_cast<int>(cfg.get_int("controller.osc_threshold", cc.osc_threshold));
  cc.update_every =
      static_cast<int>(cfg.get_int("controller.update_every", cc.update_every));
  cc.init_w = static_cast<float>(cfg.get_num("controller.init_w", cc.init_w));
  cc.init_a = static_cast<float>(cfg.get_num("controller.init_a", cc.init_a));
  cc.min_bits = static_cast<int>(cfg.get_int("controller.min_bits", cc.min_bits));
  cc.max_bits = static_cast<int>(cfg.get_int("controller.max_bits", cc.max_bits));
  cc.search_w = cfg.get_bool("controller.search_w", cc.search_w);
  cc.search_a = cfg.get_bool("controller.search_a", cc.search_a);

  if (cc.eta_w <= 0.0f || cc.eta_a <= 0.0f) {
    throw ConfigError("controller learning rates must be positive");
  }
  if (cc.lambda < 0.0f) throw ConfigError("controller.lambda must be >= 0");
  if (cc.osc_threshold < 1) {
    throw ConfigError("controller.osc_threshold must be >= 1");
  }
  if (cc.update_every < 1) {
    throw ConfigError("controller.update_every must be >= 1");
  }
  if (cc.min_bits < 1 || cc.max_bits < cc.min_bits || cc.max_bits > 32) {
    throw ConfigError("controller bit bounds must satisfy "
                      "1 <= min_bits <= max_bits <= 32");
  }
  if (cc.init_w < 1.0f || cc.init_w > static_cast<float>(cc.max_bits) ||
      cc.init_a < 1.0f || cc.init_a > static_cast<float>(cc.max_bits)) {
    throw ConfigError("controller init bit-widths must lie in "
                      "[1, max_bits]");
  }
  if (!tc.quantize && (cc.search_w || cc.search_a)) {
    throw ConfigError("bit-width search requires train.quantize = true");
  }
  return tc;
}

void TrainConfig::input_dims(int& channels, int& h, int& w) const {
  if (dataset == "cifar10") {
    channels = 3; h = 32; w = 32;
  } else if (dataset == "mnist") {
    channels = 1; h = 28; w = 28;
  } else {
    channels = blob_dims; h = 1; w = 1;
  }
}

int TrainConfig::class_count() const {
  return dataset == "blobs" ? blob_classes : 10;
}

std::string TrainConfig::echo() const {
  std::ostringstream out;
  out << "[train]\n";
  out << "mode = " << mode << "\n";
  out << "arch = " << arch << "\n";
  out << "dataset = " << dataset << "\n";
  out << "epochs = " << epochs << "\n";
  out << "batch_size = " << batch_size << "\n";
  out << "base_lr = " << fmt_float(base_lr) << "\n";
  out << "momentum = " << fmt_float(momentum) << "\n";
  out << "weight_decay = " << fmt_float(weight_decay) << "\n";
  out << "seed = " << seed << "\n";
  out << "eval_every = " << eval_every << "\n";
  out << "checkpoint_every = " << checkpoint_every << "\n";
  out << "quantize = " << (quantize ? "true" : "false") << "\n";
  out << "alpha_decay = " << (alpha_decay ? "true" : "false") << "\n";
  if (!checkpoint.empty()) out << "checkpoint = " << checkpoint << "\n";
  if (!resume.empty()) out << "resume = " << resume << "\n";
  out << "out_dir = " << out_dir << "\n";
  out << "[data]\n";
  if (!data_dir.empty()) out << "dir = " << data_dir << "\n";
  out << "train_subset = " << train_subset << "\n";
  out << "test_subset = " << test_subset << "\n";
  out << "augment = " << (augment ? "true" : "false") << "\n";
  out << "blob_classes = " << blob_classes << "\n";
  out << "blob_dims = " << blob_dims << "\n";
  out << "blob_count = " << blob_count << "\n";
  out << "blob_separation = " << fmt_float(blob_separation) << "\n";
  out << "blob_spread = " << fmt_float(blob_spread) << "\n";
  out << "[controller]\n";
  out << "eta_w = " << fmt_float(controller.eta_w) << "\n";
  out << "eta_a = " << fmt_float(controller.eta_a) << "\n";
  out << "lambda = " << fmt_float(controller.lambda) << "\n";
  out << "osc_threshold = " << controller.osc_threshold << "\n";
  out << "update_every = " << controller.update_every << "\n";
  out << "init_w = " << fmt_float(controller.init_w) << "\n";
  out << "init_a = " << fmt_float(controller.init_a) << "\n";
  out << "min_bits = " << controller.min_bits << "\n";
  out << "max_bits = " << controller.max_bits << "\n";
  out << "search_w = " << (controller.search_w ? "true" : "false") << "\n";
  out << "search_a = " << (controller.search_a ? "true" : "false") << "\n";
  return out.str();
}

}  // namespace adaqat
