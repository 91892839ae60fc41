#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace adaqat {

// One logging event: controller state every training iteration, plus an
// evaluation row (val_acc set, iteration == iterations-per-epoch) per epoch.
// val_acc is NaN on non-evaluation rows.
struct MetricsRow {
  int epoch = 0;
  int iteration = 0;
  float task_loss = 0.0f;
  float hard_loss = 0.0f;
  float total_loss = 0.0f;
  float n_w = 0.0f;
  float n_a = 0.0f;
  int ceil_n_w = 0;
  int ceil_n_a = 0;
  int frozen_w = 0;
  int frozen_a = 0;
  float train_acc = 0.0f;
  float val_acc = 0.0f;
  float lr = 0.0f;
  int extra_forward_passes = 0;
};

// Exact CSV header; floats are printed with enough digits to round-trip.
std::string metrics_header();
std::string format_metrics_row(const MetricsRow& row);
MetricsRow parse_metrics_row(const std::string& line);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

// Append-only writer; the header goes out on open and every row is flushed.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);
  void append(const MetricsRow& row);

 private:
  std::ofstream out_;
  std::string path_;
};

struct ExperimentReport {
  int final_w = 0;
  int final_a = 0;
  float top1 = 0.0f;
  float delta_acc = 0.0f;  // NaN when no baseline accuracy is known
  double wcr = 0.0;
  double bitops_g = 0.0;  // giga bit-operations
  double wall_clock_s = 0.0;
  uint64_t seed = 0;
  std::string config_echo;
};

void write_report_json(const std::string& path, const ExperimentReport& r);
ExperimentReport read_report_json(const std::string& path);

}  // namespace adaqat
