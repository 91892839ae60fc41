#include "adaqat/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace adaqat {

namespace {

const char* kHeader =
    "epoch,iteration,task_loss,hard_loss,total_loss,N_w,N_a,ceil_N_w,"
    "ceil_N_a,frozen_w,frozen_a,train_acc,val_acc,lr,extra_forward_passes";

std::string fmt(float v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) out.push_back(cur);
  return out;
}

float to_float(const std::string& s) {
  char* end = nullptr;
  const float v = std::strtof(s.c_str(), &end);
  if (end == s.c_str()) throw std::runtime_error("bad metrics number '" + s + "'");
  return v;
}

int to_int(const std::string& s) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') {
    throw std::runtime_error("bad metrics integer '" + s + "'");
  }
  return static_cast<int>(v);
}

}  // namespace

std::string metrics_header() { return kHeader; }

std::string format_metrics_row(const MetricsRow& r) {
  std::ostringstream out;
  out << r.epoch << ',' << r.iteration << ',' << fmt(r.task_loss) << ','
      << fmt(r.hard_loss) << ',' << fmt(r.total_loss) << ',' << fmt(r.n_w)
      << ',' << fmt(r.n_a) << ',' << r.ceil_n_w << ',' << r.ceil_n_a << ','
      << r.frozen_w << ',' << r.frozen_a << ',' << fmt(r.train_acc) << ','
      << fmt(r.val_acc) << ',' << fmt(r.lr) << ',' << r.extra_forward_passes;
  return out.str();
}

MetricsRow parse_metrics_row(const std::string& line) {
  const std::vector<std::string> f = split_csv(line);
  if (f.size() != 15) {
    throw std::runtime_error("metrics row has " + std::to_string(f.size()) +
                             " fields, want 15: '" + line + "'");
  }
  MetricsRow r;
  r.epoch = to_int(f[0]);
  r.iteration = to_int(f[1]);
  r.task_loss = to_float(f[2]);
  r.hard_loss = to_float(f[3]);
  r.total_loss = to_float(f[4]);
  r.n_w = to_float(f[5]);
  r.n_a = to_float(f[6]);
  r.ceil_n_w = to_int(f[7]);
  r.ceil_n_a = to_int(f[8]);
  r.frozen_w = to_int(f[9]);
  r.frozen_a = to_int(f[10]);
  r.train_acc = to_float(f[11]);
  r.val_acc = to_float(f[12]);
  r.lr = to_float(f[13]);
  r.extra_forward_passes = to_int(f[14]);
  return r;
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file " + path);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw std::runtime_error(path + ": missing or wrong metrics header");
  }
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    rows.push_back(parse_metrics_row(line));
  }
  return rows;
}

MetricsWriter::MetricsWriter(const std::string& path)
    : out_(path, std::ios::trunc), path_(path) {
  if (!out_) throw std::runtime_error("cannot create metrics file " + path);
  out_ << kHeader << '\n';
  out_.flush();
}

void MetricsWriter::append(const MetricsRow& row) {
  out_ << format_metrics_row(row) << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("write failed for " + path_);
}

void write_report_json(const std::string& path, const ExperimentReport& r) {
  nlohmann::json j;
  j["final_w"] = r.final_w;
  j["final_a"] = r.final_a;
  j["top1"] = r.top1;
  if (std::isnan(r.delta_acc)) {
    j["delta_acc"] = nullptr;
  } else {
    j["delta_acc"] = r.delta_acc;
  }
  j["wcr"] = r.wcr;
  j["bitops_g"] = r.bitops_g;
  j["wall_clock_s"] = r.wall_clock_s;
  j["seed"] = r.seed;
  j["config"] = r.config_echo;
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create report file " + path);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for " + path);
}

ExperimentReport read_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open report file " + path);
  nlohmann::json j;
  in >> j;
  ExperimentReport r;
  r.final_w = j.at("final_w").get<int>();
  r.final_a = j.at("final_a").get<int>();
  r.top1 = j.at("top1").get<float>();
  r.delta_acc = j.at("delta_acc").is_null()
                    ? std::numeric_limits<float>::quiet_NaN()
                    : j.at("delta_acc").get<float>();
  r.wcr = j.at("wcr").get<double>();
  r.bitops_g = j.at("bitops_g").get<double>();
  r.wall_clock_s = j.at("wall_clock_s").get<double>();
  r.seed = j.at("seed").get<uint64_t>();
  r.config_echo = j.at("config").get<std::string>();
  return r;
}

}  // namespace adaqat
