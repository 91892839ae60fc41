#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adaqat/checkpoint.hpp"
#include "adaqat/config.hpp"
#include "adaqat/experiment.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

constexpr const char* kDataDirEnv = "ADAQAT_DATA_DIR";

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<uint64_t> seed;
  std::string out_dir;
  std::string data_dir;
};

void add_common_flags(CLI::App* cmd, CommonOpts* opts, bool config_required) {
  auto* c = cmd->add_option("--config", opts->config_path,
                            "Experiment config file (key = value sections)");
  if (config_required) c->required();
  cmd->add_option("--set", opts->sets,
                  "Override one config key, e.g. --set lambda=0.2 (repeatable)");
  cmd->add_option("--seed", opts->seed, "Override train.seed");
  cmd->add_option("--out-dir", opts->out_dir, "Override train.out_dir");
  cmd->add_option("--data-dir", opts->data_dir,
                  std::string("Override data.dir (defaults to $") + kDataDirEnv +
                      " when the config leaves it unset)");
}

// Flag > config > environment, applied as ordinary overrides so the config
// echo in reports and checkpoints reflects what actually ran.
void apply_common(adaqat::Config& cfg, const CommonOpts& opts) {
  for (const std::string& s : opts.sets) cfg.set_override(s);
  if (opts.seed) cfg.set_override("train.seed=" + std::to_string(*opts.seed));
  if (!opts.out_dir.empty()) cfg.set_override("train.out_dir=" + opts.out_dir);
  if (!opts.data_dir.empty()) {
    cfg.set_override("data.dir=" + opts.data_dir);
  } else if (!cfg.has("data.dir")) {
    const char* env = std::getenv(kDataDirEnv);
    if (env != nullptr && *env != '\0') {
      cfg.set_override(std::string("data.dir=") + env);
    }
  }
}

void check_data_dir(const adaqat::TrainConfig& cfg) {
  if (cfg.dataset == "blobs") return;
  if (cfg.data_dir.empty()) {
    throw adaqat::ConfigError(
        std::string("data.dir is not set; pass --data-dir, set it in the "
                    "config, or export ") +
        kDataDirEnv);
  }
  if (!fs::is_directory(cfg.data_dir)) {
    throw adaqat::ConfigError("dataset directory does not exist: " +
                              cfg.data_dir);
  }
}

void print_epoch(int epoch, adaqat::Trainer& t) {
  const adaqat::BitWidthController& ctl = t.controller();
  std::printf("epoch %3d  bits %2d/%-2d%s  val_acc %.4f\n", epoch,
              ctl.weight_bits(), ctl.activation_bits(),
              ctl.converged() ? " [frozen]" : "         ", t.last_val_acc());
  std::fflush(stdout);
}

void print_report(const adaqat::ExperimentReport& r,
                  const std::string& out_dir) {
  std::printf(
      "final  W/A %d/%d  top-1 %.4f  WCR %.3gx  BitOPs %.6gG  wall %.1fs\n",
      r.final_w, r.final_a, r.top1, r.wcr, r.bitops_g, r.wall_clock_s);
  std::printf("artifacts in %s\n", out_dir.c_str());
}

int cmd_train(const CommonOpts& opts) {
  adaqat::Config raw = adaqat::Config::parse_file(opts.config_path);
  apply_common(raw, opts);
  adaqat::TrainConfig cfg = adaqat::TrainConfig::from(raw);
  check_data_dir(cfg);
  adaqat::ExperimentReport report = adaqat::run_experiment(cfg, print_epoch);
  print_report(report, cfg.out_dir);
  return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& ckpt_path,
             const std::vector<int>& bits) {
  adaqat::Checkpoint ck = adaqat::load_checkpoint(ckpt_path);
  adaqat::Config raw =
      opts.config_path.empty()
          ? adaqat::Config::parse_text(ck.config_echo, ckpt_path + " (echo)")
          : adaqat::Config::parse_file(opts.config_path);
  // Pure evaluation: the checkpoint at hand supplies the weights, so drop
  // any initialization/continuation paths the original run used.
  raw.set_override("train.mode=scratch");
  raw.set_override("train.checkpoint=");
  raw.set_override("train.resume=");
  apply_common(raw, opts);
  adaqat::TrainConfig cfg = adaqat::TrainConfig::from(raw);
  check_data_dir(cfg);

  adaqat::Trainer trainer(cfg);
  trainer.load_params(ck);
  int k_w = ck.w.effective();
  int k_a = ck.a.effective();
  bool quantized = cfg.quantize;
  if (!bits.empty()) {
    k_w = bits[0];
    k_a = bits[1];
    quantized = true;
  }
  adaqat::EvalMetrics ev =
      adaqat::evaluate(trainer.model(), trainer.test_split(), k_w, k_a,
                       cfg.batch_size, quantized);
  nlohmann::json out{{"checkpoint", ckpt_path},
                     {"k_w", k_w},
                     {"k_a", k_a},
                     {"quantized", quantized},
                     {"samples", trainer.test_split().count()},
                     {"loss", ev.loss},
                     {"top1", ev.accuracy}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

std::string lambda_tag(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

// Writes the fully resolved per-run config and launches `train` on it in a
// child process; the parent harvests report.json files afterwards.
pid_t spawn_run(const std::string& config_path) {
  pid_t pid = fork();
  if (pid < 0) throw std::runtime_error("fork failed");
  if (pid == 0) {
    const char* argv[] = {"adaqat", "train", "--config", config_path.c_str(),
                          nullptr};
    execv("/proc/self/exe", const_cast<char* const*>(argv));
    std::perror("execv");
    _exit(127);
  }
  return pid;
}

int cmd_sweep(const CommonOpts& opts, const std::vector<double>& lambdas,
              bool parallel) {
  if (lambdas.size() < 2) {
    throw adaqat::ConfigError("sweep needs at least 2 lambda values, got " +
                              std::to_string(lambdas.size()));
  }
  adaqat::Config base = adaqat::Config::parse_file(opts.config_path);
  apply_common(base, opts);
  adaqat::TrainConfig base_cfg = adaqat::TrainConfig::from(base);
  check_data_dir(base_cfg);
  const std::string base_out = base_cfg.out_dir;

  // Resolve every run up front so a config problem aborts before training.
  std::vector<std::string> run_dirs;
  std::vector<adaqat::TrainConfig> run_cfgs;
  for (double lambda : lambdas) {
    adaqat::Config c = base;
    c.set_override("controller.lambda=" + lambda_tag(lambda));
    c.set_override("train.out_dir=" + base_out + "/lambda-" +
                   lambda_tag(lambda));
    run_cfgs.push_back(adaqat::TrainConfig::from(c));
    run_dirs.push_back(run_cfgs.back().out_dir);
  }

  for (size_t i = 0; i < run_cfgs.size(); ++i) {
    fs::create_directories(run_dirs[i]);
    std::ofstream out(run_dirs[i] + "/config.ini");
    out << run_cfgs[i].echo();
    if (!out) {
      throw std::runtime_error("cannot write " + run_dirs[i] + "/config.ini");
    }
  }

  if (parallel) {
    std::vector<pid_t> pids;
    for (const std::string& dir : run_dirs) {
      pids.push_back(spawn_run(dir + "/config.ini"));
    }
    bool failed = false;
    for (size_t i = 0; i < pids.size(); ++i) {
      int status = 0;
      waitpid(pids[i], &status, 0);
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        std::fprintf(stderr, "sweep: run lambda=%s failed\n",
                     lambda_tag(lambdas[i]).c_str());
        failed = true;
      }
    }
    if (failed) {
      throw std::runtime_error("sweep aborted; partial results kept under " +
                               base_out);
    }
  } else {
    for (size_t i = 0; i < run_cfgs.size(); ++i) {
      std::printf("=== lambda %s -> %s ===\n", lambda_tag(lambdas[i]).c_str(),
                  run_dirs[i].c_str());
      adaqat::run_experiment(run_cfgs[i], print_epoch);
    }
  }

  std::ofstream csv(base_out + "/sweep.csv");
  csv << "lambda,W,A,top1\n";
  std::printf("%-8s %-4s %-4s %s\n", "lambda", "W", "A", "top1");
  for (size_t i = 0; i < run_dirs.size(); ++i) {
    adaqat::ExperimentReport r =
        adaqat::read_report_json(run_dirs[i] + "/report.json");
    char top1[32];
    std::snprintf(top1, sizeof(top1), "%.9g", static_cast<double>(r.top1));
    csv << lambda_tag(lambdas[i]) << "," << r.final_w << "," << r.final_a
        << "," << top1 << "\n";
    std::printf("%-8s %-4d %-4d %.4f\n", lambda_tag(lambdas[i]).c_str(),
                r.final_w, r.final_a, r.top1);
  }
  if (!csv) throw std::runtime_error("cannot write " + base_out + "/sweep.csv");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantization-aware training with learned fractional bit-widths"};
  app.require_subcommand(1);

  CommonOpts train_opts;
  CLI::App* train = app.add_subcommand("train", "Run one training experiment");
  add_common_flags(train, &train_opts, /*config_required=*/true);

  CommonOpts eval_opts;
  std::string ckpt_path;
  std::vector<int> bits;
  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common_flags(eval, &eval_opts, /*config_required=*/false);
  eval->add_option("--checkpoint", ckpt_path, "Checkpoint to evaluate")
      ->required();
  eval->add_option("--bits", bits,
                   "Override bit-widths as two ints: --bits K_W K_A")
      ->expected(2);

  CommonOpts sweep_opts;
  std::vector<double> lambdas;
  bool parallel = false;
  CLI::App* sweep =
      app.add_subcommand("sweep", "Train once per hardware-penalty weight");
  add_common_flags(sweep, &sweep_opts, /*config_required=*/true);
  sweep->add_option("--lambdas", lambdas, "Penalty weights (at least 2)")
      ->required()
      ->delimiter(',');
  sweep->add_flag("--parallel", parallel,
                  "Run sweep points as independent child processes");

  try {
    app.parse(argc, argv);
    if (train->parsed()) return cmd_train(train_opts);
    if (eval->parsed()) return cmd_eval(eval_opts, ckpt_path, bits);
    return cmd_sweep(sweep_opts, lambdas, parallel);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const adaqat::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
