// End-to-end checks of the command-line binary; each case invokes the real
// executable (path injected at compile time) through the shell.
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "adaqat/metrics.hpp"
#include "doctest.h"

#ifndef ADAQAT_CLI_PATH
#error "ADAQAT_CLI_PATH must name the command-line binary"
#endif

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch_root() {
  auto dir = fs::temp_directory_path() / "adaqat-cli-test";
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// `env_prefix` defaults to clearing the data-dir variable so an ambient
// setting on the host cannot leak into the hermetic cases.
CliResult run_cli(const std::string& args,
                  const std::string& env_prefix = "ADAQAT_DATA_DIR=") {
  static int serial = 0;
  const fs::path out_file =
      scratch_root() / ("stdout." + std::to_string(serial));
  const fs::path err_file =
      scratch_root() / ("stderr." + std::to_string(serial));
  ++serial;
  const std::string cmd = env_prefix + " '" + ADAQAT_CLI_PATH + "' " + args +
                          " > " + out_file.string() + " 2> " +
                          err_file.string();
  const int rc = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

// Small self-contained experiment config (synthetic vector data, one epoch).
fs::path write_blobs_config(const char* name, const std::string& out_dir,
                            const std::string& extra = "") {
  const fs::path path = scratch_root() / name;
  std::ofstream f(path);
  f << "[train]\n"
       "dataset = blobs\n"
       "arch = mlp\n"
       "epochs = 1\n"
       "batch_size = 64\n"
       "base_lr = 0.05\n"
       "seed = 7\n"
       "out_dir = " << out_dir << "\n"
    << extra
    << "[data]\n"
       "blob_classes = 4\n"
       "blob_dims = 8\n"
       "blob_count = 256\n";
  REQUIRE(f.good());
  return path;
}

fs::path write_cifar_config(const char* name) {
  const fs::path path = scratch_root() / name;
  std::ofstream f(path);
  f << "[train]\n"
       "dataset = cifar10\n"
       "out_dir = " << (scratch_root() / "cifar-out").string() << "\n";
  REQUIRE(f.good());
  return path;
}

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  CHECK(run_cli("").code == 2);
  CHECK(run_cli("train").code == 2);          // missing --config
  CHECK(run_cli("frobnicate").code == 2);     // unknown subcommand
  CHECK(run_cli("eval").code == 2);           // missing --checkpoint
  const CliResult missing = run_cli("train --config /nonexistent/exp.ini");
  CHECK(missing.code == 2);
  CHECK(missing.err.find("config error:") != std::string::npos);
}

TEST_CASE("help exits cleanly") {
  const CliResult top = run_cli("--help");
  CHECK(top.code == 0);
  CHECK(top.out.find("train") != std::string::npos);
  CHECK(top.out.find("sweep") != std::string::npos);
  const CliResult sub = run_cli("train --help");
  CHECK(sub.code == 0);
  CHECK(sub.out.find("--config") != std::string::npos);
}

TEST_CASE("image datasets demand an existing data directory") {
  const fs::path cfg = write_cifar_config("cifar.ini");

  CliResult r = run_cli("train --config " + cfg.string());
  CHECK(r.code == 2);
  CHECK(r.err.find("data.dir is not set") != std::string::npos);

  r = run_cli("train --config " + cfg.string() + " --data-dir /missing-flag");
  CHECK(r.code == 2);
  CHECK(r.err.find("/missing-flag") != std::string::npos);

  // The environment variable supplies the directory when nothing else does…
  r = run_cli("train --config " + cfg.string(),
              "ADAQAT_DATA_DIR=/missing-env");
  CHECK(r.code == 2);
  CHECK(r.err.find("/missing-env") != std::string::npos);

  // …and the flag wins over it.
  r = run_cli("train --config " + cfg.string() + " --data-dir /missing-flag",
              "ADAQAT_DATA_DIR=/missing-env");
  CHECK(r.code == 2);
  CHECK(r.err.find("/missing-flag") != std::string::npos);
}

TEST_CASE("train writes artifacts; flags flow into the run") {
  const fs::path out = scratch_root() / "train-out";
  fs::remove_all(out);
  const fs::path cfg = write_blobs_config("train.ini", out.string());

  const CliResult r = run_cli("train --config " + cfg.string() +
                              " --seed 123 --set lambda=0.2");
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  CHECK(r.out.find("epoch") != std::string::npos);
  CHECK(r.out.find("final") != std::string::npos);
  CHECK(fs::exists(out / "metrics.csv"));
  CHECK(fs::exists(out / "ckpt-final.bin"));

  const adaqat::ExperimentReport rep =
      adaqat::read_report_json((out / "report.json").string());
  CHECK(rep.seed == 123);  // --seed beat the config value
  CHECK(rep.config_echo.find("lambda = 0.2") != std::string::npos);
}

TEST_CASE("eval prints a stable JSON summary") {
  const fs::path out = scratch_root() / "eval-out";
  fs::remove_all(out);
  const fs::path cfg = write_blobs_config("eval.ini", out.string());
  REQUIRE(run_cli("train --config " + cfg.string()).code == 0);
  const std::string ckpt = (out / "ckpt-final.bin").string();

  // No --config: the echo embedded in the checkpoint drives evaluation.
  const CliResult a = run_cli("eval --checkpoint " + ckpt);
  CAPTURE(a.err);
  REQUIRE(a.code == 0);
  CHECK(a.out.find("\"top1\"") != std::string::npos);
  CHECK(a.out.find("\"samples\"") != std::string::npos);

  const CliResult b = run_cli("eval --checkpoint " + ckpt);
  CHECK(a.out == b.out);  // byte-identical reruns

  const CliResult forced = run_cli("eval --checkpoint " + ckpt + " --bits 3 5");
  REQUIRE(forced.code == 0);
  CHECK(forced.out.find("\"k_w\": 3") != std::string::npos);
  CHECK(forced.out.find("\"k_a\": 5") != std::string::npos);
  CHECK(forced.out.find("\"quantized\": true") != std::string::npos);

  const CliResult gone = run_cli("eval --checkpoint /nonexistent/ck.bin");
  CHECK(gone.code == 1);
  CHECK(gone.err.find("error:") != std::string::npos);
}

TEST_CASE("sweep trains one run per penalty weight and tabulates them") {
  const fs::path out = scratch_root() / "sweep-out";
  fs::remove_all(out);
  const fs::path cfg = write_blobs_config("sweep.ini", out.string());

  // A sweep over a single value is a configuration mistake.
  const CliResult single =
      run_cli("sweep --config " + cfg.string() + " --lambdas 0.1");
  CHECK(single.code == 2);
  CHECK(single.err.find("at least 2") != std::string::npos);

  const CliResult r =
      run_cli("sweep --config " + cfg.string() + " --lambdas 0.1,0.2");
  CAPTURE(r.err);
  REQUIRE(r.code == 0);

  for (const char* tag : {"lambda-0.1", "lambda-0.2"}) {
    CHECK(fs::exists(out / tag / "config.ini"));
    CHECK(fs::exists(out / tag / "report.json"));
    CHECK(fs::exists(out / tag / "metrics.csv"));
  }
  const std::string csv = slurp(out / "sweep.csv");
  CHECK(csv.find("lambda,W,A,top1\n") == 0);
  CHECK(csv.find("\n0.1,") != std::string::npos);
  CHECK(csv.find("\n0.2,") != std::string::npos);
  // Each per-run config pinned its own penalty weight.
  CHECK(slurp(out / "lambda-0.2" / "config.ini").find("lambda = 0.2") !=
        std::string::npos);
}

TEST_CASE("parallel sweep produces the same artifacts") {
  const fs::path out = scratch_root() / "sweep-par";
  fs::remove_all(out);
  const fs::path cfg = write_blobs_config("sweep_par.ini", out.string());
  const CliResult r = run_cli("sweep --config " + cfg.string() +
                              " --lambdas 0.1,0.2 --parallel");
  CAPTURE(r.err);
  REQUIRE(r.code == 0);
  CHECK(fs::exists(out / "sweep.csv"));
  // A sequential sweep of the same config reaches identical results.
  const fs::path out2 = scratch_root() / "sweep-seq";
  fs::remove_all(out2);
  const fs::path cfg2 = write_blobs_config("sweep_seq.ini", out2.string());
  REQUIRE(run_cli("sweep --config " + cfg2.string() + " --lambdas 0.1,0.2")
              .code == 0);
  CHECK(slurp(out / "sweep.csv") == slurp(out2 / "sweep.csv"));
}
