#include <string>

#include "adaqat/config.hpp"
#include "doctest.h"

using namespace adaqat;

namespace {

Config text(const std::string& s) { return Config::parse_text(s, "<test>"); }

}  // namespace

TEST_CASE("sections flatten into dotted keys; comments are stripped") {
  Config c = text(
      "# leading comment\n"
      "[train]\n"
      "epochs = 5   ; trailing comment\n"
      "arch = mlp\n"
      "[data]\n"
      "dir = /tmp/x\n");
  CHECK(c.get_int("train.epochs", 0) == 5);
  CHECK(c.get_str("train.arch", "") == "mlp");
  CHECK(c.get_str("data.dir", "") == "/tmp/x");
  CHECK_FALSE(c.has("train.batch_size"));
  CHECK(c.get_int("train.batch_size", 128) == 128);
}

TEST_CASE("parse errors carry the origin and line number") {
  CHECK_THROWS_WITH_AS(text("[train\nepochs = 1\n"),
                       doctest::Contains("<test>:1"), ConfigError);
  CHECK_THROWS_WITH_AS(text("[train]\nnonsense line\n"),
                       doctest::Contains(":2"), ConfigError);
  CHECK_THROWS_AS(text("= 5\n"), ConfigError);
  CHECK_THROWS_AS(Config::parse_file("/nonexistent/path.ini"), ConfigError);
}

TEST_CASE("typed getters validate their values") {
  Config c = text("[train]\nepochs = abc\nquantize = maybe\nbase_lr = 0.1\n");
  CHECK_THROWS_WITH_AS(c.get_int("train.epochs", 1),
                       doctest::Contains("train.epochs"), ConfigError);
  CHECK_THROWS_AS(c.get_bool("train.quantize", true), ConfigError);
  CHECK(c.get_num("train.base_lr", 0.0) == doctest::Approx(0.1));

  Config b = text("[train]\nquantize = true\nalpha_decay = 0\n");
  CHECK(b.get_bool("train.quantize", false));
  CHECK_FALSE(b.get_bool("train.alpha_decay", true));
}

TEST_CASE("overrides: dotted keys must be known") {
  Config c = text("");
  c.set_override("train.epochs=9");
  CHECK(c.get_int("train.epochs", 0) == 9);
  CHECK_THROWS_WITH_AS(c.set_override("train.bogus=1"),
                       doctest::Contains("train.bogus"), ConfigError);
  CHECK_THROWS_AS(c.set_override("no_equals_sign"), ConfigError);
}

TEST_CASE("overrides: bare keys resolve against the known-key table") {
  Config c = text("");
  c.set_override("lambda=0.2");  // unique suffix -> controller.lambda
  CHECK(c.get_num("controller.lambda", 0.0) == doctest::Approx(0.2));
  c.set_override("epochs=3");
  CHECK(c.get_int("train.epochs", 0) == 3);
  CHECK_THROWS_AS(c.set_override("unknownkey=1"), ConfigError);
}

TEST_CASE("resolved config: defaults and mode-keyed values") {
  TrainConfig scratch = TrainConfig::from(text("[data]\ndir=/tmp/d\n"));
  CHECK(scratch.mode == "scratch");
  CHECK(scratch.epochs == 30);
  CHECK(scratch.base_lr == doctest::Approx(0.1));
  CHECK(scratch.momentum == doctest::Approx(0.9));
  CHECK(scratch.weight_decay == doctest::Approx(1e-4));
  CHECK(scratch.controller.eta_w == doctest::Approx(0.001));
  CHECK(scratch.controller.eta_a == doctest::Approx(0.0005));
  CHECK(scratch.controller.lambda == doctest::Approx(0.15));
  CHECK(scratch.controller.osc_threshold == 10);

  TrainConfig ft = TrainConfig::from(text(
      "[train]\nmode = finetune\ncheckpoint = /tmp/ck.bin\n[data]\ndir=/d\n"));
  CHECK(ft.epochs == 15);
  CHECK(ft.base_lr == doctest::Approx(0.01));

  // Explicit values win over mode-keyed defaults.
  TrainConfig ft2 = TrainConfig::from(
      text("[train]\nmode = finetune\ncheckpoint = /tmp/ck.bin\nepochs = 40\n"
           "base_lr = 0.3\n[data]\ndir=/d\n"));
  CHECK(ft2.epochs == 40);
  CHECK(ft2.base_lr == doctest::Approx(0.3));
}

TEST_CASE("resolved config: unknown keys are rejected with their names") {
  CHECK_THROWS_WITH_AS(TrainConfig::from(text("[train]\ntypo_key = 1\n")),
                       doctest::Contains("train.typo_key"), ConfigError);
}

TEST_CASE("resolved config: mode and file-reference consistency") {
  CHECK_THROWS_AS(
      TrainConfig::from(text("[train]\nmode = scratch\ncheckpoint = /x\n")),
      ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[train]\nmode = finetune\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[train]\nmode = warmstart\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[train]\narch = vgg\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[train]\ndataset = imagenet\n")),
                  ConfigError);
}

TEST_CASE("resolved config: range validation") {
  CHECK_THROWS_AS(TrainConfig::from(text("[train]\nepochs = 0\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[train]\nbatch_size = 0\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[train]\nbase_lr = 0\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[train]\nmomentum = 1.0\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[train]\nweight_decay = -1\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[controller]\nosc_threshold = 0\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[controller]\nmin_bits = 0\n")),
                  ConfigError);
  CHECK_THROWS_AS(
      TrainConfig::from(text("[controller]\nmin_bits = 9\nmax_bits = 8\n")),
      ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[controller]\ninit_w = 40\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from(text("[controller]\neta_w = 0\n")),
                  ConfigError);
}

TEST_CASE("resolved config: quantize off requires search off") {
  CHECK_THROWS_AS(TrainConfig::from(text("[train]\nquantize = false\n")),
                  ConfigError);
  TrainConfig ok = TrainConfig::from(
      text("[train]\nquantize = false\n[controller]\nsearch_w = false\n"
           "search_a = false\n"));
  CHECK_FALSE(ok.quantize);
}

TEST_CASE("resolved config: clusters dataset wants the dense architecture") {
  CHECK_THROWS_AS(
      TrainConfig::from(text("[train]\ndataset = blobs\narch = cnn-small\n")),
      ConfigError);
  TrainConfig ok =
      TrainConfig::from(text("[train]\ndataset = blobs\narch = mlp\n"));
  int c = 0, h = 0, w = 0;
  ok.input_dims(c, h, w);
  CHECK(c == 32);  // blob_dims default
  CHECK(h == 1);
  CHECK(w == 1);
  CHECK(ok.class_count() == 10);
}

TEST_CASE("input geometry follows the dataset") {
  TrainConfig cf = TrainConfig::from(text(""));
  int c = 0, h = 0, w = 0;
  cf.input_dims(c, h, w);
  CHECK((c == 3 && h == 32 && w == 32));

  TrainConfig mn =
      TrainConfig::from(text("[train]\ndataset = mnist\narch = mlp\n"));
  mn.input_dims(c, h, w);
  CHECK((c == 1 && h == 28 && w == 28));
}

TEST_CASE("canonical echo round-trips through the parser") {
  Config raw = text(
      "[train]\nmode = scratch\nepochs = 7\nseed = 99\n"
      "[data]\ndir = /tmp/q\n[controller]\nlambda = 0.125\n");
  TrainConfig cfg = TrainConfig::from(raw);
  const std::string echoed = cfg.echo();
  TrainConfig again = TrainConfig::from(Config::parse_text(echoed, "<echo>"));
  CHECK(again.epochs == 7);
  CHECK(again.seed == 99);
  CHECK(again.data_dir == "/tmp/q");
  CHECK(again.controller.lambda == cfg.controller.lambda);
  CHECK(again.echo() == echoed);  // fixed point
}
