// Writes the deterministic synthetic image set in CIFAR-10 binary layout,
// for exercising the trainer without any real dataset download.
#include <cstdint>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "adaqat/data.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic dataset in CIFAR-10 binary layout"};
  std::string out_dir;
  int train_per_batch = 1200;
  int test_count = 1000;
  uint64_t seed = 99;
  app.add_option("--out", out_dir, "Output directory for the .bin files")
      ->required();
  app.add_option("--train-per-batch", train_per_batch,
                 "Samples per data_batch_N.bin (5 batches are written)")
      ->check(CLI::PositiveNumber);
  app.add_option("--test", test_count, "Samples in test_batch.bin")
      ->check(CLI::PositiveNumber);
  app.add_option("--seed", seed, "Generator seed");
  CLI11_PARSE(app, argc, argv);

  try {
    adaqat::write_synthetic_cifar(out_dir, train_per_batch, test_count, seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  std::printf("wrote %d train + %d test samples to %s\n", 5 * train_per_batch,
              test_count, out_dir.c_str());
  return 0;
}
