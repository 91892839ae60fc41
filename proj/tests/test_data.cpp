#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "adaqat/data.hpp"
#include "adaqat/rng.hpp"
#include "doctest.h"

using namespace adaqat;
namespace fs = std::filesystem;

namespace {

// Scratch directory unique to this test binary run.
fs::path scratch_dir(const std::string& leaf) {
  fs::path p = fs::temp_directory_path() / "adaqat-data-tests" / leaf;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_bytes(const fs::path& p, const std::vector<uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  REQUIRE(static_cast<bool>(f));
}

void push_u32_be(std::vector<uint8_t>& v, uint32_t x) {
  v.push_back(static_cast<uint8_t>(x >> 24));
  v.push_back(static_cast<uint8_t>(x >> 16));
  v.push_back(static_cast<uint8_t>(x >> 8));
  v.push_back(static_cast<uint8_t>(x));
}

// Minimal IDX pair: `count` 28x28 images with pixel value = image index,
// labels cycling 0..9.
void write_idx_pair(const fs::path& dir, const std::string& images,
                    const std::string& labels, int count) {
  std::vector<uint8_t> img;
  push_u32_be(img, 2051);
  push_u32_be(img, static_cast<uint32_t>(count));
  push_u32_be(img, 28);
  push_u32_be(img, 28);
  for (int i = 0; i < count; ++i) {
    img.insert(img.end(), 28 * 28, static_cast<uint8_t>(i * 7 % 251));
  }
  write_bytes(dir / images, img);

  std::vector<uint8_t> lab;
  push_u32_be(lab, 2049);
  push_u32_be(lab, static_cast<uint32_t>(count));
  for (int i = 0; i < count; ++i) lab.push_back(static_cast<uint8_t>(i % 10));
  write_bytes(dir / labels, lab);
}

void write_mnist_fixture(const fs::path& dir, int train_n, int test_n) {
  write_idx_pair(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                 train_n);
  write_idx_pair(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte",
                 test_n);
}

}  // namespace

TEST_CASE("idx loader: parses a well-formed fixture") {
  fs::path dir = scratch_dir("mnist-ok");
  write_mnist_fixture(dir, 20, 10);
  auto [train, test] = load_mnist(dir.string());
  CHECK(train.count() == 20);
  CHECK(test.count() == 10);
  CHECK(train.class_count == 10);
  REQUIRE(train.images.shape() == std::vector<int>{20, 1, 28, 28});
  // Pixels scale to [0,1]: image 3 has constant byte 21.
  CHECK(train.images.at({3, 0, 0, 0}) == doctest::Approx(21.0 / 255.0));
  CHECK(train.labels[3] == 3);
  CHECK(train.labels[13] == 3);
}

TEST_CASE("idx loader: errors name the file and offset") {
  fs::path dir = scratch_dir("mnist-bad");

  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_mnist(dir.string()),
                         doctest::Contains("train-images-idx3-ubyte"),
                         std::runtime_error);
  }

  SUBCASE("wrong magic") {
    write_mnist_fixture(dir, 4, 2);
    std::vector<uint8_t> bad;
    push_u32_be(bad, 1234);
    push_u32_be(bad, 4);
    push_u32_be(bad, 28);
    push_u32_be(bad, 28);
    bad.insert(bad.end(), 4 * 28 * 28, 0);
    write_bytes(dir / "train-images-idx3-ubyte", bad);
    CHECK_THROWS_WITH_AS(load_mnist(dir.string()), doctest::Contains("magic"),
                         std::runtime_error);
  }

  SUBCASE("truncated pixel data") {
    write_mnist_fixture(dir, 4, 2);
    std::vector<uint8_t> img;
    push_u32_be(img, 2051);
    push_u32_be(img, 4);
    push_u32_be(img, 28);
    push_u32_be(img, 28);
    img.insert(img.end(), 3 * 28 * 28, 0);  // one image short
    write_bytes(dir / "train-images-idx3-ubyte", img);
    CHECK_THROWS_AS(load_mnist(dir.string()), std::runtime_error);
  }

  SUBCASE("label out of range") {
    write_mnist_fixture(dir, 4, 2);
    std::vector<uint8_t> lab;
    push_u32_be(lab, 2049);
    push_u32_be(lab, 4);
    lab.insert(lab.end(), {0, 1, 17, 3});
    write_bytes(dir / "train-labels-idx1-ubyte", lab);
    CHECK_THROWS_WITH_AS(load_mnist(dir.string()), doctest::Contains("17"),
                         std::runtime_error);
  }

  SUBCASE("image/label count mismatch") {
    write_mnist_fixture(dir, 4, 2);
    std::vector<uint8_t> lab;
    push_u32_be(lab, 2049);
    push_u32_be(lab, 5);
    lab.insert(lab.end(), {0, 1, 2, 3, 4});
    write_bytes(dir / "train-labels-idx1-ubyte", lab);
    CHECK_THROWS_AS(load_mnist(dir.string()), std::runtime_error);
  }
}

TEST_CASE("cifar loader: round-trips the synthetic generator's files") {
  fs::path dir = scratch_dir("cifar-ok");
  write_synthetic_cifar(dir.string(), 20, 30, 77);
  auto [train, test] = load_cifar10(dir.string(), 0, 0, 1);
  CHECK(train.count() == 100);  // 5 batches of 20
  CHECK(test.count() == 30);
  REQUIRE(train.images.shape() == std::vector<int>{100, 3, 32, 32});
  CHECK(train.class_count == 10);
  // Labels cycle through 0..9 within each written file.
  CHECK(train.labels[0] == 0);
  CHECK(train.labels[13] == 3);

  // Standardization: overall per-channel statistics should be roughly
  // centered (the generator produces near-symmetric textures).
  double sum = 0.0;
  const float* p = train.images.data();
  for (int64_t i = 0; i < train.images.size(); ++i) sum += p[i];
  CHECK(std::abs(sum / static_cast<double>(train.images.size())) < 1.5);
}

TEST_CASE("cifar loader: deterministic stratified subsets") {
  fs::path dir = scratch_dir("cifar-subset");
  write_synthetic_cifar(dir.string(), 40, 40, 88);
  auto [a_train, a_test] = load_cifar10(dir.string(), 50, 20, 9);
  auto [b_train, b_test] = load_cifar10(dir.string(), 50, 20, 9);
  auto [c_train, c_test] = load_cifar10(dir.string(), 50, 20, 10);
  CHECK(a_train.count() == 50);
  CHECK(a_test.count() == 20);

  // Same seed: identical bytes. Different seed: different selection.
  const float* pa = a_train.images.data();
  const float* pb = b_train.images.data();
  bool same = true;
  for (int64_t i = 0; i < a_train.images.size(); ++i) {
    if (pa[i] != pb[i]) same = false;
  }
  CHECK(same);
  CHECK(a_train.labels == b_train.labels);

  bool diff = a_train.labels != c_train.labels;
  const float* pc = c_train.images.data();
  for (int64_t i = 0; i < a_train.images.size() && !diff; ++i) {
    if (pa[i] != pc[i]) diff = true;
  }
  CHECK(diff);

  // Stratified: 50 over 10 classes = 5 per class.
  std::map<int, int> counts;
  for (int l : a_train.labels) ++counts[l];
  for (const auto& [cls, n] : counts) {
    (void)cls;
    CHECK(n == 5);
  }
}

TEST_CASE("cifar loader: malformed files are rejected with offsets") {
  fs::path dir = scratch_dir("cifar-bad");
  write_synthetic_cifar(dir.string(), 4, 4, 5);

  SUBCASE("trailing fragment") {
    std::ofstream f(dir / "data_batch_2.bin",
                    std::ios::binary | std::ios::app);
    f.write("\x01\x02\x03", 3);
    f.close();
    CHECK_THROWS_WITH_AS(load_cifar10(dir.string(), 0, 0, 1),
                         doctest::Contains("data_batch_2.bin"),
                         std::runtime_error);
  }

  SUBCASE("label byte out of range") {
    std::fstream f(dir / "data_batch_1.bin",
                   std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(3073);  // second record's label byte
    f.put(static_cast<char>(11));
    f.close();
    CHECK_THROWS_WITH_AS(load_cifar10(dir.string(), 0, 0, 1),
                         doctest::Contains("11"), std::runtime_error);
  }

  SUBCASE("missing batch file") {
    fs::remove(dir / "data_batch_4.bin");
    CHECK_THROWS_WITH_AS(load_cifar10(dir.string(), 0, 0, 1),
                         doctest::Contains("data_batch_4.bin"),
                         std::runtime_error);
  }
}

TEST_CASE("stratified subsets spread the remainder over the lowest classes") {
  std::vector<int> labels;
  for (int i = 0; i < 30; ++i) labels.push_back(i % 3);
  Rng rng(5);
  std::vector<int64_t> idx = stratified_subset(labels, 3, 8, rng);
  REQUIRE(idx.size() == 8);
  std::map<int, int> counts;
  for (int64_t i : idx) ++counts[labels[static_cast<size_t>(i)]];
  CHECK(counts[0] == 3);  // 8 = 3+3+2
  CHECK(counts[1] == 3);
  CHECK(counts[2] == 2);

  Rng rng2(6);
  std::vector<int> tiny = {0, 0, 1};
  CHECK_THROWS_AS(stratified_subset(tiny, 2, 4, rng2), std::invalid_argument);
}

TEST_CASE("padded crop: identity offset and zero borders") {
  // 1x2x2 image, pad 1: offsets (1,1) reproduce the input.
  const float src[4] = {1.0f, 2.0f, 3.0f, 4.0f};
  float dst[4];
  pad_crop_into(dst, src, 1, 2, 2, 1, 1, 1);
  for (int i = 0; i < 4; ++i) CHECK(dst[i] == src[i]);

  // Offset (0,0) shifts content down-right, zero-filling the top-left.
  pad_crop_into(dst, src, 1, 2, 2, 1, 0, 0);
  CHECK(dst[0] == 0.0f);
  CHECK(dst[1] == 0.0f);
  CHECK(dst[2] == 0.0f);
  CHECK(dst[3] == 1.0f);
}

TEST_CASE("horizontal flip mirrors each row per channel") {
  float img[8] = {1, 2, 3, 4, 5, 6, 7, 8};  // 2 channels of 2x2
  hflip(img, 2, 2, 2);
  CHECK(img[0] == 2.0f);
  CHECK(img[1] == 1.0f);
  CHECK(img[2] == 4.0f);
  CHECK(img[3] == 3.0f);
  CHECK(img[4] == 6.0f);
  CHECK(img[5] == 5.0f);
}

TEST_CASE("augmentation consumes the stream deterministically") {
  Rng a = Rng::stream(3, 1);
  Rng b = Rng::stream(3, 1);
  AugmentPolicy policy;
  std::vector<float> src(3 * 32 * 32, 0.5f);
  src[100] = 2.0f;
  std::vector<float> out1(src.size()), out2(src.size());
  augment_into(out1.data(), src.data(), 3, 32, 32, policy, a);
  augment_into(out2.data(), src.data(), 3, 32, 32, policy, b);
  CHECK(out1 == out2);
}

TEST_CASE("synthetic clusters are reproducible and labeled round-robin") {
  DatasetSplit a = synthetic_blobs(4, 8, 40, 11);
  DatasetSplit b = synthetic_blobs(4, 8, 40, 11);
  REQUIRE(a.images.shape() == std::vector<int>{40, 8});
  CHECK(a.class_count == 4);
  for (int i = 0; i < 40; ++i) CHECK(a.labels[i] == i % 4);
  const float* pa = a.images.data();
  const float* pb = b.images.data();
  for (int64_t i = 0; i < a.images.size(); ++i) CHECK(pa[i] == pb[i]);
}

TEST_CASE("well-separated clusters are linearly classifiable by centroid") {
  DatasetSplit d = synthetic_blobs(3, 4, 300, 12, /*separation=*/10.0,
                                   /*spread=*/0.5);
  // Nearest-centroid on the true generating labels must be near-perfect.
  std::vector<std::vector<double>> centroid(3, std::vector<double>(4, 0.0));
  std::vector<int> n(3, 0);
  const float* p = d.images.data();
  for (int i = 0; i < 300; ++i) {
    for (int j = 0; j < 4; ++j) centroid[d.labels[i]][j] += p[i * 4 + j];
    ++n[d.labels[i]];
  }
  for (int c = 0; c < 3; ++c) {
    for (int j = 0; j < 4; ++j) centroid[c][j] /= n[c];
  }
  int correct = 0;
  for (int i = 0; i < 300; ++i) {
    int best = 0;
    double best_d = 1e30;
    for (int c = 0; c < 3; ++c) {
      double dist = 0.0;
      for (int j = 0; j < 4; ++j) {
        const double diff = p[i * 4 + j] - centroid[c][j];
        dist += diff * diff;
      }
      if (dist < best_d) {
        best_d = dist;
        best = c;
      }
    }
    if (best == d.labels[i]) ++correct;
  }
  CHECK(correct >= 295);
}

TEST_CASE("batch assembly gathers rows and validates indices") {
  DatasetSplit d = synthetic_blobs(2, 3, 10, 13);
  auto [batch, labels] = make_batch(d, {1, 4, 7}, nullptr, nullptr);
  REQUIRE(batch.shape() == std::vector<int>{3, 3});
  CHECK(labels[0] == d.labels[1]);
  CHECK(labels[2] == d.labels[7]);
  const float* src = d.images.data();
  const float* dst = batch.data();
  for (int j = 0; j < 3; ++j) CHECK(dst[j] == src[1 * 3 + j]);

  CHECK_THROWS_AS(make_batch(d, {10}, nullptr, nullptr), std::out_of_range);
  CHECK_THROWS_AS(make_batch(d, {}, nullptr, nullptr), std::invalid_argument);
}

// Full-size dataset checks only run when the real archives are present.
TEST_CASE("real datasets parse at full size when available") {
  const char* mnist = std::getenv("ADAQAT_MNIST_DIR");
  if (mnist != nullptr && *mnist != '\0') {
    auto [train, test] = load_mnist(mnist);
    CHECK(train.count() == 60000);
    CHECK(test.count() == 10000);
  }
  const char* cifar = std::getenv("ADAQAT_CIFAR_DIR");
  if (cifar != nullptr && *cifar != '\0') {
    auto [train, test] = load_cifar10(cifar, 0, 0, 1);
    CHECK(train.count() == 50000);
    CHECK(test.count() == 10000);
  }
}
