#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adaqat/rng.hpp"
#include "adaqat/tensor.hpp"

namespace adaqat {

struct DatasetSplit {
  Tensor images;  // [N,C,H,W] for image data, [N,D] for vector data
  std::vector<int> labels;
  int class_count = 0;

  int64_t count() const { return static_cast<int64_t>(labels.size()); }
};

// Standard published per-channel statistics; applied by the CIFAR loader.
inline constexpr float kCifarMean[3] = {0.4914f, 0.4822f, 0.4465f};
inline constexpr float kCifarStd[3] = {0.2470f, 0.2435f, 0.2616f};
// Exposed for optional input standardization; the loader itself returns
// pixels scaled to [0,1].
inline constexpr float kMnistMean = 0.1307f;
inline constexpr float kMnistStd = 0.3081f;

// Parses the big-endian IDX pairs train-images-idx3-ubyte /
// train-labels-idx1-ubyte and t10k-*; pixels scaled to [0,1]. Malformed
// files raise a format error naming the file and byte offset.
std::pair<DatasetSplit, DatasetSplit> load_mnist(const std::string& dir);

// Parses data_batch_1..5.bin and test_batch.bin (3073-byte records: label
// byte + 3x1024 channel-major pixels), standardizes per channel, and takes
// deterministic stratified subsets when the sizes are nonzero.
std::pair<DatasetSplit, DatasetSplit> load_cifar10(const std::string& dir,
                                                   int64_t train_subset,
                                                   int64_t test_subset,
                                                   uint64_t seed);

// Per-class-balanced index selection: target/class_count indices per class
// (remainder spread over the lowest classes), chosen by seeded shuffle.
std::vector<int64_t> stratified_subset(const std::vector<int>& labels,
                                       int class_count, int64_t target,
                                       Rng& rng);

struct AugmentPolicy {
  bool pad_crop = true;
  int padding = 4;
  float flip_prob = 0.5f;
};

// dst(y,x) = src(y+dy-pad, x+dx-pad), zero outside; dy,dx in [0, 2*pad].
void pad_crop_into(float* dst, const float* src, int c, int h, int w, int pad,
                   int dy, int dx);
void hflip(float* img, int c, int h, int w);
// Draws crop offsets and the flip decision from rng.
void augment_into(float* dst, const float* src, int c, int h, int w,
                  const AugmentPolicy& policy, Rng& rng);

// Gaussian clusters on a circle (or line for dims == 1) of radius
// `separation`, point spread `spread`; linearly separable when
// separation >> spread. Labels round-robin.
DatasetSplit synthetic_blobs(int classes, int dims, int64_t n, uint64_t seed,
                             double separation = 10.0, double spread = 1.0);

// Writes a deterministic learnable 10-class image set in the CIFAR-10
// binary layout (data_batch_1..5.bin, test_batch.bin) — desk-scale stand-in
// when the real files are absent. Classes are weak gratings 18 degrees
// apart in orientation, buried under stronger class-independent carrier
// gratings with random phases plus pixel noise; color balance carries no
// class signal.
void write_synthetic_cifar(const std::string& dir, int train_per_batch,
                           int test_count, uint64_t seed);

// Gathers rows `indices` into one batch, augmenting each sample when a
// policy is given (image data only).
std::pair<Tensor, std::vector<int>> make_batch(
    const DatasetSplit& split, const std::vector<int64_t>& indices,
    const AugmentPolicy* policy, Rng* rng);

}  // namespace adaqat
