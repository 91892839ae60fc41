#include "adaqat/data.hpp"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace adaqat {

namespace {

std::vector<uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw std::runtime_error("cannot open " + path);
  const std::streamoff size = f.tellg();
  f.seekg(0);
  std::vector<uint8_t> buf(static_cast<size_t>(size));
  if (size > 0 &&
      !f.read(reinterpret_cast<char*>(buf.data()), size)) {
    throw std::runtime_error("read failed for " + path);
  }
  return buf;
}

uint32_t be32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) |
         (static_cast<uint32_t>(p[1]) << 16) |
         (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

DatasetSplit parse_idx_pair(const std::string& img_path,
                            const std::string& lbl_path) {
  const std::vector<uint8_t> img = read_file(img_path);
  if (img.size() < 16) {
    throw std::runtime_error(img_path + ": truncated IDX header (" +
                             std::to_string(img.size()) +
                             " bytes, need 16; offset " +
                             std::to_string(img.size()) + ")");
  }
  const uint32_t img_magic = be32(img.data());
  if (img_magic != 2051) {
    throw std::runtime_error(img_path + ": bad magic " +
                             std::to_string(img_magic) +
                             " at offset 0 (want 2051)");
  }
  const int64_t count = be32(img.data() + 4);
  const int64_t rows = be32(img.data() + 8);
  const int64_t cols = be32(img.data() + 12);
  const uint64_t expected = 16 + static_cast<uint64_t>(count) * rows * cols;
  if (img.size() != expected) {
    throw std::runtime_error(
        img_path + ": declared " + std::to_string(count) + " images of " +
        std::to_string(rows) + "x" + std::to_string(cols) + " need " +
        std::to_string(expected) + " bytes, file has " +
        std::to_string(img.size()) + " (mismatch at offset " +
        std::to_string(std::min<uint64_t>(expected, img.size())) + ")");
  }

  const std::vector<uint8_t> lbl = read_file(lbl_path);
  if (lbl.size() < 8) {
    throw std::runtime_error(lbl_path + ": truncated IDX header (" +
                             std::to_string(lbl.size()) +
                             " bytes, need 8; offset " +
                             std::to_string(lbl.size()) + ")");
  }
  const uint32_t lbl_magic = be32(lbl.data());
  if (lbl_magic != 2049) {
    throw std::runtime_error(lbl_path + ": bad magic " +
                             std::to_string(lbl_magic) +
                             " at offset 0 (want 2049)");
  }
  const int64_t lbl_count = be32(lbl.data() + 4);
  if (lbl.size() != 8 + static_cast<uint64_t>(lbl_count)) {
    throw std::runtime_error(
        lbl_path + ": declared " + std::to_string(lbl_count) +
        " labels need " + std::to_string(8 + lbl_count) +
        " bytes, file has " + std::to_string(lbl.size()));
  }
  if (lbl_count != count) {
    throw std::runtime_error(lbl_path + ": " + std::to_string(lbl_count) +
                             " labels but " + img_path + " holds " +
                             std::to_string(count) + " images");
  }

  DatasetSplit split;
  split.class_count = 10;
  split.labels.resize(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    const uint8_t v = lbl[static_cast<size_t>(8 + i)];
    if (v > 9) {
      throw std::runtime_error(lbl_path + ": label " + std::to_string(v) +
                               " out of range at offset " +
                               std::to_string(8 + i));
    }
    split.labels[static_cast<size_t>(i)] = v;
  }
  split.images = Tensor::zeros({static_cast<int>(count), 1,
                                static_cast<int>(rows),
                                static_cast<int>(cols)});
  float* dst = split.images.data();
  const uint8_t* src = img.data() + 16;
  const int64_t total = count * rows * cols;
  for (int64_t i = 0; i < total; ++i) {
    dst[i] = static_cast<float>(src[i]) / 255.0f;
  }
  return split;
}

constexpr int64_t kCifarRecord = 3073;

void parse_cifar_file(const std::string& path, std::vector<uint8_t>& pixels,
                      std::vector<int>& labels) {
  const std::vector<uint8_t> buf = read_file(path);
  if (buf.empty() || buf.size() % kCifarRecord != 0) {
    throw std::runtime_error(
        path + ": record misalignment: " + std::to_string(buf.size()) +
        " bytes is not a positive multiple of 3073 (trailing fragment at "
        "offset " +
        std::to_string(buf.size() - buf.size() % kCifarRecord) + ")");
  }
  const int64_t n = static_cast<int64_t>(buf.size()) / kCifarRecord;
  for (int64_t r = 0; r < n; ++r) {
    const int64_t off = r * kCifarRecord;
    const uint8_t label = buf[static_cast<size_t>(off)];
    if (label > 9) {
      throw std::runtime_error(path + ": label " + std::to_string(label) +
                               " out of range at offset " +
                               std::to_string(off));
    }
    labels.push_back(label);
    pixels.insert(pixels.end(), buf.begin() + off + 1,
                  buf.begin() + off + kCifarRecord);
  }
}

DatasetSplit cifar_split(const std::vector<uint8_t>& pixels,
                         const std::vector<int>& labels,
                         const std::vector<int64_t>& take) {
  DatasetSplit split;
  split.class_count = 10;
  const int64_t n = static_cast<int64_t>(take.size());
  split.images = Tensor::zeros({static_cast<int>(n), 3, 32, 32});
  split.labels.resize(static_cast<size_t>(n));
  float* dst = split.images.data();
  for (int64_t i = 0; i < n; ++i) {
    const int64_t src_idx = take[static_cast<size_t>(i)];
    split.labels[static_cast<size_t>(i)] = labels[static_cast<size_t>(src_idx)];
    const uint8_t* rec = pixels.data() + src_idx * 3072;
    for (int ch = 0; ch < 3; ++ch) {
      const float mean = kCifarMean[ch];
      const float inv_std = 1.0f / kCifarStd[ch];
      float* out = dst + (i * 3 + ch) * 1024;
      const uint8_t* in = rec + ch * 1024;
      for (int p = 0; p < 1024; ++p) {
        out[p] = (static_cast<float>(in[p]) / 255.0f - mean) * inv_std;
      }
    }
  }
  return split;
}

std::vector<int64_t> all_indices(int64_t n) {
  std::vector<int64_t> idx(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
  return idx;
}

}  // namespace

std::pair<DatasetSplit, DatasetSplit> load_mnist(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  DatasetSplit train = parse_idx_pair((root / "train-images-idx3-ubyte").string(),
                                      (root / "train-labels-idx1-ubyte").string());
  DatasetSplit test = parse_idx_pair((root / "t10k-images-idx3-ubyte").string(),
                                     (root / "t10k-labels-idx1-ubyte").string());
  return {std::move(train), std::move(test)};
}

std::vector<int64_t> stratified_subset(const std::vector<int>& labels,
                                       int class_count, int64_t target,
                                       Rng& rng) {
  const int64_t n = static_cast<int64_t>(labels.size());
  if (target < 1 || target > n) {
    throw std::invalid_argument("subset size " + std::to_string(target) +
                                " outside [1, " + std::to_string(n) + "]");
  }
  std::vector<std::vector<int64_t>> buckets(static_cast<size_t>(class_count));
  for (int64_t i = 0; i < n; ++i) {
    buckets[static_cast<size_t>(labels[static_cast<size_t>(i)])].push_back(i);
  }
  const int64_t base = target / class_count;
  const int64_t rem = target % class_count;
  std::vector<int64_t> out;
  out.reserve(static_cast<size_t>(target));
  for (int c = 0; c < class_count; ++c) {
    const int64_t want = base + (c < rem ? 1 : 0);
    auto& bucket = buckets[static_cast<size_t>(c)];
    if (static_cast<int64_t>(bucket.size()) < want) {
      throw std::runtime_error("class " + std::to_string(c) + " has only " +
                               std::to_string(bucket.size()) +
                               " samples, subset needs " +
                               std::to_string(want));
    }
    rng.shuffle(bucket);
    out.insert(out.end(), bucket.begin(), bucket.begin() + want);
  }
  return out;
}

std::pair<DatasetSplit, DatasetSplit> load_cifar10(const std::string& dir,
                                                   int64_t train_subset,
                                                   int64_t test_subset,
                                                   uint64_t seed) {
  namespace fs = std::filesystem;
  const fs::path root(dir);

  std::vector<uint8_t> train_px, test_px;
  std::vector<int> train_lb, test_lb;
  for (int b = 1; b <= 5; ++b) {
    parse_cifar_file((root / ("data_batch_" + std::to_string(b) + ".bin")).string(),
                     train_px, train_lb);
  }
  parse_cifar_file((root / "test_batch.bin").string(), test_px, test_lb);

  std::vector<int64_t> train_take, test_take;
  if (train_subset > 0) {
    Rng rng = Rng::stream(seed, 0x747261696eULL);  // train-selection stream
    train_take = stratified_subset(train_lb, 10, train_subset, rng);
  } else {
    train_take = all_indices(static_cast<int64_t>(train_lb.size()));
  }
  if (test_subset > 0) {
    Rng rng = Rng::stream(seed, 0x74657374ULL);  // test-selection stream
    test_take = stratified_subset(test_lb, 10, test_subset, rng);
  } else {
    test_take = all_indices(static_cast<int64_t>(test_lb.size()));
  }

  return {cifar_split(train_px, train_lb, train_take),
          cifar_split(test_px, test_lb, test_take)};
}

void pad_crop_into(float* dst, const float* src, int c, int h, int w, int pad,
                   int dy, int dx) {
  for (int ch = 0; ch < c; ++ch) {
    const float* in = src + static_cast<int64_t>(ch) * h * w;
    float* out = dst + static_cast<int64_t>(ch) * h * w;
    for (int y = 0; y < h; ++y) {
      const int sy = y + dy - pad;
      for (int x = 0; x < w; ++x) {
        const int sx = x + dx - pad;
        out[y * w + x] = (sy >= 0 && sy < h && sx >= 0 && sx < w)
                             ? in[sy * w + sx]
                             : 0.0f;
      }
    }
  }
}

void hflip(float* img, int c, int h, int w) {
  for (int ch = 0; ch < c; ++ch) {
    float* plane = img + static_cast<int64_t>(ch) * h * w;
    for (int y = 0; y < h; ++y) {
      float* row = plane + y * w;
      for (int x = 0; x < w / 2; ++x) {
        std::swap(row[x], row[w - 1 - x]);
      }
    }
  }
}

void augment_into(float* dst, const float* src, int c, int h, int w,
                  const AugmentPolicy& policy, Rng& rng) {
  if (policy.pad_crop && policy.padding > 0) {
    const int span = 2 * policy.padding + 1;
    const int dy = static_cast<int>(rng.below(span));
    const int dx = static_cast<int>(rng.below(span));
    pad_crop_into(dst, src, c, h, w, policy.padding, dy, dx);
  } else {
    std::memcpy(dst, src, sizeof(float) * static_cast<size_t>(c) * h * w);
  }
  if (policy.flip_prob > 0.0f && rng.bernoulli(policy.flip_prob)) {
    hflip(dst, c, h, w);
  }
}

DatasetSplit synthetic_blobs(int classes, int dims, int64_t n, uint64_t seed,
                             double separation, double spread) {
  if (classes < 2) throw std::invalid_argument("need at least two classes");
  if (dims < 1 || n < 1) throw std::invalid_argument("dims and n must be positive");
  Rng rng = Rng::stream(seed, 0x626c6f6273ULL);

  std::vector<double> centers(static_cast<size_t>(classes) * dims, 0.0);
  for (int c = 0; c < classes; ++c) {
    double* ctr = centers.data() + static_cast<int64_t>(c) * dims;
    if (dims == 1) {
      ctr[0] = separation * c;
    } else {
      const double theta = 2.0 * 3.14159265358979323846 * c / classes;
      ctr[0] = separation * std::cos(theta);
      ctr[1] = separation * std::sin(theta);
    }
  }

  DatasetSplit split;
  split.class_count = classes;
  split.images = Tensor::zeros({static_cast<int>(n), dims});
  split.labels.resize(static_cast<size_t>(n));
  float* dst = split.images.data();
  for (int64_t i = 0; i < n; ++i) {
    const int cls = static_cast<int>(i % classes);
    split.labels[static_cast<size_t>(i)] = cls;
    const double* ctr = centers.data() + static_cast<int64_t>(cls) * dims;
    for (int d = 0; d < dims; ++d) {
      dst[i * dims + d] =
          static_cast<float>(ctr[d] + spread * rng.gaussian());
    }
  }
  return split;
}

namespace {

// One deterministic textured sample for the synthetic image set.  The class
// signal is a weak grating whose orientation steps by 18 degrees per class,
// buried under three much stronger class-independent carrier gratings with
// random phases.  The carriers are globally phase-coherent, so their leakage
// through a detection filter does not average out under spatial pooling —
// recovering the class signal rewards filters that cancel the carriers
// precisely rather than approximately.  Color balance carries no class
// information.
void synth_record(uint8_t* rec, int cls, Rng& rng) {
  rec[0] = static_cast<uint8_t>(cls);
  const double two_pi = 2.0 * 3.14159265358979323846;
  const double theta = two_pi * (9.0 + 18.0 * cls) / 360.0;
  const double cx = std::cos(theta);
  const double sx = std::sin(theta);
  const double f_sig = 4.6;  // class-grating cycles across the 32-pixel tile
  const double f_car = 3.3;  // carrier cycles, identical for every class
  const double ph_sig = rng.uniform() * two_pi;
  const double amp = rng.uniform(19.0, 29.0);
  double car_cos[3], car_sin[3], car_ph[3];
  for (int i = 0; i < 3; ++i) {
    const double ang = two_pi * (60.0 * i) / 360.0;
    car_cos[i] = std::cos(ang);
    car_sin[i] = std::sin(ang);
    car_ph[i] = rng.uniform() * two_pi;
  }
  const double chan_gain[3] = {1.0, 0.85, 0.7};
  for (int ch = 0; ch < 3; ++ch) {
    uint8_t* plane = rec + 1 + ch * 1024;
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        const double signal =
            amp * std::sin(two_pi * f_sig * (cx * x + sx * y) / 32.0 + ph_sig);
        double carrier = 0.0;
        for (int i = 0; i < 3; ++i) {
          carrier += 55.0 * std::sin(two_pi * f_car *
                                         (car_cos[i] * x + car_sin[i] * y) /
                                         32.0 +
                                     car_ph[i]);
        }
        const double v = 128.0 + chan_gain[ch] * (signal + carrier) +
                         10.0 * rng.gaussian();
        const double clipped = std::min(std::max(v, 0.0), 255.0);
        plane[y * 32 + x] = static_cast<uint8_t>(std::lround(clipped));
      }
    }
  }
}

void write_cifar_file(const std::string& path, int count, Rng& rng) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot create " + path);
  std::vector<uint8_t> rec(3073);
  for (int i = 0; i < count; ++i) {
    synth_record(rec.data(), i % 10, rng);
    f.write(reinterpret_cast<const char*>(rec.data()),
            static_cast<std::streamsize>(rec.size()));
  }
  if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace

void write_synthetic_cifar(const std::string& dir, int train_per_batch,
                           int test_count, uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (int b = 1; b <= 5; ++b) {
    Rng rng = Rng::stream(seed, 0x63696661ULL, static_cast<uint64_t>(b));
    write_cifar_file((fs::path(dir) / ("data_batch_" + std::to_string(b) + ".bin")).string(),
                     train_per_batch, rng);
  }
  Rng rng = Rng::stream(seed, 0x63696661ULL, 100);
  write_cifar_file((fs::path(dir) / "test_batch.bin").string(), test_count,
                   rng);
}

std::pair<Tensor, std::vector<int>> make_batch(
    const DatasetSplit& split, const std::vector<int64_t>& indices,
    const AugmentPolicy* policy, Rng* rng) {
  const int64_t b = static_cast<int64_t>(indices.size());
  if (b == 0) throw std::invalid_argument("empty batch");
  std::vector<int> labels(static_cast<size_t>(b));
  std::vector<int> shape = split.images.shape();
  shape[0] = static_cast<int>(b);
  Tensor batch = Tensor::zeros(shape);
  const int64_t sample = split.images.size() / split.count();
  const float* src_all = split.images.data();
  float* dst_all = batch.data();
  const bool image_data = split.images.rank() == 4;
  for (int64_t i = 0; i < b; ++i) {
    const int64_t idx = indices[static_cast<size_t>(i)];
    if (idx < 0 || idx >= split.count()) {
      throw std::out_of_range("batch index " + std::to_string(idx) +
                              " outside dataset of " +
                              std::to_string(split.count()));
    }
    labels[static_cast<size_t>(i)] = split.labels[static_cast<size_t>(idx)];
    const float* src = src_all + idx * sample;
    float* dst = dst_all + i * sample;
    if (image_data && policy != nullptr && rng != nullptr) {
      augment_into(dst, src, split.images.dim(1), split.images.dim(2),
                   split.images.dim(3), *policy, *rng);
    } else {
      std::memcpy(dst, src, sizeof(float) * static_cast<size_t>(sample));
    }
  }
  return {std::move(batch), std::move(labels)};
}

}  // namespace adaqat
