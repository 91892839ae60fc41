#include "adaqat/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace adaqat {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'A', 'D', 'A', 'Q', 'A', 'T', 'C', 'K'};
constexpr uint32_t kVersion = 1;

struct Writer {
  std::ofstream out;
  std::string path;

  explicit Writer(const std::string& p)
      : out(p, std::ios::binary | std::ios::trunc), path(p) {
    if (!out) throw std::runtime_error("cannot create checkpoint " + p);
  }
  void raw(const void* p, size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
    if (!out) throw std::runtime_error("write failed for " + path);
  }
  void u8(uint8_t v) { raw(&v, 1); }
  void u32(uint32_t v) { raw(&v, 4); }
  void i32(int32_t v) { raw(&v, 4); }
  void u64(uint64_t v) { raw(&v, 8); }
  void f32(float v) { raw(&v, 4); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
};

struct Reader {
  std::ifstream in;
  std::string path;

  explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw std::runtime_error("cannot open checkpoint " + p);
  }
  void raw(void* p, size_t n) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (!in) throw std::runtime_error(path + ": truncated checkpoint");
  }
  uint8_t u8() { uint8_t v; raw(&v, 1); return v; }
  uint32_t u32() { uint32_t v; raw(&v, 4); return v; }
  int32_t i32() { int32_t v; raw(&v, 4); return v; }
  uint64_t u64() { uint64_t v; raw(&v, 8); return v; }
  float f32() { float v; raw(&v, 4); return v; }
  std::string str() {
    const uint32_t n = u32();
    std::string s(n, '\0');
    if (n > 0) raw(s.data(), n);
    return s;
  }
};

void write_bitwidth(Writer& w, const BitWidth& b) {
  w.f32(b.value);
  w.f32(b.lr);
  w.u8(b.frozen ? 1 : 0);
  w.i32(b.frozen_value);
  w.i32(b.min_bits);
  w.i32(b.max_bits);
  w.i32(b.osc_count);
  w.i32(b.last_point);
  w.i32(b.prev_point);
  w.i32(b.last_dir);
  w.u8(b.has_point ? 1 : 0);
  w.u32(static_cast<uint32_t>(b.history.size()));
  for (int v : b.history) w.i32(v);
}

BitWidth read_bitwidth(Reader& r) {
  BitWidth b;
  b.value = r.f32();
  b.lr = r.f32();
  b.frozen = r.u8() != 0;
  b.frozen_value = r.i32();
  b.min_bits = r.i32();
  b.max_bits = r.i32();
  b.osc_count = r.i32();
  b.last_point = r.i32();
  b.prev_point = r.i32();
  b.last_dir = r.i32();
  b.has_point = r.u8() != 0;
  const uint32_t n = r.u32();
  b.history.resize(n);
  for (uint32_t i = 0; i < n; ++i) b.history[i] = r.i32();
  return b;
}

}  // namespace

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  Writer w(path);
  w.raw(kMagic, sizeof(kMagic));
  w.u32(kVersion);
  w.str(ck.config_echo);
  w.u64(ck.seed);
  w.i32(ck.next_epoch);
  w.u32(static_cast<uint32_t>(ck.tensors.size()));
  for (const auto& [name, t] : ck.tensors) {
    w.str(name);
    w.u32(static_cast<uint32_t>(t.rank()));
    for (int d = 0; d < t.rank(); ++d) w.i32(t.dim(d));
    w.raw(t.data(), sizeof(float) * static_cast<size_t>(t.size()));
  }
  write_bitwidth(w, ck.w);
  write_bitwidth(w, ck.a);
  w.f32(ck.lambda);
  w.i32(ck.osc_threshold);
}

Checkpoint load_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not a checkpoint file (bad magic)");
  }
  Checkpoint ck;
  ck.version = r.u32();
  if (ck.version != kVersion) {
    throw std::runtime_error(
        path + ": checkpoint format version " + std::to_string(ck.version) +
        " is not supported (this build reads version " +
        std::to_string(kVersion) + "); migrate the file first");
  }
  ck.config_echo = r.str();
  ck.seed = r.u64();
  ck.next_epoch = r.i32();
  const uint32_t count = r.u32();
  ck.tensors.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    const uint32_t rank = r.u32();
    std::vector<int> shape(rank);
    for (uint32_t d = 0; d < rank; ++d) shape[d] = r.i32();
    Tensor t = Tensor::zeros(shape);
    r.raw(t.data(), sizeof(float) * static_cast<size_t>(t.size()));
    ck.tensors.emplace_back(name, std::move(t));
  }
  ck.w = read_bitwidth(r);
  ck.a = read_bitwidth(r);
  ck.lambda = r.f32();
  ck.osc_threshold = r.i32();
  return ck;
}

Checkpoint snapshot(Model& model, const SGD& opt, const BitWidthController& ctl,
                    int next_epoch, uint64_t seed,
                    const std::string& config_echo) {
  Checkpoint ck;
  ck.config_echo = config_echo;
  ck.seed = seed;
  ck.next_epoch = next_epoch;
  ck.w = ctl.w();
  ck.a = ctl.a();
  ck.lambda = ctl.lambda();
  ck.osc_threshold = ctl.threshold();

  for (ParamInfo& p : model.params()) {
    ck.tensors.emplace_back("param/" + p.name, p.tensor.clone());
  }
  const auto& entries = opt.entries();
  const auto& vels = opt.velocities();
  for (size_t i = 0; i < entries.size(); ++i) {
    const Tensor& p = entries[i].param;
    Tensor v = Tensor::zeros(p.shape());
    if (!vels[i].empty()) {
      std::memcpy(v.data(), vels[i].data(), sizeof(float) * vels[i].size());
    }
    ck.tensors.emplace_back("momentum/" + entries[i].name, std::move(v));
  }
  for (BufferInfo& b : model.buffers()) {
    Tensor t = Tensor::zeros({static_cast<int>(b.data->size())});
    std::memcpy(t.data(), b.data->data(), sizeof(float) * b.data->size());
    ck.tensors.emplace_back("buffer/" + b.name, std::move(t));
  }
  return ck;
}

namespace {

void copy_into(const Checkpoint& ck, const std::string& name, float* dst,
               int64_t size) {
  const Tensor* src = ck.find(name);
  if (src == nullptr) {
    throw std::runtime_error("checkpoint is missing tensor '" + name + "'");
  }
  if (src->size() != size) {
    throw std::runtime_error("checkpoint tensor '" + name + "' has " +
                             std::to_string(src->size()) +
                             " values, model expects " + std::to_string(size));
  }
  std::memcpy(dst, src->data(), sizeof(float) * static_cast<size_t>(size));
}

}  // namespace

void restore_params(Model& model, const Checkpoint& ck) {
  for (ParamInfo& p : model.params()) {
    copy_into(ck, "param/" + p.name, p.tensor.data(), p.tensor.size());
  }
  for (BufferInfo& b : model.buffers()) {
    copy_into(ck, "buffer/" + b.name, b.data->data(),
              static_cast<int64_t>(b.data->size()));
  }
}

void restore_full(Model& model, SGD& opt, BitWidthController& ctl,
                  const Checkpoint& ck) {
  restore_params(model, ck);
  auto& entries = opt.entries();
  auto& vels = opt.velocities();
  for (size_t i = 0; i < entries.size(); ++i) {
    vels[i].assign(static_cast<size_t>(entries[i].param.size()), 0.0f);
    copy_into(ck, "momentum/" + entries[i].name, vels[i].data(),
              static_cast<int64_t>(vels[i].size()));
  }
  ctl = BitWidthController(ck.w, ck.a, ck.lambda, ck.osc_threshold);
}

}  // namespace adaqat
