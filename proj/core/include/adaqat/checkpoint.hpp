#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "adaqat/controller.hpp"
#include "adaqat/model.hpp"
#include "adaqat/optim.hpp"
#include "adaqat/tensor.hpp"

namespace adaqat {

// Versioned binary container: 8-byte magic, format version, config echo,
// seed and next epoch, then named tensor records (name length + bytes, rank,
// extents, raw little-endian float32 data), then the bit-width search state.
// Records are prefixed param/, momentum/ or buffer/ by origin.
struct Checkpoint {
  uint32_t version = 1;
  std::string config_echo;
  uint64_t seed = 0;
  int next_epoch = 0;
  BitWidth w;
  BitWidth a;
  float lambda = 0.15f;
  int osc_threshold = 10;
  std::vector<std::pair<std::string, Tensor>> tensors;

  const Tensor* find(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

// Deep-copies the full training state into a checkpoint.
Checkpoint snapshot(Model& model, const SGD& opt, const BitWidthController& ctl,
                    int next_epoch, uint64_t seed,
                    const std::string& config_echo);

// Restores parameters and buffers only (fine-tune initialization).
void restore_params(Model& model, const Checkpoint& ck);

// Restores parameters, buffers, optimizer momenta, and the controller
// (bit-identical training continuation).
void restore_full(Model& model, SGD& opt, BitWidthController& ctl,
                  const Checkpoint& ck);

}  // namespace adaqat
