#pragma once

// Binary checkpoint layout (all integers and floats little-endian):
//
//   char[8]  magic "CNAVCKPT"
//   u32      format version (1)
//   u32      flags            bit 0: optimizer state present
//   u64      policy architecture hash
//   u64      value architecture hash
//   u64      iteration
//   u64      policy parameter count P, then P x f32 in layout order
//   u64      value parameter count V, then V x f32
//   [if flag 0] for policy then value: u64 adam step, count x f32 m, count x f32 v
//   u64      FNV-1a hash of every preceding byte

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdnav/adam.hpp"
#include "crowdnav/network.hpp"

namespace crowdnav {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  std::uint64_t policy_hash = 0;
  std::uint64_t value_hash = 0;
  std::uint64_t iteration = 0;
  std::vector<float> policy;
  std::vector<float> value;
  std::optional<AdamState<float>> policy_adam;
  std::optional<AdamState<float>> value_adam;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws CheckpointError on truncation, bad magic/version or checksum.
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

/// Loads and verifies the stored hashes and sizes against the expected
/// architectures.
Checkpoint load_checkpoint(const std::string& path, const nn::NetArch& policy_arch,
                           const nn::NetArch& value_arch);

}  // namespace crowdnav
