// Copyright 2026 The adlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adlm/domains.hpp"
#include "adlm/errors.hpp"
#include "adlm/tokenizer.hpp"

namespace adlm {

inline constexpr char kCheckpointMagic[4] = {'A', 'D', 'L', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointErrorKind { bad_magic, bad_version, bad_crc, bad_shape };

class CheckpointError : public IoError {
 public:
  CheckpointError(CheckpointErrorKind kind, const std::string& what) : IoError(what), kind_(kind) {}
  CheckpointErrorKind kind() const { return kind_; }

 private:
  CheckpointErrorKind kind_;
};

/// On-disk layout, all integers little-endian:
///
///   "ADLM" | u32 version | u64 file length | u32 n | n bytes of config text
///   | u32 record count | records | u32 CRC32 of every preceding byte
///
/// The config text holds "key=value" lines: the LMConfig fields, the domain
/// names in registration order, the active domain and, optionally, the
/// escaped vocabulary. A record is u32 name length | name | u32 rank |
/// u64 dims | float32 payload.
struct CheckpointHeader {
  LMConfig config;
  std::vector<std::string> domains;
  std::string active{kBaseDomain};
  std::optional<Vocabulary> vocab;
};

struct LoadedCheckpoint {
  CheckpointHeader header;
  DomainRegistry<float> registry;
};

// Serialized image of a whole registry.
std::vector<std::uint8_t> encode_checkpoint(const DomainRegistry<float>& registry, const Vocabulary* vocab = nullptr);
LoadedCheckpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

// Written to "<path>.tmp" and renamed over path. Throws IoError naming the path.
void save_checkpoint(const std::string& path, const DomainRegistry<float>& registry, const Vocabulary* vocab = nullptr);
LoadedCheckpoint load_checkpoint(const std::string& path);

// Record section bytes for a list of named tensors; used to compare parameter sets bytewise.
std::vector<std::uint8_t> serialize_parameters(std::span<const NamedTensor<float>> params);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace adlm
