#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "toolgrasp/tensor.hpp"

namespace toolgrasp {

struct NamedTensor {
  std::string name;
  Tensor tensor;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Checkpoint layout, all integers little-endian:
//   "GLT1"
//   repeated until end of file:
//     u32 name_length, name bytes,
//     u32 rank, rank x u64 dims,
//     prod(dims) x f64 (IEEE-754 bit pattern, little-endian)
std::vector<std::uint8_t> encode_checkpoint(const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      const std::vector<std::uint8_t>& bytes);

}  // namespace toolgrasp
