#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mmfusion/param_store.hpp"

namespace mmfusion {

// Parameter checkpoint, all integers little-endian:
//
//   "FVW1"  u32 version  u32 count
//   count x { u16 name_len, name bytes, u32 rows, u32 cols, rows*cols f64 }
//
// Values are stored as raw IEEE-754 bits, so a round trip is bit-exact.

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedMatrix {
  std::string name;
  Matrix value;
  bool operator==(const NamedMatrix&) const = default;
};

std::string encode_checkpoint(const ParamStore& store);
std::vector<NamedMatrix> decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store);
std::vector<NamedMatrix> read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into the store; every store entry must be
/// present with a matching shape. Extra checkpoint entries are an error too.
void restore_params(const std::vector<NamedMatrix>& saved, ParamStore& store);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::string& bytes);

}  // namespace mmfusion
