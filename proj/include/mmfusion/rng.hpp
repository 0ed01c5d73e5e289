#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

#include "mmfusion/matrix.hpp"

namespace mmfusion {

/// Serializable snapshot of an Rng; restoring it continues the exact stream.
struct RngSnapshot {
  std::uint64_t seed = 0;
  std::array<std::uint64_t, 4> words{};
  bool has_spare = false;
  double spare = 0.0;

  bool operator==(const RngSnapshot&) const = default;
  std::string to_string() const;
  static RngSnapshot from_string(const std::string& text);
};

/// xoshiro256** seeded through splitmix64, with Box-Muller normals.
///
/// The stream depends only on the seed, never on the platform's <random>.
/// Normals are produced in pairs; the second value of each pair is cached.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);
  explicit Rng(const RngSnapshot& snapshot);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1), 53 bits of resolution.
  double uniform();
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();

  std::uint64_t seed() const { return seed_; }
  RngSnapshot snapshot() const;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> s_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& state);

/// Seed for an independent substream, e.g. per grid cell or per data split.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// rows x cols matrix of i.i.d. standard normal draws, filled row-major.
Matrix gaussian_sample(Rng& rng, std::size_t rows, std::size_t cols);

}  // namespace mmfusion
