#include "mmfusion/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

namespace mmfusion {

namespace {

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t st = seed ^ (0xD1B54A32D192ED03ULL * (stream + 1));
  splitmix64(st);
  return splitmix64(st);
}

Rng::Rng(std::uint64_t seed) : seed_(seed) {
  std::uint64_t st = seed;
  for (auto& w : s_) w = splitmix64(st);
}

Rng::Rng(const RngSnapshot& snapshot)
    : seed_(snapshot.seed),
      s_(snapshot.words),
      has_spare_(snapshot.has_spare),
      spare_(snapshot.spare) {}

std::uint64_t Rng::next_u64() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  // (k + 0.5) / 2^53 never hits 0 or 1, so log(u) in Box-Muller is finite.
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw DomainError("uniform_index: empty range");
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = -n % n;
  for (;;) {
    const std::uint64_t x = next_u64();
    if (x >= limit) return x % n;
  }
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

RngSnapshot Rng::snapshot() const { return {seed_, s_, has_spare_, spare_}; }

std::string RngSnapshot::to_string() const {
  std::ostringstream os;
  os << seed;
  for (auto w : words) os << ' ' << w;
  os << ' ' << (has_spare ? 1 : 0) << ' ' << std::bit_cast<std::uint64_t>(spare);
  return os.str();
}

RngSnapshot RngSnapshot::from_string(const std::string& text) {
  std::istringstream is(text);
  RngSnapshot s;
  int spare_flag = 0;
  std::uint64_t spare_bits = 0;
  is >> s.seed;
  for (auto& w : s.words) is >> w;
  is >> spare_flag >> spare_bits;
  if (!is) throw std::invalid_argument("malformed rng snapshot: '" + text + "'");
  s.has_spare = spare_flag != 0;
  s.spare = std::bit_cast<double>(spare_bits);
  return s;
}

Matrix gaussian_sample(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

}  // namespace mmfusion
