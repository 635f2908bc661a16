#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ifx {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 64-bit FNV-1a. Used for checkpoint checksums, config digests and seed
// derivation; stable across platforms.
class Fnv1a {
 public:
  static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
  static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

  Fnv1a& bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= kPrime;
    }
    return *this;
  }
  Fnv1a& str(std::string_view s) {
    const std::uint64_t n = s.size();
    bytes(&n, sizeof n);
    return bytes(s.data(), s.size());
  }
  Fnv1a& u64(std::uint64_t v) { return bytes(&v, sizeof v); }
  Fnv1a& i64(std::int64_t v) { return bytes(&v, sizeof v); }
  Fnv1a& f64(double v) { return bytes(&v, sizeof v); }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = kOffset;
};

inline std::uint64_t fnv1a(std::string_view s) {
  return Fnv1a{}.bytes(s.data(), s.size()).digest();
}

// splitmix64 finalizer; decorrelates derived seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  return mix64(Fnv1a{}.u64(base).str(tag).digest());
}

std::string hex64(std::uint64_t v);
std::uint64_t parse_hex64(std::string_view s);

// Deterministic random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the standard; the conversions below are written out
// so that draws do not depend on the standard library's distribution code.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  // Uniform integer in [0, n); unbiased (rejects the top partial block).
  std::uint64_t below(std::uint64_t n);
  double normal();
  // Knuth multiplication method; fine for the small means used here.
  std::uint64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temporary file and renames it over `path`, so readers
// observe either the old or the new contents.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// Shortest decimal that parses back to exactly the same double (17 sig. digits).
std::string format_double(double v);
double parse_double(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);
std::string_view trim(std::string_view s);

}  // namespace ifx
