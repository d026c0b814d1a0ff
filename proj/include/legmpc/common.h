#ifndef LEGMPC_COMMON_H_
#define LEGMPC_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace legmpc {

// Base for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed, corrupted or mismatched file artifacts (CLI exit code 3).
class ArtifactError : public Error {
 public:
  using Error::Error;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Wraps an angle to (-pi, pi].
double wrap_to_pi(double angle);

// Wraps an angle to [0, 2pi).
double wrap_to_2pi(double angle);

using Rng = std::mt19937_64;

// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);

// Seed of the index-th independent substream of `seed`. Used so that the
// draws for rollout i (or planning candidate i) never depend on the order in
// which other streams are consumed.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index);

std::uint32_t crc32(std::span<const std::byte> bytes);
std::uint32_t crc32(std::string_view text);

// Little-endian byte sink for the binary artifact formats.
class ByteWriter {
 public:
  void bytes(const void* data, std::size_t n);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void magic(std::string_view m) { bytes(m.data(), m.size()); }
  // Appends the CRC32 of everything written so far.
  void seal();

  const std::vector<std::byte>& buffer() const { return buf_; }
  void write_file(const std::string& path) const;

 private:
  std::vector<std::byte> buf_;
};

// Reader over a sealed buffer. Construction verifies the trailing CRC32.
class ByteReader {
 public:
  ByteReader(std::vector<std::byte> data, std::string what);
  static ByteReader from_file(const std::string& path, std::string what);

  void expect_magic(std::string_view m);
  void bytes(void* out, std::size_t n);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  bool at_end() const { return pos_ == end_; }
  const std::string& what() const { return what_; }

 private:
  std::vector<std::byte> data_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
  std::string what_;
};

}  // namespace legmpc

#endif  // LEGMPC_COMMON_H_
