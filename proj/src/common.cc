#include "legmpc/common.h"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace legmpc {

double wrap_to_pi(double angle) {
  double a = std::remainder(angle, kTwoPi);  // [-pi, pi]
  if (a <= -kPi) a += kTwoPi;
  return a;
}

double wrap_to_2pi(double angle) {
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a -= kTwoPi;
  return a;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

std::uint32_t crc32(std::span<const std::byte> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  const auto* p = reinterpret_cast<const Bytef*>(bytes.data());
  std::size_t left = bytes.size();
  while (left > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32(std::string_view text) {
  return crc32(std::as_bytes(std::span(text.data(), text.size())));
}

namespace {

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto raw = std::bit_cast<std::array<std::byte, sizeof(T)>>(v);
    std::reverse(raw.begin(), raw.end());
    return std::bit_cast<T>(raw);
  }
  return v;
}

}  // namespace

void ByteWriter::bytes(const void* data, std::size_t n) {
  const auto* p = static_cast<const std::byte*>(data);
  buf_.insert(buf_.end(), p, p + n);
}

void ByteWriter::u32(std::uint32_t v) {
  v = to_little(v);
  bytes(&v, sizeof v);
}

void ByteWriter::u64(std::uint64_t v) {
  v = to_little(v);
  bytes(&v, sizeof v);
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::seal() { u32(crc32(std::span<const std::byte>(buf_))); }

void ByteWriter::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ArtifactError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(buf_.data()),
            static_cast<std::streamsize>(buf_.size()));
  if (!out) throw ArtifactError("failed writing '" + path + "'");
}

ByteReader::ByteReader(std::vector<std::byte> data, std::string what)
    : data_(std::move(data)), what_(std::move(what)) {
  if (data_.size() < 4) throw ArtifactError(what_ + ": truncated (no checksum)");
  end_ = data_.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, data_.data() + end_, 4);
  stored = to_little(stored);
  const std::uint32_t actual =
      crc32(std::span<const std::byte>(data_.data(), end_));
  if (stored != actual) throw ArtifactError(what_ + ": checksum mismatch");
}

ByteReader ByteReader::from_file(const std::string& path, std::string what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError(what + ": cannot open '" + path + "'");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)),
                        std::istreambuf_iterator<char>());
  std::vector<std::byte> data(raw.size());
  std::memcpy(data.data(), raw.data(), raw.size());
  return ByteReader(std::move(data), std::move(what));
}

void ByteReader::expect_magic(std::string_view m) {
  std::string got(m.size(), '\0');
  bytes(got.data(), got.size());
  if (got != m) throw ArtifactError(what_ + ": bad magic, expected '" + std::string(m) + "'");
}

void ByteReader::bytes(void* out, std::size_t n) {
  if (n > end_ - pos_) throw ArtifactError(what_ + ": truncated");
  std::memcpy(out, data_.data() + pos_, n);
  pos_ += n;
}

std::uint32_t ByteReader::u32() {
  std::uint32_t v;
  bytes(&v, sizeof v);
  return to_little(v);
}

std::uint64_t ByteReader::u64() {
  std::uint64_t v;
  bytes(&v, sizeof v);
  return to_little(v);
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

}  // namespace legmpc
