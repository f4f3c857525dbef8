#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace cgl {

/// File-system or format failure; the message always carries the path.
class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, const std::string& what)
      : std::runtime_error(path.string() + ": " + what) {}
};

/// Little-endian byte sink.
class ByteWriter {
 public:
  void bytes(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(std::span<const double> vs) {
    for (double v : vs) f64(v);
  }

  const std::string& buffer() const noexcept { return buf_; }
  void write_to(const std::filesystem::path& path) const;

 private:
  std::string buf_;
};

/// Little-endian byte source over an in-memory file image. Reads past the end
/// throw IoError naming the offset.
class ByteReader {
 public:
  ByteReader(std::filesystem::path path, std::string data)
      : path_(std::move(path)), data_(std::move(data)) {}

  static ByteReader open(const std::filesystem::path& path);

  std::string bytes(std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64() { return std::bit_cast<double>(u64()); }
  void f64s(std::span<double> out) {
    for (double& v : out) v = f64();
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  [[noreturn]] void fail(const std::string& what) const;

 private:
  void need(std::size_t n, const char* what) const;

  std::filesystem::path path_;
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace cgl
