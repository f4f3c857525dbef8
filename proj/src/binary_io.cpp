#include "cgl/binary_io.hpp"

#include <fstream>
#include <iterator>

namespace cgl {

void ByteWriter::write_to(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw IoError(path, "write failed");
}

ByteReader ByteReader::open(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ByteReader(path, std::move(data));
}

void ByteReader::fail(const std::string& what) const {
  throw IoError(path_, what + " (at byte offset " + std::to_string(pos_) + ")");
}

void ByteReader::need(std::size_t n, const char* what) const {
  if (remaining() < n) {
    fail(std::string("truncated while reading ") + what + ": need " + std::to_string(n) +
         " bytes, " + std::to_string(remaining()) + " left");
  }
}

std::string ByteReader::bytes(std::size_t n) {
  need(n, "bytes");
  std::string out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() {
  need(1, "u8");
  return static_cast<std::uint8_t>(data_[pos_++]);
}

std::uint32_t ByteReader::u32() {
  need(4, "u32");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  need(8, "u64");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_++])) << (8 * i);
  return v;
}

}  // namespace cgl
