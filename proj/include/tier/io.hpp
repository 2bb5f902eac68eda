#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tier/errors.hpp"
#include "tier/tensor.hpp"

namespace tier::io {

// CRC-32 (IEEE, reflected); "123456789" -> 0xCBF43926.
std::uint32_t crc32(const std::uint8_t* data, std::size_t len);

// Little-endian append-only byte buffer.
class Buffer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void raw(const void* data, std::size_t len);
  void str(const std::string& s);  // u32 length prefix + bytes

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::size_t size() const { return bytes_.size(); }

 private:
  std::vector<std::uint8_t> bytes_;
};

// Bounds-checked little-endian cursor over a byte buffer. Overruns raise
// IntegrityError rather than reading garbage.
class Cursor {
 public:
  Cursor(const std::uint8_t* data, std::size_t len) : data_(data), len_(len) {}
  explicit Cursor(const std::vector<std::uint8_t>& bytes) : data_(bytes.data()), len_(bytes.size()) {}

  std::uint8_t u8();
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  const std::uint8_t* raw(std::size_t len);
  std::string str();

  std::size_t remaining() const { return len_ - pos_; }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const;
  const std::uint8_t* data_;
  std::size_t len_;
  std::size_t pos_ = 0;
};

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_file(const std::string& path);

// Named-tensor table used by the checkpoint container: u32 count, then per
// entry u16 name length + name, u8 dtype tag (0 = f64), u8 ndim, u32 dims,
// little-endian f64 payload, u32 CRC of the payload bytes.
void put_tensor_table(Buffer& buf, const std::vector<std::pair<std::string, Tensor>>& entries);
std::vector<std::pair<std::string, Tensor>> get_tensor_table(Cursor& cur);

}  // namespace tier::io
