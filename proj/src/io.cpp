#include "tier/io.hpp"

#include <array>
#include <cstring>
#include <fstream>

namespace tier::io {

namespace {

std::array<std::uint32_t, 256> make_crc_table() {
  std::array<std::uint32_t, 256> table{};
  for (std::uint32_t i = 0; i < 256; ++i) {
    std::uint32_t c = i;
    for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : (c >> 1);
    table[i] = c;
  }
  return table;
}

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t len) {
  static const std::array<std::uint32_t, 256> table = make_crc_table();
  std::uint32_t c = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

void Buffer::u16(std::uint16_t v) {
  bytes_.push_back(static_cast<std::uint8_t>(v));
  bytes_.push_back(static_cast<std::uint8_t>(v >> 8));
}

void Buffer::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Buffer::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void Buffer::f32(float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  u32(bits);
}

void Buffer::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  u64(bits);
}

void Buffer::raw(const void* data, std::size_t len) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  bytes_.insert(bytes_.end(), p, p + len);
}

void Buffer::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  raw(s.data(), s.size());
}

void Cursor::need(std::size_t n) const {
  if (pos_ + n > len_) throw IntegrityError("container truncated");
}

std::uint8_t Cursor::u8() {
  need(1);
  return data_[pos_++];
}

std::uint16_t Cursor::u16() {
  need(2);
  std::uint16_t v = static_cast<std::uint16_t>(data_[pos_]) |
                    static_cast<std::uint16_t>(data_[pos_ + 1]) << 8;
  pos_ += 2;
  return v;
}

std::uint32_t Cursor::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t Cursor::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

float Cursor::f32() {
  std::uint32_t bits = u32();
  float v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

double Cursor::f64() {
  std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

const std::uint8_t* Cursor::raw(std::size_t len) {
  need(len);
  const std::uint8_t* p = data_ + pos_;
  pos_ += len;
  return p;
}

std::string Cursor::str() {
  std::uint32_t len = u32();
  const std::uint8_t* p = raw(len);
  return std::string(reinterpret_cast<const char*>(p), len);
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path);
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error("cannot open for reading: " + path);
  std::streamsize size = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw Error("read failed: " + path);
  return bytes;
}

void put_tensor_table(Buffer& buf, const std::vector<std::pair<std::string, Tensor>>& entries) {
  buf.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& [name, tensor] : entries) {
    buf.u16(static_cast<std::uint16_t>(name.size()));
    buf.raw(name.data(), name.size());
    buf.u8(0);  // dtype: f64
    buf.u8(static_cast<std::uint8_t>(tensor.ndim()));
    for (std::size_t d : tensor.shape()) buf.u32(static_cast<std::uint32_t>(d));
    Buffer payload;
    for (std::size_t i = 0; i < tensor.numel(); ++i) payload.f64(tensor[i]);
    buf.raw(payload.bytes().data(), payload.size());
    buf.u32(crc32(payload.bytes().data(), payload.size()));
  }
}

std::vector<std::pair<std::string, Tensor>> get_tensor_table(Cursor& cur) {
  std::uint32_t count = cur.u32();
  std::vector<std::pair<std::string, Tensor>> entries;
  entries.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    std::uint16_t name_len = cur.u16();
    std::string name(reinterpret_cast<const char*>(cur.raw(name_len)), name_len);
    std::uint8_t dtype = cur.u8();
    if (dtype != 0) throw IntegrityError("tensor table: unknown dtype tag", e);
    std::uint8_t ndim = cur.u8();
    std::vector<std::size_t> shape(ndim);
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      shape[d] = cur.u32();
      numel *= shape[d];
    }
    const std::uint8_t* payload = cur.raw(numel * 8);
    std::uint32_t stored = cur.u32();
    if (crc32(payload, numel * 8) != stored) {
      throw IntegrityError("tensor table: checksum mismatch in entry '" + name + "'", e);
    }
    Cursor values(payload, numel * 8);
    std::vector<double> data(numel);
    for (std::size_t i = 0; i < numel; ++i) data[i] = values.f64();
    entries.emplace_back(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return entries;
}

}  // namespace tier::io
