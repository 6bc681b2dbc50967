#ifndef LCE_BINARY_IO_HPP
#define LCE_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "lce/error.hpp"

namespace lce::binary {

// Little-endian framing shared by the index and model files: an 8-byte magic
// followed by a u32 format version, then typed fields.

class Writer {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    buf_.insert(buf_.end(), p, p + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void header(std::string_view magic, std::uint32_t version) {
    bytes(magic.data(), magic.size());
    u32(version);
  }

  const std::vector<unsigned char>& data() const { return buf_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw Error("write failed: " + path);
  }

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> data, std::string origin = "<memory>")
      : buf_(std::move(data)), origin_(std::move(origin)) {}

  static Reader open(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open: " + path);
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(data), path);
  }

  void need(std::size_t n) const {
    if (buf_.size() - pos_ < n) throw Error("truncated file: " + origin_);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf_[pos_++]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const auto n = u64();
    need(n);
    std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  /// Length prefix for a sequence of elements each occupying at least `min_elem` bytes.
  std::uint64_t count(std::size_t min_elem) {
    const auto n = u64();
    if (min_elem > 0 && n > (buf_.size() - pos_) / min_elem) throw Error("truncated file: " + origin_);
    return n;
  }
  void header(std::string_view magic, std::uint32_t version) {
    need(magic.size());
    if (std::memcmp(buf_.data() + pos_, magic.data(), magic.size()) != 0)
      throw Error("bad magic in " + origin_);
    pos_ += magic.size();
    const auto v = u32();
    if (v != version)
      throw Error("unsupported format version " + std::to_string(v) + " in " + origin_);
  }
  void expect_end() const {
    if (pos_ != buf_.size()) throw Error("trailing bytes in " + origin_);
  }

 private:
  std::vector<unsigned char> buf_;
  std::string origin_;
  std::size_t pos_ = 0;
};

}  // namespace lce::binary

#endif
