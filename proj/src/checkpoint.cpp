//
// SPDX-License-Identifier: Apache-2.0
//

#include "msde/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace msde {
namespace {
  constexpr char kMagic[] = "MSDE1";
  constexpr size_t kMagicLen = 5;

  void put_u64(std::string &out, uint64_t v) {
    for (int k = 0; k < 8; ++k)
      out.push_back(static_cast<char>((v >> (8 * k)) & 0xFF));
  }

  class Reader {
  public:
    Reader(const std::string &bytes, size_t pos): bytes_(bytes), pos_(pos) { }

    bool done() const { return pos_ == bytes_.size(); }

    uint64_t u64() {
      need(8);
      uint64_t v = 0;
      for (int k = 0; k < 8; ++k)
        v |= static_cast<uint64_t>(static_cast<unsigned char>(bytes_[pos_++]))
             << (8 * k);
      return v;
    }

    std::string str(uint64_t n) {
      need(n);
      std::string s = bytes_.substr(pos_, n);
      pos_ += n;
      return s;
    }

  private:
    void need(uint64_t n) const {
      if (n > bytes_.size() - pos_)
        throw Error("checkpoint truncated at byte " + std::to_string(pos_));
    }

    const std::string &bytes_;
    size_t pos_;
  };
} // namespace

std::string encode_checkpoint(const NamedArrays &arrays) {
  std::string out(kMagic, kMagicLen);
  for (const auto &[name, a]: arrays) {
    put_u64(out, name.size());
    out += name;
    put_u64(out, a.shape().size());
    for (int64_t d: a.shape())
      put_u64(out, static_cast<uint64_t>(d));
    for (double v: a.values())
      put_u64(out, std::bit_cast<uint64_t>(v));
  }
  return out;
}

NamedArrays decode_checkpoint(const std::string &bytes) {
  if (bytes.size() < kMagicLen || bytes.compare(0, kMagicLen, kMagic) != 0)
    throw Error("not a checkpoint: bad magic bytes");

  Reader rd(bytes, kMagicLen);
  NamedArrays out;
  while (!rd.done()) {
    const uint64_t name_len = rd.u64();
    std::string name = rd.str(name_len);
    const uint64_t rank = rd.u64();
    if (rank > 8)
      throw Error("checkpoint record '" + name + "' has rank "
                  + std::to_string(rank));
    Shape shape(rank);
    for (auto &d: shape)
      d = static_cast<int64_t>(rd.u64());
    const int64_t n = shape_size(shape);
    std::vector<double> data(n);
    for (auto &v: data)
      v = std::bit_cast<double>(rd.u64());
    if (!out.emplace(name, Array(std::move(shape), std::move(data))).second)
      throw Error("duplicate checkpoint record '" + name + "'");
  }
  return out;
}

void save_checkpoint(const std::filesystem::path &path,
                     const NamedArrays &arrays) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os)
    throw Error("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_checkpoint(arrays);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os)
    throw Error("failed writing " + path.string());
}

NamedArrays load_checkpoint(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error("cannot open checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(is)),
                    std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

} // namespace msde
