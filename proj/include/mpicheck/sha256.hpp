#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace mpicheck {

/// 256-bit digest.
struct Digest {
  std::array<unsigned char, 32> bytes{};

  bool operator==(const Digest&) const = default;
  bool operator<(const Digest& o) const { return bytes < o.bytes; }
};

struct DigestHash {
  std::size_t operator()(const Digest& d) const {
    std::size_t h;
    std::memcpy(&h, d.bytes.data(), sizeof(h));
    return h;
  }
};

Digest sha256(const unsigned char* data, std::size_t len);
Digest sha256(const std::vector<unsigned char>& data);

std::string digest_hex(const Digest& d, std::size_t nbytes = 32);

/// Incremental byte sink for canonical serializations.
struct ByteSink {
  std::vector<unsigned char> buf;

  void u8(unsigned char b) { buf.push_back(b); }

  void i64(std::int64_t v) {
    auto u = static_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<unsigned char>(u >> (8 * i)));
  }

  void str(const std::string& s) {
    i64(static_cast<std::int64_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }

  void digest(const Digest& d) { buf.insert(buf.end(), d.bytes.begin(), d.bytes.end()); }

  Digest sha() const { return sha256(buf); }
};

}  // namespace mpicheck
