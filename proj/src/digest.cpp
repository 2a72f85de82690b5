#include "mpicheck/digest.hpp"

#include <openssl/evp.h>

#include <bit>
#include <stdexcept>

namespace mpicheck {

Digest sha256(const unsigned char* data, std::size_t len) {
  Digest d;
  unsigned int out_len = 0;
  if (EVP_Digest(data, len, d.bytes.data(), &out_len, EVP_sha256(), nullptr) != 1 ||
      out_len != d.bytes.size()) {
    throw std::runtime_error("sha256 digest failed");
  }
  return d;
}

Digest sha256(const std::vector<unsigned char>& data) {
  return sha256(data.data(), data.size());
}

Digest canonical_hash(const GlobalState& s) {
  ByteSink out;
  out.buf.reserve(128 + 64 * s.procs.size());
  out.i64(static_cast<std::int64_t>(s.procs.size()));
  for (const ProcState& p : s.procs) {
    out.digest(p.cmd->digest);
    out.i64(p.last_tag);
    out.i64(p.barriers_passed);
    out.i64(static_cast<std::int64_t>(p.env.size()));
    for (const auto& [k, v] : p.env) {
      out.str(k);
      out.i64(v);
    }
  }
  auto put_map = [&out](const auto& m, auto put_value) {
    out.i64(static_cast<std::int64_t>(m.size()));
    for (const auto& [k, v] : m) {
      out.i64(k);
      put_value(v);
    }
  };
  put_map(s.recv_buf, [&out](const std::string& v) { out.str(v); });
  put_map(s.send_buf, [&out](const std::string& v) { out.str(v); });
  put_map(s.msg_buf, [&out](std::int64_t v) { out.i64(v); });
  return out.sha();
}

Digest hash_doubles(const std::vector<double>& v) {
  ByteSink out;
  out.buf.reserve(8 + 8 * v.size());
  out.i64(static_cast<std::int64_t>(v.size()));
  for (double x : v) out.i64(static_cast<std::int64_t>(std::bit_cast<std::uint64_t>(x)));
  return out.sha();
}

std::string digest_hex(const Digest& d, std::size_t nbytes) {
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (std::size_t i = 0; i < nbytes && i < d.bytes.size(); ++i) {
    s.push_back(hex[d.bytes[i] >> 4]);
    s.push_back(hex[d.bytes[i] & 0xf]);
  }
  return s;
}

}  // namespace mpicheck
