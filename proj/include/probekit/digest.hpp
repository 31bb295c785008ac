#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace probekit {

/// Lower-case hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// First eight bytes of SHA-256(data), big-endian. Used to derive seeds.
std::uint64_t digest64(std::string_view data);

/// Incremental SHA-256 for hashing large numeric payloads.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::string_view data);
  void update(std::span<const double> values);
  void update_u64(std::uint64_t value);
  std::string hex_digest();

 private:
  void* ctx_;
};

/// Base64 of the little-endian IEEE-754 bytes of `values`.
std::string encode_f64_base64(std::span<const double> values);
/// Inverse of encode_f64_base64. Throws ParseError on malformed input.
std::vector<double> decode_f64_base64(std::string_view text);
/// Decodes base64 little-endian float32 payloads, widening to double.
std::vector<double> decode_f32_base64(std::string_view text);

}  // namespace probekit
