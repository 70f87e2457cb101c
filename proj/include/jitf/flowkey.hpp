#pragma once

#include <array>
#include <cstddef>
#include <cstdint>

namespace jitf {

// UDP/TCP 5-tuple identifying a flow. Serialized form is 13 bytes, all
// fields big-endian, in declaration order.
struct FlowKey {
  std::uint32_t src_ip = 0;
  std::uint32_t dst_ip = 0;
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t proto = 0;

  friend bool operator==(const FlowKey&, const FlowKey&) = default;

  std::array<std::uint8_t, 13> serialize() const;
};

using KeyHash = std::uint32_t;
using Signature = std::uint16_t;

std::uint32_t murmur3_32(const std::uint8_t* data, std::size_t len,
                         std::uint32_t seed);

// MurmurHash3 x86_32, seed 0, over the 13-byte serialization. Fixed for
// the life of the on-disk trace format; do not change without bumping the
// format version.
KeyHash hash_key(const FlowKey& k);

inline Signature signature_of(KeyHash h) {
  return static_cast<Signature>(h >> 16);
}

constexpr bool is_power_of_two(std::uint64_t v) {
  return v != 0 && (v & (v - 1)) == 0;
}

// h mod n_buckets. n_buckets must be a power of two >= 2.
std::uint32_t primary_bucket(KeyHash h, std::uint32_t n_buckets);

// Alternate bucket of `bucket` under signature `sig`. An involution:
// secondary_bucket(secondary_bucket(b, s, n), s, n) == b.
std::uint32_t secondary_bucket(std::uint32_t bucket, Signature sig,
                               std::uint32_t n_buckets);

}  // namespace jitf
