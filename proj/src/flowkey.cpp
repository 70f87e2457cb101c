#include "jitf/flowkey.hpp"

#include <bit>
#include <stdexcept>

namespace jitf {

namespace {

// Multiplying the 16-bit signature by an odd constant keeps the xor
// displacement nonzero for every nonzero signature and spreads it over
// the full index range.
constexpr std::uint32_t kOddMix = 0x5bd1e995u;

inline std::uint32_t load_le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

std::array<std::uint8_t, 13> FlowKey::serialize() const {
  std::array<std::uint8_t, 13> out;
  out[0] = static_cast<std::uint8_t>(src_ip >> 24);
  out[1] = static_cast<std::uint8_t>(src_ip >> 16);
  out[2] = static_cast<std::uint8_t>(src_ip >> 8);
  out[3] = static_cast<std::uint8_t>(src_ip);
  out[4] = static_cast<std::uint8_t>(dst_ip >> 24);
  out[5] = static_cast<std::uint8_t>(dst_ip >> 16);
  out[6] = static_cast<std::uint8_t>(dst_ip >> 8);
  out[7] = static_cast<std::uint8_t>(dst_ip);
  out[8] = static_cast<std::uint8_t>(src_port >> 8);
  out[9] = static_cast<std::uint8_t>(src_port);
  out[10] = static_cast<std::uint8_t>(dst_port >> 8);
  out[11] = static_cast<std::uint8_t>(dst_port);
  out[12] = proto;
  return out;
}

std::uint32_t murmur3_32(const std::uint8_t* data, std::size_t len,
                         std::uint32_t seed) {
  const std::uint32_t c1 = 0xcc9e2d51u;
  const std::uint32_t c2 = 0x1b873593u;
  std::uint32_t h = seed;
  const std::size_t nblocks = len / 4;

  for (std::size_t i = 0; i < nblocks; ++i) {
    std::uint32_t k = load_le32(data + 4 * i);
    k *= c1;
    k = std::rotl(k, 15);
    k *= c2;
    h ^= k;
    h = std::rotl(h, 13);
    h = h * 5 + 0xe6546b64u;
  }

  const std::uint8_t* tail = data + 4 * nblocks;
  std::uint32_t k = 0;
  switch (len & 3) {
    case 3:
      k ^= static_cast<std::uint32_t>(tail[2]) << 16;
      [[fallthrough]];
    case 2:
      k ^= static_cast<std::uint32_t>(tail[1]) << 8;
      [[fallthrough]];
    case 1:
      k ^= tail[0];
      k *= c1;
      k = std::rotl(k, 15);
      k *= c2;
      h ^= k;
  }

  h ^= static_cast<std::uint32_t>(len);
  h ^= h >> 16;
  h *= 0x85ebca6bu;
  h ^= h >> 13;
  h *= 0xc2b2ae35u;
  h ^= h >> 16;
  return h;
}

KeyHash hash_key(const FlowKey& k) {
  const auto bytes = k.serialize();
  return murmur3_32(bytes.data(), bytes.size(), 0);
}

std::uint32_t primary_bucket(KeyHash h, std::uint32_t n_buckets) {
  if (n_buckets < 2 || !is_power_of_two(n_buckets)) {
    throw std::invalid_argument("primary_bucket: n_buckets must be a power of two >= 2");
  }
  return h & (n_buckets - 1);
}

std::uint32_t secondary_bucket(std::uint32_t bucket, Signature sig,
                               std::uint32_t n_buckets) {
  if (n_buckets < 2 || !is_power_of_two(n_buckets)) {
    throw std::invalid_argument("secondary_bucket: n_buckets must be a power of two >= 2");
  }
  return (bucket ^ (sig * kOddMix)) & (n_buckets - 1);
}

}  // namespace jitf
