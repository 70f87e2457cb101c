#include "jitf/hintgen.hpp"

#include <stdexcept>

namespace jitf {

MaterializedTrace annotate(const Trace& t, std::uint32_t d) {
  if (d == 0) throw std::invalid_argument("annotate: distance must be >= 1");

  const std::uint64_t n = t.size();
  std::vector<PacketRecord> out(n);
  std::vector<KeyHash> hashes(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    out[i] = t.record(i);
    out[i].seq = i;
    hashes[i] = hash_key(out[i].key);
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    out[i].hint_current = hashes[i];
    out[i].hint_flags = kHintPresent;
    if (i + d < n) {
      out[i].hint_future = hashes[i + d];
    } else {
      out[i].hint_future = 0;
      out[i].hint_flags |= kHintFutureAbsent;
    }
  }
  return MaterializedTrace(std::move(out), true);
}

}  // namespace jitf
