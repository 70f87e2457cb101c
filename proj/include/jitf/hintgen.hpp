#pragma once

#include <cstdint>

#include "jitf/trace.hpp"

namespace jitf {

// Returns an equal-length copy of `t` where every record carries
// hint_current = hash of its own key and hint_future = hash of the key d
// records ahead. The final d records have no future packet; they carry the
// future-absent flag and hint_future = 0. Hints are recomputed from keys, so
// annotating an already annotated trace with the same d is a no-op.
// d must be >= 1.
[[nodiscard]] MaterializedTrace annotate(const Trace& t, std::uint32_t d);

}  // namespace jitf
