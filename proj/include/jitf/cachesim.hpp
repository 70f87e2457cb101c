#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "jitf/cuckoo.hpp"

namespace jitf {

// Software prefetch flavors. Fill sets mirror the x86 locality hints:
//   T0  -> L1 + L2 + LLC
//   T1  -> L2 + LLC
//   T2  -> L2 + LLC, inserted at LRU position (evicted first under pressure)
//   NTA -> L2 only, inserted at LRU position
enum class PrefetchClass : std::uint8_t { T0 = 0, T1, T2, NTA };

const char* to_string(PrefetchClass cls);
std::optional<PrefetchClass> parse_prefetch_class(const std::string& s);

struct LevelConfig {
  std::uint64_t size_bytes = 0;
  std::uint32_t ways = 0;
  // Ways this core may fill / evict from (CAT-style partition). 0 means all.
  // Lookups always probe the full set.
  std::uint32_t allocated_ways = 0;
  std::uint32_t hit_latency_cycles = 0;

  static constexpr std::uint32_t kLineSize = 64;

  std::uint64_t sets() const { return size_bytes / (64ull * ways); }
  void validate(const char* name) const;
};

struct HierarchyConfig {
  LevelConfig l1, l2, llc;
  std::uint32_t dram_latency_cycles = 200;
  double core_clock_hz = 3.4e9;
  // Models the hardware adjacent-line prefetcher: a demand miss also pulls
  // the other half of the 128-byte pair into L2/LLC. Off by default.
  bool adjacent_line = false;

  void validate() const;
};

struct LevelStats {
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
};

struct CacheStats {
  LevelStats l1, l2, llc;
  std::uint64_t demand_accesses = 0;
  std::uint64_t prefetch_issued = 0;   // distinct lines sent in flight
  std::uint64_t prefetch_useful = 0;   // demand touched the line before eviction
  std::uint64_t prefetch_wasted = 0;   // last prefetched copy evicted untouched
  std::uint64_t total_stall_cycles = 0;
};

// One set-associative LRU cache level. Public so tests can drive a single
// level directly against a reference model.
class CacheLevel {
 public:
  CacheLevel(const LevelConfig& cfg, const char* name);

  // Probes every way (partition does not hide lines). No LRU update.
  int probe(std::uint64_t line_addr) const;
  void touch(std::uint64_t line_addr, int way);
  bool is_prefetched(std::uint64_t line_addr) const;
  void clear_prefetched(std::uint64_t line_addr);

  struct Evicted {
    std::uint64_t line_addr = 0;
    bool valid = false;
    bool prefetched = false;
  };
  // Installs the line in one of the allocated ways; `early` inserts at the
  // LRU end instead of MRU. Returns the victim, if a valid line was dropped.
  // Filling a line that is already resident just refreshes its position.
  Evicted fill(std::uint64_t line_addr, bool prefetched, bool early);

  void invalidate(std::uint64_t line_addr);
  void clear();

  std::uint64_t n_sets() const { return sets_; }
  std::uint32_t n_ways() const { return cfg_.ways; }
  const LevelConfig& config() const { return cfg_; }

 private:
  struct Way {
    std::uint64_t tag = 0;
    std::int64_t stamp = 0;
    bool valid = false;
    bool prefetched = false;
  };

  std::uint64_t set_of(std::uint64_t line_addr) const {
    return (line_addr / 64) & (sets_ - 1);
  }
  std::uint64_t tag_of(std::uint64_t line_addr) const {
    return (line_addr / 64) >> set_bits_;
  }

  LevelConfig cfg_;
  std::uint64_t sets_ = 0;
  std::uint32_t set_bits_ = 0;
  std::int64_t counter_ = 0;
  std::vector<Way> ways_;  // sets_ * cfg_.ways, row-major per set
};

// Three-level non-inclusive hierarchy with an in-flight prefetch table.
// Writes allocate like reads (no writeback modeling), so the access kind
// does not change timing.
class Hierarchy {
 public:
  explicit Hierarchy(const HierarchyConfig& cfg);

  // Returns the stall in cycles charged to this access.
  std::uint32_t demand_access(std::uint64_t line_addr, std::int64_t now_cycles,
                              AccessEvent::Kind kind = AccessEvent::Kind::DemandRead);

  // Never stalls; the caller accounts any issue overhead.
  void prefetch(std::uint64_t line_addr, PrefetchClass cls,
                std::int64_t now_cycles);

  // Materializes every in-flight prefetch that has completed by `now`.
  // demand_access and prefetch do this implicitly.
  void advance(std::int64_t now_cycles);

  CacheStats snapshot_stats() const { return stats_; }
  void reset_stats() { stats_ = CacheStats{}; }
  void flush();  // drops contents and in-flight entries; stats survive

  const HierarchyConfig& config() const { return cfg_; }
  CacheLevel& l1() { return l1_; }
  CacheLevel& l2() { return l2_; }
  CacheLevel& llc() { return llc_; }

 private:
  struct InFlight {
    std::uint64_t line_addr;
    std::int64_t completes_at;
    PrefetchClass cls;
  };

  enum Level : int { kL1 = 0, kL2 = 1, kLlc = 2 };

  static void check_aligned(std::uint64_t addr);
  CacheLevel& level(int idx);
  void fill_into(int level_idx, std::uint64_t line_addr, bool prefetched,
                 bool early);
  void materialize(const InFlight& pf);
  void mark_useful(std::uint64_t line_addr);
  bool prefetched_elsewhere(std::uint64_t line_addr, int except_level) const;
  InFlight* find_in_flight(std::uint64_t line_addr);

  HierarchyConfig cfg_;
  CacheLevel l1_, l2_, llc_;
  std::vector<InFlight> in_flight_;  // completion order == insertion order
  CacheStats stats_;
};

}  // namespace jitf
