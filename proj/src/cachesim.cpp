#include "jitf/cachesim.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <stdexcept>

namespace jitf {

const char* to_string(PrefetchClass cls) {
  switch (cls) {
    case PrefetchClass::T0: return "t0";
    case PrefetchClass::T1: return "t1";
    case PrefetchClass::T2: return "t2";
    case PrefetchClass::NTA: return "nta";
  }
  return "?";
}

std::optional<PrefetchClass> parse_prefetch_class(const std::string& s) {
  std::string low;
  low.reserve(s.size());
  for (char c : s) low.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (low == "t0") return PrefetchClass::T0;
  if (low == "t1") return PrefetchClass::T1;
  if (low == "t2") return PrefetchClass::T2;
  if (low == "nta") return PrefetchClass::NTA;
  return std::nullopt;
}

void LevelConfig::validate(const char* name) const {
  const std::string who(name);
  if (size_bytes == 0 || ways == 0 || hit_latency_cycles == 0)
    throw std::invalid_argument(who + ": size, ways and latency must be nonzero");
  if (size_bytes % (64ull * ways) != 0)
    throw std::invalid_argument(who + ": size " + std::to_string(size_bytes) +
                                " not divisible by ways*64");
  if (!is_power_of_two(sets()))
    throw std::invalid_argument(who + ": set count " + std::to_string(sets()) +
                                " is not a power of two");
  if (allocated_ways > ways)
    throw std::invalid_argument(who + ": allocated_ways " +
                                std::to_string(allocated_ways) + " > ways " +
                                std::to_string(ways));
}

void HierarchyConfig::validate() const {
  l1.validate("l1");
  l2.validate("l2");
  llc.validate("llc");
  if (!(l1.hit_latency_cycles < l2.hit_latency_cycles &&
        l2.hit_latency_cycles < llc.hit_latency_cycles &&
        llc.hit_latency_cycles < dram_latency_cycles))
    throw std::invalid_argument("latencies must strictly increase: l1 < l2 < llc < dram");
  if (!(core_clock_hz > 0))
    throw std::invalid_argument("core_clock_hz must be positive");
}

CacheLevel::CacheLevel(const LevelConfig& cfg, const char* name) : cfg_(cfg) {
  cfg_.validate(name);
  if (cfg_.allocated_ways == 0) cfg_.allocated_ways = cfg_.ways;
  sets_ = cfg_.sets();
  set_bits_ = static_cast<std::uint32_t>(std::countr_zero(sets_));
  ways_.resize(sets_ * cfg_.ways);
}

int CacheLevel::probe(std::uint64_t line_addr) const {
  const std::uint64_t set = set_of(line_addr);
  const std::uint64_t tag = tag_of(line_addr);
  const Way* row = &ways_[set * cfg_.ways];
  for (std::uint32_t w = 0; w < cfg_.ways; ++w) {
    if (row[w].valid && row[w].tag == tag) return static_cast<int>(w);
  }
  return -1;
}

void CacheLevel::touch(std::uint64_t line_addr, int way) {
  ways_[set_of(line_addr) * cfg_.ways + way].stamp = ++counter_;
}

bool CacheLevel::is_prefetched(std::uint64_t line_addr) const {
  const int w = probe(line_addr);
  return w >= 0 && ways_[set_of(line_addr) * cfg_.ways + w].prefetched;
}

void CacheLevel::clear_prefetched(std::uint64_t line_addr) {
  const int w = probe(line_addr);
  if (w >= 0) ways_[set_of(line_addr) * cfg_.ways + w].prefetched = false;
}

CacheLevel::Evicted CacheLevel::fill(std::uint64_t line_addr, bool prefetched,
                                     bool early) {
  const std::uint64_t set = set_of(line_addr);
  Way* row = &ways_[set * cfg_.ways];

  // LRU floor across the allocated ways; early fills insert just below it.
  std::int64_t min_stamp = 0;
  bool have_valid = false;
  for (std::uint32_t w = 0; w < cfg_.allocated_ways; ++w) {
    if (!row[w].valid) continue;
    if (!have_valid || row[w].stamp < min_stamp) {
      have_valid = true;
      min_stamp = row[w].stamp;
    }
  }

  const int resident = probe(line_addr);
  if (resident >= 0) {
    Way& w = row[resident];
    w.stamp = early && have_valid ? min_stamp - 1 : ++counter_;
    return Evicted{};
  }

  // victim: first invalid allocated way, else the LRU allocated way
  std::uint32_t slot = cfg_.allocated_ways;
  for (std::uint32_t w = 0; w < cfg_.allocated_ways; ++w) {
    if (!row[w].valid) { slot = w; break; }
  }
  if (slot == cfg_.allocated_ways) {
    std::int64_t best = 0;
    for (std::uint32_t w = 0; w < cfg_.allocated_ways; ++w) {
      if (slot == cfg_.allocated_ways || row[w].stamp < best) {
        slot = w;
        best = row[w].stamp;
      }
    }
  }

  Evicted ev;
  Way& w = row[slot];
  if (w.valid) {
    ev.valid = true;
    ev.line_addr = ((w.tag << set_bits_) | set) * 64;
    ev.prefetched = w.prefetched;
  }
  w.tag = tag_of(line_addr);
  w.valid = true;
  w.prefetched = prefetched;
  w.stamp = early && have_valid ? min_stamp - 1 : ++counter_;
  return ev;
}

void CacheLevel::invalidate(std::uint64_t line_addr) {
  const int w = probe(line_addr);
  if (w >= 0) ways_[set_of(line_addr) * cfg_.ways + w].valid = false;
}

void CacheLevel::clear() {
  for (Way& w : ways_) w = Way{};
}

namespace {

struct FillPlan {
  int levels[3];
  int count;
  bool early;
};

FillPlan fill_plan(PrefetchClass cls) {
  switch (cls) {
    case PrefetchClass::T0: return {{0, 1, 2}, 3, false};
    case PrefetchClass::T1: return {{1, 2, -1}, 2, false};
    case PrefetchClass::T2: return {{1, 2, -1}, 2, true};
    case PrefetchClass::NTA: return {{1, -1, -1}, 1, true};
  }
  return {{-1, -1, -1}, 0, false};
}

const HierarchyConfig& validated(const HierarchyConfig& cfg) {
  cfg.validate();
  return cfg;
}

}  // namespace

Hierarchy::Hierarchy(const HierarchyConfig& cfg)
    : cfg_(validated(cfg)),
      l1_(cfg_.l1, "l1"),
      l2_(cfg_.l2, "l2"),
      llc_(cfg_.llc, "llc") {}

void Hierarchy::check_aligned(std::uint64_t addr) {
  if (addr & 63)
    throw std::invalid_argument("address " + std::to_string(addr) +
                                " is not 64-byte aligned");
}

CacheLevel& Hierarchy::level(int idx) {
  switch (idx) {
    case kL1: return l1_;
    case kL2: return l2_;
    default: return llc_;
  }
}

bool Hierarchy::prefetched_elsewhere(std::uint64_t line_addr,
                                     int except_level) const {
  const CacheLevel* levels[3] = {&l1_, &l2_, &llc_};
  for (int i = 0; i < 3; ++i) {
    if (i == except_level) continue;
    if (levels[i]->is_prefetched(line_addr)) return true;
  }
  return false;
}

void Hierarchy::fill_into(int level_idx, std::uint64_t line_addr,
                          bool prefetched, bool early) {
  const CacheLevel::Evicted ev = level(level_idx).fill(line_addr, prefetched, early);
  if (ev.valid && ev.prefetched && !prefetched_elsewhere(ev.line_addr, -1))
    ++stats_.prefetch_wasted;
}

void Hierarchy::mark_useful(std::uint64_t line_addr) {
  ++stats_.prefetch_useful;
  l1_.clear_prefetched(line_addr);
  l2_.clear_prefetched(line_addr);
  llc_.clear_prefetched(line_addr);
}

void Hierarchy::materialize(const InFlight& pf) {
  const FillPlan plan = fill_plan(pf.cls);
  for (int i = 0; i < plan.count; ++i) {
    const int idx = plan.levels[i];
    if (level(idx).probe(pf.line_addr) < 0)
      fill_into(idx, pf.line_addr, true, plan.early);
  }
}

void Hierarchy::advance(std::int64_t now_cycles) {
  bool any = false;
  for (const InFlight& pf : in_flight_) {
    if (pf.completes_at <= now_cycles) {
      materialize(pf);
      any = true;
    }
  }
  if (any) {
    in_flight_.erase(
        std::remove_if(in_flight_.begin(), in_flight_.end(),
                       [&](const InFlight& pf) { return pf.completes_at <= now_cycles; }),
        in_flight_.end());
  }
}

Hierarchy::InFlight* Hierarchy::find_in_flight(std::uint64_t line_addr) {
  for (InFlight& pf : in_flight_) {
    if (pf.line_addr == line_addr) return &pf;
  }
  return nullptr;
}

std::uint32_t Hierarchy::demand_access(std::uint64_t line_addr,
                                       std::int64_t now_cycles,
                                       AccessEvent::Kind) {
  check_aligned(line_addr);
  advance(now_cycles);
  ++stats_.demand_accesses;

  std::uint32_t stall;
  bool full_miss = false;

  int w = l1_.probe(line_addr);
  if (w >= 0) {
    ++stats_.l1.hits;
    if (l1_.is_prefetched(line_addr)) mark_useful(line_addr);
    l1_.touch(line_addr, w);
    stall = cfg_.l1.hit_latency_cycles;
  } else {
    ++stats_.l1.misses;
    w = l2_.probe(line_addr);
    if (w >= 0) {
      ++stats_.l2.hits;
      if (l2_.is_prefetched(line_addr)) mark_useful(line_addr);
      l2_.touch(line_addr, w);
      fill_into(kL1, line_addr, false, false);
      stall = cfg_.l2.hit_latency_cycles;
    } else {
      ++stats_.l2.misses;
      w = llc_.probe(line_addr);
      if (w >= 0) {
        ++stats_.llc.hits;
        if (llc_.is_prefetched(line_addr)) mark_useful(line_addr);
        llc_.touch(line_addr, w);
        fill_into(kL2, line_addr, false, false);
        fill_into(kL1, line_addr, false, false);
        stall = cfg_.llc.hit_latency_cycles;
      } else {
        ++stats_.llc.misses;
        full_miss = true;
        if (const InFlight* pf = find_in_flight(line_addr)) {
          // Demand caught up with an outstanding prefetch: wait out the
          // remainder, then the fill lands per the prefetch class plus L1.
          const std::int64_t remaining = pf->completes_at - now_cycles;
          stall = static_cast<std::uint32_t>(std::max<std::int64_t>(0, remaining)) +
                  cfg_.l1.hit_latency_cycles;
          ++stats_.prefetch_useful;
          const FillPlan plan = fill_plan(pf->cls);
          for (int i = 0; i < plan.count; ++i)
            fill_into(plan.levels[i], line_addr, false, false);
          if (l1_.probe(line_addr) < 0) fill_into(kL1, line_addr, false, false);
          in_flight_.erase(in_flight_.begin() + (pf - in_flight_.data()));
        } else {
          stall = cfg_.dram_latency_cycles;
          fill_into(kL1, line_addr, false, false);
          fill_into(kL2, line_addr, false, false);
          fill_into(kLlc, line_addr, false, false);
        }
      }
    }
  }

  if (full_miss && cfg_.adjacent_line)
    prefetch(line_addr ^ 64, PrefetchClass::T1, now_cycles);

  stats_.total_stall_cycles += stall;
  return stall;
}

void Hierarchy::prefetch(std::uint64_t line_addr, PrefetchClass cls,
                         std::int64_t now_cycles) {
  check_aligned(line_addr);
  advance(now_cycles);

  const FillPlan plan = fill_plan(cls);
  bool resident_everywhere = true;
  for (int i = 0; i < plan.count; ++i) {
    if (level(plan.levels[i]).probe(line_addr) < 0) {
      resident_everywhere = false;
      break;
    }
  }
  if (resident_everywhere) return;
  if (find_in_flight(line_addr)) return;  // first request wins

  in_flight_.push_back({line_addr, now_cycles + cfg_.dram_latency_cycles, cls});
  ++stats_.prefetch_issued;
}

void Hierarchy::flush() {
  l1_.clear();
  l2_.clear();
  llc_.clear();
  in_flight_.clear();
}

}  // namespace jitf
