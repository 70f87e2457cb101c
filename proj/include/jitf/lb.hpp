#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "jitf/cachesim.hpp"
#include "jitf/cuckoo.hpp"
#include "jitf/trace.hpp"

namespace jitf {

// Where the future packet's hash comes from:
//   Off       - no prefetching
//   NoOffload - CPU hashes the future key itself (charged hash_cost)
//   Offload   - the hash rides in the packet as a hint (hash cost avoided)
enum class Mode : std::uint8_t { Off = 0, NoOffload, Offload };

const char* to_string(Mode m);
std::optional<Mode> parse_mode(const std::string& s);

struct PrefetchPolicy {
  Mode mode = Mode::Off;
  std::uint32_t distance = 1;  // packets of lookahead
  PrefetchClass cls = PrefetchClass::T0;
  std::uint32_t hash_cost_cycles = 20;
  std::uint32_t issue_cost_cycles = 2;

  void validate() const;
};

struct PacketCost {
  std::uint32_t base_cycles = 0;
  std::uint32_t stall_cycles = 0;
  std::uint32_t overhead_cycles = 0;

  std::uint64_t total() const {
    return std::uint64_t{base_cycles} + stall_cycles + overhead_cycles;
  }
};

struct MetricsRecord {
  double throughput_pps = 0;
  double per_packet_llc_misses = 0;
  double per_packet_l2_misses = 0;
  double prefetch_useful_ratio = 0;  // useful / issued, 0 when none issued
  std::uint64_t total_cycles = 0;
  std::uint64_t packets = 0;
  std::uint64_t hint_warnings = 0;
  CacheStats cache;
};

struct LoadBalancerConfig {
  std::uint32_t k_servers = 64;
  std::uint64_t n_buckets = 1024;
  std::uint32_t base_cycles = 120;  // per-packet work outside state access
  bool packet_read = false;         // touch one packet-buffer line per packet

  // Simulated address map; regions must not overlap.
  std::uint64_t base_addr_packets = 0x04000000;
  std::uint64_t base_addr_servers = 0x08000000;
  std::uint64_t base_addr_buckets = 0x10000000;
  std::uint64_t base_addr_keystore = 0x40000000;
};

// Table size keeping the load factor at or below 25% for n_flows entries.
std::uint64_t suggested_buckets(std::uint64_t n_flows);

// Stateful L4 load balancer over a cuckoo flow table, with the just-in-time
// prefetch engine. One instance drives one Hierarchy (one simulated core).
class LoadBalancer final : public AccessSink {
 public:
  LoadBalancer(const LoadBalancerConfig& cfg, Hierarchy& hier);

  // One packet: optional future-state prefetch, table lookup (inserting on a
  // flow's first packet), server array read. `future_key` feeds NoOffload
  // mode; Offload mode reads the packet's embedded hints.
  std::pair<std::uint32_t, PacketCost> process_packet(
      const PacketRecord& pkt, const PrefetchPolicy& policy,
      const std::optional<FlowKey>& future_key, std::int64_t now_cycles);

  // Full measured run: warm the table (all flows inserted, round-robin in
  // first-appearance order), flush and re-warm the caches with one scan of
  // the unique flows, then process every packet with a zeroed clock.
  MetricsRecord run_trace(const Trace& t, const PrefetchPolicy& policy);

  CuckooTable& table() { return table_; }
  std::uint32_t k_servers() const { return cfg_.k_servers; }
  std::uint64_t hint_warnings() const { return hint_warnings_; }

  void on_access(const AccessEvent& ev) override;

 private:
  std::uint64_t server_line(std::uint32_t backend) const;

  LoadBalancerConfig cfg_;
  Hierarchy& hier_;
  CuckooTable table_;
  std::vector<std::uint32_t> servers_;
  std::uint32_t rr_cursor_ = 0;
  std::uint64_t hint_warnings_ = 0;
  std::int64_t now_ = 0;
  std::uint64_t stall_accum_ = 0;
};

}  // namespace jitf
