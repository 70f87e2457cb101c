#include "jitf/lb.hpp"

#include <bit>
#include <stdexcept>
#include <unordered_set>

namespace jitf {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Off: return "off";
    case Mode::NoOffload: return "nooffload";
    case Mode::Offload: return "offload";
  }
  return "?";
}

std::optional<Mode> parse_mode(const std::string& s) {
  if (s == "off") return Mode::Off;
  if (s == "nooffload" || s == "no-offload") return Mode::NoOffload;
  if (s == "offload") return Mode::Offload;
  return std::nullopt;
}

void PrefetchPolicy::validate() const {
  if (mode != Mode::Off && distance < 1)
    throw std::invalid_argument("prefetch distance must be >= 1");
}

std::uint64_t suggested_buckets(std::uint64_t n_flows) {
  // 8 entries per bucket; pow2 >= flows/2 keeps the load factor <= 25%
  return std::bit_ceil(std::max<std::uint64_t>(2, (n_flows + 1) / 2));
}

namespace {

struct KeyHasher {
  std::size_t operator()(const FlowKey& k) const { return hash_key(k); }
};

}  // namespace

LoadBalancer::LoadBalancer(const LoadBalancerConfig& cfg, Hierarchy& hier)
    : cfg_(cfg),
      hier_(hier),
      table_(CuckooConfig{static_cast<std::uint32_t>(cfg.n_buckets),
                          cfg.base_addr_buckets, cfg.base_addr_keystore}),
      servers_(cfg.k_servers) {
  if (cfg_.k_servers == 0)
    throw std::invalid_argument("k_servers must be positive");
  for (std::uint32_t i = 0; i < cfg_.k_servers; ++i) servers_[i] = i;
  table_.set_sink(this);
  table_.set_events_enabled(true);
}

void LoadBalancer::on_access(const AccessEvent& ev) {
  stall_accum_ += hier_.demand_access(ev.addr, now_, ev.kind);
}

std::uint64_t LoadBalancer::server_line(std::uint32_t backend) const {
  return cfg_.base_addr_servers + 64ull * (backend / 16);  // 4 bytes per id
}

std::pair<std::uint32_t, PacketCost> LoadBalancer::process_packet(
    const PacketRecord& pkt, const PrefetchPolicy& policy,
    const std::optional<FlowKey>& future_key, std::int64_t now_cycles) {
  now_ = now_cycles;
  stall_accum_ = 0;
  std::uint32_t overhead = 0;

  if (cfg_.packet_read)
    stall_accum_ += hier_.demand_access(
        cfg_.base_addr_packets + 64ull * (pkt.seq & 1023), now_);

  // 1. prefetch the future packet's primary bucket line
  bool hint_usable = false;
  if (policy.mode == Mode::Offload) {
    constexpr std::uint8_t known = kHintPresent | kHintFutureAbsent;
    if ((pkt.hint_flags & ~known) != 0 || !(pkt.hint_flags & kHintPresent)) {
      ++hint_warnings_;
    } else {
      hint_usable = true;
      if (!(pkt.hint_flags & kHintFutureAbsent)) {
        hier_.prefetch(table_.primary_bucket_addr(pkt.hint_future), policy.cls,
                       now_);
        overhead += policy.issue_cost_cycles;
      }
    }
  } else if (policy.mode == Mode::NoOffload && future_key) {
    const KeyHash fh = hash_key(*future_key);
    overhead += policy.hash_cost_cycles;
    hier_.prefetch(table_.primary_bucket_addr(fh), policy.cls, now_);
    overhead += policy.issue_cost_cycles;
  }

  // 2. lookup; an embedded hint already carries this packet's hash
  const KeyHash h = hint_usable ? pkt.hint_current : hash_key(pkt.key);
  const std::optional<std::uint32_t> found = table_.lookup_hashed(pkt.key, h);

  // 3. first packet of a flow: assign the next backend round-robin
  std::uint32_t idx;
  if (found) {
    idx = *found;
  } else {
    idx = rr_cursor_;
    rr_cursor_ = (rr_cursor_ + 1) % cfg_.k_servers;
    if (table_.insert_hashed(pkt.key, h, idx) == InsertResult::TableFull)
      throw std::runtime_error("flow table full (load factor " +
                               std::to_string(table_.load_factor()) + ")");
  }

  // 4. fetch the backend id
  stall_accum_ += hier_.demand_access(server_line(idx), now_);
  const std::uint32_t backend = servers_[idx];

  const PacketCost cost{cfg_.base_cycles,
                        static_cast<std::uint32_t>(stall_accum_), overhead};
  return {backend, cost};
}

MetricsRecord LoadBalancer::run_trace(const Trace& t,
                                      const PrefetchPolicy& policy) {
  policy.validate();
  const std::uint64_t n = t.size();
  if (n == 0) throw std::invalid_argument("trace is empty");
  if (policy.mode == Mode::Offload && !t.has_hints())
    throw std::invalid_argument("offload mode requires a hint-annotated trace");

  // Flow table warm-up: every flow inserted up front, backends handed out
  // round-robin in first-appearance order. Prefetching never inserts, so
  // this fixes the flow->backend map for every mode identically.
  std::vector<std::pair<FlowKey, std::uint32_t>> flows;
  {
    std::unordered_set<FlowKey, KeyHasher> seen;
    for (std::uint64_t i = 0; i < n; ++i) {
      const FlowKey key = t.record(i).key;
      if (seen.insert(key).second) {
        flows.emplace_back(key, rr_cursor_);
        rr_cursor_ = (rr_cursor_ + 1) % cfg_.k_servers;
      }
    }
  }
  if (table_.warm_up(flows) == InsertResult::TableFull)
    throw std::runtime_error("flow table full during warm-up");

  // Cache warm-up: drop warm-up side effects, then touch each flow's state
  // once so small working sets start resident.
  hier_.flush();
  hier_.reset_stats();
  now_ = 0;
  stall_accum_ = 0;
  for (const auto& [key, idx] : flows) {
    table_.lookup(key);
    hier_.demand_access(server_line(idx), now_);
  }
  hier_.reset_stats();
  hint_warnings_ = 0;

  // Measured phase. The clock paces prefetch arrival: it advances by each
  // packet's work (base + overhead), while stalls overlap with outstanding
  // prefetches rather than delaying them.
  std::uint64_t total_cycles = 0;
  std::int64_t now = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    const PacketRecord pkt = t.record(i);
    std::optional<FlowKey> future;
    if (policy.mode == Mode::NoOffload)
      future = next_key(t, i, policy.distance);
    const auto [backend, cost] = process_packet(pkt, policy, future, now);
    (void)backend;
    total_cycles += cost.total();
    now += cost.base_cycles + cost.overhead_cycles;
  }

  const CacheStats stats = hier_.snapshot_stats();
  MetricsRecord m;
  m.packets = n;
  m.total_cycles = total_cycles;
  m.throughput_pps =
      hier_.config().core_clock_hz * static_cast<double>(n) /
      static_cast<double>(total_cycles);
  m.per_packet_llc_misses =
      static_cast<double>(stats.llc.misses) / static_cast<double>(n);
  m.per_packet_l2_misses =
      static_cast<double>(stats.l2.misses) / static_cast<double>(n);
  m.prefetch_useful_ratio =
      stats.prefetch_issued
          ? static_cast<double>(stats.prefetch_useful) /
                static_cast<double>(stats.prefetch_issued)
          : 0.0;
  m.hint_warnings = hint_warnings_;
  m.cache = stats;
  return m;
}

}  // namespace jitf
