#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "jitf/flowkey.hpp"

namespace jitf {

// hint_flags bits
constexpr std::uint8_t kHintPresent = 0x01;
constexpr std::uint8_t kHintFutureAbsent = 0x02;

struct PacketRecord {
  FlowKey key;
  std::uint64_t seq = 0;
  std::uint32_t hint_current = 0;
  std::uint32_t hint_future = 0;
  std::uint8_t hint_flags = 0;

  friend bool operator==(const PacketRecord&, const PacketRecord&) = default;
};

struct TraceSpec {
  std::uint64_t n_flows = 0;
  std::uint64_t packets_per_flow = 0;
  std::uint64_t min_flow_gap = 1;
  std::uint64_t clone_factor = 1;
  std::uint64_t seed = 1;

  // Throws std::invalid_argument naming the violated bound.
  void validate() const;
};

// Uniform in [0, n). Rejection sampling on top of the standardized engine so
// results are identical across platforms (uniform_int_distribution is not).
std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t n);

// Closed-form packet ordering for a TraceSpec.
//
// Total flows F = n_flows * clone_factor; flow id f has
//   src_port = f mod 65536, dst_port = 1024 + f / 65536,
// all other fields fixed (10.0.0.1 -> 10.0.0.2, UDP). Clone c of base flow b
// is flow id c*n_flows + b, i.e. a src_port rewrite of the base packet.
//
// The trace is packets_per_flow epochs; each epoch visits every flow once at
// position (perm[f] + offset[e]) mod F, with perm a seeded permutation and
// offset deltas drawn from [min_flow_gap, F]. Consecutive packets of one flow
// are then separated by either delta or F+delta positions, so the gap bound
// holds for every flow in every epoch pair.
class TraceLayout {
 public:
  explicit TraceLayout(const TraceSpec& spec);

  std::uint64_t total_flows() const { return total_flows_; }
  std::uint64_t size() const { return size_; }
  const TraceSpec& spec() const { return spec_; }

  FlowKey key_of_flow(std::uint64_t flow_id) const;
  std::uint64_t flow_at(std::uint64_t pos) const;
  FlowKey key_at(std::uint64_t pos) const { return key_of_flow(flow_at(pos)); }

 private:
  TraceSpec spec_;
  std::uint64_t total_flows_ = 0;
  std::uint64_t size_ = 0;
  std::vector<std::uint32_t> inv_perm_;       // base position -> flow
  std::vector<std::uint64_t> epoch_offset_;   // one rotation per epoch
};

class Trace {
 public:
  virtual ~Trace() = default;
  virtual std::uint64_t size() const = 0;
  virtual PacketRecord record(std::uint64_t i) const = 0;
  virtual bool has_hints() const = 0;
};

class MaterializedTrace final : public Trace {
 public:
  MaterializedTrace() = default;
  MaterializedTrace(std::vector<PacketRecord> records, bool hints)
      : records_(std::move(records)), hints_(hints) {}

  std::uint64_t size() const override { return records_.size(); }
  PacketRecord record(std::uint64_t i) const override { return records_[i]; }
  bool has_hints() const override { return hints_; }

  std::vector<PacketRecord>& records() { return records_; }
  const std::vector<PacketRecord>& records() const { return records_; }
  void set_has_hints(bool h) { hints_ = h; }

 private:
  std::vector<PacketRecord> records_;
  bool hints_ = false;
};

// Streams records straight from the layout; optionally carries hints for a
// fixed lookahead distance. Record-for-record identical to materializing the
// layout and running the annotation pass.
class GeneratedTrace final : public Trace {
 public:
  GeneratedTrace(std::shared_ptr<const TraceLayout> layout,
                 std::optional<std::uint32_t> hint_distance);

  std::uint64_t size() const override { return layout_->size(); }
  PacketRecord record(std::uint64_t i) const override;
  bool has_hints() const override { return hint_distance_.has_value(); }

 private:
  std::shared_ptr<const TraceLayout> layout_;
  std::optional<std::uint32_t> hint_distance_;
};

// Materializes a TraceSpec's full packet sequence, hint-less.
MaterializedTrace generate(const TraceSpec& spec);

// Key of the packet d positions after i, when it exists.
std::optional<FlowKey> next_key(const Trace& t, std::uint64_t i, std::uint64_t d);

bool trace_equal(const Trace& a, const Trace& b);

enum class TraceIoStatus { BadMagic, BadVersion, Truncated, Io };

class TraceIoError : public std::runtime_error {
 public:
  TraceIoError(TraceIoStatus status, const std::string& what)
      : std::runtime_error(what), status_(status) {}
  TraceIoStatus status() const { return status_; }

 private:
  TraceIoStatus status_;
};

// Binary format: 16-byte header "JITF", u16 version=1, u16 flags (bit 0 =
// hints), u64 record count, all little-endian; then per record the 13-byte
// key and, when the hints flag is set, hint_current u32, hint_future u32,
// hint_flags u8.
void write_trace(const Trace& t, const std::string& path);
MaterializedTrace read_trace(const std::string& path);

// One record per line: src_ip,dst_ip,src_port,dst_port,proto and, for hinted
// traces, ,hint_current,hint_future. IPs dotted quad.
void write_trace_csv(const Trace& t, const std::string& path);

// Smallest gap between consecutive packets of the same flow, scanning the
// whole trace; nullopt when no flow repeats.
std::optional<std::uint64_t> scan_min_flow_gap(const Trace& t);

}  // namespace jitf
