#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "jitf/flowkey.hpp"

namespace jitf {

struct AccessEvent {
  enum class Kind : std::uint8_t { DemandRead, DemandWrite };
  std::uint64_t addr = 0;  // 64-byte aligned
  Kind kind = Kind::DemandRead;
};

struct AccessSink {
  virtual ~AccessSink() = default;
  virtual void on_access(const AccessEvent& ev) = 0;
};

enum class InsertResult { Inserted, Updated, TableFull };

struct CuckooConfig {
  std::uint32_t n_buckets = 0;  // power of two >= 2
  std::uint64_t base_addr_buckets = 0;
  std::uint64_t base_addr_keystore = 0;
  std::uint64_t kick_seed = 1;
};

// Two-table cuckoo hash. Table one is an array of buckets, 8 entries each,
// one bucket per 64-byte line; an entry holds the 16-bit signature and an
// index into the key store. Table two (the key store) holds full key +
// value, one entry per 64-byte line. Every line touched by an operation is
// reported to the access sink in touch order, reads before the writes they
// enable.
class CuckooTable {
 public:
  static constexpr std::uint32_t kEntriesPerBucket = 8;
  static constexpr std::uint32_t kMaxKicks = 128;

  explicit CuckooTable(const CuckooConfig& cfg);

  void set_sink(AccessSink* sink) { sink_ = sink; }
  void set_events_enabled(bool on) { events_enabled_ = on; }

  std::optional<std::uint32_t> lookup(const FlowKey& key);
  std::optional<std::uint32_t> lookup_hashed(const FlowKey& key, KeyHash h);

  InsertResult insert(const FlowKey& key, std::uint32_t value);
  InsertResult insert_hashed(const FlowKey& key, KeyHash h, std::uint32_t value);

  bool erase(const FlowKey& key);

  // Bulk insert with events suppressed. Stops at the first TableFull.
  InsertResult warm_up(std::span<const std::pair<FlowKey, std::uint32_t>> items);

  std::uint64_t primary_bucket_addr(KeyHash h) const;

  std::uint64_t size() const { return live_entries_; }
  std::uint32_t n_buckets() const { return cfg_.n_buckets; }
  double load_factor() const;

  // Structural self-check: bucket entries point at live key-store entries
  // whose key hashes back to that bucket as primary or secondary and whose
  // signature matches; each live key-store entry is referenced exactly once.
  bool check_structure() const;

 private:
  struct BucketEntry {
    std::uint16_t sig = 0;
    std::uint8_t occupied = 0;
    std::uint32_t key_index = 0;
  };
  struct Bucket {
    std::array<BucketEntry, kEntriesPerBucket> slot;
  };
  struct KeyStoreEntry {
    FlowKey key;
    std::uint32_t value = 0;
    std::uint8_t live = 0;
  };

  void emit(std::uint64_t addr, AccessEvent::Kind kind);
  std::uint64_t bucket_addr(std::uint32_t b) const;
  std::uint64_t keystore_addr(std::uint32_t idx) const;

  // Walks primary then secondary, emitting reads; returns (bucket, slot).
  std::optional<std::pair<std::uint32_t, std::uint32_t>> find_slot(
      const FlowKey& key, KeyHash h);

  std::optional<std::uint32_t> free_slot_in(std::uint32_t b) const;
  std::uint32_t alloc_keystore(const FlowKey& key, std::uint32_t value);

  CuckooConfig cfg_;
  std::vector<Bucket> buckets_;
  std::vector<KeyStoreEntry> keystore_;
  std::vector<std::uint32_t> free_slots_;
  std::uint64_t live_entries_ = 0;
  std::mt19937_64 kick_rng_;
  AccessSink* sink_ = nullptr;
  bool events_enabled_ = true;
};

}  // namespace jitf
