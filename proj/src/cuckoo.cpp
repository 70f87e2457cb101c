#include "jitf/cuckoo.hpp"

#include <stdexcept>

#include "jitf/trace.hpp"

namespace jitf {

CuckooTable::CuckooTable(const CuckooConfig& cfg)
    : cfg_(cfg), kick_rng_(cfg.kick_seed) {
  if (cfg.n_buckets < 2 || !is_power_of_two(cfg.n_buckets))
    throw std::invalid_argument("cuckoo: n_buckets must be a power of two >= 2");
  if ((cfg.base_addr_buckets | cfg.base_addr_keystore) & 63)
    throw std::invalid_argument("cuckoo: base addresses must be 64-byte aligned");
  buckets_.resize(cfg.n_buckets);
}

void CuckooTable::emit(std::uint64_t addr, AccessEvent::Kind kind) {
  if (events_enabled_ && sink_) sink_->on_access({addr, kind});
}

std::uint64_t CuckooTable::bucket_addr(std::uint32_t b) const {
  return cfg_.base_addr_buckets + 64ull * b;
}

std::uint64_t CuckooTable::keystore_addr(std::uint32_t idx) const {
  return cfg_.base_addr_keystore + 64ull * idx;
}

std::uint64_t CuckooTable::primary_bucket_addr(KeyHash h) const {
  return bucket_addr(primary_bucket(h, cfg_.n_buckets));
}

double CuckooTable::load_factor() const {
  return static_cast<double>(live_entries_) /
         (static_cast<double>(cfg_.n_buckets) * kEntriesPerBucket);
}

std::optional<std::uint32_t> CuckooTable::free_slot_in(std::uint32_t b) const {
  for (std::uint32_t s = 0; s < kEntriesPerBucket; ++s) {
    if (!buckets_[b].slot[s].occupied) return s;
  }
  return std::nullopt;
}

std::optional<std::pair<std::uint32_t, std::uint32_t>> CuckooTable::find_slot(
    const FlowKey& key, KeyHash h) {
  const Signature sig = signature_of(h);
  const std::uint32_t primary = primary_bucket(h, cfg_.n_buckets);
  const std::uint32_t secondary = secondary_bucket(primary, sig, cfg_.n_buckets);

  std::uint32_t probe[2] = {primary, secondary};
  const int n_probe = (secondary == primary) ? 1 : 2;
  for (int p = 0; p < n_probe; ++p) {
    const std::uint32_t b = probe[p];
    emit(bucket_addr(b), AccessEvent::Kind::DemandRead);
    for (std::uint32_t s = 0; s < kEntriesPerBucket; ++s) {
      const BucketEntry& e = buckets_[b].slot[s];
      if (!e.occupied || e.sig != sig) continue;
      emit(keystore_addr(e.key_index), AccessEvent::Kind::DemandRead);
      if (keystore_[e.key_index].key == key) return std::make_pair(b, s);
    }
  }
  return std::nullopt;
}

std::optional<std::uint32_t> CuckooTable::lookup(const FlowKey& key) {
  return lookup_hashed(key, hash_key(key));
}

std::optional<std::uint32_t> CuckooTable::lookup_hashed(const FlowKey& key,
                                                        KeyHash h) {
  const auto hit = find_slot(key, h);
  if (!hit) return std::nullopt;
  return keystore_[buckets_[hit->first].slot[hit->second].key_index].value;
}

std::uint32_t CuckooTable::alloc_keystore(const FlowKey& key,
                                          std::uint32_t value) {
  std::uint32_t idx;
  if (!free_slots_.empty()) {
    idx = free_slots_.back();
    free_slots_.pop_back();
  } else {
    idx = static_cast<std::uint32_t>(keystore_.size());
    keystore_.emplace_back();
  }
  keystore_[idx] = {key, value, 1};
  return idx;
}

InsertResult CuckooTable::insert(const FlowKey& key, std::uint32_t value) {
  return insert_hashed(key, hash_key(key), value);
}

InsertResult CuckooTable::insert_hashed(const FlowKey& key, KeyHash h,
                                        std::uint32_t value) {
  if (const auto hit = find_slot(key, h)) {
    const std::uint32_t ki = buckets_[hit->first].slot[hit->second].key_index;
    keystore_[ki].value = value;
    emit(keystore_addr(ki), AccessEvent::Kind::DemandWrite);
    return InsertResult::Updated;
  }

  const Signature sig = signature_of(h);
  const std::uint32_t primary = primary_bucket(h, cfg_.n_buckets);
  const std::uint32_t secondary = secondary_bucket(primary, sig, cfg_.n_buckets);

  const auto place = [&](std::uint32_t b, std::uint32_t s) {
    buckets_[b].slot[s] = {sig, 1, alloc_keystore(key, value)};
    ++live_entries_;
    emit(bucket_addr(b), AccessEvent::Kind::DemandWrite);
    emit(keystore_addr(buckets_[b].slot[s].key_index),
         AccessEvent::Kind::DemandWrite);
  };

  for (const std::uint32_t b : {primary, secondary}) {
    if (const auto s = free_slot_in(b)) {
      place(b, *s);
      return InsertResult::Inserted;
    }
    if (secondary == primary) break;
  }

  // Both buckets full: random-walk displacement. The path is probed first
  // (reads only) and shifted back to front once a free slot is found, so a
  // failed walk leaves the table untouched.
  struct PathNode {
    std::uint32_t bucket, slot;
  };
  std::vector<PathNode> path;
  path.reserve(16);
  std::uint32_t cur = secondary;
  for (std::uint32_t kick = 0; kick < kMaxKicks; ++kick) {
    const auto s = static_cast<std::uint32_t>(bounded_rand(kick_rng_, kEntriesPerBucket));
    bool revisit = false;
    for (const PathNode& n : path)
      if (n.bucket == cur && n.slot == s) revisit = true;
    if (revisit) continue;  // moving the same slot twice would corrupt the shift

    const BucketEntry victim = buckets_[cur].slot[s];
    const std::uint32_t alt = secondary_bucket(cur, victim.sig, cfg_.n_buckets);
    if (alt == cur) continue;  // signature maps the bucket to itself

    path.push_back({cur, s});
    emit(bucket_addr(alt), AccessEvent::Kind::DemandRead);
    if (const auto f = free_slot_in(alt)) {
      std::uint32_t dest_bucket = alt, dest_slot = *f;
      for (auto it = path.rbegin(); it != path.rend(); ++it) {
        buckets_[dest_bucket].slot[dest_slot] = buckets_[it->bucket].slot[it->slot];
        emit(bucket_addr(dest_bucket), AccessEvent::Kind::DemandWrite);
        dest_bucket = it->bucket;
        dest_slot = it->slot;
      }
      place(dest_bucket, dest_slot);
      return InsertResult::Inserted;
    }
    cur = alt;
  }
  return InsertResult::TableFull;
}

bool CuckooTable::erase(const FlowKey& key) {
  const auto hit = find_slot(key, hash_key(key));
  if (!hit) return false;
  BucketEntry& e = buckets_[hit->first].slot[hit->second];
  keystore_[e.key_index].live = 0;
  free_slots_.push_back(e.key_index);
  e = BucketEntry{};
  --live_entries_;
  emit(bucket_addr(hit->first), AccessEvent::Kind::DemandWrite);
  return true;
}

InsertResult CuckooTable::warm_up(
    std::span<const std::pair<FlowKey, std::uint32_t>> items) {
  const double load_after =
      static_cast<double>(live_entries_ + items.size()) /
      (static_cast<double>(cfg_.n_buckets) * kEntriesPerBucket);
  if (load_after > 0.5)
    throw std::invalid_argument(
        "warm_up: table sized for load factor " + std::to_string(load_after) +
        " > 0.5; grow n_buckets");

  const bool saved = events_enabled_;
  events_enabled_ = false;
  InsertResult rc = InsertResult::Inserted;
  for (const auto& [key, value] : items) {
    rc = insert(key, value);
    if (rc == InsertResult::TableFull) break;
  }
  events_enabled_ = saved;
  return rc;
}

bool CuckooTable::check_structure() const {
  std::vector<std::uint8_t> refs(keystore_.size(), 0);
  std::uint64_t occupied = 0;
  for (std::uint32_t b = 0; b < cfg_.n_buckets; ++b) {
    for (const BucketEntry& e : buckets_[b].slot) {
      if (!e.occupied) continue;
      ++occupied;
      if (e.key_index >= keystore_.size()) return false;
      if (!keystore_[e.key_index].live) return false;
      if (++refs[e.key_index] > 1) return false;
      const KeyHash h = hash_key(keystore_[e.key_index].key);
      if (e.sig != signature_of(h)) return false;
      const std::uint32_t p = primary_bucket(h, cfg_.n_buckets);
      const std::uint32_t s = secondary_bucket(p, e.sig, cfg_.n_buckets);
      if (b != p && b != s) return false;
    }
  }
  if (occupied != live_entries_) return false;
  std::uint64_t live = 0;
  for (const KeyStoreEntry& e : keystore_) live += e.live;
  if (live != live_entries_) return false;
  if (free_slots_.size() + live != keystore_.size()) return false;
  for (const std::uint32_t idx : free_slots_) {
    if (idx >= keystore_.size() || keystore_[idx].live) return false;
  }
  return true;
}

}  // namespace jitf
