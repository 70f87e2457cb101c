#include "jitf/trace.hpp"

#include <cstdio>
#include <cstring>
#include <stdexcept>
#include <unordered_map>

namespace jitf {

namespace {

constexpr std::uint32_t kSrcIp = 0x0A000001u;  // 10.0.0.1
constexpr std::uint32_t kDstIp = 0x0A000002u;  // 10.0.0.2
constexpr std::uint16_t kDstPortBase = 1024;
constexpr std::uint8_t kProtoUdp = 17;

constexpr char kMagic[4] = {'J', 'I', 'T', 'F'};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint16_t kFlagHints = 0x0001;

void put_le16(std::uint8_t* p, std::uint16_t v) {
  p[0] = static_cast<std::uint8_t>(v);
  p[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_le32(std::uint8_t* p, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_le64(std::uint8_t* p, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint16_t get_le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_le32(const std::uint8_t* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint64_t get_le64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void TraceSpec::validate() const {
  if (n_flows == 0) throw std::invalid_argument("trace spec: n_flows must be >= 1");
  if (packets_per_flow == 0)
    throw std::invalid_argument("trace spec: packets_per_flow must be >= 1");
  if (clone_factor == 0)
    throw std::invalid_argument("trace spec: clone_factor must be >= 1");
  if (min_flow_gap < 1)
    throw std::invalid_argument("trace spec: min_flow_gap must be >= 1");
  if (min_flow_gap > n_flows) {
    throw std::invalid_argument(
        "trace spec: min_flow_gap (" + std::to_string(min_flow_gap) +
        ") exceeds n_flows (" + std::to_string(n_flows) +
        "); consecutive packets of one flow cannot be kept that far apart");
  }
  const std::uint64_t total_flows = n_flows * clone_factor;
  if (total_flows > 0xFFFFFFFFull)
    throw std::invalid_argument("trace spec: n_flows * clone_factor exceeds 2^32");
}

std::uint64_t bounded_rand(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

TraceLayout::TraceLayout(const TraceSpec& spec) : spec_(spec) {
  spec.validate();
  total_flows_ = spec.n_flows * spec.clone_factor;
  size_ = total_flows_ * spec.packets_per_flow;

  std::mt19937_64 rng(spec.seed);

  std::vector<std::uint32_t> perm(total_flows_);
  for (std::uint64_t f = 0; f < total_flows_; ++f)
    perm[f] = static_cast<std::uint32_t>(f);
  for (std::uint64_t i = total_flows_ - 1; i > 0; --i) {
    const std::uint64_t j = bounded_rand(rng, i + 1);
    std::swap(perm[i], perm[j]);
  }
  inv_perm_.resize(total_flows_);
  for (std::uint64_t f = 0; f < total_flows_; ++f)
    inv_perm_[perm[f]] = static_cast<std::uint32_t>(f);

  epoch_offset_.resize(spec.packets_per_flow);
  epoch_offset_[0] = bounded_rand(rng, total_flows_);
  for (std::uint64_t e = 1; e < spec.packets_per_flow; ++e) {
    const std::uint64_t delta =
        spec.min_flow_gap + bounded_rand(rng, total_flows_ - spec.min_flow_gap + 1);
    epoch_offset_[e] = (epoch_offset_[e - 1] + delta) % total_flows_;
  }
}

FlowKey TraceLayout::key_of_flow(std::uint64_t flow_id) const {
  FlowKey k;
  k.src_ip = kSrcIp;
  k.dst_ip = kDstIp;
  k.src_port = static_cast<std::uint16_t>(flow_id & 0xFFFF);
  k.dst_port = static_cast<std::uint16_t>(kDstPortBase + (flow_id >> 16));
  k.proto = kProtoUdp;
  return k;
}

std::uint64_t TraceLayout::flow_at(std::uint64_t pos) const {
  const std::uint64_t e = pos / total_flows_;
  const std::uint64_t s = pos % total_flows_;
  const std::uint64_t base = (s + total_flows_ - epoch_offset_[e] % total_flows_) % total_flows_;
  return inv_perm_[base];
}

GeneratedTrace::GeneratedTrace(std::shared_ptr<const TraceLayout> layout,
                               std::optional<std::uint32_t> hint_distance)
    : layout_(std::move(layout)), hint_distance_(hint_distance) {
  if (hint_distance_ && *hint_distance_ == 0)
    throw std::invalid_argument("hint distance must be >= 1");
}

PacketRecord GeneratedTrace::record(std::uint64_t i) const {
  PacketRecord r;
  r.key = layout_->key_at(i);
  r.seq = i;
  if (hint_distance_) {
    r.hint_flags = kHintPresent;
    r.hint_current = hash_key(r.key);
    const std::uint64_t j = i + *hint_distance_;
    if (j < layout_->size()) {
      r.hint_future = hash_key(layout_->key_at(j));
    } else {
      r.hint_future = 0;
      r.hint_flags |= kHintFutureAbsent;
    }
  }
  return r;
}

MaterializedTrace generate(const TraceSpec& spec) {
  TraceLayout layout(spec);
  std::vector<PacketRecord> records(layout.size());
  for (std::uint64_t i = 0; i < layout.size(); ++i) {
    records[i].key = layout.key_at(i);
    records[i].seq = i;
  }
  return MaterializedTrace(std::move(records), false);
}

std::optional<FlowKey> next_key(const Trace& t, std::uint64_t i, std::uint64_t d) {
  const std::uint64_t j = i + d;
  if (j >= t.size()) return std::nullopt;
  return t.record(j).key;
}

bool trace_equal(const Trace& a, const Trace& b) {
  if (a.size() != b.size() || a.has_hints() != b.has_hints()) return false;
  for (std::uint64_t i = 0; i < a.size(); ++i) {
    if (!(a.record(i) == b.record(i))) return false;
  }
  return true;
}

void write_trace(const Trace& t, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw TraceIoError(TraceIoStatus::Io, "cannot open for writing: " + path);

  const bool hints = t.has_hints();
  std::uint8_t header[16];
  std::memcpy(header, kMagic, 4);
  put_le16(header + 4, kVersion);
  put_le16(header + 6, hints ? kFlagHints : 0);
  put_le64(header + 8, t.size());
  if (std::fwrite(header, 1, sizeof header, f.get()) != sizeof header)
    throw TraceIoError(TraceIoStatus::Io, "short write: " + path);

  const std::size_t rec_size = hints ? 22 : 13;
  std::vector<std::uint8_t> buf;
  buf.reserve(rec_size << 16);
  for (std::uint64_t i = 0; i < t.size(); ++i) {
    const PacketRecord r = t.record(i);
    const auto key_bytes = r.key.serialize();
    buf.insert(buf.end(), key_bytes.begin(), key_bytes.end());
    if (hints) {
      std::uint8_t h[9];
      put_le32(h, r.hint_current);
      put_le32(h + 4, r.hint_future);
      h[8] = r.hint_flags;
      buf.insert(buf.end(), h, h + 9);
    }
    if (buf.size() >= (rec_size << 16)) {
      if (std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size())
        throw TraceIoError(TraceIoStatus::Io, "short write: " + path);
      buf.clear();
    }
  }
  if (!buf.empty() &&
      std::fwrite(buf.data(), 1, buf.size(), f.get()) != buf.size())
    throw TraceIoError(TraceIoStatus::Io, "short write: " + path);
  if (std::fflush(f.get()) != 0)
    throw TraceIoError(TraceIoStatus::Io, "flush failed: " + path);
}

MaterializedTrace read_trace(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw TraceIoError(TraceIoStatus::Io, "cannot open: " + path);

  std::uint8_t header[16];
  if (std::fread(header, 1, sizeof header, f.get()) != sizeof header)
    throw TraceIoError(TraceIoStatus::Truncated, "truncated header: " + path);
  if (std::memcmp(header, kMagic, 4) != 0)
    throw TraceIoError(TraceIoStatus::BadMagic, "bad magic: " + path);
  const std::uint16_t version = get_le16(header + 4);
  if (version != kVersion)
    throw TraceIoError(TraceIoStatus::BadVersion,
                       "unsupported version " + std::to_string(version) + ": " + path);
  const bool hints = (get_le16(header + 6) & kFlagHints) != 0;
  const std::uint64_t count = get_le64(header + 8);

  const std::size_t rec_size = hints ? 22 : 13;
  std::vector<PacketRecord> records(count);
  std::vector<std::uint8_t> buf(rec_size);
  for (std::uint64_t i = 0; i < count; ++i) {
    if (std::fread(buf.data(), 1, rec_size, f.get()) != rec_size)
      throw TraceIoError(TraceIoStatus::Truncated,
                         "truncated at record " + std::to_string(i) + ": " + path);
    PacketRecord& r = records[i];
    const std::uint8_t* p = buf.data();
    r.key.src_ip = (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
                   (std::uint32_t(p[2]) << 8) | p[3];
    r.key.dst_ip = (std::uint32_t(p[4]) << 24) | (std::uint32_t(p[5]) << 16) |
                   (std::uint32_t(p[6]) << 8) | p[7];
    r.key.src_port = static_cast<std::uint16_t>((p[8] << 8) | p[9]);
    r.key.dst_port = static_cast<std::uint16_t>((p[10] << 8) | p[11]);
    r.key.proto = p[12];
    r.seq = i;
    if (hints) {
      r.hint_current = get_le32(p + 13);
      r.hint_future = get_le32(p + 17);
      r.hint_flags = p[21];
    }
  }
  return MaterializedTrace(std::move(records), hints);
}

void write_trace_csv(const Trace& t, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "w"));
  if (!f) throw TraceIoError(TraceIoStatus::Io, "cannot open for writing: " + path);
  const bool hints = t.has_hints();
  for (std::uint64_t i = 0; i < t.size(); ++i) {
    const PacketRecord r = t.record(i);
    const auto ip = [](std::uint32_t v, char* out) {
      std::snprintf(out, 16, "%u.%u.%u.%u", v >> 24, (v >> 16) & 0xFF,
                    (v >> 8) & 0xFF, v & 0xFF);
    };
    char src[16], dst[16];
    ip(r.key.src_ip, src);
    ip(r.key.dst_ip, dst);
    if (hints) {
      std::fprintf(f.get(), "%s,%s,%u,%u,%u,%u,%u\n", src, dst, r.key.src_port,
                   r.key.dst_port, r.key.proto, r.hint_current, r.hint_future);
    } else {
      std::fprintf(f.get(), "%s,%s,%u,%u,%u\n", src, dst, r.key.src_port,
                   r.key.dst_port, r.key.proto);
    }
  }
  if (std::fflush(f.get()) != 0)
    throw TraceIoError(TraceIoStatus::Io, "flush failed: " + path);
}

std::optional<std::uint64_t> scan_min_flow_gap(const Trace& t) {
  struct KeyHasher {
    std::size_t operator()(const FlowKey& k) const {
      return hash_key(k) * 0x9E3779B97F4A7C15ull ^ k.src_ip;
    }
  };
  std::unordered_map<FlowKey, std::uint64_t, KeyHasher> last;
  last.reserve(1 << 16);
  std::optional<std::uint64_t> min_gap;
  for (std::uint64_t i = 0; i < t.size(); ++i) {
    const FlowKey k = t.record(i).key;
    auto [it, fresh] = last.try_emplace(k, i);
    if (!fresh) {
      const std::uint64_t gap = i - it->second;
      if (!min_gap || gap < *min_gap) min_gap = gap;
      it->second = i;
    }
  }
  return min_gap;
}

}  // namespace jitf
