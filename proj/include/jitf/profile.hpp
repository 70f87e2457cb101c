#pragma once

#include <cstdint>
#include <istream>
#include <string>
#include <utility>
#include <vector>

#include "jitf/cachesim.hpp"

namespace jitf {

// Machine model: cache geometry plus the per-packet cycle constants the
// load balancer charges.
struct Profile {
  std::string name;
  HierarchyConfig hier;
  std::uint32_t base_cycles = 120;       // fixed packet processing work
  std::uint32_t hash_cost_cycles = 20;   // computing a future key's hash
  std::uint32_t issue_cost_cycles = 2;   // executing one prefetch instruction
  bool packet_read = false;              // touch one packet-buffer line per packet
};

// Shared key=value reader: '#' comments and blank lines skipped, one
// key=value per line, whitespace trimmed. Duplicate keys keep file order.
std::vector<std::pair<std::string, std::string>> read_kv_lines(std::istream& in);

// Integer with optional k/M/G suffix (powers of 1024): "32k" -> 32768.
std::uint64_t parse_size(const std::string& s);

Profile parse_profile(std::istream& in, const std::string& name);

// Accepts a filesystem path (anything containing '/' or naming an existing
// file) or a bare profile name resolved against, in order:
// $JITF_PROFILE_DIR, ./profiles, the build-time default profile directory.
Profile load_profile(const std::string& name_or_path);

}  // namespace jitf
