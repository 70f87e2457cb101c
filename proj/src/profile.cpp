#include "jitf/profile.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace jitf {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::pair<std::string, std::string>> read_kv_lines(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("line " + std::to_string(lineno) +
                                  ": expected key=value, got '" + t + "'");
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(key, val);
  }
  return out;
}

std::uint64_t parse_size(const std::string& s) {
  if (s.empty()) throw std::invalid_argument("empty number");
  std::uint64_t mult = 1;
  std::string digits = s;
  switch (s.back()) {
    case 'k': case 'K': mult = 1024ull; break;
    case 'm': case 'M': mult = 1024ull * 1024; break;
    case 'g': case 'G': mult = 1024ull * 1024 * 1024; break;
    default: break;
  }
  if (mult != 1) digits = s.substr(0, s.size() - 1);
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("bad number '" + s + "'");
  return std::stoull(digits) * mult;
}

Profile parse_profile(std::istream& in, const std::string& name) {
  Profile p;
  p.name = name;
  p.hier.l1 = {32 * 1024, 8, 0, 4};
  p.hier.l2 = {1024 * 1024, 16, 0, 14};
  p.hier.llc = {44ull * 1024 * 1024, 11, 0, 44};
  p.hier.dram_latency_cycles = 200;
  p.hier.core_clock_hz = 3.4e9;

  const auto parse_u32 = [](const std::string& v) {
    const std::uint64_t x = parse_size(v);
    if (x > 0xFFFFFFFFull) throw std::invalid_argument("value too large: " + v);
    return static_cast<std::uint32_t>(x);
  };
  const auto parse_bool = [](const std::string& v) {
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    throw std::invalid_argument("expected 0/1, got '" + v + "'");
  };

  for (const auto& [key, val] : read_kv_lines(in)) {
    try {
      if (key == "l1_size") p.hier.l1.size_bytes = parse_size(val);
      else if (key == "l1_ways") p.hier.l1.ways = parse_u32(val);
      else if (key == "l1_allocated_ways") p.hier.l1.allocated_ways = parse_u32(val);
      else if (key == "l1_latency") p.hier.l1.hit_latency_cycles = parse_u32(val);
      else if (key == "l2_size") p.hier.l2.size_bytes = parse_size(val);
      else if (key == "l2_ways") p.hier.l2.ways = parse_u32(val);
      else if (key == "l2_allocated_ways") p.hier.l2.allocated_ways = parse_u32(val);
      else if (key == "l2_latency") p.hier.l2.hit_latency_cycles = parse_u32(val);
      else if (key == "llc_size") p.hier.llc.size_bytes = parse_size(val);
      else if (key == "llc_ways") p.hier.llc.ways = parse_u32(val);
      else if (key == "llc_allocated_ways") p.hier.llc.allocated_ways = parse_u32(val);
      else if (key == "llc_latency") p.hier.llc.hit_latency_cycles = parse_u32(val);
      else if (key == "dram_latency") p.hier.dram_latency_cycles = parse_u32(val);
      else if (key == "clock_ghz") p.hier.core_clock_hz = std::stod(val) * 1e9;
      else if (key == "adjacent_line") p.hier.adjacent_line = parse_bool(val);
      else if (key == "base_cycles") p.base_cycles = parse_u32(val);
      else if (key == "hash_cost_cycles") p.hash_cost_cycles = parse_u32(val);
      else if (key == "issue_cost_cycles") p.issue_cost_cycles = parse_u32(val);
      else if (key == "packet_read") p.packet_read = parse_bool(val);
      else throw std::invalid_argument("unknown key");
    } catch (const std::exception& e) {
      throw std::invalid_argument("profile " + name + ", key '" + key +
                                  "': " + e.what());
    }
  }
  p.hier.validate();
  return p;
}

Profile load_profile(const std::string& name_or_path) {
  std::vector<std::string> candidates;
  if (name_or_path.find('/') != std::string::npos) {
    candidates.push_back(name_or_path);
  } else {
    std::ifstream direct(name_or_path);
    if (direct.good()) {
      candidates.push_back(name_or_path);
    } else {
      const std::string fname = name_or_path + ".profile";
      if (const char* dir = std::getenv("JITF_PROFILE_DIR"))
        candidates.push_back(std::string(dir) + "/" + fname);
      candidates.push_back("profiles/" + fname);
#ifdef JITF_PROFILES_DIR
      candidates.push_back(std::string(JITF_PROFILES_DIR) + "/" + fname);
#endif
    }
  }

  for (const std::string& path : candidates) {
    std::ifstream in(path);
    if (!in.good()) continue;
    return parse_profile(in, name_or_path);
  }

  std::string tried;
  for (const std::string& p : candidates) tried += " " + p;
  throw std::runtime_error("profile '" + name_or_path + "' not found; tried:" + tried);
}

}  // namespace jitf
