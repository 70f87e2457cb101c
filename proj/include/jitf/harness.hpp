#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "jitf/lb.hpp"
#include "jitf/profile.hpp"
#include "jitf/trace.hpp"

namespace jitf {

// Experiment description, read from a key=value file (same dialect as the
// machine profiles). Grids are comma-separated lists; sizes take k/M
// suffixes; `distances` accepts the token `auto` for the model-optimal
// distance of the chosen profile.
struct ExperimentSpec {
  std::string experiment;  // flows | distance | class | improvement
  std::string profile = "xeon6246r-1way";
  std::vector<std::uint64_t> flow_grid;
  std::vector<std::uint32_t> distance_grid;  // 0 = auto
  std::vector<PrefetchClass> class_grid;
  std::vector<Mode> mode_grid;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::uint64_t packets_per_flow = 16;
  std::uint64_t clone_factor = 1;
  std::uint64_t min_flow_gap = 0;   // 0 = auto: total_flows / 2
  std::uint64_t buckets = 0;        // 0 = auto: sized for the largest cell
  std::uint64_t max_packets = 16777216;  // per-cell measured-packet cap
  std::uint32_t k_servers = 64;

  static ExperimentSpec parse(std::istream& in, const std::string& name);
  static ExperimentSpec load(const std::string& path);

  // Fills experiment-specific defaults and checks grid consistency.
  void finalize(const Profile& prof);
};

// Earliest prefetch distance whose completion beats the demand: the packet
// clock advances about base_cycles per packet while a line needs a full
// DRAM round trip.
std::uint32_t model_optimal_distance(const Profile& prof);

struct ResultRow {
  std::string profile;
  std::uint64_t flows = 0;
  Mode mode = Mode::Off;
  std::uint32_t distance = 0;  // 0 for mode=off rows
  std::string cls = "none";    // "none" for mode=off rows
  std::uint64_t seed = 0;
  MetricsRecord metrics;
};

struct Claim {
  Claim() = default;
  explicit Claim(std::string n) : name(std::move(n)) {}

  std::string name;
  bool evaluated = false;  // false: prerequisites absent from the grid
  bool pass = false;
  std::string detail;      // measured values, human-readable
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<ResultRow> rows;  // deterministic cell order
  std::vector<Claim> claims;
  std::uint32_t dstar = 0;
  std::uint64_t buckets = 0;

  bool all_claims_pass() const;
  std::string csv() const;      // schema: profile,flows,mode,distance,class,
                                // seed,throughput_pps,llc_mpp,l2_mpp,
                                // useful_ratio,total_cycles
  std::string dat() const;      // gnuplot blocks, seed medians with min/max
  std::string summary() const;  // key=value claims + measurements
};

// Runs every cell of the experiment; `jobs` caps the worker threads
// (0 = hardware concurrency). Row order is independent of scheduling.
ExperimentResult run_experiment(const ExperimentSpec& spec, unsigned jobs = 0);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace jitf
