#include "jitf/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace jitf {

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  for (const std::string& t : out)
    if (t.empty()) throw std::invalid_argument("empty element in list '" + s + "'");
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// First-packet view of a longer trace; keeps per-cell runtimes bounded.
class SliceTrace final : public Trace {
 public:
  SliceTrace(const Trace& base, std::uint64_t n) : base_(base), n_(n) {}
  std::uint64_t size() const override { return n_; }
  PacketRecord record(std::uint64_t i) const override { return base_.record(i); }
  bool has_hints() const override { return base_.has_hints(); }

 private:
  const Trace& base_;
  std::uint64_t n_;
};

struct Cell {
  std::uint64_t flows;
  Mode mode;
  std::uint32_t distance;  // meaningful unless mode == Off
  PrefetchClass cls;
  std::uint64_t seed;
};

struct Agg {
  std::uint64_t flows;
  Mode mode;
  std::uint32_t distance;
  std::string cls;
  double thr_med, thr_min, thr_max;
  double llc_med, llc_min, llc_max;
  double l2_med, useful_med;
};

std::vector<Agg> aggregate(const std::vector<ResultRow>& rows) {
  std::vector<Agg> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    std::size_t j = i;
    std::vector<double> thr, llc, l2, useful;
    while (j < rows.size() && rows[j].flows == rows[i].flows &&
           rows[j].mode == rows[i].mode &&
           rows[j].distance == rows[i].distance && rows[j].cls == rows[i].cls) {
      thr.push_back(rows[j].metrics.throughput_pps);
      llc.push_back(rows[j].metrics.per_packet_llc_misses);
      l2.push_back(rows[j].metrics.per_packet_l2_misses);
      useful.push_back(rows[j].metrics.prefetch_useful_ratio);
      ++j;
    }
    Agg a;
    a.flows = rows[i].flows;
    a.mode = rows[i].mode;
    a.distance = rows[i].distance;
    a.cls = rows[i].cls;
    a.thr_med = median(thr);
    a.thr_min = *std::min_element(thr.begin(), thr.end());
    a.thr_max = *std::max_element(thr.begin(), thr.end());
    a.llc_med = median(llc);
    a.llc_min = *std::min_element(llc.begin(), llc.end());
    a.llc_max = *std::max_element(llc.begin(), llc.end());
    a.l2_med = median(l2);
    a.useful_med = median(useful);
    out.push_back(a);
    i = j;
  }
  return out;
}

const Agg* find_agg(const std::vector<Agg>& aggs, Mode mode,
                    std::uint64_t flows, std::uint32_t distance,
                    const std::string& cls) {
  for (const Agg& a : aggs) {
    if (a.mode == mode && a.flows == flows && a.distance == distance &&
        (cls.empty() || a.cls == cls))
      return &a;
  }
  return nullptr;
}

constexpr double kEps = 1e-9;

}  // namespace

std::uint32_t model_optimal_distance(const Profile& prof) {
  return (prof.hier.dram_latency_cycles + prof.base_cycles - 1) /
         prof.base_cycles;
}

ExperimentSpec ExperimentSpec::parse(std::istream& in, const std::string& name) {
  ExperimentSpec s;
  bool seeds_given = false;
  for (const auto& [key, val] : read_kv_lines(in)) {
    try {
      if (key == "experiment") s.experiment = val;
      else if (key == "profile") s.profile = val;
      else if (key == "flows") {
        s.flow_grid.clear();
        for (const std::string& t : split_list(val)) s.flow_grid.push_back(parse_size(t));
      } else if (key == "distances") {
        s.distance_grid.clear();
        for (const std::string& t : split_list(val)) {
          if (t == "auto") s.distance_grid.push_back(0);
          else s.distance_grid.push_back(static_cast<std::uint32_t>(parse_size(t)));
        }
      } else if (key == "classes") {
        s.class_grid.clear();
        for (const std::string& t : split_list(val)) {
          const auto c = parse_prefetch_class(t);
          if (!c) throw std::invalid_argument("unknown class '" + t + "'");
          s.class_grid.push_back(*c);
        }
      } else if (key == "modes") {
        s.mode_grid.clear();
        for (const std::string& t : split_list(val)) {
          const auto m = parse_mode(t);
          if (!m) throw std::invalid_argument("unknown mode '" + t + "'");
          s.mode_grid.push_back(*m);
        }
      } else if (key == "seeds") {
        s.seeds.clear();
        seeds_given = true;
        for (const std::string& t : split_list(val)) s.seeds.push_back(parse_size(t));
      } else if (key == "ppf") s.packets_per_flow = parse_size(val);
      else if (key == "clone") s.clone_factor = parse_size(val);
      else if (key == "gap") s.min_flow_gap = val == "auto" ? 0 : parse_size(val);
      else if (key == "buckets") s.buckets = val == "auto" ? 0 : parse_size(val);
      else if (key == "max_packets") s.max_packets = parse_size(val);
      else if (key == "k_servers") s.k_servers = static_cast<std::uint32_t>(parse_size(val));
      else throw std::invalid_argument("unknown key");
    } catch (const std::exception& e) {
      throw std::invalid_argument("experiment spec " + name + ", key '" + key +
                                  "': " + e.what());
    }
  }
  if (seeds_given && s.seeds.empty())
    throw std::invalid_argument("experiment spec " + name + ": empty seed list");
  return s;
}

ExperimentSpec ExperimentSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in.good())
    throw std::runtime_error("cannot open experiment spec '" + path + "'");
  return parse(in, path);
}

void ExperimentSpec::finalize(const Profile& prof) {
  const std::uint32_t dstar = model_optimal_distance(prof);
  if (experiment != "flows" && experiment != "distance" &&
      experiment != "class" && experiment != "improvement")
    throw std::invalid_argument("unknown experiment '" + experiment +
                                "' (flows|distance|class|improvement)");
  if (seeds.empty()) throw std::invalid_argument("seed list is empty");
  if (packets_per_flow == 0) throw std::invalid_argument("ppf must be >= 1");

  if (flow_grid.empty()) {
    if (experiment == "distance" || experiment == "class") {
      flow_grid = {512 * 1024};
    } else {
      for (std::uint64_t f = 1024; f <= 1024 * 1024; f *= 2) flow_grid.push_back(f);
    }
  }
  if ((experiment == "distance" || experiment == "class") && flow_grid.size() != 1)
    throw std::invalid_argument(experiment + " experiment uses a single flow count");

  if (distance_grid.empty()) {
    if (experiment == "distance")
      distance_grid = {1, 2, 4, 8, 16, 32, 64, 128, 256};
    else if (experiment == "class")
      distance_grid = {0, 64, 256};
    else
      distance_grid = {0};
  }
  for (std::uint32_t& d : distance_grid)
    if (d == 0) d = dstar;
  if (experiment == "improvement" && distance_grid.size() != 1)
    throw std::invalid_argument("improvement experiment uses a single distance");

  if (class_grid.empty()) {
    if (experiment == "class")
      class_grid = {PrefetchClass::T0, PrefetchClass::T1, PrefetchClass::T2,
                    PrefetchClass::NTA};
    else
      class_grid = {PrefetchClass::T0};
  }
  if (experiment != "class" && class_grid.size() != 1)
    throw std::invalid_argument(experiment + " experiment uses a single class");

  if (mode_grid.empty()) {
    if (experiment == "flows") mode_grid = {Mode::Off};
    else if (experiment == "distance") mode_grid = {Mode::NoOffload, Mode::Offload};
    else if (experiment == "class") mode_grid = {Mode::Offload};
    else mode_grid = {Mode::Off, Mode::NoOffload, Mode::Offload};
  }
  if (experiment == "flows")
    for (Mode m : mode_grid)
      if (m != Mode::Off) throw std::invalid_argument("flows experiment is mode=off only");
  if (experiment == "class")
    for (Mode m : mode_grid)
      if (m != Mode::Offload) throw std::invalid_argument("class experiment is mode=offload only");

  if (buckets == 0) {
    std::uint64_t fmax = 0;
    for (std::uint64_t f : flow_grid) fmax = std::max(fmax, f);
    buckets = suggested_buckets(fmax * clone_factor);
  }
  if (!is_power_of_two(buckets) || buckets < 2)
    throw std::invalid_argument("buckets must be a power of two >= 2");
}

bool ExperimentResult::all_claims_pass() const {
  for (const Claim& c : claims)
    if (c.evaluated && !c.pass) return false;
  return true;
}

namespace {

ResultRow run_cell(const ExperimentSpec& spec, const Profile& prof,
                   const Cell& cell) {
  TraceSpec ts;
  ts.n_flows = cell.flows;
  ts.packets_per_flow = spec.packets_per_flow;
  ts.clone_factor = spec.clone_factor;
  const std::uint64_t total_flows = cell.flows * spec.clone_factor;
  ts.min_flow_gap = spec.min_flow_gap ? spec.min_flow_gap
                                      : std::max<std::uint64_t>(1, total_flows / 2);
  ts.seed = cell.seed;

  const auto layout = std::make_shared<TraceLayout>(ts);
  const bool offload = cell.mode == Mode::Offload;
  const GeneratedTrace trace(
      layout, offload ? std::optional<std::uint32_t>(cell.distance) : std::nullopt);

  Hierarchy hier(prof.hier);
  LoadBalancerConfig lbc;
  lbc.k_servers = spec.k_servers;
  lbc.n_buckets = spec.buckets;
  lbc.base_cycles = prof.base_cycles;
  lbc.packet_read = prof.packet_read;
  LoadBalancer lb(lbc, hier);

  PrefetchPolicy pol;
  pol.mode = cell.mode;
  pol.distance = cell.mode == Mode::Off ? 1 : cell.distance;
  pol.cls = cell.cls;
  pol.hash_cost_cycles = prof.hash_cost_cycles;
  pol.issue_cost_cycles = prof.issue_cost_cycles;

  ResultRow row;
  row.profile = spec.profile;
  row.flows = cell.flows;
  row.mode = cell.mode;
  row.distance = cell.mode == Mode::Off ? 0 : cell.distance;
  row.cls = cell.mode == Mode::Off ? "none" : to_string(cell.cls);
  row.seed = cell.seed;
  if (trace.size() > spec.max_packets) {
    const SliceTrace slice(trace, spec.max_packets);
    row.metrics = lb.run_trace(slice, pol);
  } else {
    row.metrics = lb.run_trace(trace, pol);
  }
  return row;
}

std::vector<Cell> build_cells(const ExperimentSpec& spec, std::uint32_t dstar) {
  std::vector<Cell> cells;
  const PrefetchClass cls0 = spec.class_grid.front();
  const auto off_rows = [&](std::uint64_t flows) {
    for (std::uint64_t seed : spec.seeds)
      cells.push_back({flows, Mode::Off, dstar, cls0, seed});
  };

  if (spec.experiment == "flows") {
    for (std::uint64_t f : spec.flow_grid) off_rows(f);
  } else if (spec.experiment == "distance") {
    const std::uint64_t f = spec.flow_grid.front();
    off_rows(f);
    for (Mode m : spec.mode_grid)
      for (std::uint32_t d : spec.distance_grid)
        for (std::uint64_t seed : spec.seeds)
          cells.push_back({f, m, d, cls0, seed});
  } else if (spec.experiment == "class") {
    const std::uint64_t f = spec.flow_grid.front();
    off_rows(f);
    for (PrefetchClass c : spec.class_grid)
      for (std::uint32_t d : spec.distance_grid)
        for (std::uint64_t seed : spec.seeds)
          cells.push_back({f, Mode::Offload, d, c, seed});
  } else {  // improvement
    const std::uint32_t d = spec.distance_grid.front();
    for (std::uint64_t f : spec.flow_grid)
      for (Mode m : spec.mode_grid)
        for (std::uint64_t seed : spec.seeds)
          cells.push_back({f, m, d, cls0, seed});
  }
  return cells;
}

void eval_flows_claims(ExperimentResult& res, const std::vector<Agg>& aggs) {
  const ExperimentSpec& spec = res.spec;
  {
    Claim c{"llc_mpp_non_decreasing"};
    c.evaluated = aggs.size() >= 2;
    c.pass = true;
    // Saturated tails jitter at the 1e-4 scale (bucket sharing, set-mapping
    // collisions); real decay steps are 0.1 and up. Slack sits in between.
    constexpr double kMonotoneSlack = 1e-3;
    for (std::size_t i = 1; i < aggs.size(); ++i) {
      if (aggs[i].llc_med + kMonotoneSlack < aggs[i - 1].llc_med) c.pass = false;
    }
    if (!aggs.empty())
      c.detail = "llc_mpp " + fmt("%.6f", aggs.front().llc_med) + " .. " +
                 fmt("%.6f", aggs.back().llc_med);
    res.claims.push_back(c);
  }
  {
    Claim c{"throughput_decays"};
    c.evaluated = aggs.size() >= 2;
    if (c.evaluated) {
      // Non-strict: a grid whose working set never leaves the cache ties.
      c.pass = aggs.back().thr_med <= aggs.front().thr_med + kEps;
      c.detail = "thr_first=" + fmt("%.3f", aggs.front().thr_med) +
                 " thr_last=" + fmt("%.3f", aggs.back().thr_med);
    }
    res.claims.push_back(c);
  }
  {
    Claim c{"llc_mpp_small_at_1k"};
    const Agg* a = find_agg(aggs, Mode::Off, 1024, 0, "");
    c.evaluated = a != nullptr;
    if (a) {
      c.pass = a->llc_med < 0.05;
      c.detail = "llc_mpp_1k=" + fmt("%.6f", a->llc_med);
    }
    res.claims.push_back(c);
  }
  {
    Claim c{"llc_mpp_ge_1_at_512k"};
    const Agg* a = find_agg(aggs, Mode::Off, 512 * 1024, 0, "");
    c.evaluated = a != nullptr;
    if (a) {
      c.pass = a->llc_med >= 1.0;
      c.detail = "llc_mpp_512k=" + fmt("%.6f", a->llc_med);
    }
    res.claims.push_back(c);
  }
  {
    Claim c{"throughput_drop_at_64k"};
    const Agg* a1 = find_agg(aggs, Mode::Off, 1024, 0, "");
    const Agg* a64 = find_agg(aggs, Mode::Off, 65536, 0, "");
    c.evaluated = a1 && a64;
    if (c.evaluated) {
      const double ratio = a64->thr_med / a1->thr_med;
      c.pass = ratio <= 0.5;
      c.detail = "thr_64k/thr_1k=" + fmt("%.4f", ratio);
    }
    res.claims.push_back(c);
  }
  (void)spec;
}

void eval_distance_claims(ExperimentResult& res, const std::vector<Agg>& aggs) {
  const ExperimentSpec& spec = res.spec;
  const std::uint64_t f = spec.flow_grid.front();
  const Agg* base = find_agg(aggs, Mode::Off, f, 0, "");
  const std::uint32_t dmin =
      *std::min_element(spec.distance_grid.begin(), spec.distance_grid.end());
  const std::uint32_t dmax =
      *std::max_element(spec.distance_grid.begin(), spec.distance_grid.end());
  const bool have_offload =
      std::find(spec.mode_grid.begin(), spec.mode_grid.end(), Mode::Offload) !=
      spec.mode_grid.end();
  const bool have_dstar =
      std::find(spec.distance_grid.begin(), spec.distance_grid.end(),
                res.dstar) != spec.distance_grid.end();

  {
    Claim c{"dstar_beats_dmin"};
    const Agg* at_star = find_agg(aggs, Mode::Offload, f, res.dstar, "");
    const Agg* at_min = find_agg(aggs, Mode::Offload, f, dmin, "");
    c.evaluated = base && have_offload && have_dstar && at_star && at_min &&
                  dmin < res.dstar;
    if (c.evaluated) {
      c.pass = at_star->thr_med >= at_min->thr_med + 0.10 * base->thr_med;
      c.detail = "thr_dstar=" + fmt("%.3f", at_star->thr_med) +
                 " thr_dmin=" + fmt("%.3f", at_min->thr_med) +
                 " baseline=" + fmt("%.3f", base->thr_med);
    }
    res.claims.push_back(c);
  }
  {
    Claim c{"dstar_beats_dmax"};
    const Agg* at_star = find_agg(aggs, Mode::Offload, f, res.dstar, "");
    const Agg* at_max = find_agg(aggs, Mode::Offload, f, dmax, "");
    c.evaluated = base && have_offload && have_dstar && at_star && at_max &&
                  dmax > res.dstar;
    if (c.evaluated) {
      c.pass = at_star->thr_med >= at_max->thr_med + 0.05 * base->thr_med;
      c.detail = "thr_dstar=" + fmt("%.3f", at_star->thr_med) +
                 " thr_dmax=" + fmt("%.3f", at_max->thr_med) +
                 " baseline=" + fmt("%.3f", base->thr_med);
    }
    res.claims.push_back(c);
  }
  {
    Claim c{"argmax_near_dstar"};
    const Agg* best = nullptr;
    for (const Agg& a : aggs)
      if (a.mode == Mode::Offload && (!best || a.thr_med > best->thr_med))
        best = &a;
    c.evaluated = have_offload && best != nullptr;
    if (c.evaluated) {
      const std::uint32_t lo = std::max<std::uint32_t>(1, res.dstar / 2);
      const std::uint32_t hi = res.dstar * 2;
      c.pass = best->distance >= lo && best->distance <= hi;
      c.detail = "argmax=" + std::to_string(best->distance) +
                 " dstar=" + std::to_string(res.dstar) + " band=[" +
                 std::to_string(lo) + "," + std::to_string(hi) + "]";
    }
    res.claims.push_back(c);
  }
  {
    Claim c{"offload_ge_nooffload"};
    bool any = false, ok = true;
    std::uint32_t worst = 0;
    for (std::uint32_t d : spec.distance_grid) {
      const Agg* o = find_agg(aggs, Mode::Offload, f, d, "");
      const Agg* n = find_agg(aggs, Mode::NoOffload, f, d, "");
      if (!o || !n) continue;
      any = true;
      if (o->thr_med + kEps < n->thr_med) {
        ok = false;
        worst = d;
      }
    }
    c.evaluated = any;
    c.pass = ok;
    c.detail = ok ? "pointwise over shared distances"
                  : "violated at distance " + std::to_string(worst);
    res.claims.push_back(c);
  }
}

void eval_class_claims(ExperimentResult& res, const std::vector<Agg>& aggs) {
  const ExperimentSpec& spec = res.spec;
  const std::uint64_t f = spec.flow_grid.front();
  const Agg* base = find_agg(aggs, Mode::Off, f, 0, "");
  {
    Claim c{"t0_t1_t2_spread_small_at_dstar"};
    const Agg* t0 = find_agg(aggs, Mode::Offload, f, res.dstar, "t0");
    const Agg* t1 = find_agg(aggs, Mode::Offload, f, res.dstar, "t1");
    const Agg* t2 = find_agg(aggs, Mode::Offload, f, res.dstar, "t2");
    c.evaluated = base && t0 && t1 && t2;
    if (c.evaluated) {
      const double hi = std::max({t0->thr_med, t1->thr_med, t2->thr_med});
      const double lo = std::min({t0->thr_med, t1->thr_med, t2->thr_med});
      c.pass = hi - lo <= 0.05 * base->thr_med + kEps;
      c.detail = "spread=" + fmt("%.3f", hi - lo) +
                 " bound=" + fmt("%.3f", 0.05 * base->thr_med);
    }
    res.claims.push_back(c);
  }
  {
    Claim c{"nta_le_t0_at_large_d"};
    bool any = false, ok = true;
    std::uint32_t worst = 0;
    for (std::uint32_t d : spec.distance_grid) {
      if (d < 64) continue;
      const Agg* t0 = find_agg(aggs, Mode::Offload, f, d, "t0");
      const Agg* nta = find_agg(aggs, Mode::Offload, f, d, "nta");
      if (!t0 || !nta) continue;
      any = true;
      if (nta->thr_med > t0->thr_med + kEps) {
        ok = false;
        worst = d;
      }
    }
    c.evaluated = any;
    c.pass = ok;
    c.detail = ok ? "pointwise over distances >= 64"
                  : "violated at distance " + std::to_string(worst);
    res.claims.push_back(c);
  }
}

void eval_improvement_claims(ExperimentResult& res, const std::vector<Agg>& aggs) {
  const ExperimentSpec& spec = res.spec;
  std::uint64_t fmin = spec.flow_grid.front(), fmax = spec.flow_grid.front();
  for (std::uint64_t f : spec.flow_grid) {
    fmin = std::min(fmin, f);
    fmax = std::max(fmax, f);
  }
  const std::uint32_t d = spec.distance_grid.front();

  const auto impr = [&](std::uint64_t f) -> std::optional<double> {
    const Agg* off = find_agg(aggs, Mode::Off, f, 0, "");
    const Agg* ol = find_agg(aggs, Mode::Offload, f, d, "");
    if (!off || !ol) return std::nullopt;
    return ol->thr_med / off->thr_med - 1.0;
  };

  {
    Claim c{"recovery_at_max_flows"};
    const auto v = impr(fmax);
    c.evaluated = v.has_value();
    if (v) {
      c.pass = *v >= 0.40;
      c.detail = "improvement=" + fmt("%.4f", *v) + " at flows=" + std::to_string(fmax);
    }
    res.claims.push_back(c);
  }
  {
    Claim c{"llc_misses_lower_at_max_flows"};
    const Agg* off = find_agg(aggs, Mode::Off, fmax, 0, "");
    const Agg* ol = find_agg(aggs, Mode::Offload, fmax, d, "");
    c.evaluated = off && ol;
    if (c.evaluated) {
      c.pass = ol->llc_med < off->llc_med;
      c.detail = "llc_off=" + fmt("%.6f", off->llc_med) +
                 " llc_offload=" + fmt("%.6f", ol->llc_med);
    }
    res.claims.push_back(c);
  }
  {
    Claim c{"small_improvement_at_min_flows"};
    const auto v = impr(fmin);
    c.evaluated = v.has_value();
    if (v) {
      c.pass = *v <= 0.05;
      c.detail = "improvement=" + fmt("%.4f", *v) + " at flows=" + std::to_string(fmin);
    }
    res.claims.push_back(c);
  }
  {
    Claim c{"offload_ge_nooffload"};
    bool any = false, ok = true;
    std::uint64_t worst = 0;
    for (std::uint64_t f : spec.flow_grid) {
      const Agg* ol = find_agg(aggs, Mode::Offload, f, d, "");
      const Agg* no = find_agg(aggs, Mode::NoOffload, f, d, "");
      if (!ol || !no) continue;
      any = true;
      if (ol->thr_med + kEps < no->thr_med) {
        ok = false;
        worst = f;
      }
    }
    c.evaluated = any;
    c.pass = ok;
    c.detail = ok ? "pointwise over the flow grid"
                  : "violated at flows=" + std::to_string(worst);
    res.claims.push_back(c);
  }
}

}  // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec_in, unsigned jobs) {
  const Profile prof = load_profile(spec_in.profile);
  ExperimentSpec spec = spec_in;
  spec.finalize(prof);

  ExperimentResult res;
  res.spec = spec;
  res.dstar = model_optimal_distance(prof);
  res.buckets = spec.buckets;

  const std::vector<Cell> cells = build_cells(spec, res.dstar);
  res.rows.resize(cells.size());
  std::vector<std::string> errors(cells.size());

  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      try {
        res.rows[i] = run_cell(spec, prof, cells[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  unsigned n = jobs ? jobs : std::thread::hardware_concurrency();
  n = std::max(1u, std::min<unsigned>(n, static_cast<unsigned>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i].empty())
      throw std::runtime_error(
          "cell flows=" + std::to_string(cells[i].flows) + " mode=" +
          to_string(cells[i].mode) + " distance=" +
          std::to_string(cells[i].distance) + " class=" +
          to_string(cells[i].cls) + " seed=" + std::to_string(cells[i].seed) +
          ": " + errors[i]);
  }

  const std::vector<Agg> aggs = aggregate(res.rows);
  if (spec.experiment == "flows") eval_flows_claims(res, aggs);
  else if (spec.experiment == "distance") eval_distance_claims(res, aggs);
  else if (spec.experiment == "class") eval_class_claims(res, aggs);
  else eval_improvement_claims(res, aggs);
  return res;
}

std::string ExperimentResult::csv() const {
  std::string out =
      "profile,flows,mode,distance,class,seed,throughput_pps,llc_mpp,l2_mpp,"
      "useful_ratio,total_cycles\n";
  for (const ResultRow& r : rows) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s,%llu,%s,%u,%s,%llu,%.3f,%.6f,%.6f,%.6f,%llu\n",
                  r.profile.c_str(), static_cast<unsigned long long>(r.flows),
                  to_string(r.mode), r.distance, r.cls.c_str(),
                  static_cast<unsigned long long>(r.seed),
                  r.metrics.throughput_pps, r.metrics.per_packet_llc_misses,
                  r.metrics.per_packet_l2_misses,
                  r.metrics.prefetch_useful_ratio,
                  static_cast<unsigned long long>(r.metrics.total_cycles));
    out += buf;
  }
  return out;
}

std::string ExperimentResult::dat() const {
  const std::vector<Agg> aggs = aggregate(rows);
  std::ostringstream out;
  out << "# experiment=" << spec.experiment << " profile=" << spec.profile
      << " dstar=" << dstar << "\n";

  const auto row = [&](double x, const Agg& a) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%.0f %.3f %.3f %.3f %.6f %.6f %.6f\n", x,
                  a.thr_med, a.thr_min, a.thr_max, a.llc_med, a.llc_min,
                  a.llc_max);
    out << buf;
  };

  if (spec.experiment == "flows") {
    out << "# flows thr_med thr_min thr_max llc_med llc_min llc_max\n";
    for (const Agg& a : aggs) row(static_cast<double>(a.flows), a);
    return out.str();
  }

  if (spec.experiment == "improvement") {
    out << "# flows thr_off thr_nooffload thr_offload improvement\n";
    const std::uint32_t d = spec.distance_grid.front();
    for (std::uint64_t f : spec.flow_grid) {
      const Agg* off = find_agg(aggs, Mode::Off, f, 0, "");
      const Agg* no = find_agg(aggs, Mode::NoOffload, f, d, "");
      const Agg* ol = find_agg(aggs, Mode::Offload, f, d, "");
      char buf[192];
      std::snprintf(buf, sizeof buf, "%llu %.3f %.3f %.3f %.6f\n",
                    static_cast<unsigned long long>(f),
                    off ? off->thr_med : 0.0, no ? no->thr_med : 0.0,
                    ol ? ol->thr_med : 0.0,
                    (off && ol) ? ol->thr_med / off->thr_med - 1.0 : 0.0);
      out << buf;
    }
    return out.str();
  }

  // distance / class: one gnuplot block per curve
  const Agg* base = find_agg(aggs, Mode::Off, spec.flow_grid.front(), 0, "");
  if (base) out << "# off_baseline_thr_med=" << fmt("%.3f", base->thr_med) << "\n";
  bool first = true;
  const auto block = [&](const std::string& label, Mode m, const std::string& cls) {
    if (!first) out << "\n\n";
    first = false;
    out << "# " << label << "\n# distance thr_med thr_min thr_max llc_med llc_min llc_max\n";
    for (std::uint32_t d : spec.distance_grid) {
      const Agg* a = find_agg(aggs, m, spec.flow_grid.front(), d, cls);
      if (a) row(static_cast<double>(d), *a);
    }
  };
  if (spec.experiment == "distance") {
    for (Mode m : spec.mode_grid) block(std::string("mode=") + to_string(m), m, "");
  } else {
    for (PrefetchClass c : spec.class_grid)
      block(std::string("class=") + to_string(c), Mode::Offload, to_string(c));
  }
  return out.str();
}

std::string ExperimentResult::summary() const {
  std::ostringstream out;
  out << "experiment=" << spec.experiment << "\n";
  out << "profile=" << spec.profile << "\n";
  out << "rows=" << rows.size() << "\n";
  out << "seeds=" << spec.seeds.size() << "\n";
  out << "buckets=" << buckets << "\n";
  out << "dstar=" << dstar << "\n";
  for (const Claim& c : claims) {
    out << "claim." << c.name << "="
        << (!c.evaluated ? "skip" : c.pass ? "pass" : "fail") << "\n";
    if (!c.detail.empty()) out << "detail." << c.name << "=" << c.detail << "\n";
  }
  out << "overall=" << (all_claims_pass() ? "pass" : "fail") << "\n";
  return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw std::runtime_error("cannot write '" + path + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out.good()) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace jitf
