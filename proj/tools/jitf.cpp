#include <cstdio>
#include <filesystem>
#include <string>
#include <unordered_set>

#include "CLI11.hpp"
#include "jitf/harness.hpp"
#include "jitf/hintgen.hpp"
#include "jitf/lb.hpp"
#include "jitf/profile.hpp"
#include "jitf/trace.hpp"

namespace {

// exit codes: 0 ok / checks pass, 1 usage, 2 runtime, 3 checks failed
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kRuntime = 2;
constexpr int kChecksFailed = 3;

struct KeyHasher {
  std::size_t operator()(const jitf::FlowKey& k) const { return jitf::hash_key(k); }
};

std::uint64_t count_unique_flows(const jitf::Trace& t) {
  std::unordered_set<jitf::FlowKey, KeyHasher> seen;
  for (std::uint64_t i = 0; i < t.size(); ++i) seen.insert(t.record(i).key);
  return seen.size();
}

struct GenTraceArgs {
  std::uint64_t flows = 0, ppf = 16, gap = 1, clone = 1, seed = 1;
  std::string out, csv;
};

int cmd_gen_trace(const GenTraceArgs& a) {
  jitf::TraceSpec spec{a.flows, a.ppf, a.gap, a.clone, a.seed};
  spec.validate();
  const auto layout = std::make_shared<jitf::TraceLayout>(spec);
  const jitf::GeneratedTrace t(layout, std::nullopt);
  jitf::write_trace(t, a.out);
  if (!a.csv.empty()) jitf::write_trace_csv(t, a.csv);
  const auto gap_seen = jitf::scan_min_flow_gap(t);
  std::printf("records=%llu\n", static_cast<unsigned long long>(t.size()));
  std::printf("min_flow_gap=%llu\n",
              static_cast<unsigned long long>(gap_seen ? *gap_seen : 0));
  return kOk;
}

struct AnnotateArgs {
  std::string in, out;
  std::uint32_t distance = 0;
};

int cmd_annotate(const AnnotateArgs& a) {
  const jitf::MaterializedTrace t =
      jitf::annotate(jitf::read_trace(a.in), a.distance);
  jitf::write_trace(t, a.out);
  std::printf("records=%llu\n", static_cast<unsigned long long>(t.size()));
  std::printf("distance=%u\n", a.distance);
  return kOk;
}

struct RunArgs {
  std::string trace, profile = "xeon6246r-1way", mode = "off", cls = "t0";
  std::string distance = "auto";
  std::uint64_t buckets = 0;
  std::uint32_t k_servers = 64;
  std::string csv;
};

int cmd_run(const RunArgs& a) {
  const jitf::Profile prof = jitf::load_profile(a.profile);
  const auto mode = jitf::parse_mode(a.mode);
  if (!mode) throw std::invalid_argument("unknown mode '" + a.mode + "'");
  const auto cls = jitf::parse_prefetch_class(a.cls);
  if (!cls) throw std::invalid_argument("unknown class '" + a.cls + "'");
  std::uint32_t distance;
  if (a.distance == "auto") {
    distance = jitf::model_optimal_distance(prof);
  } else {
    distance = static_cast<std::uint32_t>(jitf::parse_size(a.distance));
  }

  const jitf::MaterializedTrace t = jitf::read_trace(a.trace);
  const std::uint64_t unique = count_unique_flows(t);
  const std::uint64_t buckets =
      a.buckets ? a.buckets : jitf::suggested_buckets(unique);

  jitf::Hierarchy hier(prof.hier);
  jitf::LoadBalancerConfig lbc;
  lbc.k_servers = a.k_servers;
  lbc.n_buckets = buckets;
  lbc.base_cycles = prof.base_cycles;
  lbc.packet_read = prof.packet_read;
  jitf::LoadBalancer lb(lbc, hier);

  jitf::PrefetchPolicy pol;
  pol.mode = *mode;
  pol.distance = distance;
  pol.cls = *cls;
  pol.hash_cost_cycles = prof.hash_cost_cycles;
  pol.issue_cost_cycles = prof.issue_cost_cycles;

  const jitf::MetricsRecord m = lb.run_trace(t, pol);

  std::printf("profile=%s\n", a.profile.c_str());
  std::printf("flows=%llu\n", static_cast<unsigned long long>(unique));
  std::printf("buckets=%llu\n", static_cast<unsigned long long>(buckets));
  std::printf("mode=%s\n", jitf::to_string(*mode));
  std::printf("distance=%u\n", *mode == jitf::Mode::Off ? 0 : distance);
  std::printf("class=%s\n",
              *mode == jitf::Mode::Off ? "none" : jitf::to_string(*cls));
  std::printf("packets=%llu\n", static_cast<unsigned long long>(m.packets));
  std::printf("total_cycles=%llu\n",
              static_cast<unsigned long long>(m.total_cycles));
  std::printf("throughput_pps=%.3f\n", m.throughput_pps);
  std::printf("llc_mpp=%.6f\n", m.per_packet_llc_misses);
  std::printf("l2_mpp=%.6f\n", m.per_packet_l2_misses);
  std::printf("useful_ratio=%.6f\n", m.prefetch_useful_ratio);
  std::printf("hint_warnings=%llu\n",
              static_cast<unsigned long long>(m.hint_warnings));

  if (!a.csv.empty()) {
    char row[256];
    std::snprintf(row, sizeof row,
                  "%s,%llu,%s,%u,%s,%u,%.3f,%.6f,%.6f,%.6f,%llu\n",
                  a.profile.c_str(), static_cast<unsigned long long>(unique),
                  jitf::to_string(*mode),
                  *mode == jitf::Mode::Off ? 0 : distance,
                  *mode == jitf::Mode::Off ? "none" : jitf::to_string(*cls), 0,
                  m.throughput_pps, m.per_packet_llc_misses,
                  m.per_packet_l2_misses, m.prefetch_useful_ratio,
                  static_cast<unsigned long long>(m.total_cycles));
    jitf::write_text_file(
        a.csv,
        std::string("profile,flows,mode,distance,class,seed,throughput_pps,"
                    "llc_mpp,l2_mpp,useful_ratio,total_cycles\n") +
            row);
  }
  return kOk;
}

struct SweepArgs {
  std::string experiment, spec, out_dir = ".";
  unsigned jobs = 0;
  bool check = false;
};

int cmd_sweep(const SweepArgs& a) {
  jitf::ExperimentSpec spec = jitf::ExperimentSpec::load(a.spec);
  if (spec.experiment.empty()) spec.experiment = a.experiment;
  if (spec.experiment != a.experiment)
    throw std::invalid_argument("spec file declares experiment '" +
                                spec.experiment + "', command line says '" +
                                a.experiment + "'");

  const jitf::ExperimentResult res = jitf::run_experiment(spec, a.jobs);
  std::filesystem::create_directories(a.out_dir);
  const std::string stem = a.out_dir + "/" + spec.experiment;
  jitf::write_text_file(stem + ".csv", res.csv());
  jitf::write_text_file(stem + ".dat", res.dat());
  const std::string summary = res.summary();
  jitf::write_text_file(stem + "-summary.txt", summary);
  std::fputs(summary.c_str(), stdout);

  if (a.check && !res.all_claims_pass()) return kChecksFailed;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trace-driven flow-state prefetching simulator"};
  app.require_subcommand(1);

  GenTraceArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("gen-trace", "generate a packet trace");
  cmd_gen->add_option("--flows", gen.flows, "number of distinct flows")->required();
  cmd_gen->add_option("--ppf", gen.ppf, "packets per flow");
  cmd_gen->add_option("--gap", gen.gap, "minimum same-flow packet gap");
  cmd_gen->add_option("--clone", gen.clone, "clone factor");
  cmd_gen->add_option("--seed", gen.seed, "rng seed");
  cmd_gen->add_option("-o,--out", gen.out, "output trace file")->required();
  cmd_gen->add_option("--csv", gen.csv, "also dump records as CSV");

  AnnotateArgs ann;
  CLI::App* cmd_ann = app.add_subcommand("annotate", "embed prefetch hints");
  cmd_ann->add_option("-i,--in", ann.in, "input trace")->required();
  cmd_ann->add_option("-d,--distance", ann.distance, "hint lookahead distance")
      ->required();
  cmd_ann->add_option("-o,--out", ann.out, "output trace file")->required();

  RunArgs run;
  CLI::App* cmd_r = app.add_subcommand("run", "run one trace through the balancer");
  cmd_r->add_option("--trace", run.trace, "trace file")->required();
  cmd_r->add_option("--profile", run.profile, "machine profile name or path");
  cmd_r->add_option("--mode", run.mode, "off | nooffload | offload");
  cmd_r->add_option("--distance", run.distance, "prefetch distance or 'auto'");
  cmd_r->add_option("--class", run.cls, "prefetch class t0|t1|t2|nta");
  cmd_r->add_option("--buckets", run.buckets, "flow table buckets (0 = auto)");
  cmd_r->add_option("--k-servers", run.k_servers, "backend count");
  cmd_r->add_option("--csv", run.csv, "write metrics as a one-row CSV");

  SweepArgs sweep;
  CLI::App* cmd_s = app.add_subcommand("sweep", "run an experiment grid");
  cmd_s->add_option("experiment", sweep.experiment,
                    "flows | distance | class | improvement")
      ->required()
      ->check(CLI::IsMember({"flows", "distance", "class", "improvement"}));
  cmd_s->add_option("--spec", sweep.spec, "experiment spec file")->required();
  cmd_s->add_option("--out-dir", sweep.out_dir, "output directory");
  cmd_s->add_option("--jobs", sweep.jobs, "parallel cells (0 = all cores)");
  cmd_s->add_flag("--check", sweep.check, "exit 3 unless all claims pass");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (app.got_subcommand(cmd_gen)) return cmd_gen_trace(gen);
    if (app.got_subcommand(cmd_ann)) return cmd_annotate(ann);
    if (app.got_subcommand(cmd_r)) return cmd_run(run);
    if (app.got_subcommand(cmd_s)) return cmd_sweep(sweep);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntime;
  }
  return kUsage;
}
