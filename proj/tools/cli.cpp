// Copyright 2026 The splitsim Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "splitsim/calibration.hpp"
#include "splitsim/config.hpp"
#include "splitsim/engine.hpp"
#include "splitsim/error.hpp"
#include "splitsim/metrics.hpp"
#include "splitsim/perfmodel.hpp"
#include "splitsim/provisioner.hpp"
#include "splitsim/trace.hpp"

namespace splitsim::cli {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kKnownKeys[] = {
    "workload.preset", "workload.rate", "workload.duration_s", "workload.seed",
    "workload.trace",

    "prompt_dist.kind", "prompt_dist.median", "prompt_dist.mu", "prompt_dist.sigma",
    "prompt_dist.weight2", "prompt_dist.mu2", "prompt_dist.sigma2", "prompt_dist.min",
    "prompt_dist.max", "prompt_dist.cdf",
    "output_dist.kind", "output_dist.median", "output_dist.mu", "output_dist.sigma",
    "output_dist.weight2", "output_dist.mu2", "output_dist.sigma2", "output_dist.min",
    "output_dist.max", "output_dist.cdf",

    "cluster.design", "cluster.prompt_machines", "cluster.token_machines", "cluster.llm",
    "cluster.prompt_type", "cluster.token_type",

    "mls.prompt_token_cap", "mls.max_preemptions", "mls.aging_rate", "mls.mixing_rule",

    "cls.queue_threshold_tokens", "cls.repurpose_window_s", "cls.repurpose_fraction",
    "cls.status_staleness_s",

    "transfer.bandwidth_gbps", "transfer.threshold_tokens", "transfer.layerwise_constant_ms",

    "perf.profile", "perf.knots", "perf.h100cap_prompt_factor",

    "metrics.tbt_mode", "metrics.trim_s",

    "slo.ttft_p50", "slo.ttft_p90", "slo.ttft_p99", "slo.tbt_p50", "slo.tbt_p90",
    "slo.tbt_p99", "slo.e2e_p50", "slo.e2e_p90", "slo.e2e_p99",

    "sim.horizon_slack_s", "sim.event_log",

    "output.dir",

    "provision.objective", "provision.constraint", "provision.budget", "provision.grid",
    "provision.workers", "provision.duration_s", "provision.seeds", "provision.min_prompt",
    "provision.max_prompt", "provision.min_token", "provision.max_token",
    "provision.start_rps", "provision.resolution",
};

constexpr std::string_view kPathKeys[] = {"workload.trace", "perf.profile"};

// Flags are aliases for config keys. Storage lives in a map so that option
// pointers handed to CLI11 stay valid.
class Settings {
 public:
  explicit Settings(CLI::App* app) : app_(app) {
    app->add_option("-c,--config", config_path_, "Flat key = value config file");
    app->add_option("--set", sets_, "Override one config key (key=value)");
  }

  CLI::Option* bind(const std::string& flag, const std::string& key, const std::string& help) {
    CLI::Option* opt = app_->add_option(flag, values_[key], help);
    bound_.emplace_back(opt, key);
    return opt;
  }

  FlatConfig resolve() const {
    FlatConfig cfg = config_path_.empty() ? FlatConfig{} : FlatConfig::load(config_path_);
    for (const std::string& s : sets_) {
      auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0)
        throw ConfigError(fmt::format("--set expects key=value, got '{}'", s));
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    for (const auto& [opt, key] : bound_)
      if (opt->count() > 0) cfg.set(key, values_.at(key));
    cfg.reject_unknown(kKnownKeys);
    for (std::string_view key : kPathKeys)
      if (auto path = cfg.get(key); path && !fs::exists(*path))
        throw ConfigError(fmt::format("{} '{}' does not exist", key, *path));
    return cfg;
  }

 private:
  CLI::App* app_;
  std::string config_path_;
  std::vector<std::string> sets_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<CLI::Option*, std::string>> bound_;
};

std::uint64_t default_seed() {
  const char* env = std::getenv("SPLITSIM_SEED");
  if (!env || !*env) return 1;
  char* end = nullptr;
  unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ConfigError(fmt::format("SPLITSIM_SEED must be an integer, got '{}'", env));
  return v;
}

std::uint64_t seed_from(const FlatConfig& cfg) {
  if (auto s = cfg.get_int("workload.seed")) {
    if (*s < 0) throw ConfigError("workload.seed must be non-negative");
    return static_cast<std::uint64_t>(*s);
  }
  return default_seed();
}

std::vector<CdfPoint> parse_cdf(std::string_view text) {
  // "p:tokens p:tokens ..." with commas or spaces between points.
  std::vector<CdfPoint> cdf;
  std::string buf(text);
  std::replace(buf.begin(), buf.end(), ',', ' ');
  std::istringstream in(buf);
  std::string item;
  while (in >> item) {
    auto colon = item.find(':');
    if (colon == std::string::npos) throw ConfigError(fmt::format("bad cdf point '{}'", item));
    cdf.push_back({std::stod(item.substr(0, colon)), std::stod(item.substr(colon + 1))});
  }
  return cdf;
}

SizeDistribution dist_from(const FlatConfig& cfg, std::string_view section, SizeDistribution d) {
  auto key = [&](std::string_view name) { return fmt::format("{}.{}", section, name); };
  if (auto v = cfg.get(key("kind"))) d.kind = parse_distribution_kind(*v);
  if (auto v = cfg.get_double(key("median"))) {
    if (!(*v > 0.0)) throw ConfigError(fmt::format("{} must be positive", key("median")));
    d.mu = std::log(*v);
  }
  if (auto v = cfg.get_double(key("mu"))) d.mu = *v;
  if (auto v = cfg.get_double(key("sigma"))) d.sigma = *v;
  if (auto v = cfg.get_double(key("weight2"))) d.weight2 = *v;
  if (auto v = cfg.get_double(key("mu2"))) d.mu2 = *v;
  if (auto v = cfg.get_double(key("sigma2"))) d.sigma2 = *v;
  if (auto v = cfg.get_int(key("min"))) d.min_tokens = *v;
  if (auto v = cfg.get_int(key("max"))) d.max_tokens = *v;
  if (auto v = cfg.get(key("cdf"))) d.cdf = parse_cdf(*v);
  d.validate();
  return d;
}

WorkloadPreset workload_from(const FlatConfig& cfg) {
  WorkloadPreset w = workload_preset(cfg.get("workload.preset").value_or("coding"));
  w.prompt = dist_from(cfg, "prompt_dist", w.prompt);
  w.output = dist_from(cfg, "output_dist", w.output);
  return w;
}

double duration_from(const FlatConfig& cfg, std::string_view key, double fallback) {
  double d = cfg.get_double(key).value_or(fallback);
  if (!(d >= 0.0) || !std::isfinite(d)) throw ConfigError(fmt::format("{} must be >= 0", key));
  return d;
}

SchedulerConfig scheduler_from(const FlatConfig& cfg) {
  SchedulerConfig s;
  if (auto v = cfg.get_int("mls.prompt_token_cap")) s.prompt_token_cap = *v;
  if (auto v = cfg.get_int("mls.max_preemptions")) s.max_preemptions = static_cast<int>(*v);
  if (auto v = cfg.get_double("mls.aging_rate")) s.aging_rate = *v;
  if (auto v = cfg.get("mls.mixing_rule")) s.mixing_rule = parse_mixing_rule(*v);
  if (auto v = cfg.get_int("cls.queue_threshold_tokens")) s.queue_threshold_tokens = *v;
  s.validate();
  return s;
}

std::string llm_from(const FlatConfig& cfg) {
  return cfg.get("cluster.llm").value_or("llama2-70b");
}

double h100cap_factor_from(const FlatConfig& cfg) {
  return cfg.get_double("perf.h100cap_prompt_factor").value_or(kDefaultH100CapPromptFactor);
}

ClusterConfig cluster_from(const FlatConfig& cfg) {
  Design design = parse_design(cfg.get("cluster.design").value_or("splitwise-hh"));
  int prompt = static_cast<int>(cfg.get_int("cluster.prompt_machines").value_or(1));
  int token = static_cast<int>(
      cfg.get_int("cluster.token_machines").value_or(is_baseline(design) ? 0 : 1));
  // A design fixes its machine types; explicit types must agree with it.
  if (auto t = cfg.get("cluster.prompt_type"); t && parse_machine_type(*t) != prompt_machine_type(design))
    throw ConfigError(fmt::format("cluster.prompt_type {} does not match design {}", *t,
                                  to_string(design)));
  if (auto t = cfg.get("cluster.token_type"); t && parse_machine_type(*t) != token_machine_type(design))
    throw ConfigError(fmt::format("cluster.token_type {} does not match design {}", *t,
                                  to_string(design)));
  ClusterConfig c = make_cluster_config(design, prompt, token, llm_from(cfg));
  c.scheduler = scheduler_from(cfg);
  if (auto v = cfg.get_double("cls.repurpose_window_s")) c.repurpose_window_s = *v;
  if (auto v = cfg.get_double("cls.repurpose_fraction")) c.repurpose_fraction = *v;
  if (auto v = cfg.get_double("cls.status_staleness_s")) c.status_staleness_s = *v;
  if (cfg.has("transfer.bandwidth_gbps") || cfg.has("transfer.threshold_tokens") ||
      cfg.has("transfer.layerwise_constant_ms")) {
    TransferConfig t = default_link(prompt_machine_type(design), token_machine_type(design),
                                    llm_spec(c.llm).num_layers);
    if (auto v = cfg.get_double("transfer.bandwidth_gbps")) t.bandwidth_bps = *v * 1e9;
    if (auto v = cfg.get_int("transfer.threshold_tokens")) t.mode_threshold_tokens = *v;
    if (auto v = cfg.get_double("transfer.layerwise_constant_ms")) t.layerwise_constant_ms = *v;
    t.validate();
    c.transfer = t;
  }
  c.validate();
  return c;
}

SloTable slo_from(const FlatConfig& cfg) {
  SloTable slo;
  constexpr std::string_view metrics[] = {"ttft", "tbt", "e2e"};
  constexpr std::string_view pcts[] = {"p50", "p90", "p99"};
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t p = 0; p < 3; ++p)
      if (auto v = cfg.get_double(fmt::format("slo.{}_{}", metrics[m], pcts[p])))
        slo.multipliers[m][p] = *v;
  slo.validate();
  return slo;
}

MetricsOptions metrics_from(const FlatConfig& cfg) {
  MetricsOptions m;
  if (auto v = cfg.get("metrics.tbt_mode")) m.tbt_mode = parse_tbt_mode(*v);
  m.trim_s = duration_from(cfg, "metrics.trim_s", 0.0);
  return m;
}

// Models for the run's LLM: a fitted profile when one is configured,
// otherwise the built-in calibration.
std::map<MachineType, PerfModel> models_from(const FlatConfig& cfg, const std::string& llm) {
  std::map<MachineType, PerfModel> models;
  if (auto path = cfg.get("perf.profile")) {
    FitOptions opts;
    if (auto k = cfg.get_int("perf.knots")) opts.knot_budget = static_cast<std::size_t>(*k);
    for (auto& [key, model] : fit_models(read_profile_file(*path), opts))
      if (key.second == llm) models.emplace(key.first, std::move(model));
    return models;
  }
  models = calibrated_models(llm);
  models[MachineType::H100cap] =
      calibrated_model(llm, MachineType::H100cap, h100cap_factor_from(cfg));
  return models;
}

PerfModel reference_from(const std::map<MachineType, PerfModel>& models, const std::string& llm) {
  auto it = models.find(MachineType::A100);
  return it != models.end() ? it->second : calibrated_model(llm, MachineType::A100);
}

fs::path output_dir_from(const FlatConfig& cfg) {
  fs::path dir = cfg.get("output.dir").value_or(".");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError(fmt::format("cannot create output directory '{}': {}", dir.string(),
                                        ec.message()));
  return dir;
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  return out;
}

void print_slo(std::ostream& out, const SloResult& slo) {
  out << fmt::format("{:<6} {:>4} {:>10} {:>10}  result\n", "metric", "pct", "observed", "limit");
  std::vector<std::string> failing;
  for (const SloVerdict& v : slo.verdicts) {
    auto pct = fmt::format("p{}", static_cast<int>(std::lround(v.percentile * 100)));
    out << fmt::format("{:<6} {:>4} {:>10.3f} {:>10.2f}  {}\n", to_string(v.metric), pct,
                       v.observed, v.multiplier, v.pass ? "pass" : "FAIL");
    if (!v.pass) failing.push_back(fmt::format("{} {}", to_string(v.metric), pct));
  }
  if (slo.pass)
    out << "SLO: pass\n";
  else
    out << fmt::format("SLO: FAIL ({} of {} rows: {})\n", failing.size(), slo.verdicts.size(),
                       fmt::join(failing, ", "));
}

void print_latency(std::ostream& out, std::string_view name, const LatencySummary& s) {
  out << fmt::format("{:<8} n={:<8} p50={:.2f} p90={:.2f} p99={:.2f} mean={:.2f}\n", name,
                     s.count, s.p50, s.p90, s.p99, s.mean);
}

// ---------------------------------------------------------------- gen-trace

struct GenTraceCommand {
  CLI::App* app;
  Settings settings;
  std::string output;

  explicit GenTraceCommand(CLI::App& root)
      : app(root.add_subcommand("gen-trace", "Synthesize a Poisson request trace")),
        settings(app) {
    settings.bind("--preset", "workload.preset", "Workload preset: coding or conversation");
    settings.bind("--rate", "workload.rate", "Mean arrival rate (requests/s)");
    settings.bind("--duration", "workload.duration_s", "Trace length (s)");
    settings.bind("--seed", "workload.seed", "RNG seed (default: SPLITSIM_SEED or 1)");
    app->add_option("-o,--output", output, "Trace CSV path (default: stdout)");
  }

  int execute(std::ostream& out, std::ostream& err) const {
    FlatConfig cfg = settings.resolve();
    WorkloadPreset w = workload_from(cfg);
    double rate = cfg.get_double("workload.rate").value_or(1.0);
    double duration = duration_from(cfg, "workload.duration_s", 120.0);
    SynthesisResult r = synthesize_trace(w.prompt, w.output, rate, duration, seed_from(cfg));

    std::ostream* stats_out = &out;
    if (output.empty()) {
      write_trace(out, r.trace);
      stats_out = &err;
    } else {
      std::ofstream file = open_output(output);
      write_trace(file, r.trace);
      if (!file) throw ConfigError(fmt::format("cannot write '{}'", output));
    }
    if (r.trace.empty()) {
      err << "warning: the trace has no requests (rate or duration is 0)\n";
      *stats_out << "requests=0\n";
      return kExitPass;
    }
    TraceStats s = trace_stats(r.trace);
    *stats_out << fmt::format(
        "requests={} mean_rate={:.3f} prompt_median={} prompt_p90={} output_median={} "
        "output_p90={} clamped_prompt={} clamped_output={}\n",
        s.count, s.mean_rate, s.median_prompt, s.p90_prompt, s.median_output, s.p90_output,
        r.clamped_prompt, r.clamped_output);
    return kExitPass;
  }
};

// ----------------------------------------------------------------- simulate

Trace trace_from(const FlatConfig& cfg) {
  if (auto path = cfg.get("workload.trace")) return read_trace_file(*path);
  if (!cfg.has("workload.rate"))
    throw ConfigError("simulate needs a trace (--trace) or a rate (--rate) to synthesize one");
  WorkloadPreset w = workload_from(cfg);
  return generate_trace(w.prompt, w.output, *cfg.get_double("workload.rate"),
                        duration_from(cfg, "workload.duration_s", 120.0), seed_from(cfg));
}

struct SimulateCommand {
  CLI::App* app;
  Settings settings;
  bool event_log = false;

  explicit SimulateCommand(CLI::App& root)
      : app(root.add_subcommand("simulate", "Run one cluster against a trace")), settings(app) {
    settings.bind("--design", "cluster.design", "Cluster design, e.g. splitwise-hh");
    settings.bind("--prompt-machines", "cluster.prompt_machines",
                  "Prompt machines (machine count for baseline designs)");
    settings.bind("--token-machines", "cluster.token_machines", "Token machines");
    settings.bind("--llm", "cluster.llm", "llama2-70b or bloom-176b");
    settings.bind("--trace", "workload.trace", "Trace CSV to replay");
    settings.bind("--preset", "workload.preset", "Workload preset when synthesizing");
    settings.bind("--rate", "workload.rate", "Arrival rate when synthesizing");
    settings.bind("--duration", "workload.duration_s", "Trace length when synthesizing (s)");
    settings.bind("--seed", "workload.seed", "Seed when synthesizing");
    settings.bind("--profile", "perf.profile", "Profile CSV to fit models from");
    settings.bind("--tbt-mode", "metrics.tbt_mode", "pooled or per_request_mean");
    settings.bind("--trim", "metrics.trim_s", "Warm-up/cool-down seconds to exclude");
    settings.bind("--out-dir", "output.dir", "Directory for CSV outputs");
    app->add_flag("--event-log", event_log, "Also write events.csv");
  }

  int execute(std::ostream& out, std::ostream& /*err*/) const {
    FlatConfig cfg = settings.resolve();
    ClusterConfig cluster = cluster_from(cfg);
    Trace trace = trace_from(cfg);
    auto models = models_from(cfg, cluster.llm);
    for (MachineType t : {prompt_machine_type(cluster.design), token_machine_type(cluster.design)})
      if (!models.count(t))
        throw ConfigError(fmt::format("no performance model for machine type {} and {}",
                                      to_string(t), cluster.llm));
    EngineOptions engine;
    engine.horizon_slack_s = cfg.get_double("sim.horizon_slack_s").value_or(600.0);
    engine.record_event_log = event_log || cfg.get_bool("sim.event_log").value_or(false);
    fs::path dir = output_dir_from(cfg);

    RunOutput run_out = run(cluster, models, trace, reference_from(models, cluster.llm),
                            slo_from(cfg), metrics_from(cfg), engine);
    const MetricsReport& rep = run_out.report;

    std::string header = fmt::format(
        "design={} prompt_machines={} token_machines={} llm={} requests={}",
        to_string(cluster.design), cluster.prompt_machines, cluster.token_machines, cluster.llm,
        trace.size());
    {
      std::ofstream f = open_output(dir / "requests.csv");
      write_requests_csv(f, run_out.sim.records);
    }
    {
      std::ofstream f = open_output(dir / "tbt.csv");
      write_tbt_csv(f, run_out.sim.records);
    }
    {
      std::ofstream f = open_output(dir / "summary.csv");
      write_summary_csv(f, rep.slo, header);
    }
    if (engine.record_event_log) {
      std::ofstream f = open_output(dir / "events.csv");
      write_event_log(f, run_out.sim);
    }

    out << header << '\n';
    out << fmt::format("completed={} measured={} makespan_s={:.3f} throughput_rps={:.3f}\n",
                       rep.completed, rep.measured, rep.makespan_s, rep.throughput_rps);
    print_latency(out, "ttft_ms", rep.ttft_ms);
    print_latency(out, "tbt_ms", rep.tbt_ms);
    print_latency(out, "e2e_ms", rep.e2e_ms);
    print_slo(out, rep.slo);
    return rep.slo.pass ? kExitPass : kExitFail;
  }
};

// ---------------------------------------------------------------- provision

// "40xH100" means forty machines' worth of that type's rating; a bare number
// is taken as normalized units.
double parse_budget(std::string_view text, Constraint constraint) {
  std::string s(text);
  auto x = s.find_first_of("xX");
  char* end = nullptr;
  double count = std::strtod(s.c_str(), &end);
  if (x == std::string::npos) {
    if (s.empty() || end != s.c_str() + s.size())
      throw ConfigError(fmt::format("bad budget '{}'", text));
    return count;
  }
  if (constraint == Constraint::throughput_target)
    throw ConfigError("a throughput target is in requests per second, not machines");
  if (end != s.c_str() + x) throw ConfigError(fmt::format("bad budget '{}'", text));
  MachineSpec spec = machine_spec(parse_machine_type(std::string_view(s).substr(x + 1)));
  return count * (constraint == Constraint::power_budget ? spec.power_rating : spec.cost_rate);
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> seeds;
  std::string buf(text);
  std::replace(buf.begin(), buf.end(), ',', ' ');
  std::istringstream in(buf);
  long long v = 0;
  while (in >> v) {
    if (v < 0) throw ConfigError("seeds must be non-negative");
    seeds.push_back(static_cast<std::uint64_t>(v));
  }
  if (!in.eof() || seeds.empty()) throw ConfigError(fmt::format("bad seed list '{}'", text));
  return seeds;
}

struct ProvisionCommand {
  CLI::App* app;
  Settings settings;
  std::string power_budget, cost_budget, throughput;
  bool count_only = false;

  explicit ProvisionCommand(CLI::App& root)
      : app(root.add_subcommand("provision", "Search machine counts for a design")),
        settings(app) {
    settings.bind("--design", "cluster.design", "Cluster design");
    settings.bind("--llm", "cluster.llm", "llama2-70b or bloom-176b");
    settings.bind("--objective", "provision.objective",
                  "max_throughput, min_cost or min_power")
        ->multi_option_policy(CLI::MultiOptionPolicy::Throw);
    auto* p = app->add_option("--power-budget", power_budget,
                              "Power budget (units or e.g. 40xH100)");
    auto* c = app->add_option("--cost-budget", cost_budget, "Cost budget (units or e.g. 40xH100)");
    auto* t = app->add_option("--throughput", throughput, "Throughput target (requests/s)");
    p->excludes(c)->excludes(t);
    c->excludes(t);
    settings.bind("--grid", "provision.grid", "exhaustive, coarse_to_fine or frontier");
    settings.bind("--workers", "provision.workers", "Parallel simulations");
    settings.bind("--preset", "workload.preset", "Workload preset");
    settings.bind("--duration", "provision.duration_s", "Trace length per evaluation (s)");
    settings.bind("--seeds", "provision.seeds", "Comma-separated seeds per evaluation");
    settings.bind("--max-prompt", "provision.max_prompt", "Largest prompt count searched");
    settings.bind("--max-token", "provision.max_token", "Largest token count searched");
    settings.bind("--out-dir", "output.dir", "Directory for CSV outputs");
    app->add_flag("--count-only", count_only,
                  "Baseline designs: report the machine count within the budget and stop");
  }

  SearchSpec spec_from(const FlatConfig& cfg) const {
    SearchSpec spec;
    spec.design = parse_design(cfg.get("cluster.design").value_or("splitwise-hh"));
    auto constraint = cfg.get("provision.constraint");
    auto budget = cfg.get("provision.budget");
    if (!constraint || !budget)
      throw ConfigError("provision needs one of --power-budget, --cost-budget or --throughput");
    spec.constraint = parse_constraint(*constraint);
    spec.budget = parse_budget(*budget, spec.constraint);
    if (auto o = cfg.get("provision.objective"))
      spec.objective = parse_objective(*o);
    else
      spec.objective = spec.constraint == Constraint::throughput_target ? Objective::min_cost
                                                                         : Objective::max_throughput;
    if (auto g = cfg.get("provision.grid")) spec.grid = parse_grid_mode(*g);
    spec.workers = static_cast<int>(cfg.get_int("provision.workers").value_or(1));
    spec.min_prompt = static_cast<int>(cfg.get_int("provision.min_prompt").value_or(1));
    spec.max_prompt = static_cast<int>(cfg.get_int("provision.max_prompt").value_or(0));
    spec.min_token = static_cast<int>(cfg.get_int("provision.min_token").value_or(1));
    spec.max_token = static_cast<int>(cfg.get_int("provision.max_token").value_or(0));
    if (auto v = cfg.get_double("provision.start_rps")) spec.sweep.start_rps = *v;
    if (auto v = cfg.get_double("provision.resolution")) spec.sweep.resolution = *v;

    Evaluation& e = spec.eval;
    e.llm = llm_from(cfg);
    WorkloadPreset w = workload_from(cfg);
    e.prompt = w.prompt;
    e.output = w.output;
    e.duration_s = duration_from(cfg, "provision.duration_s", e.duration_s);
    if (auto s = cfg.get("provision.seeds")) {
      e.seeds = parse_seeds(*s);
    } else if (cfg.has("workload.seed") || std::getenv("SPLITSIM_SEED")) {
      std::uint64_t s = seed_from(cfg);
      e.seeds = {s, s + 1, s + 2};
    }
    e.slo = slo_from(cfg);
    e.metrics = metrics_from(cfg);
    e.scheduler = scheduler_from(cfg);
    if (auto v = cfg.get_double("cls.repurpose_window_s")) e.repurpose_window_s = *v;
    e.h100cap_prompt_factor = h100cap_factor_from(cfg);
    return spec;
  }

  int execute(std::ostream& out, std::ostream& err) const {
    FlatConfig cfg = settings.resolve();
    if (!power_budget.empty()) {
      cfg.set("provision.constraint", "power_budget");
      cfg.set("provision.budget", power_budget);
    } else if (!cost_budget.empty()) {
      cfg.set("provision.constraint", "cost_budget");
      cfg.set("provision.budget", cost_budget);
    } else if (!throughput.empty()) {
      cfg.set("provision.constraint", "throughput_target");
      cfg.set("provision.budget", throughput);
    }
    SearchSpec spec = spec_from(cfg);

    if (count_only) {
      if (!is_baseline(spec.design))
        throw ConfigError("--count-only applies to baseline designs");
      int n = baseline_count_within(spec.design, spec.constraint, spec.budget);
      CostPower cp = cluster_cost_power(spec.design, n, 0);
      out << fmt::format("design={} machines={} cost={:.2f} power={:.2f}\n",
                         to_string(spec.design), n, cp.cost, cp.power);
      return n > 0 ? kExitPass : kExitFail;
    }

    SearchResult result = search(spec);
    fs::path dir = output_dir_from(cfg);
    {
      std::ofstream f = open_output(dir / "results.csv");
      write_points_csv(f, result.evaluated);
    }
    {
      std::ofstream f = open_output(dir / "pareto.csv");
      write_points_csv(f, result.pareto);
    }
    if (!result.feasible) {
      err << "infeasible: " << result.infeasible_reason << '\n';
      return kExitFail;
    }
    const DesignPoint& o = *result.optimum;
    std::string rps = o.max_rps ? fmt::format("{:.3f}", *o.max_rps) : std::string("-");
    out << fmt::format(
        "optimum design={} prompt={} token={} machines={} cost={:.2f} power={:.2f} max_rps={} "
        "evaluated={}\n",
        to_string(o.design), o.prompt_count, o.token_count, o.machines(), o.cost, o.power, rps,
        result.evaluated.size());
    return kExitPass;
  }
};

// ---------------------------------------------------------------- fit-model

struct FitModelCommand {
  CLI::App* app;
  Settings settings;
  std::string output;
  std::string export_preset;

  explicit FitModelCommand(CLI::App& root)
      : app(root.add_subcommand("fit-model", "Fit piecewise-linear models to a profile")),
        settings(app) {
    settings.bind("--profile", "perf.profile", "Profile CSV");
    settings.bind("--knots", "perf.knots", "Knot budget per curve");
    settings.bind("--seed", "workload.seed", "Seed for the 80:20 holdout split");
    app->add_option("-o,--output", output,
                    "Model file (one model) or directory (one file per model)");
    app->add_option("--export-preset", export_preset,
                    "Write the built-in calibration of this LLM as a profile CSV and stop");
  }

  int execute(std::ostream& out, std::ostream& /*err*/) const {
    FlatConfig cfg = settings.resolve();
    if (!export_preset.empty()) {
      if (output.empty()) throw ConfigError("--export-preset needs --output");
      std::ofstream f = open_output(output);
      write_profile(f, calibration_profile(export_preset));
      return kExitPass;
    }
    auto path = cfg.get("perf.profile");
    if (!path) throw ConfigError("fit-model needs --profile");
    std::vector<ProfileSample> samples = read_profile_file(*path);
    FitOptions opts;
    if (auto k = cfg.get_int("perf.knots")) opts.knot_budget = static_cast<std::size_t>(*k);
    std::uint64_t seed = seed_from(cfg);

    std::map<ModelKey, std::vector<ProfileSample>> groups;
    for (const ProfileSample& s : samples) groups[{s.machine_type, s.llm}].push_back(s);
    if (groups.empty()) throw FitError("profile has no samples");

    for (const auto& [key, group] : groups) {
      HoldoutReport h = evaluate_holdout(group, opts, seed);
      PerfModel m = fit_piecewise_linear(group, opts);
      out << fmt::format(
          "{} {}: prompt_knots={} token_knots={} train={} test={} train_mape={:.3f}% "
          "holdout_mape={:.3f}%\n",
          key.second, to_string(key.first), m.prompt_knots.size(), m.token_knots.size(),
          h.train_count, h.test_count, h.train_mape, h.test_mape);
      if (output.empty()) continue;
      fs::path target = output;
      if (groups.size() > 1 || fs::is_directory(target)) {
        fs::create_directories(target);
        target /= fmt::format("{}_{}.model", key.second, to_string(key.first));
      }
      std::ofstream f = open_output(target);
      write_model(f, m);
    }
    return kExitPass;
  }
};

// ------------------------------------------------------------------- report

struct ReportCommand {
  CLI::App* app;
  Settings settings;
  std::string requests_path, tbt_path, summary_path;

  explicit ReportCommand(CLI::App& root)
      : app(root.add_subcommand("report", "Re-summarize CSVs written by simulate")),
        settings(app) {
    settings.bind("--trace", "workload.trace", "Trace the run replayed")->required();
    app->add_option("--requests", requests_path, "requests.csv")->required()->check(
        CLI::ExistingFile);
    app->add_option("--tbt", tbt_path, "tbt.csv")->required()->check(CLI::ExistingFile);
    settings.bind("--llm", "cluster.llm", "LLM of the reference model");
    settings.bind("--tbt-mode", "metrics.tbt_mode", "pooled or per_request_mean");
    settings.bind("--trim", "metrics.trim_s", "Warm-up/cool-down seconds to exclude");
    app->add_option("-o,--output", summary_path, "Write summary CSV here");
  }

  int execute(std::ostream& out, std::ostream& /*err*/) const {
    FlatConfig cfg = settings.resolve();
    Trace trace = read_trace_file(*cfg.get("workload.trace"));
    std::ifstream req(requests_path), tbt(tbt_path);
    std::vector<RequestRecord> records = read_run_records(req, tbt, trace);
    std::string llm = llm_from(cfg);
    MetricsReport rep = build_report(records, {}, trace, calibrated_model(llm, MachineType::A100),
                                     slo_from(cfg), metrics_from(cfg));
    if (!summary_path.empty()) {
      std::ofstream f = open_output(summary_path);
      write_summary_csv(f, rep.slo, fmt::format("requests={} llm={}", trace.size(), llm));
    }
    out << fmt::format("requests={} completed={} measured={}\n", rep.requests, rep.completed,
                       rep.measured);
    print_latency(out, "ttft_ms", rep.ttft_ms);
    print_latency(out, "tbt_ms", rep.tbt_ms);
    print_latency(out, "e2e_ms", rep.e2e_ms);
    print_slo(out, rep.slo);
    return rep.slo.pass ? kExitPass : kExitFail;
  }
};

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Discrete-event simulator for phase-split LLM inference clusters", "splitsim"};
  app.require_subcommand(1);
  GenTraceCommand gen(app);
  SimulateCommand sim(app);
  ProvisionCommand prov(app);
  FitModelCommand fit(app);
  ReportCommand report(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitError;
  }

  try {
    if (gen.app->parsed()) return gen.execute(out, err);
    if (sim.app->parsed()) return sim.execute(out, err);
    if (prov.app->parsed()) return prov.execute(out, err);
    if (fit.app->parsed()) return fit.execute(out, err);
    if (report.app->parsed()) return report.execute(out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace splitsim::cli
