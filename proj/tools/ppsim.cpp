// ppsim — deterministic pipeline-parallel schedule simulator and checker.
//
// Subcommands:
//   simulate  build one schedule, run it, and write timeline + analysis files
//   verify    run the property checks configured in the manifest
//   compare   run several policies on one cluster and tabulate the results
//
// Every command takes --manifest/--out/--seed/--format; `verify` also takes
// --jobs. Artifacts are byte-stable: rerunning a command with the same inputs
// (at any --jobs setting) reproduces identical files. Exit codes: 0 success,
// 1 a verification check failed, 2 usage/manifest/IO error.
//
// Set PPSIM_LOG=info or PPSIM_LOG=debug for progress notes on stderr.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ppsim/analysis.hpp"
#include "ppsim/builder.hpp"
#include "ppsim/engine.hpp"
#include "ppsim/fuzz.hpp"
#include "ppsim/gantt.hpp"
#include "ppsim/serialize.hpp"
#include "ppsim/types.hpp"
#include "ppsim/validate.hpp"

namespace {

using ppsim::ordered_json;

int g_log_level = 0;  // 0 silent, 1 info, 2 debug

void init_log_level() {
  const char* env = std::getenv("PPSIM_LOG");
  if (!env) return;
  const std::string v(env);
  if (v == "debug" || v == "2") g_log_level = 2;
  else if (v == "info" || v == "1") g_log_level = 1;
}

void log_info(const std::string& msg) {
  if (g_log_level >= 1) std::cerr << "[ppsim] " << msg << "\n";
}

void log_debug(const std::string& msg) {
  if (g_log_level >= 2) std::cerr << "[ppsim:debug] " << msg << "\n";
}

struct ManifestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ppsim::Rat rat_from_json(const ordered_json& v, const char* what) {
  if (v.is_number_integer()) return ppsim::Rat(v.get<std::int64_t>());
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    const auto slash = s.find('/');
    try {
      if (slash == std::string::npos) return ppsim::Rat(std::stoll(s));
      return ppsim::Rat(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
    } catch (const std::exception&) {
      throw ManifestError(std::string(what) + ": cannot parse rational '" + s + "'");
    }
  }
  throw ManifestError(std::string(what) + ": expected integer or \"num/den\" string");
}

std::vector<ppsim::Rat> rat_list(const ordered_json& v, int depth, const char* what) {
  std::vector<ppsim::Rat> out;
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(rat_from_json(e, what));
    if (static_cast<int>(out.size()) != depth)
      throw ManifestError(std::string(what) + ": expected " + std::to_string(depth) +
                          " entries, got " + std::to_string(out.size()));
  } else {
    out.assign(static_cast<std::size_t>(depth), rat_from_json(v, what));
  }
  return out;
}

ppsim::ClusterSpec cluster_from_json(const ordered_json& m) {
  if (!m.contains("cluster")) throw ManifestError("manifest: missing \"cluster\" object");
  const auto& c = m["cluster"];
  ppsim::ClusterSpec cl;
  if (!c.contains("depth") || !c.contains("devices"))
    throw ManifestError("cluster: \"depth\" and \"devices\" are required");
  cl.depth = c["depth"].get<int>();
  cl.devices = c["devices"].get<int>();
  cl.fwd_cost = rat_list(c.value("forward_cost", ordered_json(1)), cl.depth, "forward_cost");
  cl.bwd_cost = rat_list(c.value("backward_cost", ordered_json(1)), cl.depth, "backward_cost");
  if (c.contains("update_cost")) cl.update_cost = rat_from_json(c["update_cost"], "update_cost");
  if (c.contains("comm_cost")) cl.comm_cost = rat_from_json(c["comm_cost"], "comm_cost");
  if (c.contains("nodes")) {
    for (const auto& grp : c["nodes"]) cl.nodes.push_back(grp.get<std::vector<int>>());
  }
  if (c.contains("inter_node_cost"))
    cl.inter_node_cost = rat_from_json(c["inter_node_cost"], "inter_node_cost");
  return cl;
}

int policy_default_pipelines(ppsim::Policy pol, int depth) {
  if (pol == ppsim::Policy::AMDP) return depth >= 2 && depth % 2 == 0 ? depth / 2 : 1;
  if (pol == ppsim::Policy::Chimera) return 2;
  return 1;
}

ppsim::PolicyConfig run_from_json(const ordered_json& m, int depth) {
  if (!m.contains("policy")) throw ManifestError("manifest: missing \"policy\"");
  auto pol = ppsim::policy_from_name(m["policy"].get<std::string>());
  if (!pol) throw ManifestError("manifest: unknown policy '" + m["policy"].get<std::string>() + "'");
  ppsim::PolicyConfig cfg;
  cfg.policy = *pol;
  const ordered_json run = m.value("run", ordered_json::object());
  cfg.injection_limit = run.value("injection_limit", 1);
  cfg.num_pipelines = run.value("num_pipelines", policy_default_pipelines(*pol, depth));
  cfg.accumulation_threshold = run.value("accumulation_threshold", 1);
  cfg.num_minibatches = run.value("num_minibatches", 1);
  cfg.zero_enabled = run.value("zero_enabled", false);
  cfg.injection_override = run.value("injection_override", false);
  return cfg;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ManifestError("cannot open for writing: " + p.string());
  f << content;
  if (!f) throw ManifestError("write failed: " + p.string());
}

ordered_json load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ManifestError("cannot read manifest: " + path);
  try {
    return ordered_json::parse(f);
  } catch (const std::exception& e) {
    throw ManifestError("manifest parse error: " + std::string(e.what()));
  }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

ordered_json summary_of(const ppsim::Timeline& tl, const ppsim::PolicyConfig& cfg,
                        const ppsim::ClusterSpec& cl, int warmup) {
  ordered_json s;
  s["policy"] = ppsim::policy_name(tl.policy);
  s["depth"] = tl.depth;
  s["devices"] = tl.devices;
  s["minibatches"] = cfg.num_minibatches;
  s["threshold"] = tl.threshold;
  s["makespan"] = ppsim::rat_json(tl.makespan);
  s["bubble_ratio"] = ppsim::rat_json(ppsim::bubble_ratio(tl, warmup));
  s["bubble_warmup_windows"] = warmup;
  auto mm = ppsim::mismatch_report(tl);
  s["mismatch"] = ppsim::mismatch_json(mm);
  s["windows"] = ppsim::window_json(ppsim::window_mismatch(tl, tl.depth));
  s["memory"] = ppsim::memory_json(ppsim::memory_report(tl, cfg, ppsim::MemoryModel{}));
  s["causality_issues"] = ppsim::validate_causality(tl, cl).size();
  s["overlap_issues"] = ppsim::validate_non_overlap(tl).size();
  return s;
}

int cmd_simulate(const std::string& manifest, const std::string& out, const std::string& format) {
  const auto m = load_manifest(manifest);
  const auto cl = cluster_from_json(m);
  const auto cfg = run_from_json(m, cl.depth);
  log_info("building " + std::string(ppsim::policy_name(cfg.policy)) + " schedule");
  const auto tl = ppsim::simulate(ppsim::build(cfg, cl), cl);
  log_debug("events: " + std::to_string(tl.flat().size()));

  std::filesystem::create_directories(out);
  const std::filesystem::path dir(out);
  if (format == "csv") {
    write_file(dir / "timeline.csv", ppsim::timeline_csv(tl));
  } else if (format == "json") {
    write_file(dir / "timeline.json", ppsim::timeline_json(tl).dump(2) + "\n");
  } else {
    write_file(dir / "timeline.svg", ppsim::gantt_svg(tl));
  }
  const int warmup = m.value("run", ordered_json::object()).value("warmup_windows", 0);
  const auto summary = summary_of(tl, cfg, cl, warmup);
  write_file(dir / "summary.json", summary.dump(2) + "\n");

  std::cout << "simulate " << ppsim::policy_name(cfg.policy) << ": depth=" << tl.depth
            << " devices=" << tl.devices << " makespan=" << tl.makespan.str()
            << " bubble=" << ppsim::bubble_ratio(tl, warmup).str() << " -> " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

struct CheckRow {
  std::string name;
  bool pass;
  std::string detail;
};

int cmd_verify(const std::string& manifest, const std::string& out, std::uint64_t seed,
               int jobs) {
  const auto m = load_manifest(manifest);
  const ordered_json v = m.value("verify", ordered_json::object());
  std::vector<CheckRow> rows;

  if (const int maxd = v.value("mismatch_max_depth", 0); maxd > 0) {
    log_info("steady-state mismatch sweep up to depth " + std::to_string(maxd));
    bool all = true;
    std::string detail = "all stages match min(n, d-i) - 1";
    for (int d = 2; d <= maxd && all; ++d)
      for (int n = 1; n <= d && all; ++n) {
        auto verdict = ppsim::verify_steady_mismatch(d, n);
        if (!verdict.pass) {
          all = false;
          detail = verdict.detail;
        }
      }
    rows.push_back({"steady_state_mismatch", all, detail});
  }

  if (v.contains("window_depths")) {
    bool all = true;
    std::string detail = "bounded one-step mismatch; first-d pattern in every later window";
    for (int d : v["window_depths"].get<std::vector<int>>()) {
      for (int factor : {1, 2, 4}) {
        const int thr = factor * d;
        ppsim::PolicyConfig cfg;
        cfg.policy = ppsim::Policy::AMDP;
        cfg.injection_limit = 2;
        cfg.num_pipelines = d / 2;
        cfg.accumulation_threshold = thr;
        cfg.num_minibatches = 8 * thr;
        cfg.zero_enabled = true;
        auto cl = ppsim::ClusterSpec::uniform(d, d, ppsim::Rat(1), ppsim::Rat(2));
        auto tl = ppsim::simulate(ppsim::build(cfg, cl), cl);
        if (int mx = ppsim::mismatch_report(tl).max_overall(); mx > 1) {
          all = false;
          detail = "depth " + std::to_string(d) + " threshold " + std::to_string(thr) +
                   ": mismatch " + std::to_string(mx) + " > 1";
          break;
        }
        auto wr = ppsim::window_mismatch(tl, d);
        for (const auto& w : wr.windows) {
          if (w.window == 0 || thr <= d) continue;
          std::vector<int> expect;
          for (int k = 0; k < d; ++k) expect.push_back(w.window * thr + k);
          if (w.mismatched != expect) {
            all = false;
            detail = "depth " + std::to_string(d) + " threshold " + std::to_string(thr) +
                     " window " + std::to_string(w.window) + ": unexpected mismatch set";
            break;
          }
        }
        if (!all) break;
      }
      if (!all) break;
    }
    rows.push_back({"accumulation_window_mismatch", all, detail});
  }

  if (v.contains("topology")) {
    const auto& t = v["topology"];
    const int trials = t.value("trials", 100);
    bool all = true;
    std::string detail = "mismatch bound invariant under remapping/latency perturbations";
    for (int d : t.value("depths", std::vector<int>{4, 8})) {
      auto verdict = ppsim::verify_topology_invariance(d, trials, seed);
      log_debug("topology depth " + std::to_string(d) + (verdict.pass ? " ok" : " FAIL"));
      if (!verdict.pass) {
        all = false;
        detail = verdict.detail;
        break;
      }
    }
    rows.push_back({"topology_invariance", all, detail});
  }

  if (const int trials = v.value("causality_trials", 0); trials > 0) {
    log_info("causality fuzz: " + std::to_string(trials) + " trials, jobs=" +
             std::to_string(jobs));
    auto rep = ppsim::fuzz_causality(trials, seed, jobs);
    rows.push_back({"causality_fuzz", rep.failures == 0,
                    rep.failures == 0
                        ? std::to_string(rep.trials) + " random simulations, no violations"
                        : rep.first_failure});
  }

  if (const int trials = v.value("inversion_trials", 0); trials > 0) {
    auto rep = ppsim::fuzz_inversion_detection(trials, seed);
    rows.push_back({"inversion_detection", rep.failures == 0,
                    rep.failures == 0
                        ? std::to_string(rep.trials) + " injected inversions, all detected"
                        : rep.first_failure});
  }

  if (rows.empty())
    throw ManifestError("manifest: \"verify\" selects no checks (nothing to do)");

  std::filesystem::create_directories(out);
  ordered_json j = ordered_json::array();
  bool all_pass = true;
  for (const auto& r : rows) {
    ordered_json e;
    e["check"] = r.name;
    e["pass"] = r.pass;
    e["detail"] = r.detail;
    j.push_back(std::move(e));
    all_pass = all_pass && r.pass;
    std::cout << (r.pass ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
  }
  write_file(std::filesystem::path(out) / "verify.json", j.dump(2) + "\n");
  return all_pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

int cmd_compare(const std::string& manifest, const std::string& out, const std::string& format) {
  const auto m = load_manifest(manifest);
  if (!m.contains("compare") || !m["compare"].is_array() || m["compare"].empty())
    throw ManifestError("manifest: \"compare\" must be a non-empty array of run blocks");
  const auto base_cl = cluster_from_json(m);

  std::filesystem::create_directories(out);
  const std::filesystem::path dir(out);
  std::string csv =
      "policy,makespan,bubble_ratio,max_mismatch,weight_max,activation_peak,optimizer_state\n";
  ordered_json rows = ordered_json::array();
  for (const auto& entry : m["compare"]) {
    ordered_json one;
    one["policy"] = entry.at("policy");
    one["run"] = entry;
    one["run"].erase("policy");
    auto cfg = run_from_json(ordered_json{{"policy", entry.at("policy")}, {"run", one["run"]}}, base_cl.depth);
    ppsim::ClusterSpec cl = base_cl;
    if (entry.contains("devices")) {
      cl.devices = entry["devices"].get<int>();
    }
    const int warmup = entry.value("warmup_windows", 0);
    log_info("compare: " + std::string(ppsim::policy_name(cfg.policy)));
    auto tl = ppsim::simulate(ppsim::build(cfg, cl), cl);
    auto mm = ppsim::mismatch_report(tl);
    auto mem = ppsim::memory_report(tl, cfg, ppsim::MemoryModel{});
    const auto bubble = ppsim::bubble_ratio(tl, warmup);
    ppsim::Rat opt0 = mem.per_device.empty() ? ppsim::Rat(0) : mem.per_device[0].optimizer_state;

    csv += std::string(ppsim::policy_name(cfg.policy)) + "," + tl.makespan.str() + "," +
           bubble.str() + "," + std::to_string(mm.max_overall()) + "," +
           mem.table1.weight_max.str() + "," + mem.table1.activation_peak.str() + "," +
           opt0.str() + "\n";

    ordered_json r;
    r["policy"] = ppsim::policy_name(cfg.policy);
    r["makespan"] = ppsim::rat_json(tl.makespan);
    r["bubble_ratio"] = ppsim::rat_json(bubble);
    r["max_mismatch"] = mm.max_overall();
    r["memory"] = ppsim::memory_json(mem);
    rows.push_back(std::move(r));

    if (format == "svg") {
      write_file(dir / ("timeline_" + std::string(ppsim::policy_name(cfg.policy)) + ".svg"),
                 ppsim::gantt_svg(tl));
    }
    std::cout << "compare " << ppsim::policy_name(cfg.policy) << ": makespan="
              << tl.makespan.str() << " bubble=" << bubble.str()
              << " max_mismatch=" << mm.max_overall() << "\n";
  }
  if (format == "json") {
    write_file(dir / "compare.json", rows.dump(2) + "\n");
  } else {
    write_file(dir / "compare.csv", csv);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  init_log_level();
  CLI::App app{"deterministic pipeline-parallel schedule simulator and checker"};
  app.require_subcommand(1);

  std::string manifest, out = "out", format = "json";
  std::uint64_t seed = 42;
  int jobs = 1;

  auto add_common = [&](CLI::App* sub, bool with_jobs) {
    sub->add_option("--manifest", manifest, "path to a JSON run manifest")->required();
    sub->add_option("--out", out, "directory artifacts are written into");
    sub->add_option("--seed", seed, "seed for randomized checks");
    sub->add_option("--format", format, "artifact format")
        ->check(CLI::IsMember({"csv", "json", "svg"}));
    if (with_jobs)
      sub->add_option("--jobs", jobs, "worker threads for fuzz trials")
          ->check(CLI::PositiveNumber);
  };

  auto* sim = app.add_subcommand("simulate", "simulate one schedule and write artifacts");
  add_common(sim, false);
  auto* ver = app.add_subcommand("verify", "run the manifest's property checks");
  add_common(ver, true);
  auto* cmp = app.add_subcommand("compare", "simulate several policies and tabulate");
  add_common(cmp, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(manifest, out, format);
    if (ver->parsed()) return cmd_verify(manifest, out, seed, jobs);
    return cmd_compare(manifest, out, format);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
