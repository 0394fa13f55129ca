#pragma once

// Text artifact emitters: CSV and JSON renderings of timelines, analysis
// reports, and optimizer traces. All output is deterministic — fixed column
// orders, fixed key orders, and fixed numeric formatting — so artifacts can be
// compared byte-for-byte across runs.

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "ppsim/optim.hpp"
#include "ppsim/types.hpp"

namespace ppsim {

using ordered_json = nlohmann::ordered_json;

// Exact rationals serialize as a plain integer when integral, else "num/den".
inline ordered_json rat_json(const Rat& r) {
  if (r.den() == 1) return ordered_json(r.num());
  return ordered_json(r.str());
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Timeline
// ---------------------------------------------------------------------------

// One row per task event, ordered by (device, start, kind, stage, minibatch).
// Columns: device,kind,stage,minibatch,pipeline,window,preloaded,start,duration
// with start/duration as exact rationals ("3/2") or integers.
inline std::string timeline_csv(const Timeline& t) {
  std::string out = "device,kind,stage,minibatch,pipeline,window,preloaded,start,duration\n";
  for (std::size_t dev = 0; dev < t.per_device.size(); ++dev) {
    for (const auto& e : t.per_device[dev]) {
      out += std::to_string(dev);
      out += ',';
      out += kind_name(e.kind);
      out += ',';
      out += std::to_string(e.stage);
      out += ',';
      out += std::to_string(e.minibatch);
      out += ',';
      out += std::to_string(e.pipeline);
      out += ',';
      out += std::to_string(e.window);
      out += ',';
      out += e.preloaded ? '1' : '0';
      out += ',';
      out += e.start.str();
      out += ',';
      out += e.duration.str();
      out += '\n';
    }
  }
  return out;
}

inline ordered_json timeline_json(const Timeline& t) {
  ordered_json j;
  j["policy"] = policy_name(t.policy);
  j["depth"] = t.depth;
  j["devices"] = t.devices;
  j["threshold"] = t.threshold;
  j["makespan"] = rat_json(t.makespan);
  ordered_json devs = ordered_json::array();
  for (const auto& dev : t.per_device) {
    ordered_json events = ordered_json::array();
    for (const auto& e : dev) {
      ordered_json ev;
      ev["kind"] = kind_name(e.kind);
      ev["stage"] = e.stage;
      ev["minibatch"] = e.minibatch;
      ev["pipeline"] = e.pipeline;
      ev["window"] = e.window;
      ev["preloaded"] = e.preloaded;
      ev["start"] = rat_json(e.start);
      ev["duration"] = rat_json(e.duration);
      events.push_back(std::move(ev));
    }
    devs.push_back(std::move(events));
  }
  j["per_device"] = std::move(devs);
  return j;
}

// ---------------------------------------------------------------------------
// Analysis reports
// ---------------------------------------------------------------------------

inline ordered_json mismatch_json(const MismatchReport& r) {
  ordered_json j;
  ordered_json entries = ordered_json::array();
  for (const auto& [key, count] : r.entries) {
    ordered_json e;
    e["stage"] = key.first;
    e["minibatch"] = key.second;
    e["updates_between"] = count;
    entries.push_back(std::move(e));
  }
  j["entries"] = std::move(entries);
  ordered_json per_stage = ordered_json::array();
  for (const auto& [stage, mx] : r.max_per_stage) {
    ordered_json e;
    e["stage"] = stage;
    e["max"] = mx;
    per_stage.push_back(std::move(e));
  }
  j["max_per_stage"] = std::move(per_stage);
  j["max_overall"] = r.max_overall();
  ordered_json missing = ordered_json::array();
  for (const auto& [stage, mb] : r.missing) {
    ordered_json e;
    e["stage"] = stage;
    e["minibatch"] = mb;
    missing.push_back(std::move(e));
  }
  j["missing_backward"] = std::move(missing);
  return j;
}

inline ordered_json window_json(const WindowReport& r) {
  ordered_json windows = ordered_json::array();
  for (const auto& w : r.windows) {
    ordered_json e;
    e["window"] = w.window;
    e["window_size"] = w.window_size;
    e["update_count"] = w.update_count;
    e["mismatched_minibatches"] = w.mismatched;
    windows.push_back(std::move(e));
  }
  ordered_json j;
  j["windows"] = std::move(windows);
  return j;
}

inline ordered_json memory_json(const MemoryReport& r) {
  ordered_json j;
  ordered_json devs = ordered_json::array();
  for (const auto& d : r.per_device) {
    ordered_json e;
    e["weight"] = rat_json(d.weight);
    e["activation_peak"] = rat_json(d.activation_peak);
    e["gradient"] = rat_json(d.gradient);
    e["optimizer_state"] = rat_json(d.optimizer_state);
    devs.push_back(std::move(e));
  }
  j["per_device"] = std::move(devs);
  ordered_json t1;
  t1["bubble"] = r.table1.bubble ? rat_json(*r.table1.bubble) : ordered_json(nullptr);
  t1["weight_min"] = rat_json(r.table1.weight_min);
  t1["weight_max"] = rat_json(r.table1.weight_max);
  t1["activation_peak"] = rat_json(r.table1.activation_peak);
  j["closed_form"] = std::move(t1);
  return j;
}

inline ordered_json verdict_json(const Verdict& v) {
  ordered_json j;
  j["pass"] = v.pass;
  j["detail"] = v.detail;
  return j;
}

// ---------------------------------------------------------------------------
// Optimizer traces and fits
// ---------------------------------------------------------------------------

// Columns: step,objective,grad_norm_sq,delta_norm. The delta column is empty
// for traces that were not produced by a paired (sync, delayed) run.
inline std::string trace_csv(const OptRunTrace& tr) {
  std::string out = "step,objective,grad_norm_sq,delta_norm\n";
  for (std::size_t t = 0; t < tr.objective.size(); ++t) {
    out += std::to_string(t);
    out += ',';
    out += format_double(tr.objective[t]);
    out += ',';
    out += format_double(tr.grad_sq[t]);
    out += ',';
    if (t < tr.delta_norm.size()) out += format_double(tr.delta_norm[t]);
    out += '\n';
  }
  return out;
}

inline ordered_json scaling_json(const ScalingFit& fit) {
  ordered_json j;
  j["slope"] = fit.slope;
  j["residual"] = fit.residual;
  j["exact_zero"] = fit.exact_zero;
  ordered_json pts = ordered_json::array();
  for (const auto& [eta, d] : fit.points) {
    ordered_json p;
    p["eta"] = eta;
    p["mean_max_delta"] = d;
    pts.push_back(std::move(p));
  }
  j["points"] = std::move(pts);
  ordered_json ex = ordered_json::array();
  for (const auto& [eta, seed] : fit.excluded) {
    ordered_json p;
    p["eta"] = eta;
    p["seed"] = seed;
    ex.push_back(std::move(p));
  }
  j["excluded"] = std::move(ex);
  return j;
}

inline ordered_json bound_json(const BoundCheck& b) {
  ordered_json j;
  j["lhs"] = b.lhs;
  j["rhs"] = b.rhs;
  j["constant_c"] = b.constant_c;
  j["pass"] = b.pass;
  return j;
}

inline ordered_json lipschitz_json(const LipschitzReport& r) {
  ordered_json j;
  j["pass"] = r.verdict.pass;
  j["l_phi"] = r.l_phi;
  j["l_psi"] = r.l_psi;
  j["detail"] = r.verdict.detail;
  return j;
}

}  // namespace ppsim
