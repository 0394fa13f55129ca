#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "ppsim/builder.hpp"
#include "ppsim/types.hpp"

namespace ppsim {

namespace detail {

inline std::string task_label(const Task& t) {
  return std::string(kind_name(t.kind)) + "(stage=" + std::to_string(t.stage) +
         ",mb=" + std::to_string(t.minibatch) + ",pipe=" + std::to_string(t.pipeline) +
         ")@dev" + std::to_string(t.device);
}

}  // namespace detail

// Deterministic discrete-event simulation. Devices are serial; each task
// becomes dispatchable when its dependency and lane predecessors have
// finished (cross-device edges add the transfer gap). At every step the
// globally earliest dispatch fires; ties break on
// (window, minibatch, pipeline, kind, stage, id).
inline Timeline simulate(const TaskGraph& g, const ClusterSpec& cl) {
  const std::size_t N = g.tasks.size();
  std::vector<std::vector<int>> succ(N), pred(N);
  std::vector<int> remaining(N, 0);
  auto add_edge = [&](int a, int b) {
    succ[static_cast<std::size_t>(a)].push_back(b);
    pred[static_cast<std::size_t>(b)].push_back(a);
    ++remaining[static_cast<std::size_t>(b)];
  };
  for (auto [a, b] : g.deps) add_edge(a, b);
  for (const auto& lane : g.lanes)
    for (std::size_t k = 1; k < lane.size(); ++k) add_edge(lane[k - 1], lane[k]);

  {  // Cycle pre-check with witness.
    std::vector<int> indeg = remaining;
    std::vector<int> queue;
    for (std::size_t t = 0; t < N; ++t)
      if (indeg[t] == 0) queue.push_back(static_cast<int>(t));
    std::size_t processed = 0;
    while (!queue.empty()) {
      int t = queue.back();
      queue.pop_back();
      ++processed;
      for (int s : succ[static_cast<std::size_t>(t)])
        if (--indeg[static_cast<std::size_t>(s)] == 0) queue.push_back(s);
    }
    if (processed < N) {
      // Walk predecessors inside the residual graph until a repeat shows up.
      std::size_t seed = 0;
      while (indeg[seed] == 0) ++seed;
      std::vector<int> path;
      std::vector<char> seen(N, 0);
      int cur = static_cast<int>(seed);
      while (!seen[static_cast<std::size_t>(cur)]) {
        seen[static_cast<std::size_t>(cur)] = 1;
        path.push_back(cur);
        for (int p : pred[static_cast<std::size_t>(cur)])
          if (indeg[static_cast<std::size_t>(p)] > 0) {
            cur = p;
            break;
          }
      }
      std::string msg = "dependency cycle: " + detail::task_label(g.tasks[static_cast<std::size_t>(cur)]);
      for (auto it = path.rbegin(); it != path.rend(); ++it) {
        msg += " <- " + detail::task_label(g.tasks[static_cast<std::size_t>(*it)]);
        if (*it == cur) break;
      }
      throw std::runtime_error(msg);
    }
  }

  std::vector<Rat> ready_time(N, Rat(0));
  std::vector<Rat> start(N), finish(N);
  std::vector<Rat> dev_free(static_cast<std::size_t>(g.devices), Rat(0));
  std::vector<int> ready;
  std::vector<int> order;
  order.reserve(N);
  for (std::size_t t = 0; t < N; ++t)
    if (remaining[t] == 0) ready.push_back(static_cast<int>(t));

  auto better = [&](int a, const Rat& ea, int b, const Rat& eb) {
    if (ea != eb) return ea < eb;
    const Task& ta = g.tasks[static_cast<std::size_t>(a)];
    const Task& tb = g.tasks[static_cast<std::size_t>(b)];
    auto ka = std::tuple(ta.window, ta.minibatch, ta.pipeline, kind_rank(ta.kind), ta.stage, a);
    auto kb = std::tuple(tb.window, tb.minibatch, tb.pipeline, kind_rank(tb.kind), tb.stage, b);
    return ka < kb;
  };

  while (!ready.empty()) {
    std::size_t best_pos = 0;
    Rat best_eff = max(dev_free[static_cast<std::size_t>(
                           g.tasks[static_cast<std::size_t>(ready[0])].device)],
                       ready_time[static_cast<std::size_t>(ready[0])]);
    for (std::size_t k = 1; k < ready.size(); ++k) {
      int id = ready[k];
      Rat eff = max(dev_free[static_cast<std::size_t>(g.tasks[static_cast<std::size_t>(id)].device)],
                    ready_time[static_cast<std::size_t>(id)]);
      if (better(id, eff, ready[best_pos], best_eff)) {
        best_pos = k;
        best_eff = eff;
      }
    }
    int id = ready[best_pos];
    ready[best_pos] = ready.back();
    ready.pop_back();
    const Task& t = g.tasks[static_cast<std::size_t>(id)];
    start[static_cast<std::size_t>(id)] = best_eff;
    finish[static_cast<std::size_t>(id)] = best_eff + t.duration;
    dev_free[static_cast<std::size_t>(t.device)] = finish[static_cast<std::size_t>(id)];
    order.push_back(id);
    for (int s : succ[static_cast<std::size_t>(id)]) {
      auto si = static_cast<std::size_t>(s);
      Rat arrival = finish[static_cast<std::size_t>(id)] +
                    cl.gap(t.device, g.tasks[si].device);
      ready_time[si] = max(ready_time[si], arrival);
      if (--remaining[si] == 0) ready.push_back(s);
    }
  }
  if (order.size() < N) {
    std::string msg = "deadlock: unscheduled tasks remain:";
    int listed = 0;
    for (std::size_t t = 0; t < N && listed < 8; ++t)
      if (remaining[t] > 0) {
        msg += " " + detail::task_label(g.tasks[t]);
        ++listed;
      }
    throw std::runtime_error(msg);
  }

  Timeline tl;
  tl.policy = g.policy;
  tl.depth = g.depth;
  tl.devices = g.devices;
  tl.threshold = g.threshold;
  tl.per_device.assign(static_cast<std::size_t>(g.devices), {});
  for (int id : order) {
    const Task& t = g.tasks[static_cast<std::size_t>(id)];
    TaskEvent e;
    e.kind = t.kind;
    e.stage = t.stage;
    e.minibatch = t.minibatch;
    e.pipeline = t.pipeline;
    e.device = t.device;
    e.start = start[static_cast<std::size_t>(id)];
    e.duration = t.duration;
    e.preloaded = t.preloaded;
    e.window = t.window;
    tl.per_device[static_cast<std::size_t>(t.device)].push_back(e);
    tl.makespan = max(tl.makespan, e.finish());
  }
  return tl;
}

// Idle fraction of device time inside the window-trimmed span. The span
// opens at the first event of window `warmup_windows` and closes at the last
// backward of the symmetric window from the other end; warmup 0 spans the
// whole run. Exact rational arithmetic throughout.
inline Rat bubble_ratio(const Timeline& tl, int warmup_windows = 0) {
  if (warmup_windows < 0) throw std::invalid_argument("bubble_ratio: negative warmup");
  int maxw = -1;
  for (const auto& dev : tl.per_device)
    for (const auto& e : dev)
      if (e.kind == Kind::Forward || e.kind == Kind::Backward)
        maxw = std::max(maxw, tl.window_of(e));
  if (maxw < 0) throw std::invalid_argument("bubble_ratio: no compute events");
  const int lo = warmup_windows;
  const int hi = maxw - warmup_windows;
  bool any_s = false, any_e = false;
  Rat S, E;
  for (const auto& dev : tl.per_device)
    for (const auto& e : dev) {
      int w = tl.window_of(e);
      if (w >= lo && (!any_s || e.start < S)) {
        S = e.start;
        any_s = true;
      }
      if (e.kind == Kind::Backward && w <= hi && (!any_e || E < e.finish())) {
        E = e.finish();
        any_e = true;
      }
    }
  if (!any_s || !any_e || !(S < E))
    throw std::invalid_argument("bubble_ratio: trimmed span is empty");
  Rat span = E - S;
  Rat total = span * Rat(tl.devices);
  Rat busy(0);
  for (const auto& dev : tl.per_device)
    for (const auto& e : dev) {
      Rat s = max(e.start, S);
      Rat f = min(e.finish(), E);
      if (s < f) busy = busy + (f - s);
    }
  return (total - busy) / total;
}

}  // namespace ppsim
