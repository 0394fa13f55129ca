#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ppsim/types.hpp"

namespace ppsim {

inline std::vector<std::string> validate_cluster(const ClusterSpec& c) {
  std::vector<std::string> v;
  auto bad = [&](const std::string& s) { v.push_back(s); };
  if (c.depth < 2) bad("depth: must be >= 2 (got " + std::to_string(c.depth) + ")");
  if (c.devices < 1) bad("devices: must be >= 1 (got " + std::to_string(c.devices) + ")");
  if (static_cast<int>(c.fwd_cost.size()) != c.depth)
    bad("fwd_cost: expected one entry per stage");
  if (static_cast<int>(c.bwd_cost.size()) != c.depth)
    bad("bwd_cost: expected one entry per stage");
  for (std::size_t i = 0; i < c.fwd_cost.size(); ++i)
    if (!(c.fwd_cost[i] > Rat(0)))
      bad("fwd_cost[" + std::to_string(i) + "]: must be strictly positive");
  for (std::size_t i = 0; i < c.bwd_cost.size(); ++i)
    if (!(c.bwd_cost[i] > Rat(0)))
      bad("bwd_cost[" + std::to_string(i) + "]: must be strictly positive");
  if (c.update_cost < Rat(0)) bad("update_cost: must be nonnegative");
  if (c.comm_cost < Rat(0)) bad("comm_cost: must be nonnegative");
  if (c.inter_node_cost && *c.inter_node_cost < Rat(0))
    bad("inter_node_cost: must be nonnegative");
  if (!c.nodes.empty()) {
    std::vector<int> seen(static_cast<std::size_t>(std::max(c.devices, 0)), 0);
    bool ok = true;
    for (const auto& group : c.nodes)
      for (int d : group) {
        if (d < 0 || d >= c.devices) {
          ok = false;
        } else {
          ++seen[static_cast<std::size_t>(d)];
        }
      }
    for (int n : seen)
      if (n != 1) ok = false;
    if (!ok) bad("nodes: must partition the device set");
  }
  return v;
}

inline std::vector<std::string> validate_policy(const PolicyConfig& p, const ClusterSpec& c) {
  std::vector<std::string> v;
  auto bad = [&](const std::string& s) { v.push_back(s); };
  if (p.injection_limit < 1) bad("injection_limit: must be >= 1");
  if (p.accumulation_threshold < 1) bad("accumulation_threshold: must be >= 1");
  if (p.num_minibatches < 1) bad("num_minibatches: must be >= 1");
  if (p.num_pipelines < 1) bad("num_pipelines: must be >= 1");
  if (p.zero_enabled && p.policy != Policy::AMDP)
    bad("zero_enabled: only supported for AMDP");

  switch (p.policy) {
    case Policy::AMDP: {
      if (c.depth % 2 != 0) bad("AMDP: depth must be even");
      if (c.devices != c.depth) bad("AMDP: devices must equal depth");
      if (!p.injection_override && p.injection_limit != 2)
        bad("AMDP: injection_limit is fixed to 2 (set injection_override to sweep)");
      if (c.depth % 2 == 0 && p.num_pipelines != c.depth / 2)
        bad("AMDP: num_pipelines must equal depth/2");
      if (p.num_pipelines >= 1) {
        if (p.accumulation_threshold % p.num_pipelines != 0)
          bad("AMDP: accumulation_threshold must be a multiple of num_pipelines");
        else if (p.accumulation_threshold / p.num_pipelines < p.injection_limit)
          bad("AMDP: accumulation_threshold must give each pipeline at least injection_limit minibatches per window");
      }
      break;
    }
    case Policy::Chimera: {
      if (c.depth % 2 != 0) bad("Chimera: depth must be even");
      if (c.devices != c.depth) bad("Chimera: devices must equal depth");
      if (p.num_pipelines != 2) bad("Chimera: num_pipelines must be 2");
      if (p.accumulation_threshold != p.injection_limit)
        bad("Chimera: accumulation_threshold must equal injection_limit");
      if (p.injection_limit % 2 != 0)
        bad("Chimera: injection_limit must be even (split across two pipelines)");
      break;
    }
    case Policy::DAPPLE:
    case Policy::GPipe: {
      if (c.devices != c.depth)
        bad(std::string(policy_name(p.policy)) + ": devices must equal depth");
      if (p.num_pipelines != 1)
        bad(std::string(policy_name(p.policy)) + ": num_pipelines must be 1");
      if (p.accumulation_threshold != p.injection_limit)
        bad(std::string(policy_name(p.policy)) +
            ": accumulation_threshold must equal injection_limit");
      break;
    }
    case Policy::Interleaved1F1B: {
      if (c.depth != 2 * c.devices)
        bad("Interleaved1F1B: depth must equal 2*devices (two chunks per device)");
      if (p.num_pipelines != 1) bad("Interleaved1F1B: num_pipelines must be 1");
      if (p.accumulation_threshold != p.injection_limit)
        bad("Interleaved1F1B: accumulation_threshold must equal injection_limit");
      break;
    }
    case Policy::PipeDreamAsync: {
      if (c.devices != c.depth) bad("PipeDreamAsync: devices must equal depth");
      if (p.num_pipelines != 1) bad("PipeDreamAsync: num_pipelines must be 1");
      if (p.injection_limit > c.depth)
        bad("PipeDreamAsync: injection_limit must be <= depth");
      break;
    }
  }
  return v;
}

// Checks the three causal families every timeline must respect:
// forward(i,j) before backward(i,j); forward(i,j) before forward(i+1,j);
// backward(i,j) before backward(i-1,j) — with the cross-device gap added.
inline std::vector<std::string> validate_causality(const Timeline& t, const ClusterSpec& c) {
  std::vector<std::string> v;
  std::map<std::pair<int, int>, const TaskEvent*> fwd, bwd;
  for (const auto& dev : t.per_device) {
    for (const TaskEvent& e : dev) {
      if (e.kind == Kind::Forward) {
        auto [it, inserted] = fwd.try_emplace({e.stage, e.minibatch}, &e);
        if (!inserted)
          v.push_back("duplicate forward(" + std::to_string(e.stage) + "," +
                      std::to_string(e.minibatch) + ")");
      } else if (e.kind == Kind::Backward) {
        auto [it, inserted] = bwd.try_emplace({e.stage, e.minibatch}, &e);
        if (!inserted)
          v.push_back("duplicate backward(" + std::to_string(e.stage) + "," +
                      std::to_string(e.minibatch) + ")");
      }
    }
  }
  auto name = [](const char* k, int s, int j) {
    return std::string(k) + "(" + std::to_string(s) + "," + std::to_string(j) + ")";
  };
  auto check_edge = [&](const TaskEvent* a, const TaskEvent* b, const char* ka, const char* kb) {
    Rat bound = a->finish() + c.gap(a->device, b->device);
    if (b->start < bound)
      v.push_back(name(kb, b->stage, b->minibatch) + " starts at " + b->start.str() +
                  " before " + name(ka, a->stage, a->minibatch) + " ends at " +
                  a->finish().str() +
                  (a->device != b->device ? " plus transfer gap" : ""));
  };
  for (const auto& [key, f] : fwd) {
    auto [stage, mb] = key;
    if (auto it = bwd.find(key); it != bwd.end()) check_edge(f, it->second, "forward", "backward");
    if (auto it = fwd.find({stage + 1, mb}); it != fwd.end())
      check_edge(f, it->second, "forward", "forward");
  }
  for (const auto& [key, b] : bwd) {
    auto [stage, mb] = key;
    if (stage > 0) {
      if (auto it = bwd.find({stage - 1, mb}); it != bwd.end())
        check_edge(b, it->second, "backward", "backward");
    }
  }
  return v;
}

// Per-device interval overlap audit (separate from causality).
inline std::vector<std::string> validate_non_overlap(const Timeline& t) {
  std::vector<std::string> v;
  for (std::size_t d = 0; d < t.per_device.size(); ++d) {
    const auto& evs = t.per_device[d];
    for (std::size_t i = 0; i + 1 < evs.size(); ++i) {
      if (evs[i + 1].start < evs[i].finish())
        v.push_back("device " + std::to_string(d) + ": " +
                    std::string(kind_name(evs[i + 1].kind)) + "(" +
                    std::to_string(evs[i + 1].stage) + "," +
                    std::to_string(evs[i + 1].minibatch) + ") overlaps previous event");
    }
  }
  return v;
}

}  // namespace ppsim
