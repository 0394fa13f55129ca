#pragma once

// Randomized whole-pipeline audits. Two entry points:
//  - fuzz_causality: simulate many random (policy, cluster) cases and require
//    the causal-ordering and device-exclusivity validators to stay clean.
//  - fuzz_inversion_detection: for each case, deliberately move one dependent
//    task ahead of its producer and require the causality validator to flag
//    the corrupted timeline.
// Trials are seeded individually, so results are independent of worker count
// and identical across repeated runs.

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ppsim/builder.hpp"
#include "ppsim/engine.hpp"
#include "ppsim/types.hpp"
#include "ppsim/validate.hpp"

namespace ppsim {

struct FuzzReport {
  int trials = 0;
  int failures = 0;
  std::string first_failure;
};

namespace fuzz_detail {

inline std::uint64_t mix(std::uint64_t seed, std::uint64_t trial) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (trial + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct Case {
  PolicyConfig cfg;
  ClusterSpec cl;
};

inline Case random_case(std::mt19937_64& rng) {
  constexpr Policy kAll[] = {Policy::DAPPLE,  Policy::GPipe,          Policy::Interleaved1F1B,
                             Policy::Chimera, Policy::PipeDreamAsync, Policy::AMDP};
  const Policy pol = kAll[rng() % 6];

  int depth = 0, devices = 0, pipelines = 1, n = 1, thr = 1, M = 1;
  bool zero = false;
  switch (pol) {
    case Policy::DAPPLE:
    case Policy::GPipe: {
      depth = devices = 2 + static_cast<int>(rng() % 7);
      n = 1 + static_cast<int>(rng() % (2 * depth));
      thr = M = n;
      break;
    }
    case Policy::Interleaved1F1B: {
      devices = 2 + 2 * static_cast<int>(rng() % 2);
      depth = 2 * devices;
      n = devices * (2 + static_cast<int>(rng() % 3));
      thr = M = n;
      break;
    }
    case Policy::Chimera: {
      depth = devices = 4 + 2 * static_cast<int>(rng() % 3);
      pipelines = 2;
      n = depth * (1 + static_cast<int>(rng() % 2));
      thr = M = n;
      break;
    }
    case Policy::PipeDreamAsync: {
      depth = devices = 2 + static_cast<int>(rng() % 7);
      n = 1 + static_cast<int>(rng() % depth);
      thr = 1 + static_cast<int>(rng() % 4);
      M = thr * (2 + static_cast<int>(rng() % 4));
      break;
    }
    case Policy::AMDP: {
      depth = devices = 4 + 2 * static_cast<int>(rng() % 3);
      pipelines = depth / 2;
      n = 2;
      thr = depth * (1 + static_cast<int>(rng() % 2));
      M = thr * (2 + static_cast<int>(rng() % 2));
      zero = rng() % 2 == 0;
      break;
    }
  }

  Case c;
  c.cfg.policy = pol;
  c.cfg.injection_limit = n;
  c.cfg.num_pipelines = pipelines;
  c.cfg.accumulation_threshold = thr;
  c.cfg.num_minibatches = M;
  c.cfg.zero_enabled = zero;

  const Rat fwd(1 + static_cast<int>(rng() % 4), 1 + static_cast<int>(rng() % 2));
  const Rat bwd(1 + static_cast<int>(rng() % 6), 1 + static_cast<int>(rng() % 2));
  c.cl = ClusterSpec::uniform(depth, devices, fwd, bwd);
  for (auto& r : c.cl.fwd_cost) r = r + Rat(static_cast<int>(rng() % 2));
  for (auto& r : c.cl.bwd_cost) r = r + Rat(static_cast<int>(rng() % 2));
  c.cl.update_cost = Rat(static_cast<int>(rng() % 2), 4);
  c.cl.comm_cost = Rat(static_cast<int>(rng() % 3), 2);
  if (rng() % 2 == 0 && devices >= 2) {
    const int split = 1 + static_cast<int>(rng() % (devices - 1));
    c.cl.nodes.assign(2, {});
    for (int d = 0; d < devices; ++d) c.cl.nodes[d < split ? 0 : 1].push_back(d);
    c.cl.inter_node_cost = Rat(1 + static_cast<int>(rng() % 3));
  }
  return c;
}

// Family edges actually present in a timeline: forward→backward (same stage,
// minibatch), forward→forward (stage chain), backward→backward (reverse
// chain). Producers are stored by value, consumers by (device, slot) so the
// corrupted copy can be edited in place.
struct Edge {
  TaskEvent producer;
  std::size_t dev;
  std::size_t slot;
};

inline std::vector<Edge> family_edges(const Timeline& t) {
  std::map<std::pair<int, int>, const TaskEvent*> fwd, bwd;
  std::map<std::pair<int, int>, std::pair<std::size_t, std::size_t>> floc, bloc;
  for (std::size_t d = 0; d < t.per_device.size(); ++d) {
    for (std::size_t k = 0; k < t.per_device[d].size(); ++k) {
      const TaskEvent& e = t.per_device[d][k];
      if (e.kind == Kind::Forward) {
        fwd[{e.stage, e.minibatch}] = &e;
        floc[{e.stage, e.minibatch}] = {d, k};
      } else if (e.kind == Kind::Backward) {
        bwd[{e.stage, e.minibatch}] = &e;
        bloc[{e.stage, e.minibatch}] = {d, k};
      }
    }
  }
  std::vector<Edge> edges;
  for (const auto& [key, f] : fwd) {
    auto [stage, mb] = key;
    if (auto it = bloc.find(key); it != bloc.end())
      edges.push_back({*f, it->second.first, it->second.second});
    if (auto it = floc.find({stage + 1, mb}); it != floc.end())
      edges.push_back({*f, it->second.first, it->second.second});
  }
  for (const auto& [key, b] : bwd) {
    auto [stage, mb] = key;
    if (stage > 0)
      if (auto it = bloc.find({stage - 1, mb}); it != bloc.end())
        edges.push_back({*b, it->second.first, it->second.second});
  }
  return edges;
}

}  // namespace fuzz_detail

inline FuzzReport fuzz_causality(int trials, std::uint64_t seed, int jobs = 1) {
  if (trials < 0 || jobs < 1) throw std::invalid_argument("fuzz_causality: bad arguments");
  std::vector<std::string> result(static_cast<std::size_t>(trials));
  auto worker = [&](int first, int stride) {
    for (int t = first; t < trials; t += stride) {
      std::mt19937_64 rng(fuzz_detail::mix(seed, static_cast<std::uint64_t>(t)));
      auto c = fuzz_detail::random_case(rng);
      std::string err;
      try {
        auto tl = simulate(build(c.cfg, c.cl), c.cl);
        auto v1 = validate_causality(tl, c.cl);
        auto v2 = validate_non_overlap(tl);
        if (!v1.empty())
          err = v1.front();
        else if (!v2.empty())
          err = v2.front();
      } catch (const std::exception& e) {
        err = std::string("exception: ") + e.what();
      }
      if (!err.empty())
        result[static_cast<std::size_t>(t)] =
            "trial " + std::to_string(t) + " policy " + policy_name(c.cfg.policy) + ": " + err;
    }
  };
  if (jobs == 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker, j, jobs);
    for (auto& th : pool) th.join();
  }
  FuzzReport rep;
  rep.trials = trials;
  for (const auto& r : result) {
    if (r.empty()) continue;
    if (rep.failures == 0) rep.first_failure = r;
    ++rep.failures;
  }
  return rep;
}

inline FuzzReport fuzz_inversion_detection(int trials, std::uint64_t seed) {
  if (trials < 0) throw std::invalid_argument("fuzz_inversion_detection: bad arguments");
  FuzzReport rep;
  rep.trials = trials;
  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(fuzz_detail::mix(seed ^ 0xabcdef12u, static_cast<std::uint64_t>(t)));
    auto c = fuzz_detail::random_case(rng);
    Timeline tl = simulate(build(c.cfg, c.cl), c.cl);
    auto edges = fuzz_detail::family_edges(tl);
    if (edges.empty()) continue;
    const auto& e = edges[rng() % edges.size()];
    Timeline bad = tl;
    TaskEvent& victim = bad.per_device[e.dev][e.slot];
    victim.start = e.producer.start - victim.duration - Rat(1, 3);
    if (validate_causality(bad, c.cl).empty()) {
      if (rep.failures == 0)
        rep.first_failure = "trial " + std::to_string(t) + " policy " +
                            policy_name(c.cfg.policy) + ": inversion of " +
                            kind_name(victim.kind) + "(" + std::to_string(victim.stage) + "," +
                            std::to_string(victim.minibatch) + ") went undetected";
      ++rep.failures;
    }
  }
  return rep;
}

}  // namespace ppsim
