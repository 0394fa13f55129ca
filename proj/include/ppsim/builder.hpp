#pragma once

#include <algorithm>
#include <climits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ppsim/types.hpp"
#include "ppsim/validate.hpp"

namespace ppsim {

struct Task {
  Kind kind = Kind::Forward;
  int stage = 0;
  int minibatch = 0;  // Update/Reduce/Broadcast: window index
  int pipeline = 0;
  int device = 0;
  Rat duration;
  int window = 0;
  bool preloaded = false;
};

struct TaskGraph {
  Policy policy = Policy::DAPPLE;
  int depth = 0;
  int devices = 0;
  int threshold = 1;
  std::vector<Task> tasks;
  std::vector<std::pair<int, int>> deps;  // (pred, succ) indices into tasks
  // Each lane is a strict execution order for one stage replica on one
  // device; a device dispatches among its lane heads (plus lane-less tasks).
  std::vector<std::vector<int>> lanes;

  // Per-device merged release order: lane orders interleaved by dispatch key.
  std::vector<std::vector<int>> fifo_hint() const {
    std::vector<std::vector<std::vector<int>>> lanes_by_dev(static_cast<std::size_t>(devices));
    std::vector<char> in_lane(tasks.size(), 0);
    for (const auto& lane : lanes)
      if (!lane.empty()) {
        lanes_by_dev[static_cast<std::size_t>(tasks[static_cast<std::size_t>(lane[0])].device)]
            .push_back(lane);
        for (int t : lane) in_lane[static_cast<std::size_t>(t)] = 1;
      }
    for (std::size_t t = 0; t < tasks.size(); ++t)
      if (!in_lane[t])
        lanes_by_dev[static_cast<std::size_t>(tasks[t].device)].push_back(
            {static_cast<int>(t)});
    auto key = [&](int id) {
      const Task& t = tasks[static_cast<std::size_t>(id)];
      return std::tuple(t.window, t.minibatch, t.pipeline, kind_rank(t.kind), t.stage, id);
    };
    std::vector<std::vector<int>> hint(static_cast<std::size_t>(devices));
    for (int d = 0; d < devices; ++d) {
      auto& dl = lanes_by_dev[static_cast<std::size_t>(d)];
      std::vector<std::size_t> pos(dl.size(), 0);
      for (;;) {
        int best = -1;
        std::size_t best_lane = 0;
        for (std::size_t l = 0; l < dl.size(); ++l) {
          if (pos[l] >= dl[l].size()) continue;
          int cand = dl[l][pos[l]];
          if (best < 0 || key(cand) < key(best)) {
            best = cand;
            best_lane = l;
          }
        }
        if (best < 0) break;
        hint[static_cast<std::size_t>(d)].push_back(best);
        ++pos[best_lane];
      }
    }
    return hint;
  }
};

// Stage placement for counter-directed pipelines: even pipelines ascend the
// device ring, odd pipelines descend it, each offset by two devices.
inline int map_stage_to_device(int pipeline, int stage, int depth) {
  if (depth < 2 || depth % 2 != 0)
    throw std::invalid_argument("stage mapping requires even depth >= 2");
  if (stage < 0 || stage >= depth || pipeline < 0 || pipeline >= depth / 2)
    throw std::invalid_argument("stage mapping: index out of range");
  if (pipeline % 2 == 0) return (2 * pipeline + stage) % depth;
  return (2 * pipeline - stage + depth + 1) % depth;
}

inline int default_num_pipelines(int depth) {
  if (depth < 2 || depth % 2 != 0)
    throw std::invalid_argument("pipeline count requires even depth >= 2; got " +
                                std::to_string(depth));
  return depth / 2;
}

inline Rat active_ratio(int injection_limit, int depth) {
  return Rat(injection_limit, depth);
}

inline int preload_count(const Rat& bwd, const Rat& fwd) {
  if (!(fwd > Rat(0))) throw std::invalid_argument("preload_count: fwd must be positive");
  return static_cast<int>((bwd / fwd).floor());
}

namespace detail {

// One-fwd-one-bwd order for a single stage replica, across accumulation
// windows. `cap` bounds minibatches in flight; `preload` next-window forwards
// are pulled into each window's drain.
inline std::vector<std::pair<Kind, int>> lane_program(
    const std::vector<std::vector<int>>& win_shares, int cap, int preload) {
  std::vector<std::pair<Kind, int>> prog;
  int in_flight = 0;
  std::size_t W = win_shares.size();
  std::vector<int> pre_emitted(W + 1, 0);
  for (std::size_t w = 0; w < W; ++w) {
    const auto& share = win_shares[w];
    std::vector<int> fstream(share.begin() + pre_emitted[w], share.end());
    if (w + 1 < W) {
      int k = std::min<int>(preload, static_cast<int>(win_shares[w + 1].size()));
      pre_emitted[w + 1] = k;
      fstream.insert(fstream.end(), win_shares[w + 1].begin(), win_shares[w + 1].begin() + k);
    }
    std::size_t fi = 0, bi = 0;
    while (bi < share.size()) {
      if (fi < fstream.size() && in_flight < cap) {
        prog.emplace_back(Kind::Forward, fstream[fi++]);
        ++in_flight;
      } else {
        prog.emplace_back(Kind::Backward, share[bi++]);
        --in_flight;
      }
    }
    while (fi < fstream.size()) {
      prog.emplace_back(Kind::Forward, fstream[fi++]);
      ++in_flight;
    }
  }
  return prog;
}

}  // namespace detail

inline TaskGraph build(const PolicyConfig& cfg, const ClusterSpec& cl) {
  {
    auto v = validate_cluster(cl);
    auto vp = validate_policy(cfg, cl);
    v.insert(v.end(), vp.begin(), vp.end());
    if (!v.empty()) throw std::invalid_argument("invalid configuration: " + v.front());
  }
  const int depth = cl.depth;
  const int M = cfg.num_minibatches;
  const int thr = cfg.accumulation_threshold;
  const int W = (M + thr - 1) / thr;
  const bool windowed = cfg.policy != Policy::PipeDreamAsync;
  const int P = cfg.policy == Policy::AMDP      ? cfg.num_pipelines
                : cfg.policy == Policy::Chimera ? 2
                                                : 1;

  auto device_of = [&](int pipeline, int stage) {
    switch (cfg.policy) {
      case Policy::AMDP: return map_stage_to_device(pipeline, stage, depth);
      case Policy::Chimera: return pipeline == 0 ? stage : depth - 1 - stage;
      case Policy::Interleaved1F1B: return stage % cl.devices;
      default: return stage;
    }
  };

  const int preload_eff =
      cfg.policy == Policy::AMDP
          ? std::min(preload_count(cl.mean_bwd(), cl.mean_fwd()), cfg.injection_limit)
          : 0;

  auto stage_cap = [&](int stage) {
    switch (cfg.policy) {
      case Policy::GPipe: return INT_MAX;
      case Policy::Chimera: return std::min(depth / 2, depth - stage);
      default: return std::min(cfg.injection_limit, depth - stage);
    }
  };

  TaskGraph g;
  g.policy = cfg.policy;
  g.depth = depth;
  g.devices = cl.devices;
  g.threshold = thr;

  auto add_task = [&](Kind k, int stage, int mb, int pipeline, int device, Rat dur, int window,
                      bool pre = false) {
    g.tasks.push_back({k, stage, mb, pipeline, device, dur, window, pre});
    return static_cast<int>(g.tasks.size() - 1);
  };
  auto dep = [&](int a, int b) { g.deps.emplace_back(a, b); };

  // Per-pipeline minibatch shares per window (round-robin assignment).
  std::vector<std::vector<std::vector<int>>> shares(
      static_cast<std::size_t>(P),
      std::vector<std::vector<int>>(static_cast<std::size_t>(windowed ? W : 1)));
  for (int j = 0; j < M; ++j)
    shares[static_cast<std::size_t>(j % P)][static_cast<std::size_t>(windowed ? j / thr : 0)]
        .push_back(j);

  // Preloaded = first preload_eff of each pipeline's share, windows >= 1.
  std::vector<char> is_pre(static_cast<std::size_t>(M), 0);
  if (preload_eff > 0)
    for (int p = 0; p < P; ++p)
      for (std::size_t w = 1; w < shares[static_cast<std::size_t>(p)].size(); ++w) {
        const auto& s = shares[static_cast<std::size_t>(p)][w];
        for (int k = 0; k < std::min<int>(preload_eff, static_cast<int>(s.size())); ++k)
          is_pre[static_cast<std::size_t>(s[static_cast<std::size_t>(k)])] = 1;
      }

  // Forward/backward tasks.
  std::vector<int> fid(static_cast<std::size_t>(depth) * static_cast<std::size_t>(M));
  std::vector<int> bid(fid.size());
  auto at = [&](int stage, int j) {
    return static_cast<std::size_t>(stage) * static_cast<std::size_t>(M) +
           static_cast<std::size_t>(j);
  };
  for (int j = 0; j < M; ++j) {
    int p = j % P;
    int w = j / thr;
    for (int i = 0; i < depth; ++i) {
      int dv = device_of(p, i);
      fid[at(i, j)] = add_task(Kind::Forward, i, j, p, dv, cl.fwd_cost[static_cast<std::size_t>(i)],
                               w, is_pre[static_cast<std::size_t>(j)] != 0);
      bid[at(i, j)] = add_task(Kind::Backward, i, j, p, dv,
                               cl.bwd_cost[static_cast<std::size_t>(i)], w);
    }
  }

  // Causal edges: forward precedes same-minibatch backward; forwards chain
  // down the stages; backwards chain back up. Nothing else links F/B pairs.
  for (int j = 0; j < M; ++j)
    for (int i = 0; i < depth; ++i) {
      dep(fid[at(i, j)], bid[at(i, j)]);
      if (i + 1 < depth) dep(fid[at(i, j)], fid[at(i + 1, j)]);
      if (i > 0) dep(bid[at(i, j)], bid[at(i - 1, j)]);
    }

  // Injection pacing: the entry stage admits at most injection_limit
  // minibatches before the backward signal for the oldest one arrives, so the
  // g-th entry forward waits for the (g - limit)-th backward to reach the
  // entry stage (the stage-1 backward producing that signal). Encoding the
  // cap as edges leaves the dispatcher free to pack every other slot.
  if (cfg.policy == Policy::AMDP) {
    const int n = cfg.injection_limit;
    const int sig_stage = depth > 1 ? 1 : 0;
    for (int p = 0; p < P; ++p) {
      std::vector<int> seq;
      for (const auto& share : shares[static_cast<std::size_t>(p)])
        seq.insert(seq.end(), share.begin(), share.end());
      for (std::size_t k = static_cast<std::size_t>(n); k < seq.size(); ++k)
        dep(bid[at(sig_stage, seq[k - static_cast<std::size_t>(n)])],
            fid[at(0, seq[k])]);
    }
  }

  // Accumulation-window update machinery.
  if (cfg.policy == Policy::PipeDreamAsync) {
    // One update per backward per stage, applied where the stage lives.
    for (int i = 0; i < depth; ++i) {
      int prev = -1;
      for (int j = 0; j < M; ++j) {
        int u = add_task(Kind::Update, i, j, 0, i, cl.update_cost, j / thr);
        dep(bid[at(i, j)], u);
        if (prev >= 0) dep(prev, u);
        prev = u;
      }
    }
  } else if (cfg.zero_enabled) {
    // Reduce-to-owner then broadcast-to-replicas; owner of stage i is device i.
    std::vector<int> rid(static_cast<std::size_t>(W) * static_cast<std::size_t>(depth));
    std::vector<int> bcid(rid.size());
    auto uat = [&](int w, int i) {
      return static_cast<std::size_t>(w) * static_cast<std::size_t>(depth) +
             static_cast<std::size_t>(i);
    };
    for (int w = 0; w < W; ++w)
      for (int i = 0; i < depth; ++i) {
        int r = add_task(Kind::Reduce, i, w, 0, i, cl.update_cost, w);
        int bc = add_task(Kind::Broadcast, i, w, 0, i, cl.update_cost, w);
        dep(r, bc);
        rid[uat(w, i)] = r;
        bcid[uat(w, i)] = bc;
        if (w > 0) dep(bcid[uat(w - 1, i)], r);
      }
    for (int j = 0; j < M; ++j) {
      int w = j / thr;
      bool pre = is_pre[static_cast<std::size_t>(j)] != 0;
      for (int i = 0; i < depth; ++i) {
        dep(bid[at(i, j)], rid[uat(w, i)]);
        if (pre) {
          // Preloaded forwards run ahead of the window-(w-1) update and their
          // backwards land after it.
          dep(fid[at(i, j)], rid[uat(w - 1, i)]);
          dep(bcid[uat(w - 1, i)], bid[at(i, j)]);
          if (w >= 2) dep(bcid[uat(w - 2, i)], fid[at(i, j)]);
        } else if (w > 0) {
          dep(bcid[uat(w - 1, i)], fid[at(i, j)]);
        }
      }
    }
  } else {
    // Symmetric all-reduce-equivalent barrier: every replica updates after all
    // replicas' window backwards.
    std::vector<int> uid(static_cast<std::size_t>(W) * static_cast<std::size_t>(depth) *
                         static_cast<std::size_t>(P));
    auto uat = [&](int w, int i, int p) {
      return (static_cast<std::size_t>(w) * static_cast<std::size_t>(depth) +
              static_cast<std::size_t>(i)) *
                 static_cast<std::size_t>(P) +
             static_cast<std::size_t>(p);
    };
    for (int w = 0; w < W; ++w)
      for (int i = 0; i < depth; ++i)
        for (int p = 0; p < P; ++p) {
          int u = add_task(Kind::Update, i, w, p, device_of(p, i), cl.update_cost, w);
          uid[uat(w, i, p)] = u;
          if (w > 0) dep(uid[uat(w - 1, i, p)], u);
        }
    for (int j = 0; j < M; ++j) {
      int w = j / thr;
      bool pre = is_pre[static_cast<std::size_t>(j)] != 0;
      int jp = j % P;
      for (int i = 0; i < depth; ++i) {
        for (int p = 0; p < P; ++p) dep(bid[at(i, j)], uid[uat(w, i, p)]);
        if (pre) {
          dep(fid[at(i, j)], uid[uat(w - 1, i, jp)]);
          dep(uid[uat(w - 1, i, jp)], bid[at(i, j)]);
          if (w >= 2) dep(uid[uat(w - 2, i, jp)], fid[at(i, j)]);
        } else if (w > 0) {
          dep(uid[uat(w - 1, i, jp)], fid[at(i, j)]);
        }
      }
    }
  }

  // Lanes: one per (pipeline, stage replica).
  for (int p = 0; p < P; ++p)
    for (int i = 0; i < depth; ++i) {
      std::vector<std::pair<Kind, int>> prog;
      if (cfg.policy == Policy::Chimera) {
        // Order each replica by the zero-queue reference schedule: groups of
        // depth/2 minibatches injected (Tf+Tb) apart, consecutive groups
        // depth*(Tf+Tb) apart, forwards flowing down and backwards straight
        // back with no queueing. Under uniform costs this order packs the
        // devices exactly; under skewed costs it is still a valid priority.
        const Rat tf = cl.mean_fwd(), tb = cl.mean_bwd();
        const Rat unit = tf + tb;
        const int h = depth / 2;
        for (const auto& share : shares[static_cast<std::size_t>(p)]) {
          std::vector<std::tuple<Rat, int, int>> keyed;  // (time, kind_rank, mb)
          for (std::size_t k = 0; k < share.size(); ++k) {
            Rat inj = unit * Rat(static_cast<int>(k) % h) +
                      unit * Rat(depth) * Rat(static_cast<int>(k) / h);
            keyed.emplace_back(inj + tf * Rat(i), 1, share[k]);
            keyed.emplace_back(inj + tf * Rat(depth) + tb * Rat(depth - 1 - i), 0, share[k]);
          }
          std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
            if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) < std::get<0>(b);
            if (std::get<1>(a) != std::get<1>(b)) return std::get<1>(a) < std::get<1>(b);
            return std::get<2>(a) < std::get<2>(b);
          });
          for (const auto& [t, kr, j] : keyed)
            prog.emplace_back(kr == 1 ? Kind::Forward : Kind::Backward, j);
        }
      } else if (cfg.policy == Policy::AMDP) {
        // No release order: injection pacing and window gating live in the
        // dependency edges, and the dispatcher packs replicas work-conserving.
        continue;
      } else {
        prog = detail::lane_program(shares[static_cast<std::size_t>(p)], stage_cap(i),
                                    preload_eff);
      }
      std::vector<int> lane;
      lane.reserve(prog.size());
      for (auto [k, j] : prog)
        lane.push_back(k == Kind::Forward ? fid[at(i, j)] : bid[at(i, j)]);
      if (!lane.empty()) g.lanes.push_back(std::move(lane));
    }

  return g;
}

}  // namespace ppsim
