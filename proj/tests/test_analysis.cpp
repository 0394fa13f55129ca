#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <vector>

#include "ppsim/analysis.hpp"

using namespace ppsim;

namespace {

PolicyConfig pd_cfg(int n, int M) {
  PolicyConfig c;
  c.policy = Policy::PipeDreamAsync;
  c.injection_limit = n;
  c.num_pipelines = 1;
  c.accumulation_threshold = 1;
  c.num_minibatches = M;
  return c;
}

PolicyConfig amdp_cfg(int d, int thr, int M, bool zero) {
  PolicyConfig c;
  c.policy = Policy::AMDP;
  c.injection_limit = 2;
  c.num_pipelines = d / 2;
  c.accumulation_threshold = thr;
  c.num_minibatches = M;
  c.zero_enabled = zero;
  return c;
}

}  // namespace

TEST_CASE("per-backward updates give one-step mismatch with a cap of two") {
  auto cl = ClusterSpec::uniform(4, 4, Rat(1), Rat(1));
  auto rep = mismatch_report(simulate(build(pd_cfg(2, 16), cl), cl));
  CHECK(rep.entries.at({0, 3}) == 1);
  CHECK(rep.max_overall() == 1);
  CHECK(rep.missing.empty());
}

TEST_CASE("a cap of one eliminates mismatch entirely") {
  for (int d : {2, 4, 8}) {
    auto cl = ClusterSpec::uniform(d, d, Rat(1), Rat(1));
    auto rep = mismatch_report(simulate(build(pd_cfg(1, 4 * d), cl), cl));
    CHECK(rep.max_overall() == 0);
  }
}

TEST_CASE("an uncapped steady pipeline loses one step per stage of depth") {
  auto cl = ClusterSpec::uniform(4, 4, Rat(1), Rat(1));
  auto rep = mismatch_report(simulate(build(pd_cfg(4, 16), cl), cl));
  for (int i = 0; i < 4; ++i) CHECK(rep.entries.at({i, 8}) == 4 - i - 1);
}

TEST_CASE("steady mismatch law holds for every depth and cap") {
  for (int d : {2, 3, 4, 6, 8, 12, 16})
    for (int n = 1; n <= d; ++n) {
      auto v = verify_steady_mismatch(d, n);
      INFO("depth " << d << " cap " << n << ": " << v.detail);
      CHECK(v.pass);
    }
  CHECK_FALSE(verify_steady_mismatch(4, 0).pass);
  CHECK_FALSE(verify_steady_mismatch(4, 5).pass);
}

TEST_CASE("accumulation windows mismatch exactly their first depth minibatches") {
  for (int d : {4, 8})
    for (int thr : {2 * d, 4 * d})
      for (bool zero : {false, true}) {
        auto cl = ClusterSpec::uniform(d, d, Rat(1), Rat(2));
        auto tl = simulate(build(amdp_cfg(d, thr, 3 * thr, zero), cl), cl);
        auto rep = mismatch_report(tl);
        CHECK(rep.max_overall() <= 1);
        auto wr = window_mismatch(tl, d);
        REQUIRE(wr.windows.size() == 3);
        for (const auto& w : wr.windows) {
          CHECK(w.window_size == thr);
          for (int m : w.mismatched) {
            CHECK(m >= w.window * thr);  // subset of the window's minibatches
            CHECK(m < (w.window + 1) * thr);
          }
          if (w.window == 0) {
            CHECK(w.mismatched.empty());
          } else {
            std::vector<int> first_d;
            for (int k = 0; k < d; ++k) first_d.push_back(w.window * thr + k);
            CHECK(w.mismatched == first_d);
          }
        }
      }
}

TEST_CASE("depth-sized windows mismatch every steady minibatch by one step") {
  auto cl = ClusterSpec::uniform(4, 4, Rat(1), Rat(2));
  auto tl = simulate(build(amdp_cfg(4, 4, 16, true), cl), cl);
  auto rep = mismatch_report(tl);
  for (const auto& [key, count] : rep.entries) CHECK(count == (key.second >= 4 ? 1 : 0));
}

TEST_CASE("a single giant window never straddles an update") {
  auto cl = ClusterSpec::uniform(4, 4, Rat(1), Rat(2));
  auto tl = simulate(build(amdp_cfg(4, 16, 16, true), cl), cl);
  auto wr = window_mismatch(tl, 4);
  REQUIRE(wr.windows.size() == 1);
  CHECK(wr.windows[0].mismatched.empty());
  CHECK(wr.windows[0].window_size == 16);
}

TEST_CASE("update counts per window match the replication scheme") {
  auto cl = ClusterSpec::uniform(4, 4, Rat(1), Rat(2));
  auto shard = window_mismatch(simulate(build(amdp_cfg(4, 8, 16, true), cl), cl), 4);
  for (const auto& w : shard.windows) CHECK(w.update_count == 4);  // one broadcast per stage
  auto repl = window_mismatch(simulate(build(amdp_cfg(4, 8, 16, false), cl), cl), 4);
  for (const auto& w : repl.windows) CHECK(w.update_count == 8);  // per stage per pipeline
}

TEST_CASE("a forward without its backward is flagged, not counted") {
  Timeline t;
  t.policy = Policy::PipeDreamAsync;
  t.depth = 2;
  t.devices = 1;
  t.per_device.resize(1);
  TaskEvent f;
  f.kind = Kind::Forward;
  f.stage = 0;
  f.minibatch = 0;
  f.start = Rat(0);
  f.duration = Rat(1);
  t.per_device[0].push_back(f);
  auto rep = mismatch_report(t);
  CHECK(rep.entries.empty());
  REQUIRE(rep.missing.size() == 1);
  CHECK(rep.missing[0] == std::make_pair(0, 0));
}

TEST_CASE("the one-step bound survives placement and latency perturbations") {
  auto v = verify_topology_invariance(8, 100, 7);
  INFO(v.detail);
  CHECK(v.pass);
  CHECK(verify_topology_invariance(2, 10, 11).pass);
  CHECK(verify_topology_invariance(4, 50, 12345).pass);
}

TEST_CASE("perturbation verdicts are reproducible from the seed") {
  auto a = verify_topology_invariance(4, 25, 99);
  auto b = verify_topology_invariance(4, 25, 99);
  CHECK(a.pass == b.pass);
  CHECK(a.detail == b.detail);
}

TEST_CASE("straight-pipeline memory matches the closed forms") {
  auto cl = ClusterSpec::uniform(4, 4, Rat(1), Rat(1));
  PolicyConfig c;
  c.policy = Policy::DAPPLE;
  c.injection_limit = 4;
  c.num_pipelines = 1;
  c.accumulation_threshold = 4;
  c.num_minibatches = 4;
  auto mr = memory_report(simulate(build(c, cl), cl), c, MemoryModel{});
  REQUIRE(mr.per_device.size() == 4);
  CHECK(mr.per_device[0].weight == Rat(1));
  CHECK(mr.per_device[0].activation_peak == Rat(4));  // entry stage keeps n live
  CHECK(mr.per_device[0].optimizer_state == Rat(2));
  REQUIRE(mr.table1.bubble.has_value());
  CHECK(*mr.table1.bubble == Rat(3, 7));
  CHECK(mr.table1.weight_min == Rat(1));
  CHECK(mr.table1.activation_peak == Rat(4));
}

TEST_CASE("bidirectional pair hosts two replicas per device") {
  auto cl = ClusterSpec::uniform(8, 8, Rat(1), Rat(1));
  PolicyConfig c;
  c.policy = Policy::Chimera;
  c.injection_limit = 8;
  c.num_pipelines = 2;
  c.accumulation_threshold = 8;
  c.num_minibatches = 8;
  auto mr = memory_report(simulate(build(c, cl), cl), c, MemoryModel{});
  for (const auto& dm : mr.per_device) CHECK(dm.weight == Rat(2));
  CHECK(mr.table1.weight_min == Rat(2));
  CHECK(mr.table1.weight_max == Rat(2));
  CHECK(mr.table1.activation_peak == Rat(8));
}

TEST_CASE("continuous updates stash one parameter version per in-flight minibatch") {
  auto cl = ClusterSpec::uniform(4, 4, Rat(1), Rat(1));
  auto cfg = pd_cfg(4, 12);
  auto mr = memory_report(simulate(build(cfg, cl), cl), cfg, MemoryModel{});
  for (int i = 0; i < 4; ++i) CHECK(mr.per_device[static_cast<std::size_t>(i)].weight == Rat(4 - i));
  CHECK(mr.table1.weight_min == Rat(1));
  CHECK(mr.table1.weight_max == Rat(4));
  CHECK_FALSE(mr.table1.bubble.has_value());
}

TEST_CASE("sharded optimizer state is two over depth of the replicated bytes") {
  for (int d : {4, 8, 16}) {
    auto cl = ClusterSpec::uniform(d, d, Rat(1), Rat(2));
    auto tl = simulate(build(amdp_cfg(d, d, 2 * d, true), cl), cl);
    auto shard = memory_report(tl, amdp_cfg(d, d, 2 * d, true), MemoryModel{});
    auto naive = memory_report(tl, amdp_cfg(d, d, 2 * d, false), MemoryModel{});
    for (int dev = 0; dev < d; ++dev) {
      const auto& s = shard.per_device[static_cast<std::size_t>(dev)];
      const auto& nv = naive.per_device[static_cast<std::size_t>(dev)];
      CHECK(nv.optimizer_state == Rat(d));  // d/2 replicas, two state words each
      CHECK(s.optimizer_state == nv.optimizer_state * Rat(2, d));
    }
  }
}

TEST_CASE("peak activations never shrink as the entry cap grows") {
  Rat prev(-1);
  for (int n : {1, 2, 4, 8}) {
    auto cl = ClusterSpec::uniform(4, 4, Rat(1), Rat(1));
    PolicyConfig c;
    c.policy = Policy::DAPPLE;
    c.injection_limit = n;
    c.num_pipelines = 1;
    c.accumulation_threshold = n;
    c.num_minibatches = n;
    auto mr = memory_report(simulate(build(c, cl), cl), c, MemoryModel{});
    Rat peak(0);
    for (const auto& dm : mr.per_device) peak = max(peak, dm.activation_peak);
    CHECK(peak >= prev);
    prev = peak;
  }
}

TEST_CASE("splitting an all-reduce into reduce plus broadcast is cost neutral") {
  auto zero = reduce_broadcast_cost(1, Rat(1));
  CHECK(zero.reduce == Rat(0));
  CHECK(zero.broadcast == Rat(0));
  CHECK(zero.allreduce == Rat(0));
  auto four = reduce_broadcast_cost(4, Rat(1));
  CHECK(four.reduce == Rat(3, 4));
  CHECK(four.broadcast == Rat(3, 4));
  CHECK(four.allreduce == Rat(3, 2));
  for (int p = 2; p <= 16; ++p) {
    auto v = reduce_broadcast_cost(p, Rat(7, 3));
    CHECK(v.reduce + v.broadcast == v.allreduce);
  }
  CHECK_THROWS_AS(reduce_broadcast_cost(0, Rat(1)), std::invalid_argument);
}
