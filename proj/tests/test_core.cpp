#include <catch2/catch_amalgamated.hpp>

#include "ppsim/types.hpp"
#include "ppsim/validate.hpp"

using namespace ppsim;

namespace {

TaskEvent ev(Kind k, int stage, int mb, int device, Rat start, Rat dur, int pipeline = 0) {
  TaskEvent e;
  e.kind = k;
  e.stage = stage;
  e.minibatch = mb;
  e.pipeline = pipeline;
  e.device = device;
  e.start = start;
  e.duration = dur;
  return e;
}

Timeline two_stage_timeline() {
  Timeline t;
  t.depth = 2;
  t.devices = 2;
  t.threshold = 1;
  t.per_device.resize(2);
  t.per_device[0] = {ev(Kind::Forward, 0, 0, 0, Rat(0), Rat(1)),
                     ev(Kind::Backward, 0, 0, 0, Rat(4), Rat(2))};
  t.per_device[1] = {ev(Kind::Forward, 1, 0, 1, Rat(1), Rat(1)),
                     ev(Kind::Backward, 1, 0, 1, Rat(2), Rat(2))};
  t.makespan = Rat(6);
  return t;
}

}  // namespace

TEST_CASE("validate_cluster accepts a well-formed default") {
  ClusterSpec c = ClusterSpec::uniform(8, 8, Rat(1), Rat(1));
  CHECK(validate_cluster(c).empty());
}

TEST_CASE("validate_cluster flags boundary violations by field") {
  ClusterSpec c = ClusterSpec::uniform(8, 8, Rat(1), Rat(1));
  c.depth = 0;
  c.fwd_cost.clear();
  c.bwd_cost.clear();
  auto v = validate_cluster(c);
  REQUIRE_FALSE(v.empty());
  CHECK(v[0].find("depth") != std::string::npos);

  ClusterSpec z = ClusterSpec::uniform(8, 8, Rat(1), Rat(1));
  z.fwd_cost[3] = Rat(0);
  v = validate_cluster(z);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("fwd_cost[3]") != std::string::npos);

  ClusterSpec n = ClusterSpec::uniform(4, 4, Rat(1), Rat(1));
  n.nodes = {{0, 1}, {1, 2, 3}};  // device 1 listed twice
  v = validate_cluster(n);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("nodes") != std::string::npos);
}

TEST_CASE("node partition drives the cross-node gap") {
  ClusterSpec c = ClusterSpec::uniform(4, 4, Rat(1), Rat(2), Rat(0), Rat(1, 2));
  c.nodes = {{0, 1}, {2, 3}};
  c.inter_node_cost = Rat(3);
  CHECK(c.gap(0, 0) == Rat(0));
  CHECK(c.gap(0, 1) == Rat(1, 2));
  CHECK(c.gap(1, 2) == Rat(3));
  c.inter_node_cost.reset();
  CHECK(c.gap(1, 2) == Rat(1, 2));
}

TEST_CASE("validate_policy enforces per-policy shape rules") {
  ClusterSpec c8 = ClusterSpec::uniform(8, 8, Rat(1), Rat(2));
  PolicyConfig amdp;
  amdp.policy = Policy::AMDP;
  amdp.injection_limit = 2;
  amdp.num_pipelines = 4;
  amdp.accumulation_threshold = 8;
  amdp.num_minibatches = 64;
  CHECK(validate_policy(amdp, c8).empty());

  SECTION("odd depth rejected for AMDP") {
    ClusterSpec c5 = ClusterSpec::uniform(5, 5, Rat(1), Rat(2));
    PolicyConfig p = amdp;
    p.num_pipelines = 2;
    auto v = validate_policy(p, c5);
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].find("even") != std::string::npos);
  }
  SECTION("AMDP pins the injection limit unless overridden") {
    PolicyConfig p = amdp;
    p.injection_limit = 4;
    CHECK_FALSE(validate_policy(p, c8).empty());
    p.injection_override = true;
    p.accumulation_threshold = 16;
    CHECK(validate_policy(p, c8).empty());
  }
  SECTION("AMDP threshold must split evenly across pipelines") {
    PolicyConfig p = amdp;
    p.accumulation_threshold = 10;
    CHECK_FALSE(validate_policy(p, c8).empty());
    p.accumulation_threshold = 4;  // one minibatch per pipeline < injection_limit
    CHECK_FALSE(validate_policy(p, c8).empty());
  }
  SECTION("ZeRO is AMDP-only") {
    PolicyConfig p;
    p.policy = Policy::DAPPLE;
    p.injection_limit = 4;
    p.accumulation_threshold = 4;
    p.num_minibatches = 4;
    p.zero_enabled = true;
    ClusterSpec c4 = ClusterSpec::uniform(4, 4, Rat(1), Rat(2));
    auto v = validate_policy(p, c4);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("zero_enabled") != std::string::npos);
  }
  SECTION("Interleaved1F1B wants two chunks per device") {
    PolicyConfig p;
    p.policy = Policy::Interleaved1F1B;
    p.injection_limit = 4;
    p.accumulation_threshold = 4;
    p.num_minibatches = 8;
    ClusterSpec good = ClusterSpec::uniform(8, 4, Rat(1), Rat(2));
    CHECK(validate_policy(p, good).empty());
    ClusterSpec badc = ClusterSpec::uniform(8, 8, Rat(1), Rat(2));
    CHECK_FALSE(validate_policy(p, badc).empty());
  }
  SECTION("PipeDreamAsync injection bounded by depth") {
    PolicyConfig p;
    p.policy = Policy::PipeDreamAsync;
    p.injection_limit = 9;
    p.accumulation_threshold = 1;
    p.num_minibatches = 16;
    CHECK_FALSE(validate_policy(p, c8).empty());
    p.injection_limit = 8;
    CHECK(validate_policy(p, c8).empty());
  }
}

TEST_CASE("validate_causality passes a well-formed timeline") {
  ClusterSpec c = ClusterSpec::uniform(2, 2, Rat(1), Rat(2));
  CHECK(validate_causality(two_stage_timeline(), c).empty());
  CHECK(validate_non_overlap(two_stage_timeline()).empty());
}

TEST_CASE("validate_causality reports exactly one violation per inversion") {
  ClusterSpec c = ClusterSpec::uniform(2, 2, Rat(1), Rat(2));

  SECTION("backward before its forward") {
    // Last stage: the only predecessor of backward(1,0) is forward(1,0), so a
    // minimal shift inverts exactly one edge.
    Timeline t = two_stage_timeline();
    t.per_device[1][1].start = Rat(3, 2);
    auto v = validate_causality(t, c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("backward(1,0)") != std::string::npos);
    CHECK(v[0].find("forward(1,0)") != std::string::npos);
  }
  SECTION("backward chain inversion") {
    Timeline t = two_stage_timeline();
    t.per_device[0][1].start = Rat(3);  // backward(0,0) before backward(1,0) ends
    auto v = validate_causality(t, c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("backward(0,0)") != std::string::npos);
    CHECK(v[0].find("backward(1,0)") != std::string::npos);
  }
  SECTION("gross inversion is still caught and named") {
    Timeline t = two_stage_timeline();
    t.per_device[0][1].start = Rat(1, 2);  // backward(0,0) inside forward(0,0): breaks two edges
    auto v = validate_causality(t, c);
    bool named = false;
    for (const auto& s : v)
      if (s.find("backward(0,0)") != std::string::npos &&
          s.find("forward(0,0)") != std::string::npos)
        named = true;
    CHECK(named);
  }
  SECTION("forward chain inversion") {
    Timeline t = two_stage_timeline();
    t.per_device[1][0].start = Rat(1, 2);  // forward(1,0) starts before forward(0,0) ends
    auto v = validate_causality(t, c);
    REQUIRE(v.size() == 1);
    CHECK(v[0].find("forward(1,0)") != std::string::npos);
  }
  SECTION("cross-device gap is part of the bound") {
    ClusterSpec cc = c;
    cc.comm_cost = Rat(1);
    Timeline t = two_stage_timeline();  // forward(1,0) starts exactly at forward(0,0) end
    auto v = validate_causality(t, cc);
    REQUIRE_FALSE(v.empty());
    CHECK(v[0].find("transfer gap") != std::string::npos);
  }
  SECTION("device overlap is a separate audit") {
    Timeline t = two_stage_timeline();
    t.per_device[1][1].start = Rat(3, 2);
    CHECK_FALSE(validate_non_overlap(t).empty());
  }
}
