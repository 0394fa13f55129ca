#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ppsim/rational.hpp"

namespace ppsim {

enum class Kind : std::uint8_t { Forward, Backward, Reduce, Broadcast, Update };

// Dispatch priority among simultaneously released tasks.
inline int kind_rank(Kind k) { return static_cast<int>(k); }

inline const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Forward: return "Forward";
    case Kind::Backward: return "Backward";
    case Kind::Reduce: return "Reduce";
    case Kind::Broadcast: return "Broadcast";
    case Kind::Update: return "Update";
  }
  return "?";
}

enum class Policy : std::uint8_t {
  AMDP,
  DAPPLE,
  GPipe,
  Interleaved1F1B,
  Chimera,
  PipeDreamAsync,
};

inline const char* policy_name(Policy p) {
  switch (p) {
    case Policy::AMDP: return "AMDP";
    case Policy::DAPPLE: return "DAPPLE";
    case Policy::GPipe: return "GPipe";
    case Policy::Interleaved1F1B: return "Interleaved1F1B";
    case Policy::Chimera: return "Chimera";
    case Policy::PipeDreamAsync: return "PipeDreamAsync";
  }
  return "?";
}

inline std::optional<Policy> policy_from_name(const std::string& s) {
  for (Policy p : {Policy::AMDP, Policy::DAPPLE, Policy::GPipe, Policy::Interleaved1F1B,
                   Policy::Chimera, Policy::PipeDreamAsync}) {
    if (s == policy_name(p)) return p;
  }
  return std::nullopt;
}

struct ClusterSpec {
  int depth = 0;    // number of model stages
  int devices = 0;  // number of devices
  std::vector<Rat> fwd_cost;  // per stage
  std::vector<Rat> bwd_cost;  // per stage
  Rat update_cost = Rat(0);
  Rat comm_cost = Rat(0);  // point-to-point gap between dependent cross-device tasks
  // Partition of devices into node groups; empty means one node. Cross-node
  // dependencies pay inter_node_cost instead of comm_cost when it is set.
  std::vector<std::vector<int>> nodes;
  std::optional<Rat> inter_node_cost;

  static ClusterSpec uniform(int depth, int devices, Rat fwd, Rat bwd, Rat update = Rat(0),
                             Rat comm = Rat(0)) {
    ClusterSpec c;
    c.depth = depth;
    c.devices = devices;
    c.fwd_cost.assign(static_cast<std::size_t>(depth), fwd);
    c.bwd_cost.assign(static_cast<std::size_t>(depth), bwd);
    c.update_cost = update;
    c.comm_cost = comm;
    return c;
  }

  int node_of(int device) const {
    for (std::size_t g = 0; g < nodes.size(); ++g)
      for (int d : nodes[g])
        if (d == device) return static_cast<int>(g);
    return 0;
  }

  // Latency inserted between a task and a dependent task on another device.
  Rat gap(int from_device, int to_device) const {
    if (from_device == to_device) return Rat(0);
    if (!nodes.empty() && inter_node_cost && node_of(from_device) != node_of(to_device))
      return *inter_node_cost;
    return comm_cost;
  }

  Rat mean_fwd() const {
    Rat s(0);
    for (const Rat& r : fwd_cost) s += r;
    return s / Rat(static_cast<std::int64_t>(fwd_cost.size()));
  }
  Rat mean_bwd() const {
    Rat s(0);
    for (const Rat& r : bwd_cost) s += r;
    return s / Rat(static_cast<std::int64_t>(bwd_cost.size()));
  }
};

struct PolicyConfig {
  Policy policy = Policy::DAPPLE;
  int injection_limit = 1;        // n: minibatches stage 0 reads before its first backward
  int num_pipelines = 1;          // concurrent pipelines (AMDP/Chimera)
  int accumulation_threshold = 1; // minibatches per gradient-accumulation window
  int num_minibatches = 1;
  bool zero_enabled = false;      // partition optimizer state across replica owners
  bool injection_override = false;  // lift the AMDP n=2 rule for staleness sweeps
};

struct TaskEvent {
  Kind kind = Kind::Forward;
  int stage = 0;
  int minibatch = 0;  // Update/Reduce/Broadcast carry the window index
  int pipeline = 0;
  int device = 0;
  Rat start;
  Rat duration;
  bool preloaded = false;
  int window = 0;

  Rat finish() const { return start + duration; }
};

struct Timeline {
  Policy policy = Policy::DAPPLE;
  int depth = 0;
  int devices = 0;
  int threshold = 1;  // accumulation window size, for window bookkeeping
  std::vector<std::vector<TaskEvent>> per_device;  // time-ordered per device
  Rat makespan;

  int window_of(const TaskEvent& e) const { return e.window; }

  std::vector<TaskEvent> flat() const {
    std::vector<TaskEvent> all;
    for (const auto& dev : per_device) all.insert(all.end(), dev.begin(), dev.end());
    return all;
  }
};

struct MismatchReport {
  // (stage, minibatch) -> parameter updates landing between forward and backward
  std::map<std::pair<int, int>, int> entries;
  std::map<int, int> max_per_stage;
  std::vector<std::pair<int, int>> missing;  // forward present, backward absent

  int max_overall() const {
    int m = 0;
    for (const auto& [k, v] : entries) m = std::max(m, v);
    return m;
  }
};

struct MemoryModel {
  Rat weight_per_stage{1};
  Rat activation_per_stage_per_minibatch{1};
  Rat optimizer_state_multiplier{2};
  Rat gradient_multiplier{1};
};

struct WindowEntry {
  int window = 0;
  std::vector<int> mismatched;  // minibatches whose forward/backward straddle an update
  int window_size = 0;
  int update_count = 0;
};

struct WindowReport {
  std::vector<WindowEntry> windows;
};

struct DeviceMemory {
  Rat weight;
  Rat activation_peak;
  Rat gradient;
  Rat optimizer_state;
};

// Closed-form per-policy figures (weight range covers schemes that stash
// several versions; a missing bubble value means "approximately zero").
struct Table1View {
  std::optional<Rat> bubble;
  Rat weight_min;
  Rat weight_max;
  Rat activation_peak;
};

struct MemoryReport {
  std::vector<DeviceMemory> per_device;
  Table1View table1;
};

struct Verdict {
  bool pass = false;
  std::string detail;
};

}  // namespace ppsim
