#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "groupfed/errors.hpp"
#include "groupfed/model.hpp"
#include "groupfed/topology.hpp"

namespace groupfed {

// Message size and per-step compute load of one model.
struct DelayModel {
  double model_bytes = 0.0;     // 8 bytes per parameter
  double flops_per_step = 0.0;  // 6 * param_count * max_batch (fwd + bwd estimate)
};

inline DelayModel make_delay_model(const ModelSpec& spec, int max_batch) {
  DelayModel dm;
  dm.model_bytes = 8.0 * spec.param_count();
  dm.flops_per_step = 6.0 * spec.param_count() * static_cast<double>(max_batch);
  return dm;
}

// Two analytic round models:
//  - bottleneck: the round is gated by the farthest participant; delay is
//    2 * (bytes/link_speed) * max hop (uplink + broadcast).
//  - load: every message serializes on the shared fabric; delay is
//    2 * (bytes/link_speed) * sum of hop counts over messages. This is the
//    model under which per-edge combined aggregation reduces round time.
enum class DelayKind { bottleneck, load };

inline DelayKind parse_delay_kind(const std::string& s) {
  if (s == "bottleneck") return DelayKind::bottleneck;
  if (s == "load") return DelayKind::load;
  throw config_error("unknown delay kind '" + s + "' (bottleneck|load)");
}

// Simulated seconds for one aggregation round: every participant ships its
// model to the server and receives the result back. With combined=true the
// participants on each edge first fold their models at a per-edge local
// server (the server itself if it sits on that edge, else the lowest
// participant id), and only one message per edge crosses to the server.
inline double agg_delay(const Topology& topo, const DelayModel& dm, std::span<const int> participants,
                        int server, bool combined = false, DelayKind kind = DelayKind::bottleneck) {
  if (participants.empty()) throw std::invalid_argument("agg_delay with no participants");
  if (server < 0 || server >= topo.num_hosts) throw std::out_of_range("server not in topology");
  for (int p : participants)
    if (p < 0 || p >= topo.num_hosts) throw std::out_of_range("participant not in topology");

  const double unit = dm.model_bytes / topo.link_speed;
  const auto& hop = topo.hop;

  if (!combined) {
    double agg = 0.0;
    for (int p : participants) {
      const double h = static_cast<double>(hop[static_cast<std::size_t>(p)][static_cast<std::size_t>(server)]);
      agg = kind == DelayKind::bottleneck ? std::max(agg, h) : agg + h;
    }
    return 2.0 * unit * agg;
  }

  // group participants by edge, pick each edge's local aggregation server
  std::map<int, std::vector<int>> by_edge;
  for (int p : participants) by_edge[topo.host_edge[static_cast<std::size_t>(p)]].push_back(p);
  const int server_edge = topo.host_edge[static_cast<std::size_t>(server)];

  double intra = 0.0, inter = 0.0;
  for (auto& [edge, members] : by_edge) {
    std::sort(members.begin(), members.end());
    const int local = edge == server_edge ? server : members.front();
    double edge_intra = 0.0;
    for (int p : members) {
      const double h = static_cast<double>(hop[static_cast<std::size_t>(p)][static_cast<std::size_t>(local)]);
      edge_intra = kind == DelayKind::bottleneck ? std::max(edge_intra, h) : edge_intra + h;
    }
    const double h_out =
        static_cast<double>(hop[static_cast<std::size_t>(local)][static_cast<std::size_t>(server)]);
    if (kind == DelayKind::bottleneck) {
      intra = std::max(intra, edge_intra);
      inter = std::max(inter, h_out);
    } else {
      intra += edge_intra;
      inter += h_out;
    }
  }
  return 2.0 * unit * (intra + inter);
}

// Simulated seconds for `steps` local update steps on one node.
inline double compute_delay(const DelayModel& dm, const Topology& topo, long steps) {
  if (steps < 0) throw std::invalid_argument("negative step count");
  return static_cast<double>(steps) * dm.flops_per_step / topo.proc_speed;
}

}  // namespace groupfed
