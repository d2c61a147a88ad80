#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <string>
#include <vector>

#include "groupfed/errors.hpp"
#include "groupfed/rng.hpp"

namespace groupfed {

// Host/switch network with a precomputed host-to-host hop matrix. Hosts carry
// the node ids used by the data partition; host i sits on edge id
// host_edge[i], and edge ids 0..num_edges-1 are the populated edge switches
// in order, so a round-robin partition lines up with a round-robin topology.
struct Topology {
  std::string kind;                           // "fat_tree", "jellyfish", "custom"
  int num_hosts = 0;
  int num_edges = 0;                          // populated edge switches
  std::vector<int> host_edge;                 // host -> edge id
  std::vector<int> edge_switch;               // edge id -> switch id
  std::vector<std::vector<int>> switch_adj;   // switch graph adjacency
  std::vector<std::vector<int>> hop;          // host-to-host hop counts
  double link_speed = 10e6;                   // bytes/second
  double proc_speed = 5e9;                    // FLOP/second
};

namespace detail {

inline std::vector<int> bfs_switch_dist(const std::vector<std::vector<int>>& adj, int src) {
  std::vector<int> dist(adj.size(), -1);
  std::deque<int> q{src};
  dist[static_cast<std::size_t>(src)] = 0;
  while (!q.empty()) {
    const int u = q.front();
    q.pop_front();
    for (int v : adj[static_cast<std::size_t>(u)])
      if (dist[static_cast<std::size_t>(v)] < 0) {
        dist[static_cast<std::size_t>(v)] = dist[static_cast<std::size_t>(u)] + 1;
        q.push_back(v);
      }
  }
  return dist;
}

// Hosts hang one link below their switch: hop(a,b) = 2 + switch distance.
inline void fill_host_hops(Topology& topo) {
  const std::size_t S = topo.switch_adj.size();
  std::vector<std::vector<int>> sdist(S);
  for (std::size_t s = 0; s < S; ++s) sdist[s] = bfs_switch_dist(topo.switch_adj, static_cast<int>(s));
  topo.hop.assign(static_cast<std::size_t>(topo.num_hosts),
                  std::vector<int>(static_cast<std::size_t>(topo.num_hosts), 0));
  for (int a = 0; a < topo.num_hosts; ++a) {
    for (int b = 0; b < topo.num_hosts; ++b) {
      if (a == b) continue;
      const int sa = topo.edge_switch[static_cast<std::size_t>(topo.host_edge[static_cast<std::size_t>(a)])];
      const int sb = topo.edge_switch[static_cast<std::size_t>(topo.host_edge[static_cast<std::size_t>(b)])];
      const int d = sdist[static_cast<std::size_t>(sa)][static_cast<std::size_t>(sb)];
      if (d < 0) throw config_error("topology is disconnected");
      topo.hop[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = d + 2;
    }
  }
}

}  // namespace detail

// Metric sanity on the hop matrix; run on every constructed topology.
inline void validate_topology(const Topology& topo) {
  const int n = topo.num_hosts;
  for (int i = 0; i < n; ++i) {
    if (topo.hop[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] != 0)
      throw config_error("hop[i][i] != 0");
    for (int j = 0; j < n; ++j) {
      const int h = topo.hop[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      if (h < 0) throw config_error("negative hop count");
      if (h != topo.hop[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)])
        throw config_error("hop matrix not symmetric");
    }
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        if (topo.hop[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] >
            topo.hop[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] +
                topo.hop[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)])
          throw config_error("hop matrix violates the triangle inequality");
}

// Standard 3-tier k-ary fat tree: k pods of k/2 edge + k/2 aggregation
// switches, (k/2)^2 core switches. Hosts are attached round-robin over the
// first ceil(num_hosts / nodes_per_edge) edge switches so that edge ids match
// a round-robin data partition. num_hosts <= 0 fills every edge switch.
inline Topology build_fat_tree(int k_ary, int nodes_per_edge, std::uint64_t /*seed*/,
                               int num_hosts = -1, int num_edges_override = -1) {
  if (k_ary < 2 || k_ary % 2 != 0) throw config_error("fat tree arity must be even and >= 2");
  if (nodes_per_edge < 1) throw config_error("nodes_per_edge must be >= 1");
  const int half = k_ary / 2;
  const int num_edge_sw = k_ary * half;        // ids [0, num_edge_sw)
  const int num_agg_sw = k_ary * half;         // ids [num_edge_sw, 2*num_edge_sw)
  const int num_core_sw = half * half;         // ids [2*num_edge_sw, ...)
  Topology topo;
  topo.kind = "fat_tree";
  topo.switch_adj.resize(static_cast<std::size_t>(num_edge_sw + num_agg_sw + num_core_sw));
  auto connect = [&](int a, int b) {
    topo.switch_adj[static_cast<std::size_t>(a)].push_back(b);
    topo.switch_adj[static_cast<std::size_t>(b)].push_back(a);
  };
  for (int pod = 0; pod < k_ary; ++pod) {
    for (int e = 0; e < half; ++e)
      for (int a = 0; a < half; ++a) connect(pod * half + e, num_edge_sw + pod * half + a);
    for (int a = 0; a < half; ++a)
      for (int c = 0; c < half; ++c) connect(num_edge_sw + pod * half + a, 2 * num_edge_sw + a * half + c);
  }

  int hosts = num_hosts > 0 ? num_hosts : num_edge_sw * nodes_per_edge;
  const int edges_used =
      num_edges_override > 0 ? num_edges_override : (hosts + nodes_per_edge - 1) / nodes_per_edge;
  if (edges_used > num_edge_sw)
    throw config_error("fat tree capacity exceeded: " + std::to_string(hosts) + " hosts need " +
                       std::to_string(edges_used) + " edge switches, have " + std::to_string(num_edge_sw));
  if ((hosts + edges_used - 1) / edges_used > nodes_per_edge)
    throw config_error("fat tree capacity exceeded: edge switches would take more than " +
                       std::to_string(nodes_per_edge) + " hosts");
  topo.num_hosts = hosts;
  topo.num_edges = edges_used;
  topo.edge_switch.resize(static_cast<std::size_t>(edges_used));
  for (int e = 0; e < edges_used; ++e) topo.edge_switch[static_cast<std::size_t>(e)] = e;
  topo.host_edge.resize(static_cast<std::size_t>(hosts));
  for (int i = 0; i < hosts; ++i) topo.host_edge[static_cast<std::size_t>(i)] = i % edges_used;

  detail::fill_host_hops(topo);
  validate_topology(topo);
  return topo;
}

// Jellyfish: a seeded random regular switch graph. Construction retries the
// stub-matching up to 100 times until it yields a simple connected graph.
inline Topology build_jellyfish(int num_switches, int degree, int nodes_per_switch,
                                std::uint64_t seed, int num_hosts = -1) {
  if (num_switches < 2 || degree < 1 || degree >= num_switches)
    throw config_error("jellyfish requires 1 <= degree < num_switches >= 2");
  if ((static_cast<long>(num_switches) * degree) % 2 != 0)
    throw config_error("jellyfish requires num_switches * degree to be even");
  if (nodes_per_switch < 1) throw config_error("nodes_per_switch must be >= 1");

  Rng rng(Rng::derive(seed, 0x9e11f));
  Topology topo;
  topo.kind = "jellyfish";
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    std::vector<int> stubs;
    stubs.reserve(static_cast<std::size_t>(num_switches) * degree);
    for (int s = 0; s < num_switches; ++s)
      for (int d = 0; d < degree; ++d) stubs.push_back(s);
    rng.shuffle(stubs);
    std::vector<std::vector<bool>> seen(static_cast<std::size_t>(num_switches),
                                        std::vector<bool>(static_cast<std::size_t>(num_switches), false));
    topo.switch_adj.assign(static_cast<std::size_t>(num_switches), {});
    bool simple = true;
    for (std::size_t i = 0; i + 1 < stubs.size() && simple; i += 2) {
      const int a = stubs[i], b = stubs[i + 1];
      if (a == b || seen[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) {
        simple = false;
        break;
      }
      seen[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = true;
      seen[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = true;
      topo.switch_adj[static_cast<std::size_t>(a)].push_back(b);
      topo.switch_adj[static_cast<std::size_t>(b)].push_back(a);
    }
    if (!simple) continue;
    const auto dist = detail::bfs_switch_dist(topo.switch_adj, 0);
    ok = std::none_of(dist.begin(), dist.end(), [](int d) { return d < 0; });
  }
  if (!ok) throw config_error("jellyfish construction failed after 100 attempts");

  int hosts = num_hosts > 0 ? num_hosts : num_switches * nodes_per_switch;
  if ((hosts + num_switches - 1) / num_switches > nodes_per_switch)
    throw config_error("jellyfish capacity exceeded");
  topo.num_hosts = hosts;
  topo.num_edges = std::min(hosts, num_switches);
  topo.edge_switch.resize(static_cast<std::size_t>(topo.num_edges));
  for (int e = 0; e < topo.num_edges; ++e) topo.edge_switch[static_cast<std::size_t>(e)] = e;
  topo.host_edge.resize(static_cast<std::size_t>(hosts));
  for (int i = 0; i < hosts; ++i) topo.host_edge[static_cast<std::size_t>(i)] = i % topo.num_edges;

  detail::fill_host_hops(topo);
  validate_topology(topo);
  return topo;
}

}  // namespace groupfed
