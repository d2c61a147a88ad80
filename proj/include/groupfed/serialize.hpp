#pragma once

#include <string>

#include <json.hpp>

#include "groupfed/csvio.hpp"
#include "groupfed/grouping.hpp"
#include "groupfed/partition.hpp"
#include "groupfed/topology.hpp"

namespace groupfed {

using json = nlohmann::json;

// JSON schema: node-id -> {edge, example indices into the train split},
// plus the replacement-fallback record. Enough to audit a run's data layout.
inline json partition_to_json(const Partition& part) {
  json nodes = json::object();
  for (int i = 0; i < part.num_nodes(); ++i) {
    json entry;
    entry["edge"] = part.node_to_edge[static_cast<std::size_t>(i)];
    entry["examples"] = part.per_node_indices[static_cast<std::size_t>(i)];
    nodes[std::to_string(i)] = entry;
  }
  json out;
  out["num_edges"] = part.num_edges;
  out["train_size"] = part.train.examples.size();
  out["num_classes"] = part.train.num_classes;
  out["nodes"] = nodes;
  out["replacement_fallback_nodes"] = part.replacement_fallback_nodes;
  return out;
}

inline json topology_to_json(const Topology& topo) {
  json out;
  out["kind"] = topo.kind;
  out["num_hosts"] = topo.num_hosts;
  out["num_edges"] = topo.num_edges;
  out["host_edge"] = topo.host_edge;
  out["edge_switch"] = topo.edge_switch;
  out["switch_adj"] = topo.switch_adj;
  out["link_speed"] = topo.link_speed;
  out["proc_speed"] = topo.proc_speed;
  return out;
}

// Rebuilds the hop matrix from the serialized switch graph.
inline Topology topology_from_json(const json& j) {
  Topology topo;
  topo.kind = j.value("kind", std::string("custom"));
  topo.num_hosts = j.at("num_hosts").get<int>();
  topo.num_edges = j.at("num_edges").get<int>();
  topo.host_edge = j.at("host_edge").get<std::vector<int>>();
  topo.edge_switch = j.at("edge_switch").get<std::vector<int>>();
  topo.switch_adj = j.at("switch_adj").get<std::vector<std::vector<int>>>();
  topo.link_speed = j.value("link_speed", 10e6);
  topo.proc_speed = j.value("proc_speed", 5e9);
  detail::fill_host_hops(topo);
  validate_topology(topo);
  return topo;
}

inline json membership_to_json(const Membership& m) {
  json assign = json::object();
  for (int i = 0; i < m.num_nodes(); ++i) assign[std::to_string(i)] = m.assign[static_cast<std::size_t>(i)];
  json medoids = json::object();
  for (int k = 0; k < m.num_groups(); ++k) medoids[std::to_string(k)] = m.medoids[static_cast<std::size_t>(k)];
  json out;
  out["assign"] = assign;
  out["medoids"] = medoids;
  out["num_groups"] = m.num_groups();
  return out;
}

inline void save_json(const json& j, const std::string& path) { write_text_file(path, j.dump(2) + "\n"); }

inline json load_json(const std::string& path) { return json::parse(read_text_file(path)); }

}  // namespace groupfed
