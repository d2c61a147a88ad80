#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "groupfed/delay.hpp"
#include "groupfed/errors.hpp"
#include "groupfed/model.hpp"
#include "groupfed/partition.hpp"
#include "groupfed/rng.hpp"
#include "groupfed/topology.hpp"

namespace groupfed {

// Node grouping: assign[node] -> group id, one medoid node per group.
struct Membership {
  std::vector<int> assign;
  std::vector<int> medoids;

  int num_groups() const { return static_cast<int>(medoids.size()); }
  int num_nodes() const { return static_cast<int>(assign.size()); }

  std::vector<std::vector<int>> groups() const {
    std::vector<std::vector<int>> g(medoids.size());
    for (std::size_t i = 0; i < assign.size(); ++i)
      g[static_cast<std::size_t>(assign[i])].push_back(static_cast<int>(i));
    return g;
  }

  void validate() const {
    std::set<int> seen_medoids;
    for (int m : medoids) {
      if (m < 0 || m >= num_nodes()) throw config_error("medoid out of range");
      if (!seen_medoids.insert(m).second) throw config_error("duplicate medoid");
    }
    for (int z : assign)
      if (z < 0 || z >= num_groups()) throw config_error("group id out of range");
    for (int k = 0; k < num_groups(); ++k)
      if (assign[static_cast<std::size_t>(medoids[static_cast<std::size_t>(k)])] != k)
        throw config_error("medoid not a member of its group");
    const auto g = groups();
    for (const auto& members : g)
      if (members.empty()) throw config_error("empty group");
  }

  static Membership single_group(int num_nodes) {
    Membership m;
    m.assign.assign(static_cast<std::size_t>(num_nodes), 0);
    m.medoids = {0};
    return m;
  }
};

// One group per network edge; the aggregation anchor is the lowest node id.
inline Membership edge_grouping(const Partition& part) {
  std::vector<int> edges;
  for (int e : part.node_to_edge)
    if (std::find(edges.begin(), edges.end(), e) == edges.end()) edges.push_back(e);
  std::sort(edges.begin(), edges.end());
  Membership m;
  m.assign.resize(part.node_to_edge.size());
  m.medoids.assign(edges.size(), -1);
  for (std::size_t i = 0; i < part.node_to_edge.size(); ++i) {
    const auto it = std::find(edges.begin(), edges.end(), part.node_to_edge[i]);
    const int g = static_cast<int>(it - edges.begin());
    m.assign[i] = g;
    if (m.medoids[static_cast<std::size_t>(g)] < 0) m.medoids[static_cast<std::size_t>(g)] = static_cast<int>(i);
  }
  m.validate();
  return m;
}

// Full-batch (or capped-subsample) gradients of every node at one shared
// model, plus their data-weighted sum. All grouping costs read from this.
struct GradientSnapshot {
  std::vector<ModelParams> per_node_grad;
  ModelParams global_grad;
  std::vector<double> weights;     // |D_i| / |D|
  std::vector<long> data_sizes;    // |D_i|
  long total_size = 0;             // |D|

  int num_nodes() const { return static_cast<int>(per_node_grad.size()); }
};

inline GradientSnapshot snapshot(const ModelParams& params, const Partition& part, int batch_cap,
                                 std::uint64_t seed, double l2 = 0.0) {
  if (batch_cap < 1) throw config_error("snapshot batch_cap must be >= 1");
  GradientSnapshot snap;
  const int n = part.num_nodes();
  snap.per_node_grad.reserve(static_cast<std::size_t>(n));
  snap.data_sizes.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const auto& data = part.per_node[static_cast<std::size_t>(i)];
    if (data.empty()) throw std::invalid_argument("node " + std::to_string(i) + " has no data");
    snap.data_sizes.push_back(static_cast<long>(data.size()));
    snap.total_size += static_cast<long>(data.size());
    if (static_cast<int>(data.size()) <= batch_cap) {
      snap.per_node_grad.push_back(gradient(params, data, l2));
    } else {
      Rng rng(Rng::derive(seed, 0x57a9 + static_cast<std::uint64_t>(i)));
      const auto picks = rng.sample_distinct(static_cast<int>(data.size()), batch_cap);
      std::vector<Example> sub;
      sub.reserve(picks.size());
      for (int p : picks) sub.push_back(data[static_cast<std::size_t>(p)]);
      snap.per_node_grad.push_back(gradient(params, sub, l2));
    }
  }
  snap.weights.resize(static_cast<std::size_t>(n));
  snap.global_grad = ModelParams::zeros(params.spec);
  for (int i = 0; i < n; ++i) {
    snap.weights[static_cast<std::size_t>(i)] =
        static_cast<double>(snap.data_sizes[static_cast<std::size_t>(i)]) / static_cast<double>(snap.total_size);
    const auto& g = snap.per_node_grad[static_cast<std::size_t>(i)].values;
    for (std::size_t j = 0; j < g.size(); ++j)
      snap.global_grad.values[j] += snap.weights[static_cast<std::size_t>(i)] * g[j];
  }
  return snap;
}

// Group-to-global gradient divergence of group k: the distance between the
// data-weighted mean gradient of the group's members and the global gradient.
// A tentative node (>= 0) is treated as a member of k for the evaluation,
// which makes the value depend on the candidate assignment.
inline double group_divergence(const GradientSnapshot& snap, const Membership& membership, int k,
                               int tentative = -1) {
  if (k < 0 || k >= membership.num_groups()) throw std::invalid_argument("no such group");
  double wsum = 0.0;
  std::vector<double> acc(snap.global_grad.values.size(), 0.0);
  auto add = [&](int i) {
    const double w = static_cast<double>(snap.data_sizes[static_cast<std::size_t>(i)]);
    const auto& g = snap.per_node_grad[static_cast<std::size_t>(i)].values;
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += w * g[j];
    wsum += w;
  };
  for (int i = 0; i < membership.num_nodes(); ++i)
    if (membership.assign[static_cast<std::size_t>(i)] == k && i != tentative) add(i);
  if (tentative >= 0) add(tentative);
  if (wsum <= 0.0) throw std::invalid_argument("group " + std::to_string(k) + " is empty");
  double dist_sq = 0.0;
  for (std::size_t j = 0; j < acc.size(); ++j) {
    const double d = acc[j] / wsum - snap.global_grad.values[j];
    dist_sq += d * d;
  }
  return std::sqrt(dist_sq);
}

enum class AssignIidMode { tentative, static_membership };

// Weights and normalizers of the combined grouping cost. The normalizing
// constants are captured from the first raw cost value seen in a run and
// frozen afterwards (a first value at or below 1e-12 falls back to 1 so a
// degenerate first evaluation cannot blow up the normalized costs).
struct CostWeights {
  double alpha_iid = 0.5;
  double alpha_comm = 0.5;
  AssignIidMode assign_iid_mode = AssignIidMode::tentative;

  double c_assign_iid = 1.0, c_assign_comm = 1.0;
  double c_update_iid = 1.0, c_update_comm = 1.0;
  bool assign_frozen = false;
  bool update_frozen = false;

  void validate() const {
    if (alpha_iid < 0.0 || alpha_comm < 0.0 || alpha_iid + alpha_comm <= 0.0)
      throw config_error("cost weights must be nonnegative with a positive sum");
  }
};

// Combined cost of assigning node i to group k: the group divergence with i
// tentatively included plus the hop distance from i to the group's medoid.
inline double cost_assign(const GradientSnapshot& snap, const Topology& topo,
                          const Membership& membership, CostWeights& weights, int i, int k) {
  const int medoid = membership.medoids.at(static_cast<std::size_t>(k));
  const int tentative = weights.assign_iid_mode == AssignIidMode::tentative ? i : -1;
  const double raw_iid = group_divergence(snap, membership, k, tentative);
  const double raw_comm =
      static_cast<double>(topo.hop[static_cast<std::size_t>(i)][static_cast<std::size_t>(medoid)]);
  if (!weights.assign_frozen) {
    weights.c_assign_iid = raw_iid > 1e-12 ? raw_iid : 1.0;
    weights.c_assign_comm = raw_comm > 1e-12 ? raw_comm : 1.0;
    weights.assign_frozen = true;
  }
  return weights.alpha_iid * raw_iid / weights.c_assign_iid +
         weights.alpha_comm * raw_comm / weights.c_assign_comm;
}

// Combined cost of promoting member i of group k to medoid: its data-weighted
// local-to-global divergence plus the sum of hop distances to the group.
inline double cost_update(const GradientSnapshot& snap, const Topology& topo,
                          const Membership& membership, CostWeights& weights, int i, int k) {
  if (membership.assign.at(static_cast<std::size_t>(i)) != k)
    throw std::invalid_argument("cost_update: node " + std::to_string(i) + " not in group " +
                                std::to_string(k));
  const double raw_iid =
      snap.weights[static_cast<std::size_t>(i)] *
      l2_distance(snap.per_node_grad[static_cast<std::size_t>(i)].values, snap.global_grad.values);
  double raw_comm = 0.0;
  for (int j = 0; j < membership.num_nodes(); ++j)
    if (membership.assign[static_cast<std::size_t>(j)] == k)
      raw_comm += static_cast<double>(topo.hop[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
  if (!weights.update_frozen) {
    weights.c_update_iid = raw_iid > 1e-12 ? raw_iid : 1.0;
    weights.c_update_comm = raw_comm > 1e-12 ? raw_comm : 1.0;
    weights.update_frozen = true;
  }
  return weights.alpha_iid * raw_iid / weights.c_update_iid +
         weights.alpha_comm * raw_comm / weights.c_update_comm;
}

// Total combined assign cost of a complete membership (each node evaluated in
// the group it already occupies).
inline double total_assign_cost(const GradientSnapshot& snap, const Topology& topo,
                                const Membership& membership, CostWeights& weights) {
  double total = 0.0;
  for (int i = 0; i < membership.num_nodes(); ++i)
    total += cost_assign(snap, topo, membership, weights, i,
                         membership.assign[static_cast<std::size_t>(i)]);
  return total;
}

struct NodeGroupingReport {
  std::vector<double> iteration_costs;  // total assign cost after init and each iteration
  int iterations = 0;
  bool reverted = false;  // last iteration undone because it would have raised the cost
};

namespace detail {

inline int pick_assign(const GradientSnapshot& snap, const Topology& topo, Membership& m,
                       CostWeights& weights, int i) {
  int best_k = 0;
  double best = std::numeric_limits<double>::infinity();
  const int old = m.assign[static_cast<std::size_t>(i)];
  // under the tentative reading the node leaves its old group while the
  // candidate groups are scored; the static reading scores the membership as is
  if (weights.assign_iid_mode == AssignIidMode::tentative)
    m.assign[static_cast<std::size_t>(i)] = -1;
  for (int k = 0; k < m.num_groups(); ++k) {
    const double c = cost_assign(snap, topo, m, weights, i, k);
    if (c < best) {
      best = c;
      best_k = k;
    }
  }
  m.assign[static_cast<std::size_t>(i)] = old;
  return best_k;
}

inline void repair_empty_groups(const GradientSnapshot& snap, const Topology& topo, Membership& m,
                                CostWeights& weights) {
  for (;;) {
    auto groups = m.groups();
    int empty = -1;
    for (int k = 0; k < m.num_groups(); ++k)
      if (groups[static_cast<std::size_t>(k)].empty()) {
        empty = k;
        break;
      }
    if (empty < 0) return;
    // largest group (ties: lowest id)
    int largest = 0;
    for (int k = 1; k < m.num_groups(); ++k)
      if (groups[static_cast<std::size_t>(k)].size() > groups[static_cast<std::size_t>(largest)].size())
        largest = k;
    // steal its costliest non-medoid member
    int victim = -1;
    double worst = -1.0;
    for (int i : groups[static_cast<std::size_t>(largest)]) {
      if (i == m.medoids[static_cast<std::size_t>(largest)]) continue;
      const double c = cost_assign(snap, topo, m, weights, i, largest);
      if (c > worst) {
        worst = c;
        victim = i;
      }
    }
    if (victim < 0) throw config_error("cannot repair empty group: no stealable node");
    m.assign[static_cast<std::size_t>(victim)] = empty;
    m.medoids[static_cast<std::size_t>(empty)] = victim;
  }
}

}  // namespace detail

namespace detail {

// one k-medoids descent from a seeded medoid set: alternating medoid-update
// and reassignment passes until the total assign cost is steady for
// max_steady consecutive iterations (or 50 iterations). Medoid nodes stay
// pinned to their own groups during reassignment, and an iteration that would
// raise the total cost is rolled back, so the cost sequence is non-increasing.
// Groups emptied by a pass are repaired by stealing the costliest node from
// the largest group.
inline Membership kmedoids_descent(const GradientSnapshot& snap, const Topology& topo,
                                   int num_groups, CostWeights& weights, std::vector<int> medoids,
                                   int max_steady, NodeGroupingReport& rep, double* final_cost) {
  const int n = snap.num_nodes();
  Membership m;
  m.medoids = std::move(medoids);
  std::sort(m.medoids.begin(), m.medoids.end());
  m.assign.assign(static_cast<std::size_t>(n), -1);
  std::vector<bool> is_medoid(static_cast<std::size_t>(n), false);
  for (int k = 0; k < num_groups; ++k) {
    m.assign[static_cast<std::size_t>(m.medoids[static_cast<std::size_t>(k)])] = k;
    is_medoid[static_cast<std::size_t>(m.medoids[static_cast<std::size_t>(k)])] = true;
  }

  // initial assignment
  for (int i = 0; i < n; ++i)
    if (!is_medoid[static_cast<std::size_t>(i)])
      m.assign[static_cast<std::size_t>(i)] = pick_assign(snap, topo, m, weights, i);
  repair_empty_groups(snap, topo, m, weights);

  double prev = total_assign_cost(snap, topo, m, weights);
  rep.iteration_costs.push_back(prev);

  int steady = 0;
  for (int iter = 0; iter < 50; ++iter) {
    const Membership backup = m;
    // medoid update
    for (int k = 0; k < num_groups; ++k) {
      int best_i = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (m.assign[static_cast<std::size_t>(i)] != k) continue;
        const double c = cost_update(snap, topo, m, weights, i, k);
        if (c < best) {
          best = c;
          best_i = i;
        }
      }
      m.medoids[static_cast<std::size_t>(k)] = best_i;
    }
    std::fill(is_medoid.begin(), is_medoid.end(), false);
    for (int med : m.medoids) is_medoid[static_cast<std::size_t>(med)] = true;
    // reassignment, committed node by node in index order
    for (int i = 0; i < n; ++i)
      if (!is_medoid[static_cast<std::size_t>(i)])
        m.assign[static_cast<std::size_t>(i)] = pick_assign(snap, topo, m, weights, i);
    repair_empty_groups(snap, topo, m, weights);

    const double total = total_assign_cost(snap, topo, m, weights);
    ++rep.iterations;
    if (total > prev) {
      m = backup;
      rep.reverted = true;
      rep.iteration_costs.push_back(prev);
      break;
    }
    rep.iteration_costs.push_back(total);
    if (std::abs(total - prev) < 1e-9) {
      if (++steady >= max_steady) {
        prev = total;
        break;
      }
    } else {
      steady = 0;
    }
    prev = total;
  }
  m.validate();
  *final_cost = prev;
  return m;
}

// PAM-style polish: best-improvement single-node moves on the summed combined
// assign cost, with medoids re-picked per affected group by the update cost.
// Group gradient sums are cached so each candidate move costs O(P + group^2).
inline void polish_membership(const GradientSnapshot& snap, const Topology& topo,
                              CostWeights& weights, Membership& m, NodeGroupingReport* rep,
                              int max_sweeps = 50) {
  const int n = snap.num_nodes();
  const int K = m.num_groups();
  if (K < 2) return;
  const std::size_t P = snap.global_grad.values.size();

  std::vector<std::vector<double>> gsum(static_cast<std::size_t>(K), std::vector<double>(P, 0.0));
  std::vector<double> wsum(static_cast<std::size_t>(K), 0.0);
  auto groups = m.groups();
  for (int k = 0; k < K; ++k)
    for (int i : groups[static_cast<std::size_t>(k)]) {
      const double w = static_cast<double>(snap.data_sizes[static_cast<std::size_t>(i)]);
      wsum[static_cast<std::size_t>(k)] += w;
      for (std::size_t j = 0; j < P; ++j)
        gsum[static_cast<std::size_t>(k)][j] += w * snap.per_node_grad[static_cast<std::size_t>(i)].values[j];
    }
  auto divergence_of = [&](const std::vector<double>& sum, double w) {
    double acc = 0.0;
    for (std::size_t j = 0; j < P; ++j) {
      const double d = sum[j] / w - snap.global_grad.values[j];
      acc += d * d;
    }
    return std::sqrt(acc);
  };
  // node-quality part of the update cost is membership independent
  std::vector<double> update_iid(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    update_iid[static_cast<std::size_t>(i)] =
        weights.alpha_iid / weights.c_update_iid * snap.weights[static_cast<std::size_t>(i)] *
        l2_distance(snap.per_node_grad[static_cast<std::size_t>(i)].values, snap.global_grad.values);
  auto pick_medoid = [&](const std::vector<int>& members) {
    int best = members.front();
    double best_cost = std::numeric_limits<double>::infinity();
    for (int i : members) {
      double hops = 0.0;
      for (int j : members)
        hops += static_cast<double>(topo.hop[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      const double c = update_iid[static_cast<std::size_t>(i)] +
                       weights.alpha_comm / weights.c_update_comm * hops;
      if (c < best_cost) {
        best_cost = c;
        best = i;
      }
    }
    return best;
  };
  auto group_term = [&](const std::vector<int>& members, const std::vector<double>& sum, double w,
                        int medoid) {
    double hops = 0.0;
    for (int i : members)
      hops += static_cast<double>(topo.hop[static_cast<std::size_t>(i)][static_cast<std::size_t>(medoid)]);
    return static_cast<double>(members.size()) * weights.alpha_iid * divergence_of(sum, w) /
               weights.c_assign_iid +
           weights.alpha_comm * hops / weights.c_assign_comm;
  };

  std::vector<double> term(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k)
    term[static_cast<std::size_t>(k)] =
        group_term(groups[static_cast<std::size_t>(k)], gsum[static_cast<std::size_t>(k)],
                   wsum[static_cast<std::size_t>(k)], m.medoids[static_cast<std::size_t>(k)]);

  // candidate edits: move one node, or exchange a pair across groups; both
  // touch exactly two groups, so the edit is scored from the cached sums
  struct Edit {
    int a, b;                  // affected groups
    std::vector<int> mem_a, mem_b;
    std::vector<double> sum_a, sum_b;
    double w_a, w_b;
  };
  auto score_and_commit = [&](Edit e) {
    const int med_a = pick_medoid(e.mem_a);
    const int med_b = pick_medoid(e.mem_b);
    const double t_a = group_term(e.mem_a, e.sum_a, e.w_a, med_a);
    const double t_b = group_term(e.mem_b, e.sum_b, e.w_b, med_b);
    const double delta =
        t_a + t_b - term[static_cast<std::size_t>(e.a)] - term[static_cast<std::size_t>(e.b)];
    if (delta >= -1e-12) return false;
    for (int x : e.mem_a) m.assign[static_cast<std::size_t>(x)] = e.a;
    for (int x : e.mem_b) m.assign[static_cast<std::size_t>(x)] = e.b;
    groups[static_cast<std::size_t>(e.a)] = std::move(e.mem_a);
    groups[static_cast<std::size_t>(e.b)] = std::move(e.mem_b);
    gsum[static_cast<std::size_t>(e.a)] = std::move(e.sum_a);
    gsum[static_cast<std::size_t>(e.b)] = std::move(e.sum_b);
    wsum[static_cast<std::size_t>(e.a)] = e.w_a;
    wsum[static_cast<std::size_t>(e.b)] = e.w_b;
    m.medoids[static_cast<std::size_t>(e.a)] = med_a;
    m.medoids[static_cast<std::size_t>(e.b)] = med_b;
    term[static_cast<std::size_t>(e.a)] = t_a;
    term[static_cast<std::size_t>(e.b)] = t_b;
    return true;
  };
  auto node_weight = [&](int i) { return static_cast<double>(snap.data_sizes[static_cast<std::size_t>(i)]); };
  auto shift_sum = [&](std::vector<double> sum, int i, double sign) {
    for (std::size_t j = 0; j < P; ++j)
      sum[j] += sign * node_weight(i) * snap.per_node_grad[static_cast<std::size_t>(i)].values[j];
    return sum;
  };

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool improved = false;
    // single-node moves
    for (int i = 0; i < n; ++i) {
      const int from = m.assign[static_cast<std::size_t>(i)];
      if (groups[static_cast<std::size_t>(from)].size() <= 1) continue;
      for (int to = 0; to < K; ++to) {
        if (to == from) continue;
        Edit e;
        e.a = from;
        e.b = to;
        for (int x : groups[static_cast<std::size_t>(from)])
          if (x != i) e.mem_a.push_back(x);
        e.mem_b = groups[static_cast<std::size_t>(to)];
        e.mem_b.push_back(i);
        std::sort(e.mem_b.begin(), e.mem_b.end());
        e.sum_a = shift_sum(gsum[static_cast<std::size_t>(from)], i, -1.0);
        e.sum_b = shift_sum(gsum[static_cast<std::size_t>(to)], i, +1.0);
        e.w_a = wsum[static_cast<std::size_t>(from)] - node_weight(i);
        e.w_b = wsum[static_cast<std::size_t>(to)] + node_weight(i);
        if (score_and_commit(std::move(e))) {
          improved = true;
          break;
        }
      }
    }
    // pairwise exchanges across groups
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        const int a = m.assign[static_cast<std::size_t>(i)];
        const int b = m.assign[static_cast<std::size_t>(j)];
        if (a == b) continue;
        Edit e;
        e.a = a;
        e.b = b;
        for (int x : groups[static_cast<std::size_t>(a)]) e.mem_a.push_back(x == i ? j : x);
        for (int x : groups[static_cast<std::size_t>(b)]) e.mem_b.push_back(x == j ? i : x);
        std::sort(e.mem_a.begin(), e.mem_a.end());
        std::sort(e.mem_b.begin(), e.mem_b.end());
        e.sum_a = shift_sum(shift_sum(gsum[static_cast<std::size_t>(a)], i, -1.0), j, +1.0);
        e.sum_b = shift_sum(shift_sum(gsum[static_cast<std::size_t>(b)], j, -1.0), i, +1.0);
        e.w_a = wsum[static_cast<std::size_t>(a)] - node_weight(i) + node_weight(j);
        e.w_b = wsum[static_cast<std::size_t>(b)] - node_weight(j) + node_weight(i);
        if (score_and_commit(std::move(e))) improved = true;
      }
    }
    if (!improved) break;
    if (rep) rep->iteration_costs.push_back(total_assign_cost(snap, topo, m, weights));
  }
  m.validate();
}

}  // namespace detail

// k-medoids node grouping over the combined assign/update costs. The descent
// runs either from every distinct medoid set (when the instance is small
// enough to enumerate them) or from `restarts` seeded random medoid sets,
// keeps the cheapest result, and finishes with a move/exchange polish; a lone
// descent gets stuck in poor local optima often enough to matter on small
// instances. The report reflects the winning descent plus the polish sweeps.
inline Membership node_grouping(const GradientSnapshot& snap, const Topology& topo, int num_groups,
                                CostWeights& weights, std::uint64_t seed, int max_steady = 1,
                                NodeGroupingReport* report = nullptr, int restarts = 8) {
  weights.validate();
  const int n = snap.num_nodes();
  if (num_groups < 1 || num_groups > n)
    throw config_error("num_groups must be in [1, num_nodes]");
  if (max_steady < 1 || restarts < 1) throw config_error("max_steady and restarts must be >= 1");

  std::vector<std::vector<int>> inits;
  double combos = 1.0;
  for (int i = 0; i < num_groups; ++i) combos *= static_cast<double>(n - i) / (i + 1);
  if (combos <= 64.0) {
    // enumerate every K-subset of nodes as the initial medoid set
    std::vector<int> pick(static_cast<std::size_t>(num_groups));
    for (int i = 0; i < num_groups; ++i) pick[static_cast<std::size_t>(i)] = i;
    for (;;) {
      inits.push_back(pick);
      int j = num_groups - 1;
      while (j >= 0 && pick[static_cast<std::size_t>(j)] == n - num_groups + j) --j;
      if (j < 0) break;
      ++pick[static_cast<std::size_t>(j)];
      for (int x = j + 1; x < num_groups; ++x)
        pick[static_cast<std::size_t>(x)] = pick[static_cast<std::size_t>(x - 1)] + 1;
    }
  } else {
    for (int r = 0; r < restarts; ++r) {
      Rng rng(Rng::derive(seed, 0x6e47 + static_cast<std::uint64_t>(r)));
      inits.push_back(rng.sample_distinct(n, num_groups));
    }
  }

  Membership best;
  NodeGroupingReport best_rep;
  double best_cost = std::numeric_limits<double>::infinity();
  for (auto& medoids : inits) {
    NodeGroupingReport rep;
    double cost = 0.0;
    Membership m = detail::kmedoids_descent(snap, topo, num_groups, weights, std::move(medoids),
                                            max_steady, rep, &cost);
    if (cost < best_cost) {
      best_cost = cost;
      best = std::move(m);
      best_rep = std::move(rep);
    }
  }
  detail::polish_membership(snap, topo, weights, best, &best_rep);
  if (report) *report = best_rep;
  return best;
}

// Exact minimizer over all surjective assignments, medoids chosen per group by
// the update cost. Only feasible on tiny instances; used as a test oracle.
inline std::pair<Membership, double> brute_force_grouping(const GradientSnapshot& snap,
                                                          const Topology& topo, int num_groups,
                                                          CostWeights& weights) {
  const int n = snap.num_nodes();
  if (n > 10 || num_groups > 3) throw std::invalid_argument("brute_force_grouping: instance too large");
  if (num_groups < 1 || num_groups > n) throw std::invalid_argument("num_groups out of range");

  Membership best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<int> z(static_cast<std::size_t>(n), 0);
  const long combos = static_cast<long>(std::pow(static_cast<double>(num_groups), n) + 0.5);
  for (long code = 0; code < combos; ++code) {
    long c = code;
    std::vector<int> count(static_cast<std::size_t>(num_groups), 0);
    for (int i = 0; i < n; ++i) {
      z[static_cast<std::size_t>(i)] = static_cast<int>(c % num_groups);
      ++count[static_cast<std::size_t>(z[static_cast<std::size_t>(i)])];
      c /= num_groups;
    }
    if (std::find(count.begin(), count.end(), 0) != count.end()) continue;

    Membership m;
    m.assign = z;
    m.medoids.assign(static_cast<std::size_t>(num_groups), -1);
    for (int k = 0; k < num_groups; ++k) {
      double best_u = std::numeric_limits<double>::infinity();
      for (int i = 0; i < n; ++i) {
        if (z[static_cast<std::size_t>(i)] != k) continue;
        const double u = cost_update(snap, topo, m, weights, i, k);
        if (u < best_u) {
          best_u = u;
          m.medoids[static_cast<std::size_t>(k)] = i;
        }
      }
    }
    const double total = total_assign_cost(snap, topo, m, weights);
    if (total < best_cost) {
      best_cost = total;
      best = m;
    }
  }
  best.validate();
  return {best, best_cost};
}

}  // namespace groupfed
