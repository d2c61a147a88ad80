#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "groupfed/dataset.hpp"
#include "groupfed/errors.hpp"
#include "groupfed/rng.hpp"

namespace groupfed {

enum class Fraction { tenth, quarter, half };

inline double fraction_value(Fraction f) {
  switch (f) {
    case Fraction::tenth: return 0.10;
    case Fraction::quarter: return 0.25;
    case Fraction::half: return 0.50;
  }
  return 0.0;
}

// Class-diversity setting: which fraction of the label space may appear on a
// single node and on a single edge (Dtt ... Dhh).
struct DiversitySetting {
  Fraction node_fraction = Fraction::tenth;
  Fraction edge_fraction = Fraction::tenth;

  int classes_per_node(int num_classes) const {
    return std::max(1, static_cast<int>(std::lround(fraction_value(node_fraction) * num_classes)));
  }
  int classes_per_edge(int num_classes) const {
    return std::max(1, static_cast<int>(std::lround(fraction_value(edge_fraction) * num_classes)));
  }

  // "tt", "tq", "th", "qq", "qh", "hh"
  static DiversitySetting parse(const std::string& code) {
    auto f = [](char c) {
      switch (c) {
        case 't': return Fraction::tenth;
        case 'q': return Fraction::quarter;
        case 'h': return Fraction::half;
      }
      throw config_error(std::string("unknown diversity code char '") + c + "'");
    };
    if (code.size() != 2) throw config_error("diversity code must be two of {t,q,h}, e.g. tt");
    DiversitySetting s{f(code[0]), f(code[1])};
    return s;
  }

  std::string code() const {
    auto c = [](Fraction f) {
      switch (f) {
        case Fraction::tenth: return 't';
        case Fraction::quarter: return 'q';
        case Fraction::half: return 'h';
      }
      return '?';
    };
    return std::string{c(node_fraction), c(edge_fraction)};
  }
};

struct PartitionOptions {
  double class_count_sd = 1.0;   // jitter of the per-node class count
  bool random_placement = false; // node->edge placement (default round-robin)
};

// Per-node training shards plus the node->edge placement and the split views.
struct Partition {
  std::vector<std::vector<Example>> per_node;      // D_i, materialized
  std::vector<std::vector<int>> per_node_indices;  // indices into train.examples
  std::vector<int> node_to_edge;
  int num_edges = 0;
  Dataset train, val, test;
  std::vector<int> replacement_fallback_nodes;  // nodes that had to resample with replacement

  int num_nodes() const { return static_cast<int>(per_node.size()); }

  long total_examples() const {
    long n = 0;
    for (const auto& d : per_node) n += static_cast<long>(d.size());
    return n;
  }

  std::vector<int> label_set(int node) const {
    std::set<int> s;
    for (const Example& e : per_node[static_cast<std::size_t>(node)]) s.insert(e.label);
    return std::vector<int>(s.begin(), s.end());
  }

  std::vector<int> edge_label_set(int edge) const {
    std::set<int> s;
    for (int i = 0; i < num_nodes(); ++i)
      if (node_to_edge[static_cast<std::size_t>(i)] == edge)
        for (const Example& e : per_node[static_cast<std::size_t>(i)]) s.insert(e.label);
    return std::vector<int>(s.begin(), s.end());
  }
};

// Distributes the train split across nodes under a diversity setting:
// nodes are placed on edges, each edge draws its allowed class set, each node
// draws a jittered number of classes from its edge's set, and example counts
// follow a clamped normal draw. Examples are consumed without replacement
// from per-class pools; a node whose classes are exhausted falls back to
// sampling with replacement and is recorded in replacement_fallback_nodes.
inline Partition make_partition(const Dataset& train, int num_nodes, int num_edges,
                                const DiversitySetting& setting, double mean_examples,
                                double sd_examples, std::uint64_t seed,
                                const PartitionOptions& opt = {}, Dataset val = {},
                                Dataset test = {}) {
  if (num_nodes < 1 || num_edges < 1 || num_nodes < num_edges)
    throw config_error("partition requires num_nodes >= num_edges >= 1");
  if (mean_examples <= 0.0 || sd_examples < 0.0)
    throw config_error("partition requires mean_examples > 0 and sd_examples >= 0");
  const int C = train.num_classes;
  const int cpn = setting.classes_per_node(C);
  const int cpe = std::min(setting.classes_per_edge(C), C);
  if (cpn > C) throw config_error("classes-per-node exceeds num_classes");

  Partition part;
  part.train = train;
  part.val = std::move(val);
  part.test = std::move(test);
  part.num_edges = num_edges;
  part.per_node.resize(static_cast<std::size_t>(num_nodes));
  part.per_node_indices.resize(static_cast<std::size_t>(num_nodes));
  part.node_to_edge.resize(static_cast<std::size_t>(num_nodes));

  Rng rng(Rng::derive(seed, 0x9a271));

  // (a) placement
  for (int i = 0; i < num_nodes; ++i)
    part.node_to_edge[static_cast<std::size_t>(i)] =
        opt.random_placement ? static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(num_edges)))
                             : i % num_edges;

  // (b) per-edge class sets
  std::vector<std::vector<int>> edge_classes(static_cast<std::size_t>(num_edges));
  for (int e = 0; e < num_edges; ++e) {
    edge_classes[static_cast<std::size_t>(e)] = rng.sample_distinct(C, cpe);
    std::sort(edge_classes[static_cast<std::size_t>(e)].begin(), edge_classes[static_cast<std::size_t>(e)].end());
  }

  // (c) per-node class sets, count jittered around classes-per-node
  std::vector<std::vector<int>> node_classes(static_cast<std::size_t>(num_nodes));
  for (int i = 0; i < num_nodes; ++i) {
    const auto& allowed = edge_classes[static_cast<std::size_t>(part.node_to_edge[static_cast<std::size_t>(i)])];
    long k = std::lround(rng.normal(static_cast<double>(cpn), opt.class_count_sd));
    k = std::clamp<long>(k, 1, static_cast<long>(allowed.size()));
    const auto picks = rng.sample_distinct(static_cast<int>(allowed.size()), static_cast<int>(k));
    for (int p : picks) node_classes[static_cast<std::size_t>(i)].push_back(allowed[static_cast<std::size_t>(p)]);
    std::sort(node_classes[static_cast<std::size_t>(i)].begin(), node_classes[static_cast<std::size_t>(i)].end());
  }

  // per-class pools over the train split, consumed front to back
  std::vector<std::vector<int>> pools(static_cast<std::size_t>(C));
  for (std::size_t idx = 0; idx < train.examples.size(); ++idx)
    pools[static_cast<std::size_t>(train.examples[idx].label)].push_back(static_cast<int>(idx));
  for (auto& pool : pools) rng.shuffle(pool);
  std::vector<std::size_t> cursor(static_cast<std::size_t>(C), 0);

  // (d)+(e) example counts and draws
  for (int i = 0; i < num_nodes; ++i) {
    const auto& classes = node_classes[static_cast<std::size_t>(i)];
    long avail = 0;
    for (int c : classes)
      avail += static_cast<long>(pools[static_cast<std::size_t>(c)].size() - cursor[static_cast<std::size_t>(c)]);
    long want = std::lround(rng.normal(mean_examples, sd_examples));
    want = std::max<long>(want, 1);
    long n_i = std::min(want, std::max<long>(avail, 1));

    std::vector<int> taken;
    taken.reserve(static_cast<std::size_t>(n_i));
    // even split across the node's classes, remainder to the lowest classes
    const long base = n_i / static_cast<long>(classes.size());
    long rem = n_i % static_cast<long>(classes.size());
    std::vector<long> share(classes.size(), base);
    for (std::size_t j = 0; j < classes.size() && rem > 0; ++j, --rem) ++share[j];
    long deficit = 0;
    for (std::size_t j = 0; j < classes.size(); ++j) {
      const int c = classes[j];
      auto& cur = cursor[static_cast<std::size_t>(c)];
      const long have = static_cast<long>(pools[static_cast<std::size_t>(c)].size()) - static_cast<long>(cur);
      const long take = std::min(share[j], have);
      for (long t = 0; t < take; ++t) taken.push_back(pools[static_cast<std::size_t>(c)][cur++]);
      deficit += share[j] - take;
    }
    // re-spread any deficit over classes that still have stock
    for (std::size_t j = 0; j < classes.size() && deficit > 0; ++j) {
      const int c = classes[j];
      auto& cur = cursor[static_cast<std::size_t>(c)];
      while (deficit > 0 && cur < pools[static_cast<std::size_t>(c)].size()) {
        taken.push_back(pools[static_cast<std::size_t>(c)][cur++]);
        --deficit;
      }
    }
    if (static_cast<long>(taken.size()) < n_i) {
      // all pools dry: sample the remainder with replacement from the full class lists
      part.replacement_fallback_nodes.push_back(i);
      while (static_cast<long>(taken.size()) < n_i) {
        const int c = classes[static_cast<std::size_t>(rng.uniform_int(classes.size()))];
        const auto& pool = pools[static_cast<std::size_t>(c)];
        if (pool.empty()) throw config_error("class " + std::to_string(c) + " has no train examples");
        taken.push_back(pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))]);
      }
    }
    std::sort(taken.begin(), taken.end());
    part.per_node_indices[static_cast<std::size_t>(i)] = taken;
    for (int idx : taken)
      part.per_node[static_cast<std::size_t>(i)].push_back(train.examples[static_cast<std::size_t>(idx)]);
  }
  return part;
}

}  // namespace groupfed
