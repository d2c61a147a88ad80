#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "groupfed/delay.hpp"
#include "groupfed/errors.hpp"
#include "groupfed/grouping.hpp"
#include "groupfed/model.hpp"
#include "groupfed/partition.hpp"
#include "groupfed/topology.hpp"

namespace groupfed {

struct HyperParams {
  double eta0 = 0.1;
  int batch = 128;
  double decay = 0.99;  // learning-rate decay applied per global round
  bool dgd = false;     // deterministic full-batch gradient descent
  double l2 = 0.0;      // ridge used in analysis mode
};

// tau1 local steps per group aggregation, tau2 group aggregations per global
// aggregation, T total local steps. tau1_0/tau2_0 are the values installed
// once grouping happens (FedAvg-IC starts at 1/1).
struct Schedule {
  int tau1 = 1;
  int tau2 = 5;
  long T = 100;
  int tau1_0 = 1;
  int tau2_0 = 5;

  void validate() const {
    if (tau1 < 1 || tau2 < 1 || tau1_0 < 1 || tau2_0 < 1) throw config_error("tau values must be >= 1");
    if (T < static_cast<long>(tau1) * tau2) throw config_error("T must cover at least one global round");
  }
};

struct TraceRow {
  long step = 0;
  double sim_seconds = 0.0;
  double epoch = 0.0;
  double train_loss = 0.0;
  double test_accuracy = std::numeric_limits<double>::quiet_NaN();
  double delta = std::numeric_limits<double>::quiet_NaN();
  double Delta = std::numeric_limits<double>::quiet_NaN();
  double cost_iid = std::numeric_limits<double>::quiet_NaN();
  double cost_comm = std::numeric_limits<double>::quiet_NaN();
  std::string algorithm;
  std::uint64_t seed = 0;
};

// Mutable state of one federated run.
struct FedState {
  std::vector<ModelParams> locals;  // w_i^k
  std::vector<ModelParams> groups;  // w^k
  ModelParams global;               // w
  long t = 0;
  double clock = 0.0;
  double eta = 0.0;
  long global_rounds = 0;

  // The effective global model between aggregations: the data-weighted
  // average of the current local models.
  ModelParams average_locals(const std::vector<double>& weights) const {
    ModelParams out = ModelParams::zeros(global.spec);
    for (std::size_t i = 0; i < locals.size(); ++i)
      for (std::size_t j = 0; j < out.values.size(); ++j)
        out.values[j] += weights[i] * locals[i].values[j];
    return out;
  }
};

// Virtual centrally-trained counterparts, re-synchronized at interval starts.
struct VirtualTrace {
  std::vector<ModelParams> v_group;
  ModelParams v_global;
};

struct Divergences {
  double delta = 0.0;
  double Delta = 0.0;
  std::map<int, double> per_node;   // delta_i^k
  std::map<int, double> per_group;  // Delta^k
};

// Local-to-group and group-to-global gradient divergences, every gradient
// taken full-batch at w: delta_i^k = |grad F_i - grad F^k|, Delta^k =
// |grad F^k - grad F|, folded with |D_i|/|D| and |D^k|/|D| weights.
inline Divergences divergences_at(const ModelParams& w, const Partition& part,
                                  const Membership& membership, double l2 = 0.0) {
  Divergences out;
  const int n = part.num_nodes();
  std::vector<ModelParams> node_grad;
  node_grad.reserve(static_cast<std::size_t>(n));
  std::vector<double> sizes(static_cast<std::size_t>(n));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    node_grad.push_back(gradient(w, part.per_node[static_cast<std::size_t>(i)], l2));
    sizes[static_cast<std::size_t>(i)] = static_cast<double>(part.per_node[static_cast<std::size_t>(i)].size());
    total += sizes[static_cast<std::size_t>(i)];
  }
  ModelParams global_grad = ModelParams::zeros(w.spec);
  for (int i = 0; i < n; ++i)
    for (std::size_t j = 0; j < global_grad.values.size(); ++j)
      global_grad.values[j] += sizes[static_cast<std::size_t>(i)] / total * node_grad[static_cast<std::size_t>(i)].values[j];

  const auto groups = membership.groups();
  for (int k = 0; k < membership.num_groups(); ++k) {
    double gsize = 0.0;
    ModelParams group_grad = ModelParams::zeros(w.spec);
    for (int i : groups[static_cast<std::size_t>(k)]) gsize += sizes[static_cast<std::size_t>(i)];
    for (int i : groups[static_cast<std::size_t>(k)])
      for (std::size_t j = 0; j < group_grad.values.size(); ++j)
        group_grad.values[j] += sizes[static_cast<std::size_t>(i)] / gsize * node_grad[static_cast<std::size_t>(i)].values[j];
    const double Dk = l2_distance(group_grad.values, global_grad.values);
    out.per_group[k] = Dk;
    out.Delta += gsize / total * Dk;
    for (int i : groups[static_cast<std::size_t>(k)]) {
      const double di = l2_distance(node_grad[static_cast<std::size_t>(i)].values, group_grad.values);
      out.per_node[i] = di;
      out.delta += sizes[static_cast<std::size_t>(i)] / total * di;
    }
  }
  return out;
}

inline Divergences measure_divergences(const FedState& state, const Partition& part,
                                       const Membership& membership, double l2 = 0.0) {
  std::vector<double> weights(state.locals.size());
  double total = 0.0;
  for (std::size_t i = 0; i < state.locals.size(); ++i) total += static_cast<double>(part.per_node[i].size());
  for (std::size_t i = 0; i < state.locals.size(); ++i)
    weights[i] = static_cast<double>(part.per_node[i].size()) / total;
  return divergences_at(state.average_locals(weights), part, membership, l2);
}

// Pooled per-group and global training data, in ascending node order.
struct PooledData {
  std::vector<std::vector<Example>> per_group;
  std::vector<Example> global;
};

inline PooledData pool_data(const Partition& part, const Membership& membership) {
  PooledData pd;
  pd.per_group.resize(static_cast<std::size_t>(membership.num_groups()));
  for (int i = 0; i < part.num_nodes(); ++i) {
    const auto& d = part.per_node[static_cast<std::size_t>(i)];
    auto& g = pd.per_group[static_cast<std::size_t>(membership.assign[static_cast<std::size_t>(i)])];
    g.insert(g.end(), d.begin(), d.end());
    pd.global.insert(pd.global.end(), d.begin(), d.end());
  }
  return pd;
}

// One virtual-model transition evaluated at state.t: virtual models take a
// centralized gradient step, except at their interval starts where they are
// re-synchronized with the federated group/global models.
inline VirtualTrace virtual_step(const VirtualTrace& cur, const FedState& state, const Partition& part,
                                 const Membership& membership, const Schedule& sched,
                                 const PooledData& pooled, double l2 = 0.0) {
  VirtualTrace next = cur;
  const long t = state.t;
  const long tau1 = sched.tau1;
  const long tau12 = static_cast<long>(sched.tau1) * sched.tau2;
  for (int k = 0; k < membership.num_groups(); ++k) {
    auto& vk = next.v_group[static_cast<std::size_t>(k)];
    if (t % tau1 == 0)
      vk = state.groups[static_cast<std::size_t>(k)];
    else
      vk = sgd_step(vk, pooled.per_group[static_cast<std::size_t>(k)], state.eta, l2);
  }
  if (t % tau12 == 0)
    next.v_global = state.global;
  else
    next.v_global = sgd_step(next.v_global, pooled.global, state.eta, l2);
  (void)part;
  return next;
}

// Per-interval record for the trajectory-divergence inequality: the largest
// observed distance between the federated average and the virtual global
// model, and the divergence maxima across the interval's anchor points.
struct IntervalDivergenceRecord {
  long interval = 0;
  double max_dist = 0.0;
  double delta_max = 0.0;
  double Delta_max = 0.0;
  double eta = 0.0;
};

struct EngineOptions {
  DelayKind delay_kind = DelayKind::bottleneck;
  int global_server = 0;
  bool track_virtual = false;          // maintain virtual models + interval records
  bool divergences_at_rows = false;    // measure delta/Delta at every global row
  bool collect_trajectory = false;     // keep w(t) for every step (analysis)
  int snapshot_batch_cap = 256;        // gradient snapshot cap for grouping
  int grouping_max_steady = 1;         // steady iterations before k-medoids stops
  std::function<void(const FedState&)> observer;  // invoked after each step (tests)
  std::function<void(const FedState&)> pre_agg_observer;  // before an aggregation commits
};

struct RunTrace {
  std::vector<TraceRow> rows;
  bool diverged = false;
  std::string diagnostic;
  ModelParams final_global;
  double comm_seconds = 0.0;
  double compute_seconds = 0.0;
  double grouping_seconds = 0.0;
  Membership membership;
  bool has_membership = false;
  double cost_iid_raw = std::numeric_limits<double>::quiet_NaN();
  double cost_comm_raw = std::numeric_limits<double>::quiet_NaN();
  std::vector<ModelParams> trajectory;       // w(t), t = 0..T (if collected)
  std::vector<ModelParams> v_global_starts;  // virtual global model at interval starts
  std::vector<IntervalDivergenceRecord> interval_records;
  double final_eta = 0.0;
};

namespace detail {

struct MinibatchCursor {
  std::vector<int> order;
  std::size_t pos = 0;
  Rng rng;

  explicit MinibatchCursor(std::size_t n, std::uint64_t seed) : rng(seed) {
    order.resize(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    rng.shuffle(order);
  }

  // next minibatch without replacement; reshuffles at each epoch boundary
  std::vector<int> next(std::size_t batch) {
    if (pos >= order.size()) {
      rng.shuffle(order);
      pos = 0;
    }
    const std::size_t take = std::min(batch, order.size() - pos);
    std::vector<int> out(order.begin() + static_cast<long>(pos),
                         order.begin() + static_cast<long>(pos + take));
    pos += take;
    return out;
  }
};

// Shared loop for FedAvg, group FL, and FedAvg-IC. FedAvg is the single-group
// schedule; FedAvg-IC starts at (tau1, tau2) = (1, 1) and installs the
// k-medoids membership and (tau1_0, tau2_0) right after the first global
// aggregation, with subsequent cadence counted from that step.
class Runner {
 public:
  Runner(const Partition& part, const Topology& topo, const ModelSpec& spec, Membership membership,
         const Schedule& sched, const HyperParams& hyper, bool combined, std::uint64_t seed,
         const EngineOptions& opts, std::string algorithm)
      : part_(part),
        topo_(topo),
        spec_(spec),
        membership_(std::move(membership)),
        sched_(sched),
        hyper_(hyper),
        combined_(combined),
        seed_(seed),
        opts_(opts),
        algorithm_(std::move(algorithm)) {
    const int n = part_.num_nodes();
    if (n != topo_.num_hosts)
      throw config_error("partition has " + std::to_string(n) + " nodes but topology has " +
                         std::to_string(topo_.num_hosts) + " hosts");
    membership_.validate();
    if (membership_.num_nodes() != n) throw config_error("membership does not cover all nodes");
    sizes_.resize(static_cast<std::size_t>(n));
    total_size_ = 0;
    int max_batch = 1;
    for (int i = 0; i < n; ++i) {
      const auto sz = part_.per_node[static_cast<std::size_t>(i)].size();
      if (sz == 0) throw config_error("node " + std::to_string(i) + " has no data");
      sizes_[static_cast<std::size_t>(i)] = static_cast<double>(sz);
      total_size_ += static_cast<long>(sz);
      const int b = hyper_.dgd ? static_cast<int>(sz) : std::min<int>(hyper_.batch, static_cast<int>(sz));
      max_batch = std::max(max_batch, b);
    }
    weights_.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      weights_[static_cast<std::size_t>(i)] = sizes_[static_cast<std::size_t>(i)] / static_cast<double>(total_size_);
    dm_ = make_delay_model(spec_, max_batch);
  }

  // Enables the FedAvg-IC regrouping phase.
  void enable_regrouping(const CostWeights& weights, int num_groups) {
    regroup_ = true;
    ic_weights_ = weights;
    ic_num_groups_ = num_groups;
    ic_max_steady_ = opts_.grouping_max_steady;
  }

  RunTrace run() {
    const int n = part_.num_nodes();
    Rng rng(Rng::derive(seed_, 0x1417));
    state_.global = init_params(spec_, rng);
    state_.locals.assign(static_cast<std::size_t>(n), state_.global);
    state_.groups.assign(static_cast<std::size_t>(membership_.num_groups()), state_.global);
    state_.t = 0;
    state_.clock = 0.0;
    state_.eta = hyper_.eta0;
    state_.global_rounds = 0;

    if (!hyper_.dgd) {
      cursors_.reserve(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        cursors_.emplace_back(part_.per_node[static_cast<std::size_t>(i)].size(),
                              Rng::derive(seed_, 0xba7c4 + static_cast<std::uint64_t>(i)));
    }

    pooled_ = pool_data(part_, membership_);
    if (opts_.track_virtual) {
      virt_.v_global = state_.global;
      virt_.v_group.assign(static_cast<std::size_t>(membership_.num_groups()), state_.global);
      trace_.v_global_starts.push_back(state_.global);
    }
    if (opts_.collect_trajectory) trace_.trajectory.push_back(state_.global);

    emit_row(state_.global);

    long phase_offset = 0;
    int tau1 = sched_.tau1, tau2 = sched_.tau2;
    if (regroup_) {
      tau1 = 1;
      tau2 = 1;
    }

    for (long t = 1; t <= sched_.T; ++t) {
      state_.t = t;
      state_.eta = hyper_.eta0 * std::pow(hyper_.decay, static_cast<double>(state_.global_rounds));

      long examples_this_step = 0;
      for (int i = 0; i < n; ++i) {
        auto& data = part_.per_node[static_cast<std::size_t>(i)];
        if (hyper_.dgd) {
          state_.locals[static_cast<std::size_t>(i)] =
              sgd_step(state_.locals[static_cast<std::size_t>(i)], data, state_.eta, hyper_.l2);
          examples_this_step += static_cast<long>(data.size());
        } else {
          const auto idx = cursors_[static_cast<std::size_t>(i)].next(static_cast<std::size_t>(hyper_.batch));
          std::vector<Example> batch;
          batch.reserve(idx.size());
          for (int j : idx) batch.push_back(data[static_cast<std::size_t>(j)]);
          state_.locals[static_cast<std::size_t>(i)] =
              sgd_step(state_.locals[static_cast<std::size_t>(i)], batch, state_.eta, hyper_.l2);
          examples_this_step += static_cast<long>(idx.size());
        }
      }
      examples_processed_ += examples_this_step;
      const double step_compute = compute_delay(dm_, topo_, 1);
      state_.clock += step_compute;
      trace_.compute_seconds += step_compute;

      const long s = t - phase_offset;
      const long tau12 = static_cast<long>(tau1) * tau2;
      const bool is_group = s > 0 && s % tau1 == 0 && s % tau12 != 0;
      const bool is_global = s > 0 && s % tau12 == 0;

      if ((is_group || is_global) && opts_.pre_agg_observer) opts_.pre_agg_observer(state_);
      if (is_group) {
        aggregate_groups();
        const double d = group_round_delay();
        state_.clock += d;
        trace_.comm_seconds += d;
      }
      if (is_global) {
        aggregate_global();
        const double d =
            agg_delay(topo_, dm_, all_nodes(), opts_.global_server, combined_, opts_.delay_kind);
        state_.clock += d;
        trace_.comm_seconds += d;
        ++state_.global_rounds;
      }

      ModelParams w_avg = is_global ? state_.global : state_.average_locals(weights_);
      if (opts_.collect_trajectory) trace_.trajectory.push_back(w_avg);
      if (opts_.track_virtual) track_virtual(t, tau1, tau12, w_avg, is_global);

      if (is_global && regroup_ && !grouped_) do_regroup(t, &tau1, &tau2, &phase_offset);

      bool bad = !w_avg.finite();
      double row_loss = std::numeric_limits<double>::quiet_NaN();
      if (!bad) {
        row_loss = loss(w_avg, pooled_.global, hyper_.l2);
        bad = !std::isfinite(row_loss);
      }
      if (bad) {
        trace_.diverged = true;
        trace_.diagnostic = "non-finite model or loss at step " + std::to_string(t);
        TraceRow row = make_row(w_avg, row_loss);
        trace_.rows.push_back(std::move(row));
        break;
      }
      if (is_group || is_global) {
        TraceRow row = make_row(w_avg, row_loss);
        if (is_global && opts_.divergences_at_rows) {
          const Divergences d = divergences_at(w_avg, part_, membership_, hyper_.l2);
          row.delta = d.delta;
          row.Delta = d.Delta;
        }
        trace_.rows.push_back(std::move(row));
      }
      if (opts_.observer) opts_.observer(state_);
    }

    trace_.final_global = state_.average_locals(weights_);
    trace_.final_eta = state_.eta;
    trace_.membership = membership_;
    trace_.has_membership = true;
    return std::move(trace_);
  }

 private:
  std::vector<int> all_nodes() const {
    std::vector<int> v(static_cast<std::size_t>(part_.num_nodes()));
    for (int i = 0; i < part_.num_nodes(); ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
  }

  // Data-weighted sum of the given members' locals. With combined=true the
  // sum is folded per network edge first (ascending edges, ascending nodes
  // within an edge); plain mode folds in ascending node order.
  ModelParams aggregate(const std::vector<int>& members, double denom) const {
    ModelParams out = ModelParams::zeros(spec_);
    if (!combined_) {
      for (int i : members)
        for (std::size_t j = 0; j < out.values.size(); ++j)
          out.values[j] += sizes_[static_cast<std::size_t>(i)] / denom * state_.locals[static_cast<std::size_t>(i)].values[j];
      return out;
    }
    std::map<int, std::vector<int>> by_edge;
    for (int i : members) by_edge[topo_.host_edge[static_cast<std::size_t>(i)]].push_back(i);
    for (auto& [edge, list] : by_edge) {
      ModelParams partial = ModelParams::zeros(spec_);
      for (int i : list)
        for (std::size_t j = 0; j < partial.values.size(); ++j)
          partial.values[j] += sizes_[static_cast<std::size_t>(i)] / denom * state_.locals[static_cast<std::size_t>(i)].values[j];
      for (std::size_t j = 0; j < out.values.size(); ++j) out.values[j] += partial.values[j];
    }
    return out;
  }

  void aggregate_groups() {
    const auto groups = membership_.groups();
    for (int k = 0; k < membership_.num_groups(); ++k) {
      const auto& members = groups[static_cast<std::size_t>(k)];
      double denom = 0.0;
      for (int i : members) denom += sizes_[static_cast<std::size_t>(i)];
      state_.groups[static_cast<std::size_t>(k)] = aggregate(members, denom);
      for (int i : members) state_.locals[static_cast<std::size_t>(i)] = state_.groups[static_cast<std::size_t>(k)];
    }
  }

  void aggregate_global() {
    state_.global = aggregate(all_nodes(), static_cast<double>(total_size_));
    for (auto& l : state_.locals) l = state_.global;
    for (auto& g : state_.groups) g = state_.global;
  }

  double group_round_delay() const {
    // groups aggregate concurrently; the round is gated by the slowest one
    const auto groups = membership_.groups();
    double worst = 0.0;
    for (int k = 0; k < membership_.num_groups(); ++k)
      worst = std::max(worst, agg_delay(topo_, dm_, groups[static_cast<std::size_t>(k)],
                                        membership_.medoids[static_cast<std::size_t>(k)], combined_,
                                        opts_.delay_kind));
    return worst;
  }

  void track_virtual(long t, int tau1, long tau12, const ModelParams& w_avg, bool is_global) {
    // step the virtual models, measure against the federated average, then
    // re-synchronize at interval starts; a boundary step is measured against
    // the pre-sync value (the sync belongs to the next interval)
    for (int k = 0; k < membership_.num_groups(); ++k)
      virt_.v_group[static_cast<std::size_t>(k)] = sgd_step(
          virt_.v_group[static_cast<std::size_t>(k)], pooled_.per_group[static_cast<std::size_t>(k)],
          state_.eta, hyper_.l2);
    ModelParams v_stepped = sgd_step(virt_.v_global, pooled_.global, state_.eta, hyper_.l2);

    interval_max_dist_ = std::max(interval_max_dist_, l2_distance(w_avg.values, v_stepped.values));
    auto fold = [&](const ModelParams& anchor) {
      const Divergences d = divergences_at(anchor, part_, membership_, hyper_.l2);
      interval_delta_max_ = std::max(interval_delta_max_, d.delta);
      interval_Delta_max_ = std::max(interval_Delta_max_, d.Delta);
    };
    fold(w_avg);
    fold(v_stepped);
    for (const auto& vg : virt_.v_group) fold(vg);

    virt_.v_global = v_stepped;
    if (t % tau1 == 0)
      for (int k = 0; k < membership_.num_groups(); ++k)
        virt_.v_group[static_cast<std::size_t>(k)] = state_.groups[static_cast<std::size_t>(k)];
    if (is_global) {
      IntervalDivergenceRecord rec;
      rec.interval = static_cast<long>(trace_.interval_records.size()) + 1;
      rec.max_dist = interval_max_dist_;
      rec.delta_max = interval_delta_max_;
      rec.Delta_max = interval_Delta_max_;
      rec.eta = state_.eta;
      trace_.interval_records.push_back(rec);
      interval_max_dist_ = interval_delta_max_ = interval_Delta_max_ = 0.0;
      virt_.v_global = state_.global;
      trace_.v_global_starts.push_back(state_.global);
    }
    (void)tau12;
  }

  void do_regroup(long t, int* tau1, int* tau2, long* phase_offset) {
    grouped_ = true;
    const GradientSnapshot snap =
        snapshot(state_.global, part_, opts_.snapshot_batch_cap, Rng::derive(seed_, 0x5a4b), hyper_.l2);
    membership_ = node_grouping(snap, topo_, ic_num_groups_, ic_weights_,
                                Rng::derive(seed_, 0x6d0d), ic_max_steady_);
    state_.groups.assign(static_cast<std::size_t>(membership_.num_groups()), state_.global);
    pooled_ = pool_data(part_, membership_);
    if (opts_.track_virtual)
      virt_.v_group.assign(static_cast<std::size_t>(membership_.num_groups()), state_.global);
    *tau1 = sched_.tau1_0;
    *tau2 = sched_.tau2_0;
    *phase_offset = t;
    // the grouping exchange is charged as one extra global-style round
    const double d = agg_delay(topo_, dm_, all_nodes(), opts_.global_server, combined_, opts_.delay_kind);
    state_.clock += d;
    trace_.comm_seconds += d;
    trace_.grouping_seconds = d;
    // raw (unnormalized) combined-cost components of the installed membership
    double ciid = 0.0, ccomm = 0.0;
    for (int i = 0; i < membership_.num_nodes(); ++i) {
      const int k = membership_.assign[static_cast<std::size_t>(i)];
      ciid += group_divergence(snap, membership_, k);
      ccomm += static_cast<double>(
          topo_.hop[static_cast<std::size_t>(i)]
                   [static_cast<std::size_t>(membership_.medoids[static_cast<std::size_t>(k)])]);
    }
    trace_.cost_iid_raw = ciid;
    trace_.cost_comm_raw = ccomm;
  }

  TraceRow make_row(const ModelParams& w, double row_loss) {
    TraceRow row;
    row.step = state_.t;
    row.sim_seconds = state_.clock;
    row.epoch = static_cast<double>(examples_processed_) /
                static_cast<double>(std::max<std::size_t>(part_.train.examples.size(), 1));
    row.train_loss = row_loss;
    if (!part_.test.examples.empty() && w.finite()) row.test_accuracy = accuracy(w, part_.test.examples);
    row.cost_iid = trace_.cost_iid_raw;
    row.cost_comm = trace_.cost_comm_raw;
    row.algorithm = algorithm_;
    row.seed = seed_;
    return row;
  }

  void emit_row(const ModelParams& w) {
    trace_.rows.push_back(make_row(w, loss(w, pooled_.global, hyper_.l2)));
  }

  const Partition& part_;
  const Topology& topo_;
  const ModelSpec& spec_;
  Membership membership_;
  Schedule sched_;
  HyperParams hyper_;
  bool combined_;
  std::uint64_t seed_;
  EngineOptions opts_;
  std::string algorithm_;

  std::vector<double> sizes_;
  std::vector<double> weights_;
  long total_size_ = 0;
  DelayModel dm_;
  FedState state_;
  std::vector<MinibatchCursor> cursors_;
  PooledData pooled_;
  VirtualTrace virt_;
  RunTrace trace_;
  long examples_processed_ = 0;

  bool regroup_ = false;
  bool grouped_ = false;
  CostWeights ic_weights_;
  int ic_num_groups_ = 1;
  int ic_max_steady_ = 1;

  double interval_max_dist_ = 0.0;
  double interval_delta_max_ = 0.0;
  double interval_Delta_max_ = 0.0;
};

}  // namespace detail

// Plain FedAvg: one aggregation tier every sched.tau1 * sched.tau2 steps.
inline RunTrace run_fedavg(const Partition& part, const Topology& topo, const ModelSpec& spec,
                           const Schedule& sched, const HyperParams& hyper, std::uint64_t seed,
                           const EngineOptions& opts = {}) {
  Schedule s = sched;
  s.tau1 = sched.tau1 * sched.tau2;  // single tier: every aggregation is global
  s.tau2 = 1;
  s.validate();
  detail::Runner r(part, topo, spec, Membership::single_group(part.num_nodes()), s, hyper,
                   /*combined=*/false, seed, opts, "fedavg");
  return r.run();
}

// Two-tier group federated learning over a fixed membership (HierFAVG when
// the membership comes from edge_grouping).
inline RunTrace run_group_fl(const Partition& part, const Topology& topo, const ModelSpec& spec,
                             const Membership& membership, const Schedule& sched,
                             const HyperParams& hyper, bool combined, std::uint64_t seed,
                             const EngineOptions& opts = {}, const std::string& name = "group_fl") {
  sched.validate();
  detail::Runner r(part, topo, spec, membership, sched, hyper, combined, seed, opts, name);
  return r.run();
}

// FedAvg-IC: global rounds every step until the first aggregation completes,
// then a one-shot k-medoids grouping on a gradient snapshot, after which the
// run proceeds as group FL with (tau1_0, tau2_0) and combined aggregation.
inline RunTrace run_fedavg_ic(const Partition& part, const Topology& topo, const ModelSpec& spec,
                              const Schedule& sched, const CostWeights& weights, int num_groups,
                              const HyperParams& hyper, std::uint64_t seed,
                              const EngineOptions& opts = {}, bool combined = true,
                              const std::string& name = "fedavg_ic") {
  sched.validate();
  detail::Runner r(part, topo, spec, Membership::single_group(part.num_nodes()), sched, hyper,
                   combined, seed, opts, name);
  r.enable_regrouping(weights, num_groups);
  return r.run();
}

}  // namespace groupfed
