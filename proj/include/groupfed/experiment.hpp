#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "groupfed/analysis.hpp"
#include "groupfed/csvio.hpp"
#include "groupfed/dataset.hpp"
#include "groupfed/engine.hpp"
#include "groupfed/errors.hpp"
#include "groupfed/hash.hpp"
#include "groupfed/serialize.hpp"

namespace groupfed {

// Flat experiment description. Every field has a config-file key of the same
// name; CLI flags override file values which override these defaults.
struct ExperimentConfig {
  // dataset
  std::string dataset = "blobs";  // blobs | idx
  int blobs_classes = 10;
  int blobs_dim = 20;
  int blobs_per_class = 200;
  std::string idx_images;
  std::string idx_labels;
  // partition
  std::string diversity = "tt";
  int num_nodes = 50;
  int num_edges = 10;
  double mean_examples = 0.0;  // <= 0: train size / num_nodes
  double sd_examples = -1.0;   // < 0: mean / 10
  double class_sd = 1.0;
  // topology
  std::string topology = "fat_tree";  // fat_tree | jellyfish | file
  int fat_tree_k = 6;
  int jelly_degree = 3;
  std::string topology_file;
  double link_speed_mbps = 10.0;
  double proc_gflops = 5.0;
  std::string delay_kind = "bottleneck";  // bottleneck | load
  // model
  std::string model = "sr";  // sr | mlp
  int hidden_units = 32;
  // algorithm & schedule
  std::string algorithm = "fedavg_ic";  // fedavg | hierfavg | fedavg_ic | fedavg_i | fedavg_c
  int tau = 5;
  int tau1 = 1;
  int tau2 = 5;
  long steps = 200;
  int num_groups = 5;
  double alpha_iid = 0.5;
  double alpha_comm = 0.5;
  std::string combined = "auto";  // auto | on | off
  int snapshot_cap = 256;
  int max_steady = 1;
  // hyperparameters
  double eta = 0.1;
  int batch = 128;
  double decay = 0.99;
  bool dgd = false;
  double l2 = 0.0;
  // run
  std::uint64_t seed = 1;
  int repeats = 1;
  bool measure_divergences = true;
  bool analysis = false;  // DGD analysis mode: virtual models, constants, bound report
  std::string out_dir = "artifacts";

  std::set<std::string> explicit_keys;

  bool was_set(const std::string& key) const { return explicit_keys.count(key) > 0; }

  void set(const std::string& key, const std::string& value);
  void validate();

  std::map<std::string, std::string> to_map() const;

  std::string canonical_string() const {
    std::string out;
    for (const auto& [k, v] : to_map()) out += k + " = " + v + "\n";
    return out;
  }
};

namespace detail {

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw config_error(key + ": expected a boolean, got '" + v + "'");
}

template <typename T>
T parse_num(const std::string& v, const std::string& key) {
  std::istringstream ss(v);
  T out;
  ss >> out;
  if (ss.fail() || !ss.eof()) throw config_error(key + ": cannot parse '" + v + "'");
  return out;
}

}  // namespace detail

inline void ExperimentConfig::set(const std::string& key, const std::string& value) {
  using detail::parse_bool;
  using detail::parse_num;
  if (key == "dataset") dataset = value;
  else if (key == "blobs_classes") blobs_classes = parse_num<int>(value, key);
  else if (key == "blobs_dim") blobs_dim = parse_num<int>(value, key);
  else if (key == "blobs_per_class") blobs_per_class = parse_num<int>(value, key);
  else if (key == "idx_images") idx_images = value;
  else if (key == "idx_labels") idx_labels = value;
  else if (key == "diversity") diversity = value;
  else if (key == "num_nodes") num_nodes = parse_num<int>(value, key);
  else if (key == "num_edges") num_edges = parse_num<int>(value, key);
  else if (key == "mean_examples") mean_examples = parse_num<double>(value, key);
  else if (key == "sd_examples") sd_examples = parse_num<double>(value, key);
  else if (key == "class_sd") class_sd = parse_num<double>(value, key);
  else if (key == "topology") topology = value;
  else if (key == "fat_tree_k") fat_tree_k = parse_num<int>(value, key);
  else if (key == "jelly_degree") jelly_degree = parse_num<int>(value, key);
  else if (key == "topology_file") topology_file = value;
  else if (key == "link_speed_mbps") link_speed_mbps = parse_num<double>(value, key);
  else if (key == "proc_gflops") proc_gflops = parse_num<double>(value, key);
  else if (key == "delay_kind") delay_kind = value;
  else if (key == "model") model = value;
  else if (key == "hidden_units") hidden_units = parse_num<int>(value, key);
  else if (key == "algorithm") algorithm = value;
  else if (key == "tau") tau = parse_num<int>(value, key);
  else if (key == "tau1") tau1 = parse_num<int>(value, key);
  else if (key == "tau2") tau2 = parse_num<int>(value, key);
  else if (key == "steps") steps = parse_num<long>(value, key);
  else if (key == "num_groups") num_groups = parse_num<int>(value, key);
  else if (key == "alpha_iid") alpha_iid = parse_num<double>(value, key);
  else if (key == "alpha_comm") alpha_comm = parse_num<double>(value, key);
  else if (key == "combined") combined = value;
  else if (key == "snapshot_cap") snapshot_cap = parse_num<int>(value, key);
  else if (key == "max_steady") max_steady = parse_num<int>(value, key);
  else if (key == "eta") eta = parse_num<double>(value, key);
  else if (key == "batch") batch = parse_num<int>(value, key);
  else if (key == "decay") decay = parse_num<double>(value, key);
  else if (key == "dgd") dgd = parse_bool(value, key);
  else if (key == "l2") l2 = parse_num<double>(value, key);
  else if (key == "seed") seed = parse_num<std::uint64_t>(value, key);
  else if (key == "repeats") repeats = parse_num<int>(value, key);
  else if (key == "measure_divergences") measure_divergences = parse_bool(value, key);
  else if (key == "analysis") analysis = parse_bool(value, key);
  else if (key == "out_dir") out_dir = value;
  else throw config_error("unknown config key '" + key + "'");
  explicit_keys.insert(key);
}

inline std::map<std::string, std::string> ExperimentConfig::to_map() const {
  std::map<std::string, std::string> m;
  m["dataset"] = dataset;
  m["blobs_classes"] = std::to_string(blobs_classes);
  m["blobs_dim"] = std::to_string(blobs_dim);
  m["blobs_per_class"] = std::to_string(blobs_per_class);
  m["idx_images"] = idx_images;
  m["idx_labels"] = idx_labels;
  m["diversity"] = diversity;
  m["num_nodes"] = std::to_string(num_nodes);
  m["num_edges"] = std::to_string(num_edges);
  m["mean_examples"] = format_double(mean_examples);
  m["sd_examples"] = format_double(sd_examples);
  m["class_sd"] = format_double(class_sd);
  m["topology"] = topology;
  m["fat_tree_k"] = std::to_string(fat_tree_k);
  m["jelly_degree"] = std::to_string(jelly_degree);
  m["topology_file"] = topology_file;
  m["link_speed_mbps"] = format_double(link_speed_mbps);
  m["proc_gflops"] = format_double(proc_gflops);
  m["delay_kind"] = delay_kind;
  m["model"] = model;
  m["hidden_units"] = std::to_string(hidden_units);
  m["algorithm"] = algorithm;
  m["tau"] = std::to_string(tau);
  m["tau1"] = std::to_string(tau1);
  m["tau2"] = std::to_string(tau2);
  m["steps"] = std::to_string(steps);
  m["num_groups"] = std::to_string(num_groups);
  m["alpha_iid"] = format_double(alpha_iid);
  m["alpha_comm"] = format_double(alpha_comm);
  m["combined"] = combined;
  m["snapshot_cap"] = std::to_string(snapshot_cap);
  m["max_steady"] = std::to_string(max_steady);
  m["eta"] = format_double(eta);
  m["batch"] = std::to_string(batch);
  m["decay"] = format_double(decay);
  m["dgd"] = dgd ? "true" : "false";
  m["l2"] = format_double(l2);
  m["seed"] = std::to_string(seed);
  m["repeats"] = std::to_string(repeats);
  m["measure_divergences"] = measure_divergences ? "true" : "false";
  m["analysis"] = analysis ? "true" : "false";
  return m;
}

inline void ExperimentConfig::validate() {
  const std::set<std::string> algorithms{"fedavg", "hierfavg", "fedavg_ic", "fedavg_i", "fedavg_c"};
  if (!algorithms.count(algorithm)) throw config_error("unknown algorithm '" + algorithm + "'");
  if (dataset != "blobs" && dataset != "idx") throw config_error("dataset must be blobs or idx");
  if (dataset == "idx" && (idx_images.empty() || idx_labels.empty()))
    throw config_error("idx dataset requires idx_images and idx_labels");
  if (model != "sr" && model != "mlp") throw config_error("model must be sr or mlp");
  if (repeats < 1) throw config_error("repeats must be >= 1");
  if (num_nodes < num_edges || num_edges < 1) throw config_error("need num_nodes >= num_edges >= 1");
  if (steps < 1) throw config_error("steps must be >= 1");
  if (tau < 1 || tau1 < 1 || tau2 < 1) throw config_error("tau values must be >= 1");
  if (eta <= 0.0 || !std::isfinite(eta)) throw config_error("eta must be positive and finite");
  if (decay <= 0.0 || decay > 1.0) throw config_error("decay must be in (0, 1]");
  if (batch < 1) throw config_error("batch must be >= 1");
  if (num_groups < 1 || num_groups > num_nodes) throw config_error("num_groups must be in [1, num_nodes]");
  parse_delay_kind(delay_kind);
  DiversitySetting::parse(diversity);
  if (combined != "auto" && combined != "on" && combined != "off")
    throw config_error("combined must be auto, on, or off");
  // FedAvg-I optimizes the IID cost only; FedAvg-C the communication cost only.
  if (algorithm == "fedavg_i") {
    if (was_set("alpha_comm") && alpha_comm != 0.0)
      throw config_error("fedavg_i requires alpha_comm = 0");
    alpha_comm = 0.0;
    if (!was_set("alpha_iid")) alpha_iid = 1.0;
    if (alpha_iid <= 0.0) throw config_error("fedavg_i requires alpha_iid > 0");
  }
  if (algorithm == "fedavg_c") {
    if (was_set("alpha_iid") && alpha_iid != 0.0) throw config_error("fedavg_c requires alpha_iid = 0");
    alpha_iid = 0.0;
    if (!was_set("alpha_comm")) alpha_comm = 1.0;
    if (alpha_comm <= 0.0) throw config_error("fedavg_c requires alpha_comm > 0");
  }
  if (analysis) {
    dgd = true;
    if (!was_set("l2")) l2 = 1e-6;
    if (!was_set("decay")) decay = 1.0;
  }
}

// key = value lines, '#' comments.
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::map<std::string, std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    if (eq == std::string::npos) {
      if (!trim(line).empty())
        throw config_error(path + ":" + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
    out[key] = value;
  }
  return out;
}

// Materialized inputs shared by every repeat of one experiment: the repeats
// vary only the run seed, so algorithms with equal config seeds see the same
// dataset, partition, and topology.
struct ExperimentInputs {
  Partition part;
  Topology topo;
  ModelSpec spec;
};

inline ExperimentInputs build_inputs(const ExperimentConfig& cfg) {
  Dataset ds;
  if (cfg.dataset == "blobs")
    ds = synth_blobs(cfg.blobs_classes, cfg.blobs_dim, cfg.blobs_per_class, cfg.seed);
  else
    ds = load_idx(cfg.idx_images, cfg.idx_labels);
  SplitResult sp = split(ds, cfg.seed);

  const double mean_ex = cfg.mean_examples > 0.0
                             ? cfg.mean_examples
                             : static_cast<double>(sp.train.size()) / cfg.num_nodes;
  const double sd_ex = cfg.sd_examples >= 0.0 ? cfg.sd_examples : mean_ex / 10.0;

  PartitionOptions popt;
  popt.class_count_sd = cfg.class_sd;
  Partition part = make_partition(sp.train, cfg.num_nodes, cfg.num_edges,
                                  DiversitySetting::parse(cfg.diversity), mean_ex, sd_ex, cfg.seed,
                                  popt, sp.val, sp.test);

  Topology topo;
  if (cfg.topology == "fat_tree") {
    const int npe = (cfg.num_nodes + cfg.num_edges - 1) / cfg.num_edges;
    topo = build_fat_tree(cfg.fat_tree_k, npe, cfg.seed, cfg.num_nodes, cfg.num_edges);
  } else if (cfg.topology == "jellyfish") {
    const int nps = (cfg.num_nodes + cfg.num_edges - 1) / cfg.num_edges;
    topo = build_jellyfish(cfg.num_edges, cfg.jelly_degree, nps, cfg.seed, cfg.num_nodes);
  } else if (cfg.topology == "file") {
    topo = topology_from_json(load_json(cfg.topology_file));
    if (topo.num_hosts != cfg.num_nodes || topo.num_edges != cfg.num_edges)
      throw config_error("topology file does not match num_nodes/num_edges");
  } else {
    throw config_error("unknown topology '" + cfg.topology + "'");
  }
  topo.link_speed = cfg.link_speed_mbps * 1e6;
  topo.proc_speed = cfg.proc_gflops * 1e9;

  ModelSpec spec = cfg.model == "sr"
                       ? ModelSpec::softmax(cfg.blobs_dim, cfg.blobs_classes)
                       : ModelSpec::mlp(cfg.blobs_dim, cfg.blobs_classes, cfg.hidden_units);
  if (cfg.dataset == "idx") {
    const int dim = static_cast<int>(part.train.examples.front().features.size());
    spec = cfg.model == "sr" ? ModelSpec::softmax(dim, part.train.num_classes)
                             : ModelSpec::mlp(dim, part.train.num_classes, cfg.hidden_units);
  }
  return ExperimentInputs{std::move(part), std::move(topo), spec};
}

// Runs one repeat with the given run seed.
inline RunTrace run_algorithm(const ExperimentConfig& cfg, const ExperimentInputs& in,
                              std::uint64_t run_seed) {
  HyperParams hyper;
  hyper.eta0 = cfg.eta;
  hyper.batch = cfg.batch;
  hyper.decay = cfg.decay;
  hyper.dgd = cfg.dgd;
  hyper.l2 = cfg.l2;

  EngineOptions opts;
  opts.delay_kind = parse_delay_kind(cfg.delay_kind);
  opts.divergences_at_rows = cfg.measure_divergences;
  opts.snapshot_batch_cap = cfg.snapshot_cap;
  opts.grouping_max_steady = cfg.max_steady;
  if (cfg.analysis) {
    opts.track_virtual = true;
    opts.collect_trajectory = true;
  }

  const bool combined_on = cfg.combined == "on";
  Schedule sched;
  sched.T = cfg.steps;

  if (cfg.algorithm == "fedavg") {
    sched.tau1 = cfg.tau;
    sched.tau2 = 1;
    return run_fedavg(in.part, in.topo, in.spec, sched, hyper, run_seed, opts);
  }
  sched.tau1 = cfg.tau1;
  sched.tau2 = cfg.tau2;
  sched.tau1_0 = cfg.tau1;
  sched.tau2_0 = cfg.tau2;
  if (cfg.algorithm == "hierfavg") {
    const Membership m = edge_grouping(in.part);
    return run_group_fl(in.part, in.topo, in.spec, m, sched, hyper, combined_on, run_seed, opts,
                        "hierfavg");
  }
  CostWeights w;
  w.alpha_iid = cfg.alpha_iid;
  w.alpha_comm = cfg.alpha_comm;
  const bool combined_ic = cfg.combined != "off";  // combined aggregation is the IC default
  return run_fedavg_ic(in.part, in.topo, in.spec, sched, w, cfg.num_groups, hyper, run_seed, opts,
                       combined_ic, cfg.algorithm);
}

inline std::string trace_csv_header() {
  return "step,sim_seconds,epoch,train_loss,test_accuracy,delta,Delta,cost_iid,cost_comm,algorithm,seed";
}

inline std::string trace_to_csv(const RunTrace& trace) {
  std::string out = trace_csv_header() + "\n";
  for (const TraceRow& r : trace.rows) {
    out += std::to_string(r.step) + "," + format_double(r.sim_seconds) + "," + format_double(r.epoch) +
           "," + format_double(r.train_loss) + "," + format_double(r.test_accuracy) + "," +
           format_double(r.delta) + "," + format_double(r.Delta) + "," + format_double(r.cost_iid) +
           "," + format_double(r.cost_comm) + "," + csv_quote(r.algorithm) + "," +
           std::to_string(r.seed) + "\n";
  }
  return out;
}

struct ExperimentResult {
  std::vector<RunTrace> traces;
  std::string out_dir;
  int exit_code = 0;  // 0 ok, 3 numeric divergence
  json analysis_report;
};

namespace detail {

struct Checkpointed {
  double time;
  double loss_mean, loss_sd;
  double acc_mean, acc_sd;
  double epoch_mean;
};

inline const TraceRow* row_at_time(const RunTrace& t, double when) {
  const TraceRow* last = nullptr;
  for (const auto& r : t.rows) {
    if (r.sim_seconds <= when + 1e-15) last = &r;
    else break;
  }
  return last;
}

// Mean +- sd over repeats on a fixed simulated-time grid; population sd so a
// single repeat reports zero spread.
inline std::vector<Checkpointed> summarize(const std::vector<RunTrace>& traces, int points = 50) {
  double t_max = 0.0;
  for (const auto& t : traces)
    if (!t.rows.empty()) t_max = std::max(t_max, t.rows.back().sim_seconds);
  std::vector<Checkpointed> out;
  for (int j = 0; j < points; ++j) {
    const double when = points == 1 ? t_max : t_max * static_cast<double>(j) / (points - 1);
    std::vector<double> losses, accs, epochs;
    for (const auto& t : traces) {
      const TraceRow* r = row_at_time(t, when);
      if (!r) continue;
      losses.push_back(r->train_loss);
      accs.push_back(r->test_accuracy);
      epochs.push_back(r->epoch);
    }
    auto mean_of = [](const std::vector<double>& v) {
      double s = 0.0;
      for (double x : v) s += x;
      return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    auto sd_of = [&](const std::vector<double>& v, double m) {
      double s = 0.0;
      for (double x : v) s += (x - m) * (x - m);
      return v.empty() ? 0.0 : std::sqrt(s / static_cast<double>(v.size()));
    };
    Checkpointed c;
    c.time = when;
    c.loss_mean = mean_of(losses);
    c.loss_sd = sd_of(losses, c.loss_mean);
    c.acc_mean = mean_of(accs);
    c.acc_sd = sd_of(accs, c.acc_mean);
    c.epoch_mean = mean_of(epochs);
    out.push_back(c);
  }
  return out;
}

inline std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  return buf;
}

}  // namespace detail

// Runs `repeats` seeds, writes per-run traces, the serialized inputs, a
// checkpointed mean +- sd summary, and a manifest that suffices to re-run.
inline ExperimentResult run_experiment(ExperimentConfig cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  const ExperimentInputs in = build_inputs(cfg);

  ExperimentResult result;
  result.out_dir = cfg.out_dir;
  fs::create_directories(cfg.out_dir);

  const json part_json = partition_to_json(in.part);
  const json topo_json = topology_to_json(in.topo);
  save_json(part_json, cfg.out_dir + "/partition.json");
  save_json(topo_json, cfg.out_dir + "/topology.json");

  json manifest;
  manifest["config"] = cfg.to_map();
  manifest["content_hash"] = Sha256::of(cfg.canonical_string());
  manifest["partition_hash"] = Sha256::of(part_json.dump() + topo_json.dump());
  manifest["created"] = detail::iso_timestamp();

  json runs = json::array();
  bool incomplete = false;
  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t run_seed = cfg.seed + static_cast<std::uint64_t>(r);
    RunTrace trace = run_algorithm(cfg, in, run_seed);
    const std::string trace_name = "trace_" + cfg.algorithm + "_s" + std::to_string(run_seed) + ".csv";
    write_text_file(cfg.out_dir + "/" + trace_name, trace_to_csv(trace));
    json entry;
    entry["seed"] = run_seed;
    entry["trace"] = trace_name;
    entry["complete"] = !trace.diverged;
    if (trace.diverged) {
      entry["diagnostic"] = trace.diagnostic;
      incomplete = true;
      result.exit_code = 3;
    }
    if (trace.has_membership && cfg.algorithm != "fedavg") {
      const std::string mem_name =
          "membership_" + cfg.algorithm + "_s" + std::to_string(run_seed) + ".json";
      save_json(membership_to_json(trace.membership), cfg.out_dir + "/" + mem_name);
      entry["membership"] = mem_name;
    }
    runs.push_back(entry);
    result.traces.push_back(std::move(trace));
  }
  manifest["runs"] = runs;
  manifest["incomplete"] = incomplete;

  // summary on the shared simulated-time grid
  const auto cps = detail::summarize(result.traces);
  std::string summary =
      "checkpoint,sim_seconds,train_loss_mean,train_loss_sd,test_accuracy_mean,test_accuracy_sd,epoch_mean\n";
  for (std::size_t j = 0; j < cps.size(); ++j) {
    const auto& c = cps[j];
    summary += std::to_string(j) + "," + format_double(c.time) + "," + format_double(c.loss_mean) +
               "," + format_double(c.loss_sd) + "," + format_double(c.acc_mean) + "," +
               format_double(c.acc_sd) + "," + format_double(c.epoch_mean) + "\n";
  }

  if (cfg.analysis && !incomplete) {
    // constants + convergence-bound report over the first repeat's trajectory
    const RunTrace& t0 = result.traces.front();
    const PooledData pooled_all = pool_data(in.part, t0.membership);
    const std::vector<Example>& pooled = pooled_all.global;
    const ModelParams w_star = solve_centralized(in.spec, pooled, cfg.l2 > 0 ? cfg.l2 : 1e-6);
    const Constants consts = estimate_constants(in.spec, pooled, cfg.l2, w_star, t0.trajectory,
                                                t0.v_global_starts, 1000, cfg.seed);
    double delta_max = 0.0, Delta_max = 0.0;
    for (const auto& rec : t0.interval_records) {
      delta_max = std::max(delta_max, rec.delta_max);
      Delta_max = std::max(Delta_max, rec.Delta_max);
    }
    const int tau1 = cfg.algorithm == "fedavg" ? cfg.tau : cfg.tau1;
    const int tau2 = cfg.algorithm == "fedavg" ? 1 : cfg.tau2;
    bool pre_ok = true;
    const double bound = convergence_bound(consts, delta_max, Delta_max, cfg.eta, tau1, tau2, &pre_ok);
    const double gap = loss(t0.final_global, pooled, cfg.l2) - loss(w_star, pooled, cfg.l2);
    json rep;
    rep["rho_hat"] = consts.rho_hat;
    rep["beta_hat"] = consts.beta_hat;
    rep["omega_hat"] = consts.omega_hat;
    rep["delta_max"] = delta_max;
    rep["Delta_max"] = Delta_max;
    rep["eta_precondition_ok"] = pre_ok;
    rep["convergence_bound"] = bound;
    rep["optimality_gap"] = gap;
    rep["bound_holds"] = gap <= bound;
    json intervals = json::array();
    for (const auto& rec : t0.interval_records) {
      json r;
      r["interval"] = rec.interval;
      r["max_dist"] = rec.max_dist;
      r["delta_max"] = rec.delta_max;
      r["Delta_max"] = rec.Delta_max;
      r["rhs"] = interval_divergence_bound(rec.delta_max, rec.Delta_max, rec.eta, consts.beta_hat, tau1, tau2);
      intervals.push_back(r);
    }
    rep["interval_records"] = intervals;
    result.analysis_report = rep;
    save_json(rep, cfg.out_dir + "/analysis.json");
    summary += "bound," + format_double(bound) + "," + format_double(gap) + ",,,,\n";
  }

  write_text_file(cfg.out_dir + "/summary.csv", summary);
  save_json(manifest, cfg.out_dir + "/manifest.json");
  return result;
}

enum class CompareMetric { time_to_accuracy, accuracy_at_time };

struct CompareRow {
  std::string algorithm;
  double final_accuracy = 0.0;
  std::optional<double> time_to_target;  // empty renders as "-"
  std::optional<double> speedup;
  double accuracy_at_budget = 0.0;
};

struct CompareResult {
  double target_accuracy = 0.0;
  double budget = 0.0;
  std::vector<CompareRow> rows;
};

namespace detail {

struct LoadedArtifact {
  std::string algorithm;
  std::string partition_hash;
  std::vector<CsvTable> traces;
};

inline LoadedArtifact load_artifact(const std::string& dir) {
  const json manifest = load_json(dir + "/manifest.json");
  LoadedArtifact a;
  a.algorithm = manifest.at("config").at("algorithm").get<std::string>();
  a.partition_hash = manifest.at("partition_hash").get<std::string>();
  for (const auto& run : manifest.at("runs"))
    a.traces.push_back(read_csv(dir + "/" + run.at("trace").get<std::string>()));
  return a;
}

inline int column_index(const CsvTable& t, const std::string& name) {
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i] == name) return static_cast<int>(i);
  throw format_error("trace is missing column " + name, 0);
}

}  // namespace detail

// Elapsed-time comparison against the FedAvg baseline: the target is its mean final
// accuracy; entries that never reach it render as "-".
inline CompareResult compare(const std::vector<std::string>& artifact_dirs, CompareMetric metric,
                             std::optional<double> time_budget = std::nullopt) {
  std::vector<detail::LoadedArtifact> arts;
  for (const auto& d : artifact_dirs) arts.push_back(detail::load_artifact(d));
  const detail::LoadedArtifact* baseline = nullptr;
  for (const auto& a : arts)
    if (a.algorithm == "fedavg") baseline = &a;
  if (!baseline) throw config_error("compare requires a fedavg artifact as the baseline");
  for (const auto& a : arts)
    if (a.partition_hash != baseline->partition_hash)
      throw config_error("compare: artifacts were built from different partitions/topologies");

  auto columns = [&](const CsvTable& t) {
    return std::pair<int, int>{detail::column_index(t, "sim_seconds"),
                               detail::column_index(t, "test_accuracy")};
  };
  auto final_accuracy = [&](const detail::LoadedArtifact& a) {
    double sum = 0.0;
    for (const auto& t : a.traces) {
      const auto [ci_t, ci_a] = columns(t);
      (void)ci_t;
      sum += std::stod(t.rows.back()[static_cast<std::size_t>(ci_a)]);
    }
    return sum / static_cast<double>(a.traces.size());
  };

  CompareResult result;
  result.target_accuracy = final_accuracy(*baseline);

  double min_final_time = std::numeric_limits<double>::infinity();
  for (const auto& a : arts)
    for (const auto& t : a.traces) {
      const auto [ci_t, ci_a] = columns(t);
      (void)ci_a;
      min_final_time = std::min(min_final_time, std::stod(t.rows.back()[static_cast<std::size_t>(ci_t)]));
    }
  result.budget = time_budget.value_or(min_final_time);

  std::optional<double> fedavg_time;
  std::vector<std::optional<double>> times;
  for (const auto& a : arts) {
    bool reached_all = true;
    double sum = 0.0;
    for (const auto& t : a.traces) {
      const auto [ci_t, ci_a] = columns(t);
      bool reached = false;
      for (const auto& row : t.rows) {
        if (!row[static_cast<std::size_t>(ci_a)].empty() &&
            std::stod(row[static_cast<std::size_t>(ci_a)]) >= result.target_accuracy - 1e-12) {
          sum += std::stod(row[static_cast<std::size_t>(ci_t)]);
          reached = true;
          break;
        }
      }
      if (!reached) reached_all = false;
    }
    times.push_back(reached_all ? std::optional<double>(sum / static_cast<double>(a.traces.size()))
                                : std::nullopt);
    if (a.algorithm == "fedavg") fedavg_time = times.back();
  }

  for (std::size_t i = 0; i < arts.size(); ++i) {
    CompareRow row;
    row.algorithm = arts[i].algorithm;
    row.final_accuracy = final_accuracy(arts[i]);
    row.time_to_target = times[i];
    if (times[i] && fedavg_time && *times[i] > 0.0) row.speedup = *fedavg_time / *times[i];
    // accuracy at the shared budget: last row at or before the budget, per repeat
    double acc_sum = 0.0;
    for (const auto& t : arts[i].traces) {
      const auto [ci_t, ci_a] = columns(t);
      double acc = 0.0;
      for (const auto& r : t.rows) {
        if (std::stod(r[static_cast<std::size_t>(ci_t)]) <= result.budget + 1e-12 &&
            !r[static_cast<std::size_t>(ci_a)].empty())
          acc = std::stod(r[static_cast<std::size_t>(ci_a)]);
      }
      acc_sum += acc;
    }
    row.accuracy_at_budget = acc_sum / static_cast<double>(arts[i].traces.size());
    result.rows.push_back(row);
  }
  (void)metric;
  return result;
}

inline std::string compare_to_csv(const CompareResult& r, CompareMetric metric) {
  std::string out;
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("-"); };
  if (metric == CompareMetric::time_to_accuracy) {
    out = "algorithm,final_accuracy,target_accuracy,time_to_target_seconds,speedup_vs_fedavg\n";
    for (const auto& row : r.rows)
      out += csv_quote(row.algorithm) + "," + format_double(row.final_accuracy) + "," +
             format_double(r.target_accuracy) + "," + opt(row.time_to_target) + "," +
             opt(row.speedup) + "\n";
  } else {
    out = "algorithm,budget_seconds,accuracy_at_budget,final_accuracy\n";
    for (const auto& row : r.rows)
      out += csv_quote(row.algorithm) + "," + format_double(r.budget) + "," +
             format_double(row.accuracy_at_budget) + "," + format_double(row.final_accuracy) + "\n";
  }
  return out;
}

}  // namespace groupfed
