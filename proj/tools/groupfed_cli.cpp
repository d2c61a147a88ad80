// groupfed: deterministic group federated learning simulator.
// Subcommands: run, compare, sweep, check. Exit codes: 0 success,
// 2 configuration error, 3 numeric divergence.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "groupfed/analysis.hpp"
#include "groupfed/experiment.hpp"

namespace fs = std::filesystem;
using namespace groupfed;

namespace {

std::string kebab(const std::string& key) {
  std::string out = key;
  for (char& c : out)
    if (c == '_') c = '-';
  return out;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "dataset",      "blobs_classes", "blobs_dim",    "blobs_per_class", "idx_images",
      "idx_labels",   "diversity",     "num_nodes",    "num_edges",       "mean_examples",
      "sd_examples",  "class_sd",      "topology",     "fat_tree_k",      "jelly_degree",
      "topology_file", "link_speed_mbps", "proc_gflops", "delay_kind",    "model",
      "hidden_units", "algorithm",     "tau",          "tau1",            "tau2",
      "steps",        "num_groups",    "alpha_iid",    "alpha_comm",      "combined",
      "snapshot_cap", "max_steady",    "eta",          "batch",           "decay",
      "dgd",          "l2",            "seed",         "repeats",         "measure_divergences",
      "analysis",     "out_dir"};
  return keys;
}

// every config key becomes a --kebab-case option; CLI flags override the file
void add_config_options(CLI::App* cmd, std::map<std::string, std::string>& values) {
  for (const auto& key : config_keys()) {
    values[key];  // create the slot (std::map references are stable)
    cmd->add_option("--" + kebab(key), values[key], "config key '" + key + "'");
  }
}

ExperimentConfig assemble_config(const std::string& config_file, CLI::App* cmd,
                                 const std::map<std::string, std::string>& cli_values) {
  ExperimentConfig cfg;
  if (!config_file.empty())
    for (const auto& [k, v] : parse_config_file(config_file)) cfg.set(k, v);
  for (const auto& key : config_keys())
    if (cmd->count("--" + kebab(key)) > 0) cfg.set(key, cli_values.at(key));
  return cfg;
}

struct CheckOutcome {
  std::string name;
  bool pass;
};

std::vector<CheckOutcome> run_checks();

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"group federated learning simulator"};
  app.require_subcommand(1);

  // run
  auto* run_cmd = app.add_subcommand("run", "run one experiment (repeats x seeds)");
  std::string run_config_file;
  run_cmd->add_option("--config", run_config_file, "key = value config file");
  std::map<std::string, std::string> run_values;
  add_config_options(run_cmd, run_values);

  // compare
  auto* cmp_cmd = app.add_subcommand("compare", "compare artifact directories against FedAvg");
  std::vector<std::string> cmp_dirs;
  std::string cmp_metric = "time_to_accuracy";
  std::string cmp_out = "comparison.csv";
  double cmp_budget = -1.0;
  cmp_cmd->add_option("dirs", cmp_dirs, "artifact directories")->required()->expected(-1);
  cmp_cmd->add_option("--metric", cmp_metric, "time_to_accuracy | accuracy_at_time");
  cmp_cmd->add_option("--out", cmp_out, "output CSV path");
  cmp_cmd->add_option("--time-budget", cmp_budget, "simulated-seconds budget (accuracy_at_time)");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "cartesian sweep over listed keys");
  std::string sweep_config_file;
  std::vector<std::string> sweep_overs;
  sweep_cmd->add_option("--config", sweep_config_file, "key = value config file");
  sweep_cmd->add_option("--over", sweep_overs, "key=v1,v2,... (repeatable)")->required();
  std::map<std::string, std::string> sweep_values;
  add_config_options(sweep_cmd, sweep_values);

  // check
  app.add_subcommand("check", "run the built-in invariant suites");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      ExperimentConfig cfg = assemble_config(run_config_file, run_cmd, run_values);
      const auto result = run_experiment(cfg);
      std::cout << "artifacts written to " << result.out_dir << "\n";
      if (result.exit_code == 3) std::cerr << "warning: at least one run diverged\n";
      return result.exit_code;
    }

    if (cmp_cmd->parsed()) {
      CompareMetric metric;
      if (cmp_metric == "time_to_accuracy") metric = CompareMetric::time_to_accuracy;
      else if (cmp_metric == "accuracy_at_time") metric = CompareMetric::accuracy_at_time;
      else throw config_error("unknown metric '" + cmp_metric + "'");
      const auto result = compare(cmp_dirs, metric,
                                  cmp_budget > 0 ? std::optional<double>(cmp_budget) : std::nullopt);
      const std::string csv = compare_to_csv(result, metric);
      write_text_file(cmp_out, csv);
      std::cout << csv;
      return 0;
    }

    if (sweep_cmd->parsed()) {
      ExperimentConfig base = assemble_config(sweep_config_file, sweep_cmd, sweep_values);
      std::vector<std::pair<std::string, std::vector<std::string>>> axes;
      for (const auto& over : sweep_overs) {
        const auto eq = over.find('=');
        if (eq == std::string::npos) throw config_error("--over expects key=v1,v2,...");
        const std::string key = over.substr(0, eq);
        std::vector<std::string> vals;
        const std::string rest = over.substr(eq + 1);
        std::size_t pos = 0;
        while (true) {
          const auto comma = rest.find(',', pos);
          vals.push_back(rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
          if (comma == std::string::npos) break;
          pos = comma + 1;
        }
        if (vals.empty() || vals.front().empty())
          throw config_error("--over " + key + " lists no values");
        axes.emplace_back(key, vals);
      }
      const std::string root = base.out_dir;
      std::vector<std::size_t> idx(axes.size(), 0);
      int worst = 0;
      for (;;) {
        ExperimentConfig cfg = base;
        std::string tag;
        for (std::size_t a = 0; a < axes.size(); ++a) {
          cfg.set(axes[a].first, axes[a].second[idx[a]]);
          tag += (a ? "_" : "") + axes[a].first + "-" + axes[a].second[idx[a]];
        }
        cfg.out_dir = root + "/" + tag;
        std::cout << "sweep: " << tag << "\n";
        worst = std::max(worst, run_experiment(cfg).exit_code);
        std::size_t a = 0;
        for (; a < axes.size(); ++a) {
          if (++idx[a] < axes[a].second.size()) break;
          idx[a] = 0;
        }
        if (a == axes.size()) break;
      }
      return worst;
    }

    // check
    const auto outcomes = run_checks();
    bool all = true;
    for (const auto& o : outcomes) {
      std::cout << (o.pass ? "PASS" : "FAIL") << "  " << o.name << "\n";
      all = all && o.pass;
    }
    std::cout << (all ? "all checks passed\n" : "some checks FAILED\n");
    return all ? 0 : 1;
  } catch (const config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

namespace {

std::vector<CheckOutcome> run_checks() {
  std::vector<CheckOutcome> out;
  auto check = [&](const std::string& name, bool ok) { out.push_back({name, ok}); };

  {  // gradient vs central finite differences, both models
    Rng rng(101);
    bool ok = true;
    for (const auto spec : {ModelSpec::softmax(5, 3), ModelSpec::mlp(4, 3, 5)}) {
      for (int trial = 0; trial < 5 && ok; ++trial) {
        const auto p = init_params(spec, rng);
        std::vector<Example> batch(4);
        for (auto& e : batch) {
          e.features.resize(static_cast<std::size_t>(spec.input_dim));
          for (auto& f : e.features) f = rng.normal();
          e.label = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.num_classes)));
        }
        const auto g = gradient(p, batch);
        for (std::size_t i = 0; i < p.values.size() && ok; ++i) {
          ModelParams plus = p, minus = p;
          plus.values[i] += 1e-6;
          minus.values[i] -= 1e-6;
          const double fd = (loss(plus, batch) - loss(minus, batch)) / 2e-6;
          ok = std::abs(fd - g.values[i]) / std::max(std::abs(fd), 1e-8) < 1e-4;
        }
      }
    }
    check("gradient-finite-difference", ok);
  }

  {  // topology metric axioms and the k=4 fat-tree diameter
    bool ok = true;
    try {
      const auto ft = build_fat_tree(4, 2, 0);
      int max_hop = 0;
      for (const auto& row : ft.hop)
        for (int h : row) max_hop = std::max(max_hop, h);
      ok = max_hop == 6;
      build_jellyfish(8, 3, 2, 1);
    } catch (const std::exception&) {
      ok = false;
    }
    check("topology-metric-axioms", ok);
  }

  {  // jellyfish determinism
    const auto a = build_jellyfish(8, 3, 2, 5);
    const auto b = build_jellyfish(8, 3, 2, 5);
    check("jellyfish-determinism", a.hop == b.hop);
  }

  {  // weighted average permutation invariance
    Rng rng(103);
    const auto spec = ModelSpec::softmax(3, 3);
    std::vector<ModelParams> models;
    for (int i = 0; i < 4; ++i) models.push_back(init_params(spec, rng));
    std::vector<WeightedModel> fwd, rev;
    const double w[4] = {0.4, 0.3, 0.2, 0.1};
    for (int i = 0; i < 4; ++i) fwd.push_back({&models[static_cast<std::size_t>(i)], w[i]});
    for (int i = 3; i >= 0; --i) rev.push_back({&models[static_cast<std::size_t>(i)], w[i]});
    const auto x = weighted_average(fwd), y = weighted_average(rev);
    bool ok = true;
    for (std::size_t i = 0; i < x.values.size(); ++i)
      ok = ok && std::abs(x.values[i] - y.values[i]) < 1e-12;
    check("weighted-average-permutation", ok);
  }

  {  // one-node FedAvg == centralized descent, bitwise
    Partition part;
    part.per_node = {{{{1.0, 0.0}, 0}, {{0.0, 1.0}, 1}}};
    part.per_node_indices.resize(1);
    part.node_to_edge = {0};
    part.num_edges = 1;
    part.train.num_classes = 2;
    part.train.examples = part.per_node[0];
    const auto topo = build_fat_tree(4, 1, 0, 1, 1);
    const auto spec = ModelSpec::softmax(2, 2);
    Schedule sched;
    sched.tau1 = 1;
    sched.tau2 = 1;
    sched.T = 20;
    HyperParams hyper;
    hyper.eta0 = 0.2;
    hyper.dgd = true;
    EngineOptions opts;
    opts.collect_trajectory = true;
    const auto trace = run_fedavg(part, topo, spec, sched, hyper, 3, opts);
    ModelParams w = trace.trajectory[0];
    bool ok = true;
    for (int t = 1; t <= 20 && ok; ++t) {
      w = sgd_step(w, part.per_node[0], 0.2 * std::pow(0.99, t - 1));
      ok = trace.trajectory[static_cast<std::size_t>(t)].values == w.values;
    }
    check("single-node-collapse", ok);
  }

  {  // combined aggregation: same models, cheaper load-model communication
    const auto ds = synth_blobs(4, 3, 60, 11);
    const auto sp = split(ds, 11);
    const auto part = make_partition(sp.train, 6, 2, DiversitySetting::parse("qh"), 20, 2, 11);
    const auto topo = build_fat_tree(4, 3, 0, 6, 2);
    const auto spec = ModelSpec::softmax(3, 4);
    Membership m;
    m.assign = {0, 0, 0, 1, 1, 1};
    m.medoids = {0, 3};
    Schedule sched;
    sched.tau1 = 1;
    sched.tau2 = 2;
    sched.T = 8;
    HyperParams hyper;
    hyper.eta0 = 0.1;
    hyper.dgd = true;
    EngineOptions opts;
    opts.collect_trajectory = true;
    opts.delay_kind = DelayKind::load;
    const auto plain = run_group_fl(part, topo, spec, m, sched, hyper, false, 7, opts);
    const auto comb = run_group_fl(part, topo, spec, m, sched, hyper, true, 7, opts);
    bool ok = comb.comm_seconds < plain.comm_seconds;
    for (std::size_t t = 0; t < plain.trajectory.size() && ok; ++t)
      for (std::size_t i = 0; i < plain.trajectory[t].values.size() && ok; ++i)
        ok = std::abs(plain.trajectory[t].values[i] - comb.trajectory[t].values[i]) < 1e-9;
    check("combined-aggregation-equivalence", ok);
  }

  {  // partition caps and determinism
    const auto ds = synth_blobs(10, 3, 80, 13);
    const auto sp = split(ds, 13);
    PartitionOptions popt;
    popt.class_count_sd = 0.0;
    const auto a = make_partition(sp.train, 10, 5, DiversitySetting::parse("tq"), 30, 3, 13, popt);
    const auto b = make_partition(sp.train, 10, 5, DiversitySetting::parse("tq"), 30, 3, 13, popt);
    bool ok = partition_to_json(a).dump() == partition_to_json(b).dump();
    for (int i = 0; i < a.num_nodes() && ok; ++i) ok = a.label_set(i).size() <= 1;
    for (int e = 0; e < a.num_edges && ok; ++e) ok = a.edge_label_set(e).size() <= 3;
    check("partition-caps-determinism", ok);
  }

  {  // k-medoids: monotone assign cost
    const auto ds = synth_blobs(4, 3, 60, 17);
    const auto sp = split(ds, 17);
    const auto part = make_partition(sp.train, 8, 4, DiversitySetting::parse("qh"), 15, 2, 17);
    const auto topo = build_fat_tree(4, 2, 0, 8, 4);
    Rng rng(17);
    const auto w = init_params(ModelSpec::softmax(3, 4), rng);
    const auto snap = snapshot(w, part, 64, 17);
    bool ok = true;
    for (std::uint64_t seed = 1; seed <= 5 && ok; ++seed) {
      CostWeights cw;
      NodeGroupingReport rep;
      node_grouping(snap, topo, 3, cw, seed, 1, &rep);
      for (std::size_t i = 1; i < rep.iteration_costs.size() && ok; ++i)
        ok = rep.iteration_costs[i] <= rep.iteration_costs[i - 1] + 1e-9;
    }
    check("kmedoids-monotone-cost", ok);
  }

  {  // doubling the link speed halves aggregation delays
    auto topo = build_fat_tree(4, 2, 0);
    const auto dm = make_delay_model(ModelSpec::softmax(8, 4), 32);
    std::vector<int> parts{0, 3, 7, 11};
    topo.link_speed = 10e6;
    const double slow = agg_delay(topo, dm, parts, 0);
    topo.link_speed = 20e6;
    const double fast = agg_delay(topo, dm, parts, 0);
    check("delay-linearity", slow == 2.0 * fast);
  }

  return out;
}

}  // namespace
