#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "groupfed/experiment.hpp"

using namespace groupfed;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config(const std::string& algorithm, const std::string& out) {
  ExperimentConfig cfg;
  cfg.set("dataset", "blobs");
  cfg.set("blobs_classes", "4");
  cfg.set("blobs_dim", "3");
  cfg.set("blobs_per_class", "50");
  cfg.set("diversity", "qh");
  cfg.set("num_nodes", "6");
  cfg.set("num_edges", "2");
  cfg.set("topology", "fat_tree");
  cfg.set("fat_tree_k", "4");
  cfg.set("model", "sr");
  cfg.set("algorithm", algorithm);
  cfg.set("tau", "2");
  cfg.set("tau1", "1");
  cfg.set("tau2", "2");
  cfg.set("steps", "8");
  cfg.set("num_groups", "2");
  cfg.set("eta", "0.1");
  cfg.set("dgd", "true");
  cfg.set("seed", "5");
  cfg.set("repeats", "2");
  cfg.out_dir = (fs::temp_directory_path() / out).string();
  fs::remove_all(cfg.out_dir);
  return cfg;
}

}  // namespace

TEST_CASE("config file parsing, overrides, and validation errors") {
  const auto path = (fs::temp_directory_path() / "gf_cfg_test.cfg").string();
  write_text_file(path, "# comment\nalgorithm = hierfavg\nsteps= 12\n  eta =0.05  # inline\n\n");
  const auto kv = parse_config_file(path);
  ExperimentConfig cfg;
  for (const auto& [k, v] : kv) cfg.set(k, v);
  CHECK(cfg.algorithm == "hierfavg");
  CHECK(cfg.steps == 12);
  CHECK(cfg.eta == 0.05);
  cfg.set("eta", "0.2");  // later assignment wins, mirroring CLI-over-file
  CHECK(cfg.eta == 0.2);

  CHECK_THROWS_AS(cfg.set("no_such_key", "1"), config_error);
  ExperimentConfig bad;
  bad.set("algorithm", "nope");
  CHECK_THROWS_AS(bad.validate(), config_error);
  ExperimentConfig bad2;
  bad2.set("repeats", "0");
  CHECK_THROWS_AS(bad2.validate(), config_error);

  write_text_file(path, "steps 12\n");
  CHECK_THROWS_AS(parse_config_file(path), config_error);
  fs::remove(path);
}

TEST_CASE("variant algorithms pin their cost weights") {
  ExperimentConfig cfg = tiny_config("fedavg_i", "gf_h_variant");
  cfg.validate();
  CHECK(cfg.alpha_comm == 0.0);
  CHECK(cfg.alpha_iid > 0.0);

  ExperimentConfig bad = tiny_config("fedavg_i", "gf_h_variant2");
  bad.set("alpha_comm", "0.3");
  CHECK_THROWS_AS(bad.validate(), config_error);

  ExperimentConfig c = tiny_config("fedavg_c", "gf_h_variant3");
  c.validate();
  CHECK(c.alpha_iid == 0.0);
  CHECK(c.alpha_comm > 0.0);
}

TEST_CASE("run_experiment writes a self-describing artifact directory") {
  auto cfg = tiny_config("fedavg_ic", "gf_h_artifacts");
  const auto result = run_experiment(cfg);
  CHECK(result.exit_code == 0);
  REQUIRE(result.traces.size() == 2);

  for (const auto* name :
       {"manifest.json", "partition.json", "topology.json", "summary.csv",
        "trace_fedavg_ic_s5.csv", "trace_fedavg_ic_s6.csv", "membership_fedavg_ic_s5.json"})
    CHECK(fs::exists(fs::path(cfg.out_dir) / name));

  const auto manifest = load_json(cfg.out_dir + "/manifest.json");
  CHECK(manifest.at("incomplete").get<bool>() == false);
  CHECK(manifest.at("runs").size() == 2);
  CHECK(manifest.at("config").at("algorithm") == "fedavg_ic");
  CHECK(manifest.contains("content_hash"));
  CHECK(manifest.contains("partition_hash"));

  const auto trace = read_csv(cfg.out_dir + "/trace_fedavg_ic_s5.csv");
  CHECK(trace.header == std::vector<std::string>{"step", "sim_seconds", "epoch", "train_loss",
                                                 "test_accuracy", "delta", "Delta", "cost_iid",
                                                 "cost_comm", "algorithm", "seed"});
  CHECK(!trace.rows.empty());
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("rerunning an identical config reproduces byte-identical traces") {
  auto a = tiny_config("hierfavg", "gf_h_rerun_a");
  auto b = tiny_config("hierfavg", "gf_h_rerun_b");
  run_experiment(a);
  run_experiment(b);
  for (const auto* name : {"trace_hierfavg_s5.csv", "trace_hierfavg_s6.csv", "summary.csv",
                           "partition.json", "topology.json"}) {
    const auto x = read_text_file(a.out_dir + "/" + name);
    const auto y = read_text_file(b.out_dir + "/" + name);
    CHECK(x == y);
  }
  fs::remove_all(a.out_dir);
  fs::remove_all(b.out_dir);
}

TEST_CASE("single repeat reports zero standard deviation") {
  auto cfg = tiny_config("fedavg", "gf_h_sd0");
  cfg.set("repeats", "1");
  run_experiment(cfg);
  const auto summary = read_csv(cfg.out_dir + "/summary.csv");
  int sd_cols[2] = {-1, -1};
  for (std::size_t i = 0; i < summary.header.size(); ++i) {
    if (summary.header[i] == "train_loss_sd") sd_cols[0] = static_cast<int>(i);
    if (summary.header[i] == "test_accuracy_sd") sd_cols[1] = static_cast<int>(i);
  }
  REQUIRE(sd_cols[0] >= 0);
  REQUIRE(sd_cols[1] >= 0);
  for (const auto& row : summary.rows) {
    CHECK(std::stod(row[static_cast<std::size_t>(sd_cols[0])]) == 0.0);
    CHECK(std::stod(row[static_cast<std::size_t>(sd_cols[1])]) == 0.0);
  }
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("compare reproduces hand-computed speedups and the dash convention") {
  // three artifact dirs over the same partition seed
  auto fed = tiny_config("fedavg", "gf_h_cmp_fed");
  fed.set("steps", "12");
  auto hier = tiny_config("hierfavg", "gf_h_cmp_hier");
  hier.set("steps", "12");
  auto ic = tiny_config("fedavg_ic", "gf_h_cmp_ic");
  ic.set("steps", "12");
  run_experiment(fed);
  run_experiment(hier);
  run_experiment(ic);

  const std::vector<std::string> dirs{fed.out_dir, hier.out_dir, ic.out_dir};
  const auto cmp = compare(dirs, CompareMetric::time_to_accuracy);

  // manual recomputation from the trace CSVs
  auto first_crossing = [&](const std::string& dir, const std::string& trace, double target) {
    const auto t = read_csv(dir + "/" + trace);
    int ci_t = -1, ci_a = -1;
    for (std::size_t i = 0; i < t.header.size(); ++i) {
      if (t.header[i] == "sim_seconds") ci_t = static_cast<int>(i);
      if (t.header[i] == "test_accuracy") ci_a = static_cast<int>(i);
    }
    for (const auto& row : t.rows)
      if (!row[static_cast<std::size_t>(ci_a)].empty() &&
          std::stod(row[static_cast<std::size_t>(ci_a)]) >= target - 1e-12)
        return std::stod(row[static_cast<std::size_t>(ci_t)]);
    return -1.0;
  };
  const double target = cmp.target_accuracy;
  const double f5 = first_crossing(fed.out_dir, "trace_fedavg_s5.csv", target);
  const double f6 = first_crossing(fed.out_dir, "trace_fedavg_s6.csv", target);
  REQUIRE(f5 >= 0.0);
  REQUIRE(f6 >= 0.0);
  for (const auto& row : cmp.rows) {
    if (row.algorithm == "fedavg") {
      REQUIRE(row.time_to_target.has_value());
      CHECK(*row.time_to_target == Catch::Approx((f5 + f6) / 2.0).epsilon(1e-12));
      REQUIRE(row.speedup.has_value());
      CHECK(*row.speedup == Catch::Approx(1.0).epsilon(1e-12));
    }
  }

  // identical configs compare at exactly speedup 1
  const auto cmp_same = compare({fed.out_dir, fed.out_dir}, CompareMetric::time_to_accuracy);
  for (const auto& row : cmp_same.rows) {
    REQUIRE(row.speedup.has_value());
    CHECK(*row.speedup == Catch::Approx(1.0).epsilon(1e-12));
  }

  // an algorithm that never reaches the target renders as "-"
  CompareResult fake = cmp;
  fake.rows[1].time_to_target.reset();
  fake.rows[1].speedup.reset();
  const auto csv = compare_to_csv(fake, CompareMetric::time_to_accuracy);
  CHECK(csv.find(",-") != std::string::npos);

  // mismatched partitions are rejected
  auto other = tiny_config("fedavg", "gf_h_cmp_other");
  other.set("seed", "99");
  other.set("steps", "12");
  run_experiment(other);
  CHECK_THROWS_AS(compare({fed.out_dir, other.out_dir}, CompareMetric::time_to_accuracy),
                  config_error);

  for (const auto& d : dirs) fs::remove_all(d);
  fs::remove_all(other.out_dir);
}

TEST_CASE("analysis mode emits the bound report") {
  auto cfg = tiny_config("hierfavg", "gf_h_analysis");
  cfg.set("analysis", "true");
  cfg.set("repeats", "1");
  cfg.set("steps", "8");
  cfg.set("eta", "0.05");
  cfg.validate();
  CHECK(cfg.dgd);  // analysis forces DGD
  const auto result = run_experiment(cfg);
  CHECK(fs::exists(fs::path(cfg.out_dir) / "analysis.json"));
  const auto rep = result.analysis_report;
  CHECK(rep.contains("convergence_bound"));
  CHECK(rep.contains("optimality_gap"));
  CHECK(rep.at("interval_records").size() >= 1);
  const auto summary = read_text_file(cfg.out_dir + "/summary.csv");
  CHECK(summary.find("bound,") != std::string::npos);
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("numeric divergence surfaces as exit code 3 and an incomplete flag") {
  auto cfg = tiny_config("fedavg", "gf_h_diverge");
  cfg.set("model", "mlp");
  cfg.set("eta", "1e200");
  cfg.set("repeats", "1");
  const auto result = run_experiment(cfg);
  CHECK(result.exit_code == 3);
  const auto manifest = load_json(cfg.out_dir + "/manifest.json");
  CHECK(manifest.at("incomplete").get<bool>());
  fs::remove_all(cfg.out_dir);
}

TEST_CASE("accuracy_at_time compares against a shared budget") {
  auto fed = tiny_config("fedavg", "gf_h_aat_fed");
  auto ic = tiny_config("fedavg_ic", "gf_h_aat_ic");
  run_experiment(fed);
  run_experiment(ic);
  const auto cmp = compare({fed.out_dir, ic.out_dir}, CompareMetric::accuracy_at_time, 0.001);
  CHECK(cmp.budget == 0.001);
  const auto csv = compare_to_csv(cmp, CompareMetric::accuracy_at_time);
  CHECK(csv.find("accuracy_at_budget") != std::string::npos);
  for (const auto& row : cmp.rows) {
    CHECK(row.accuracy_at_budget >= 0.0);
    CHECK(row.accuracy_at_budget <= 1.0);
  }
  fs::remove_all(fed.out_dir);
  fs::remove_all(ic.out_dir);
}

TEST_CASE("a serialized topology can drive an experiment through the config") {
  const auto topo = build_fat_tree(4, 3, 0, 6, 2);
  const auto path = (fs::temp_directory_path() / "gf_h_topofile.json").string();
  save_json(topology_to_json(topo), path);

  auto cfg = tiny_config("fedavg", "gf_h_topo_run");
  cfg.set("topology", "file");
  cfg.set("topology_file", path);
  cfg.set("repeats", "1");
  const auto result = run_experiment(cfg);
  CHECK(result.exit_code == 0);
  const auto written = load_json(cfg.out_dir + "/topology.json");
  CHECK(written.at("num_hosts").get<int>() == 6);

  // mismatched node counts are rejected as configuration errors
  auto bad = tiny_config("fedavg", "gf_h_topo_bad");
  bad.set("topology", "file");
  bad.set("topology_file", path);
  bad.set("num_nodes", "8");
  bad.set("num_edges", "4");
  CHECK_THROWS_AS(run_experiment(bad), config_error);
  fs::remove(path);
  fs::remove_all(cfg.out_dir);
}
