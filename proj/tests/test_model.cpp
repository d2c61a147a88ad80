#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "groupfed/model.hpp"

using namespace groupfed;

namespace {

// Scalar re-implementation of softmax cross-entropy, kept deliberately
// independent of the library path (no shared helpers).
double oracle_sr_loss(const std::vector<double>& w, int D, int C, const std::vector<Example>& batch) {
  double total = 0.0;
  for (const auto& e : batch) {
    std::vector<double> z(static_cast<std::size_t>(C));
    for (int c = 0; c < C; ++c) {
      double acc = w[static_cast<std::size_t>(C * D + c)];  // bias
      for (int d = 0; d < D; ++d) acc += w[static_cast<std::size_t>(c * D + d)] * e.features[static_cast<std::size_t>(d)];
      z[static_cast<std::size_t>(c)] = acc;
    }
    double denom = 0.0;
    for (int c = 0; c < C; ++c) denom += std::exp(z[static_cast<std::size_t>(c)]);
    total += -std::log(std::exp(z[static_cast<std::size_t>(e.label)]) / denom);
  }
  return total / static_cast<double>(batch.size());
}

std::vector<Example> random_batch(Rng& rng, int n, int dim, int classes) {
  std::vector<Example> batch(static_cast<std::size_t>(n));
  for (auto& e : batch) {
    e.features.resize(static_cast<std::size_t>(dim));
    for (auto& f : e.features) f = rng.normal(0.0, 1.0);
    e.label = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(classes)));
  }
  return batch;
}

// central finite differences, one coordinate at a time
std::vector<double> fd_gradient(const ModelParams& p, const std::vector<Example>& batch, double h = 1e-6) {
  std::vector<double> g(p.values.size());
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    ModelParams plus = p, minus = p;
    plus.values[i] += h;
    minus.values[i] -= h;
    g[i] = (loss(plus, batch) - loss(minus, batch)) / (2.0 * h);
  }
  return g;
}

void check_gradient_close(const std::vector<double>& got, const std::vector<double>& want) {
  for (std::size_t i = 0; i < got.size(); ++i) {
    const double denom = std::max(std::abs(want[i]), 1e-8);
    REQUIRE(std::abs(got[i] - want[i]) / denom < 1e-4);
  }
}

}  // namespace

TEST_CASE("param_count follows the layout") {
  CHECK(ModelSpec::softmax(20, 10).param_count() == 21 * 10);
  CHECK(ModelSpec::mlp(20, 10, 32).param_count() == 21 * 32 + 33 * 10);
  CHECK_THROWS_AS(ModelSpec::softmax(0, 10), config_error);
}

TEST_CASE("zero-weight SR loss is log(num_classes)") {
  const auto spec = ModelSpec::softmax(4, 10);
  const auto p = ModelParams::zeros(spec);
  Rng rng(7);
  const auto batch = random_batch(rng, 12, 4, 10);
  CHECK(loss(p, batch) == Catch::Approx(2.302585092994046).epsilon(1e-12));
}

TEST_CASE("saturated softmax loss approaches zero") {
  const auto spec = ModelSpec::softmax(1, 2);
  ModelParams p = ModelParams::zeros(spec);
  // logit gap +1000 toward class 1 for feature x = 1
  p.values[1 * 1 + 0] = 1000.0;  // W[1][0]
  Example e{{1.0}, 1};
  CHECK(loss(p, std::vector<Example>{e}) < 1e-12);
}

TEST_CASE("SR loss matches the scalar oracle on a hand-written batch") {
  const int D = 2, C = 3;
  const auto spec = ModelSpec::softmax(D, C);
  ModelParams p{{0.1, -0.2, 0.05, 0.3, -0.1, 0.02, 0.01, -0.03, 0.2}, spec};
  std::vector<Example> batch = {
      {{1.0, 2.0}, 0}, {{-0.5, 0.25}, 1}, {{0.0, -1.0}, 2}, {{2.0, 0.5}, 1}};
  CHECK(loss(p, batch) == Catch::Approx(oracle_sr_loss(p.values, D, C, batch)).epsilon(1e-12));
}

TEST_CASE("empty batch and shape mismatches are rejected") {
  const auto spec = ModelSpec::softmax(3, 2);
  const auto p = ModelParams::zeros(spec);
  CHECK_THROWS_AS(loss(p, std::vector<Example>{}), std::invalid_argument);
  Example bad{{1.0}, 0};
  CHECK_THROWS_AS(loss(p, std::vector<Example>{bad}), shape_error);
  Example bad_label{{1.0, 0.0, 0.0}, 5};
  CHECK_THROWS_AS(loss(p, std::vector<Example>{bad_label}), shape_error);
}

TEST_CASE("gradient bias entries at zero equal softmax minus onehot") {
  const int C = 5;
  const auto spec = ModelSpec::softmax(3, C);
  const auto p = ModelParams::zeros(spec);
  Example e{{0.5, -0.3, 1.0}, 2};
  const auto g = gradient(p, std::vector<Example>{e});
  for (int c = 0; c < C; ++c) {
    const double expect = (c == 2 ? 1.0 / C - 1.0 : 1.0 / C);
    CHECK(g.values[static_cast<std::size_t>(3 * C + c)] == Catch::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("SR gradient matches central finite differences") {
  Rng rng(11);
  const auto spec = ModelSpec::softmax(4, 3);
  for (int trial = 0; trial < 5; ++trial) {
    auto p = init_params(spec, rng);
    const auto batch = random_batch(rng, 6, 4, 3);
    check_gradient_close(gradient(p, batch).values, fd_gradient(p, batch));
  }
}

TEST_CASE("MLP gradient matches central finite differences") {
  Rng rng(13);
  const auto spec = ModelSpec::mlp(3, 3, 4);
  for (int trial = 0; trial < 3; ++trial) {
    auto p = init_params(spec, rng);
    const auto batch = random_batch(rng, 3, 3, 3);
    check_gradient_close(gradient(p, batch).values, fd_gradient(p, batch));
  }
}

TEST_CASE("directional derivative matches the gradient inner product") {
  Rng rng(17);
  const auto spec = ModelSpec::mlp(5, 4, 6);
  auto p = init_params(spec, rng);
  const auto batch = random_batch(rng, 8, 5, 4);
  std::vector<double> dir(p.values.size());
  double norm = 0.0;
  for (auto& d : dir) {
    d = rng.normal();
    norm += d * d;
  }
  norm = std::sqrt(norm);
  for (auto& d : dir) d /= norm;
  const double h = 1e-6;
  ModelParams plus = p, minus = p;
  for (std::size_t i = 0; i < dir.size(); ++i) {
    plus.values[i] += h * dir[i];
    minus.values[i] -= h * dir[i];
  }
  const double fd = (loss(plus, batch) - loss(minus, batch)) / (2.0 * h);
  const auto g = gradient(p, batch);
  double ip = 0.0;
  for (std::size_t i = 0; i < dir.size(); ++i) ip += g.values[i] * dir[i];
  CHECK(std::abs(fd - ip) / std::max(std::abs(ip), 1e-8) < 1e-4);
}

TEST_CASE("sgd_step with eta 0 is the identity, otherwise literal descent") {
  Rng rng(19);
  const auto spec = ModelSpec::softmax(3, 3);
  auto p = init_params(spec, rng);
  const auto batch = random_batch(rng, 5, 3, 3);
  const auto same = sgd_step(p, batch, 0.0);
  CHECK(same.values == p.values);

  const auto g = gradient(p, batch);
  const auto stepped = sgd_step(p, batch, 0.1);
  for (std::size_t i = 0; i < p.values.size(); ++i)
    CHECK(stepped.values[i] == Catch::Approx(p.values[i] - 0.1 * g.values[i]).margin(1e-15));
  CHECK_THROWS_AS(sgd_step(p, batch, std::nan("")), std::invalid_argument);
}

TEST_CASE("two small steps on a convex SR instance reduce the loss monotonically") {
  const auto spec = ModelSpec::softmax(1, 2);
  ModelParams p = ModelParams::zeros(spec);
  std::vector<Example> batch = {{{1.0}, 0}, {{-1.0}, 1}, {{0.8}, 0}, {{-1.2}, 1}};
  const double l0 = loss(p, batch);
  const auto p1 = sgd_step(p, batch, 0.1);
  const double l1 = loss(p1, batch);
  const auto p2 = sgd_step(p1, batch, 0.1);
  const double l2 = loss(p2, batch);
  CHECK(l1 < l0);
  CHECK(l2 < l1);
}

TEST_CASE("weighted_average identities") {
  const auto spec = ModelSpec::softmax(1, 2);
  ModelParams a{{1.0, 1.0, 0.0, 0.0}, spec};
  ModelParams b{{3.0, 3.0, 0.0, 0.0}, spec};

  const std::vector<WeightedModel> one{{&a, 1.0}};
  CHECK(weighted_average(one).values == a.values);

  const std::vector<WeightedModel> same{{&a, 0.3}, {&a, 0.7}};
  const auto avg_same = weighted_average(same);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    CHECK(avg_same.values[i] == Catch::Approx(a.values[i]).margin(1e-15));

  const std::vector<WeightedModel> mix{{&a, 0.5}, {&b, 0.5}};
  const auto avg = weighted_average(mix);
  CHECK(avg.values[0] == Catch::Approx(2.0));
  CHECK(avg.values[1] == Catch::Approx(2.0));

  const std::vector<WeightedModel> bad{{&a, 0.5}, {&b, 0.6}};
  CHECK_THROWS_AS(weighted_average(bad), std::invalid_argument);
}

TEST_CASE("weighted_average is permutation invariant up to 1e-12") {
  Rng rng(23);
  const auto spec = ModelSpec::softmax(4, 3);
  std::vector<ModelParams> models;
  for (int i = 0; i < 6; ++i) models.push_back(init_params(spec, rng));
  std::vector<double> w{0.1, 0.2, 0.15, 0.25, 0.05, 0.25};
  std::vector<WeightedModel> fwd, rev;
  for (int i = 0; i < 6; ++i) fwd.push_back({&models[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(i)]});
  for (int i = 5; i >= 0; --i) rev.push_back({&models[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(i)]});
  const auto x = weighted_average(fwd), y = weighted_average(rev);
  for (std::size_t i = 0; i < x.values.size(); ++i)
    CHECK(std::abs(x.values[i] - y.values[i]) < 1e-12);
}

TEST_CASE("accuracy tie-breaks toward the lowest class") {
  const auto spec = ModelSpec::softmax(2, 10);
  const auto p = ModelParams::zeros(spec);
  std::vector<Example> testset;
  for (int c = 0; c < 10; ++c) testset.push_back({{0.1, 0.2}, c});
  // all logits equal -> predicted class 0 -> only the class-0 example scores
  CHECK(accuracy(p, testset) == Catch::Approx(0.1));
  CHECK_THROWS_AS(accuracy(p, std::vector<Example>{}), std::invalid_argument);
}

TEST_CASE("accuracy matches manual enumeration on a hand-built set") {
  const auto spec = ModelSpec::softmax(1, 3);
  // W = [[2],[0],[-2]], b = [0,0,0]: predicts 0 for x>0, ties at x=0 -> 0, 2 for x<0
  ModelParams p{{2.0, 0.0, -2.0, 0.0, 0.0, 0.0}, spec};
  std::vector<Example> testset;
  int expected_correct = 0;
  for (int i = 0; i < 20; ++i) {
    const double x = -1.9 + 0.2 * i;  // never exactly zero
    const int predicted = x > 0.0 ? 0 : 2;
    const int label = i % 3;
    if (predicted == label) ++expected_correct;
    testset.push_back({{x}, label});
  }
  CHECK(accuracy(p, testset) == Catch::Approx(expected_correct / 20.0));
}

TEST_CASE("saturated correct logits give accuracy 1") {
  const auto spec = ModelSpec::softmax(1, 2);
  ModelParams p{{1000.0, -1000.0, 0.0, 0.0}, spec};
  std::vector<Example> testset = {{{1.0}, 0}, {{-1.0}, 1}, {{2.0}, 0}};
  CHECK(accuracy(p, testset) == 1.0);
}

TEST_CASE("SR loss is convex in the parameters") {
  Rng rng(29);
  const auto spec = ModelSpec::softmax(3, 4);
  const auto batch = random_batch(rng, 10, 3, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto w1 = init_params(spec, rng);
    const auto w2 = init_params(spec, rng);
    const double lam = rng.uniform01();
    ModelParams mid = w1;
    for (std::size_t i = 0; i < mid.values.size(); ++i)
      mid.values[i] = lam * w1.values[i] + (1.0 - lam) * w2.values[i];
    CHECK(loss(mid, batch) <= lam * loss(w1, batch) + (1.0 - lam) * loss(w2, batch) + 1e-9);
  }
}

TEST_CASE("uniform init stays inside [-0.05, 0.05] and is seed deterministic") {
  const auto spec = ModelSpec::mlp(8, 5, 7);
  Rng a(42), b(42);
  const auto p1 = init_params(spec, a);
  const auto p2 = init_params(spec, b);
  CHECK(p1.values == p2.values);
  for (double v : p1.values) {
    CHECK(v >= -0.05);
    CHECK(v <= 0.05);
  }
}

TEST_CASE("descent with eta at most one over beta never raises the convex loss") {
  const auto ds_spec = ModelSpec::softmax(3, 4);
  Rng rng(31);
  std::vector<Example> batch;
  for (int i = 0; i < 30; ++i) {
    Example e;
    e.features = {rng.normal(), rng.normal(), rng.normal()};
    e.label = static_cast<int>(rng.uniform_int(4));
    batch.push_back(e);
  }
  // crude smoothness bound from sampled gradient ratios
  double beta = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto a = init_params(ds_spec, rng);
    auto b = a;
    for (auto& v : b.values) v += rng.normal(0.0, 0.5);
    const double dist = l2_distance(a.values, b.values);
    if (dist < 1e-9) continue;
    beta = std::max(beta, l2_distance(gradient(a, batch).values, gradient(b, batch).values) / dist);
  }
  REQUIRE(beta > 0.0);
  const double eta = 1.0 / beta;
  for (int trial = 0; trial < 10; ++trial) {
    const auto p = init_params(ds_spec, rng);
    CHECK(loss(sgd_step(p, batch, eta), batch) <= loss(p, batch) + 1e-9);
  }
}
