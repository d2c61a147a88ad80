#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "groupfed/dataset.hpp"
#include "groupfed/model.hpp"

using namespace groupfed;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<long>(bytes.size()));
}

void push_be32(std::vector<unsigned char>& v, std::uint32_t x) {
  v.push_back(static_cast<unsigned char>(x >> 24));
  v.push_back(static_cast<unsigned char>(x >> 16));
  v.push_back(static_cast<unsigned char>(x >> 8));
  v.push_back(static_cast<unsigned char>(x));
}

}  // namespace

TEST_CASE("synth_blobs honors the count contract and determinism") {
  const auto ds = synth_blobs(10, 20, 100, 1);
  REQUIRE(ds.size() == 1000);
  std::map<int, int> per_class;
  for (const auto& e : ds.examples) ++per_class[e.label];
  for (int c = 0; c < 10; ++c) CHECK(per_class[c] == 100);

  const auto again = synth_blobs(10, 20, 100, 1);
  REQUIRE(again.size() == ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(again.examples[i].label == ds.examples[i].label);
    CHECK(again.examples[i].features == ds.examples[i].features);
  }
  const auto other = synth_blobs(10, 20, 100, 2);
  CHECK(other.examples[0].features != ds.examples[0].features);
}

TEST_CASE("well-separated blobs are learnable by centrally trained SR") {
  const auto ds = synth_blobs(2, 2, 500, 7);
  const auto spec = ModelSpec::softmax(2, 2);
  ModelParams w = ModelParams::zeros(spec);
  for (int it = 0; it < 300; ++it) w = sgd_step(w, ds.examples, 0.5);
  CHECK(accuracy(w, ds.examples) >= 0.95);
}

TEST_CASE("hand-crafted IDX fixture parses byte-for-byte") {
  std::vector<unsigned char> img;
  push_be32(img, 0x00000803);
  push_be32(img, 2);  // two images
  push_be32(img, 2);  // rows
  push_be32(img, 2);  // cols
  const std::vector<unsigned char> pixels = {0, 255, 128, 64, 255, 0, 32, 16};
  img.insert(img.end(), pixels.begin(), pixels.end());

  std::vector<unsigned char> lab;
  push_be32(lab, 0x00000801);
  push_be32(lab, 2);
  lab.push_back(1);
  lab.push_back(0);

  const auto img_path = temp_path("gf_idx_images");
  const auto lab_path = temp_path("gf_idx_labels");
  write_bytes(img_path, img);
  write_bytes(lab_path, lab);

  const auto ds = load_idx(img_path, lab_path);
  REQUIRE(ds.size() == 2);
  CHECK(ds.examples[0].features == std::vector<double>{0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0});
  CHECK(ds.examples[1].features == std::vector<double>{1.0, 0.0, 32.0 / 255.0, 16.0 / 255.0});
  CHECK(ds.examples[0].label == 1);
  CHECK(ds.examples[1].label == 0);
  CHECK(ds.num_classes == 2);

  // labels file carrying the image magic must be rejected
  CHECK_THROWS_AS(load_idx(img_path, img_path), format_error);

  // truncated pixel payload reports a format error
  std::vector<unsigned char> short_img(img.begin(), img.end() - 3);
  const auto short_path = temp_path("gf_idx_short");
  write_bytes(short_path, short_img);
  CHECK_THROWS_AS(load_idx(short_path, lab_path), format_error);

  // count mismatch between the two files
  std::vector<unsigned char> lab3;
  push_be32(lab3, 0x00000801);
  push_be32(lab3, 3);
  lab3.push_back(0);
  lab3.push_back(1);
  lab3.push_back(0);
  const auto lab3_path = temp_path("gf_idx_lab3");
  write_bytes(lab3_path, lab3);
  CHECK_THROWS_AS(load_idx(img_path, lab3_path), format_error);

  std::remove(img_path.c_str());
  std::remove(lab_path.c_str());
  std::remove(short_path.c_str());
  std::remove(lab3_path.c_str());
}

TEST_CASE("split is a stratified 3:1:1 partition of the dataset") {
  const auto ds = synth_blobs(10, 5, 100, 3);
  const auto sp = split(ds, 9);
  CHECK(sp.train.size() == 600);
  CHECK(sp.val.size() == 200);
  CHECK(sp.test.size() == 200);

  // union equals the original multiset (keyed by the full feature vector)
  auto key = [](const Example& e) {
    std::string k = std::to_string(e.label);
    for (double f : e.features) k += "," + std::to_string(f);
    return k;
  };
  std::map<std::string, int> counts;
  for (const auto& e : ds.examples) ++counts[key(e)];
  for (const auto* part : {&sp.train, &sp.val, &sp.test})
    for (const auto& e : part->examples) --counts[key(e)];
  for (const auto& [k, v] : counts) CHECK(v == 0);
}

TEST_CASE("split keeps per-class counts within one of exact stratification") {
  // 50 examples, uneven classes: 23 / 17 / 10
  Dataset ds;
  ds.num_classes = 3;
  ds.name = "uneven";
  auto add = [&](int label, int n) {
    for (int i = 0; i < n; ++i) ds.examples.push_back({{static_cast<double>(i)}, label});
  };
  add(0, 23);
  add(1, 17);
  add(2, 10);
  const auto sp = split(ds, 4);
  std::map<int, int> train_c, val_c, test_c;
  for (const auto& e : sp.train.examples) ++train_c[e.label];
  for (const auto& e : sp.val.examples) ++val_c[e.label];
  for (const auto& e : sp.test.examples) ++test_c[e.label];
  const std::map<int, int> totals{{0, 23}, {1, 17}, {2, 10}};
  for (const auto& [c, n] : totals) {
    CHECK(std::abs(train_c[c] - 0.6 * n) <= 1.0);
    CHECK(std::abs(val_c[c] - 0.2 * n) <= 1.0);
    CHECK(std::abs(test_c[c] - 0.2 * n) <= 1.0);
    CHECK(train_c[c] + val_c[c] + test_c[c] == n);
  }
}

TEST_CASE("split flags classes with fewer than five examples") {
  Dataset ds;
  ds.num_classes = 2;
  ds.name = "tiny-class";
  for (int i = 0; i < 20; ++i) ds.examples.push_back({{static_cast<double>(i)}, 0});
  for (int i = 0; i < 3; ++i) ds.examples.push_back({{static_cast<double>(i)}, 1});
  const auto sp = split(ds, 1);
  REQUIRE(sp.small_classes.size() == 1);
  CHECK(sp.small_classes[0] == 1);

  Dataset too_small;
  too_small.num_classes = 1;
  too_small.examples.push_back({{1.0}, 0});
  CHECK_THROWS_AS(split(too_small, 1), config_error);
}
