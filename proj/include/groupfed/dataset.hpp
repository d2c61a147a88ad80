#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "groupfed/errors.hpp"
#include "groupfed/model.hpp"
#include "groupfed/rng.hpp"

namespace groupfed {

struct Dataset {
  std::vector<Example> examples;
  int num_classes = 0;
  std::string name;

  bool empty() const { return examples.empty(); }
  std::size_t size() const { return examples.size(); }
};

// Isotropic Gaussian blobs, one mean per class drawn uniformly in [-1,1]^dim,
// sigma 0.3. Examples are emitted class-major so counts are exact.
inline Dataset synth_blobs(int num_classes, int input_dim, int per_class, std::uint64_t seed) {
  if (num_classes <= 0 || input_dim <= 0 || per_class <= 0)
    throw config_error("synth_blobs requires positive num_classes, input_dim, per_class");
  Rng rng(Rng::derive(seed, 0xb10b5));
  std::vector<std::vector<double>> means(static_cast<std::size_t>(num_classes));
  for (auto& m : means) {
    m.resize(static_cast<std::size_t>(input_dim));
    for (double& v : m) v = rng.uniform(-1.0, 1.0);
  }
  Dataset ds;
  ds.num_classes = num_classes;
  ds.name = "blobs-c" + std::to_string(num_classes) + "-d" + std::to_string(input_dim) + "-n" +
            std::to_string(per_class) + "-s" + std::to_string(seed);
  ds.examples.reserve(static_cast<std::size_t>(num_classes) * per_class);
  for (int c = 0; c < num_classes; ++c) {
    for (int j = 0; j < per_class; ++j) {
      Example e;
      e.label = c;
      e.features.resize(static_cast<std::size_t>(input_dim));
      for (int d = 0; d < input_dim; ++d)
        e.features[static_cast<std::size_t>(d)] =
            means[static_cast<std::size_t>(c)][static_cast<std::size_t>(d)] + rng.normal(0.0, 0.3);
      ds.examples.push_back(std::move(e));
    }
  }
  return ds;
}

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open " + path, 0);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::uint32_t be32(const std::vector<unsigned char>& buf, std::size_t off, const std::string& path) {
  if (off + 4 > buf.size()) throw format_error(path + ": truncated header", off);
  return (static_cast<std::uint32_t>(buf[off]) << 24) | (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[off + 2]) << 8) | static_cast<std::uint32_t>(buf[off + 3]);
}

}  // namespace detail

// IDX binary reader (the MNIST container format). Big-endian magics
// 0x00000803 for images, 0x00000801 for labels; pixels scaled to [0,1].
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);

  if (detail::be32(img, 0, images_path) != 0x00000803u)
    throw format_error(images_path + ": bad image magic", 0);
  if (detail::be32(lab, 0, labels_path) != 0x00000801u)
    throw format_error(labels_path + ": bad label magic", 0);

  const std::uint32_t n = detail::be32(img, 4, images_path);
  const std::uint32_t rows = detail::be32(img, 8, images_path);
  const std::uint32_t cols = detail::be32(img, 12, images_path);
  const std::uint32_t n_lab = detail::be32(lab, 4, labels_path);
  if (n != n_lab)
    throw format_error("image count " + std::to_string(n) + " != label count " + std::to_string(n_lab), 4);

  const std::size_t dim = static_cast<std::size_t>(rows) * cols;
  if (img.size() < 16 + static_cast<std::size_t>(n) * dim)
    throw format_error(images_path + ": truncated pixel data", img.size());
  if (lab.size() < 8 + n) throw format_error(labels_path + ": truncated label data", lab.size());

  Dataset ds;
  ds.name = images_path;
  int max_label = 0;
  ds.examples.resize(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    Example& e = ds.examples[i];
    e.features.resize(dim);
    const std::size_t base = 16 + static_cast<std::size_t>(i) * dim;
    for (std::size_t d = 0; d < dim; ++d) e.features[d] = static_cast<double>(img[base + d]) / 255.0;
    e.label = static_cast<int>(lab[8 + i]);
    max_label = std::max(max_label, e.label);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

struct SplitResult {
  Dataset train, val, test;
  std::vector<int> small_classes;  // classes with < 5 examples (best-effort proportions)
};

// Stratified 3:1:1 split, deterministic per seed. Within each class the order
// is a seeded shuffle; output concatenates classes in ascending label order.
inline SplitResult split(const Dataset& ds, std::uint64_t seed) {
  if (ds.size() < 5) throw config_error("split requires at least 5 examples");
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(ds.num_classes));
  for (std::size_t i = 0; i < ds.examples.size(); ++i)
    by_class[static_cast<std::size_t>(ds.examples[i].label)].push_back(static_cast<int>(i));

  SplitResult out;
  out.train.num_classes = out.val.num_classes = out.test.num_classes = ds.num_classes;
  out.train.name = ds.name + "/train";
  out.val.name = ds.name + "/val";
  out.test.name = ds.name + "/test";

  Rng rng(Rng::derive(seed, 0x5b111));
  for (int c = 0; c < ds.num_classes; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    rng.shuffle(idx);
    const long n = static_cast<long>(idx.size());
    if (n < 5 && n > 0) out.small_classes.push_back(c);
    const long n_train = std::lround(0.6 * static_cast<double>(n));
    const long n_val = std::lround(0.2 * static_cast<double>(n));
    for (long i = 0; i < n; ++i) {
      const Example& e = ds.examples[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      if (i < n_train)
        out.train.examples.push_back(e);
      else if (i < n_train + n_val)
        out.val.examples.push_back(e);
      else
        out.test.examples.push_back(e);
    }
  }
  return out;
}

}  // namespace groupfed
