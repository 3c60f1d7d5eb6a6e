#pragma once

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "agbp/graph.hpp"
#include "agbp/model.hpp"

namespace agbp::test {

/// Dense H plus observations and variances, turned into a model with the
/// zero entries dropped.
inline LinearModel dense_model(const Eigen::MatrixXd& h, const std::vector<double>& z,
                               const std::vector<double>& v) {
  std::vector<Entry> entries;
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      if (h(i, j) != 0.0) entries.push_back({std::size_t(i), std::size_t(j), h(i, j)});
    }
  }
  return LinearModel(std::size_t(h.rows()), std::size_t(h.cols()), std::move(entries), z, v);
}

/// Loopy toy model: `branches` rows with `width` distinct variables each,
/// plus one leaf row per variable with variance `leaf_variance`.
inline LinearModel loopy_model(std::size_t n, std::size_t branches, std::size_t width,
                               double leaf_variance, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> column(0, n - 1);
  std::vector<Entry> entries;
  std::vector<double> z, v;
  for (std::size_t i = 0; i < branches; ++i) {
    std::vector<std::size_t> cols;
    while (cols.size() < width) {
      const std::size_t c = column(rng);
      if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    }
    std::sort(cols.begin(), cols.end());
    for (std::size_t c : cols) entries.push_back({i, c, normal(rng)});
    z.push_back(normal(rng));
    v.push_back(1.0);
  }
  for (std::size_t j = 0; j < n; ++j) {
    entries.push_back({branches + j, j, 1.0});
    z.push_back(normal(rng));
    v.push_back(leaf_variance);
  }
  return LinearModel(branches + n, n, std::move(entries), std::move(z), std::move(v));
}

/// Chain x0 - x1 - ... with a leaf on every variable and a pairwise row
/// between neighbours: a tree factor graph.
inline LinearModel chain_model(std::size_t n) {
  std::vector<Entry> entries;
  std::vector<double> z, v;
  for (std::size_t j = 0; j < n; ++j) {
    entries.push_back({j, j, 1.0 + 0.5 * double(j)});
    z.push_back(double(j) + 1.0);
    v.push_back(0.5 + double(j));
  }
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const std::size_t row = n + j;
    entries.push_back({row, j, 1.0});
    entries.push_back({row, j + 1, -2.0});
    z.push_back(0.25 * double(j));
    v.push_back(2.0);
  }
  return LinearModel(2 * n - 1, n, std::move(entries), std::move(z), std::move(v));
}

/// Small two-cluster SDD instance used across suites.
inline GeneratorSpec small_sdd(std::uint64_t seed, std::size_t rows = 20) {
  GeneratorSpec spec;
  spec.cluster_count = 2;
  spec.rows_per_cluster = rows;
  spec.cols_per_cluster = rows;
  spec.expected_internal_edges = 6.0 * double(rows);
  spec.expected_tie_edges = 5.0;
  spec.kind = MatrixKind::symmetric;
  spec.diagonal_increment = 0.01;
  spec.seed = seed;
  return spec;
}

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(AGBP_FIXTURE_DIR) / name;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("agbp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace agbp::test
