#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace agbp {

/// Mean/variance pair of a Gaussian message.
struct Gaussian {
  double mean = 0.0;
  double variance = 1.0;

  friend bool operator==(const Gaussian&, const Gaussian&) = default;
};

/// Every directed message of a factor graph, indexed by edge id.
///
/// Factor-to-variable slots exist for all edges. Variable-to-factor slots are
/// only meaningful on edges of branch factors; leaf slots stay NaN, as do all
/// x2f slots until the first half-iteration (`has_x2f`).
struct MessageState {
  std::vector<double> f2x_mean;
  std::vector<double> f2x_variance;
  std::vector<double> x2f_mean;
  std::vector<double> x2f_variance;
  std::uint64_t iteration = 0;
  bool has_x2f = false;

  std::size_t edge_count() const noexcept { return f2x_mean.size(); }
  Gaussian f2x(std::size_t edge) const { return {f2x_mean[edge], f2x_variance[edge]}; }
  Gaussian x2f(std::size_t edge) const { return {x2f_mean[edge], x2f_variance[edge]}; }

  friend bool operator==(const MessageState&, const MessageState&) = default;
};

}  // namespace agbp
