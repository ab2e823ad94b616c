#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace snowflake {

/// Bias-corrected Adam over a fixed list of parameter tensors. Moments are
/// allocated on the first step and shaped like the tensors seen there.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One Adam update of `params` (in place) from `grads`. Throws
/// InvalidArgument if the tensor list or any tensor size disagrees.
void adam_step(AdamState& state, std::span<const std::span<double>> params,
               std::span<const std::span<const double>> grads, double lr);

}  // namespace snowflake
