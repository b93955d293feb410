#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "nasaswin/tensor.hpp"

namespace nasaswin::oracle {

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Relative error of coordinate i of tensor P is
  ///   |a_i - n_i| / max(max_j |a_j|, max_j |n_j|, floor)
  /// with j over P. Plain elementwise ratios blow up on coordinates whose
  /// gradient cancels to near zero while the curvature does not.
  double floor = 1e-3;
  /// 0 checks every coordinate; otherwise a seeded sample of this many per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t sample_seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst;  // "name[index]: analytic a vs numeric n (tensor scale s)"
  std::size_t checked = 0;
  /// Coordinates whose +/- step changed the sign of some |.| argument in
  /// nasa_attn_matrix. Those are still checked: perturbed evaluations
  /// replay the signs of the unperturbed pass (see SignProbe).
  std::size_t kink_crossings = 0;
  bool passed = true;
};

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

/// Compares the gradients produced by backward() on `loss()` with central
/// differences. `loss` must rebuild the graph from the current parameter
/// values on every call, and must be deterministic in the order in which it
/// calls nasa_attn_matrix.
GradCheckReport check_gradients(const std::function<Tensor()>& loss, const NamedTensors& params,
                                const GradCheckOptions& opts = {});

/// Merges reports: worst error wins, counts add, pass requires all.
void merge_into(GradCheckReport& total, const GradCheckReport& part);

}  // namespace nasaswin::oracle
