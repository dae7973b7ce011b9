#pragma once

#include <array>

#include "ilr/params.hpp"

namespace ilr {

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moments live beside the parameters so the whole
// optimizer state can be checkpointed.
struct AdamState {
  std::uint64_t step = 0;
  ParamSet<float> m;
  ParamSet<float> v;

  static AdamState zeros(std::shared_ptr<const ParamLayout> layout);
};

// Which parameter groups receive updates (indexed by ParamGroup).
using GroupMask = std::array<bool, 4>;
inline constexpr GroupMask kAllGroups{true, true, true, true};

// One update of params from grads. Tensors outside mask are left untouched,
// moments included.
void adam_update(ParamSet<float>& params, const ParamSet<float>& grads, AdamState& state,
                 const AdamOptions& options, const GroupMask& mask = kAllGroups);

// The step a single scalar would take, exposed for checking the update rule.
double adam_scalar_step(double g, double& m, double& v, std::uint64_t t, const AdamOptions& o);

}  // namespace ilr
