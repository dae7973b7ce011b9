#include "ilr/optimizer.hpp"

#include <cmath>

namespace ilr {

AdamState AdamState::zeros(std::shared_ptr<const ParamLayout> layout) {
  AdamState s;
  s.m = zero_params<float>(layout);
  s.v = zero_params<float>(std::move(layout));
  return s;
}

double adam_scalar_step(double g, double& m, double& v, std::uint64_t t, const AdamOptions& o) {
  m = o.beta1 * m + (1 - o.beta1) * g;
  v = o.beta2 * v + (1 - o.beta2) * g * g;
  const double mhat = m / (1 - std::pow(o.beta1, static_cast<double>(t)));
  const double vhat = v / (1 - std::pow(o.beta2, static_cast<double>(t)));
  return -o.lr * mhat / (std::sqrt(vhat) + o.eps);
}

void adam_update(ParamSet<float>& params, const ParamSet<float>& grads, AdamState& state,
                 const AdamOptions& o, const GroupMask& mask) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const float b1 = static_cast<float>(o.beta1);
  const float b2 = static_cast<float>(o.beta2);
  const float c1 = static_cast<float>(1 - std::pow(o.beta1, t));
  const float c2 = static_cast<float>(1 - std::pow(o.beta2, t));
  const float lr = static_cast<float>(o.lr);
  const float eps = static_cast<float>(o.eps);
  const auto& specs = params.lay().specs();
  for (std::size_t i = 0; i < specs.size(); ++i) {
    if (!mask[static_cast<std::size_t>(specs[i].group)]) {
      continue;
    }
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = grads[i].array();
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.square();
    params[i].array() -= lr * (m / c1) / ((v / c2).sqrt() + eps);
  }
}

}  // namespace ilr
