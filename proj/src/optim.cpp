#include "percdepth/optim.hpp"

#include <cmath>

namespace percdepth::optim {

AdamState AdamState::for_network(const nn::Network& net) {
  AdamState s;
  for (const auto& p : net.params()) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

void adam_update(nn::Network& net, const nn::Gradients& grads, AdamState& state, double alpha) {
  auto& params = net.params();
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_update: parameter, gradient and moment counts differ");
  }
  if (!(alpha > 0)) throw ParameterError("adam_update: learning rate must be positive");
  ++state.step;
  const double b1 = state.beta1, b2 = state.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& theta = params[p].value;
    require_same_shape(theta, grads[p], "adam_update");
    Real* w = theta.data();
    const Real* g = grads[p].data();
    Real* m = state.m[p].data();
    Real* v = state.v[p].data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i];
      const double mi = b1 * m[i] + (1.0 - b1) * gi;
      const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
      m[i] = static_cast<Real>(mi);
      v[i] = static_cast<Real>(vi);
      w[i] = static_cast<Real>(w[i] - alpha * (mi / c1) / (std::sqrt(vi / c2) + state.epsilon));
    }
  }
}

double gamma_schedule(std::int64_t k, std::int64_t n_g) {
  if (n_g < 1 || k < 0 || k > n_g) throw ParameterError("gamma_schedule: need 0 <= k <= n_G");
  return static_cast<double>(k) / static_cast<double>(n_g);
}

int nf_schedule(std::int64_t k, int n_f_initial, std::int64_t halve_at) {
  if (n_f_initial < 1 || k < 1) throw ParameterError("nf_schedule: need k >= 1 and n_f >= 1");
  return k <= halve_at ? n_f_initial : std::max(1, n_f_initial / 2);
}

}  // namespace percdepth::optim
