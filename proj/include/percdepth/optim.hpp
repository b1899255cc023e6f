#pragma once

#include <cstdint>

#include "percdepth/network.hpp"

namespace percdepth::optim {

// Adam with bias correction. Moments are shaped like the network parameters.
struct AdamState {
  double beta1 = 0.0;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;

  static AdamState for_network(const nn::Network& net);
};

// One step: theta -= alpha * m_hat / (sqrt(v_hat) + epsilon).
void adam_update(nn::Network& net, const nn::Gradients& grads, AdamState& state, double alpha);

// k / n_G.
double gamma_schedule(std::int64_t k, std::int64_t n_g);
// n_f_initial through k == halve_at, n_f_initial / 2 (at least 1) afterwards.
int nf_schedule(std::int64_t k, int n_f_initial, std::int64_t halve_at);

}  // namespace percdepth::optim
