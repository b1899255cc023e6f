#pragma once

#include <span>
#include <vector>

#include "percdepth/filters.hpp"
#include "percdepth/network.hpp"

// Empirical risks of the dual Wasserstein GAN with perceptual reconstruction.
// Batches live in model space [-1, 1]; critic patch maps are averaged to one
// score per sample.
namespace percdepth::losses {

using nn::Gradients;
using nn::Network;

struct LossConfig {
  double p = 100.0;
  double lambda_rec = 10.0;
  double gamma = 0.0;
  filters::FilterConfig filter{};

  void validate() const;
};

// eps[n] * fake[n] + (1 - eps[n]) * real[n].
Tensor interpolate(const Tensor& real, const Tensor& fake, std::span<const double> eps);

struct PenaltyResult {
  double value = 0;            // p * mean_n ((|grad_n| - 1)_+)^2
  std::vector<double> norms;   // per-sample input-gradient norms
};

// One-sided gradient penalty at `interp`. Accumulates d value / d critic
// weights into `grads` when non-null.
PenaltyResult gradient_penalty(const Network& critic, const Tensor& interp, double p,
                               Gradients* grads);

struct CriticRisk {
  double value = 0;        // wasserstein + penalty
  double wasserstein = 0;  // mean_n f(fake_n) - f(real_n)
  double penalty = 0;
};

// `fake` is treated as a constant (generator output computed by the caller).
CriticRisk critic_risk(const Network& critic, const Tensor& real, const Tensor& fake,
                       std::span<const double> eps, double p, Gradients* grads);
// Runs `gen` on `x_batch` to produce the fakes.
CriticRisk critic_risk(const Network& critic, const Network& gen, const Tensor& x_batch,
                       const Tensor& real_batch, std::span<const double> eps, double p,
                       Gradients* grads);

// -mean_n f(G(x_n)). Accumulates generator gradients when `gen_grads` is non-null;
// the critic is held constant.
double adversarial_risk(const Network& critic, const Network& gen, const Tensor& x_batch,
                        Gradients* gen_grads);

struct Networks {
  const Network& gen_y;     // RGB -> depth
  const Network& gen_x;     // depth -> RGB
  const Network& critic_y;  // depth critic
  const Network& critic_x;  // RGB critic
};

struct ReconstructionTerms {
  double feature_x = 0;  // MAE(phi_X(G_X(G_Y(x))), phi_X(x))
  double feature_y = 0;  // MAE(phi_Y(G_Y(G_X(y))), phi_Y(y))
  double psi_x = 0;      // MAE(psi(G_X(G_Y(x))), psi(x)) on [0,255] RGB
  double pixel_y = 0;    // MAE(G_Y(G_X(y)), y)

  double blended(double gamma) const {
    return gamma * (feature_x + feature_y) + (1.0 - gamma) * (psi_x + pixel_y);
  }
};

struct GeneratorLoss {
  double adv_y = 0;
  double adv_x = 0;
  ReconstructionTerms terms;
  double rec = 0;    // terms.blended(gamma)
  double total = 0;  // adv_y + adv_x + lambda_rec * rec
};

// Reconstruction risk alone; gradients (if requested) are those of the risk itself.
double perceptual_reconstruction_risk(const Networks& nets, const Tensor& x_batch,
                                      const Tensor& y_batch, double gamma,
                                      const filters::FilterConfig& filter, Gradients* grad_gen_y,
                                      Gradients* grad_gen_x, ReconstructionTerms* terms = nullptr);

// R_adv(theta_Y) + R_adv(theta_X) + lambda_rec * R_rec. Each generator's
// gradient buffer receives the derivative of the full objective; critic
// weights are constants and never receive gradient.
GeneratorLoss generator_objective(const Networks& nets, const Tensor& x_batch,
                                  const Tensor& y_batch, const LossConfig& cfg,
                                  Gradients* grad_gen_y, Gradients* grad_gen_x);

// Affine [-1,1] <-> [0,255] map used before psi.
Tensor model_to_rgb255(const Tensor& model);

}  // namespace percdepth::losses
