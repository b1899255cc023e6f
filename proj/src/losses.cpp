#include "percdepth/losses.hpp"

#include <cmath>

namespace percdepth::losses {
namespace {

void require_finite(const Tensor& t, const char* what) {
  if (!all_finite(t)) throw NumericError(std::string("non-finite values in ") + what);
}

// Mean absolute difference and, if requested, its gradient w.r.t. `a` scaled by `weight`.
double mae(const Tensor& a, const Tensor& b, double weight, Tensor* grad_a) {
  require_same_shape(a, b, "mae");
  const auto va = a.values();
  const auto vb = b.values();
  const double inv = 1.0 / static_cast<double>(va.size());
  double acc = 0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    acc += std::abs(static_cast<double>(va[i]) - static_cast<double>(vb[i]));
  }
  if (grad_a) {
    *grad_a = Tensor(a.shape());
    auto g = grad_a->values();
    const Real step = static_cast<Real>(weight * inv);
    for (std::size_t i = 0; i < va.size(); ++i) {
      g[i] = va[i] > vb[i] ? step : (va[i] < vb[i] ? -step : Real(0));
    }
  }
  return acc * inv;
}

void add_into(Tensor& dst, const Tensor& src) {
  if (dst.empty()) {
    dst = src;
  } else {
    dst += src;
  }
}

struct ObjectiveWeights {
  double adversarial = 0;
  double reconstruction = 0;
};

GeneratorLoss evaluate_generators(const Networks& nets, const Tensor& x, const Tensor& y,
                                  double gamma, const filters::FilterConfig& filter,
                                  ObjectiveWeights w, Gradients* grad_gy, Gradients* grad_gx) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw ParameterError("gamma must lie in [0, 1], got " + std::to_string(gamma));
  }
  if (x.n() != y.n()) throw ShapeError("x and y batches must have equal size");
  const bool want_grads = grad_gy || grad_gx;
  const double b = static_cast<double>(x.n());

  GeneratorLoss out;
  const nn::Trace fy = nn::forward_trace(nets.gen_y, x);  // G_Y(x)
  const nn::Trace fx = nn::forward_trace(nets.gen_x, y);  // G_X(y)
  const nn::Trace x_rec = nn::forward_trace(nets.gen_x, fy.output());
  const nn::Trace y_rec = nn::forward_trace(nets.gen_y, fx.output());

  Tensor g_fy, g_fx, g_xrec, g_yrec;

  // Adversarial terms.
  {
    const nn::Trace sy = nn::forward_trace(nets.critic_y, fy.output());
    const nn::Trace sx = nn::forward_trace(nets.critic_x, fx.output());
    const auto scores_y = nn::critic_scores(sy.output());
    const auto scores_x = nn::critic_scores(sx.output());
    for (double s : scores_y) out.adv_y -= s / b;
    for (double s : scores_x) out.adv_x -= s / b;
    if (want_grads && w.adversarial != 0) {
      const std::vector<double> weights(x.n(), -w.adversarial / b);
      add_into(g_fy, nn::backward(nets.critic_y, sy,
                                  nn::score_gradient(sy.output().shape(), weights), nullptr));
      add_into(g_fx, nn::backward(nets.critic_x, sx,
                                  nn::score_gradient(sx.output().shape(), weights), nullptr));
    }
  }

  // Reconstruction terms.
  const double feature_weight = w.reconstruction * gamma;
  const double image_weight = w.reconstruction * (1.0 - gamma);
  {
    const int fnx = nn::feature_node(nets.critic_x);
    const int fny = nn::feature_node(nets.critic_y);
    const nn::Trace phi_xrec = nn::forward_trace(nets.critic_x, x_rec.output(), fnx);
    const nn::Trace phi_yrec = nn::forward_trace(nets.critic_y, y_rec.output(), fny);
    const Tensor phi_x = nn::critic_features(nets.critic_x, x);
    const Tensor phi_y = nn::critic_features(nets.critic_y, y);
    const bool feature_grads = want_grads && feature_weight != 0;
    Tensor gphi;
    out.terms.feature_x = mae(phi_xrec.output(), phi_x, feature_weight,
                              feature_grads ? &gphi : nullptr);
    if (feature_grads) add_into(g_xrec, nn::backward(nets.critic_x, phi_xrec, gphi, nullptr));
    out.terms.feature_y = mae(phi_yrec.output(), phi_y, feature_weight,
                              feature_grads ? &gphi : nullptr);
    if (feature_grads) add_into(g_yrec, nn::backward(nets.critic_y, phi_yrec, gphi, nullptr));

    const bool image_grads = want_grads && image_weight != 0;
    const Tensor rgb_rec = model_to_rgb255(x_rec.output());
    const Tensor psi_rec = filters::psi(rgb_rec, filter);
    const Tensor psi_in = filters::psi(model_to_rgb255(x), filter);
    Tensor gpsi;
    out.terms.psi_x = mae(psi_rec, psi_in, image_weight, image_grads ? &gpsi : nullptr);
    if (image_grads) {
      // d rgb255 / d model = 127.5
      add_into(g_xrec, Real(127.5) * filters::psi_backward(rgb_rec, gpsi, filter));
    }
    Tensor gpix;
    out.terms.pixel_y = mae(y_rec.output(), y, image_weight, image_grads ? &gpix : nullptr);
    if (image_grads) add_into(g_yrec, gpix);
  }
  out.rec = out.terms.blended(gamma);

  if (want_grads) {
    Gradients scratch_y, scratch_x;
    Gradients* gy = grad_gy ? grad_gy : &(scratch_y = nn::zero_gradients(nets.gen_y));
    Gradients* gx = grad_gx ? grad_gx : &(scratch_x = nn::zero_gradients(nets.gen_x));
    if (!g_xrec.empty()) add_into(g_fy, nn::backward(nets.gen_x, x_rec, g_xrec, gx));
    if (!g_yrec.empty()) add_into(g_fx, nn::backward(nets.gen_y, y_rec, g_yrec, gy));
    if (!g_fy.empty()) nn::backward(nets.gen_y, fy, g_fy, gy);
    if (!g_fx.empty()) nn::backward(nets.gen_x, fx, g_fx, gx);
    for (const auto& t : *gy) require_finite(t, "generator_Y gradient");
    for (const auto& t : *gx) require_finite(t, "generator_X gradient");
  }
  return out;
}

}  // namespace

void LossConfig::validate() const {
  if (!(p >= 0)) throw ParameterError("gradient penalty weight p must be >= 0");
  if (!(lambda_rec >= 0)) throw ParameterError("lambda_rec must be >= 0");
  if (!(gamma >= 0 && gamma <= 1)) throw ParameterError("gamma must lie in [0, 1]");
  filter.validate();
}

Tensor model_to_rgb255(const Tensor& model) {
  Tensor out(model.shape());
  auto src = model.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] + Real(1)) * Real(127.5);
  return out;
}

Tensor interpolate(const Tensor& real, const Tensor& fake, std::span<const double> eps) {
  require_same_shape(real, fake, "interpolate");
  if (eps.size() != static_cast<std::size_t>(real.n())) {
    throw ShapeError("interpolate: need one eps per sample");
  }
  Tensor out(real.shape());
  for (int i = 0; i < real.n(); ++i) {
    const double e = eps[i];
    if (!(e >= 0.0 && e <= 1.0)) throw ParameterError("eps must lie in [0, 1]");
    auto r = real.sample(i);
    auto f = fake.sample(i);
    auto o = out.sample(i);
    for (std::size_t p = 0; p < o.size(); ++p) {
      o[p] = static_cast<Real>(e * f[p] + (1.0 - e) * r[p]);
    }
  }
  return out;
}

PenaltyResult gradient_penalty(const Network& critic, const Tensor& interp, double p,
                               Gradients* grads) {
  const nn::Trace tr = nn::forward_trace(critic, interp);
  const std::vector<double> ones(interp.n(), 1.0);
  std::vector<Tensor> node_grads;
  const Tensor dx = nn::backward(critic, tr, nn::score_gradient(tr.output().shape(), ones),
                                 nullptr, &node_grads);
  require_finite(dx, "critic input gradient");

  const double b = static_cast<double>(interp.n());
  PenaltyResult res;
  res.norms.resize(interp.n());
  Tensor tangent(interp.shape());
  bool active = false;
  for (int i = 0; i < interp.n(); ++i) {
    double sq = 0;
    for (Real v : dx.sample(i)) sq += static_cast<double>(v) * v;
    const double norm = std::sqrt(sq);
    res.norms[i] = norm;
    const double excess = std::max(0.0, norm - 1.0);
    res.value += p * excess * excess / b;
    if (excess > 0) {
      active = true;
      // d/dv of p/b * (|v| - 1)^2
      const double coef = 2.0 * p * excess / (b * norm);
      auto src = dx.sample(i);
      auto dst = tangent.sample(i);
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<Real>(coef * src[k]);
    }
  }
  if (grads && active) nn::accumulate_input_gradient_vjp(critic, tr, node_grads, tangent, *grads);
  return res;
}

CriticRisk critic_risk(const Network& critic, const Tensor& real, const Tensor& fake,
                       std::span<const double> eps, double p, Gradients* grads) {
  require_same_shape(real, fake, "critic_risk");
  const double b = static_cast<double>(real.n());
  const nn::Trace tf = nn::forward_trace(critic, fake);
  const nn::Trace tr = nn::forward_trace(critic, real);
  const auto sf = nn::critic_scores(tf.output());
  const auto sr = nn::critic_scores(tr.output());
  CriticRisk risk;
  for (int i = 0; i < real.n(); ++i) risk.wasserstein += (sf[i] - sr[i]) / b;
  if (grads) {
    const std::vector<double> plus(real.n(), 1.0 / b);
    const std::vector<double> minus(real.n(), -1.0 / b);
    nn::backward(critic, tf, nn::score_gradient(tf.output().shape(), plus), grads);
    nn::backward(critic, tr, nn::score_gradient(tr.output().shape(), minus), grads);
  }
  risk.penalty = gradient_penalty(critic, interpolate(real, fake, eps), p, grads).value;
  risk.value = risk.wasserstein + risk.penalty;
  if (!std::isfinite(risk.value)) throw NumericError("non-finite critic risk");
  if (grads) {
    for (const auto& t : *grads) require_finite(t, "critic gradient");
  }
  return risk;
}

CriticRisk critic_risk(const Network& critic, const Network& gen, const Tensor& x_batch,
                       const Tensor& real_batch, std::span<const double> eps, double p,
                       Gradients* grads) {
  return critic_risk(critic, real_batch, nn::forward(gen, x_batch), eps, p, grads);
}

double adversarial_risk(const Network& critic, const Network& gen, const Tensor& x_batch,
                        Gradients* gen_grads) {
  const double b = static_cast<double>(x_batch.n());
  const nn::Trace tg = nn::forward_trace(gen, x_batch);
  const nn::Trace tc = nn::forward_trace(critic, tg.output());
  const auto scores = nn::critic_scores(tc.output());
  double risk = 0;
  for (double s : scores) risk -= s / b;
  if (gen_grads) {
    const std::vector<double> weights(x_batch.n(), -1.0 / b);
    const Tensor g = nn::backward(critic, tc, nn::score_gradient(tc.output().shape(), weights),
                                  nullptr);
    nn::backward(gen, tg, g, gen_grads);
  }
  return risk;
}

double perceptual_reconstruction_risk(const Networks& nets, const Tensor& x_batch,
                                      const Tensor& y_batch, double gamma,
                                      const filters::FilterConfig& filter, Gradients* grad_gen_y,
                                      Gradients* grad_gen_x, ReconstructionTerms* terms) {
  const GeneratorLoss l = evaluate_generators(nets, x_batch, y_batch, gamma, filter, {0.0, 1.0},
                                              grad_gen_y, grad_gen_x);
  if (terms) *terms = l.terms;
  return l.rec;
}

GeneratorLoss generator_objective(const Networks& nets, const Tensor& x_batch,
                                  const Tensor& y_batch, const LossConfig& cfg,
                                  Gradients* grad_gen_y, Gradients* grad_gen_x) {
  cfg.validate();
  GeneratorLoss l = evaluate_generators(nets, x_batch, y_batch, cfg.gamma, cfg.filter,
                                        {1.0, cfg.lambda_rec}, grad_gen_y, grad_gen_x);
  l.total = l.adv_y + l.adv_x + cfg.lambda_rec * l.rec;
  if (!std::isfinite(l.total)) throw NumericError("non-finite generator objective");
  return l;
}

}  // namespace percdepth::losses
