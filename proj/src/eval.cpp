#include "percdepth/eval.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "percdepth/training.hpp"

namespace percdepth::eval {

namespace {

template <typename F>
double masked_mean(const Tensor& pred, const Tensor& gt, const std::vector<bool>* mask, F f) {
  require_same_shape(pred, gt, "metric");
  if (mask && mask->size() != gt.size()) throw ShapeError("metric mask size differs from image");
  double s = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (mask && !(*mask)[i]) continue;
    s += f(static_cast<double>(pred.data()[i]) - gt.data()[i]);
    ++n;
  }
  if (n == 0) throw ShapeError("metric over zero pixels");
  return s / static_cast<double>(n);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

double rmse(const Tensor& pred, const Tensor& gt, const std::vector<bool>* mask) {
  return std::sqrt(masked_mean(pred, gt, mask, [](double d) { return d * d; }));
}

double mae(const Tensor& pred, const Tensor& gt, const std::vector<bool>* mask) {
  return masked_mean(pred, gt, mask, [](double d) { return std::abs(d); });
}

void EvalReport::aggregate() {
  auto stats = [&](auto get, double& mean, double& std) {
    mean = std = 0;
    if (images.empty()) return;
    for (const auto& m : images) mean += get(m);
    mean /= static_cast<double>(images.size());
    for (const auto& m : images) std += (get(m) - mean) * (get(m) - mean);
    std = std::sqrt(std / static_cast<double>(images.size()));
  };
  stats([](const ImageMetrics& m) { return m.rmse; }, rmse_mean, rmse_std);
  stats([](const ImageMetrics& m) { return m.mae; }, mae_mean, mae_std);
}

bool EvalReport::all_finite() const {
  for (const auto& m : images)
    if (!std::isfinite(m.rmse) || !std::isfinite(m.mae)) return false;
  return std::isfinite(rmse_mean) && std::isfinite(mae_mean);
}

void EvalReport::write_csv(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << "image,rmse,mae,unit\n";
  const std::string u = data::to_string(unit);
  for (const auto& m : images) out << m.stem << "," << fmt(m.rmse) << "," << fmt(m.mae) << "," << u << "\n";
  out << "mean," << fmt(rmse_mean) << "," << fmt(mae_mean) << "," << u << "\n";
  out << "std_across_images," << fmt(rmse_std) << "," << fmt(mae_std) << "," << u << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

std::string EvalReport::summary(const std::string& label) const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s: RMSE %.6g +- %.6g, MAE %.6g +- %.6g %s (n=%zu, std across images)",
                label.c_str(), rmse_mean, rmse_std, mae_mean, mae_std, data::to_string(unit).c_str(),
                images.size());
  return buf;
}

EvalReport evaluate(const data::EvalPairs& pairs, const data::ScalingSpec& depth,
                    const std::function<Tensor(const Tensor& rgb)>& predict, const EvalOptions& opts) {
  pairs.validate();
  EvalReport r;
  r.unit = depth.unit;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Tensor pred = predict(pairs.rgb[i]);
    const Tensor& gt = pairs.depth[i];
    std::vector<bool> mask;
    if (opts.mask_background) {
      if (!depth.background_value) throw ConfigError("--mask-background needs a background value");
      mask.resize(gt.size());
      for (std::size_t k = 0; k < gt.size(); ++k) {
        mask[k] = static_cast<double>(gt.data()[k]) != *depth.background_value;
      }
    }
    const std::vector<bool>* m = opts.mask_background ? &mask : nullptr;
    r.images.push_back({pairs.stems[i], rmse(pred, gt, m), mae(pred, gt, m)});
  }
  r.aggregate();
  return r;
}

EvalReport evaluate(const nn::Network& gen_y, const data::EvalPairs& pairs,
                    const data::SamplingSpec& sampling, const EvalOptions& opts) {
  return evaluate(pairs, sampling.depth,
                  [&](const Tensor& rgb) { return training::infer(gen_y, rgb, sampling); }, opts);
}

EvalReport evaluate_constant(double value, const data::EvalPairs& pairs,
                             const data::ScalingSpec& depth, const EvalOptions& opts) {
  return evaluate(pairs, depth,
                  [&](const Tensor& rgb) { return Tensor(1, 1, rgb.h(), rgb.w(), static_cast<Real>(value)); },
                  opts);
}

double pool_median(const std::vector<Tensor>& depth_pool) {
  std::vector<Real> all;
  for (const auto& t : depth_pool) all.insert(all.end(), t.values().begin(), t.values().end());
  return data::median(all);
}

}  // namespace percdepth::eval
