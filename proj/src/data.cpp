#include "percdepth/data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace percdepth::data {

namespace {

void require_image(const Tensor& img, const char* what) {
  if (img.n() != 1 || img.empty()) {
    throw ShapeError(std::string(what) + ": expected a single image, got " + to_string(img.shape()));
  }
}

double deg(double d) { return d * std::numbers::pi / 180.0; }

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<E, const char*>, N>& names,
             const char* what) {
  for (const auto& [e, n] : names)
    if (s == n) return e;
  throw ConfigError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string enum_name(E e, const std::array<std::pair<E, const char*>, N>& names) {
  for (const auto& [v, n] : names)
    if (v == e) return n;
  return "?";
}

constexpr std::array<std::pair<Unit, const char*>, 3> kUnits{
    {{Unit::micrometer, "micrometer"}, {Unit::unitless, "unitless"}, {Unit::meter, "meter"}}};
constexpr std::array<std::pair<CenterMode, const char*>, 2> kCenter{
    {{CenterMode::none, "none"}, {CenterMode::median_subtract, "median_subtract"}}};
constexpr std::array<std::pair<AugmentOp, const char*>, 7> kOps{{
    {AugmentOp::random_crop, "random_crop"},
    {AugmentOp::horizontal_flip, "horizontal_flip"},
    {AugmentOp::vertical_flip, "vertical_flip"},
    {AugmentOp::gamma_jitter, "gamma_jitter"},
    {AugmentOp::histogram_equalization, "histogram_equalization"},
    {AugmentOp::gaussian_blur, "gaussian_blur"},
    {AugmentOp::resize_pad, "resize_pad"},
}};

}  // namespace

std::string to_string(Unit u) { return enum_name(u, kUnits); }
std::string to_string(CenterMode m) { return enum_name(m, kCenter); }
std::string to_string(AugmentOp op) { return enum_name(op, kOps); }
Unit parse_unit(std::string_view s) { return parse_enum(s, kUnits, "unit"); }
CenterMode parse_center_mode(std::string_view s) { return parse_enum(s, kCenter, "center mode"); }
AugmentOp parse_augment_op(std::string_view s) { return parse_enum(s, kOps, "augmentation"); }

void ScalingSpec::validate() const {
  if (!std::isfinite(physical_min) || !std::isfinite(physical_max) ||
      !(physical_min < physical_max)) {
    throw ConfigError("scaling range must satisfy min < max");
  }
  if (background_value && !std::isfinite(*background_value)) {
    throw ConfigError("background value must be finite");
  }
}

ScalingSpec scaling_preset(std::string_view name) {
  if (name == "surface") return {-5.0, 5.0, Unit::micrometer, std::nullopt, CenterMode::none};
  if (name == "face") return {0.0, 1.0, Unit::unitless, 0.0, CenterMode::none};
  if (name == "body") return {-0.4725, 0.4725, Unit::meter, -0.4725, CenterMode::median_subtract};
  if (name == "synth") return {-1.0, 1.0, Unit::unitless, 0.0, CenterMode::none};
  if (name == "rgb") return {0.0, 255.0, Unit::unitless, std::nullopt, CenterMode::none};
  throw ConfigError("unknown scaling preset '" + std::string(name) + "'");
}

double median(std::span<const Real> v) {
  if (v.empty()) throw ShapeError("median of an empty range");
  std::vector<Real> s(v.begin(), v.end());
  const std::size_t m = s.size() / 2;
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(m), s.end());
  if (s.size() % 2 == 1) return s[m];
  const Real upper = s[m];
  const Real lower = *std::max_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(m));
  return 0.5 * (static_cast<double>(lower) + upper);
}

Tensor scale_to_model(const Tensor& x, const ScalingSpec& spec) {
  spec.validate();
  if (!all_finite(x)) throw NumericError("scale_to_model: non-finite input");
  Tensor out(x.shape());
  const double mid = spec.mid(), half = spec.half();
  for (int i = 0; i < x.n(); ++i) {
    const double center =
        spec.center_mode == CenterMode::median_subtract ? median(x.sample(i)) : 0.0;
    auto src = x.sample(i);
    auto dst = out.sample(i);
    for (std::size_t k = 0; k < src.size(); ++k) {
      const double v = (static_cast<double>(src[k]) - center - mid) / half;
      dst[k] = static_cast<Real>(std::clamp(v, -1.0, 1.0));
    }
  }
  return out;
}

Tensor unscale(const Tensor& y, const ScalingSpec& spec) {
  spec.validate();
  Tensor out(y.shape());
  const double mid = spec.mid(), half = spec.half();
  for (std::size_t k = 0; k < y.size(); ++k) {
    out.data()[k] = static_cast<Real>(static_cast<double>(y.data()[k]) * half + mid);
  }
  return out;
}

bool AugmentSpec::has(AugmentOp op) const {
  return std::find(ops.begin(), ops.end(), op) != ops.end();
}

void AugmentSpec::validate() const {
  if (has(AugmentOp::random_crop) && crop_size < 1) throw ConfigError("random_crop needs crop_size >= 1");
  if (has(AugmentOp::resize_pad) && resize_size < 1) throw ConfigError("resize_pad needs resize_size >= 1");
  if (!(flip_probability >= 0 && flip_probability <= 1)) throw ConfigError("flip probability must be in [0, 1]");
  if (!(gamma_min > 0 && gamma_min <= gamma_max)) throw ConfigError("gamma range must satisfy 0 < min <= max");
  if (!(blur_sigma_min > 0 && blur_sigma_min <= blur_sigma_max)) {
    throw ConfigError("blur sigma range must satisfy 0 < min <= max");
  }
}

Tensor flip_horizontal(const Tensor& img) {
  require_image(img, "flip_horizontal");
  Tensor out(img.shape());
  for (int c = 0; c < img.c(); ++c)
    for (int y = 0; y < img.h(); ++y)
      for (int x = 0; x < img.w(); ++x) out.at(0, c, y, x) = img.at(0, c, y, img.w() - 1 - x);
  return out;
}

Tensor flip_vertical(const Tensor& img) {
  require_image(img, "flip_vertical");
  Tensor out(img.shape());
  for (int c = 0; c < img.c(); ++c)
    for (int y = 0; y < img.h(); ++y)
      for (int x = 0; x < img.w(); ++x) out.at(0, c, y, x) = img.at(0, c, img.h() - 1 - y, x);
  return out;
}

Tensor crop(const Tensor& img, int top, int left, int height, int width) {
  require_image(img, "crop");
  if (top < 0 || left < 0 || height < 1 || width < 1 || top + height > img.h() ||
      left + width > img.w()) {
    throw ShapeError("crop window outside " + to_string(img.shape()));
  }
  Tensor out(1, img.c(), height, width);
  for (int c = 0; c < img.c(); ++c)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(0, c, y, x) = img.at(0, c, top + y, left + x);
  return out;
}

Tensor gamma_correct(const Tensor& img, double exponent, double lo, double hi) {
  if (!(exponent > 0) || !(lo < hi)) throw ParameterError("gamma_correct: bad exponent or range");
  if (exponent == 1.0) return img;
  Tensor out(img.shape());
  for (std::size_t k = 0; k < img.size(); ++k) {
    const double t = std::clamp((static_cast<double>(img.data()[k]) - lo) / (hi - lo), 0.0, 1.0);
    out.data()[k] = static_cast<Real>(lo + (hi - lo) * std::pow(t, exponent));
  }
  return out;
}

Tensor histogram_equalize(const Tensor& img) {
  require_image(img, "histogram_equalize");
  const std::size_t n = img.shape().plane();
  std::vector<double> lum(n);
  for (std::size_t p = 0; p < n; ++p) {
    if (img.c() == 3) {
      lum[p] = 0.299 * img.plane(0, 0)[p] + 0.587 * img.plane(0, 1)[p] + 0.114 * img.plane(0, 2)[p];
    } else {
      double s = 0;
      for (int c = 0; c < img.c(); ++c) s += img.plane(0, c)[p];
      lum[p] = s / img.c();
    }
  }
  std::array<std::size_t, 256> hist{};
  auto bin = [](double v) { return static_cast<int>(std::clamp(std::round(v), 0.0, 255.0)); };
  for (double v : lum) ++hist[bin(v)];
  std::array<double, 256> cdf{};
  std::size_t acc = 0, first = 0;
  for (int i = 0; i < 256; ++i) {
    if (first == 0 && hist[i] > 0) first = hist[i];
    acc += hist[i];
    cdf[i] = static_cast<double>(acc);
  }
  Tensor out(img.shape());
  const double denom = static_cast<double>(n) - static_cast<double>(first);
  for (std::size_t p = 0; p < n; ++p) {
    const double target =
        denom > 0 ? std::round((cdf[bin(lum[p])] - first) / denom * 255.0) : lum[p];
    const double ratio = lum[p] > 0 ? target / lum[p] : 0.0;
    for (int c = 0; c < img.c(); ++c) {
      const double v = lum[p] > 0 ? img.plane(0, c)[p] * ratio : target;
      out.plane(0, c)[p] = static_cast<Real>(std::clamp(v, 0.0, 255.0));
    }
  }
  return out;
}

Tensor gaussian_blur(const Tensor& img, double sigma) {
  if (!(sigma > 0)) throw ParameterError("gaussian_blur: sigma must be positive");
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * r + 1);
  double ks = 0;
  for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& v : k) v /= ks;
  auto mirror = [](int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * (n - 1);
    i = ((i % period) + period) % period;
    return i < n ? i : period - i;
  };
  const int h = img.h(), w = img.w();
  Tensor out(img.shape());
  std::vector<double> tmp(static_cast<std::size_t>(h) * w);
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c) {
      const Real* src = img.plane(n, c);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double s = 0;
          for (int i = -r; i <= r; ++i) s += k[i + r] * src[y * w + mirror(x + i, w)];
          tmp[static_cast<std::size_t>(y) * w + x] = s;
        }
      Real* dst = out.plane(n, c);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          double s = 0;
          for (int i = -r; i <= r; ++i) s += k[i + r] * tmp[static_cast<std::size_t>(mirror(y + i, h)) * w + x];
          dst[y * w + x] = static_cast<Real>(s);
        }
    }
  return out;
}

Tensor resize_pad(const Tensor& img, int size, double fill) {
  require_image(img, "resize_pad");
  if (size < 1) throw ParameterError("resize_pad: size must be positive");
  const double s = static_cast<double>(size) / std::max(img.h(), img.w());
  const int nh = std::max(1, static_cast<int>(std::lround(img.h() * s)));
  const int nw = std::max(1, static_cast<int>(std::lround(img.w() * s)));
  const int top = (size - nh) / 2, left = (size - nw) / 2;
  Tensor out(1, img.c(), size, size, static_cast<Real>(fill));
  const double sy = static_cast<double>(img.h()) / nh, sx = static_cast<double>(img.w()) / nw;
  for (int y = 0; y < nh; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.h() - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, img.h() - 1);
    const double ay = fy - y0;
    for (int x = 0; x < nw; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.w() - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, img.w() - 1);
      const double ax = fx - x0;
      for (int c = 0; c < img.c(); ++c) {
        const double v = (1 - ay) * ((1 - ax) * img.at(0, c, y0, x0) + ax * img.at(0, c, y0, x1)) +
                         ay * ((1 - ax) * img.at(0, c, y1, x0) + ax * img.at(0, c, y1, x1));
        out.at(0, c, top + y, left + x) = static_cast<Real>(v);
      }
    }
  }
  return out;
}

Tensor augment(const Tensor& img, const AugmentSpec& spec, std::mt19937_64& rng,
               Modality modality, const ScalingSpec& range) {
  spec.validate();
  Tensor out = img;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  if (spec.has(AugmentOp::random_crop)) {
    if (spec.crop_size > out.h() || spec.crop_size > out.w()) {
      throw ShapeError("crop size " + std::to_string(spec.crop_size) + " exceeds " +
                       to_string(out.shape()));
    }
    std::uniform_int_distribution<int> ty(0, out.h() - spec.crop_size);
    std::uniform_int_distribution<int> tx(0, out.w() - spec.crop_size);
    const int top = ty(rng), left = tx(rng);
    out = crop(out, top, left, spec.crop_size, spec.crop_size);
  }
  if (spec.has(AugmentOp::horizontal_flip) && u01(rng) < spec.flip_probability) {
    out = flip_horizontal(out);
  }
  if (spec.has(AugmentOp::vertical_flip) && u01(rng) < spec.flip_probability) {
    out = flip_vertical(out);
  }
  if (spec.has(AugmentOp::gamma_jitter)) {
    // Log-uniform exponent so the range is symmetric around 1.
    const double e = std::exp(std::log(spec.gamma_min) +
                              u01(rng) * (std::log(spec.gamma_max) - std::log(spec.gamma_min)));
    if (modality == Modality::rgb) out = gamma_correct(out, e, range.physical_min, range.physical_max);
  }
  if (spec.has(AugmentOp::histogram_equalization) && modality == Modality::rgb) {
    out = histogram_equalize(out);
  }
  if (spec.has(AugmentOp::gaussian_blur)) {
    const double s = spec.blur_sigma_min + u01(rng) * (spec.blur_sigma_max - spec.blur_sigma_min);
    out = gaussian_blur(out, s);
  }
  if (spec.has(AugmentOp::resize_pad)) {
    const double fill = modality == Modality::depth
                            ? range.background_value.value_or(range.physical_min)
                            : range.physical_min;
    out = resize_pad(out, spec.resize_size, fill);
  }
  return out;
}

void UnpairedPools::validate() const {
  if (rgb.empty() || depth.empty()) throw ConfigError("training pools must be nonempty");
  for (const auto& t : rgb)
    if (t.n() != 1 || t.c() != 3) throw ShapeError("RGB pool item " + to_string(t.shape()));
  for (const auto& t : depth)
    if (t.n() != 1 || t.c() != 1) throw ShapeError("depth pool item " + to_string(t.shape()));
}

void EvalPairs::validate() const {
  if (rgb.size() != stems.size() || depth.size() != stems.size()) {
    throw ConfigError("eval pairs: stems, rgb and depth counts differ");
  }
  for (std::size_t i = 0; i < stems.size(); ++i) {
    if (rgb[i].c() != 3 || depth[i].c() != 1 || rgb[i].h() != depth[i].h() ||
        rgb[i].w() != depth[i].w()) {
      throw ShapeError("eval pair '" + stems[i] + "' is not pixel-aligned");
    }
  }
}

BatchPair sample_batch(const UnpairedPools& pools, int b, std::mt19937_64& rng,
                       const SamplingSpec& spec) {
  if (b < 1) throw ParameterError("batch size must be positive");
  pools.validate();
  std::uniform_int_distribution<std::size_t> pick_x(0, pools.rgb.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_y(0, pools.depth.size() - 1);
  std::vector<Tensor> xs, ys;
  for (int i = 0; i < b; ++i) {
    const Tensor& src = pools.rgb[pick_x(rng)];
    xs.push_back(spec.augment ? augment(src, *spec.augment, rng, Modality::rgb, spec.rgb) : src);
  }
  for (int i = 0; i < b; ++i) {
    const Tensor& src = pools.depth[pick_y(rng)];
    ys.push_back(spec.augment ? augment(src, *spec.augment, rng, Modality::depth, spec.depth) : src);
  }
  BatchPair out;
  out.x = scale_to_model(Tensor::stack(xs), spec.rgb);
  out.y = scale_to_model(Tensor::stack(ys), spec.depth);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < b; ++i) out.eps_y.push_back(u01(rng));
  for (int i = 0; i < b; ++i) out.eps_x.push_back(u01(rng));
  return out;
}

void SynthConfig::validate() const {
  if (n_train_rgb < 1 || n_train_depth < 1 || n_eval < 1 || size < 1) {
    throw ConfigError("synth sizes must be >= 1");
  }
  if (!(feature_size > 0) || !(height_scale > 0) || !(relief > 0)) {
    throw ConfigError("synth feature_size, height_scale and relief must be positive");
  }
  if (!(light_elevation > 0 && light_elevation <= 90) || !(light_cap >= 0 && light_cap < 90)) {
    throw ConfigError("synth light elevation must be in (0, 90], cap in [0, 90)");
  }
  if (!(0 < tint_min && tint_min <= tint_max) || !(0 < brightness_min && brightness_min <= brightness_max)) {
    throw ConfigError("synth tint and brightness ranges must satisfy 0 < min <= max");
  }
}

Tensor synth_heightmap(const SynthConfig& cfg, std::mt19937_64& rng) {
  const int margin = static_cast<int>(std::ceil(3 * cfg.feature_size));
  const int full = cfg.size + 2 * margin;
  Tensor noise(1, 1, full, full);
  std::normal_distribution<double> g(0.0, 1.0);
  for (auto& v : noise.values()) v = static_cast<Real>(g(rng));
  // Low-pass white noise has std 1 / (2 sqrt(pi) sigma) away from the borders.
  const double std_lp = 1.0 / (2.0 * std::sqrt(std::numbers::pi) * cfg.feature_size);
  const Tensor smooth = crop(gaussian_blur(noise, cfg.feature_size), margin, margin, cfg.size, cfg.size);
  Tensor h(smooth.shape());
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double n = smooth.data()[k] / std_lp;
    h.data()[k] = static_cast<Real>(std::clamp((n - cfg.threshold) / cfg.height_scale, 0.0, 1.0));
  }
  return h;
}

Light sample_light(const SynthConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  // Uniform direction on the cap around the z axis, then tilted to the base direction.
  const double cos_cap = std::cos(deg(cfg.light_cap));
  const double ct = 1.0 - u01(rng) * (1.0 - cos_cap);
  const double st = std::sqrt(std::max(0.0, 1.0 - ct * ct));
  const double ph = 2 * std::numbers::pi * u01(rng);
  const double lx = st * std::cos(ph), ly = st * std::sin(ph), lz = ct;
  // Rotation taking +z to the base direction (x right, y down, z to the viewer).
  const double tilt = deg(90.0 - cfg.light_elevation), az = deg(cfg.light_azimuth);
  const double ca = std::cos(az), sa = -std::sin(az), cb = std::cos(tilt), sb = std::sin(tilt);
  // Tilt about the axis perpendicular to the azimuth within the image plane.
  const double ax = lx * cb + lz * sb, az2 = -lx * sb + lz * cb;
  Light l;
  l.direction = {ax * ca - ly * sa, ax * sa + ly * ca, az2};
  std::uniform_real_distribution<double> tint(cfg.tint_min, cfg.tint_max);
  for (auto& t : l.tint) t = tint(rng);
  l.brightness = std::uniform_real_distribution<double>(cfg.brightness_min, cfg.brightness_max)(rng);
  return l;
}

void surface_normal(const Tensor& height, double relief, int y, int x, double n[3]) {
  const int h = height.h(), w = height.w();
  auto at = [&](int yy, int xx) { return relief * height.at(0, 0, yy, xx); };
  double dx = 0, dy = 0;
  if (w > 1) {
    const int x0 = std::max(0, x - 1), x1 = std::min(w - 1, x + 1);
    dx = (at(y, x1) - at(y, x0)) / (x1 - x0);
  }
  if (h > 1) {
    const int y0 = std::max(0, y - 1), y1 = std::min(h - 1, y + 1);
    dy = (at(y1, x) - at(y0, x)) / (y1 - y0);
  }
  const double len = std::sqrt(dx * dx + dy * dy + 1.0);
  n[0] = -dx / len;
  n[1] = -dy / len;
  n[2] = 1.0 / len;
}

Tensor render_lambert(const Tensor& height, const Light& light, double relief) {
  if (height.n() != 1 || height.c() != 1) throw ShapeError("render_lambert: expected one height map");
  Tensor out(1, 3, height.h(), height.w());
  for (int y = 0; y < height.h(); ++y)
    for (int x = 0; x < height.w(); ++x) {
      double n[3];
      surface_normal(height, relief, y, x, n);
      const double d = std::max(0.0, n[0] * light.direction[0] + n[1] * light.direction[1] +
                                         n[2] * light.direction[2]);
      for (int c = 0; c < 3; ++c) {
        out.at(0, c, y, x) = static_cast<Real>(255.0 * light.brightness * light.tint[c] * d);
      }
    }
  return out;
}

Tensor quantize8(const Tensor& rgb) {
  Tensor out(rgb.shape());
  for (std::size_t k = 0; k < rgb.size(); ++k) {
    out.data()[k] = static_cast<Real>(std::clamp(std::round(static_cast<double>(rgb.data()[k])), 0.0, 255.0));
  }
  return out;
}

Dataset synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  auto stream = [&](std::uint64_t id) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(id)};
    return std::mt19937_64(seq);
  };
  Dataset ds;
  ds.preset = "synth";
  ds.sampling.rgb = scaling_preset("rgb");
  ds.sampling.depth = scaling_preset("synth");
  auto rgb_rng = stream(1), depth_rng = stream(2), eval_rng = stream(3);
  for (int i = 0; i < cfg.n_train_rgb; ++i) {
    const Tensor h = synth_heightmap(cfg, rgb_rng);
    ds.pools.rgb.push_back(quantize8(render_lambert(h, sample_light(cfg, rgb_rng), cfg.relief)));
  }
  for (int i = 0; i < cfg.n_train_depth; ++i) ds.pools.depth.push_back(synth_heightmap(cfg, depth_rng));
  for (int i = 0; i < cfg.n_eval; ++i) {
    const Tensor h = synth_heightmap(cfg, eval_rng);
    char stem[32];
    std::snprintf(stem, sizeof stem, "eval_%05d", i);
    ds.eval.stems.push_back(stem);
    ds.eval.rgb.push_back(quantize8(render_lambert(h, sample_light(cfg, eval_rng), cfg.relief)));
    ds.eval.depth.push_back(h);
  }
  return ds;
}

}  // namespace percdepth::data
