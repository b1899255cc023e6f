#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "percdepth/tensor.hpp"

// Scaling between physical units and model space, augmentation, unpaired
// sampling and the synthetic shaded-heightmap dataset.
namespace percdepth::data {

enum class Unit { micrometer, unitless, meter };
enum class CenterMode { none, median_subtract };

std::string to_string(Unit u);
std::string to_string(CenterMode m);
Unit parse_unit(std::string_view s);
CenterMode parse_center_mode(std::string_view s);

struct ScalingSpec {
  double physical_min = -1;
  double physical_max = 1;
  Unit unit = Unit::unitless;
  std::optional<double> background_value;
  CenterMode center_mode = CenterMode::none;

  double mid() const { return 0.5 * (physical_min + physical_max); }
  double half() const { return 0.5 * (physical_max - physical_min); }
  void validate() const;
};

// Depth presets "surface" (+-5 um), "face" ([0, 1]), "body" (+-0.4725 m, median
// subtracted, background at the lower bound), "synth" (+-1, base plane at 0 is background) and the
// RGB range "rgb" ([0, 255]).
ScalingSpec scaling_preset(std::string_view name);

// (x - mid) / half per element, clipped to [-1, 1]; with median_subtract each
// sample's median is removed first.
Tensor scale_to_model(const Tensor& x, const ScalingSpec& spec);
// y * half + mid. The subtracted median is not restored.
Tensor unscale(const Tensor& y, const ScalingSpec& spec);
double median(std::span<const Real> v);

enum class AugmentOp {
  random_crop,
  horizontal_flip,
  vertical_flip,
  gamma_jitter,
  histogram_equalization,
  gaussian_blur,
  resize_pad,
};

std::string to_string(AugmentOp op);
AugmentOp parse_augment_op(std::string_view s);

struct AugmentSpec {
  std::vector<AugmentOp> ops;  // applied in enum order
  int crop_size = 0;           // random_crop output side; 0 disables cropping
  int resize_size = 0;         // resize_pad output side
  double flip_probability = 0.5;
  double gamma_min = 0.7;
  double gamma_max = 1.4;
  double blur_sigma_min = 0.5;
  double blur_sigma_max = 1.5;

  bool has(AugmentOp op) const;
  void validate() const;
};

// Single-image (n == 1) building blocks.
Tensor flip_horizontal(const Tensor& img);
Tensor flip_vertical(const Tensor& img);
Tensor crop(const Tensor& img, int top, int left, int height, int width);
// ((x - lo) / (hi - lo))^exponent mapped back to [lo, hi].
Tensor gamma_correct(const Tensor& img, double exponent, double lo, double hi);
// Equalizes luminance over 256 bins of [0, 255] and rescales channels proportionally.
Tensor histogram_equalize(const Tensor& img);
// Separable Gaussian with radius ceil(3 sigma) and mirrored borders.
Tensor gaussian_blur(const Tensor& img, double sigma);
// Bilinear resize of the longer side to `size`, centered and padded with `fill`.
Tensor resize_pad(const Tensor& img, int size, double fill);

enum class Modality { rgb, depth };

// Photometric ops (gamma jitter, histogram equalization) touch RGB only;
// geometric ops and blur apply to both modalities. `range` is the physical
// value range used by gamma jitter and padding.
Tensor augment(const Tensor& img, const AugmentSpec& spec, std::mt19937_64& rng,
               Modality modality, const ScalingSpec& range);

// Training images in physical units (RGB in [0, 255]). Indices carry no pairing.
struct UnpairedPools {
  std::vector<Tensor> rgb;
  std::vector<Tensor> depth;
  bool disjoint = true;

  void validate() const;
};

// Registered (pixel-aligned) evaluation pairs, kept apart from training pools.
struct EvalPairs {
  std::vector<std::string> stems;
  std::vector<Tensor> rgb;
  std::vector<Tensor> depth;

  std::size_t size() const { return stems.size(); }
  void validate() const;
};

struct BatchPair {
  Tensor x;                    // RGB batch in model space
  Tensor y;                    // depth batch in model space
  std::vector<double> eps_y;   // interpolation weights for the depth critic
  std::vector<double> eps_x;   // interpolation weights for the RGB critic
};

struct SamplingSpec {
  ScalingSpec rgb = scaling_preset("rgb");
  ScalingSpec depth = scaling_preset("synth");
  std::optional<AugmentSpec> augment;
};

// b RGB and b depth samples drawn independently and uniformly with
// replacement, each augmented independently, plus fresh eps draws.
BatchPair sample_batch(const UnpairedPools& pools, int b, std::mt19937_64& rng,
                       const SamplingSpec& spec);

struct SynthConfig {
  int n_train_rgb = 512;
  int n_train_depth = 512;
  int n_eval = 32;
  int size = 64;
  std::uint64_t seed = 0;
  double feature_size = 6.0;      // low-pass length scale of the noise, pixels
  double threshold = 0.6;         // noise level (in std units) where bumps start
  double height_scale = 1.2;      // noise excess (std units) mapped to height 1
  double relief = 12.0;           // surface height in pixels at height 1
  double light_elevation = 45.0;  // degrees above the image plane
  double light_azimuth = 135.0;   // degrees, counterclockwise from +x
  double light_cap = 20.0;        // half-angle of the light direction cap, degrees
  double tint_min = 0.7;          // per-channel albedo range
  double tint_max = 1.0;
  double brightness_min = 0.6;
  double brightness_max = 1.0;

  void validate() const;
};

struct Light {
  std::array<double, 3> direction{0, 0, 1};  // unit vector, z towards the viewer
  std::array<double, 3> tint{1, 1, 1};
  double brightness = 1;
};

// Band-limited noise, thresholded into bumps on a flat base at 0; values in [0, 1].
Tensor synth_heightmap(const SynthConfig& cfg, std::mt19937_64& rng);
Light sample_light(const SynthConfig& cfg, std::mt19937_64& rng);
// Unit normals of z = relief * h(x, y) from central differences (one-sided at borders).
void surface_normal(const Tensor& height, double relief, int y, int x, double n[3]);
// 255 * brightness * tint_c * max(0, n . l), unquantized.
Tensor render_lambert(const Tensor& height, const Light& light, double relief);
// Rounds to integers in [0, 255].
Tensor quantize8(const Tensor& rgb);

struct Dataset {
  UnpairedPools pools;
  EvalPairs eval;
  SamplingSpec sampling;
  std::string preset = "synth";
};

// Same config gives a bit-identical dataset. RGB pool, depth pool and eval
// pairs come from independent seed streams.
Dataset synth_dataset(const SynthConfig& cfg);

}  // namespace percdepth::data
