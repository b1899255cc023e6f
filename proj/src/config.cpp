#include "percdepth/config.hpp"

#include <fstream>
#include <iterator>
#include <set>

namespace percdepth::config {

namespace {

// Tracks which keys of an object were consumed so leftovers can be rejected.
class Fields {
 public:
  Fields(const json& j, std::string context) : j_(j), ctx_(std::move(context)) {
    if (!j_.is_object()) throw ConfigError(ctx_ + ": expected a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) throw ConfigError(ctx_ + "." + key + ": expected true or false");
      } else if constexpr (std::is_unsigned_v<T>) {
        if (!it->is_number_unsigned()) throw ConfigError(ctx_ + "." + key + ": expected a non-negative integer");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) throw ConfigError(ctx_ + "." + key + ": expected an integer");
      }
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(ctx_ + "." + key + ": " + e.what());
    }
  }

  const json* sub(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("unknown key '" + k + "' in " + ctx_);
    }
  }

  const std::string& context() const { return ctx_; }

 private:
  const json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

}  // namespace

json to_json(const nn::NetScale& s) {
  return {{"width_multiplier", s.width_multiplier}, {"input_size", s.input_size}};
}

nn::NetScale read(const json& j, nn::NetScale s) {
  Fields f(j, "net_scale");
  f.get("width_multiplier", s.width_multiplier);
  f.get("input_size", s.input_size);
  f.finish();
  return s;
}

json to_json(const data::ScalingSpec& s) {
  return {{"physical_min", s.physical_min},
          {"physical_max", s.physical_max},
          {"unit", data::to_string(s.unit)},
          {"background_value", s.background_value ? json(*s.background_value) : json(nullptr)},
          {"center_mode", data::to_string(s.center_mode)}};
}

data::ScalingSpec read(const json& j, data::ScalingSpec s) {
  Fields f(j, "scaling");
  f.get("physical_min", s.physical_min);
  f.get("physical_max", s.physical_max);
  std::string unit = data::to_string(s.unit), center = data::to_string(s.center_mode);
  f.get("unit", unit);
  f.get("center_mode", center);
  s.unit = data::parse_unit(unit);
  s.center_mode = data::parse_center_mode(center);
  if (const json* bg = f.sub("background_value")) {
    if (bg->is_null()) {
      s.background_value.reset();
    } else if (bg->is_number()) {
      s.background_value = bg->get<double>();
    } else {
      throw ConfigError("scaling.background_value: expected a number or null");
    }
  }
  f.finish();
  s.validate();
  return s;
}

json to_json(const data::AugmentSpec& s) {
  json ops = json::array();
  for (auto op : s.ops) ops.push_back(data::to_string(op));
  return {{"ops", ops},
          {"crop_size", s.crop_size},
          {"resize_size", s.resize_size},
          {"flip_probability", s.flip_probability},
          {"gamma_min", s.gamma_min},
          {"gamma_max", s.gamma_max},
          {"blur_sigma_min", s.blur_sigma_min},
          {"blur_sigma_max", s.blur_sigma_max}};
}

data::AugmentSpec read(const json& j, data::AugmentSpec s) {
  Fields f(j, "augment");
  if (const json* ops = f.sub("ops")) {
    if (!ops->is_array()) throw ConfigError("augment.ops: expected an array");
    s.ops.clear();
    for (const auto& op : *ops) {
      if (!op.is_string()) throw ConfigError("augment.ops: expected strings");
      s.ops.push_back(data::parse_augment_op(op.get<std::string>()));
    }
  }
  f.get("crop_size", s.crop_size);
  f.get("resize_size", s.resize_size);
  f.get("flip_probability", s.flip_probability);
  f.get("gamma_min", s.gamma_min);
  f.get("gamma_max", s.gamma_max);
  f.get("blur_sigma_min", s.blur_sigma_min);
  f.get("blur_sigma_max", s.blur_sigma_max);
  f.finish();
  s.validate();
  return s;
}

json to_json(const data::SamplingSpec& s) {
  return {{"rgb", to_json(s.rgb)},
          {"depth", to_json(s.depth)},
          {"augment", s.augment ? to_json(*s.augment) : json(nullptr)}};
}

data::SamplingSpec read(const json& j, data::SamplingSpec s) {
  Fields f(j, "sampling");
  if (const json* v = f.sub("rgb")) s.rgb = read(*v, s.rgb);
  if (const json* v = f.sub("depth")) s.depth = read(*v, s.depth);
  if (const json* v = f.sub("augment")) {
    if (v->is_null()) {
      s.augment.reset();
    } else {
      s.augment = read(*v, s.augment.value_or(data::AugmentSpec{}));
    }
  }
  f.finish();
  return s;
}

json to_json(const data::SynthConfig& s) {
  return {{"n_train_rgb", s.n_train_rgb},
          {"n_train_depth", s.n_train_depth},
          {"n_eval", s.n_eval},
          {"size", s.size},
          {"seed", s.seed},
          {"feature_size", s.feature_size},
          {"threshold", s.threshold},
          {"height_scale", s.height_scale},
          {"relief", s.relief},
          {"light_elevation", s.light_elevation},
          {"light_azimuth", s.light_azimuth},
          {"light_cap", s.light_cap},
          {"tint_min", s.tint_min},
          {"tint_max", s.tint_max},
          {"brightness_min", s.brightness_min},
          {"brightness_max", s.brightness_max}};
}

data::SynthConfig read(const json& j, data::SynthConfig s) {
  Fields f(j, "synth");
  f.get("n_train_rgb", s.n_train_rgb);
  f.get("n_train_depth", s.n_train_depth);
  f.get("n_eval", s.n_eval);
  f.get("size", s.size);
  f.get("seed", s.seed);
  f.get("feature_size", s.feature_size);
  f.get("threshold", s.threshold);
  f.get("height_scale", s.height_scale);
  f.get("relief", s.relief);
  f.get("light_elevation", s.light_elevation);
  f.get("light_azimuth", s.light_azimuth);
  f.get("light_cap", s.light_cap);
  f.get("tint_min", s.tint_min);
  f.get("tint_max", s.tint_max);
  f.get("brightness_min", s.brightness_min);
  f.get("brightness_max", s.brightness_max);
  f.finish();
  s.validate();
  return s;
}

json to_json(const filters::FilterConfig& s) {
  return {{"sigma", s.sigma},
          {"mean_clamp_eps", s.mean_clamp_eps},
          {"gray_weights", {s.weights.r, s.weights.g, s.weights.b}}};
}

filters::FilterConfig read(const json& j, filters::FilterConfig s) {
  Fields f(j, "filter");
  f.get("sigma", s.sigma);
  f.get("mean_clamp_eps", s.mean_clamp_eps);
  if (const json* w = f.sub("gray_weights")) {
    if (!w->is_array() || w->size() != 3) throw ConfigError("filter.gray_weights: expected 3 numbers");
    try {
      s.weights = {(*w)[0].get<double>(), (*w)[1].get<double>(), (*w)[2].get<double>()};
    } catch (const json::exception& e) {
      throw ConfigError(std::string("filter.gray_weights: ") + e.what());
    }
  }
  f.finish();
  s.validate();
  return s;
}

json to_json(const training::TrainConfig& s) {
  return {{"n_g", s.n_g},
          {"n_f_initial", s.n_f_initial},
          {"n_f_halve_at", s.n_f_halve_at},
          {"b", s.b},
          {"p", s.p},
          {"alpha_f", s.alpha_f},
          {"alpha_g", s.alpha_g},
          {"lambda_rec", s.lambda_rec},
          {"sigma", s.sigma},
          {"seed", s.seed},
          {"net_scale", to_json(s.net_scale)},
          {"checkpoint_every", s.checkpoint_every},
          {"zero_head", s.zero_head}};
}

training::TrainConfig read(const json& j, training::TrainConfig s) {
  Fields f(j, "train");
  f.get("n_g", s.n_g);
  f.get("n_f_initial", s.n_f_initial);
  f.get("n_f_halve_at", s.n_f_halve_at);
  f.get("b", s.b);
  f.get("p", s.p);
  f.get("alpha_f", s.alpha_f);
  f.get("alpha_g", s.alpha_g);
  f.get("lambda_rec", s.lambda_rec);
  f.get("sigma", s.sigma);
  f.get("seed", s.seed);
  if (const json* v = f.sub("net_scale")) s.net_scale = read(*v, s.net_scale);
  f.get("checkpoint_every", s.checkpoint_every);
  f.get("zero_head", s.zero_head);
  f.finish();
  s.validate();
  return s;
}

json load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), e.byte, e.what());
  }
}

void save_file(const std::filesystem::path& path, const json& j) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace percdepth::config
