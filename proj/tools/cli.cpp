#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "percdepth/config.hpp"
#include "percdepth/dataset.hpp"
#include "percdepth/eval.hpp"
#include "percdepth/filters.hpp"
#include "percdepth/io.hpp"
#include "percdepth/plots.hpp"
#include "percdepth/training.hpp"

namespace percdepth::cli {

namespace {

namespace fs = std::filesystem;
using config::json;

enum class Level { error, warn, info, debug };

struct Globals {
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string log_level = "info";
  Level level = Level::info;
};

class Log {
 public:
  Log(std::ostream& err, const Level& level) : err_(err), level_(level) {}
  void info(const std::string& m) const { emit(Level::info, "info", m); }
  void warn(const std::string& m) const { emit(Level::warn, "warning", m); }
  void debug(const std::string& m) const { emit(Level::debug, "debug", m); }

 private:
  void emit(Level l, const char* tag, const std::string& m) const {
    if (l <= level_) err_ << "percdepth: " << tag << ": " << m << "\n";
  }
  std::ostream& err_;
  const Level& level_;
};

// Top-level keys of a command config file; anything else is rejected.
json load_config(const std::string& path, std::initializer_list<const char*> allowed) {
  if (path.empty()) return json::object();
  json j = config::load_file(path);
  if (!j.is_object()) throw ConfigError(path + ": expected a JSON object");
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) throw ConfigError("unknown key '" + k + "' in " + path);
  }
  return j;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string out, config;
  std::optional<int> n_rgb, n_depth, n_eval, size;
};

void cmd_synth(const SynthArgs& a, const Globals& g, const Log& log, std::ostream& out) {
  json cfg = load_config(a.config, {"synth"});
  data::SynthConfig sc;
  if (cfg.contains("synth")) sc = config::read(cfg["synth"], sc);
  if (g.seed) sc.seed = *g.seed;
  if (a.n_rgb) sc.n_train_rgb = *a.n_rgb;
  if (a.n_depth) sc.n_train_depth = *a.n_depth;
  if (a.n_eval) sc.n_eval = *a.n_eval;
  if (a.size) sc.size = *a.size;
  sc.validate();
  log.info("rendering " + std::to_string(sc.n_train_rgb) + " RGB, " + std::to_string(sc.n_train_depth) +
           " depth and " + std::to_string(sc.n_eval) + " eval images at " + std::to_string(sc.size) + "px");
  const auto ds = data::synth_dataset(sc);
  dataset::save(a.out, ds, {{"synth", config::to_json(sc)}});
  out << "wrote synthetic dataset to " << a.out << "\n";
}

// ---------------------------------------------------------------- filter

struct FilterArgs {
  std::string in, out, stage = "psi";
  std::optional<double> sigma;
};

void cmd_filter(const FilterArgs& a, std::ostream& out) {
  filters::FilterConfig fc;
  if (a.sigma) fc.sigma = *a.sigma;
  fc.validate();
  Tensor rgb = io::read_png(a.in);
  if (rgb.c() != 3) throw ShapeError(a.in + ": filter expects an RGB image");
  Tensor r;
  if (a.stage == "gray") {
    r = filters::to_grayscale(rgb, fc.weights);
  } else if (a.stage == "gamma") {
    r = filters::auto_gamma(filters::to_grayscale(rgb, fc.weights), fc.mean_clamp_eps);
  } else {
    r = filters::psi(rgb, fc);
  }
  const fs::path dst = a.out;
  if (dst.extension() == ".pfm") {
    io::write_pfm(dst, r);
  } else {
    // PNG preview: min-max stretch.
    double lo = 1e300, hi = -1e300;
    for (Real v : r.values()) lo = std::min<double>(lo, v), hi = std::max<double>(hi, v);
    Tensor img(r.shape());
    for (std::size_t i = 0; i < r.size(); ++i) {
      img.data()[i] = static_cast<Real>(hi > lo ? 255.0 * (r.data()[i] - lo) / (hi - lo) : 0.0);
    }
    io::write_png(dst, img);
  }
  out << "wrote " << a.stage << " of " << a.in << " to " << a.out << "\n";
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string config, data, out, preset, resume;
  std::optional<std::int64_t> n_g, checkpoint_every, n_f_halve_at;
  std::optional<int> b, n_f, size;
  std::optional<double> lambda_rec, width, p, alpha_f, alpha_g, sigma;
};

void cmd_train(const TrainArgs& a, const Globals& g, const Log& log, std::ostream& out) {
  const json cfg = load_config(a.config, {"train", "sampling", "preset"});
  std::string preset = a.preset;
  if (preset.empty() && cfg.contains("preset")) preset = cfg["preset"].get<std::string>();
  const fs::path data_root = a.data;
  const bool has_meta = fs::exists(data_root / "dataset.json");
  if (preset.empty() && has_meta) {
    preset = config::load_file(data_root / "dataset.json").value("preset", std::string("synth"));
  }
  if (preset.empty() || preset == "custom") preset = "synth";

  data::SamplingSpec fallback;
  fallback.depth = data::scaling_preset(preset);
  data::Dataset ds = dataset::load(data_root, fallback);
  if (cfg.contains("sampling")) ds.sampling = config::read(cfg["sampling"], ds.sampling);
  ds.preset = preset;

  std::optional<training::Trainer> trainer;
  if (!a.resume.empty()) {
    trainer.emplace(training::Trainer::resume(a.resume, std::move(ds)));
    log.info("resumed from " + a.resume + " at step " + std::to_string(trainer->step()));
  } else {
    training::TrainConfig tc = training::preset_config(preset);
    if (cfg.contains("train")) tc = config::read(cfg["train"], tc);
    if (g.seed) tc.seed = *g.seed;
    if (a.n_g) tc.n_g = *a.n_g;
    if (a.checkpoint_every) tc.checkpoint_every = *a.checkpoint_every;
    if (a.n_f_halve_at) tc.n_f_halve_at = *a.n_f_halve_at;
    if (a.b) tc.b = *a.b;
    if (a.n_f) tc.n_f_initial = *a.n_f;
    if (a.size) tc.net_scale.input_size = *a.size;
    if (a.width) tc.net_scale.width_multiplier = *a.width;
    if (a.lambda_rec) tc.lambda_rec = *a.lambda_rec;
    if (a.p) tc.p = *a.p;
    if (a.alpha_f) tc.alpha_f = *a.alpha_f;
    if (a.alpha_g) tc.alpha_g = *a.alpha_g;
    if (a.sigma) tc.sigma = *a.sigma;
    tc.validate();
    trainer.emplace(tc, std::move(ds));
  }
  const auto& tc = trainer->config();
  log.info("training " + std::to_string(tc.n_g) + " generator steps, batch " + std::to_string(tc.b) +
           ", width " + fmt(tc.net_scale.width_multiplier) + ", input " +
           std::to_string(tc.net_scale.input_size) + (g.deterministic ? ", deterministic" : ""));
  const auto every = std::max<std::int64_t>(1, tc.n_g / 20);
  const auto t0 = std::chrono::steady_clock::now();
  training::RunHooks hooks;
  hooks.on_step = [&](const training::MetricsRow& r) {
    if (r.step % every == 0 || r.step == tc.n_g) {
      const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      log.info("step " + std::to_string(r.step) + "/" + std::to_string(tc.n_g) + " r_cri_Y " +
               fmt(r.r_cri_y) + " r_adv_Y " + fmt(r.r_adv_y) + " r_rec " + fmt(r.r_rec) + " (" +
               fmt(s) + " s)");
    }
  };
  hooks.on_checkpoint = [&](const fs::path& p) { log.debug("checkpoint " + p.string()); };
  training::run(*trainer, a.out, hooks);
  plots::emit_plots(fs::path(a.out) / "metrics.csv", a.out);
  out << "finished " << trainer->step() << " steps; outputs in " << a.out << "\n";
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string checkpoint, data, out, baseline_pool, grid;
  bool mask_background = false;
};

void cmd_eval(const EvalArgs& a, const Log& log, std::ostream& out) {
  const auto dep = training::load_generator(a.checkpoint);
  fs::path dir = a.data;
  if (fs::is_directory(dir / "eval")) dir /= "eval";
  const auto pairs = dataset::load_eval(dir);
  eval::EvalOptions opts;
  opts.mask_background = a.mask_background;
  const auto report = eval::evaluate(dep.gen_y, pairs, dep.sampling, opts);
  if (!a.out.empty()) report.write_csv(a.out);
  out << report.summary("generator (step " + std::to_string(dep.step) + ")") << "\n";
  if (!a.baseline_pool.empty()) {
    const auto ds = dataset::load(a.baseline_pool, dep.sampling);
    const double med = eval::pool_median(ds.pools.depth);
    const auto base = eval::evaluate_constant(med, pairs, dep.sampling.depth, opts);
    out << base.summary("constant median " + fmt(med)) << "\n";
  }
  if (!a.grid.empty()) {
    std::vector<plots::Triptych> rows;
    for (std::size_t i = 0; i < std::min<std::size_t>(8, pairs.size()); ++i) {
      rows.push_back({pairs.rgb[i], training::infer(dep.gen_y, pairs.rgb[i], dep.sampling), pairs.depth[i]});
    }
    const auto& d = dep.sampling.depth;
    io::write_png(a.grid, plots::triptych_grid(rows, d.physical_min, d.physical_max));
    log.info("wrote " + a.grid);
  }
  if (!report.all_finite()) throw NumericError("non-finite metric in evaluation report");
}

// ---------------------------------------------------------------- infer

struct InferArgs {
  std::string checkpoint, in, out, preview;
};

void cmd_infer(const InferArgs& a, std::ostream& out) {
  const auto dep = training::load_generator(a.checkpoint);
  Tensor rgb = io::read_png(a.in);
  if (rgb.c() != 3) throw ShapeError(a.in + ": infer expects an RGB image");
  const Tensor depth = training::infer(dep.gen_y, rgb, dep.sampling);
  io::write_pfm(a.out, depth);
  if (!a.preview.empty()) {
    const auto& d = dep.sampling.depth;
    Tensor img(depth.shape());
    for (std::size_t i = 0; i < depth.size(); ++i) {
      img.data()[i] = static_cast<Real>(255.0 * (depth.data()[i] - d.physical_min) / (d.physical_max - d.physical_min));
    }
    io::write_png(a.preview, img);
  }
  out << "wrote " << a.out << " (" << data::to_string(dep.sampling.depth.unit) << ")\n";
}

// ---------------------------------------------------------------- inspect-net

struct InspectArgs {
  std::string net = "generator";
  double width = 1.0;
  int size = 256, channels_io = 0, kernel = 3, stride = 1, channels = 64;
};

void print_table(const std::vector<nn::LayerSpec>& rows, std::ostream& out) {
  out << std::left << std::setw(8) << "name" << std::setw(13) << "type" << std::setw(4) << "k"
      << std::setw(4) << "s" << std::setw(10) << "channels" << std::setw(12) << "input"
      << "activation\n";
  for (const auto& r : rows) {
    std::string in;
    for (const auto& i : r.inputs) in += (in.empty() ? "" : ",") + i;
    out << std::left << std::setw(8) << r.name << std::setw(13) << nn::to_string(r.kind)
        << std::setw(4) << (r.kernel ? std::to_string(r.kernel) : "-") << std::setw(4) << r.stride
        << std::setw(10) << r.channels << std::setw(12) << in << ops::to_string(r.activation) << "\n";
  }
}

void cmd_inspect(const InspectArgs& a, std::ostream& out) {
  const nn::NetScale scale{a.width, a.size};
  if (a.net == "generator") {
    const int oc = a.channels_io ? a.channels_io : 1;
    print_table(nn::generator_table(scale, oc), out);
    out << "parameters: " << nn::build_generator(scale, oc).param_count() << "\n";
  } else if (a.net == "critic") {
    const int ic = a.channels_io ? a.channels_io : 1;
    print_table(nn::critic_table(scale), out);
    out << "parameters: " << nn::build_critic(scale, ic).param_count() << "\n";
  } else {
    print_table(nn::residual_block_table(a.kernel, a.stride, a.channels), out);
    const int cin = a.channels_io ? a.channels_io : a.channels;
    out << "parameters: " << nn::build_residual_block(cin, a.kernel, a.stride, a.channels).param_count()
        << "\n";
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised monocular depth estimation with perceptual reconstruction", "percdepth"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed (overrides config files)");
  app.add_flag("--deterministic", g.deterministic, "Sequential execution for bit-exact runs");
  app.add_option("--log-level", g.log_level, "error, warn, info or debug")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Render the synthetic shaded-heightmap dataset");
  synth->add_option("--out", sa.out, "Dataset root to write")->required();
  synth->add_option("--config", sa.config, "JSON file with a \"synth\" object");
  synth->add_option("--n-rgb", sa.n_rgb, "Training RGB images");
  synth->add_option("--n-depth", sa.n_depth, "Training depth maps");
  synth->add_option("--n-eval", sa.n_eval, "Registered evaluation pairs");
  synth->add_option("--size", sa.size, "Image side in pixels");

  FilterArgs fa;
  auto* filter = app.add_subcommand("filter", "Apply the grayscale / gamma / high-pass pipeline");
  filter->add_option("--in", fa.in, "RGB PNG")->required()->check(CLI::ExistingFile);
  filter->add_option("--out", fa.out, "Output .pfm (raw values) or .png (stretched)")->required();
  filter->add_option("--stage", fa.stage, "gray, gamma or psi")->check(CLI::IsMember({"gray", "gamma", "psi"}));
  filter->add_option("--sigma", fa.sigma, "High-pass Gaussian sigma");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train both generators and critics");
  train->add_option("--config", ta.config, "JSON file with \"train\", \"sampling\", \"preset\"");
  train->add_option("--data", ta.data, "Dataset root")->required();
  train->add_option("--out", ta.out, "Output directory")->required();
  train->add_option("--preset", ta.preset, "surface, face, body or synth")
      ->check(CLI::IsMember({"surface", "face", "body", "synth"}));
  train->add_option("--resume", ta.resume, "Checkpoint (.pdgc) to continue from");
  train->add_option("--n-g", ta.n_g, "Generator updates");
  train->add_option("--n-f", ta.n_f, "Initial critic updates per generator update");
  train->add_option("--n-f-halve-at", ta.n_f_halve_at, "Step after which n_f is halved");
  train->add_option("--b", ta.b, "Batch size");
  train->add_option("--lambda-rec", ta.lambda_rec, "Reconstruction weight");
  train->add_option("--p", ta.p, "Gradient penalty weight");
  train->add_option("--alpha-f", ta.alpha_f, "Critic learning rate");
  train->add_option("--alpha-g", ta.alpha_g, "Generator learning rate");
  train->add_option("--sigma", ta.sigma, "High-pass Gaussian sigma");
  train->add_option("--width", ta.width, "Channel width multiplier");
  train->add_option("--size", ta.size, "Network input size (multiple of 32)");
  train->add_option("--checkpoint-every", ta.checkpoint_every, "Checkpoint cadence in steps");

  EvalArgs ea;
  auto* evalc = app.add_subcommand("eval", "RMSE / MAE on registered pairs");
  evalc->add_option("--checkpoint", ea.checkpoint, "Checkpoint (.pdgc)")->required()->check(CLI::ExistingFile);
  evalc->add_option("--data", ea.data, "Eval directory with rgb/ and depth/")->required();
  evalc->add_option("--out", ea.out, "Report CSV");
  evalc->add_flag("--mask-background", ea.mask_background, "Skip ground-truth background pixels");
  evalc->add_option("--baseline-pool", ea.baseline_pool, "Dataset root whose depth median is the baseline");
  evalc->add_option("--grid", ea.grid, "Triptych PNG of the first eight pairs");

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Predict a depth map for one RGB image");
  infer->add_option("--checkpoint", ia.checkpoint, "Checkpoint (.pdgc)")->required()->check(CLI::ExistingFile);
  infer->add_option("--in", ia.in, "RGB PNG")->required()->check(CLI::ExistingFile);
  infer->add_option("--out", ia.out, "Depth PFM in physical units")->required();
  infer->add_option("--preview", ia.preview, "Optional gray PNG of the prediction");

  InspectArgs na;
  auto* inspect = app.add_subcommand("inspect-net", "Print a layer table and parameter count");
  inspect->add_option("--net", na.net, "generator, critic or res-block")
      ->check(CLI::IsMember({"generator", "critic", "res-block"}));
  inspect->add_option("--width", na.width, "Channel width multiplier");
  inspect->add_option("--size", na.size, "Input size");
  inspect->add_option("--io-channels", na.channels_io, "Generator output / critic input / block input channels");
  inspect->add_option("--kernel", na.kernel, "Residual block kernel");
  inspect->add_option("--stride", na.stride, "Residual block stride");
  inspect->add_option("--channels", na.channels, "Residual block channels");

  for (auto* sub : {synth, filter, train, evalc, infer, inspect}) sub->fallthrough();

  std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "percdepth: usage error: " << e.what() << "\n";
    return 2;
  }
  g.level = g.log_level == "error" ? Level::error
            : g.log_level == "warn" ? Level::warn
            : g.log_level == "debug" ? Level::debug
                                     : Level::info;
  const Log log(err, g.level);
  try {
    if (synth->parsed()) cmd_synth(sa, g, log, out);
    if (filter->parsed()) cmd_filter(fa, out);
    if (train->parsed()) cmd_train(ta, g, log, out);
    if (evalc->parsed()) cmd_eval(ea, log, out);
    if (infer->parsed()) cmd_infer(ia, out);
    if (inspect->parsed()) cmd_inspect(na, out);
  } catch (const ConfigError& e) {
    err << "percdepth: config error: " << e.what() << "\n";
    return 2;
  } catch (const ParameterError& e) {
    err << "percdepth: parameter error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    err << "percdepth: parse error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    err << "percdepth: numeric error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "percdepth: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace percdepth::cli
