#include "percdepth/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "percdepth/checkpoint.hpp"
#include "percdepth/config.hpp"

namespace percdepth::training {

namespace {

void require_finite(double v, std::int64_t step, const std::string& what) {
  if (!std::isfinite(v)) {
    throw NumericError("non-finite " + what + " at step " + std::to_string(step));
  }
}

void require_finite(const nn::Gradients& g, const nn::Network& net, std::int64_t step,
                    const std::string& what) {
  for (std::size_t p = 0; p < g.size(); ++p) {
    if (!all_finite(g[p])) {
      throw NumericError("non-finite gradient " + what + "/" + net.params()[p].name + " at step " +
                         std::to_string(step));
    }
  }
}

const char* const kNets[] = {"gen_y", "gen_x", "critic_y", "critic_x"};

void put_network(checkpoint::Archive& a, const std::string& prefix, const nn::Network& net) {
  for (const auto& p : net.params()) a.emplace(prefix + "/" + p.name, p.value);
}

void put_adam(checkpoint::Archive& a, const std::string& prefix, const nn::Network& net,
              const optim::AdamState& s) {
  for (std::size_t p = 0; p < net.params().size(); ++p) {
    a.emplace("adam/" + prefix + "/m/" + net.params()[p].name, s.m[p]);
    a.emplace("adam/" + prefix + "/v/" + net.params()[p].name, s.v[p]);
  }
}

const Tensor& take(const checkpoint::Archive& a, const std::string& name, const Shape& shape,
                   const fs::path& file) {
  const auto it = a.find(name);
  if (it == a.end()) throw ConfigError(file.string() + ": missing record '" + name + "'");
  if (it->second.shape() != shape) {
    throw ShapeError(file.string() + ": record '" + name + "' has shape " +
                     to_string(it->second.shape()) + ", expected " + to_string(shape));
  }
  return it->second;
}

void get_network(const checkpoint::Archive& a, const std::string& prefix, nn::Network& net,
                 const fs::path& file) {
  for (auto& p : net.params()) p.value = take(a, prefix + "/" + p.name, p.value.shape(), file);
}

void get_adam(const checkpoint::Archive& a, const std::string& prefix, const nn::Network& net,
              optim::AdamState& s, const fs::path& file) {
  for (std::size_t p = 0; p < net.params().size(); ++p) {
    const auto& param = net.params()[p];
    s.m[p] = take(a, "adam/" + prefix + "/m/" + param.name, param.value.shape(), file);
    s.v[p] = take(a, "adam/" + prefix + "/v/" + param.name, param.value.shape(), file);
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (n_g < 1 || n_f_initial < 1 || n_f_halve_at < 0 || b < 1 || checkpoint_every < 1) {
    throw ConfigError("train config: n_g, n_f_initial, b and checkpoint_every must be positive");
  }
  for (double v : {p, alpha_f, alpha_g, sigma}) {
    if (!(v > 0) || !std::isfinite(v)) throw ConfigError("train config: p, alphas and sigma must be positive");
  }
  if (!(lambda_rec >= 0) || !std::isfinite(lambda_rec)) {
    throw ConfigError("train config: lambda_rec must be non-negative");
  }
  net_scale.validate();
}

TrainConfig preset_config(std::string_view preset) {
  TrainConfig c;
  if (preset == "surface" || preset == "face") {
    c.lambda_rec = 10;
  } else if (preset == "body") {
    c.lambda_rec = 1;
  } else if (preset == "synth") {
    c.lambda_rec = 10;
    c.net_scale = {0.125, 64};
  } else {
    throw ConfigError("unknown preset '" + std::string(preset) + "'");
  }
  return c;
}

std::string metrics_header() {
  return "step,r_cri_Y,r_cri_X,r_adv_Y,r_adv_X,r_rec,gamma,n_f,gp_Y,gp_X";
}

std::string format_metrics(const MetricsRow& r) {
  return std::to_string(r.step) + "," + format_double(r.r_cri_y) + "," + format_double(r.r_cri_x) +
         "," + format_double(r.r_adv_y) + "," + format_double(r.r_adv_x) + "," +
         format_double(r.r_rec) + "," + format_double(r.gamma) + "," + std::to_string(r.n_f) + "," +
         format_double(r.gp_y) + "," + format_double(r.gp_x);
}

Models Models::build(const TrainConfig& cfg) {
  const std::uint64_t s = cfg.seed;
  return {nn::build_generator(cfg.net_scale, 1, {s * 4 + 1, cfg.zero_head}),
          nn::build_generator(cfg.net_scale, 3, {s * 4 + 2, cfg.zero_head}),
          nn::build_critic(cfg.net_scale, 1, {s * 4 + 3}),
          nn::build_critic(cfg.net_scale, 3, {s * 4 + 4})};
}

Trainer::Trainer(TrainConfig cfg, data::Dataset data)
    : cfg_(cfg), data_(std::move(data)), models_(Models::build(cfg_)) {
  cfg_.validate();
  data_.pools.validate();
  const int size = cfg_.net_scale.input_size;
  // Augmentation may change the size, so probe one sample of each modality.
  std::mt19937_64 probe(cfg_.seed);
  const auto batch = data::sample_batch(data_.pools, 1, probe, data_.sampling);
  if (batch.x.h() != size || batch.x.w() != size || batch.y.h() != size || batch.y.w() != size) {
    throw ShapeError("training images are " + to_string(batch.x.shape()) + " / " +
                     to_string(batch.y.shape()) + " but the networks expect " +
                     std::to_string(size) + "x" + std::to_string(size));
  }
  adam_gy_ = optim::AdamState::for_network(models_.gen_y);
  adam_gx_ = optim::AdamState::for_network(models_.gen_x);
  adam_cy_ = optim::AdamState::for_network(models_.critic_y);
  adam_cx_ = optim::AdamState::for_network(models_.critic_x);
  rng_.seed(cfg_.seed);
}

MetricsRow Trainer::iterate() {
  if (done()) throw ConfigError("training already reached n_G");
  const std::int64_t k = step_ + 1;
  MetricsRow row;
  row.step = k;
  row.gamma = gamma_;
  row.n_f = optim::nf_schedule(k, cfg_.n_f_initial, cfg_.n_f_halve_at);

  auto& m = models_;
  for (int t = 0; t < row.n_f; ++t) {
    const auto batch = data::sample_batch(data_.pools, cfg_.b, rng_, data_.sampling);
    const Tensor fake_y = nn::forward(m.gen_y, batch.x);
    const Tensor fake_x = nn::forward(m.gen_x, batch.y);

    auto gy = nn::zero_gradients(m.critic_y);
    const auto ry = losses::critic_risk(m.critic_y, batch.y, fake_y, batch.eps_y, cfg_.p, &gy);
    require_finite(ry.value, k, "r_cri_Y");
    require_finite(gy, m.critic_y, k, "critic_y");
    optim::adam_update(m.critic_y, gy, adam_cy_, cfg_.alpha_f);

    auto gx = nn::zero_gradients(m.critic_x);
    const auto rx = losses::critic_risk(m.critic_x, batch.x, fake_x, batch.eps_x, cfg_.p, &gx);
    require_finite(rx.value, k, "r_cri_X");
    require_finite(gx, m.critic_x, k, "critic_x");
    optim::adam_update(m.critic_x, gx, adam_cx_, cfg_.alpha_f);

    row.r_cri_y += ry.value / row.n_f;
    row.r_cri_x += rx.value / row.n_f;
    row.gp_y += ry.penalty / row.n_f;
    row.gp_x += rx.penalty / row.n_f;
  }

  const auto batch = data::sample_batch(data_.pools, cfg_.b, rng_, data_.sampling);
  losses::LossConfig lc;
  lc.p = cfg_.p;
  lc.lambda_rec = cfg_.lambda_rec;
  lc.gamma = gamma_;
  lc.filter.sigma = cfg_.sigma;
  auto ggy = nn::zero_gradients(m.gen_y);
  auto ggx = nn::zero_gradients(m.gen_x);
  const auto loss = losses::generator_objective(m.refs(), batch.x, batch.y, lc, &ggy, &ggx);
  require_finite(loss.adv_y, k, "r_adv_Y");
  require_finite(loss.adv_x, k, "r_adv_X");
  require_finite(loss.rec, k, "r_rec");
  require_finite(ggy, m.gen_y, k, "gen_y");
  require_finite(ggx, m.gen_x, k, "gen_x");
  optim::adam_update(m.gen_y, ggy, adam_gy_, cfg_.alpha_g);
  optim::adam_update(m.gen_x, ggx, adam_gx_, cfg_.alpha_g);

  row.r_adv_y = loss.adv_y;
  row.r_adv_x = loss.adv_x;
  row.r_rec = loss.rec;
  step_ = k;
  gamma_ = optim::gamma_schedule(k, cfg_.n_g);
  return row;
}

fs::path checkpoint_path(const fs::path& out_dir, std::int64_t step) {
  return out_dir / "checkpoints" / ("step_" + std::to_string(step) + ".pdgc");
}

fs::path sidecar_path(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  return p.replace_extension(".json");
}

void Trainer::save_checkpoint(const fs::path& path) const {
  checkpoint::Archive a;
  const nn::Network* nets[] = {&models_.gen_y, &models_.gen_x, &models_.critic_y, &models_.critic_x};
  const optim::AdamState* states[] = {&adam_gy_, &adam_gx_, &adam_cy_, &adam_cx_};
  config::json adam;
  for (int i = 0; i < 4; ++i) {
    put_network(a, kNets[i], *nets[i]);
    put_adam(a, kNets[i], *nets[i], *states[i]);
    adam[kNets[i]] = states[i]->step;
  }
  std::ostringstream rng;
  rng << rng_;
  const config::json side = {{"step", step_},
                             {"gamma", gamma_},
                             {"rng", rng.str()},
                             {"adam_steps", adam},
                             {"preset", data_.preset},
                             {"sampling", config::to_json(data_.sampling)},
                             {"config", config::to_json(cfg_)}};
  checkpoint::write_archive(path, a);
  config::save_file(sidecar_path(path), side);
}

Trainer Trainer::resume(const fs::path& path, data::Dataset data) {
  const auto side = config::load_file(sidecar_path(path));
  try {
    const auto cfg = config::read(side.at("config"), TrainConfig{});
    data.sampling = config::read(side.at("sampling"), data.sampling);
    Trainer t(cfg, std::move(data));
    const auto a = checkpoint::read_archive(path);
    nn::Network* nets[] = {&t.models_.gen_y, &t.models_.gen_x, &t.models_.critic_y, &t.models_.critic_x};
    optim::AdamState* states[] = {&t.adam_gy_, &t.adam_gx_, &t.adam_cy_, &t.adam_cx_};
    for (int i = 0; i < 4; ++i) {
      get_network(a, kNets[i], *nets[i], path);
      get_adam(a, kNets[i], *nets[i], *states[i], path);
      states[i]->step = side.at("adam_steps").at(kNets[i]).get<std::int64_t>();
    }
    t.step_ = side.at("step").get<std::int64_t>();
    t.gamma_ = side.at("gamma").get<double>();
    std::istringstream rng(side.at("rng").get<std::string>());
    rng >> t.rng_;
    if (!rng) throw ConfigError("cannot restore RNG state from " + sidecar_path(path).string());
    return t;
  } catch (const config::json::exception& e) {
    throw ConfigError(sidecar_path(path).string() + ": " + e.what());
  }
}

void run(Trainer& trainer, const fs::path& out_dir, const RunHooks& hooks) {
  fs::create_directories(out_dir / "checkpoints");
  const auto& cfg = trainer.config();
  config::save_file(out_dir / "config.resolved.json",
                    {{"train", config::to_json(cfg)},
                     {"sampling", config::to_json(trainer.dataset().sampling)},
                     {"preset", trainer.dataset().preset}});

  const fs::path metrics = out_dir / "metrics.csv";
  std::vector<std::string> kept;
  if (trainer.step() > 0 && fs::exists(metrics)) {
    std::ifstream in(metrics);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty() && std::stoll(line.substr(0, line.find(','))) <= trainer.step()) {
        kept.push_back(line);
      }
    }
  }
  std::ofstream out(metrics, std::ios::binary | std::ios::trunc);
  out << metrics_header() << "\n";
  for (const auto& line : kept) out << line << "\n";
  if (!out) throw IoError("cannot write " + metrics.string());

  while (!trainer.done()) {
    const MetricsRow row = trainer.iterate();
    out << format_metrics(row) << "\n";
    out.flush();
    if (!out) throw IoError("cannot write " + metrics.string());
    if (hooks.on_step) hooks.on_step(row);
    if (row.step % cfg.checkpoint_every == 0 || trainer.done()) {
      const fs::path ck = checkpoint_path(out_dir, row.step);
      trainer.save_checkpoint(ck);
      if (hooks.on_checkpoint) hooks.on_checkpoint(ck);
    }
  }
}

Deployed load_generator(const fs::path& path) {
  const auto side = config::load_file(sidecar_path(path));
  try {
    const auto cfg = config::read(side.at("config"), TrainConfig{});
    Deployed d{nn::build_generator(cfg.net_scale, 1, {0, true}),
               config::read(side.at("sampling"), data::SamplingSpec{}),
               side.at("step").get<std::int64_t>()};
    get_network(checkpoint::read_archive(path), "gen_y", d.gen_y, path);
    return d;
  } catch (const config::json::exception& e) {
    throw ConfigError(sidecar_path(path).string() + ": " + e.what());
  }
}

Tensor infer(const nn::Network& gen_y, const Tensor& rgb, const data::SamplingSpec& sampling) {
  if (rgb.n() != 1 || rgb.c() != 3) throw ShapeError("infer expects one RGB image, got " + to_string(rgb.shape()));
  const int size = gen_y.scale().input_size;
  const Tensor in = rgb.h() == size && rgb.w() == size
                        ? rgb
                        : data::resize_pad(rgb, size, sampling.rgb.physical_min);
  const Tensor depth = nn::forward(gen_y, data::scale_to_model(in, sampling.rgb));
  if (!all_finite(depth)) throw NumericError("non-finite generator output");
  return data::unscale(depth, sampling.depth);
}

}  // namespace percdepth::training
