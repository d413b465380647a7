#include "ecgfwd/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "ecgfwd/errors.hpp"
#include "ecgfwd/nn.hpp"

namespace ecgfwd {

void ExperimentConfig::validate() const {
  if (geometry.n_meshes < 1) throw ValidationError("config: n_meshes must be >= 1");
  if (simulation.sites_per_mesh < 1)
    throw ValidationError("config: sites_per_mesh must be >= 1");
  if (simulation.cv_long <= 0.0 || simulation.aniso < 1.0)
    throw ValidationError("config: cv_long must be > 0 and aniso >= 1");
  if (simulation.frame_dt_ms <= 0.0 || simulation.duration_ms <= 0.0)
    throw ValidationError("config: frame_dt_ms and duration_ms must be positive");
  const int frames = static_cast<int>(std::floor(simulation.duration_ms / simulation.frame_dt_ms)) + 1;
  if (frames < 8)
    throw ValidationError("config: duration covers fewer than 8 frames (spectral entropy needs 8)");
  if (oracle.sigma_b <= 0.0 || oracle.thickness <= 0.0 || oracle.sigma_l <= 0.0 ||
      oracle.sigma_t <= 0.0)
    throw ValidationError("config: conductivities and thickness must be positive");
  if (oracle.f_lo <= 0.0 || oracle.f_hi <= oracle.f_lo)
    throw ValidationError("config: need 0 < f_lo < f_hi");
  if (oracle.f_hi >= 0.5 * frame_rate_hz())
    throw ValidationError("config: f_hi must sit below the frame-clock Nyquist frequency");
  if (model.d_z < 1 || model.d_h < 1 || model.d_e < 2 || model.d_hid < 1 || model.d_a < 1 ||
      model.d_head < 1 || model.K < 2 || model.L_f < 1 || model.blocks < 1)
    throw ValidationError("config: model dimensions must be positive (d_e >= 2)");
  if (model.d_e % 2 != 0) throw ValidationError("config: d_e must be even");
  schedule.validate();
  if (split.f_train < 0.0 || split.f_val < 0.0 || split.f_test < 0.0)
    throw ValidationError("config: split fractions must be non-negative");
  if (std::abs(split.f_train + split.f_val + split.f_test - 1.0) > 1e-9)
    throw ValidationError("config: split fractions must sum to 1 within 1e-9");
  ablation_flags().streams.require_some_stream();
}

ModelDims ExperimentConfig::model_dims() const {
  ModelDims dims;
  dims.enc = EncoderDims{model.d_h, model.d_z, model.L_f, model.blocks};
  dims.dec.d_z = model.d_z;
  dims.dec.d_e = model.d_e;
  dims.dec.d_a = model.d_a;
  dims.dec.d_hid = model.d_hid;
  dims.dec.d_head = model.d_head;
  return dims;
}

AblationFlags ExperimentConfig::ablation_flags() const {
  AblationFlags flags;
  flags.streams.local = !ablation.disable_local;
  flags.streams.spectral = !ablation.disable_spec;
  flags.streams.voltage = !ablation.disable_voltage;
  flags.streams.stats = !ablation.disable_stats;
  flags.attention = !ablation.disable_attention;
  return flags;
}

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json geometry_json(const GeometryConfig& g) {
  return ordered_json{{"n_meshes", g.n_meshes},
                      {"res_u", g.atrium.res_u},
                      {"res_v", g.atrium.res_v},
                      {"radius_mm", g.atrium.radius_mm},
                      {"aspect_x", g.atrium.aspect_x},
                      {"aspect_y", g.atrium.aspect_y},
                      {"aspect_z", g.atrium.aspect_z},
                      {"holes", g.atrium.holes},
                      {"bump_amplitude", g.atrium.bump_amplitude},
                      {"bump_modes", g.atrium.bump_modes}};
}

ordered_json simulation_json(const SimulationConfig& s) {
  return ordered_json{{"sites_per_mesh", s.sites_per_mesh},
                      {"cv_long", s.cv_long},
                      {"aniso", s.aniso},
                      {"v_rest", s.ap.v_rest},
                      {"v_peak", s.ap.v_peak},
                      {"upstroke_ms", s.ap.upstroke_ms},
                      {"apd_ms", s.ap.apd_ms},
                      {"frame_dt_ms", s.frame_dt_ms},
                      {"duration_ms", s.duration_ms}};
}

ordered_json oracle_json(const OracleSection& o) {
  return ordered_json{{"sigma_b", o.sigma_b},   {"thickness", o.thickness},
                      {"sigma_l", o.sigma_l},   {"sigma_t", o.sigma_t},
                      {"f_lo", o.f_lo},         {"f_hi", o.f_hi}};
}

ordered_json split_json(const SplitConfig& s) {
  return ordered_json{{"f_train", s.f_train},
                      {"f_val", s.f_val},
                      {"f_test", s.f_test},
                      {"by_mesh", s.by_mesh}};
}

ordered_json model_json(const ModelConfig& m) {
  return ordered_json{{"d_z", m.d_z},         {"d_h", m.d_h},     {"d_e", m.d_e},
                      {"d_hid", m.d_hid},     {"d_a", m.d_a},     {"d_head", m.d_head},
                      {"K", m.K},             {"L_f", m.L_f},     {"blocks", m.blocks},
                      {"s_init", m.s_init},   {"b_init", m.b_init}};
}

ordered_json schedule_json(const TrainSchedule& s) {
  return ordered_json{{"epochs", s.epochs},         {"lr0", s.lr0},
                      {"halve_every", s.halve_every}, {"huber_delta", s.huber_delta},
                      {"omega0", s.omega0},         {"batch_size", s.batch_size}};
}

ordered_json ablation_json(const AblationConfig& a) {
  return ordered_json{{"disable_local", a.disable_local},
                      {"disable_spec", a.disable_spec},
                      {"disable_voltage", a.disable_voltage},
                      {"disable_stats", a.disable_stats},
                      {"disable_attention", a.disable_attention}};
}

/// Pulls `key` out of `obj` if present, enforcing the target type.
template <typename T>
void take(const json& obj, const std::string& section, const std::string& key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: " + section + "." + key + " has the wrong type");
  }
}

/// Every key in `obj` must be one of `known`: catches typos early.
void reject_unknown(const json& obj, const std::string& section,
                    std::initializer_list<const char*> known) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw ValidationError("config: unknown key '" + section + "." + item.key() + "'");
  }
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) {
  ordered_json j;
  j["version"] = 1;
  j["seed"] = cfg.seed;
  j["geometry"] = geometry_json(cfg.geometry);
  j["simulation"] = simulation_json(cfg.simulation);
  j["oracle"] = oracle_json(cfg.oracle);
  j["model"] = model_json(cfg.model);
  j["schedule"] = schedule_json(cfg.schedule);
  j["split"] = split_json(cfg.split);
  j["ablation"] = ablation_json(cfg.ablation);
  return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw ValidationError(origin + ": config must be a JSON object");
  reject_unknown(j, "",
                 {"version", "seed", "geometry", "simulation", "oracle", "model", "schedule",
                  "split", "ablation"});

  ExperimentConfig cfg;
  take(j, "", "seed", cfg.seed);
  if (j.contains("geometry")) {
    const json& g = j.at("geometry");
    reject_unknown(g, "geometry",
                   {"n_meshes", "res_u", "res_v", "radius_mm", "aspect_x", "aspect_y", "aspect_z",
                    "holes", "bump_amplitude", "bump_modes"});
    take(g, "geometry", "n_meshes", cfg.geometry.n_meshes);
    take(g, "geometry", "res_u", cfg.geometry.atrium.res_u);
    take(g, "geometry", "res_v", cfg.geometry.atrium.res_v);
    take(g, "geometry", "radius_mm", cfg.geometry.atrium.radius_mm);
    take(g, "geometry", "aspect_x", cfg.geometry.atrium.aspect_x);
    take(g, "geometry", "aspect_y", cfg.geometry.atrium.aspect_y);
    take(g, "geometry", "aspect_z", cfg.geometry.atrium.aspect_z);
    take(g, "geometry", "holes", cfg.geometry.atrium.holes);
    take(g, "geometry", "bump_amplitude", cfg.geometry.atrium.bump_amplitude);
    take(g, "geometry", "bump_modes", cfg.geometry.atrium.bump_modes);
  }
  if (j.contains("simulation")) {
    const json& s = j.at("simulation");
    reject_unknown(s, "simulation",
                   {"sites_per_mesh", "cv_long", "aniso", "v_rest", "v_peak", "upstroke_ms",
                    "apd_ms", "frame_dt_ms", "duration_ms"});
    take(s, "simulation", "sites_per_mesh", cfg.simulation.sites_per_mesh);
    take(s, "simulation", "cv_long", cfg.simulation.cv_long);
    take(s, "simulation", "aniso", cfg.simulation.aniso);
    take(s, "simulation", "v_rest", cfg.simulation.ap.v_rest);
    take(s, "simulation", "v_peak", cfg.simulation.ap.v_peak);
    take(s, "simulation", "upstroke_ms", cfg.simulation.ap.upstroke_ms);
    take(s, "simulation", "apd_ms", cfg.simulation.ap.apd_ms);
    take(s, "simulation", "frame_dt_ms", cfg.simulation.frame_dt_ms);
    take(s, "simulation", "duration_ms", cfg.simulation.duration_ms);
  }
  if (j.contains("oracle")) {
    const json& o = j.at("oracle");
    reject_unknown(o, "oracle", {"sigma_b", "thickness", "sigma_l", "sigma_t", "f_lo", "f_hi"});
    take(o, "oracle", "sigma_b", cfg.oracle.sigma_b);
    take(o, "oracle", "thickness", cfg.oracle.thickness);
    take(o, "oracle", "sigma_l", cfg.oracle.sigma_l);
    take(o, "oracle", "sigma_t", cfg.oracle.sigma_t);
    take(o, "oracle", "f_lo", cfg.oracle.f_lo);
    take(o, "oracle", "f_hi", cfg.oracle.f_hi);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    reject_unknown(m, "model",
                   {"d_z", "d_h", "d_e", "d_hid", "d_a", "d_head", "K", "L_f", "blocks", "s_init",
                    "b_init"});
    take(m, "model", "d_z", cfg.model.d_z);
    take(m, "model", "d_h", cfg.model.d_h);
    take(m, "model", "d_e", cfg.model.d_e);
    take(m, "model", "d_hid", cfg.model.d_hid);
    take(m, "model", "d_a", cfg.model.d_a);
    take(m, "model", "d_head", cfg.model.d_head);
    take(m, "model", "K", cfg.model.K);
    take(m, "model", "L_f", cfg.model.L_f);
    take(m, "model", "blocks", cfg.model.blocks);
    take(m, "model", "s_init", cfg.model.s_init);
    take(m, "model", "b_init", cfg.model.b_init);
  }
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    reject_unknown(s, "schedule",
                   {"epochs", "lr0", "halve_every", "huber_delta", "omega0", "batch_size"});
    take(s, "schedule", "epochs", cfg.schedule.epochs);
    take(s, "schedule", "lr0", cfg.schedule.lr0);
    take(s, "schedule", "halve_every", cfg.schedule.halve_every);
    take(s, "schedule", "huber_delta", cfg.schedule.huber_delta);
    take(s, "schedule", "omega0", cfg.schedule.omega0);
    take(s, "schedule", "batch_size", cfg.schedule.batch_size);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    reject_unknown(s, "split", {"f_train", "f_val", "f_test", "by_mesh"});
    take(s, "split", "f_train", cfg.split.f_train);
    take(s, "split", "f_val", cfg.split.f_val);
    take(s, "split", "f_test", cfg.split.f_test);
    take(s, "split", "by_mesh", cfg.split.by_mesh);
  }
  if (j.contains("ablation")) {
    const json& a = j.at("ablation");
    reject_unknown(a, "ablation",
                   {"disable_local", "disable_spec", "disable_voltage", "disable_stats",
                    "disable_attention"});
    take(a, "ablation", "disable_local", cfg.ablation.disable_local);
    take(a, "ablation", "disable_spec", cfg.ablation.disable_spec);
    take(a, "ablation", "disable_voltage", cfg.ablation.disable_voltage);
    take(a, "ablation", "disable_stats", cfg.ablation.disable_stats);
    take(a, "ablation", "disable_attention", cfg.ablation.disable_attention);
  }

  // The shuffle/init seed rides on the experiment seed; keeping them apart
  // would be a reproducibility trap.
  cfg.schedule.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return config_from_json(buf.str(), path);
}

namespace {

/// 16-hex-digit FNV hash of a canonical document.
std::string hex_hash(const std::string& text) {
  const uint64_t h = fnv1a(text);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace

std::string config_hash(const ExperimentConfig& cfg) { return hex_hash(config_to_json(cfg)); }

std::string data_hash(const ExperimentConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  j["geometry"] = geometry_json(cfg.geometry);
  j["simulation"] = simulation_json(cfg.simulation);
  j["oracle"] = oracle_json(cfg.oracle);
  j["split"] = split_json(cfg.split);
  return hex_hash(j.dump());
}

}  // namespace ecgfwd
