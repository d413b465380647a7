#pragma once

#include <cstdint>
#include <string>

#include "ecgfwd/activation.hpp"
#include "ecgfwd/synth.hpp"
#include "ecgfwd/training.hpp"

namespace ecgfwd {

/// How many meshes to generate and what each looks like. Per-mesh seeds are
/// derived from the experiment seed and the mesh index.
struct GeometryConfig {
  int n_meshes = 8;
  AtriumParams atrium;
};

/// Pacing protocol and the activation/voltage synthesis settings.
struct SimulationConfig {
  int sites_per_mesh = 10;
  double cv_long = 0.7;  // m/s
  double aniso = 4.0;
  ApParams ap;
  double frame_dt_ms = 7.5;
  double duration_ms = 420.0;
};

/// Physics constants and filter corners for the ECG ground truth. The
/// sampling rate is not free: traces are produced on the voltage frame
/// clock (fs = 1000 / frame_dt_ms) so frames and trace stay aligned.
struct OracleSection {
  double sigma_b = 0.24;
  double thickness = 1.4;
  double sigma_l = 0.4;
  double sigma_t = 0.025;
  double f_lo = 0.05;
  double f_hi = 60.0;
};

/// Network width and initialization settings.
struct ModelConfig {
  int d_z = 64;
  int d_h = 32;
  int d_e = 32;
  int d_hid = 64;
  int d_a = 32;
  int d_head = 32;
  int K = 64;  // Laplace-Beltrami basis size
  int L_f = 4;
  int blocks = 2;
  double s_init = 0.1;  // spectral stream scale
  double b_init = 1.0;  // spectral stream bias
};

struct SplitConfig {
  double f_train = 0.8;
  double f_val = 0.1;
  double f_test = 0.1;
  bool by_mesh = false;  // hash the mesh id instead of the sample id
};

struct AblationConfig {
  bool disable_local = false;
  bool disable_spec = false;
  bool disable_voltage = false;
  bool disable_stats = false;
  bool disable_attention = false;
};

struct ExperimentConfig {
  uint64_t seed = 0;
  GeometryConfig geometry;
  SimulationConfig simulation;
  OracleSection oracle;
  ModelConfig model;
  TrainSchedule schedule;
  SplitConfig split;
  AblationConfig ablation;

  void validate() const;

  ModelDims model_dims() const;
  AblationFlags ablation_flags() const;
  /// Frame-clock sampling rate implied by frame_dt_ms (Hz).
  double frame_rate_hz() const { return 1000.0 / simulation.frame_dt_ms; }
};

/// JSON round-trip. Parsing is lenient about missing keys (defaults apply)
/// and strict about types and unknown keys.
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text,
                                  const std::string& origin = "<string>");
ExperimentConfig load_config(const std::string& path);

/// Hash of the full canonical document: identifies the experiment.
std::string config_hash(const ExperimentConfig& cfg);

/// Hash of only the dataset-defining parts (seed, geometry, simulation,
/// oracle, split). Two configs with equal data_hash describe the same
/// dataset even if the model or schedule differs, which is what cmd_train
/// checks against the dataset manifest.
std::string data_hash(const ExperimentConfig& cfg);

}  // namespace ecgfwd
