#include "ecgfwd/pipeline.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>

#include <json.hpp>

#include "ecgfwd/activation.hpp"
#include "ecgfwd/errors.hpp"
#include "ecgfwd/operators.hpp"
#include "ecgfwd/oracle.hpp"
#include "ecgfwd/synth.hpp"

namespace ecgfwd {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string two_digits(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%02d", i);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir);
}

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

}  // namespace

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "val") return Split::val;
  if (name == "test") return Split::test;
  throw ValidationError("unknown split '" + name + "' (expected train, val, or test)");
}

// ---------------------------------------------------------------------------
// Dataset generation

Dataset generate_dataset(const ExperimentConfig& cfg, std::vector<std::string>* failures) {
  cfg.validate();
  Dataset dataset;
  dataset.manifest.config_hash = config_hash(cfg);
  dataset.manifest.data_hash = data_hash(cfg);
  dataset.manifest.seed = cfg.seed;
  dataset.manifest.split_by_mesh = cfg.split.by_mesh;
  dataset.manifest.f_train = cfg.split.f_train;
  dataset.manifest.f_val = cfg.split.f_val;

  std::vector<std::string> failed;
  const int planned = cfg.geometry.n_meshes * cfg.simulation.sites_per_mesh;

  for (int mi = 0; mi < cfg.geometry.n_meshes; ++mi) {
    const std::string mesh_id = "mesh" + two_digits(mi);
    SurfaceMesh mesh;
    try {
      mesh = gen_synthetic_atrium(cfg.geometry.atrium, mix_seed(cfg.seed, fnv1a(mesh_id)));
    } catch (const Error& e) {
      // A failed mesh takes all of its pacing sites down with it.
      for (int si = 0; si < cfg.simulation.sites_per_mesh; ++si)
        failed.push_back(mesh_id + "_site" + two_digits(si) + ": " + e.what());
      continue;
    }
    dataset.manifest.mesh_ids.push_back(mesh_id);
    dataset.meshes.push_back(mesh);

    // The oracle needs face gradients/areas only; the eigenbasis size is
    // irrelevant to the produced traces.
    const GeometricOperators ops = build_operators(mesh, 8);
    OracleConfig ocfg = default_oracle_config(mesh);
    ocfg.sigma_b = cfg.oracle.sigma_b;
    ocfg.thickness = cfg.oracle.thickness;
    ocfg.sigma_l = cfg.oracle.sigma_l;
    ocfg.sigma_t = cfg.oracle.sigma_t;
    ocfg.f_lo = cfg.oracle.f_lo;
    ocfg.f_hi = cfg.oracle.f_hi;
    ocfg.fs = cfg.frame_rate_hz();  // keep the trace on the frame clock
    validate_oracle_config(ocfg);

    // Distinct pacing nodes, drawn deterministically per mesh.
    Rng site_rng(mix_seed(cfg.seed, fnv1a(mesh_id + "/sites")));
    const int n = mesh.n_vertices();
    if (cfg.simulation.sites_per_mesh > n)
      throw ValidationError("config: more pacing sites than mesh vertices");
    std::vector<int> sites;
    while (static_cast<int>(sites.size()) < cfg.simulation.sites_per_mesh) {
      const int node = static_cast<int>(site_rng.below(static_cast<uint64_t>(n)));
      if (std::find(sites.begin(), sites.end(), node) == sites.end()) sites.push_back(node);
    }

    for (int si = 0; si < cfg.simulation.sites_per_mesh; ++si) {
      const std::string id = mesh_id + "_site" + two_digits(si);
      try {
        const ActivationField act =
            activation_times(mesh, sites[static_cast<size_t>(si)], cfg.simulation.cv_long,
                             cfg.simulation.aniso);
        const VoltageSequence seq = gen_voltage_sequence(
            mesh, act, cfg.simulation.ap, cfg.simulation.frame_dt_ms, cfg.simulation.duration_ms);
        const EcgTrace trace = forward_ecg(mesh, ops, seq, ocfg);
        if (trace.size() != seq.n_frames())
          throw ValidationError("oracle trace length " + std::to_string(trace.size()) +
                                " != frame count " + std::to_string(seq.n_frames()));

        DatasetSample sample;
        sample.meta.id = id;
        sample.meta.mesh_ref = mesh_id;
        sample.meta.pacing_node = sites[static_cast<size_t>(si)];
        sample.meta.n_frames = seq.n_frames();
        sample.meta.n_nodes = seq.n_nodes();
        sample.meta.trace_len = trace.size();
        sample.meta.frame_dt_ms = seq.frame_dt;
        sample.meta.duration_truncated = seq.duration_truncated;
        sample.frames = seq.frames;
        sample.trace = trace.samples;
        dataset.manifest.samples.push_back(sample.meta);
        dataset.samples.push_back(std::move(sample));
      } catch (const Error& e) {
        failed.push_back(id + ": " + e.what());
      }
    }
  }

  if (failures) *failures = failed;
  if (static_cast<double>(failed.size()) > 0.1 * planned) {
    std::string msg = "dataset generation: " + std::to_string(failed.size()) + "/" +
                      std::to_string(planned) + " samples failed (> 10%):";
    for (const std::string& f : failed) msg += "\n  " + f;
    throw ValidationError(msg);
  }

  // Normalization is fit on the training split only.
  double v_sum = 0.0, v_sq = 0.0, e_sum = 0.0, e_sq = 0.0;
  int64_t v_n = 0, e_n = 0;
  for (const DatasetSample& s : dataset.samples) {
    if (dataset.split_of(s.meta) != Split::train) continue;
    v_sum += s.frames.sum();
    v_sq += s.frames.squaredNorm();
    v_n += s.frames.size();
    e_sum += s.trace.sum();
    e_sq += s.trace.squaredNorm();
    e_n += s.trace.size();
  }
  if (v_n == 0)
    throw ValidationError("dataset generation: the training split is empty (seed/fractions)");
  auto fit = [](double sum, double sq, int64_t n, const char* what) {
    Zscore z;
    z.mean = sum / static_cast<double>(n);
    const double var = sq / static_cast<double>(n) - z.mean * z.mean;
    if (!(var > 0.0))
      throw ValidationError(std::string("dataset generation: constant ") + what +
                            " data (std = 0)");
    z.std = std::sqrt(var);
    return z;
  };
  dataset.manifest.norm.voltage = fit(v_sum, v_sq, v_n, "voltage");
  dataset.manifest.norm.ecg = fit(e_sum, e_sq, e_n, "ecg");
  return dataset;
}

// ---------------------------------------------------------------------------
// Training

namespace {

template <typename S>
std::vector<EncoderContext<S>> build_contexts(const Dataset& dataset, int K, int L_f) {
  std::vector<EncoderContext<S>> contexts;
  contexts.reserve(dataset.meshes.size());
  for (const SurfaceMesh& mesh : dataset.meshes)
    contexts.push_back(build_encoder_context<S>(mesh, build_operators(mesh, K), L_f));
  return contexts;
}

template <typename S>
TrainSample<S> normalized_sample(const DatasetSample& s, const NormStats& norm, int ctx_index) {
  if (s.meta.trace_len != s.meta.n_frames)
    throw ValidationError("sample '" + s.meta.id +
                          "': trace is not on the frame clock (len != frames)");
  TrainSample<S> out;
  out.frames =
      ((s.frames.array() - norm.voltage.mean) / norm.voltage.std).matrix().template cast<S>();
  out.trace = ((s.trace.array() - norm.ecg.mean) / norm.ecg.std).matrix().template cast<S>();
  out.ctx_index = ctx_index;
  out.id = s.meta.id;
  return out;
}

template <typename S>
TrainArtifacts run_training_impl(const ExperimentConfig& cfg, const Dataset& dataset) {
  cfg.validate();
  if (data_hash(cfg) != dataset.manifest.data_hash)
    throw ValidationError("config/data hash mismatch: this config describes hash " +
                          data_hash(cfg) + ", the dataset was generated from " +
                          dataset.manifest.data_hash);

  const auto contexts = build_contexts<S>(dataset, cfg.model.K, cfg.model.L_f);
  std::vector<TrainSample<S>> train, val;
  for (const DatasetSample& s : dataset.samples) {
    const Split split = dataset.split_of(s.meta);
    if (split == Split::test) continue;
    auto sample = normalized_sample<S>(s, dataset.manifest.norm,
                                       dataset.manifest.find_mesh(s.meta.mesh_ref));
    (split == Split::train ? train : val).push_back(std::move(sample));
  }
  if (train.empty()) throw ValidationError("training: missing train split");
  if (val.empty()) throw ValidationError("training: missing val split");

  auto model = make_model<S>(cfg.model_dims(), cfg.ablation_flags(), cfg.seed, cfg.model.s_init,
                             cfg.model.b_init);
  const TrainResult<S> result = train_loop(model, contexts, train, val, cfg.schedule);

  TrainArtifacts artifacts;
  artifacts.log = result.log;
  artifacts.aborted = result.aborted;
  artifacts.abort_reason = result.abort_reason;
  Checkpoint& ckpt = artifacts.checkpoint;
  ckpt.model = cfg.model;
  ckpt.ablation = cfg.ablation;
  ckpt.norm = dataset.manifest.norm;
  ckpt.seed = cfg.seed;
  ckpt.epoch = result.best_epoch;
  ckpt.val_r2 = result.best_epoch >= 0 ? result.best_val_r2 : 0.0;
  ckpt.config_hash = config_hash(cfg);
  ckpt.data_hash = dataset.manifest.data_hash;
  set_checkpoint_values(ckpt, model.params, result.best_values);
  return artifacts;
}

}  // namespace

TrainArtifacts run_training(const ExperimentConfig& cfg, const Dataset& dataset, bool f64) {
  return f64 ? run_training_impl<double>(cfg, dataset) : run_training_impl<float>(cfg, dataset);
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

template <typename S>
SplitPredictions predict_split_impl(const Checkpoint& ckpt, const Dataset& dataset, Split split) {
  if (ckpt.data_hash != dataset.manifest.data_hash)
    throw ValidationError("checkpoint/data hash mismatch: checkpoint was trained on hash " +
                          ckpt.data_hash + ", this dataset is " + dataset.manifest.data_hash);
  auto model = make_model<S>(ckpt.model_dims(), ckpt.ablation_flags(), ckpt.seed,
                             ckpt.model.s_init, ckpt.model.b_init);
  apply_checkpoint_values(ckpt, model.params);
  const auto contexts = build_contexts<S>(dataset, ckpt.model.K, ckpt.model.L_f);

  SplitPredictions out;
  for (const DatasetSample& s : dataset.samples) {
    if (dataset.split_of(s.meta) != split) continue;
    const int ctx = dataset.manifest.find_mesh(s.meta.mesh_ref);
    const auto sample = normalized_sample<S>(s, ckpt.norm, ctx);
    const Eigen::VectorXd pred_norm =
        model_predict(model, sample.frames, contexts[static_cast<size_t>(ctx)]);
    out.ids.push_back(s.meta.id);
    out.truth_mv.push_back(s.trace);
    out.pred_mv.push_back(ckpt.norm.ecg.invert(pred_norm));
    out.frame_dt_ms.push_back(s.meta.frame_dt_ms);
  }
  if (out.ids.empty())
    throw ValidationError(std::string("missing split: no samples in '") + split_name(split) +
                          "'");
  return out;
}

}  // namespace

SplitPredictions predict_split(const Checkpoint& ckpt, const Dataset& dataset, Split split,
                               bool f64) {
  return f64 ? predict_split_impl<double>(ckpt, dataset, split)
             : predict_split_impl<float>(ckpt, dataset, split);
}

EvalReport run_eval(const Checkpoint& ckpt, const Dataset& dataset, Split split, bool f64) {
  const SplitPredictions preds = predict_split(ckpt, dataset, split, f64);
  EvalReport report;
  report.split = split;
  std::vector<double> r2_values, mae_values;
  for (size_t i = 0; i < preds.ids.size(); ++i) {
    EvalRow row;
    row.id = preds.ids[i];
    row.mae_mv = mae_metric(preds.pred_mv[i], preds.truth_mv[i]);
    mae_values.push_back(row.mae_mv);
    try {
      row.r2 = r2_metric(preds.pred_mv[i], preds.truth_mv[i]);
      r2_values.push_back(row.r2);
    } catch (const ValidationError&) {
      row.constant_truth = true;
      row.r2 = std::numeric_limits<double>::quiet_NaN();
    }
    report.rows.push_back(row);
  }
  report.r2 = cohort_of(r2_values);
  report.r2.n_excluded = static_cast<int>(preds.ids.size() - r2_values.size());
  report.mae = cohort_of(mae_values);
  return report;
}

// ---------------------------------------------------------------------------
// Reports and plots

std::string train_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,huber,spec_entropy,omega,lr,val_r2\n";
  for (const EpochLog& e : log)
    out += std::to_string(e.epoch) + "," + fmt(e.huber) + "," + fmt(e.spec_entropy) + "," +
           fmt(e.omega) + "," + fmt(e.lr) + "," + fmt(e.val_r2) + "\n";
  return out;
}

std::string trace_csv(const Eigen::VectorXd& truth_mv, const Eigen::VectorXd& pred_mv,
                      double frame_dt_ms) {
  if (truth_mv.size() != pred_mv.size()) throw ValidationError("trace_csv: length mismatch");
  std::string out = "t_ms,true_mV,pred_mV\n";
  for (int t = 0; t < truth_mv.size(); ++t)
    out += fmt(t * frame_dt_ms) + "," + fmt(truth_mv(t)) + "," + fmt(pred_mv(t)) + "\n";
  return out;
}

std::string trace_svg(const Eigen::VectorXd& truth_mv, const Eigen::VectorXd& pred_mv,
                      double frame_dt_ms, const std::string& title) {
  if (truth_mv.size() != pred_mv.size() || truth_mv.size() < 2)
    throw ValidationError("trace_svg: need two equal-length traces");
  const int W = 860, H = 340, ml = 64, mr = 18, mt = 28, mb = 46;
  const double pw = W - ml - mr, ph = H - mt - mb;
  const int T = static_cast<int>(truth_mv.size());
  const double t_max = (T - 1) * frame_dt_ms;

  double lo = std::min(truth_mv.minCoeff(), pred_mv.minCoeff());
  double hi = std::max(truth_mv.maxCoeff(), pred_mv.maxCoeff());
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const auto x_of = [&](double t_ms) { return ml + t_ms / t_max * pw; };
  const auto y_of = [&](double v) { return mt + (1.0 - (v - lo) / (hi - lo)) * ph; };
  const auto polyline = [&](const Eigen::VectorXd& v, const char* color) {
    std::string pts;
    for (int t = 0; t < T; ++t) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x_of(t * frame_dt_ms), y_of(v(t)));
      pts += buf;
    }
    return "  <polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(W) +
         "\" height=\"" + std::to_string(H) + "\" viewBox=\"0 0 " + std::to_string(W) + " " +
         std::to_string(H) + "\">\n";
  svg += "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  // Axis frame and ticks (5 per axis).
  svg += "  <g stroke=\"#444\" stroke-width=\"1\">\n";
  svg += "    <line x1=\"" + fmt6(ml) + "\" y1=\"" + fmt6(mt + ph) + "\" x2=\"" + fmt6(ml + pw) +
         "\" y2=\"" + fmt6(mt + ph) + "\"/>\n";
  svg += "    <line x1=\"" + fmt6(ml) + "\" y1=\"" + fmt6(mt) + "\" x2=\"" + fmt6(ml) +
         "\" y2=\"" + fmt6(mt + ph) + "\"/>\n";
  svg += "  </g>\n  <g font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">\n";
  for (int k = 0; k < 5; ++k) {
    const double tv = t_max * k / 4.0;
    const double vv = lo + (hi - lo) * k / 4.0;
    svg += "    <line x1=\"" + fmt6(x_of(tv)) + "\" y1=\"" + fmt6(mt + ph) + "\" x2=\"" +
           fmt6(x_of(tv)) + "\" y2=\"" + fmt6(mt + ph + 4) + "\" stroke=\"#444\"/>\n";
    svg += "    <text x=\"" + fmt6(x_of(tv)) + "\" y=\"" + fmt6(mt + ph + 16) +
           "\" text-anchor=\"middle\">" + fmt6(tv) + "</text>\n";
    svg += "    <line x1=\"" + fmt6(ml - 4) + "\" y1=\"" + fmt6(y_of(vv)) + "\" x2=\"" +
           fmt6(ml) + "\" y2=\"" + fmt6(y_of(vv)) + "\" stroke=\"#444\"/>\n";
    svg += "    <text x=\"" + fmt6(ml - 7) + "\" y=\"" + fmt6(y_of(vv) + 4) +
           "\" text-anchor=\"end\">" + fmt6(vv) + "</text>\n";
  }
  svg += "    <text x=\"" + fmt6(ml + pw / 2) + "\" y=\"" + fmt6(H - 10) +
         "\" text-anchor=\"middle\">time (ms)</text>\n";
  svg += "    <text x=\"16\" y=\"" + fmt6(mt + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         fmt6(mt + ph / 2) + ")\">Lead II (mV)</text>\n";
  svg += "    <text x=\"" + fmt6(ml) + "\" y=\"16\">" + title + "</text>\n";
  // Legend.
  svg += "    <line x1=\"" + fmt6(ml + pw - 150) + "\" y1=\"12\" x2=\"" + fmt6(ml + pw - 120) +
         "\" y2=\"12\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  svg += "    <text x=\"" + fmt6(ml + pw - 114) + "\" y=\"16\">truth</text>\n";
  svg += "    <line x1=\"" + fmt6(ml + pw - 70) + "\" y1=\"12\" x2=\"" + fmt6(ml + pw - 40) +
         "\" y2=\"12\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
  svg += "    <text x=\"" + fmt6(ml + pw - 34) + "\" y=\"16\">prediction</text>\n";
  svg += "  </g>\n";

  svg += polyline(truth_mv, "black");
  svg += polyline(pred_mv, "#d62728");
  svg += "</svg>\n";
  return svg;
}

// ---------------------------------------------------------------------------
// CLI entry points

int cmd_gen_mesh(const ExperimentConfig& cfg, const std::string& out_path) {
  cfg.validate();
  const SurfaceMesh mesh = gen_synthetic_atrium(cfg.geometry.atrium, cfg.seed);
  save_mesh(mesh, out_path);
  std::cout << "wrote " << out_path << " (" << mesh.n_vertices() << " vertices, "
            << mesh.n_faces() << " faces)\n";
  return 0;
}

int cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_dir) {
  std::vector<std::string> failures;
  const Dataset dataset = generate_dataset(cfg, &failures);
  ensure_dir(out_dir);
  save_dataset(dataset, out_dir);
  for (const std::string& f : failures) std::cerr << "warning: sample failed: " << f << "\n";
  int n_train = 0, n_val = 0, n_test = 0;
  for (const SampleMeta& meta : dataset.manifest.samples) {
    switch (dataset.split_of(meta)) {
      case Split::train: ++n_train; break;
      case Split::val: ++n_val; break;
      case Split::test: ++n_test; break;
    }
  }
  std::cout << "wrote " << dataset.samples.size() << " samples ("
            << dataset.meshes.size() << " meshes; split " << n_train << "/" << n_val << "/"
            << n_test << ", " << failures.size() << " failed) to " << out_dir << "\n";
  return 0;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& data_dir,
              const std::string& out_dir, bool f64) {
  const Dataset dataset = load_dataset(data_dir);
  const TrainArtifacts artifacts = run_training(cfg, dataset, f64);
  ensure_dir(out_dir);
  save_checkpoint(artifacts.checkpoint, (fs::path(out_dir) / "checkpoint").string());
  write_file_bytes((fs::path(out_dir) / "train_log.csv").string(),
                   train_log_csv(artifacts.log));
  if (artifacts.aborted) {
    std::cerr << "training aborted: " << artifacts.abort_reason
              << " (best checkpoint so far written to " << out_dir << ")\n";
    return 1;
  }
  std::cout << "trained " << artifacts.log.size() << " epochs; best val R^2 "
            << fmt6(artifacts.checkpoint.val_r2) << " at epoch " << artifacts.checkpoint.epoch
            << "; wrote " << out_dir << "/checkpoint.{json,bin}\n";
  return 0;
}

namespace {

std::string eval_summary_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["split"] = split_name(report.split);
  j["r2_mean"] = report.r2.mean;
  j["r2_std"] = report.r2.std;
  j["mae_mean_mv"] = report.mae.mean;
  j["mae_std_mv"] = report.mae.std;
  j["n_traces"] = report.mae.n_used;
  j["n_constant_excluded"] = report.r2.n_excluded;
  return j.dump(2) + "\n";
}

std::string eval_rows_csv(const EvalReport& report) {
  std::string csv = "sample_id,split,r2,mae_mv\n";
  for (const EvalRow& row : report.rows)
    csv += row.id + "," + split_name(report.split) + "," +
           (row.constant_truth ? "excluded" : fmt(row.r2)) + "," + fmt(row.mae_mv) + "\n";
  return csv;
}

void print_eval(const EvalReport& report) {
  std::cout << split_name(report.split) << " split: R^2 " << fmt6(report.r2.mean) << " +- "
            << fmt6(report.r2.std) << " (n=" << report.r2.n_used << ", excluded "
            << report.r2.n_excluded << "), MAE " << fmt6(report.mae.mean) << " +- "
            << fmt6(report.mae.std) << " mV\n";
}

}  // namespace

int cmd_eval(const std::string& ckpt_stem, const std::string& data_dir,
             const std::string& split_name_str, const std::string& out_dir, bool f64) {
  const Checkpoint ckpt = load_checkpoint(ckpt_stem);
  const Dataset dataset = load_dataset(data_dir);
  const EvalReport report = run_eval(ckpt, dataset, parse_split(split_name_str), f64);
  ensure_dir(out_dir);
  write_file_bytes((fs::path(out_dir) / "metrics.csv").string(), eval_rows_csv(report));
  write_file_bytes((fs::path(out_dir) / "summary.json").string(), eval_summary_json(report));
  print_eval(report);
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg, const std::string& data_dir,
               const std::string& out_dir, bool f64) {
  const Dataset dataset = load_dataset(data_dir);

  struct Variant {
    const char* name;
    void (*apply)(AblationConfig&);
  };
  const Variant variants[] = {
      {"baseline", [](AblationConfig&) {}},
      {"no_local_stream", [](AblationConfig& a) { a.disable_local = true; }},
      {"no_spectral_stream", [](AblationConfig& a) { a.disable_spec = true; }},
      {"no_voltage_stream", [](AblationConfig& a) { a.disable_voltage = true; }},
      {"no_stats", [](AblationConfig& a) { a.disable_stats = true; }},
      {"no_attention", [](AblationConfig& a) { a.disable_attention = true; }},
  };

  std::string csv = "config,val_r2,test_r2_mean,test_r2_std,test_mae_mean_mv,test_mae_std_mv,"
                    "delta_r2_vs_baseline\n";
  double baseline_r2 = 0.0;
  for (const Variant& variant : variants) {
    ExperimentConfig vcfg = cfg;
    variant.apply(vcfg.ablation);
    const TrainArtifacts artifacts = run_training(vcfg, dataset, f64);
    if (artifacts.aborted)
      throw ValidationError(std::string("ablation '") + variant.name +
                            "' aborted: " + artifacts.abort_reason);
    const EvalReport report = run_eval(artifacts.checkpoint, dataset, Split::test, f64);
    if (std::string(variant.name) == "baseline") baseline_r2 = report.r2.mean;
    csv += std::string(variant.name) + "," + fmt(artifacts.checkpoint.val_r2) + "," +
           fmt(report.r2.mean) + "," + fmt(report.r2.std) + "," + fmt(report.mae.mean) + "," +
           fmt(report.mae.std) + "," + fmt(report.r2.mean - baseline_r2) + "\n";
    std::cout << variant.name << ": test R^2 " << fmt6(report.r2.mean) << " +- "
              << fmt6(report.r2.std) << ", MAE " << fmt6(report.mae.mean) << " mV\n";
  }
  ensure_dir(out_dir);
  write_file_bytes((fs::path(out_dir) / "ablation.csv").string(), csv);
  std::cout << "wrote " << out_dir << "/ablation.csv\n";
  return 0;
}

int cmd_plot(const std::string& ckpt_stem, const std::string& data_dir,
             const std::string& split_name_str, const std::string& out_dir, bool f64) {
  const Checkpoint ckpt = load_checkpoint(ckpt_stem);
  const Dataset dataset = load_dataset(data_dir);
  const SplitPredictions preds =
      predict_split(ckpt, dataset, parse_split(split_name_str), f64);
  ensure_dir(out_dir);
  for (size_t i = 0; i < preds.ids.size(); ++i) {
    const std::string stem = (fs::path(out_dir) / preds.ids[i]).string();
    write_file_bytes(stem + ".csv",
                     trace_csv(preds.truth_mv[i], preds.pred_mv[i], preds.frame_dt_ms[i]));
    write_file_bytes(stem + ".svg", trace_svg(preds.truth_mv[i], preds.pred_mv[i],
                                              preds.frame_dt_ms[i], preds.ids[i]));
  }
  std::cout << "wrote " << preds.ids.size() << " trace plots (SVG + CSV) to " << out_dir
            << "\n";
  return 0;
}

int cmd_grad_check(uint64_t seed) {
  // Tiny verification model on a 20-node sheet, always in 64-bit. Eight
  // frames is the shortest sequence the spectral-entropy term accepts.
  const SurfaceMesh mesh = make_sheet(4, 5);
  const GeometricOperators ops = build_operators(mesh, 6);
  const auto ctx = build_encoder_context<double>(mesh, ops, 2);

  ModelDims dims;
  dims.enc = EncoderDims{3, 4, 2, 1};
  dims.dec.d_z = 4;
  dims.dec.d_e = 4;
  dims.dec.d_a = 3;
  dims.dec.d_hid = 6;
  dims.dec.d_head = 5;
  auto model = make_model<double>(dims, AblationFlags{}, mix_seed(seed, fnv1a("init")));

  const int T = 8, N = mesh.n_vertices();
  Rng rng(mix_seed(seed, fnv1a("data")));
  Mat<double> frames(T, N), trace(T, 1);
  for (int t = 0; t < T; ++t) {
    for (int n = 0; n < N; ++n) frames(t, n) = rng.uniform(-1.0, 1.0);
    trace(t, 0) = rng.uniform(-1.0, 1.0);
  }

  const GradCheckReport report = grad_check(model, ctx, frames, trace, TrainSchedule{}, 0);
  for (const GradCheckGroup& g : report.groups) {
    if (g.skipped)
      std::cout << g.name << ": skipped (gradient norm < 1e-12)\n";
    else
      std::cout << g.name << ": max rel err " << fmt6(g.max_rel_err) << " "
                << (g.passed ? "ok" : "FAIL") << "\n";
  }
  if (!report.all_passed) {
    std::cerr << "grad-check failed for: " << report.failures() << "\n";
    return 1;
  }
  std::cout << "grad-check passed for all " << report.groups.size() << " groups\n";
  return 0;
}

int cmd_verify(const std::string& data_dir, const std::string& ckpt_stem) {
  std::vector<std::string> problems;
  if (!data_dir.empty()) {
    const auto p = verify_dataset(data_dir);
    problems.insert(problems.end(), p.begin(), p.end());
  }
  if (!ckpt_stem.empty()) {
    const auto p = verify_checkpoint(ckpt_stem);
    problems.insert(problems.end(), p.begin(), p.end());
  }
  for (const std::string& p : problems) std::cerr << "verify: " << p << "\n";
  if (!problems.empty()) return 1;
  std::cout << "verify: ok\n";
  return 0;
}

}  // namespace ecgfwd
