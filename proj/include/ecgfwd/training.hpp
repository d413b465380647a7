#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ecgfwd/autodiff.hpp"
#include "ecgfwd/decoder.hpp"
#include "ecgfwd/encoder.hpp"
#include "ecgfwd/errors.hpp"
#include "ecgfwd/nn.hpp"
#include "ecgfwd/rng.hpp"

namespace ecgfwd {

// ---------------------------------------------------------------------------
// Normalization

/// Z-score transform fit on training-split data only.
struct Zscore {
  double mean = 0.0;
  double std = 1.0;

  static Zscore fit(const Eigen::VectorXd& data) {
    if (data.size() == 0) throw ValidationError("zscore: cannot fit on empty data");
    Zscore z;
    z.mean = data.mean();
    z.std = std::sqrt((data.array() - z.mean).square().mean());
    if (z.std == 0.0) throw ValidationError("zscore: constant data (std = 0)");
    return z;
  }

  double apply(double x) const { return (x - mean) / std; }
  double invert(double y) const { return y * std + mean; }
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return (x.array() - mean) / std;
  }
  Eigen::VectorXd invert(const Eigen::VectorXd& y) const {
    return y.array() * std + mean;
  }
};

// ---------------------------------------------------------------------------
// Losses

/// Mean Huber loss (plain value; the taped twin is ad::huber_mean).
inline double huber_value(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth,
                          double delta) {
  if (pred.size() != truth.size()) throw ValidationError("huber_loss: length mismatch");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const double a = std::abs(pred(i) - truth(i));
    acc += a <= delta ? 0.5 * a * a : delta * (a - 0.5 * delta);
  }
  return acc / static_cast<double>(pred.size());
}

/// One-sided PSD bin count for a length-T trace: harmonics 1..floor(T/2)
/// (the DC bin is identically zero after mean removal and is dropped).
inline int psd_bins(int T) { return T / 2; }

/// Shannon entropy of the normalized one-sided PSD of the mean-removed
/// trace, as a tape node. An identically-zero spectrum is defined as the
/// uniform distribution, giving the constant ln B.
template <typename S>
Var<S> spectral_entropy(Tape<S>& tape, Var<S> trace) {
  if (trace.cols() != 1) throw ValidationError("spectral_entropy: trace must be a column");
  const int T = trace.rows();
  if (T < 8) throw ValidationError("spectral_entropy: need at least 8 samples");
  const int B = psd_bins(T);

  Mat<S> C(B, T), Sn(B, T);
  for (int k = 1; k <= B; ++k)
    for (int t = 0; t < T; ++t) {
      const double ang = 2.0 * M_PI * k * t / T;
      C(k - 1, t) = static_cast<S>(std::cos(ang));
      Sn(k - 1, t) = static_cast<S>(-std::sin(ang));
    }

  const auto centered = ad::add_scalar(trace, ad::scale(ad::mean_all(trace), S(-1)));
  // The DFT matrices live on the tape as constants so the backward pass can
  // still reach them after this frame returns.
  const auto re = ad::matmul(ad::constant(tape, std::move(C)), centered);
  const auto im = ad::matmul(ad::constant(tape, std::move(Sn)), centered);
  const auto psd = ad::add(ad::mul(re, re), ad::mul(im, im));  // B x 1
  const auto total = ad::sum_all(psd);
  if (total.val()(0, 0) == S(0))
    return ad::scalar(tape, static_cast<S>(std::log(static_cast<double>(B))));
  const auto p = ad::div_scalar(psd, total);
  return ad::scale(ad::sum_all(ad::xlogx(p)), S(-1));
}

/// (H(pred) - H(true))^2 on the tape; the reference entropy contributes no
/// gradient because the truth enters as a constant.
template <typename S>
Var<S> spectral_entropy_loss(Tape<S>& tape, Var<S> pred, const Mat<S>& truth) {
  if (pred.rows() != truth.rows() || truth.cols() != 1)
    throw ValidationError("spectral_entropy_loss: length mismatch");
  const auto h_pred = spectral_entropy(tape, pred);
  const auto h_true = spectral_entropy(tape, ad::constant(tape, truth));
  const auto d = ad::sub(h_pred, h_true);
  return ad::mul(d, d);
}

/// Plain-value spectral entropy of one trace.
inline double spectral_entropy_value(const Eigen::VectorXd& trace) {
  Tape<double> tape;
  return spectral_entropy(tape, ad::constant(tape, Mat<double>(trace))).val()(0, 0);
}

inline double spectral_entropy_loss_value(const Eigen::VectorXd& pred,
                                          const Eigen::VectorXd& truth) {
  const double d = spectral_entropy_value(pred) - spectral_entropy_value(truth);
  return d * d;
}

// ---------------------------------------------------------------------------
// Schedules

struct TrainSchedule {
  int epochs = 50;
  double lr0 = 0.001;
  int halve_every = 3;       // epochs per learning-rate halving
  double huber_delta = 1.0;  // normalized units
  double omega0 = 0.1;       // initial spectral-entropy weight
  int batch_size = 4;
  uint64_t seed = 0;

  void validate() const {
    if (epochs < 1 || lr0 <= 0.0 || halve_every < 1 || huber_delta <= 0.0 || omega0 < 0.0 ||
        batch_size < 1)
      throw ValidationError("train schedule: all quantities must be positive");
    if (halve_every > epochs)
      throw ValidationError("train schedule: halving period exceeds epoch count");
  }
};

/// Cosine decay of the spectral-entropy weight from omega0 at n=0 to 0 at n=N.
inline double omega_schedule(int n, int N, double omega0) {
  if (n < 0 || n > N) throw ValidationError("omega_schedule: epoch outside [0, N]");
  return omega0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(n) / N));
}

/// lr(e) = lr0 * 0.5^floor(e / halve_every); halving by powers of two is
/// exact in floating point.
inline double lr_schedule(int epoch, const TrainSchedule& sched) {
  if (epoch < 0) throw ValidationError("lr_schedule: negative epoch");
  return sched.lr0 * std::pow(0.5, static_cast<double>(epoch / sched.halve_every));
}

/// Huber + omega(n) * spectral-entropy, on the tape.
template <typename S>
Var<S> total_loss(Tape<S>& tape, Var<S> pred, const Mat<S>& truth, int epoch,
                  const TrainSchedule& sched) {
  const auto huber = ad::huber_mean(pred, truth, static_cast<S>(sched.huber_delta));
  const double w = omega_schedule(epoch, sched.epochs, sched.omega0);
  if (w == 0.0) return huber;
  return ad::add(huber, ad::scale(spectral_entropy_loss(tape, pred, truth), static_cast<S>(w)));
}

// ---------------------------------------------------------------------------
// Metrics

/// Per-trace R^2 = 1 - SS_res / SS_tot. Throws on a constant truth trace
/// (undefined denominator); cohort code catches and excludes with a warning.
inline double r2_metric(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size()) throw ValidationError("r2_metric: length mismatch");
  const double mean = truth.mean();
  const double ss_tot = (truth.array() - mean).square().sum();
  if (ss_tot == 0.0) throw ValidationError("r2_metric: constant truth trace (R^2 undefined)");
  const double ss_res = (pred - truth).array().square().sum();
  return 1.0 - ss_res / ss_tot;
}

/// Mean absolute error in the units of its inputs (callers pass mV traces).
inline double mae_metric(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size()) throw ValidationError("mae_metric: length mismatch");
  return (pred - truth).cwiseAbs().mean();
}

/// Mean +- std over per-trace values, with constant-truth traces excluded.
struct CohortStats {
  double mean = 0.0;
  double std = 0.0;
  int n_used = 0;
  int n_excluded = 0;
};

inline CohortStats cohort_of(const std::vector<double>& values) {
  CohortStats out;
  out.n_used = static_cast<int>(values.size());
  if (values.empty()) return out;
  double acc = 0.0;
  for (double v : values) acc += v;
  out.mean = acc / values.size();
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / values.size());
  return out;
}

inline CohortStats cohort_r2(const std::vector<Eigen::VectorXd>& preds,
                             const std::vector<Eigen::VectorXd>& truths) {
  if (preds.size() != truths.size()) throw ValidationError("cohort_r2: trace count mismatch");
  int excluded = 0;
  std::vector<double> values;
  for (size_t i = 0; i < preds.size(); ++i) {
    try {
      values.push_back(r2_metric(preds[i], truths[i]));
    } catch (const ValidationError&) {
      ++excluded;
    }
  }
  CohortStats out = cohort_of(values);
  out.n_excluded = excluded;
  return out;
}

// ---------------------------------------------------------------------------
// Deterministic splits

enum class Split { train = 0, val = 1, test = 2 };

/// Split assignment from the sample id and seed alone, so membership never
/// depends on what else is in the dataset. The id is hashed with the seed
/// into a uniform draw against the cumulative fractions.
inline Split assign_split(const std::string& sample_id, uint64_t seed, double f_train,
                          double f_val) {
  if (f_train <= 0.0 || f_val < 0.0 || f_train + f_val > 1.0 + 1e-12)
    throw ValidationError("assign_split: invalid fractions");
  const uint64_t h = mix_seed(seed, fnv1a(sample_id));
  const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
  if (u < f_train) return Split::train;
  if (u < f_train + f_val) return Split::val;
  return Split::test;
}

// ---------------------------------------------------------------------------
// Full surrogate model (encoder + decoder over one parameter store)

struct ModelDims {
  EncoderDims enc;
  DecoderDims dec;

  void validate() const {
    if (enc.d_z != dec.d_z)
      throw ValidationError("model: encoder and decoder latent widths differ");
  }
};

/// Which model ingredients are active (ablation switches).
struct AblationFlags {
  StreamFlags streams;
  bool attention = true;
};

template <typename S>
struct ForwardModel {
  ModelDims dims;
  AblationFlags ablation;
  ParamStore<S> params;
};

template <typename S>
ForwardModel<S> make_model(const ModelDims& dims, const AblationFlags& ablation, uint64_t seed,
                           double s_init = 0.1, double b_init = 1.0) {
  dims.validate();
  ablation.streams.require_some_stream();
  ForwardModel<S> m;
  m.dims = dims;
  m.ablation = ablation;
  register_encoder_params(m.params, dims.enc, seed, s_init, b_init);
  register_decoder_params(m.params, dims.dec, seed);
  return m;
}

/// Encodes every frame on the shared tape and stacks the latents T x d_z.
template <typename S>
Var<S> encode_sequence_taped(Tape<S>& tape, const Mat<S>& frames, const EncoderContext<S>& ctx,
                             ForwardModel<S>& model) {
  if (frames.rows() < 1) throw ValidationError("encode_sequence: empty frame sequence");
  std::vector<Var<S>> latents;
  latents.reserve(static_cast<size_t>(frames.rows()));
  for (int t = 0; t < frames.rows(); ++t)
    latents.push_back(enc::encode_frame(tape, Mat<S>(frames.row(t).transpose()), ctx,
                                        model.params, model.dims.enc, model.ablation.streams));
  return ad::concat_rows<S>(latents);
}

/// End-to-end taped forward pass: frames -> latents -> decoded trace (T x 1).
template <typename S>
Var<S> model_forward_taped(Tape<S>& tape, ForwardModel<S>& model, const Mat<S>& frames,
                           const EncoderContext<S>& ctx, DecodeMode mode,
                           const Mat<S>* y_true = nullptr) {
  const auto Z = encode_sequence_taped(tape, frames, ctx, model);
  const Mat<S> E = time_embedding_matrix(static_cast<int>(frames.rows()), model.dims.dec.d_e)
                       .template cast<S>();
  return dec::decode_sequence(tape, Z, E, model.params, model.dims.dec, mode, y_true,
                              model.ablation.attention);
}

/// Free-running prediction, values only.
template <typename S>
Eigen::VectorXd model_predict(ForwardModel<S>& model, const Mat<S>& frames,
                              const EncoderContext<S>& ctx) {
  Tape<S> tape;
  const auto pred = model_forward_taped(tape, model, frames, ctx, DecodeMode::free_running);
  return pred.val().template cast<double>();
}

// ---------------------------------------------------------------------------
// Training loop

/// One training sample: normalized frames (T x N), normalized trace (T x 1),
/// and the index of the mesh context it lives on.
template <typename S>
struct TrainSample {
  Mat<S> frames;
  Mat<S> trace;
  int ctx_index = 0;
  std::string id;
};

struct EpochLog {
  int epoch = 0;
  double huber = 0.0;
  double spec_entropy = 0.0;
  double omega = 0.0;
  double lr = 0.0;
  double val_r2 = 0.0;
};

template <typename S>
struct TrainResult {
  std::vector<Mat<S>> best_values;  // parameter snapshot, store order
  double best_val_r2 = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  std::vector<EpochLog> log;
  bool aborted = false;
  std::string abort_reason;
  int val_traces_excluded = 0;
};

template <typename S>
std::vector<Mat<S>> snapshot_params(const ParamStore<S>& store) {
  std::vector<Mat<S>> out;
  out.reserve(static_cast<size_t>(store.count()));
  for (int i = 0; i < store.count(); ++i) out.push_back(store.group(i).value);
  return out;
}

template <typename S>
void restore_params(ParamStore<S>& store, const std::vector<Mat<S>>& values) {
  if (static_cast<int>(values.size()) != store.count())
    throw ValidationError("restore_params: snapshot does not match the store");
  for (int i = 0; i < store.count(); ++i) store.group(i).value = values[static_cast<size_t>(i)];
}

/// Mean free-running validation R^2 (normalized traces; R^2 is invariant
/// under the shared affine denormalization).
template <typename S>
CohortStats validation_r2(ForwardModel<S>& model, const std::vector<EncoderContext<S>>& contexts,
                          const std::vector<TrainSample<S>>& val) {
  std::vector<Eigen::VectorXd> preds, truths;
  for (const TrainSample<S>& s : val) {
    preds.push_back(model_predict(model, s.frames, contexts[static_cast<size_t>(s.ctx_index)]));
    truths.push_back(s.trace.template cast<double>());
  }
  return cohort_r2(preds, truths);
}

/// Seeded-shuffle teacher-forced training with per-epoch free-running
/// validation; the best-validation parameter snapshot is retained. A
/// non-finite loss or gradient aborts training with the snapshot intact.
template <typename S>
TrainResult<S> train_loop(ForwardModel<S>& model, const std::vector<EncoderContext<S>>& contexts,
                          const std::vector<TrainSample<S>>& train,
                          const std::vector<TrainSample<S>>& val, const TrainSchedule& sched) {
  sched.validate();
  if (train.empty()) throw ValidationError("train_loop: empty training split");
  if (val.empty()) throw ValidationError("train_loop: empty validation split");
  for (const auto& s : train)
    if (s.ctx_index < 0 || s.ctx_index >= static_cast<int>(contexts.size()))
      throw ValidationError("train_loop: sample references a missing mesh context");

  TrainResult<S> result;
  result.best_values = snapshot_params(model.params);  // valid even if epoch 0 aborts

  Adam<S> adam;
  adam.reset(model.params);

  std::vector<int> order(train.size());
  for (size_t i = 0; i < train.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < sched.epochs; ++epoch) {
    const double lr = lr_schedule(epoch, sched);
    const double omega = omega_schedule(epoch, sched.epochs, sched.omega0);

    Rng shuffle_rng(mix_seed(sched.seed, 0x7261696e + static_cast<uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_huber = 0.0, epoch_se = 0.0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(sched.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(sched.batch_size));
      // The shuffle decides batch membership; accumulation order within the
      // batch is pinned to ascending sample index for reproducibility.
      std::vector<int> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(stop));
      std::sort(batch.begin(), batch.end());
      const S inv_batch = S(1) / static_cast<S>(batch.size());
      model.params.zero_grads();
      for (const int sample_index : batch) {
        const TrainSample<S>& s = train[static_cast<size_t>(sample_index)];
        Tape<S> tape;
        const auto pred = model_forward_taped(tape, model, s.frames,
                                              contexts[static_cast<size_t>(s.ctx_index)],
                                              DecodeMode::teacher_forced, &s.trace);
        const auto huber = ad::huber_mean(pred, s.trace, static_cast<S>(sched.huber_delta));
        const auto se = spectral_entropy_loss(tape, pred, s.trace);
        const auto loss =
            ad::scale(ad::add(huber, ad::scale(se, static_cast<S>(omega))), inv_batch);

        const double loss_value = static_cast<double>(loss.val()(0, 0));
        if (!std::isfinite(loss_value)) {
          result.aborted = true;
          result.abort_reason = "non-finite loss at epoch " + std::to_string(epoch) +
                                " on sample '" + s.id + "'";
          return result;
        }
        epoch_huber += static_cast<double>(huber.val()(0, 0));
        epoch_se += static_cast<double>(se.val()(0, 0));
        tape.backward(loss.id);
      }
      const std::string bad = model.params.first_nonfinite_grad();
      if (!bad.empty()) {
        result.aborted = true;
        result.abort_reason =
            "non-finite gradient in group '" + bad + "' at epoch " + std::to_string(epoch);
        return result;
      }
      adam.step(model.params, lr);
    }

    const CohortStats vr2 = validation_r2(model, contexts, val);
    result.val_traces_excluded = vr2.n_excluded;
    if (vr2.n_used == 0) throw ValidationError("train_loop: every validation trace is constant");

    EpochLog entry;
    entry.epoch = epoch;
    entry.huber = epoch_huber / static_cast<double>(train.size());
    entry.spec_entropy = epoch_se / static_cast<double>(train.size());
    entry.omega = omega;
    entry.lr = lr;
    entry.val_r2 = vr2.mean;
    result.log.push_back(entry);

    if (vr2.mean > result.best_val_r2) {
      result.best_val_r2 = vr2.mean;
      result.best_epoch = epoch;
      result.best_values = snapshot_params(model.params);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gradient verification

struct GradCheckGroup {
  std::string name;
  double max_rel_err = 0.0;
  bool skipped = false;  // gradient norm below 1e-12
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  bool all_passed = true;

  std::string failures() const {
    std::string out;
    for (const auto& g : groups)
      if (!g.passed) out += (out.empty() ? "" : ", ") + g.name;
    return out;
  }
};

/// Central finite differences (step 1e-5) of the teacher-forced total loss
/// against the analytic gradients, per parameter group. Meant to run on the
/// 64-bit instantiation.
template <typename S>
GradCheckReport grad_check(ForwardModel<S>& model, const EncoderContext<S>& ctx,
                           const Mat<S>& frames, const Mat<S>& y_true, const TrainSchedule& sched,
                           int epoch = 0) {
  const auto loss_value = [&]() {
    Tape<S> tape;
    const auto pred =
        model_forward_taped(tape, model, frames, ctx, DecodeMode::teacher_forced, &y_true);
    return static_cast<double>(total_loss(tape, pred, y_true, epoch, sched).val()(0, 0));
  };

  model.params.zero_grads();
  {
    Tape<S> tape;
    const auto pred =
        model_forward_taped(tape, model, frames, ctx, DecodeMode::teacher_forced, &y_true);
    const auto loss = total_loss(tape, pred, y_true, epoch, sched);
    tape.backward(loss.id);
  }

  GradCheckReport report;
  const double h = 1e-5;
  // Differencing a loss of size |f| cannot resolve gradient components below
  // the rounding of the two evaluations, about eps*|f|/h. Differences under a
  // safety multiple of that floor are indistinguishable from exact agreement
  // (this matters for groups like attention whose gradients start near 1e-8).
  const double noise_floor = 256.0 * std::numeric_limits<double>::epsilon() *
                             std::max(std::abs(loss_value()), 0.01) / h;
  for (int gi = 0; gi < model.params.count(); ++gi) {
    auto& group = model.params.group(gi);
    GradCheckGroup res;
    res.name = group.name;
    if (group.grad.norm() < 1e-12) {
      res.skipped = true;
      report.groups.push_back(res);
      continue;
    }
    for (int e = 0; e < group.value.size(); ++e) {
      const S keep = group.value(e);
      group.value(e) = keep + static_cast<S>(h);
      const double fp = loss_value();
      group.value(e) = keep - static_cast<S>(h);
      const double fm = loss_value();
      group.value(e) = keep;
      const double fd = (fp - fm) / (2.0 * h);
      const double ag = static_cast<double>(group.grad(e));
      const double scale = std::max(std::abs(fd), std::abs(ag));
      if (scale < 1e-10) continue;            // both effectively zero
      if (std::abs(ag - fd) <= noise_floor) continue;  // below FD resolution
      res.max_rel_err = std::max(res.max_rel_err, std::abs(ag - fd) / scale);
    }
    res.passed = res.max_rel_err <= 1e-4;
    report.all_passed = report.all_passed && res.passed;
    report.groups.push_back(res);
  }
  return report;
}

}  // namespace ecgfwd
