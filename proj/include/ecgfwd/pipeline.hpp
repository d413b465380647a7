#pragma once

#include <string>
#include <vector>

#include "ecgfwd/checkpoint.hpp"
#include "ecgfwd/config.hpp"
#include "ecgfwd/dataset.hpp"

namespace ecgfwd {

/// Full synthetic dataset for a config: meshes, pacing, voltages, oracle
/// traces, and train-split normalization stats. Per-sample failures are
/// reported through `failures` (id: reason); more than 10% failing aborts.
Dataset generate_dataset(const ExperimentConfig& cfg,
                         std::vector<std::string>* failures = nullptr);

struct TrainArtifacts {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
  bool aborted = false;
  std::string abort_reason;
};

/// Trains on the dataset's train split with per-epoch validation, honoring
/// the config's precision-independent seeds. `f64` selects the 64-bit
/// verification mode (default training is 32-bit).
TrainArtifacts run_training(const ExperimentConfig& cfg, const Dataset& dataset, bool f64);

struct EvalRow {
  std::string id;
  double r2 = 0.0;
  double mae_mv = 0.0;
  bool constant_truth = false;  // excluded from the R^2 cohort
};

struct EvalReport {
  Split split = Split::test;
  std::vector<EvalRow> rows;
  CohortStats r2;   // over non-constant truth traces
  CohortStats mae;  // over all traces, in mV
};

/// Free-running evaluation of a checkpoint on one dataset split, metrics on
/// denormalized (mV) traces.
EvalReport run_eval(const Checkpoint& ckpt, const Dataset& dataset, Split split, bool f64);

/// Free-running denormalized predictions (mV) for every sample of a split,
/// paired with ids and ground truth; shared by eval and plot.
struct SplitPredictions {
  std::vector<std::string> ids;
  std::vector<Eigen::VectorXd> truth_mv;
  std::vector<Eigen::VectorXd> pred_mv;
  std::vector<double> frame_dt_ms;
};
SplitPredictions predict_split(const Checkpoint& ckpt, const Dataset& dataset, Split split,
                               bool f64);

/// The training log CSV ("epoch,huber,spec_entropy,omega,lr,val_r2").
std::string train_log_csv(const std::vector<EpochLog>& log);

/// Ground truth vs prediction as "t_ms,true_mV,pred_mV" rows.
std::string trace_csv(const Eigen::VectorXd& truth_mv, const Eigen::VectorXd& pred_mv,
                      double frame_dt_ms);

/// SVG overlay of ground truth (black) and prediction (red) with ms/mV axes.
std::string trace_svg(const Eigen::VectorXd& truth_mv, const Eigen::VectorXd& pred_mv,
                      double frame_dt_ms, const std::string& title);

Split parse_split(const std::string& name);

// --------------------------------------------------------------------------
// CLI entry points. All return process exit codes (0 success, 1 validation
// failure); I/O and validation exceptions propagate to the caller, which
// maps them to exit codes 2 and 1.

int cmd_gen_mesh(const ExperimentConfig& cfg, const std::string& out_path);
int cmd_gen_data(const ExperimentConfig& cfg, const std::string& out_dir);
int cmd_train(const ExperimentConfig& cfg, const std::string& data_dir,
              const std::string& out_dir, bool f64);
int cmd_eval(const std::string& ckpt_stem, const std::string& data_dir,
             const std::string& split_name, const std::string& out_dir, bool f64);
int cmd_ablate(const ExperimentConfig& cfg, const std::string& data_dir,
               const std::string& out_dir, bool f64);
int cmd_plot(const std::string& ckpt_stem, const std::string& data_dir,
             const std::string& split_name, const std::string& out_dir, bool f64);
int cmd_grad_check(uint64_t seed);
int cmd_verify(const std::string& data_dir, const std::string& ckpt_stem);

}  // namespace ecgfwd
