#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ecgfwd/config.hpp"
#include "ecgfwd/dataset.hpp"

namespace ecgfwd {

/// One parameter group in the checkpoint blob: `offset` is the byte
/// position of its row-major little-endian f32 data.
struct CheckpointParam {
  std::string name;
  int rows = 0;
  int cols = 0;
  uint64_t offset = 0;

  uint64_t bytes() const { return 4ull * static_cast<uint64_t>(rows) * cols; }
};

/// Model weights plus everything needed to rebuild and evaluate the model:
/// widths, ablation switches, normalization, provenance hashes, and the
/// best-validation bookkeeping. Stored as <stem>.json + <stem>.bin.
struct Checkpoint {
  ModelConfig model;
  AblationConfig ablation;
  NormStats norm;
  uint64_t seed = 0;
  int epoch = -1;       // epoch of the retained (best-validation) weights
  double val_r2 = 0.0;  // its validation R^2
  std::string config_hash;
  std::string data_hash;
  std::vector<CheckpointParam> params;
  std::vector<Eigen::MatrixXf> values;  // parallel to `params`

  ModelDims model_dims() const;
  AblationFlags ablation_flags() const;
};

/// Snapshot of a trained store (values cast to f32, offsets assigned to
/// tile the blob exactly in registration order).
template <typename S>
void set_checkpoint_values(Checkpoint& ckpt, const ParamStore<S>& store,
                           const std::vector<Mat<S>>& snapshot) {
  if (static_cast<int>(snapshot.size()) != store.count())
    throw ValidationError("checkpoint: snapshot does not match the store");
  ckpt.params.clear();
  ckpt.values.clear();
  uint64_t offset = 0;
  for (int i = 0; i < store.count(); ++i) {
    CheckpointParam p;
    p.name = store.group(i).name;
    p.rows = static_cast<int>(snapshot[static_cast<size_t>(i)].rows());
    p.cols = static_cast<int>(snapshot[static_cast<size_t>(i)].cols());
    p.offset = offset;
    offset += p.bytes();
    ckpt.params.push_back(p);
    ckpt.values.push_back(snapshot[static_cast<size_t>(i)].template cast<float>());
  }
}

/// Loads checkpoint weights into a freshly built store; group names and
/// shapes must match exactly.
template <typename S>
void apply_checkpoint_values(const Checkpoint& ckpt, ParamStore<S>& store) {
  if (static_cast<int>(ckpt.params.size()) != store.count())
    throw ValidationError("checkpoint: group count does not match the model");
  for (int i = 0; i < store.count(); ++i) {
    const CheckpointParam& p = ckpt.params[static_cast<size_t>(i)];
    auto& g = store.group(i);
    if (g.name != p.name || g.value.rows() != p.rows || g.value.cols() != p.cols)
      throw ValidationError("checkpoint: group '" + p.name + "' does not match the model ('" +
                            g.name + "')");
    g.value = ckpt.values[static_cast<size_t>(i)].cast<S>();
  }
}

/// Writes <stem>.json and <stem>.bin.
void save_checkpoint(const Checkpoint& ckpt, const std::string& stem);
Checkpoint load_checkpoint(const std::string& stem);

/// Integrity pass (manifest parses, offsets tile, blob size and checksum
/// match). Returns problem lines; empty means ok.
std::vector<std::string> verify_checkpoint(const std::string& stem);

}  // namespace ecgfwd
