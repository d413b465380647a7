#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "ecgfwd/mesh.hpp"
#include "ecgfwd/training.hpp"

namespace ecgfwd {

/// Normalization fitted on the training split at generation time and
/// carried in the dataset manifest (and later in checkpoints).
struct NormStats {
  Zscore voltage;  // over all training-split frame values (mV)
  Zscore ecg;      // over all training-split trace samples (mV)
};

/// Manifest entry for one sample; the blob holds the voltage frames
/// (row-major T x N, little-endian f32) followed by the trace.
struct SampleMeta {
  std::string id;
  std::string mesh_ref;
  int pacing_node = 0;
  int n_frames = 0;
  int n_nodes = 0;
  int trace_len = 0;
  double frame_dt_ms = 0.0;
  bool duration_truncated = false;
  uint32_t crc32 = 0;  // over the whole blob file
};

struct DatasetManifest {
  std::string config_hash;  // full generating config
  std::string data_hash;    // dataset-defining subset; what consumers check
  uint64_t seed = 0;
  bool split_by_mesh = false;
  double f_train = 0.8;
  double f_val = 0.1;
  NormStats norm;
  std::vector<std::string> mesh_ids;
  std::vector<SampleMeta> samples;

  int find_mesh(const std::string& mesh_ref) const;
};

struct DatasetSample {
  SampleMeta meta;
  Eigen::MatrixXd frames;  // T x N (mV)
  Eigen::VectorXd trace;   // mV, on the frame clock
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SurfaceMesh> meshes;      // parallel to manifest.mesh_ids
  std::vector<DatasetSample> samples;   // parallel to manifest.samples

  /// Which split a sample falls in: hashes the sample id (or the mesh id
  /// under split_by_mesh) with the dataset seed.
  Split split_of(const SampleMeta& meta) const;
};

/// Little-endian f32 blob helpers (shared with the checkpoint format).
void append_f32(std::string& out, float value);
float read_f32(const std::string& bytes, size_t offset, const std::string& origin);
uint32_t blob_crc32(const std::string& bytes);
void write_file_bytes(const std::string& path, const std::string& bytes);
std::string read_file_bytes(const std::string& path);

/// Serializes one sample into its blob (frames row-major, then trace).
std::string sample_to_blob(const DatasetSample& sample);
DatasetSample sample_from_blob(const SampleMeta& meta, const std::string& bytes);

/// On-disk layout under `dir`: dataset.json, meshes/<id>.json,
/// samples/<id>.bin.
void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

/// Integrity pass over an on-disk dataset: manifest consistency, blob
/// checksums and sizes. Returns human-readable problem lines (empty = ok).
std::vector<std::string> verify_dataset(const std::string& dir);

}  // namespace ecgfwd
