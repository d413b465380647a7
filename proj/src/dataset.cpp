#include "ecgfwd/dataset.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "ecgfwd/errors.hpp"

namespace ecgfwd {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

int DatasetManifest::find_mesh(const std::string& mesh_ref) const {
  for (size_t i = 0; i < mesh_ids.size(); ++i)
    if (mesh_ids[i] == mesh_ref) return static_cast<int>(i);
  throw ValidationError("dataset: sample references unknown mesh '" + mesh_ref + "'");
}

Split Dataset::split_of(const SampleMeta& meta) const {
  const std::string& key = manifest.split_by_mesh ? meta.mesh_ref : meta.id;
  return assign_split(key, manifest.seed, manifest.f_train, manifest.f_val);
}

// ---------------------------------------------------------------------------
// Binary helpers

void append_f32(std::string& out, float value) {
  uint32_t bits;
  std::memcpy(&bits, &value, 4);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float read_f32(const std::string& bytes, size_t offset, const std::string& origin) {
  if (offset + 4 > bytes.size()) throw ValidationError(origin + ": blob truncated");
  uint32_t bits = 0;
  for (int i = 3; i >= 0; --i)
    bits = (bits << 8) | static_cast<uint8_t>(bytes[offset + static_cast<size_t>(i)]);
  float value;
  std::memcpy(&value, &bits, 4);
  return value;
}

uint32_t blob_crc32(const std::string& bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()),
                static_cast<uInt>(bytes.size()));
  return static_cast<uint32_t>(crc);
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Sample blobs

std::string sample_to_blob(const DatasetSample& sample) {
  std::string out;
  out.reserve(4 * static_cast<size_t>(sample.frames.size() + sample.trace.size()));
  for (int t = 0; t < sample.frames.rows(); ++t)
    for (int n = 0; n < sample.frames.cols(); ++n)
      append_f32(out, static_cast<float>(sample.frames(t, n)));
  for (int t = 0; t < sample.trace.size(); ++t)
    append_f32(out, static_cast<float>(sample.trace(t)));
  return out;
}

DatasetSample sample_from_blob(const SampleMeta& meta, const std::string& bytes) {
  const size_t expected =
      4 * (static_cast<size_t>(meta.n_frames) * meta.n_nodes + meta.trace_len);
  if (bytes.size() != expected)
    throw ValidationError("sample '" + meta.id + "': blob is " + std::to_string(bytes.size()) +
                          " bytes, manifest expects " + std::to_string(expected));
  DatasetSample s;
  s.meta = meta;
  s.frames.resize(meta.n_frames, meta.n_nodes);
  size_t off = 0;
  for (int t = 0; t < meta.n_frames; ++t)
    for (int n = 0; n < meta.n_nodes; ++n, off += 4)
      s.frames(t, n) = read_f32(bytes, off, meta.id);
  s.trace.resize(meta.trace_len);
  for (int t = 0; t < meta.trace_len; ++t, off += 4) s.trace(t) = read_f32(bytes, off, meta.id);
  return s;
}

// ---------------------------------------------------------------------------
// Manifest JSON

namespace {

ordered_json zscore_json(const Zscore& z) {
  return ordered_json{{"mean", z.mean}, {"std", z.std}};
}

Zscore zscore_from_json(const json& j, const std::string& what) {
  Zscore z;
  try {
    z.mean = j.at("mean").get<double>();
    z.std = j.at("std").get<double>();
  } catch (const json::exception& e) {
    throw ValidationError("dataset manifest: bad " + what + " stats: " + e.what());
  }
  if (!(z.std > 0.0)) throw ValidationError("dataset manifest: " + what + " std must be > 0");
  return z;
}

std::string manifest_to_json(const DatasetManifest& m) {
  ordered_json j;
  j["version"] = 1;
  j["config_hash"] = m.config_hash;
  j["data_hash"] = m.data_hash;
  j["seed"] = m.seed;
  j["split"] = ordered_json{
      {"by_mesh", m.split_by_mesh}, {"f_train", m.f_train}, {"f_val", m.f_val}};
  j["norm"] =
      ordered_json{{"voltage", zscore_json(m.norm.voltage)}, {"ecg", zscore_json(m.norm.ecg)}};
  j["meshes"] = m.mesh_ids;
  auto samples = ordered_json::array();
  for (const SampleMeta& s : m.samples)
    samples.push_back(ordered_json{{"id", s.id},
                                   {"mesh", s.mesh_ref},
                                   {"pacing_node", s.pacing_node},
                                   {"n_frames", s.n_frames},
                                   {"n_nodes", s.n_nodes},
                                   {"trace_len", s.trace_len},
                                   {"frame_dt_ms", s.frame_dt_ms},
                                   {"truncated", s.duration_truncated},
                                   {"crc32", s.crc32}});
  j["samples"] = std::move(samples);
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": malformed JSON: " + e.what());
  }
  DatasetManifest m;
  try {
    m.config_hash = j.at("config_hash").get<std::string>();
    m.data_hash = j.at("data_hash").get<std::string>();
    m.seed = j.at("seed").get<uint64_t>();
    m.split_by_mesh = j.at("split").at("by_mesh").get<bool>();
    m.f_train = j.at("split").at("f_train").get<double>();
    m.f_val = j.at("split").at("f_val").get<double>();
    m.norm.voltage = zscore_from_json(j.at("norm").at("voltage"), "voltage");
    m.norm.ecg = zscore_from_json(j.at("norm").at("ecg"), "ecg");
    m.mesh_ids = j.at("meshes").get<std::vector<std::string>>();
    for (const json& s : j.at("samples")) {
      SampleMeta meta;
      meta.id = s.at("id").get<std::string>();
      meta.mesh_ref = s.at("mesh").get<std::string>();
      meta.pacing_node = s.at("pacing_node").get<int>();
      meta.n_frames = s.at("n_frames").get<int>();
      meta.n_nodes = s.at("n_nodes").get<int>();
      meta.trace_len = s.at("trace_len").get<int>();
      meta.frame_dt_ms = s.at("frame_dt_ms").get<double>();
      meta.duration_truncated = s.at("truncated").get<bool>();
      meta.crc32 = s.at("crc32").get<uint32_t>();
      m.samples.push_back(std::move(meta));
    }
  } catch (const json::exception& e) {
    throw ValidationError(origin + ": malformed dataset manifest: " + e.what());
  }
  for (const SampleMeta& s : m.samples) {
    m.find_mesh(s.mesh_ref);  // throws on dangling reference
    if (s.n_frames < 1 || s.n_nodes < 1 || s.trace_len < 1)
      throw ValidationError(origin + ": sample '" + s.id + "' has empty shape");
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Directory layout

void save_dataset(const Dataset& dataset, const std::string& dir) {
  if (dataset.meshes.size() != dataset.manifest.mesh_ids.size() ||
      dataset.samples.size() != dataset.manifest.samples.size())
    throw ValidationError("save_dataset: manifest out of step with in-memory data");
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "meshes", ec);
  fs::create_directories(fs::path(dir) / "samples", ec);
  if (ec) throw IoError("cannot create dataset directories under " + dir);

  for (size_t i = 0; i < dataset.meshes.size(); ++i)
    save_mesh(dataset.meshes[i],
              (fs::path(dir) / "meshes" / (dataset.manifest.mesh_ids[i] + ".json")).string());

  DatasetManifest manifest = dataset.manifest;  // rewrite checksums from data
  for (size_t i = 0; i < dataset.samples.size(); ++i) {
    const DatasetSample& s = dataset.samples[i];
    const std::string blob = sample_to_blob(s);
    manifest.samples[i].crc32 = blob_crc32(blob);
    write_file_bytes((fs::path(dir) / "samples" / (s.meta.id + ".bin")).string(), blob);
  }
  write_file_bytes((fs::path(dir) / "dataset.json").string(), manifest_to_json(manifest));
}

Dataset load_dataset(const std::string& dir) {
  const std::string manifest_path = (fs::path(dir) / "dataset.json").string();
  Dataset d;
  d.manifest = manifest_from_json(read_file_bytes(manifest_path), manifest_path);
  for (const std::string& id : d.manifest.mesh_ids)
    d.meshes.push_back(load_mesh((fs::path(dir) / "meshes" / (id + ".json")).string()));
  for (SampleMeta& meta : d.manifest.samples) {
    const std::string path = (fs::path(dir) / "samples" / (meta.id + ".bin")).string();
    const std::string bytes = read_file_bytes(path);
    if (blob_crc32(bytes) != meta.crc32)
      throw ValidationError("sample '" + meta.id + "': checksum mismatch (blob corrupted?)");
    d.samples.push_back(sample_from_blob(meta, bytes));
  }
  return d;
}

std::vector<std::string> verify_dataset(const std::string& dir) {
  std::vector<std::string> problems;
  DatasetManifest manifest;
  try {
    const std::string manifest_path = (fs::path(dir) / "dataset.json").string();
    manifest = manifest_from_json(read_file_bytes(manifest_path), manifest_path);
  } catch (const Error& e) {
    problems.push_back(std::string("manifest: ") + e.what());
    return problems;
  }
  for (const std::string& id : manifest.mesh_ids) {
    try {
      load_mesh((fs::path(dir) / "meshes" / (id + ".json")).string());
    } catch (const Error& e) {
      problems.push_back("mesh '" + id + "': " + e.what());
    }
  }
  for (const SampleMeta& meta : manifest.samples) {
    try {
      const std::string path = (fs::path(dir) / "samples" / (meta.id + ".bin")).string();
      const std::string bytes = read_file_bytes(path);
      const size_t expected =
          4 * (static_cast<size_t>(meta.n_frames) * meta.n_nodes + meta.trace_len);
      if (bytes.size() != expected)
        problems.push_back("sample '" + meta.id + "': size " + std::to_string(bytes.size()) +
                           ", expected " + std::to_string(expected));
      else if (blob_crc32(bytes) != meta.crc32)
        problems.push_back("sample '" + meta.id + "': checksum mismatch");
    } catch (const Error& e) {
      problems.push_back("sample '" + meta.id + "': " + e.what());
    }
  }
  return problems;
}

}  // namespace ecgfwd
