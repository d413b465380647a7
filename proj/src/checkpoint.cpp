#include "ecgfwd/checkpoint.hpp"

#include <json.hpp>

#include "ecgfwd/errors.hpp"

namespace ecgfwd {

using nlohmann::json;
using nlohmann::ordered_json;

ModelDims Checkpoint::model_dims() const {
  ModelDims dims;
  dims.enc = EncoderDims{model.d_h, model.d_z, model.L_f, model.blocks};
  dims.dec.d_z = model.d_z;
  dims.dec.d_e = model.d_e;
  dims.dec.d_a = model.d_a;
  dims.dec.d_hid = model.d_hid;
  dims.dec.d_head = model.d_head;
  return dims;
}

AblationFlags Checkpoint::ablation_flags() const {
  AblationFlags flags;
  flags.streams.local = !ablation.disable_local;
  flags.streams.spectral = !ablation.disable_spec;
  flags.streams.voltage = !ablation.disable_voltage;
  flags.streams.stats = !ablation.disable_stats;
  flags.attention = !ablation.disable_attention;
  return flags;
}

namespace {

std::string blob_of(const Checkpoint& ckpt) {
  std::string blob;
  for (size_t i = 0; i < ckpt.params.size(); ++i) {
    const Eigen::MatrixXf& v = ckpt.values[i];
    for (int r = 0; r < v.rows(); ++r)
      for (int c = 0; c < v.cols(); ++c) append_f32(blob, v(r, c));
  }
  return blob;
}

void check_tiling(const std::vector<CheckpointParam>& params, uint64_t blob_size,
                  const std::string& origin) {
  uint64_t offset = 0;
  for (const CheckpointParam& p : params) {
    if (p.rows < 1 || p.cols < 1)
      throw ValidationError(origin + ": group '" + p.name + "' has empty shape");
    if (p.offset != offset)
      throw ValidationError(origin + ": group '" + p.name + "' at offset " +
                            std::to_string(p.offset) + ", expected " + std::to_string(offset) +
                            " (offsets must tile the blob)");
    offset += p.bytes();
  }
  if (offset != blob_size)
    throw ValidationError(origin + ": blob is " + std::to_string(blob_size) +
                          " bytes, manifest tiles " + std::to_string(offset));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& stem) {
  if (ckpt.params.size() != ckpt.values.size())
    throw ValidationError("checkpoint: manifest out of step with values");
  const std::string blob = blob_of(ckpt);
  check_tiling(ckpt.params, blob.size(), "checkpoint");

  ordered_json j;
  j["version"] = 1;
  j["model"] = ordered_json{{"d_z", ckpt.model.d_z},       {"d_h", ckpt.model.d_h},
                            {"d_e", ckpt.model.d_e},       {"d_hid", ckpt.model.d_hid},
                            {"d_a", ckpt.model.d_a},       {"d_head", ckpt.model.d_head},
                            {"K", ckpt.model.K},           {"L_f", ckpt.model.L_f},
                            {"blocks", ckpt.model.blocks}, {"s_init", ckpt.model.s_init},
                            {"b_init", ckpt.model.b_init}};
  j["ablation"] = ordered_json{{"disable_local", ckpt.ablation.disable_local},
                               {"disable_spec", ckpt.ablation.disable_spec},
                               {"disable_voltage", ckpt.ablation.disable_voltage},
                               {"disable_stats", ckpt.ablation.disable_stats},
                               {"disable_attention", ckpt.ablation.disable_attention}};
  j["norm"] = ordered_json{
      {"voltage", ordered_json{{"mean", ckpt.norm.voltage.mean}, {"std", ckpt.norm.voltage.std}}},
      {"ecg", ordered_json{{"mean", ckpt.norm.ecg.mean}, {"std", ckpt.norm.ecg.std}}}};
  j["seed"] = ckpt.seed;
  j["epoch"] = ckpt.epoch;
  j["val_r2"] = ckpt.val_r2;
  j["config_hash"] = ckpt.config_hash;
  j["data_hash"] = ckpt.data_hash;
  auto params = ordered_json::array();
  for (const CheckpointParam& p : ckpt.params)
    params.push_back(
        ordered_json{{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}, {"offset", p.offset}});
  j["params"] = std::move(params);
  j["blob_bytes"] = blob.size();
  j["blob_crc32"] = blob_crc32(blob);

  write_file_bytes(stem + ".json", j.dump(2) + "\n");
  write_file_bytes(stem + ".bin", blob);
}

Checkpoint load_checkpoint(const std::string& stem) {
  const std::string manifest_path = stem + ".json";
  json j;
  try {
    j = json::parse(read_file_bytes(manifest_path));
  } catch (const json::exception& e) {
    throw ValidationError(manifest_path + ": malformed JSON: " + e.what());
  }

  Checkpoint ckpt;
  uint64_t blob_bytes = 0;
  uint32_t crc = 0;
  try {
    const json& m = j.at("model");
    ckpt.model.d_z = m.at("d_z").get<int>();
    ckpt.model.d_h = m.at("d_h").get<int>();
    ckpt.model.d_e = m.at("d_e").get<int>();
    ckpt.model.d_hid = m.at("d_hid").get<int>();
    ckpt.model.d_a = m.at("d_a").get<int>();
    ckpt.model.d_head = m.at("d_head").get<int>();
    ckpt.model.K = m.at("K").get<int>();
    ckpt.model.L_f = m.at("L_f").get<int>();
    ckpt.model.blocks = m.at("blocks").get<int>();
    ckpt.model.s_init = m.at("s_init").get<double>();
    ckpt.model.b_init = m.at("b_init").get<double>();
    const json& a = j.at("ablation");
    ckpt.ablation.disable_local = a.at("disable_local").get<bool>();
    ckpt.ablation.disable_spec = a.at("disable_spec").get<bool>();
    ckpt.ablation.disable_voltage = a.at("disable_voltage").get<bool>();
    ckpt.ablation.disable_stats = a.at("disable_stats").get<bool>();
    ckpt.ablation.disable_attention = a.at("disable_attention").get<bool>();
    ckpt.norm.voltage.mean = j.at("norm").at("voltage").at("mean").get<double>();
    ckpt.norm.voltage.std = j.at("norm").at("voltage").at("std").get<double>();
    ckpt.norm.ecg.mean = j.at("norm").at("ecg").at("mean").get<double>();
    ckpt.norm.ecg.std = j.at("norm").at("ecg").at("std").get<double>();
    ckpt.seed = j.at("seed").get<uint64_t>();
    ckpt.epoch = j.at("epoch").get<int>();
    ckpt.val_r2 = j.at("val_r2").get<double>();
    ckpt.config_hash = j.at("config_hash").get<std::string>();
    ckpt.data_hash = j.at("data_hash").get<std::string>();
    for (const json& p : j.at("params")) {
      CheckpointParam param;
      param.name = p.at("name").get<std::string>();
      param.rows = p.at("rows").get<int>();
      param.cols = p.at("cols").get<int>();
      param.offset = p.at("offset").get<uint64_t>();
      ckpt.params.push_back(std::move(param));
    }
    blob_bytes = j.at("blob_bytes").get<uint64_t>();
    crc = j.at("blob_crc32").get<uint32_t>();
  } catch (const json::exception& e) {
    throw ValidationError(manifest_path + ": malformed checkpoint manifest: " + e.what());
  }

  const std::string blob = read_file_bytes(stem + ".bin");
  if (blob.size() != blob_bytes)
    throw ValidationError(stem + ".bin: size " + std::to_string(blob.size()) +
                          ", manifest says " + std::to_string(blob_bytes));
  if (blob_crc32(blob) != crc)
    throw ValidationError(stem + ".bin: checksum mismatch (blob corrupted?)");
  check_tiling(ckpt.params, blob.size(), manifest_path);

  for (const CheckpointParam& p : ckpt.params) {
    Eigen::MatrixXf v(p.rows, p.cols);
    size_t off = p.offset;
    for (int r = 0; r < p.rows; ++r)
      for (int c = 0; c < p.cols; ++c, off += 4) v(r, c) = read_f32(blob, off, p.name);
    ckpt.values.push_back(std::move(v));
  }
  return ckpt;
}

std::vector<std::string> verify_checkpoint(const std::string& stem) {
  std::vector<std::string> problems;
  try {
    load_checkpoint(stem);
  } catch (const Error& e) {
    problems.push_back(e.what());
  }
  return problems;
}

}  // namespace ecgfwd
