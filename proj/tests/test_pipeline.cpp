#include <cstdlib>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "ecgfwd/errors.hpp"
#include "ecgfwd/pipeline.hpp"

using namespace ecgfwd;

namespace {

/// Two meshes, three pacing sites each: big enough to populate every split
/// at seed 7, small enough to train in well under a second.
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.seed = 7;
  cfg.geometry.n_meshes = 2;
  cfg.simulation.sites_per_mesh = 3;
  cfg.model.d_z = 8;
  cfg.model.d_h = 6;
  cfg.model.d_e = 4;
  cfg.model.d_hid = 8;
  cfg.model.d_a = 6;
  cfg.model.d_head = 6;
  cfg.model.K = 12;
  cfg.model.L_f = 2;
  cfg.model.blocks = 1;
  cfg.schedule.epochs = 2;
  cfg.schedule.halve_every = 2;
  cfg.schedule.batch_size = 4;
  cfg.split.f_train = 0.5;
  cfg.split.f_val = 0.25;
  cfg.split.f_test = 0.25;
  return cfg;
}

/// The fixture dataset is expensive enough to share across test cases.
const Dataset& tiny_data() {
  static const Dataset ds = generate_dataset(tiny_config());
  return ds;
}

std::string temp_dir(const char* name) {
  const std::string dir = std::string("/tmp/ecgfwd_test_") + name;
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("generate_dataset: ids, clock alignment, and split-fitted norm") {
  const ExperimentConfig cfg = tiny_config();
  const Dataset& ds = tiny_data();

  REQUIRE(ds.samples.size() == 6);
  REQUIRE(ds.meshes.size() == 2);
  CHECK(ds.manifest.mesh_ids == std::vector<std::string>{"mesh00", "mesh01"});
  CHECK(ds.manifest.config_hash == config_hash(cfg));
  CHECK(ds.manifest.data_hash == data_hash(cfg));
  CHECK(ds.manifest.seed == cfg.seed);

  const int frames = 57;  // floor(420 / 7.5) + 1
  std::set<int> sites_mesh0;
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    const SampleMeta& m = ds.samples[i].meta;
    const int mesh = static_cast<int>(i) / 3, site = static_cast<int>(i) % 3;
    CHECK(m.id == "mesh0" + std::to_string(mesh) + "_site0" + std::to_string(site));
    CHECK(m.mesh_ref == ds.manifest.mesh_ids[static_cast<size_t>(mesh)]);
    // The oracle trace rides on the frame clock: one sample per frame.
    CHECK(m.n_frames == frames);
    CHECK(m.trace_len == frames);
    CHECK(m.n_nodes == ds.meshes[static_cast<size_t>(mesh)].n_vertices());
    CHECK(m.frame_dt_ms == cfg.simulation.frame_dt_ms);
    CHECK(m.pacing_node >= 0);
    CHECK(m.pacing_node < m.n_nodes);
    if (mesh == 0) sites_mesh0.insert(m.pacing_node);
    CHECK(ds.samples[i].trace.array().isFinite().all());
  }
  CHECK(sites_mesh0.size() == 3);  // pacing sites are distinct per mesh

  CHECK(ds.manifest.norm.voltage.std > 0.0);
  CHECK(ds.manifest.norm.ecg.std > 0.0);
  // Resting tissue sits near v_rest, so the voltage mean must be deep negative.
  CHECK(ds.manifest.norm.voltage.mean < -20.0);
}

TEST_CASE("generate_dataset is deterministic") {
  const Dataset& a = tiny_data();
  const Dataset b = generate_dataset(tiny_config());
  REQUIRE(a.samples.size() == b.samples.size());
  for (size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(sample_to_blob(a.samples[i]) == sample_to_blob(b.samples[i]));
    CHECK(a.samples[i].meta.pacing_node == b.samples[i].meta.pacing_node);
  }
  for (size_t m = 0; m < a.meshes.size(); ++m) {
    CHECK(a.meshes[m].vertices == b.meshes[m].vertices);
    CHECK(a.meshes[m].faces == b.meshes[m].faces);
  }
}

TEST_CASE("generate_dataset rejects unsatisfiable site counts") {
  ExperimentConfig cfg = tiny_config();
  cfg.simulation.sites_per_mesh = 100000;
  CHECK_THROWS_AS(generate_dataset(cfg), ValidationError);
}

TEST_CASE("run_training: log schedule, best-epoch checkpoint, hash gate") {
  const ExperimentConfig cfg = tiny_config();
  const TrainArtifacts art = run_training(cfg, tiny_data(), /*f64=*/true);

  CHECK(!art.aborted);
  REQUIRE(art.log.size() == 2);
  CHECK(art.log[0].epoch == 0);
  CHECK(art.log[0].lr == 0.001);
  CHECK(art.log[0].omega == 0.1);
  CHECK(art.log[1].omega == 0.05);

  // The checkpoint carries the best validation epoch seen in the log.
  double best = -1e300;
  int best_epoch = -1;
  for (const EpochLog& e : art.log)
    if (e.val_r2 > best) {
      best = e.val_r2;
      best_epoch = e.epoch;
    }
  CHECK(art.checkpoint.val_r2 == best);
  CHECK(art.checkpoint.epoch == best_epoch);
  CHECK(art.checkpoint.data_hash == tiny_data().manifest.data_hash);
  CHECK(art.checkpoint.seed == cfg.seed);
  CHECK(!art.checkpoint.params.empty());

  // A config describing different data is refused up front.
  ExperimentConfig other = cfg;
  other.seed = 8;
  other.schedule.seed = 8;
  CHECK_THROWS_WITH_AS(run_training(other, tiny_data(), true),
                       doctest::Contains("hash mismatch"), ValidationError);
  // Model-only changes keep the same data hash and are accepted.
  other = cfg;
  other.model.d_z = 6;
  CHECK_NOTHROW(run_training(other, tiny_data(), true));
}

TEST_CASE("run_eval computes denormalized per-trace metrics") {
  const TrainArtifacts art = run_training(tiny_config(), tiny_data(), true);
  const EvalReport report = run_eval(art.checkpoint, tiny_data(), Split::test, true);

  REQUIRE(!report.rows.empty());
  CHECK(report.r2.n_used + report.r2.n_excluded == static_cast<int>(report.rows.size()));
  for (const EvalRow& row : report.rows) {
    CHECK(row.mae_mv >= 0.0);
    if (!row.constant_truth) CHECK(row.r2 <= 1.0);
  }

  // Rows agree with metrics recomputed from the raw predictions.
  const SplitPredictions preds = predict_split(art.checkpoint, tiny_data(), Split::test, true);
  REQUIRE(preds.ids.size() == report.rows.size());
  for (size_t i = 0; i < preds.ids.size(); ++i) {
    CHECK(report.rows[i].id == preds.ids[i]);
    CHECK(report.rows[i].mae_mv == mae_metric(preds.pred_mv[i], preds.truth_mv[i]));
    if (!report.rows[i].constant_truth)
      CHECK(report.rows[i].r2 == r2_metric(preds.pred_mv[i], preds.truth_mv[i]));
  }

  // Checkpoint/dataset compatibility is gated on the data hash.
  Checkpoint stale = art.checkpoint;
  stale.data_hash = "0000000000000000";
  CHECK_THROWS_WITH_AS(run_eval(stale, tiny_data(), Split::test, true),
                       doctest::Contains("hash mismatch"), ValidationError);
}

TEST_CASE("checkpoint disk round-trip preserves predictions bitwise") {
  const TrainArtifacts art = run_training(tiny_config(), tiny_data(), false);
  const std::string dir = temp_dir("pipeline_ckpt");
  std::filesystem::create_directories(dir);
  save_checkpoint(art.checkpoint, dir + "/model");
  const Checkpoint back = load_checkpoint(dir + "/model");

  const SplitPredictions a = predict_split(art.checkpoint, tiny_data(), Split::val, false);
  const SplitPredictions b = predict_split(back, tiny_data(), Split::val, false);
  REQUIRE(a.ids.size() == b.ids.size());
  for (size_t i = 0; i < a.ids.size(); ++i) CHECK(a.pred_mv[i] == b.pred_mv[i]);
  std::filesystem::remove_all(dir);
}

TEST_CASE("retraining with the same config is bitwise reproducible") {
  const TrainArtifacts a = run_training(tiny_config(), tiny_data(), false);
  const TrainArtifacts b = run_training(tiny_config(), tiny_data(), false);
  REQUIRE(a.checkpoint.values.size() == b.checkpoint.values.size());
  for (size_t i = 0; i < a.checkpoint.values.size(); ++i)
    CHECK(a.checkpoint.values[i] == b.checkpoint.values[i]);
  CHECK(train_log_csv(a.log) == train_log_csv(b.log));

  // Flipping one ablation switch actually changes the trained weights.
  ExperimentConfig ablated = tiny_config();
  ablated.ablation.disable_attention = true;
  const TrainArtifacts c = run_training(ablated, tiny_data(), false);
  CHECK(train_log_csv(a.log) != train_log_csv(c.log));
}

TEST_CASE("report and plot text formats") {
  SUBCASE("training log CSV") {
    EpochLog e;
    e.epoch = 3;
    e.huber = 0.5;
    e.spec_entropy = 0.25;
    e.omega = 0.1;
    e.lr = 0.001;
    e.val_r2 = -0.125;
    // Full 17-digit doubles so reruns can be compared byte-for-byte.
    CHECK(train_log_csv({e}) ==
          "epoch,huber,spec_entropy,omega,lr,val_r2\n"
          "3,0.5,0.25,0.10000000000000001,0.001,-0.125\n");
  }
  SUBCASE("trace CSV") {
    Eigen::VectorXd truth(3), pred(3);
    truth << 0.0, 0.5, -1.0;
    pred << 0.25, 0.5, 2.0;
    CHECK(trace_csv(truth, pred, 7.5) ==
          "t_ms,true_mV,pred_mV\n0,0,0.25\n7.5,0.5,0.5\n15,-1,2\n");
    CHECK_THROWS_AS(trace_csv(truth, pred.head(2), 7.5), ValidationError);
  }
  SUBCASE("trace SVG") {
    Eigen::VectorXd truth(4), pred(4);
    truth << 0.0, 1.0, -1.0, 0.5;
    pred << 0.1, 0.9, -0.8, 0.4;
    const std::string svg = trace_svg(truth, pred, 7.5, "sample_x");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("time (ms)") != std::string::npos);
    CHECK(svg.find("Lead II (mV)") != std::string::npos);
    CHECK(svg.find("sample_x") != std::string::npos);
    // One polyline per trace, truth black and prediction red.
    size_t count = 0, pos = 0;
    while ((pos = svg.find("<polyline", pos)) != std::string::npos) {
      ++count;
      ++pos;
    }
    CHECK(count == 2);
    CHECK(svg.find("stroke=\"black\"") != std::string::npos);
    CHECK(svg.find("stroke=\"#d62728\"") != std::string::npos);
    // Deterministic output.
    CHECK(trace_svg(truth, pred, 7.5, "sample_x") == svg);
    // A flat pair of traces still renders (degenerate y-range is padded).
    CHECK_NOTHROW(trace_svg(Eigen::VectorXd::Zero(4), Eigen::VectorXd::Zero(4), 1.0, "flat"));
  }
}

// ---------------------------------------------------------------------------
// CLI binary smoke tests (exit codes and artifact presence).

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ECGFWD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("CLI: full pipeline, determinism, and exit codes") {
  const std::string dir = temp_dir("cli");
  std::filesystem::create_directories(dir);
  const std::string config = dir + "/config.json";
  write_file_bytes(config, config_to_json(tiny_config()));

  // gen-data twice: success and byte-identical artifacts.
  REQUIRE(run_cli("gen-data --config " + config + " --out " + dir + "/data") == 0);
  REQUIRE(run_cli("gen-data --config " + config + " --out " + dir + "/data2") == 0);
  CHECK(read_file_bytes(dir + "/data/dataset.json") ==
        read_file_bytes(dir + "/data2/dataset.json"));
  CHECK(read_file_bytes(dir + "/data/samples/mesh00_site00.bin") ==
        read_file_bytes(dir + "/data2/samples/mesh00_site00.bin"));

  // train: checkpoint + log appear; rerun is byte-identical.
  REQUIRE(run_cli("train --config " + config + " --data " + dir + "/data --out " + dir +
                  "/run") == 0);
  REQUIRE(run_cli("train --config " + config + " --data " + dir + "/data --out " + dir +
                  "/run2") == 0);
  CHECK(read_file_bytes(dir + "/run/checkpoint.bin") ==
        read_file_bytes(dir + "/run2/checkpoint.bin"));
  CHECK(read_file_bytes(dir + "/run/train_log.csv") ==
        read_file_bytes(dir + "/run2/train_log.csv"));

  // A --seed override describes different data: refused with exit 1.
  CHECK(run_cli("train --config " + config + " --seed 8 --data " + dir + "/data --out " + dir +
                "/run3") == 1);

  // eval and plot produce their artifacts.
  CHECK(run_cli("eval --ckpt " + dir + "/run/checkpoint --data " + dir +
                "/data --split test --out " + dir + "/eval") == 0);
  CHECK(read_file_bytes(dir + "/eval/metrics.csv").rfind("sample_id,split,r2,mae_mv\n", 0) == 0);
  CHECK(std::filesystem::exists(dir + "/eval/summary.json"));
  CHECK(run_cli("plot --ckpt " + dir + "/run/checkpoint --data " + dir +
                "/data --split test --out " + dir + "/plots") == 0);
  bool found_svg = false, found_csv = false;
  for (const auto& entry : std::filesystem::directory_iterator(dir + "/plots")) {
    found_svg = found_svg || entry.path().extension() == ".svg";
    found_csv = found_csv || entry.path().extension() == ".csv";
  }
  CHECK(found_svg);
  CHECK(found_csv);

  // verify: clean data passes, a flipped byte fails with exit 1.
  CHECK(run_cli("verify --data " + dir + "/data --ckpt " + dir + "/run/checkpoint") == 0);
  std::string blob = read_file_bytes(dir + "/data2/samples/mesh00_site01.bin");
  blob[33] = static_cast<char>(static_cast<unsigned char>(blob[33]) ^ 0xff);
  write_file_bytes(dir + "/data2/samples/mesh00_site01.bin", blob);
  CHECK(run_cli("verify --data " + dir + "/data2") == 1);
  CHECK(run_cli("verify") == 1);

  // Exit code 2 for I/O failures, 1 for config validation failures.
  CHECK(run_cli("train --config " + config + " --data " + dir + "/missing --out " + dir +
                "/run4") == 2);
  CHECK(run_cli("gen-data --config " + dir + "/no_such.json --out " + dir + "/x") == 2);
  write_file_bytes(dir + "/bad.json", "{\"seed\": [}\n");
  CHECK(run_cli("gen-data --config " + dir + "/bad.json --out " + dir + "/x") == 1);

  std::filesystem::remove_all(dir);
}
