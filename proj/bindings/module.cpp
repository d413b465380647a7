// Python bindings for the ecgfwd core: mesh synthesis, geometric operators,
// activation + ECG oracle, and the dataset/train/eval pipeline. Heavy calls
// release the GIL; Eigen matrices cross the boundary as numpy arrays.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ecgfwd/activation.hpp"
#include "ecgfwd/checkpoint.hpp"
#include "ecgfwd/config.hpp"
#include "ecgfwd/dataset.hpp"
#include "ecgfwd/errors.hpp"
#include "ecgfwd/mesh.hpp"
#include "ecgfwd/operators.hpp"
#include "ecgfwd/oracle.hpp"
#include "ecgfwd/pipeline.hpp"
#include "ecgfwd/synth.hpp"
#include "ecgfwd/uac.hpp"

namespace py = pybind11;
using namespace ecgfwd;

namespace {

std::string mesh_repr(const SurfaceMesh& mesh) {
  return "<SurfaceMesh " + std::to_string(mesh.n_vertices()) + " vertices, " +
         std::to_string(mesh.n_faces()) + " faces" + (mesh.has_uac() ? ", uac" : "") +
         (mesh.has_fibres() ? ", fibres" : "") + ">";
}

std::string dataset_repr(const Dataset& ds) {
  return "<Dataset " + std::to_string(ds.samples.size()) + " samples on " +
         std::to_string(ds.meshes.size()) + " meshes, data_hash=" + ds.manifest.data_hash + ">";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Forward ECG surrogate core: synthetic atrial meshes, a biophysical "
            "Lead II oracle, and the neural surrogate training pipeline.";

  // Derived exceptions are registered after the base so they translate first.
  auto err = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", err.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", err.ptr());

  // ----------------------------------------------------------------- meshes
  py::class_<Landmarks>(m, "Landmarks", "Boundary vertex sets anchoring the two "
                                        "harmonic surface coordinates.")
      .def(py::init<>())
      .def_readwrite("alpha0", &Landmarks::alpha0)
      .def_readwrite("alpha1", &Landmarks::alpha1)
      .def_readwrite("beta0", &Landmarks::beta0)
      .def_readwrite("beta1", &Landmarks::beta1)
      .def("all_present", &Landmarks::all_present);

  py::class_<SurfaceMesh>(m, "SurfaceMesh", "Triangulated atrial surface (mm).")
      .def(py::init<>())
      .def_readwrite("vertices", &SurfaceMesh::vertices, "N x 3 positions (mm)")
      .def_readwrite("faces", &SurfaceMesh::faces, "F x 3 vertex indices")
      .def_readwrite("fibres", &SurfaceMesh::fibres, "F x 3 unit fibre axes; may be empty")
      .def_readwrite("uac", &SurfaceMesh::uac, "N x 2 surface coordinates in [0,1]^2")
      .def_readwrite("landmarks", &SurfaceMesh::landmarks)
      .def_property_readonly("n_vertices", &SurfaceMesh::n_vertices)
      .def_property_readonly("n_faces", &SurfaceMesh::n_faces)
      .def("has_fibres", &SurfaceMesh::has_fibres)
      .def("has_uac", &SurfaceMesh::has_uac)
      .def("__repr__", &mesh_repr);

  py::class_<AtriumParams>(m, "AtriumParams", "Synthetic atrial shell shape controls.")
      .def(py::init<>())
      .def_readwrite("res_u", &AtriumParams::res_u)
      .def_readwrite("res_v", &AtriumParams::res_v)
      .def_readwrite("radius_mm", &AtriumParams::radius_mm)
      .def_readwrite("aspect_x", &AtriumParams::aspect_x)
      .def_readwrite("aspect_y", &AtriumParams::aspect_y)
      .def_readwrite("aspect_z", &AtriumParams::aspect_z)
      .def_readwrite("holes", &AtriumParams::holes)
      .def_readwrite("bump_amplitude", &AtriumParams::bump_amplitude)
      .def_readwrite("bump_modes", &AtriumParams::bump_modes);

  m.def("gen_synthetic_atrium", &gen_synthetic_atrium, py::arg("params"), py::arg("seed"),
        py::call_guard<py::gil_scoped_release>(),
        "Deterministic synthetic atrial shell with landmarks, uac, and fibres.");
  m.def("make_icosphere", &make_icosphere, py::arg("subdivisions"), py::arg("radius") = 1.0);
  m.def("make_sheet", &make_sheet, py::arg("res_u"), py::arg("res_v"), py::arg("width") = 1.0,
        py::arg("height") = 1.0, "Flat rectangular test sheet in the z=0 plane.");
  m.def("subdivide", &subdivide, py::arg("mesh"), "One round of 4-to-1 triangle subdivision.");
  m.def("validate_mesh", &validate_mesh, py::arg("mesh"), py::arg("require_landmarks") = true);
  m.def("load_mesh", &load_mesh, py::arg("path"));
  m.def("save_mesh", &save_mesh, py::arg("mesh"), py::arg("path"));
  m.def("mesh_to_json", &mesh_to_json, py::arg("mesh"));
  m.def("mesh_from_json", &mesh_from_json, py::arg("text"), py::arg("origin") = "<string>");
  m.def("total_area", &total_area, py::arg("mesh"), "Surface area (mm^2).");
  m.def(
      "compute_uac",
      [](SurfaceMesh& mesh) { return Eigen::MatrixX2d(compute_uac(mesh)); }, py::arg("mesh"),
      py::call_guard<py::gil_scoped_release>(),
      "Solves the two harmonic coordinates in place and returns them (N x 2).");

  // -------------------------------------------------------------- operators
  py::class_<GeometricOperators>(m, "GeometricOperators",
                                 "Discrete operators and Laplace-Beltrami eigenpairs.")
      .def_readonly("laplacian", &GeometricOperators::laplacian, "N x N cotangent stiffness")
      .def_readonly("mass", &GeometricOperators::mass, "lumped vertex masses (mm^2)")
      .def_readonly("grad", &GeometricOperators::grad, "3F x N piecewise-linear gradient")
      .def_readonly("face_area", &GeometricOperators::face_area)
      .def_readonly("face_centroid", &GeometricOperators::face_centroid)
      .def_readonly("eigenvalues", &GeometricOperators::eigenvalues, "K ascending (1/mm^2)")
      .def_readonly("eigenfunctions", &GeometricOperators::eigenfunctions,
                    "N x K, M-orthonormal columns")
      .def_readonly("K", &GeometricOperators::K)
      .def_property_readonly("n_vertices", &GeometricOperators::n_vertices)
      .def_property_readonly("n_faces", &GeometricOperators::n_faces);

  m.def("build_operators", &build_operators, py::arg("mesh"), py::arg("K"),
        py::call_guard<py::gil_scoped_release>(),
        "Assembles laplacian, mass, gradient, and the first K eigenpairs.");
  m.def("cotan_laplacian", &cotan_laplacian, py::arg("mesh"),
        py::call_guard<py::gil_scoped_release>());
  m.def("lumped_mass", &lumped_mass, py::arg("mesh"));

  // ------------------------------------------------------------- activation
  py::class_<ApParams>(m, "ApParams", "Action-potential template shape.")
      .def(py::init<>())
      .def_readwrite("v_rest", &ApParams::v_rest)
      .def_readwrite("v_peak", &ApParams::v_peak)
      .def_readwrite("upstroke_ms", &ApParams::upstroke_ms)
      .def_readwrite("apd_ms", &ApParams::apd_ms);

  py::class_<ActivationField>(m, "ActivationField", "Per-node wavefront arrival times (ms).")
      .def_readonly("times", &ActivationField::times)
      .def_readonly("pacing_node", &ActivationField::pacing_node)
      .def_readonly("cv_long", &ActivationField::cv_long)
      .def_readonly("aniso", &ActivationField::aniso);

  py::class_<VoltageSequence>(m, "VoltageSequence",
                              "Per-node transmembrane voltage frames on a uniform clock.")
      .def_readonly("frames", &VoltageSequence::frames, "T x N (mV)")
      .def_readonly("frame_dt", &VoltageSequence::frame_dt, "ms")
      .def_readonly("t0", &VoltageSequence::t0)
      .def_readonly("duration_truncated", &VoltageSequence::duration_truncated)
      .def_property_readonly("n_frames", &VoltageSequence::n_frames)
      .def_property_readonly("n_nodes", &VoltageSequence::n_nodes);

  m.def("activation_times", &activation_times, py::arg("mesh"), py::arg("pacing_node"),
        py::arg("cv_long"), py::arg("aniso"), py::call_guard<py::gil_scoped_release>(),
        "Anisotropic shortest-path arrival times from a pacing node.");
  m.def("ap_template", &ap_template, py::arg("t_rel"), py::arg("params"),
        "Template voltage t_rel ms after local activation.");
  m.def("gen_voltage_sequence", &gen_voltage_sequence, py::arg("mesh"), py::arg("activation"),
        py::arg("params"), py::arg("frame_dt"), py::arg("duration"),
        py::call_guard<py::gil_scoped_release>());

  // ----------------------------------------------------------------- oracle
  py::class_<OracleConfig>(m, "OracleConfig", "Physics and signal chain for the ECG oracle.")
      .def(py::init<>())
      .def_readwrite("sigma_b", &OracleConfig::sigma_b)
      .def_readwrite("thickness", &OracleConfig::thickness)
      .def_readwrite("sigma_l", &OracleConfig::sigma_l)
      .def_readwrite("sigma_t", &OracleConfig::sigma_t)
      .def_readwrite("electrode_ra", &OracleConfig::electrode_ra)
      .def_readwrite("electrode_ll", &OracleConfig::electrode_ll)
      .def_readwrite("fs", &OracleConfig::fs)
      .def_readwrite("f_lo", &OracleConfig::f_lo)
      .def_readwrite("f_hi", &OracleConfig::f_hi);

  py::class_<EcgTrace>(m, "EcgTrace", "A sampled ECG lead (mV).")
      .def_readonly("samples", &EcgTrace::samples)
      .def_readonly("fs", &EcgTrace::fs)
      .def_readonly("filtered", &EcgTrace::filtered)
      .def_property_readonly("size", &EcgTrace::size);

  m.def("default_oracle_config", &default_oracle_config, py::arg("mesh"),
        "Oracle config with electrodes on a torso-scale offset from the mesh centroid.");
  m.def("ecg_potential", &ecg_potential, py::arg("mesh"), py::arg("ops"), py::arg("voltage"),
        py::arg("config"), py::arg("point"), py::call_guard<py::gil_scoped_release>(),
        "Extracellular potential of one voltage frame at a field point (mV).");
  m.def("forward_ecg", &forward_ecg, py::arg("mesh"), py::arg("ops"), py::arg("sequence"),
        py::arg("config"), py::call_guard<py::gil_scoped_release>(),
        "Lead II for a voltage sequence: potentials, resampling, band-pass.");

  // ----------------------------------------------------------------- config
  py::class_<ExperimentConfig>(m, "ExperimentConfig",
                               "Seed + geometry/simulation/oracle/model/schedule/split/ablation "
                               "settings. Edit via JSON round-trips.")
      .def(py::init<>())
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def("validate", &ExperimentConfig::validate)
      .def("frame_rate_hz", &ExperimentConfig::frame_rate_hz)
      .def("to_json", &config_to_json)
      .def("config_hash", &config_hash, "Hash of every field.")
      .def("data_hash", &data_hash, "Hash of the dataset-defining subset of fields.")
      .def("__repr__", [](const ExperimentConfig& cfg) {
        return "<ExperimentConfig seed=" + std::to_string(cfg.seed) + " data_hash=" +
               data_hash(cfg) + ">";
      });

  m.def("default_config", [] { return ExperimentConfig{}; });
  m.def("config_from_json", &config_from_json, py::arg("text"), py::arg("origin") = "<string>",
        "Parses a config; omitted keys keep defaults, unknown keys are rejected.");
  m.def("load_config", &load_config, py::arg("path"));

  // ---------------------------------------------------------------- dataset
  py::enum_<Split>(m, "Split")
      .value("train", Split::train)
      .value("val", Split::val)
      .value("test", Split::test);

  m.def("parse_split", &parse_split, py::arg("name"));

  py::class_<SampleMeta>(m, "SampleMeta")
      .def_readonly("id", &SampleMeta::id)
      .def_readonly("mesh_ref", &SampleMeta::mesh_ref)
      .def_readonly("pacing_node", &SampleMeta::pacing_node)
      .def_readonly("n_frames", &SampleMeta::n_frames)
      .def_readonly("n_nodes", &SampleMeta::n_nodes)
      .def_readonly("trace_len", &SampleMeta::trace_len)
      .def_readonly("frame_dt_ms", &SampleMeta::frame_dt_ms)
      .def_readonly("duration_truncated", &SampleMeta::duration_truncated);

  py::class_<DatasetSample>(m, "DatasetSample")
      .def_readonly("meta", &DatasetSample::meta)
      .def_readonly("frames", &DatasetSample::frames, "T x N voltages (mV)")
      .def_readonly("trace", &DatasetSample::trace, "Lead II on the frame clock (mV)");

  py::class_<DatasetManifest>(m, "DatasetManifest")
      .def_readonly("config_hash", &DatasetManifest::config_hash)
      .def_readonly("data_hash", &DatasetManifest::data_hash)
      .def_readonly("seed", &DatasetManifest::seed)
      .def_readonly("split_by_mesh", &DatasetManifest::split_by_mesh)
      .def_readonly("f_train", &DatasetManifest::f_train)
      .def_readonly("f_val", &DatasetManifest::f_val)
      .def_readonly("mesh_ids", &DatasetManifest::mesh_ids)
      .def_readonly("samples", &DatasetManifest::samples);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("manifest", &Dataset::manifest)
      .def_readonly("meshes", &Dataset::meshes)
      .def_readonly("samples", &Dataset::samples)
      .def("split_of", &Dataset::split_of, py::arg("meta"))
      .def("__len__", [](const Dataset& ds) { return ds.samples.size(); })
      .def("__repr__", &dataset_repr);

  m.def(
      "generate_dataset",
      [](const ExperimentConfig& cfg) {
        std::vector<std::string> failures;
        Dataset ds = generate_dataset(cfg, &failures);
        return std::make_pair(std::move(ds), std::move(failures));
      },
      py::arg("config"), py::call_guard<py::gil_scoped_release>(),
      "Full synthetic dataset for a config. Returns (dataset, per-sample failure "
      "messages); more than 10% failures raises ValidationError.");
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("dir"),
        py::call_guard<py::gil_scoped_release>());
  m.def("load_dataset", &load_dataset, py::arg("dir"), py::call_guard<py::gil_scoped_release>());
  m.def("verify_dataset", &verify_dataset, py::arg("dir"),
        py::call_guard<py::gil_scoped_release>(),
        "Integrity problems found in an on-disk dataset (empty list = ok).");

  // --------------------------------------------------------------- training
  py::class_<EpochLog>(m, "EpochLog")
      .def_readonly("epoch", &EpochLog::epoch)
      .def_readonly("huber", &EpochLog::huber)
      .def_readonly("spec_entropy", &EpochLog::spec_entropy)
      .def_readonly("omega", &EpochLog::omega)
      .def_readonly("lr", &EpochLog::lr)
      .def_readonly("val_r2", &EpochLog::val_r2);

  py::class_<Checkpoint>(m, "Checkpoint", "Model weights plus rebuild/eval metadata.")
      .def_readonly("seed", &Checkpoint::seed)
      .def_readonly("epoch", &Checkpoint::epoch, "epoch of the retained weights (-1 = none)")
      .def_readonly("val_r2", &Checkpoint::val_r2)
      .def_readonly("config_hash", &Checkpoint::config_hash)
      .def_readonly("data_hash", &Checkpoint::data_hash)
      .def_property_readonly("param_names", [](const Checkpoint& ckpt) {
        std::vector<std::string> names;
        names.reserve(ckpt.params.size());
        for (const auto& p : ckpt.params) names.push_back(p.name);
        return names;
      });

  m.def("save_checkpoint", &save_checkpoint, py::arg("checkpoint"), py::arg("stem"),
        "Writes <stem>.json and <stem>.bin.");
  m.def("load_checkpoint", &load_checkpoint, py::arg("stem"));
  m.def("verify_checkpoint", &verify_checkpoint, py::arg("stem"),
        "Integrity problems found in an on-disk checkpoint (empty list = ok).");

  py::class_<TrainArtifacts>(m, "TrainArtifacts")
      .def_readonly("checkpoint", &TrainArtifacts::checkpoint)
      .def_readonly("log", &TrainArtifacts::log)
      .def_readonly("aborted", &TrainArtifacts::aborted)
      .def_readonly("abort_reason", &TrainArtifacts::abort_reason);

  m.def("run_training", &run_training, py::arg("config"), py::arg("dataset"),
        py::arg("f64") = false, py::call_guard<py::gil_scoped_release>(),
        "Trains on the dataset's train split with per-epoch validation; keeps the "
        "best-validation weights.");

  // ------------------------------------------------------------- evaluation
  py::class_<CohortStats>(m, "CohortStats")
      .def_readonly("mean", &CohortStats::mean)
      .def_readonly("std", &CohortStats::std)
      .def_readonly("n_used", &CohortStats::n_used)
      .def_readonly("n_excluded", &CohortStats::n_excluded);

  py::class_<EvalRow>(m, "EvalRow")
      .def_readonly("id", &EvalRow::id)
      .def_readonly("r2", &EvalRow::r2)
      .def_readonly("mae_mv", &EvalRow::mae_mv)
      .def_readonly("constant_truth", &EvalRow::constant_truth);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("split", &EvalReport::split)
      .def_readonly("rows", &EvalReport::rows)
      .def_readonly("r2", &EvalReport::r2)
      .def_readonly("mae", &EvalReport::mae);

  m.def("run_eval", &run_eval, py::arg("checkpoint"), py::arg("dataset"), py::arg("split"),
        py::arg("f64") = false, py::call_guard<py::gil_scoped_release>(),
        "Free-running evaluation of a checkpoint on one split, metrics in mV.");

  py::class_<SplitPredictions>(m, "SplitPredictions")
      .def_readonly("ids", &SplitPredictions::ids)
      .def_readonly("truth_mv", &SplitPredictions::truth_mv)
      .def_readonly("pred_mv", &SplitPredictions::pred_mv)
      .def_readonly("frame_dt_ms", &SplitPredictions::frame_dt_ms);

  m.def("predict_split", &predict_split, py::arg("checkpoint"), py::arg("dataset"),
        py::arg("split"), py::arg("f64") = false, py::call_guard<py::gil_scoped_release>(),
        "Denormalized free-run predictions with ground truth for every sample of a split.");

  // ----------------------------------------------------------------- report
  m.def("train_log_csv", &train_log_csv, py::arg("log"));
  m.def("trace_csv", &trace_csv, py::arg("truth_mv"), py::arg("pred_mv"), py::arg("frame_dt_ms"));
  m.def("trace_svg", &trace_svg, py::arg("truth_mv"), py::arg("pred_mv"), py::arg("frame_dt_ms"),
        py::arg("title"), "SVG overlay of truth (black) and prediction (red).");
}
