"""Forward ECG surrogate: synthetic atrial meshes, a biophysical Lead II
oracle, and a spectral neural surrogate trained against it.

The heavy lifting lives in the compiled ``ecgfwd._core`` extension; this
package re-exports it. Matrices cross the boundary as numpy arrays.
"""

from ._core import (  # noqa: F401
    ActivationField,
    ApParams,
    AtriumParams,
    Checkpoint,
    CohortStats,
    Dataset,
    DatasetManifest,
    DatasetSample,
    EcgTrace,
    EpochLog,
    Error,
    EvalReport,
    EvalRow,
    ExperimentConfig,
    GeometricOperators,
    IoError,
    Landmarks,
    OracleConfig,
    SampleMeta,
    Split,
    SplitPredictions,
    SurfaceMesh,
    TrainArtifacts,
    ValidationError,
    VoltageSequence,
    activation_times,
    ap_template,
    build_operators,
    compute_uac,
    config_from_json,
    cotan_laplacian,
    default_config,
    default_oracle_config,
    ecg_potential,
    forward_ecg,
    gen_synthetic_atrium,
    gen_voltage_sequence,
    generate_dataset,
    load_checkpoint,
    load_config,
    load_dataset,
    load_mesh,
    lumped_mass,
    make_icosphere,
    make_sheet,
    mesh_from_json,
    mesh_to_json,
    parse_split,
    predict_split,
    run_eval,
    run_training,
    save_checkpoint,
    save_dataset,
    save_mesh,
    subdivide,
    total_area,
    trace_csv,
    trace_svg,
    train_log_csv,
    validate_mesh,
    verify_checkpoint,
    verify_dataset,
)

__version__ = "0.1.0"
