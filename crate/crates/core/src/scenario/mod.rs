//! Experiment harness: signals, scenario files, reference runs and error metrics.

mod config;
mod metrics;
mod output;
mod run;
mod signal;

pub use config::{AbcSpec, AngleMode, ExcitationSpec, MeshSpec, OutputSpec, ReferenceSpec, Scenario, TimeSpec, Variant};
pub use metrics::{
    energy_diagnostic, improvement, l2_norms, pressure_field, relative_l2_error, restrict_reference,
    space_time_error, space_time_from_norms, NodeMap, NormPair, NODE_MATCH_TOL,
};
pub use output::{
    aggregate, angle_csv, compare, error_csv, parse_error_csv, read_error_csv, vtk_string, Comparison, ANGLE_HEADER,
    ERROR_HEADER,
};
pub use run::{
    build_integrator, run_reference, run_variant, AngleRow, ErrorRow, ReferenceSolution, RunOptions, VariantReport,
    ARRIVAL_FRACTION, EARLY_GUARD,
};
pub use signal::{excitation_signal, gaussian_source, GaussianSourceSpec};
