//! Path simulation, time nets and hedging discretizations.

pub mod hedge;
pub mod net;
pub mod path;
pub mod scheme;

pub use hedge::{
    corrected_approx, integral_oracle, jump_threshold_times, riemann_approx, run_hedges, sample_weight_paths, triggers,
    write_runs_csv, CorrectedApprox, HedgeExperiment, HedgeNet, HedgeRun, PathOutcome, ThresholdTimes,
    DEFAULT_ORACLE_TOLERANCE,
};
pub use net::{adapted_time_net, fine_grid, mesh_size, TimeNet, DEFAULT_GRID_POINTS};
pub use path::{grid_index, path_rng, sample_path, JumpRecord, PathCursor, SamplePath};
pub use scheme::{default_cutoff, SimulationScheme, DEFAULT_JUMP_BUDGET};
