pub mod coefficients;
pub mod ldp;
pub mod measure;
pub mod prm;
pub mod semigroup;
pub mod solver;
pub mod system;
pub mod validators;

pub use coefficients::{DiffusionSpec, DriftSpec};
pub use ldp::{EventSpec, PathFunctional, RateEstimate, RateOptions};
pub use measure::{ControlFunction, MarkMeasure, TimeGrid};
pub use prm::{PointPattern, SeededRng};
pub use semigroup::{HilbertState, SpectralGenerator};
pub use solver::{PathRecord, SkeletonRun, SolverConfig};
pub use system::SystemSpec;
pub use validators::{ValidationReport, VarRepReport};

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("entropy function needs a nonnegative argument, got {0}")]
    NegativeRate(f64),
    #[error("mark cell {label:?} has invalid mass {mass}")]
    InvalidMass { label: String, mass: f64 },
    #[error("mark measure needs at least one cell")]
    EmptyMarkMeasure,
    #[error("time horizon must be positive and finite, got {0}")]
    BadHorizon(f64),
    #[error("time grid needs at least one step")]
    ZeroSteps,
    #[error("control shape {rows}x{cols} does not match {n_steps} steps x {n_cells} cells")]
    ControlShape {
        rows: usize,
        cols: usize,
        n_steps: usize,
        n_cells: usize,
    },
    #[error("control value g[{step}][{cell}] = {value} is not a finite nonnegative number")]
    BadControlValue { step: usize, cell: usize, value: f64 },
    #[error("noise scale epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("point at t = {time} in cell {cell} lies outside the control's grid or marks")]
    PatternMismatch { time: f64, cell: usize },
    #[error("point in a zero-control bin (step {step}, cell {cell}): likelihood ratio degenerate")]
    DegenerateWeight { step: usize, cell: usize },
    #[error("state coefficients must be a nonempty finite vector")]
    BadState,
    #[error("generator eigenvalues must be nonpositive, got {0}")]
    PositiveEigenvalue(f64),
    #[error("semigroup time must be nonnegative and finite, got {0}")]
    NegativeTime(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("Yosida index must be at least 1")]
    BadYosidaIndex,
    #[error("{points} collocation points cannot resolve {modes} modes")]
    CollocationTooCoarse { points: usize, modes: usize },
    #[error("invalid coefficient: {0}")]
    BadCoefficient(String),
    #[error("solver grid ({solver} steps) must refine the control grid ({control} steps) over the same horizon")]
    GridMismatch { solver: usize, control: usize },
    #[error("Picard iteration stopped after {iterations} rounds at distance {last_distance:e}")]
    PicardNonConvergence { iterations: usize, last_distance: f64 },
    #[error("operation needs a continuous path but this one records jumps")]
    PathHasJumps,
    #[error("path does not record forcing terms; rerun the solver that stores them")]
    MissingForcing,
}

pub type Result<T> = std::result::Result<T, Error>;
