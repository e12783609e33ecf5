//! Numerical laboratory for the conformally invariant wave equation on
//! asymptotically de Sitter charts: conformal reduction to a compact
//! cylinder, spectral-in-space RK4 evolution, weighted mixed-norm
//! estimation, and small-data Picard iteration for power nonlinearities.

pub mod error;
pub mod exponents;
pub mod geometry;
pub mod norms;
pub mod operator;
pub mod report;
pub mod sampling;
pub mod semilinear;
pub mod solver;
pub mod strichartz;

pub use error::{Error, Result};
pub use exponents::{AdmissibleTriple, DualPair, Exponent, Rational, WeightLaw};
pub use geometry::{CrossSection, Field, Grid, MetricSpec, ShortRangeCheck};
pub use norms::{MixedNormSpec, NodeBasis};
pub use operator::{BoundaryChartOperator, ReducedOperator, ZonalLaplacian};
pub use sampling::{DataSampler, ForcingSampler};
pub use semilinear::{IterationHistory, NonlinearitySpec, PicardConfig};
pub use solver::{CauchyData, EnergyReading, SolveOptions, StateVector, TrajectoryRecord};
pub use strichartz::{EnsembleOptions, EstimateKind, EstimateReport, RunOutcome};
