//! Limiting objects as the subpopulation sizes grow: Xi-measure rates, generators
//! over typed partitions, discrete-time limits, the block-counting process,
//! matrix exponentials and finite-`N` convergence diagnostics.

pub mod diagnostic;
pub mod expm;
pub mod generator;
pub mod xi;

pub use diagnostic::{convergence_diagnostic, Calibrated, DiagnosticRow};
pub use expm::{expm_generator, matrix_exponential};
pub use generator::{lump_to_counts, CoalescentSpec, DiscreteLimit};
pub use xi::{XiAtom, XiMeasure};
