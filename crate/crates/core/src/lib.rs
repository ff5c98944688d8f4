//! Multi-type Cannings population models: exact finite-population transition
//! matrices forward and backward in time, Monte Carlo simulators, limiting
//! multi-type coalescent generators and multi-type Galton-Watson limits.
//!
//! Most kernels are generic over [`Scalar`], so the same code runs in `f64`,
//! `f32` or exact [`Rational`] arithmetic. Analytic parts that need `exp` (matrix
//! exponentials, Poisson laws) are generic over [`Real`].
//!
//! ```
//! use cannings::{Law, ExactLaw, Rational};
//!
//! let wf = Law::wright_fisher(10).unwrap();
//! assert!((wf.coalescence_probability().unwrap() - 0.1).abs() < 1e-15);
//!
//! let exact = ExactLaw::kimura(2, 2).unwrap();
//! assert_eq!(exact.phi(&[2]).unwrap(), Rational::new(1.into(), 3.into()));
//! ```

pub mod ancestry_fixed;
pub mod backward_variable;
pub mod branching_limit;
pub mod coalescent_limit;
pub mod combinatorics;
pub mod error;
pub mod forward_variable;
pub mod matrix;
pub mod mutation;
pub mod offspring;
pub mod partition;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use ancestry_fixed::FixedModel;
pub use backward_variable::BackwardMatrices;
pub use branching_limit::BranchingOffspringLaw;
pub use coalescent_limit::{CoalescentSpec, XiAtom, XiMeasure};
pub use error::{Error, Result};
pub use forward_variable::{TypeCounts, VariableModel};
pub use matrix::{DenseMatrix, StateMatrix, StateSpace};
pub use mutation::{MutationCountTable, MutationMatrix};
pub use offspring::{LawFamily, LimitOffspringLaw, OffspringKind, OffspringLaw};
pub use partition::TypedPartition;
pub use scalar::{Real, Scalar};

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;

/// Offspring law in double precision.
pub type Law = OffspringLaw<f64>;
/// Offspring law in exact rational arithmetic.
pub type ExactLaw = OffspringLaw<Rational>;

pub type Matrix = DenseMatrix<f64>;
pub type ExactMatrix = DenseMatrix<Rational>;

/// Matrix over typed partitions.
pub type PartitionMatrix<T = f64> = StateMatrix<TypedPartition, T>;
/// Matrix over type-count vectors.
pub type CountMatrix<T = f64> = StateMatrix<TypeCounts, T>;

pub type FixedModelF64 = FixedModel<f64>;
pub type ExactFixedModel = FixedModel<Rational>;
pub type VariableModelF64 = VariableModel<f64>;
pub type ExactVariableModel = VariableModel<Rational>;
