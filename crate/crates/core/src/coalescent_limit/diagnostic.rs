//! Finite-population convergence diagnostics: `|| P_N^{floor(t / c_N)} - exp(tQ) ||`
//! in the induced row-sum norm.

use std::sync::Arc;

use rayon::prelude::*;

use super::expm::expm_generator;
use super::generator::CoalescentSpec;
use crate::ancestry_fixed::FixedModel;
use crate::error::{Error, Result};
use crate::matrix::{StateMatrix, StateSpace};
use crate::partition::{enumerate_typed_partitions, TypedPartition};

/// One grid point of a convergence diagnostic.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticRow {
    pub n: u64,
    pub t: f64,
    pub c_n: f64,
    pub generations: u64,
    pub error: f64,
}

/// A finite-population model at population parameter `N` with its time scale `c_N`.
pub struct Calibrated {
    pub model: FixedModel<f64>,
    pub c_n: f64,
}

/// Evaluates the diagnostic on every `(N, t)` grid point. `family(N)` builds the
/// finite model and its calibration; the limit generator comes from `spec`.
pub fn convergence_diagnostic<Fam>(
    family: Fam,
    ns: &[u64],
    spec: &CoalescentSpec<f64>,
    sample_size: usize,
    ts: &[f64],
    cap: usize,
) -> Result<Vec<DiagnosticRow>>
where
    Fam: Fn(u64) -> Result<Calibrated> + Sync,
{
    let space: Arc<StateSpace<TypedPartition>> = Arc::new(enumerate_typed_partitions(sample_size, spec.types(), cap)?);
    let q = spec.q(&space)?;
    let limits: Vec<_> = ts.iter().map(|&t| expm_generator(q.values(), t)).collect();
    let per_n: Vec<Result<Vec<DiagnosticRow>>> = ns
        .par_iter()
        .map(|&n| {
            let Calibrated { model, c_n } = family(n)?;
            if model.types() != spec.types() {
                return Err(Error::StateSpaceMismatch(format!(
                    "finite model has {} types, limit has {}",
                    model.types(),
                    spec.types()
                )));
            }
            if !(c_n.is_finite() && c_n > 0.0) {
                return Err(Error::domain(format!("calibration c_N = {c_n} at N = {n}")));
            }
            let p: StateMatrix<TypedPartition, f64> = model.matrices_on(Arc::clone(&space))?.p;
            ts.iter()
                .zip(&limits)
                .map(|(&t, limit)| {
                    let generations = (t / c_n).floor() as u64;
                    let diff = p.values().pow(generations).sub(limit);
                    Ok(DiagnosticRow {
                        n,
                        t,
                        c_n,
                        generations,
                        error: diff.row_sum_norm(),
                    })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_n {
        rows.extend(r?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalescent_limit::xi::XiMeasure;
    use crate::mutation::MutationCountTable;
    use crate::offspring::OffspringLaw;
    use crate::partition::DEFAULT_STATE_CAP;

    #[test]
    fn frozen_model_has_zero_error() {
        let spec = CoalescentSpec::new(vec![XiMeasure::zero()], vec![0.0], vec![vec![0.0]]).unwrap();
        let rows = convergence_diagnostic(
            |n| {
                Ok(Calibrated {
                    model: FixedModel::new(vec![OffspringLaw::dirac(n)?], MutationCountTable::none(vec![n])?)?,
                    c_n: 1.0 / n as f64,
                })
            },
            &[5, 10],
            &spec,
            3,
            &[0.5, 1.0],
            DEFAULT_STATE_CAP,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.error == 0.0));
    }
}
