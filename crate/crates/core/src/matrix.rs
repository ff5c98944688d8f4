//! Dense matrices over enumerated state spaces.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        DenseMatrix {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    /// Builds an `n x n` matrix row by row in parallel.
    pub fn from_row_fn<F>(n: usize, cols: usize, f: F) -> Self
    where
        F: Fn(usize) -> Vec<T> + Sync + Send,
    {
        let rows: Vec<Vec<T>> = (0..n).into_par_iter().map(&f).collect();
        debug_assert!(rows.iter().all(|r| r.len() == cols));
        DenseMatrix {
            rows: n,
            cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: T) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        let cols = other.cols;
        DenseMatrix::from_row_fn(self.rows, cols, |i| {
            let mut out = vec![T::zero(); cols];
            for (k, a) in self.row(i).iter().enumerate() {
                if a.is_zero() {
                    continue;
                }
                for (o, b) in out.iter_mut().zip(other.row(k)) {
                    if !b.is_zero() {
                        *o = o.clone() + a.clone() * b.clone();
                    }
                }
            }
            out
        })
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows);
        let mut out = vec![T::zero(); self.cols];
        for (k, a) in v.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (o, b) in out.iter_mut().zip(self.row(k)) {
                *o = o.clone() + a.clone() * b.clone();
            }
        }
        out
    }

    /// `self^k` by repeated squaring.
    pub fn pow(&self, mut k: u64) -> Self {
        assert_eq!(self.rows, self.cols);
        let mut result = Self::identity(self.rows);
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = result.matmul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.matmul(&base);
            }
        }
        result
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() + b.clone())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a.clone() - b.clone())
    }

    pub fn scale(&self, s: &T) -> Self {
        self.map(|a| a.clone() * s.clone())
    }

    pub fn map<U: Scalar, F: Fn(&T) -> U>(&self, f: F) -> DenseMatrix<U> {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(f).collect(),
        }
    }

    fn zip_with<F: Fn(&T, &T) -> T>(&self, other: &Self, f: F) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(a, b)).collect(),
        }
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| T::sum_all(self.row(i).iter().cloned()))
            .collect()
    }

    /// Induced infinity norm: `max_i sum_j |a_ij|`, evaluated in `f64`.
    pub fn row_sum_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.approx().abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.approx() - b.approx()).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_f64(&self) -> DenseMatrix<f64> {
        self.map(|x| x.approx())
    }
}

/// A finite, explicitly enumerated state space with an index map.
#[derive(Clone, Debug)]
pub struct StateSpace<S> {
    states: Vec<S>,
    index: HashMap<S, usize>,
}

impl<S: Clone + Eq + Hash> StateSpace<S> {
    pub fn new(states: Vec<S>) -> Self {
        let index = states
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, s)| (s, i))
            .collect::<HashMap<_, _>>();
        assert_eq!(index.len(), states.len(), "duplicate states");
        StateSpace { states, index }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, s: &S) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn state(&self, i: usize) -> &S {
        &self.states[i]
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }
}

impl<S: PartialEq> PartialEq for StateSpace<S> {
    fn eq(&self, other: &Self) -> bool {
        self.states == other.states
    }
}

/// A probability or rate matrix indexed by the states of a [`StateSpace`].
#[derive(Clone, Debug)]
pub struct StateMatrix<S, T> {
    space: Arc<StateSpace<S>>,
    values: DenseMatrix<T>,
}

impl<S: Clone + Eq + Hash, T: Scalar> StateMatrix<S, T> {
    pub fn new(space: Arc<StateSpace<S>>, values: DenseMatrix<T>) -> Self {
        assert_eq!(space.len(), values.rows());
        assert_eq!(space.len(), values.cols());
        StateMatrix { space, values }
    }

    pub fn space(&self) -> &Arc<StateSpace<S>> {
        &self.space
    }

    pub fn values(&self) -> &DenseMatrix<T> {
        &self.values
    }

    pub fn into_values(self) -> DenseMatrix<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    /// Entry for a pair of states; zero when either is outside the space.
    pub fn entry(&self, from: &S, to: &S) -> T {
        match (self.space.index_of(from), self.space.index_of(to)) {
            (Some(i), Some(j)) => self.values.get(i, j).clone(),
            _ => T::zero(),
        }
    }

    pub fn row_sums(&self) -> Vec<T> {
        self.values.row_sums()
    }

    /// Largest `|row sum - target|` over all rows.
    pub fn max_row_sum_deviation(&self, target: f64) -> f64 {
        self.row_sums()
            .iter()
            .map(|s| (s.approx() - target).abs())
            .fold(0.0, f64::max)
    }

    /// Checks non-negativity and unit row sums within `tol`.
    pub fn check_stochastic(&self, tol: f64) -> Result<()> {
        self.check_entries(tol, true)?;
        let dev = self.max_row_sum_deviation(1.0);
        if dev > tol {
            return Err(Error::invalid(
                "stochastic matrix",
                format!("row sum deviates from 1 by {dev:e}"),
            ));
        }
        Ok(())
    }

    /// Checks non-negative off-diagonal entries and zero row sums within `tol`.
    pub fn check_generator(&self, tol: f64) -> Result<()> {
        self.check_entries(tol, false)?;
        let dev = self.max_row_sum_deviation(0.0);
        if dev > tol {
            return Err(Error::invalid(
                "generator matrix",
                format!("row sum deviates from 0 by {dev:e}"),
            ));
        }
        Ok(())
    }

    fn check_entries(&self, tol: f64, include_diagonal: bool) -> Result<()> {
        for i in 0..self.len() {
            for j in 0..self.len() {
                if i == j && !include_diagonal {
                    continue;
                }
                let v = self.values.get(i, j).approx();
                if v < -tol || !v.is_finite() {
                    return Err(Error::invalid(
                        "matrix",
                        format!("entry ({i}, {j}) = {v:e} is negative or not finite"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(StateMatrix {
            space: Arc::clone(&self.space),
            values: self.values.matmul(&other.values),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_space(other)?;
        Ok(StateMatrix {
            space: Arc::clone(&self.space),
            values: self.values.add(&other.values),
        })
    }

    pub fn pow(&self, k: u64) -> Self {
        StateMatrix {
            space: Arc::clone(&self.space),
            values: self.values.pow(k),
        }
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.space, &other.space) || self.space.states == other.space.states {
            Ok(())
        } else {
            Err(Error::StateSpaceMismatch(format!(
                "{} states vs {} states",
                self.len(),
                other.len()
            )))
        }
    }
}

impl<S: fmt::Display, T: Scalar> StateMatrix<S, T> {
    /// State labels in index order, as used for CSV headers.
    pub fn labels(&self) -> Vec<String> {
        self.space.states.iter().map(ToString::to_string).collect()
    }
}
