//! Scalar abstraction shared by the exact kernels.
//!
//! Every combinatorial identity in this crate is stated over [`Scalar`], which is
//! implemented for `f32`, `f64` and the arbitrary-precision [`BigRational`]. Float
//! implementations use compensated summation and switch binomial coefficients to
//! log space once the arguments exceed [`EXACT_BINOMIAL_LIMIT`]; the rational
//! implementation is exact throughout.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, One, ToPrimitive, Zero};
use statrs::function::factorial::{ln_binomial, ln_factorial};

/// Largest `n` for which `C(n, k)` is formed exactly in integer arithmetic
/// before conversion; above it floats use log space.
pub const EXACT_BINOMIAL_LIMIT: u64 = 60;

pub trait Scalar: Num + Clone + Debug + PartialOrd + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// `true` when arithmetic is exact (rationals).
    const EXACT: bool;

    fn from_count(n: u64) -> Self;

    fn from_ratio(num: u64, den: u64) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }

    /// Sum of an iterator; floats use Neumaier compensated summation.
    fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        iter.into_iter().fold(Self::zero(), |acc, x| acc + x)
    }

    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Binomial coefficient `C(n, k)`, zero when `k > n`.
    fn binomial(n: u64, k: u64) -> Self {
        if k > n {
            return Self::zero();
        }
        let k = k.min(n - k);
        let mut acc = Self::one();
        for i in 0..k {
            acc = acc * Self::from_count(n - i) / Self::from_count(i + 1);
        }
        acc
    }

    /// `prod C(a_r, b_r) / C(n, k)`; the denominator must be positive.
    fn binomial_ratio(numerators: &[(u64, u64)], denominator: (u64, u64)) -> Self {
        let mut acc = Self::one();
        for &(a, b) in numerators {
            acc = acc * Self::binomial(a, b);
        }
        acc / Self::binomial(denominator.0, denominator.1)
    }

    /// Multinomial pmf `n! prod p_r^{c_r} / c_r!` with `n = sum c_r`.
    fn multinomial_pmf(probs: &[Self], counts: &[u64]) -> Self {
        debug_assert_eq!(probs.len(), counts.len());
        let mut acc = Self::one();
        let mut total = 0u64;
        for (p, &c) in probs.iter().zip(counts) {
            total += c;
            acc = acc * Self::binomial(total, c) * pow(p, c);
        }
        acc
    }
}

/// Real-valued scalars (floats) for the analytic parts: exponentials, Poisson laws.
pub trait Real: Scalar + Float {}

impl<T: Scalar + Float> Real for T {}

fn neumaier<F: Float, I: IntoIterator<Item = F>>(iter: I) -> F {
    let mut sum = F::zero();
    let mut comp = F::zero();
    for x in iter {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp = comp + ((sum - t) + x);
        } else {
            comp = comp + ((x - t) + sum);
        }
        sum = t;
    }
    sum + comp
}

fn float_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= EXACT_BINOMIAL_LIMIT {
        return exact_binomial(n, k) as f64;
    }
    ln_binomial(n, k).exp()
}

fn float_binomial_ratio(numerators: &[(u64, u64)], denominator: (u64, u64)) -> f64 {
    if numerators.iter().any(|&(a, b)| b > a) {
        return 0.0;
    }
    let large = denominator.0 > EXACT_BINOMIAL_LIMIT || numerators.iter().any(|&(a, _)| a > EXACT_BINOMIAL_LIMIT);
    if !large {
        let num: f64 = numerators.iter().map(|&(a, b)| exact_binomial(a, b) as f64).product();
        return num / exact_binomial(denominator.0, denominator.1) as f64;
    }
    let ln_num: f64 = numerators.iter().map(|&(a, b)| ln_binomial(a, b)).sum();
    (ln_num - ln_binomial(denominator.0, denominator.1)).exp()
}

fn float_multinomial_pmf(probs: &[f64], counts: &[u64]) -> f64 {
    let n: u64 = counts.iter().sum();
    if n <= EXACT_BINOMIAL_LIMIT {
        let mut acc = 1.0;
        let mut total = 0u64;
        for (&p, &c) in probs.iter().zip(counts) {
            total += c;
            acc *= exact_binomial(total, c) as f64 * p.powi(c as i32);
        }
        return acc;
    }
    let mut ln = ln_factorial(n);
    for (&p, &c) in probs.iter().zip(counts) {
        if c == 0 {
            continue;
        }
        if p <= 0.0 {
            return 0.0;
        }
        ln += c as f64 * p.ln() - ln_factorial(c);
    }
    ln.exp()
}

impl Scalar for f64 {
    const EXACT: bool = false;

    fn from_count(n: u64) -> Self {
        n as f64
    }

    fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        neumaier(iter)
    }

    fn binomial(n: u64, k: u64) -> Self {
        float_binomial(n, k)
    }

    fn binomial_ratio(numerators: &[(u64, u64)], denominator: (u64, u64)) -> Self {
        float_binomial_ratio(numerators, denominator)
    }

    fn multinomial_pmf(probs: &[Self], counts: &[u64]) -> Self {
        float_multinomial_pmf(probs, counts)
    }
}

impl Scalar for f32 {
    const EXACT: bool = false;

    fn from_count(n: u64) -> Self {
        n as f32
    }

    fn sum_all<I: IntoIterator<Item = Self>>(iter: I) -> Self {
        neumaier(iter)
    }

    fn binomial(n: u64, k: u64) -> Self {
        float_binomial(n, k) as f32
    }

    fn binomial_ratio(numerators: &[(u64, u64)], denominator: (u64, u64)) -> Self {
        float_binomial_ratio(numerators, denominator) as f32
    }

    fn multinomial_pmf(probs: &[Self], counts: &[u64]) -> Self {
        let wide: Vec<f64> = probs.iter().map(|&p| p as f64).collect();
        float_multinomial_pmf(&wide, counts) as f32
    }
}

impl Scalar for BigRational {
    const EXACT: bool = true;

    fn from_count(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn binomial(n: u64, k: u64) -> Self {
        if k > n {
            return Self::zero();
        }
        let k = k.min(n - k);
        let mut acc = BigInt::one();
        for i in 0..k {
            acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
        }
        BigRational::from_integer(acc)
    }
}

/// `C(n, k)` in integer arithmetic; panics on overflow of `u128`.
pub fn exact_binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// `base^exp` by repeated squaring, with `0^0 = 1`.
pub fn pow<T: Scalar>(base: &T, exp: u64) -> T {
    num_traits::pow(base.clone(), exp as usize)
}

/// Descending factorial `(x)_k = x (x-1) ... (x-k+1)`; zero once a factor hits zero.
pub fn falling<T: Scalar>(x: u64, k: u64) -> T {
    if k > x {
        return T::zero();
    }
    let mut acc = T::one();
    for i in 0..k {
        acc = acc * T::from_count(x - i);
    }
    acc
}

pub fn factorial<T: Scalar>(n: u64) -> T {
    falling(n, n)
}

/// `(x)_k` for a real argument, used for moments of real-valued laws.
pub fn falling_real<F: Real>(x: F, k: u64) -> F {
    let mut acc = F::one();
    for i in 0..k {
        acc = acc * (x - F::from_count(i));
    }
    acc
}

/// Converts an `f64` into any scalar; rationals receive the exact binary value.
pub fn from_f64<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("finite value")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials_agree_across_scalars() {
        for n in 0..20u64 {
            for k in 0..=n + 1 {
                let exact = exact_binomial(n, k);
                assert_eq!(f64::binomial(n, k), exact as f64);
                assert_eq!(BigRational::binomial(n, k), BigRational::from_count(exact as u64));
            }
        }
    }

    #[test]
    fn log_space_binomial_matches_exact_relative() {
        let exact = exact_binomial(80, 37) as f64;
        let approx = f64::binomial(80, 37);
        assert!(((approx - exact) / exact).abs() < 1e-12);
        let r = f64::binomial_ratio(&[(70, 3), (30, 2)], (100, 5));
        let e = (exact_binomial(70, 3) * exact_binomial(30, 2)) as f64 / exact_binomial(100, 5) as f64;
        assert!(((r - e) / e).abs() < 1e-12);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0, 1e-16, 1e-16, 1e-16, 1e-16, -1.0];
        assert!((f64::sum_all(xs) - 4e-16).abs() < 1e-30);
    }

    #[test]
    fn multinomial_pmf_large_n_is_normalized_for_binomial_case() {
        let p = [0.3, 0.7];
        let total = f64::sum_all((0..=200u64).map(|c| f64::multinomial_pmf(&p, &[c, 200 - c])));
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn falling_factorial_edge_cases() {
        assert_eq!(falling::<f64>(5, 0), 1.0);
        assert_eq!(falling::<f64>(5, 2), 20.0);
        assert_eq!(falling::<f64>(1, 2), 0.0);
        assert_eq!(factorial::<f64>(5), 120.0);
        assert_eq!(pow(&0.0f64, 0), 1.0);
    }
}
