//! Perron-Frobenius analysis of the non-negative weight matrix ν.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAXIT: usize = 100_000;

/// Steps used to estimate |λ2| on the complement of the PF direction.
const COMPLEMENT_STEPS: usize = 400;

#[derive(Clone, Debug, PartialEq)]
pub struct PfResult {
    pub lambda_max: f64,
    /// Right PF eigenvector, entrywise >= 0 and summing to 1.
    pub w: Vec<f64>,
    /// Estimate of the second largest eigenvalue modulus.
    pub lambda2_abs: f64,
    /// |λ1| - |λ2|.
    pub gap: f64,
    pub simple: bool,
    pub iterations: usize,
}

fn validate(nu: &DMatrix<f64>) -> Result<()> {
    if nu.nrows() != nu.ncols() || nu.nrows() == 0 {
        return Err(Error::InvalidMatrix(format!(
            "expected a non-empty square matrix, got {}x{}",
            nu.nrows(),
            nu.ncols()
        )));
    }
    if let Some(v) = nu.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidMatrix(format!("entries must be finite and non-negative, found {v}")));
    }
    if nu.iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidMatrix("matrix is zero".into()));
    }
    Ok(())
}

/// Power iteration from the uniform vector with renormalization to unit sum.
/// Returns (λ, x, iterations).
fn power_iterate(m: &DMatrix<f64>, tol: f64, maxit: usize) -> Result<(f64, DVector<f64>, usize)> {
    let r = m.nrows();
    let mut x = DVector::from_element(r, 1.0 / r as f64);
    let mut change = f64::INFINITY;
    for it in 1..=maxit {
        let y = m * &x;
        let lambda = y.sum();
        if !(lambda > 0.0) {
            return Err(Error::InvalidMatrix(
                "iterate vanished: matrix has no positive eigenvalue reachable from the uniform vector".into(),
            ));
        }
        let y = y / lambda;
        change = (&y - &x).amax();
        x = y;
        if change <= tol {
            // a few extra steps push the residual well below tol
            for _ in 0..8 {
                let y = m * &x;
                x = &y / y.sum();
            }
            let lambda = (m * &x).sum();
            return Ok((lambda, x, it));
        }
    }
    Err(Error::NoConvergence { iterations: maxit, last_change: change })
}

/// Estimates |λ2| by power iteration on the ν-invariant complement of w.
/// The complement is spanned by vectors annihilated by the left PF vector u;
/// when u.w vanishes the Euclidean complement is used instead.
fn second_modulus(nu: &DMatrix<f64>, w: &DVector<f64>, u: Option<&DVector<f64>>) -> f64 {
    let r = nu.nrows();
    if r == 1 {
        return 0.0;
    }
    let project = |z: &DVector<f64>| -> DVector<f64> {
        match u {
            Some(u) if u.dot(w).abs() > 1e-9 => z - w * (u.dot(z) / u.dot(w)),
            _ => z - w * (w.dot(z) / w.dot(w)),
        }
    };
    let mut best: f64 = 0.0;
    for start in 0..r {
        // deterministic, non-degenerate start vectors
        let mut z = DVector::from_fn(r, |k, _| {
            let t = (k * 7 + start * 13 + 1) as f64;
            (t * 0.618_033_988_749_895).fract() - 0.5
        });
        z = project(&z);
        let n0 = z.norm();
        if n0 < 1e-14 {
            continue;
        }
        z /= n0;
        let mut log_growth = Vec::with_capacity(COMPLEMENT_STEPS);
        for _ in 0..COMPLEMENT_STEPS {
            let y = project(&(nu * &z));
            let n = y.norm();
            if n < 1e-300 {
                log_growth.clear();
                break;
            }
            log_growth.push(n.ln());
            z = y / n;
        }
        // geometric mean over the second half tolerates complex pairs
        let est = if log_growth.is_empty() {
            0.0
        } else {
            let tail = &log_growth[log_growth.len() / 2..];
            (tail.iter().sum::<f64>() / tail.len() as f64).exp()
        };
        best = best.max(est);
    }
    best
}

/// Dominant eigenpair of a non-negative matrix by power iteration, with a
/// deflation estimate of the second eigenvalue modulus.
pub fn pf_eigen(nu: &DMatrix<f64>, tol: f64, maxit: usize) -> Result<PfResult> {
    validate(nu)?;
    let (lambda, x, iterations) = power_iterate(nu, tol, maxit)?;
    let mut w = x;
    // Exact zeros of reducible PF vectors only decay geometrically; snap them.
    let wmax = w.amax();
    for v in w.iter_mut() {
        if *v <= tol * wmax {
            *v = 0.0;
        }
    }
    w /= w.sum();
    let left = power_iterate(&nu.transpose(), tol, maxit).ok().map(|(_, u, _)| u);
    let lambda2_abs = second_modulus(nu, &w, left.as_ref());
    let gap = lambda.abs() - lambda2_abs;
    Ok(PfResult {
        lambda_max: lambda,
        w: w.iter().copied().collect(),
        lambda2_abs,
        gap,
        simple: gap > tol,
        iterations,
    })
}

/// PF1: the spectral radius is 1.
pub fn check_pf1(result: &PfResult, tol: f64) -> bool {
    (result.lambda_max - 1.0).abs() <= tol
}

/// PF2 as far as it can be decided numerically: a positive spectral gap.
pub fn check_pf2(result: &PfResult) -> bool {
    result.simple
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const TAU: f64 = 1.618_033_988_749_895;

    fn example1() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[
                (2.0 - TAU) / 4.0, 0.0, 0.0, (TAU - 1.0) / 4.0,
                TAU / 4.0, 2.0 - TAU, TAU - 1.0, (3.0 - TAU) / 4.0,
                (3.0 - TAU) / 4.0, TAU - 1.0, 2.0 - TAU, TAU / 4.0,
                (TAU - 1.0) / 4.0, 0.0, 0.0, (2.0 - TAU) / 4.0,
            ],
        )
    }

    fn example2() -> DMatrix<f64> {
        crate::scheme::penrose_example2_nu()
    }

    fn residual(nu: &DMatrix<f64>, res: &PfResult) -> f64 {
        let w = DVector::from_vec(res.w.clone());
        (nu * &w - &w * res.lambda_max).amax()
    }

    #[test]
    fn example1_pair() {
        let nu = example1();
        let res = pf_eigen(&nu, DEFAULT_TOL, DEFAULT_MAXIT).unwrap();
        assert_abs_diff_eq!(res.lambda_max, 1.0, epsilon = 1e-10);
        for (a, b) in res.w.iter().zip([0.0, 0.5, 0.5, 0.0]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-10);
        }
        assert!(residual(&nu, &res) <= 1e-10);
        // dense-eigenvalue oracle: spectrum {1, 1/4, -0.2361, -0.0590}
        assert_abs_diff_eq!(res.lambda2_abs, 0.25, epsilon = 1e-6);
        assert_abs_diff_eq!(res.gap, 0.75, epsilon = 1e-6);
        assert!(res.simple);
        assert!(check_pf1(&res, 1e-10));
    }

    #[test]
    fn example2_pair() {
        let nu = example2();
        let res = pf_eigen(&nu, DEFAULT_TOL, DEFAULT_MAXIT).unwrap();
        assert_abs_diff_eq!(res.lambda_max, 1.0, epsilon = 1e-10);
        for a in &res.w {
            assert_abs_diff_eq!(*a, 0.25, epsilon = 1e-10);
        }
        // spectrum {1, 1/2, 0, 0}
        assert_abs_diff_eq!(res.gap, 0.5, epsilon = 1e-6);
        assert!(check_pf1(&res, 1e-10));
    }

    #[test]
    fn identity_is_not_simple() {
        let res = pf_eigen(&DMatrix::identity(2, 2), DEFAULT_TOL, DEFAULT_MAXIT).unwrap();
        assert_abs_diff_eq!(res.lambda_max, 1.0, epsilon = 1e-14);
        assert!(!res.simple);
    }

    #[test]
    fn scaled_spectrum_fails_pf1() {
        let res = pf_eigen(&(example1() / 2.0), DEFAULT_TOL, DEFAULT_MAXIT).unwrap();
        assert_abs_diff_eq!(res.lambda_max, 0.5, epsilon = 1e-10);
        assert!(!check_pf1(&res, 1e-10));
    }

    #[test]
    fn error_paths() {
        let neg = DMatrix::from_row_slice(2, 2, &[0.5, -0.1, 0.5, 1.0]);
        assert!(matches!(pf_eigen(&neg, 1e-12, 100), Err(Error::InvalidMatrix(_))));
        assert!(pf_eigen(&DMatrix::zeros(2, 2), 1e-12, 100).is_err());
        // eigenvalues +-sqrt 2: the iterate cycles
        let periodic = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]);
        assert!(matches!(
            pf_eigen(&periodic, 1e-12, 1000),
            Err(Error::NoConvergence { iterations: 1000, .. })
        ));
    }

    fn stochastic(r: usize) -> impl Strategy<Value = DMatrix<f64>> {
        prop::collection::vec(0.01f64..1.0, r * r).prop_map(move |v| {
            let mut m = DMatrix::from_vec(r, r, v);
            for i in 0..r {
                let s = m.column(i).sum();
                m.column_mut(i).scale_mut(1.0 / s);
            }
            m
        })
    }

    proptest! {
        #[test]
        fn column_stochastic_has_unit_radius(m in (2usize..6).prop_flat_map(stochastic)) {
            let res = pf_eigen(&m, DEFAULT_TOL, DEFAULT_MAXIT).unwrap();
            prop_assert!((res.lambda_max - 1.0).abs() <= 1e-12);
            prop_assert!(residual(&m, &res) <= 1e-10);
            prop_assert!(res.w.iter().all(|&v| v >= 0.0));
            prop_assert!((res.w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}
