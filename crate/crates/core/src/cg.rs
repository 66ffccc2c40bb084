//! Conjugate gradients over an abstract symmetric positive definite operator.

use serde::{Deserialize, Serialize};

use crate::cube::dot;
use crate::error::{Error, Result};

/// A linear map on flat vectors of length [`LinearOperator::dim`]. Solvers
/// assume it is symmetric positive (semi)definite.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl<T: LinearOperator + ?Sized> LinearOperator for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (**self).apply(x, y)
    }
}

/// Dense row-major square operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseOperator {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "dense operator of order {n} needs {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    /// Materializes any operator by applying it to the unit vectors.
    pub fn from_operator(op: &impl LinearOperator) -> Self {
        let n = op.dim();
        let mut data = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            op.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
        Self { n, data }
    }
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(&self.data[i * self.n..(i + 1) * self.n], x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgConfig {
    /// Target relative residual `||b - Ax|| / ||b||`.
    pub tol: f64,
    pub max_iter: usize,
}

impl CgConfig {
    pub const fn new(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter }
    }
}

impl Default for CgConfig {
    fn default() -> Self {
        Self::new(1e-8, 500)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CgReport {
    pub iterations: usize,
    /// Final `||b - Ax|| / ||b||`, recomputed from the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
    /// Recursive residual norms, relative to `||b||`, starting at `x0`.
    #[serde(skip)]
    pub residual_history: Vec<f64>,
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

/// Solves `A x = b` from `x0`. Running out of iterations is not an error; the
/// report's `converged` flag is false instead. The returned iterate is the
/// last one, which has the smallest `A`-norm error of all iterates.
pub fn cg_solve(
    op: &impl LinearOperator,
    b: &[f64],
    x0: &[f64],
    cfg: &CgConfig,
) -> Result<(Vec<f64>, CgReport)> {
    let n = op.dim();
    if b.len() != n || x0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "operator of dimension {n}, rhs {}, start {}",
            b.len(),
            x0.len()
        )));
    }
    let b_norm = dot(b, b).sqrt();
    if !b_norm.is_finite() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite CG input".into()));
    }
    if b_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgReport {
                iterations: 0,
                relative_residual: 0.0,
                converged: true,
                residual_history: vec![0.0],
            },
        ));
    }

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    op.apply(&x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    let mut history = vec![rr.sqrt() / b_norm];
    let mut iterations = 0;

    while iterations < cfg.max_iter && rr.sqrt() / b_norm > cfg.tol {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !pap.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite curvature at CG iteration {iterations}"
            )));
        }
        if pap <= 0.0 {
            // Direction of zero curvature: the residual cannot be reduced further.
            break;
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if !rr_new.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite residual at CG iteration {iterations}"
            )));
        }
        let beta = rr_new / rr;
        p.iter_mut().zip(&r).for_each(|(pi, ri)| *pi = ri + beta * *pi);
        rr = rr_new;
        iterations += 1;
        history.push(rr.sqrt() / b_norm);
    }

    op.apply(&x, &mut ap);
    let true_rr: f64 = ap.iter().zip(b).map(|(a, bi)| (bi - a) * (bi - a)).sum();
    let relative_residual = true_rr.sqrt() / b_norm;
    if !relative_residual.is_finite() {
        return Err(Error::Numerical("non-finite final CG residual".into()));
    }
    Ok((
        x,
        CgReport {
            iterations,
            relative_residual,
            converged: relative_residual <= cfg.tol,
            residual_history: history,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Identity(usize);

    impl LinearOperator for Identity {
        fn dim(&self) -> usize {
            self.0
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            y.copy_from_slice(x);
        }
    }

    struct Poisoned;

    impl LinearOperator for Poisoned {
        fn dim(&self) -> usize {
            2
        }
        fn apply(&self, _x: &[f64], y: &mut [f64]) {
            y.fill(f64::NAN);
        }
    }

    #[test]
    fn identity_solves_in_one_step() {
        let b = vec![1.0, -2.0, 3.5];
        let (x, rep) = cg_solve(&Identity(3), &b, &[0.0; 3], &CgConfig::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for (a, e) in x.iter().zip(&b) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn two_by_two_system() {
        let a = DenseOperator::new(2, vec![4.0, 1.0, 1.0, 3.0]).unwrap();
        let (x, rep) = cg_solve(&a, &[1.0, 2.0], &[0.0, 0.0], &CgConfig::new(1e-14, 10)).unwrap();
        assert!(rep.converged);
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-10);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-10);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let (x, rep) = cg_solve(&Identity(2), &[0.0, 0.0], &[1.0, 1.0], &CgConfig::default()).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert!(rep.converged);
    }

    #[test]
    fn iteration_cap_is_not_an_error() {
        let a = DenseOperator::new(3, vec![10.0, 1.0, 0.0, 1.0, 5.0, 2.0, 0.0, 2.0, 1.0]).unwrap();
        let (_, rep) = cg_solve(&a, &[1.0, 1.0, 1.0], &[0.0; 3], &CgConfig::new(1e-14, 1)).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(!rep.converged);
    }

    #[test]
    fn non_finite_operator_is_an_error() {
        let res = cg_solve(&Poisoned, &[1.0, 1.0], &[0.0, 0.0], &CgConfig::default());
        assert!(matches!(res, Err(Error::Numerical(_))));
    }

    #[test]
    fn dimension_mismatch() {
        assert!(cg_solve(&Identity(3), &[1.0], &[0.0; 3], &CgConfig::default()).is_err());
    }

    #[test]
    fn materialized_operator_matches() {
        let a = DenseOperator::new(2, vec![4.0, 1.0, 1.0, 3.0]).unwrap();
        assert_eq!(DenseOperator::from_operator(&a), a);
    }
}
