//! Dense SPD solves for the Galerkin system.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::llt;
use faer::{Conj, Mat, Par};

use crate::assembly::StiffnessSystem;
use crate::error::{invalid, Error, Result};
use crate::fem::FemFunction;

/// Lower Cholesky factor of a dense SPD matrix, computed sequentially so
/// the result is reproducible.
#[derive(Debug, Clone)]
pub struct DenseCholesky {
    l: Mat<f64>,
}

impl DenseCholesky {
    /// Factors the row-major symmetric matrix `a` of size `n`.
    pub fn factor(n: usize, a: &[f64]) -> Result<Self> {
        if a.len() != n * n {
            return invalid(format!("matrix has {} entries, expected {}", a.len(), n * n));
        }
        // symmetric, so the row-major buffer is its own column-major layout
        let mut l = Mat::from_fn(n, n, |i, j| if i >= j { a[j * n + i] } else { 0.0 });
        let mut mem = MemBuffer::new(llt::factor::cholesky_in_place_scratch::<f64>(n, Par::Seq, Default::default()));
        llt::factor::cholesky_in_place(l.as_mut(), Default::default(), Par::Seq, MemStack::new(&mut mem), Default::default())
            .map_err(|e| match e {
                llt::factor::LltError::NonPositivePivot { index } => Error::SolverFailure { index },
            })?;
        Ok(DenseCholesky { l })
    }

    pub fn size(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.size();
        let mut rhs = Mat::from_fn(n, 1, |i, _| b[i]);
        let mut mem = MemBuffer::new(llt::solve::solve_in_place_scratch::<f64>(n, 1, Par::Seq));
        llt::solve::solve_in_place_with_conj(self.l.as_ref(), Conj::No, rhs.as_mut(), Par::Seq, MemStack::new(&mut mem));
        (0..n).map(|i| rhs[(i, 0)]).collect()
    }

    /// Smallest diagonal entry of the factor.
    pub fn min_pivot(&self) -> f64 {
        (0..self.size()).map(|i| self.l[(i, i)]).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    #[default]
    Cholesky,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

pub const CG_TOLERANCE: f64 = 1e-13;

fn matvec(n: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
    (0..n).map(|i| a[i * n..(i + 1) * n].iter().zip(x).map(|(p, q)| p * q).sum()).collect()
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Preconditioned CG for `A x = b` with `A` given as an operator.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    if diag.iter().any(|&d| !(d > 0.0)) {
        let index = diag.iter().position(|&d| !(d > 0.0)).unwrap_or(0);
        return Err(Error::SolverFailure { index });
    }
    let bn = norm(b);
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(a, d)| a / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iter {
        let ap = apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::SolverFailure { index: 0 });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bn {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Diagnostic(format!("conjugate gradients did not reach {tol:e} in {max_iter} iterations")))
}

/// Solves the row-major SPD system `a x = b`.
pub fn solve_dense(n: usize, a: &[f64], b: &[f64], method: SolveMethod) -> Result<Vec<f64>> {
    if b.len() != n {
        return invalid("right-hand side length differs from matrix size");
    }
    match method {
        SolveMethod::Cholesky => {
            let f = DenseCholesky::factor(n, a)?;
            Ok(refined_solve(&f, n, a, b))
        }
        SolveMethod::ConjugateGradient => {
            let diag: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
            conjugate_gradient(|x| matvec(n, a, x), &diag, b, CG_TOLERANCE, 10 * n + 100)
        }
    }
}

/// Cholesky solve followed by one step of iterative refinement.
fn refined_solve(f: &DenseCholesky, n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut x = f.solve(b);
    let ax = matvec(n, a, &x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    let dx = f.solve(&r);
    for (xi, d) in x.iter_mut().zip(dx) {
        *xi += d;
    }
    x
}

/// Galerkin solution as a function with zero boundary coefficients.
pub fn solve(system: &mut StiffnessSystem, method: SolveMethod) -> Result<FemFunction> {
    let n = system.size();
    let c = match method {
        SolveMethod::Cholesky => {
            system.factor()?;
            let f = system.cached_factor().expect("factored");
            refined_solve(f, n, &system.k, &system.f)
        }
        SolveMethod::ConjugateGradient => solve_dense(n, &system.k, &system.f, method)?,
    };
    Ok(FemFunction { coefficients: system.extend(&c) })
}

/// `cᵀF`, checked against `cᵀKc`.
pub fn galerkin_energy(system: &StiffnessSystem, uh: &FemFunction) -> Result<f64> {
    if uh.coefficients.len() != system.num_vertices() {
        return invalid("function does not belong to the system's mesh");
    }
    let c = system.restrict(&uh.coefficients);
    let cf: f64 = c.iter().zip(&system.f).map(|(a, b)| a * b).sum();
    let ckc = system.form(&c, &c);
    if (ckc - cf).abs() > 1e-10 * cf.abs() {
        return Err(Error::Internal(format!("inconsistent system: cᵀKc = {ckc:e} but cᵀF = {cf:e}")));
    }
    Ok(cf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_two_by_two() {
        let id = vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        for m in [SolveMethod::Cholesky, SolveMethod::ConjugateGradient] {
            let x = solve_dense(3, &id, &[1.0, 0.0, 0.0], m).unwrap();
            assert_eq!(x, vec![1.0, 0.0, 0.0]);
            let x = solve_dense(2, &[2.0, 1.0, 1.0, 2.0], &[1.0, 1.0], m).unwrap();
            assert!((x[0] - 1.0 / 3.0).abs() < 1e-15 && (x[1] - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn reports_offending_pivot() {
        // leading 2x2 block is SPD, the third pivot is negative
        let a = vec![2.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.5];
        match DenseCholesky::factor(3, &a) {
            Err(Error::SolverFailure { index }) => assert_eq!(index, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(solve_dense(2, &[-1.0, 0.0, 0.0, 1.0], &[1.0, 1.0], SolveMethod::Cholesky), Err(Error::SolverFailure { index: 0 })));
    }

    #[test]
    fn cholesky_and_cg_agree_on_random_spd() {
        use proptest::collection::vec;
        use proptest::test_runner::{Config, TestRunner};
        let n = 40;
        let mut runner = TestRunner::new(Config::with_cases(16));
        runner
            .run(&(vec(-0.5f64..0.5, n * n), vec(-0.5f64..0.5, n)), |(b, rhs)| {
                let mut a = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        a[i * n + j] = (0..n).map(|k| b[i * n + k] * b[j * n + k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
                    }
                }
                let x1 = solve_dense(n, &a, &rhs, SolveMethod::Cholesky).unwrap();
                let x2 = solve_dense(n, &a, &rhs, SolveMethod::ConjugateGradient).unwrap();
                let scale = x1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                for (p, q) in x1.iter().zip(&x2) {
                    proptest::prop_assert!((p - q).abs() <= 1e-10 * scale);
                }
                let r: Vec<f64> = matvec(n, &a, &x1).iter().zip(&rhs).map(|(p, q)| p - q).collect();
                proptest::prop_assert!(norm(&r) <= 1e-12 * norm(&rhs).max(1e-300));
                Ok(())
            })
            .unwrap();
    }
}
