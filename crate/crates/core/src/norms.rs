//! Exact disc solutions and error norms: graded L2 and broken H1 errors,
//! the energy error, fractional seminorms, and convergence orders.

use std::f64::consts::PI;

use crate::assembly::{assemble_mass, AssemblyConfig, StiffnessSystem};
use crate::error::{invalid, Error, Result};
use crate::fem::{element_rule, ElementGeom, FemFunction, Grading};
use crate::mesh::{Mesh, Point, Subdomain};
use crate::pairs::PairIntegrator;
use crate::projections::CutoffFunction;
use crate::solver::galerkin_energy;

/// Grading of the error quadrature on cells touching the boundary.
pub const ERROR_GRADING: Grading = Grading { levels: 12, ratio: 0.25, order: 6 };

/// Rule order of the error quadrature on interior cells.
pub const ERROR_RULE_ORDER: usize = 6;

/// Tolerance on a negative energy radicand before it is reported.
pub const ENERGY_TOLERANCE: f64 = 1e-10;

/// A scalar field with its gradient.
pub trait Field {
    fn value(&self, x: Point) -> f64;
    fn gradient(&self, x: Point) -> Point;
}

/// `u(x) = (1 − |x|²)₊^s` on the unit ball with its constant load and energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSolution {
    pub dim: usize,
    pub s: f64,
    /// Constant right-hand side `f` with `(−Δ)^s u = f` in the ball.
    pub rhs_constant: f64,
    /// `a(u, u) = f ∫ u`.
    pub energy_squared: f64,
}

impl Field for ExactSolution {
    fn value(&self, x: Point) -> f64 {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - r2).powf(self.s)
        }
    }

    fn gradient(&self, x: Point) -> Point {
        let r2 = x[0] * x[0] + x[1] * x[1];
        if r2 >= 1.0 {
            return [0.0; 2];
        }
        let c = -2.0 * self.s * (1.0 - r2).powf(self.s - 1.0);
        [c * x[0], c * x[1]]
    }
}

pub fn disc_exact_solution(s: f64, dim: usize) -> Result<ExactSolution> {
    if !(s > 0.0 && s < 1.0) {
        return invalid(format!("fractional order must lie in (0,1), got {s}"));
    }
    let g = libm::tgamma;
    let (rhs_constant, integral) = match dim {
        1 => (
            (4f64).powf(s) * g(s + 0.5) * g(s + 1.0) / PI.sqrt(),
            PI.sqrt() * g(s + 1.0) / g(s + 1.5),
        ),
        2 => ((4f64).powf(s) * g(1.0 + s).powi(2), PI / (s + 1.0)),
        _ => return invalid(format!("unsupported dimension {dim}")),
    };
    Ok(ExactSolution { dim, s, rhs_constant, energy_squared: rhs_constant * integral })
}

/// Errors of one discrete solution against the exact one.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorReport {
    pub l2_global: f64,
    pub h1_global: Option<f64>,
    pub l2_local: f64,
    pub h1_local: f64,
    pub energy_global: f64,
    pub energy_local: Option<f64>,
}

fn region_cells(mesh: &Mesh, region: Option<&Subdomain>) -> Result<Vec<usize>> {
    match region {
        None => Ok((0..mesh.num_cells()).collect()),
        Some(r) if r.is_empty() => Err(Error::Undefined("region contains no elements".into())),
        Some(r) => Ok(r.elements.clone()),
    }
}

/// `Σ_T ∫_T g(T, x)` with the graded error quadrature, summed per cell in
/// cell order.
fn integrate_cells(mesh: &Mesh, cells: &[usize], g: impl Fn(usize, &ElementGeom, Point) -> f64) -> f64 {
    let mut total = 0.0;
    for &k in cells {
        let geom = ElementGeom::new(mesh, k);
        let rule = element_rule(mesh, k, ERROR_RULE_ORDER, Some(ERROR_GRADING));
        total += rule.points.iter().zip(&rule.weights).map(|(&x, &w)| w * g(k, &geom, x)).sum::<f64>();
    }
    total
}

/// `‖u − u_h‖_{L2}` over the region, or over the mesh when `region` is `None`.
pub fn l2_error(mesh: &Mesh, exact: &dyn Field, uh: &FemFunction, region: Option<&Subdomain>) -> Result<f64> {
    check_function(mesh, uh)?;
    let cells = region_cells(mesh, region)?;
    let sq = integrate_cells(mesh, &cells, |k, geom, x| {
        let e = exact.value(x) - uh.value_in(mesh, geom, k, x);
        e * e
    });
    Ok(sq.sqrt())
}

/// Broken `|u − u_h|_{H1}` over the region. On the whole mesh the exact
/// disc gradient is square integrable only for `s > 1/2`; smaller orders
/// are reported as undefined.
pub fn h1_seminorm_error(mesh: &Mesh, exact: &ExactSolution, uh: &FemFunction, region: Option<&Subdomain>) -> Result<f64> {
    let whole = region.is_none_or(|r| r.elements.len() == mesh.num_cells());
    if whole && exact.s <= 0.5 {
        return Err(Error::Undefined(format!("global H1 error needs s > 1/2, got s = {}", exact.s)));
    }
    h1_seminorm_error_of(mesh, exact, uh, region)
}

/// Broken `|u − u_h|_{H1}` for any field, without the regularity check.
pub fn h1_seminorm_error_of(mesh: &Mesh, exact: &dyn Field, uh: &FemFunction, region: Option<&Subdomain>) -> Result<f64> {
    check_function(mesh, uh)?;
    let cells = region_cells(mesh, region)?;
    let sq = integrate_cells(mesh, &cells, |k, geom, x| {
        let g = exact.gradient(x);
        let gh = uh.gradient_in(mesh, geom, k);
        (g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2)
    });
    Ok(sq.sqrt())
}

/// `(a(u,u) − cᵀF)^{1/2}` for the Galerkin solution `u_h` of `system`.
pub fn energy_error(system: &StiffnessSystem, uh: &FemFunction, energy_squared: f64) -> Result<f64> {
    let radicand = energy_squared - galerkin_energy(system, uh)?;
    if radicand < -ENERGY_TOLERANCE {
        return Err(Error::Diagnostic(format!("negative energy radicand {radicand:e}")));
    }
    Ok(radicand.max(0.0).sqrt())
}

/// `|v|_{H^t(R)} = (∬_{R×R} (v(x) − v(y))² / |x − y|^{d+2t})^{1/2}` over the
/// cells of the region, or of the whole mesh.
pub fn fractional_seminorm(mesh: &Mesh, v: &FemFunction, t: f64, region: Option<&Subdomain>, config: &AssemblyConfig) -> Result<f64> {
    if !(t > 0.0 && t < 1.0) {
        return invalid(format!("seminorm order must lie in (0,1), got {t}"));
    }
    check_function(mesh, v)?;
    config.validate()?;
    let cells = region_cells(mesh, region)?;
    let pairs = PairIntegrator::new(mesh, t, config.pair_settings())?;
    let nv = mesh.dim() + 1;
    let mut in_region = vec![false; mesh.num_cells()];
    for &k in &cells {
        in_region[k] = true;
    }
    let coef = &v.coefficients;
    let mut total = 0.0;
    for &k in &cells {
        let cell = mesh.cell(k);
        // the cell itself and its touching neighbours, as ordered pairs
        for &t2 in mesh.element_patch(k).iter().filter(|&&t2| in_region[t2]) {
            let (verts, mat) = pairs.touching(k, t2);
            for (a, &va) in verts.iter().enumerate() {
                for (b, &vb) in verts.iter().enumerate() {
                    total += coef[va] * coef[vb] * mat[a][b];
                }
            }
        }
        // disjoint pairs with a later cell, doubled
        let local = |c: &[usize]| {
            let mut out = [0.0; 3];
            for i in 0..nv {
                out[i] = coef[c[i]];
            }
            out
        };
        let va = local(cell);
        for &t2 in cells.iter().filter(|&&t2| t2 > k) {
            if mesh.shared_vertex_count(k, t2) > 0 {
                continue;
            }
            total += 2.0 * pairs.disjoint_difference(k, t2, &va, &local(mesh.cell(t2)));
        }
    }
    Ok(total.max(0.0).sqrt())
}

/// `‖I_h(η_h (u − u_h))‖_{H̃^s}`, with the `H^s(ℝ^d)` seminorm part taken
/// from the assembled form and the L2 part from the mass matrix.
pub fn localized_energy_error(
    mesh: &Mesh,
    system: &StiffnessSystem,
    exact: &dyn Field,
    uh: &FemFunction,
    cutoff: &CutoffFunction,
) -> Result<f64> {
    check_function(mesh, uh)?;
    let eta = &cutoff.values.coefficients;
    let w: Vec<f64> = (0..mesh.num_vertices()).map(|v| eta[v] * (exact.value(mesh.vertex(v)) - uh.coefficients[v])).collect();
    if (0..mesh.num_vertices()).any(|v| w[v] != 0.0 && system.row_of[v].is_none()) {
        return invalid("cutoff support reaches the domain boundary");
    }
    let c = system.restrict(&w);
    let seminorm_sq = 2.0 / system.c_ds * system.form(&c, &c);
    let mass = assemble_mass(mesh);
    let l2_sq: f64 = w.iter().zip(mass.matvec(&w)).map(|(a, b)| a * b).sum();
    Ok((seminorm_sq.max(0.0) + l2_sq).sqrt())
}

/// Pairwise orders `log(e_k / e_{k+1}) / log(h_k / h_{k+1})`.
pub fn eoc(values: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if values.len() != hs.len() || values.len() < 2 {
        return invalid("need at least two errors with matching mesh sizes");
    }
    if values.iter().chain(hs).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return invalid("errors and mesh sizes must be positive");
    }
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return invalid("mesh sizes must decrease strictly");
    }
    Ok(values.windows(2).zip(hs.windows(2)).map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect())
}

fn check_function(mesh: &Mesh, v: &FemFunction) -> Result<()> {
    if v.coefficients.len() != mesh.num_vertices() {
        return invalid("function does not belong to the mesh");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_constants() {
        let e = disc_exact_solution(0.5, 2).unwrap();
        assert!((e.rhs_constant - PI / 2.0).abs() < 1e-14);
        assert!((e.energy_squared - PI * PI / 3.0).abs() < 1e-13);
        let e = disc_exact_solution(0.5, 1).unwrap();
        assert!((e.rhs_constant - 1.0).abs() < 1e-14);
        // ∫(1-x²)^{1/2} = π/2
        assert!((e.energy_squared - PI / 2.0).abs() < 1e-14);
        assert_eq!(e.value([0.0, 0.0]), 1.0);
        assert_eq!(e.value([1.0, 0.0]), 0.0);
        assert_eq!(e.value([0.0, 1.5]), 0.0);
        assert!(disc_exact_solution(1.0, 2).is_err() && disc_exact_solution(0.5, 3).is_err());
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let e = disc_exact_solution(0.3, 2).unwrap();
        let x = [0.3, -0.4];
        let g = e.gradient(x);
        let d = 1e-6;
        let gx = (e.value([x[0] + d, x[1]]) - e.value([x[0] - d, x[1]])) / (2.0 * d);
        let gy = (e.value([x[0], x[1] + d]) - e.value([x[0], x[1] - d])) / (2.0 * d);
        assert!((g[0] - gx).abs() < 1e-8 && (g[1] - gy).abs() < 1e-8);
    }

    #[test]
    fn eoc_examples() {
        assert_eq!(eoc(&[1.0, 0.25], &[1.0, 0.5]).unwrap(), vec![2.0]);
        assert_eq!(eoc(&[1.0, 0.5, 0.25], &[1.0, 0.5, 0.25]).unwrap(), vec![1.0, 1.0]);
        assert!(eoc(&[1.0], &[1.0]).is_err());
        assert!(eoc(&[1.0, 0.0], &[1.0, 0.5]).is_err());
        assert!(eoc(&[1.0, 0.5], &[0.5, 1.0]).is_err());
    }
}
