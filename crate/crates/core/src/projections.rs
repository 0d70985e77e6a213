//! L2 projection, a patch-wise quasi-interpolant, and cutoff functions,
//! with measurable superapproximation and locality diagnostics.

use crate::assembly::{assemble_load, assemble_mass, CsrMatrix};
use crate::error::{invalid, Error, Result};
use crate::fem::{ElementGeom, FemFunction};
use crate::mesh::{dist, Mesh, Point, Subdomain};
use crate::quadrature::simplex_rule;
use crate::solver::conjugate_gradient;

/// Rule order for integrals of products of piecewise polynomials.
const PRODUCT_RULE_ORDER: usize = 6;

/// Relative residual target of the mass solves.
const MASS_TOLERANCE: f64 = 1e-14;

/// Continuous piecewise-linear cutoff: 1 on the inner region, 0 outside the
/// outer one, blended across the layer by vertex distances.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffFunction {
    pub inner: Subdomain,
    pub outer: Subdomain,
    pub values: FemFunction,
    /// Smallest distance between a vertex with value 1 and one with value 0.
    pub layer_width: f64,
    /// Largest cellwise `|∇η_h|`.
    pub gradient_bound: f64,
}

impl CutoffFunction {
    /// Builds `η_h` for element-resolved `inner ⊂ outer`. Fails when the
    /// layer is thinner than twice the mesh size.
    pub fn new(mesh: &Mesh, inner: &Subdomain, outer: &Subdomain) -> Result<Self> {
        if inner.is_empty() || outer.is_empty() {
            return invalid("cutoff regions must contain elements");
        }
        if !inner.elements.iter().all(|&k| outer.contains_element(k)) {
            return invalid("inner region is not contained in the outer region");
        }
        let ones = inner.vertices(mesh);
        let mut zero_flag = vec![false; mesh.num_vertices()];
        for k in (0..mesh.num_cells()).filter(|&k| !outer.contains_element(k)) {
            for &v in mesh.cell(k) {
                zero_flag[v] = true;
            }
        }
        let zeros: Vec<usize> = (0..mesh.num_vertices()).filter(|&v| zero_flag[v]).collect();
        let nearest = |set: &[usize], p: Point| set.iter().map(|&v| dist(mesh.vertex(v), p)).fold(f64::INFINITY, f64::min);
        let layer_width = ones.iter().map(|&v| nearest(&zeros, mesh.vertex(v))).fold(f64::INFINITY, f64::min);
        if layer_width < 2.0 * mesh.h_max() {
            return invalid(format!("cutoff layer {layer_width:.3e} is thinner than twice the mesh size {:.3e}", mesh.h_max()));
        }
        let mut values = vec![0.0; mesh.num_vertices()];
        for v in 0..mesh.num_vertices() {
            if zero_flag[v] {
                continue;
            }
            let p = mesh.vertex(v);
            let (di, dz) = (nearest(&ones, p), nearest(&zeros, p));
            values[v] = dz / (di + dz);
        }
        let values = FemFunction { coefficients: values };
        let gradient_bound = (0..mesh.num_cells())
            .map(|k| {
                let g = values.gradient(mesh, k);
                g[0].hypot(g[1])
            })
            .fold(0.0, f64::max);
        Ok(CutoffFunction { inner: inner.clone(), outer: outer.clone(), values, layer_width, gradient_bound })
    }

    /// Cells on which `η_h` is not identically zero.
    pub fn support(&self, mesh: &Mesh) -> Vec<usize> {
        (0..mesh.num_cells()).filter(|&k| mesh.cell(k).iter().any(|&v| self.values.coefficients[v] > 0.0)).collect()
    }
}

/// Solves `M c = b` on the rows selected by `free`, with zero elsewhere.
fn mass_solve(mass: &CsrMatrix, b: &[f64], free: &[usize]) -> Result<Vec<f64>> {
    let n = mass.n;
    let mut slot = vec![usize::MAX; n];
    for (i, &v) in free.iter().enumerate() {
        slot[v] = i;
    }
    let apply = |x: &[f64]| -> Vec<f64> {
        free.iter()
            .map(|&v| {
                (mass.row_ptr[v]..mass.row_ptr[v + 1])
                    .filter(|&p| slot[mass.cols[p]] != usize::MAX)
                    .map(|p| mass.values[p] * x[slot[mass.cols[p]]])
                    .sum()
            })
            .collect()
    };
    let diag: Vec<f64> = free.iter().map(|&v| mass.get(v, v)).collect();
    let rhs: Vec<f64> = free.iter().map(|&v| b[v]).collect();
    let x = conjugate_gradient(apply, &diag, &rhs, MASS_TOLERANCE, 20 * free.len() + 100)
        .map_err(|e| Error::Internal(format!("mass solve failed: {e}")))?;
    let mut out = vec![0.0; n];
    for (i, &v) in free.iter().enumerate() {
        out[v] = x[i];
    }
    Ok(out)
}

/// `Π f` with `⟨f − Π f, φ_i⟩ = 0` for all hats, or for the interior hats
/// with zero boundary values when `constrained`.
pub fn l2_projection(mesh: &Mesh, f: impl Fn(Point) -> f64, constrained: bool) -> Result<FemFunction> {
    let b = assemble_load(mesh, f);
    let free: Vec<usize> = if constrained { mesh.free_vertices() } else { (0..mesh.num_vertices()).collect() };
    let mass = assemble_mass(mesh);
    Ok(FemFunction { coefficients: mass_solve(&mass, &b, &free)? })
}

/// Local P1 L2 projection of `f` on cell `k`, as vertex values.
fn local_projection(mesh: &Mesh, k: usize, f: &impl Fn(usize, Point) -> f64) -> [f64; 3] {
    let geom = ElementGeom::new(mesh, k);
    let nv = geom.nv;
    let rule = simplex_rule(mesh.dim(), PRODUCT_RULE_ORDER).expect("product rule");
    let scale = geom.volume / geom.reference_volume();
    let mut b = [0.0; 3];
    for (p, &w) in rule.points.iter().zip(&rule.weights) {
        let x = geom.map(*p);
        let lam = geom.barycentric(x);
        let fx = f(k, x) * w * scale;
        for i in 0..nv {
            b[i] += fx * lam[i];
        }
    }
    // local mass (1 + δab) vol / ((d+1)(d+2)) has inverse
    // ((d+1)(d+2) / vol) (δab - 1/(d+2))
    let m = nv as f64;
    let total: f64 = b[..nv].iter().sum();
    let mut c = [0.0; 3];
    for i in 0..nv {
        c[i] = m * (m + 1.0) / geom.volume * (b[i] - total / (m + 1.0));
    }
    c
}

/// Quasi-interpolant `J_h f`: the value at each vertex is read off the
/// local L2 projection on its lowest-index incident cell. `f` receives the
/// cell index so that cellwise-defined fields are evaluated consistently.
pub fn quasi_interpolant(mesh: &Mesh, f: impl Fn(usize, Point) -> f64) -> FemFunction {
    let mut coefficients = vec![0.0; mesh.num_vertices()];
    for (v, c) in coefficients.iter_mut().enumerate() {
        let k = *mesh.vertex_cells(v).iter().min().expect("vertex belongs to a cell");
        let local = local_projection(mesh, k, &f);
        let i = mesh.cell(k).iter().position(|&u| u == v).expect("incident");
        *c = local[i];
    }
    FemFunction { coefficients }
}

/// `(‖g‖²_{L2}, |g|²_{H1})` over `cells` for a cellwise field with value and gradient.
fn cell_norms(mesh: &Mesh, cells: &[usize], g: impl Fn(usize, &ElementGeom, Point) -> (f64, Point)) -> (f64, f64) {
    let rule = simplex_rule(mesh.dim(), PRODUCT_RULE_ORDER).expect("product rule");
    let (mut l2, mut h1) = (0.0, 0.0);
    for &k in cells {
        let geom = ElementGeom::new(mesh, k);
        let scale = geom.volume / geom.reference_volume();
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = geom.map(*p);
            let (v, d) = g(k, &geom, x);
            l2 += w * scale * v * v;
            h1 += w * scale * (d[0] * d[0] + d[1] * d[1]);
        }
    }
    (l2, h1)
}

/// `r = ‖η v − J_h(η v)‖_{H^t} / (h^{2−t} ‖v‖_{H1(ω_η)})` for `t` in {0, 1},
/// one value per level. The cutoffs realize the same geometry on each mesh.
pub fn superapprox_ratio(meshes: &[Mesh], functions: &[FemFunction], cutoffs: &[CutoffFunction], t: u32) -> Result<Vec<f64>> {
    if t > 1 {
        return invalid(format!("superapproximation order must be 0 or 1, got {t}"));
    }
    if meshes.len() != functions.len() || meshes.len() != cutoffs.len() {
        return invalid("one function and one cutoff per mesh are required");
    }
    let mut out = Vec::with_capacity(meshes.len());
    for ((mesh, v), eta) in meshes.iter().zip(functions).zip(cutoffs) {
        let product = |k: usize, geom: &ElementGeom, x: Point| -> (f64, Point) {
            let (e, ge) = (eta.values.value_in(mesh, geom, k, x), eta.values.gradient_in(mesh, geom, k));
            let (w, gw) = (v.value_in(mesh, geom, k, x), v.gradient_in(mesh, geom, k));
            (e * w, [e * gw[0] + w * ge[0], e * gw[1] + w * ge[1]])
        };
        let j = quasi_interpolant(mesh, |k, x| product(k, &ElementGeom::new(mesh, k), x).0);
        let all: Vec<usize> = (0..mesh.num_cells()).collect();
        let (l2, h1) = cell_norms(mesh, &all, |k, geom, x| {
            let (p, gp) = product(k, geom, x);
            let gj = j.gradient_in(mesh, geom, k);
            (p - j.value_in(mesh, geom, k, x), [gp[0] - gj[0], gp[1] - gj[1]])
        });
        let numerator = if t == 0 { l2 } else { l2 + h1 };
        let (vl2, vh1) = cell_norms(mesh, &eta.support(mesh), |k, geom, x| (v.value_in(mesh, geom, k, x), v.gradient_in(mesh, geom, k)));
        let denominator = mesh.h_max().powi(2 - t as i32) * (vl2 + vh1).sqrt();
        if denominator == 0.0 {
            return Err(Error::Undefined("function vanishes on the cutoff support".into()));
        }
        out.push(numerator.sqrt() / denominator);
    }
    Ok(out)
}

/// `‖Π f‖_{L2(D0)} / ‖f‖_{L2(Ω)}` for `f` vanishing on `d1 ⊃ d0`, with the
/// projection onto the space with zero boundary values.
pub fn l2_locality_probe(mesh: &Mesh, f: impl Fn(Point) -> f64, d0: &Subdomain, d1: &Subdomain) -> Result<f64> {
    if d0.is_empty() || !d0.elements.iter().all(|&k| d1.contains_element(k)) {
        return invalid("probe region must be a nonempty part of the zero region");
    }
    let inner = d0.vertices(mesh);
    let rim: Vec<usize> = (0..mesh.num_cells()).filter(|&k| !d1.contains_element(k)).flat_map(|k| mesh.cell(k).to_vec()).collect();
    let separation = inner
        .iter()
        .flat_map(|&a| rim.iter().map(move |&b| (a, b)))
        .map(|(a, b)| dist(mesh.vertex(a), mesh.vertex(b)))
        .fold(f64::INFINITY, f64::min);
    if separation < 2.0 * mesh.h_max() {
        return invalid(format!("probe regions are {separation:.3e} apart, below twice the mesh size"));
    }
    let rule = simplex_rule(mesh.dim(), PRODUCT_RULE_ORDER).expect("product rule");
    for &k in &d1.elements {
        let geom = ElementGeom::new(mesh, k);
        let on_cell = mesh.cell_points(k).into_iter().chain(rule.points.iter().map(|p| geom.map(*p)));
        if on_cell.into_iter().any(|x| f(x) != 0.0) {
            return invalid("field does not vanish on the zero region");
        }
    }
    let all: Vec<usize> = (0..mesh.num_cells()).collect();
    let (total, _) = cell_norms(mesh, &all, |_, _, x| (f(x), [0.0; 2]));
    if total == 0.0 {
        return Ok(0.0);
    }
    let p = l2_projection(mesh, &f, true)?;
    let (local, _) = cell_norms(mesh, &d0.elements, |k, geom, x| (p.value_in(mesh, geom, k, x), [0.0; 2]));
    Ok((local / total).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disc_mesh, build_interval_mesh, mark_subdomain, Region};

    #[test]
    fn projection_reproduces_linear_and_constants() {
        let m = build_disc_mesh(8).unwrap();
        let one = l2_projection(&m, |_| 1.0, false).unwrap();
        assert!(one.coefficients.iter().all(|c| (c - 1.0).abs() < 1e-12));
        let lin = |x: Point| 0.3 + 2.0 * x[0] - x[1];
        let p = l2_projection(&m, lin, false).unwrap();
        for (v, c) in p.coefficients.iter().enumerate() {
            assert!((c - lin(m.vertex(v))).abs() < 1e-12);
        }
        let q = quasi_interpolant(&m, |_, x| lin(x));
        for (v, c) in q.coefficients.iter().enumerate() {
            assert!((c - lin(m.vertex(v))).abs() < 1e-12);
        }
    }

    #[test]
    fn local_projection_inverse_mass() {
        let m = build_interval_mesh(4).unwrap();
        let q = quasi_interpolant(&m, |_, x| 2.0 - 3.0 * x[0]);
        for (v, c) in q.coefficients.iter().enumerate() {
            assert!((c - (2.0 - 3.0 * m.vertex(v)[0])).abs() < 1e-13);
        }
    }

    #[test]
    fn cutoff_values_and_layer_check() {
        let m = refine(build_disc_mesh(16).unwrap(), 1);
        let inner = mark_subdomain(&m, &Region::Square { center: [0.0, 0.0], side: 0.4 });
        let outer = mark_subdomain(&m, &Region::Square { center: [0.0, 0.0], side: 1.2 });
        let eta = CutoffFunction::new(&m, &inner, &outer).unwrap();
        for v in inner.vertices(&m) {
            assert_eq!(eta.values.coefficients[v], 1.0);
        }
        assert!(eta.values.coefficients.iter().all(|&c| (0.0..=1.0).contains(&c)));
        assert!(eta.gradient_bound <= 2.0 / eta.layer_width);
        let tight = mark_subdomain(&m, &Region::Square { center: [0.0, 0.0], side: 0.6 });
        assert!(matches!(CutoffFunction::new(&m, &inner, &tight), Err(Error::InvalidArgument(_))));
    }

    fn refine(mut m: Mesh, n: usize) -> Mesh {
        for _ in 0..n {
            m = crate::mesh::refine_uniform(&m, true).unwrap();
        }
        m
    }
}
