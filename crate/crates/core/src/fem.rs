//! Piecewise-linear finite element functions and per-element geometry.

use crate::error::{invalid, Result};
use crate::mesh::{cross, sub, Mesh, Point};
use crate::quadrature::{gauss_legendre01, simplex_rule};

/// Affine geometry of one simplex.
#[derive(Debug, Clone, Copy)]
pub struct ElementGeom {
    pub nv: usize,
    pub verts: [Point; 3],
    /// Gradients of the local hat functions (constant per element).
    pub grads: [Point; 3],
    pub volume: f64,
}

impl ElementGeom {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        let cell = mesh.cell(k);
        let mut verts = [[0.0; 2]; 3];
        for (i, &v) in cell.iter().enumerate() {
            verts[i] = mesh.vertex(v);
        }
        Self::from_points(&verts[..cell.len()])
    }

    pub fn from_points(pts: &[Point]) -> Self {
        let mut verts = [[0.0; 2]; 3];
        verts[..pts.len()].copy_from_slice(pts);
        if pts.len() == 2 {
            let h = verts[1][0] - verts[0][0];
            ElementGeom {
                nv: 2,
                verts,
                grads: [[-1.0 / h, 0.0], [1.0 / h, 0.0], [0.0; 2]],
                volume: h.abs(),
            }
        } else {
            let e1 = sub(verts[1], verts[0]);
            let e2 = sub(verts[2], verts[0]);
            let det = cross(e1, e2);
            // rows of the inverse Jacobian
            let g1 = [e2[1] / det, -e2[0] / det];
            let g2 = [-e1[1] / det, e1[0] / det];
            ElementGeom {
                nv: 3,
                verts,
                grads: [[-g1[0] - g2[0], -g1[1] - g2[1]], g1, g2],
                volume: 0.5 * det.abs(),
            }
        }
    }

    /// Barycentric coordinates of `x` (hat function values for points inside).
    #[inline]
    pub fn barycentric(&self, x: Point) -> [f64; 3] {
        let d = sub(x, self.verts[0]);
        if self.nv == 2 {
            let l1 = d[0] * self.grads[1][0];
            [1.0 - l1, l1, 0.0]
        } else {
            let l1 = self.grads[1][0] * d[0] + self.grads[1][1] * d[1];
            let l2 = self.grads[2][0] * d[0] + self.grads[2][1] * d[1];
            [1.0 - l1 - l2, l1, l2]
        }
    }

    /// Maps reference coordinates to physical coordinates.
    #[inline]
    pub fn map(&self, xh: Point) -> Point {
        if self.nv == 2 {
            [self.verts[0][0] + xh[0] * (self.verts[1][0] - self.verts[0][0]), 0.0]
        } else {
            let v = &self.verts;
            [
                v[0][0] + xh[0] * (v[1][0] - v[0][0]) + xh[1] * (v[2][0] - v[0][0]),
                v[0][1] + xh[0] * (v[1][1] - v[0][1]) + xh[1] * (v[2][1] - v[0][1]),
            ]
        }
    }

    /// Reference volume of the simplex.
    pub fn reference_volume(&self) -> f64 {
        if self.nv == 2 {
            1.0
        } else {
            0.5
        }
    }
}

/// Coefficients of a continuous piecewise-linear function, one per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct FemFunction {
    pub coefficients: Vec<f64>,
}

impl FemFunction {
    pub fn zeros(mesh: &Mesh) -> Self {
        FemFunction { coefficients: vec![0.0; mesh.num_vertices()] }
    }

    pub fn from_coefficients(mesh: &Mesh, coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.len() != mesh.num_vertices() {
            return invalid(format!(
                "coefficient count {} differs from vertex count {}",
                coefficients.len(),
                mesh.num_vertices()
            ));
        }
        Ok(FemFunction { coefficients })
    }

    /// Nodal interpolant of a field given pointwise.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        FemFunction { coefficients: mesh.coords().iter().map(|&p| f(p)).collect() }
    }

    /// Nodal interpolant with boundary coefficients forced to zero.
    pub fn interpolate_zero_boundary(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        let coefficients = (0..mesh.num_vertices())
            .map(|v| if mesh.is_boundary(v) { 0.0 } else { f(mesh.vertex(v)) })
            .collect();
        FemFunction { coefficients }
    }

    #[inline]
    pub fn value_in(&self, mesh: &Mesh, geom: &ElementGeom, k: usize, x: Point) -> f64 {
        let lam = geom.barycentric(x);
        mesh.cell(k).iter().zip(lam).map(|(&v, l)| self.coefficients[v] * l).sum()
    }

    pub fn value(&self, mesh: &Mesh, k: usize, x: Point) -> f64 {
        self.value_in(mesh, &ElementGeom::new(mesh, k), k, x)
    }

    pub fn gradient_in(&self, mesh: &Mesh, geom: &ElementGeom, k: usize) -> Point {
        let mut g = [0.0; 2];
        for (i, &v) in mesh.cell(k).iter().enumerate() {
            g[0] += self.coefficients[v] * geom.grads[i][0];
            g[1] += self.coefficients[v] * geom.grads[i][1];
        }
        g
    }

    pub fn gradient(&self, mesh: &Mesh, k: usize) -> Point {
        self.gradient_in(mesh, &ElementGeom::new(mesh, k), k)
    }

    pub fn add_scaled(&self, alpha: f64, other: &FemFunction) -> FemFunction {
        FemFunction {
            coefficients: self.coefficients.iter().zip(&other.coefficients).map(|(a, b)| a + alpha * b).collect(),
        }
    }
}

/// Geometric grading used near the domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grading {
    pub levels: usize,
    pub ratio: f64,
    pub order: usize,
}

impl Grading {
    /// Breakpoints on `[0, 1]` graded toward 0.
    fn breaks_toward_zero(&self) -> Vec<f64> {
        let mut b = vec![0.0];
        for k in (1..=self.levels).rev() {
            b.push(self.ratio.powi(k as i32));
        }
        b.push(1.0);
        b
    }

    /// Breakpoints on `[0, 1]` graded toward both ends.
    fn breaks_toward_ends(&self) -> Vec<f64> {
        let half: Vec<f64> = self.breaks_toward_zero().iter().map(|t| 0.5 * t).collect();
        let mut b = half.clone();
        for t in half.iter().rev().skip(1) {
            b.push(1.0 - t);
        }
        b
    }
}

/// Quadrature points in physical coordinates with physical weights.
#[derive(Debug, Clone, Default)]
pub struct ElementQuad {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Element rule: plain Gauss of `order` on cells away from the boundary,
/// and a tensor rule graded toward every boundary vertex when `grading` is
/// given and the cell touches the boundary.
///
/// In 2D a touching cell is split at its centroid into three triangles; on
/// each triangle whose base has a boundary end point, the base-normal
/// coordinate is graded toward the base and the tangential coordinate
/// toward both base end points.
pub fn element_rule(mesh: &Mesh, k: usize, order: usize, grading: Option<Grading>) -> ElementQuad {
    let geom = ElementGeom::new(mesh, k);
    let cell = mesh.cell(k);
    let bflags: Vec<bool> = cell.iter().map(|&v| mesh.is_boundary(v)).collect();
    element_rule_for(&geom, &bflags, order, grading)
}

pub fn element_rule_for(geom: &ElementGeom, bflags: &[bool], order: usize, grading: Option<Grading>) -> ElementQuad {
    let mut out = ElementQuad::default();
    let plain = |out: &mut ElementQuad, g: &ElementGeom| {
        let rule = simplex_rule(if g.nv == 2 { 1 } else { 2 }, order).expect("valid element rule order");
        let scale = g.volume / g.reference_volume();
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            out.points.push(g.map(*p));
            out.weights.push(w * scale);
        }
    };
    let grading = match grading {
        Some(gr) if bflags.iter().any(|&b| b) => gr,
        _ => {
            plain(&mut out, geom);
            return out;
        }
    };
    let (gx, gw) = gauss_legendre01(grading.order);
    if geom.nv == 2 {
        let (a, b) = (geom.verts[0][0], geom.verts[1][0]);
        let breaks = match (bflags[0], bflags[1]) {
            (true, true) => grading.breaks_toward_ends(),
            (true, false) => grading.breaks_toward_zero(),
            _ => grading.breaks_toward_zero().iter().rev().map(|t| 1.0 - t).collect(),
        };
        for w in breaks.windows(2) {
            for (&t, &wt) in gx.iter().zip(&gw) {
                let u = w[0] + (w[1] - w[0]) * t;
                out.points.push([a + u * (b - a), 0.0]);
                out.weights.push(wt * (w[1] - w[0]) * (b - a).abs());
            }
        }
        return out;
    }
    let v = &geom.verts;
    let c = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
    for i in 0..3 {
        let (a, b) = (v[i], v[(i + 1) % 3]);
        let sub_geom = ElementGeom::from_points(&[a, b, c]);
        if !(bflags[i] || bflags[(i + 1) % 3]) {
            plain(&mut out, &sub_geom);
            continue;
        }
        // x = (1-t)(1-u) a + (1-t) u b + t c, |J| = 2 |T_sub| (1 - t)
        let tb = grading.breaks_toward_zero();
        let ub = match (bflags[i], bflags[(i + 1) % 3]) {
            (true, true) => grading.breaks_toward_ends(),
            (true, false) => grading.breaks_toward_zero(),
            _ => grading.breaks_toward_zero().iter().rev().map(|t| 1.0 - t).collect(),
        };
        let jac = 2.0 * sub_geom.volume;
        for tw in tb.windows(2) {
            for (&tt, &wt) in gx.iter().zip(&gw) {
                let t = tw[0] + (tw[1] - tw[0]) * tt;
                let wt = wt * (tw[1] - tw[0]);
                for uw in ub.windows(2) {
                    for (&uu, &wu) in gx.iter().zip(&gw) {
                        let u = uw[0] + (uw[1] - uw[0]) * uu;
                        let wu = wu * (uw[1] - uw[0]);
                        let p = [
                            (1.0 - t) * ((1.0 - u) * a[0] + u * b[0]) + t * c[0],
                            (1.0 - t) * ((1.0 - u) * a[1] + u * b[1]) + t * c[1],
                        ];
                        out.points.push(p);
                        out.weights.push(wt * wu * jac * (1.0 - t));
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disc_mesh, build_interval_mesh};

    #[test]
    fn hat_gradients_and_barycentrics() {
        let g = ElementGeom::from_points(&[[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]);
        assert!((g.volume - 1.0).abs() < 1e-15);
        let lam = g.barycentric([0.5, 0.25]);
        assert!((lam[0] - 0.5).abs() < 1e-15 && (lam[1] - 0.25).abs() < 1e-15 && (lam[2] - 0.25).abs() < 1e-15);
        let sum: Point = [g.grads.iter().map(|v| v[0]).sum(), g.grads.iter().map(|v| v[1]).sum()];
        assert!(sum[0].abs() < 1e-15 && sum[1].abs() < 1e-15);
    }

    #[test]
    fn evaluation_is_affine_and_nodal() {
        let m = build_disc_mesh(8).unwrap();
        let f = FemFunction::interpolate(&m, |p| 1.0 + 2.0 * p[0] - p[1]);
        for k in 0..m.num_cells() {
            let g = ElementGeom::new(&m, k);
            let c = m.centroid(k);
            assert!((f.value_in(&m, &g, k, c) - (1.0 + 2.0 * c[0] - c[1])).abs() < 1e-13);
            let gr = f.gradient_in(&m, &g, k);
            assert!((gr[0] - 2.0).abs() < 1e-12 && (gr[1] + 1.0).abs() < 1e-12);
            for (i, &v) in m.cell(k).iter().enumerate() {
                assert!((f.value_in(&m, &g, k, g.verts[i]) - f.coefficients[v]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn graded_rules_integrate_polynomials() {
        let grading = Some(Grading { levels: 6, ratio: 0.25, order: 4 });
        let m = build_disc_mesh(8).unwrap();
        for k in 0..m.num_cells() {
            let q = element_rule(&m, k, 4, grading);
            let area: f64 = q.weights.iter().sum();
            assert!((area - m.volume(k)).abs() < 1e-14);
            let g = ElementGeom::new(&m, k);
            let lin: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0]).sum();
            let cx = (g.verts[0][0] + g.verts[1][0] + g.verts[2][0]) / 3.0;
            assert!((lin - cx * m.volume(k)).abs() < 1e-14);
        }
        let m = build_interval_mesh(4).unwrap();
        for k in 0..4 {
            let q = element_rule(&m, k, 4, grading);
            let v: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w * p[0] * p[0]).sum();
            let (a, b) = (m.vertex(k)[0], m.vertex(k + 1)[0]);
            assert!((v - (b.powi(3) - a.powi(3)) / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn graded_rule_resolves_boundary_singularity() {
        // int_0^1 t^{-1/2} dt = 2 on the interval [0, 1] with 0 a boundary point
        let m = crate::mesh::Mesh::from_parts(1, vec![[0.0, 0.0], [1.0, 0.0]], vec![0, 1], vec![true, false]).unwrap();
        let q = element_rule(&m, 0, 6, Some(Grading { levels: 30, ratio: 0.25, order: 8 }));
        let v: f64 = q.points.iter().zip(&q.weights).map(|(p, w)| w / p[0].sqrt()).sum();
        assert!((v - 2.0).abs() < 1e-8, "{v}");
    }
}
