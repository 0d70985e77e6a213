//! Reference values shared by the integration tests.
//!
//! In 1D the stiffness is exact: `φi''` is a sum of point masses and the
//! operator is the fourth derivative of `G(x) ∝ |x|^{3-2s}`, so
//! `a(φi, φj) = Σ wa wb G(xa - xb)`.
//!
//! In 2D the form is an integral over `x ∈ Ω` of
//! `∫_{R^2} (φi(x)-φi(y))(φj(x)-φj(y)) |x-y|^{-2-2s} dy`, plus the same
//! complement term once more for `x` outside `Ω`. The inner integral is
//! taken in polar coordinates about `x`: along each ray the hat functions
//! are piecewise linear, so the radial integral has a closed form on each
//! mesh segment and on the exterior tail. The angular integral between
//! vertex directions and the outer integral over each cell, split at its
//! centroid, use tanh-sinh rules, which absorb the endpoint singularities
//! along mesh edges.

#![allow(dead_code)]

use fraclap::mesh::Mesh;
use std::f64::consts::PI;

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Normalization constant through the reflection formula for `Γ(-s)`.
pub fn constant_by_reflection(dim: usize, s: f64) -> f64 {
    let gneg = -PI / (s * (PI * s).sin() * gamma(s));
    let d = dim as f64;
    -(2f64).powf(2.0 * s) * gamma(s + d / 2.0) / (PI.powf(d / 2.0) * gneg)
}

/// Tanh-sinh nodes and weights on `[0, 1]` with `2m + 1` points, as
/// `(x, 1 - x, w)` so that both endpoint distances keep full precision.
pub fn tanh_sinh(m: usize) -> Vec<(f64, f64, f64)> {
    let h = 2.8 / m as f64;
    (-(m as i64)..=m as i64)
        .map(|k| {
            let t = k as f64 * h;
            let u = 0.5 * PI * t.sinh();
            let x = 1.0 / (1.0 + (-2.0 * u).exp());
            let y = 1.0 / (1.0 + (2.0 * u).exp());
            let w = h * 0.5 * PI * t.cosh() * x * y * 2.0;
            (x, y, w)
        })
        .collect()
}

/// Exact 1D stiffness over the free vertices of an interval mesh.
fn interval_stiffness(mesh: &Mesh, s: f64) -> Vec<f64> {
    let mut xs: Vec<f64> = mesh.coords().iter().map(|p| p[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let c = constant_by_reflection(1, s);
    let e = 1.0 - 2.0 * s;
    let scale = -c / ((3.0 - 2.0 * s) * (2.0 - 2.0 * s) * (-2.0 * s));
    // |x|^{3-2s} minus the cubic-free part x², stable at s = 1/2
    let g = |x: f64| -> f64 {
        if x == 0.0 {
            return 0.0;
        }
        let l = x.abs().ln();
        let f = if e.abs() < 1e-12 { l } else { (e * l).exp_m1() / e };
        scale * x * x * f
    };
    // second derivative of the hat at interior node i as point masses
    let masses = |i: usize| -> [(f64, f64); 3] {
        let (hl, hr) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
        [(xs[i - 1], 1.0 / hl), (xs[i], -1.0 / hl - 1.0 / hr), (xs[i + 1], 1.0 / hr)]
    };
    let free: Vec<usize> = mesh.free_vertices().iter().map(|&v| xs.iter().position(|&x| x == mesh.coords()[v][0]).unwrap()).collect();
    let n = free.len();
    let mut k = vec![0.0; n * n];
    for (r, &i) in free.iter().enumerate() {
        for (q, &j) in free.iter().enumerate() {
            let mut v = 0.0;
            for (xa, wa) in masses(i) {
                for (xb, wb) in masses(j) {
                    v += wa * wb * g(xa - xb);
                }
            }
            k[r * n + q] = v;
        }
    }
    k
}

struct View {
    dim: usize,
    verts: Vec<[f64; 2]>,
    cells: Vec<Vec<usize>>,
    edges: Vec<(usize, usize, bool)>,
    free: Vec<usize>,
}

impl View {
    fn new(mesh: &Mesh) -> Self {
        let dim = mesh.dim();
        let verts = mesh.coords().to_vec();
        let cells: Vec<Vec<usize>> = (0..mesh.num_cells()).map(|k| mesh.cell(k).to_vec()).collect();
        let mut edges = Vec::new();
        if dim == 2 {
            let mut all: Vec<(usize, usize)> = Vec::new();
            for c in &cells {
                for i in 0..3 {
                    let (a, b) = (c[i], c[(i + 1) % 3]);
                    all.push((a.min(b), a.max(b)));
                }
            }
            all.sort();
            let mut i = 0;
            while i < all.len() {
                let mut j = i;
                while j < all.len() && all[j] == all[i] {
                    j += 1;
                }
                edges.push((all[i].0, all[i].1, j - i == 1));
                i = j;
            }
        }
        let free = mesh.free_vertices();
        View { dim, verts, cells, edges, free }
    }

    fn bary(&self, c: &[usize], x: [f64; 2]) -> [f64; 3] {
        let v = |i: usize| self.verts[c[i]];
        if self.dim == 1 {
            let t = (x[0] - v(0)[0]) / (v(1)[0] - v(0)[0]);
            [1.0 - t, t, 0.0]
        } else {
            let (a, b, cc) = (v(0), v(1), v(2));
            let det = (b[0] - a[0]) * (cc[1] - a[1]) - (cc[0] - a[0]) * (b[1] - a[1]);
            let l1 = ((x[0] - a[0]) * (cc[1] - a[1]) - (cc[0] - a[0]) * (x[1] - a[1])) / det;
            let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
            [1.0 - l1 - l2, l1, l2]
        }
    }

    fn locate(&self, x: [f64; 2]) -> Option<usize> {
        let mut best = None;
        let mut best_min = -1e-9;
        for (k, c) in self.cells.iter().enumerate() {
            let l = self.bary(c, x);
            let m = l[..self.dim + 1].iter().cloned().fold(f64::INFINITY, f64::min);
            if m > best_min {
                best_min = m;
                best = Some(k);
            }
        }
        best
    }

    /// Free hat values at `x` evaluated with the affine map of cell `k`.
    fn hats_in(&self, k: usize, x: [f64; 2], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let c = &self.cells[k];
        let l = self.bary(c, x);
        for (i, &v) in c.iter().enumerate() {
            if let Some(r) = self.free.iter().position(|&f| f == v) {
                out[r] = l[i];
            }
        }
    }

    /// Crossing distances of the ray `x + r d` with mesh facets, and the
    /// exit distance.
    fn breakpoints(&self, x: [f64; 2], d: [f64; 2]) -> (Vec<f64>, f64) {
        let mut rs = Vec::new();
        let mut exit: f64 = 0.0;
        if self.dim == 1 {
            for v in &self.verts {
                let r = (v[0] - x[0]) * d[0];
                if r > 0.0 {
                    rs.push(r);
                }
            }
            exit = rs.iter().cloned().fold(0.0, f64::max);
        } else {
            for &(a, b, bnd) in &self.edges {
                let p = self.verts[a];
                let q = self.verts[b];
                let e = [q[0] - p[0], q[1] - p[1]];
                let den = d[0] * (-e[1]) - d[1] * (-e[0]);
                if den.abs() < 1e-300 {
                    continue;
                }
                let w = [p[0] - x[0], p[1] - x[1]];
                let r = (w[0] * (-e[1]) - w[1] * (-e[0])) / den;
                let t = (d[0] * w[1] - d[1] * w[0]) / den;
                if r > 0.0 && (-1e-12..=1.0 + 1e-12).contains(&t) {
                    rs.push(r);
                    if bnd {
                        exit = exit.max(r);
                    }
                }
            }
        }
        rs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rs.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * b.abs().max(1e-300));
        rs.retain(|&r| r <= exit * (1.0 + 1e-13));
        (rs, exit)
    }

    /// Radial integrals along one ray for all free pairs, row-major.
    fn ray(&self, x: [f64; 2], d: [f64; 2], s: f64, hx: &[f64], out: &mut [f64]) {
        let n = self.free.len();
        let (rs, exit) = self.breakpoints(x, d);
        let mut lo = 0.0;
        let mut da = vec![0.0; n];
        let mut db = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mk = |k: f64, a: f64, b: f64| -> f64 {
            let e = k - 2.0 * s;
            if e.abs() < 1e-14 {
                (b / a).ln()
            } else {
                (b.powf(e) - a.powf(e)) / e
            }
        };
        for &hi in &rs {
            if hi <= lo {
                continue;
            }
            let mid = [x[0] + 0.5 * (lo + hi) * d[0], x[1] + 0.5 * (lo + hi) * d[1]];
            let k = self.locate(mid).expect("ray segment inside the mesh");
            self.hats_in(k, [x[0] + lo * d[0], x[1] + lo * d[1]], &mut h);
            for i in 0..n {
                da[i] = hx[i] - h[i];
            }
            self.hats_in(k, [x[0] + hi * d[0], x[1] + hi * d[1]], &mut h);
            for i in 0..n {
                db[i] = hx[i] - h[i];
            }
            if lo == 0.0 {
                let m2 = hi.powf(2.0 - 2.0 * s) / (2.0 - 2.0 * s);
                for i in 0..n {
                    let bi = db[i] / hi;
                    for j in 0..n {
                        out[i * n + j] += bi * (db[j] / hi) * m2;
                    }
                }
            } else {
                let (m0, m1, m2) = (mk(0.0, lo, hi), mk(1.0, lo, hi), mk(2.0, lo, hi));
                for i in 0..n {
                    let bi = (db[i] - da[i]) / (hi - lo);
                    let ai = da[i] - bi * lo;
                    for j in 0..n {
                        let bj = (db[j] - da[j]) / (hi - lo);
                        let aj = da[j] - bj * lo;
                        out[i * n + j] += ai * aj * m0 + (ai * bj + bi * aj) * m1 + bi * bj * m2;
                    }
                }
            }
            lo = hi;
        }
        // exterior tail, counted twice for the complement-times-domain part
        let tail = 2.0 * exit.powf(-2.0 * s) / (2.0 * s);
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] += hx[i] * hx[j] * tail;
            }
        }
    }

    /// Full inner integral over all directions at `x` in cell `k`.
    fn inner(&self, x: [f64; 2], k: usize, s: f64, rule: &[(f64, f64, f64)]) -> Vec<f64> {
        let n = self.free.len();
        let mut hx = vec![0.0; n];
        self.hats_in(k, x, &mut hx);
        let mut th: Vec<f64> = self.verts.iter().map(|v| (v[1] - x[1]).atan2(v[0] - x[0])).collect();
        th.sort_by(|a, b| a.partial_cmp(b).unwrap());
        th.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
        th.push(th[0] + 2.0 * PI);
        let mut out = vec![0.0; n * n];
        let mut tmp = vec![0.0; n * n];
        for win in th.windows(2) {
            let (a, b) = (win[0], win[1]);
            for &(p, q, w) in rule {
                let t = if p < 0.5 { a + (b - a) * p } else { b - (b - a) * q };
                tmp.iter_mut().for_each(|v| *v = 0.0);
                self.ray(x, [t.cos(), t.sin()], s, &hx, &mut tmp);
                for (o, v) in out.iter_mut().zip(&tmp) {
                    *o += w * (b - a) * v;
                }
            }
        }
        out
    }
}

/// Reference stiffness matrix over `mesh.free_vertices()`, row-major.
///
/// `resolution` sets the number of tanh-sinh points per direction in 2D;
/// the 1D values are exact.
pub fn oracle_stiffness(mesh: &Mesh, s: f64, resolution: usize) -> Vec<f64> {
    if mesh.dim() == 1 {
        return interval_stiffness(mesh, s);
    }
    let view = View::new(mesh);
    let n = view.free.len();
    let c = constant_by_reflection(2, s);
    let rule = tanh_sinh(resolution);
    let mut total = vec![0.0; n * n];
    for (k, cell) in view.cells.iter().enumerate() {
        let v: Vec<[f64; 2]> = cell.iter().map(|&i| view.verts[i]).collect();
        let g = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
        for e in 0..3 {
            let (pa, pb) = (v[e], v[(e + 1) % 3]);
            let det = ((pb[0] - pa[0]) * (g[1] - pa[1]) - (pb[1] - pa[1]) * (g[0] - pa[0])).abs();
            for &(tx, ty, tw) in &rule {
                // t is the distance fraction from the edge toward the centroid
                for &(ux, uy, uw) in &rule {
                    let base = [uy * pa[0] + ux * pb[0], uy * pa[1] + ux * pb[1]];
                    let x = [ty * base[0] + tx * g[0], ty * base[1] + tx * g[1]];
                    let w = tw * uw * ty * det;
                    let val = view.inner(x, k, s, &rule);
                    for (o, p) in total.iter_mut().zip(val) {
                        *o += w * p;
                    }
                }
            }
        }
    }
    total.iter().map(|v| 0.5 * c * v).collect()
}
