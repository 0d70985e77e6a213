//! Quadrature on reference simplices and on pairs of reference simplices.
//!
//! Singular pair rules use a Duffy-type cone decomposition about the
//! coincidence set `x = y`. For a touching pair, the variables that vanish
//! on the coincidence set are written as `z = r q`, with `q` on a finite
//! set of flat facets and `r` in `[0, 1]`. Any remaining coordinates (the
//! position along a shared edge, or inside an identical element) form a
//! fiber whose length is `1 - r` (per dimension). The radial integral uses
//! Gauss-Jacobi nodes matched to the `r^{n-1+beta}` behaviour, where
//! `beta = 2 - dim - 2s` is the homogeneity of
//! `(u(x)-u(y))(v(x)-v(y)) / |x-y|^{dim+2s}` for piecewise-linear `u, v`.
//!
//! Reference cells: the unit interval `[0, 1]` in 1D and the triangle
//! `(0,0), (1,0), (0,1)` in 2D. Coordinates are stored as `[f64; 2]`; the
//! second component is zero in 1D.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::mesh::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

/// Gauss-Jacobi nodes and weights on `[0, 1]` for the weight `r^alpha`,
/// computed by the Golub-Welsch algorithm.
pub fn gauss_jacobi(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && alpha > -1.0);
    // Jacobi polynomials on [-1, 1] with weight (1-x)^a (1+x)^b, a = 0, b = alpha.
    let a = 0.0;
    let b = alpha;
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        let kf = k as f64;
        let diag = if k == 0 {
            (b - a) / (a + b + 2.0)
        } else {
            let t = 2.0 * kf + a + b;
            (b * b - a * a) / (t * (t + 2.0))
        };
        jac[(k, k)] = diag;
        if k + 1 < n {
            let m = kf + 1.0;
            let t = 2.0 * m + a + b;
            let beta = 4.0 * m * (m + a) * (m + b) * (m + a + b) / (t * t * (t + 1.0) * (t - 1.0));
            let off = beta.sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(jac);
    // total mass of r^alpha on [0,1]
    let mu0 = 1.0 / (alpha + 1.0);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let x = eig.eigenvalues[k];
            let v0 = eig.eigenvectors[(0, k)];
            (0.5 * (x + 1.0), mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = 0.5 * (1.0 - x);
        xs[n - 1 - i] = 0.5 * (1.0 + x);
        ws[i] = 0.5 * w;
        ws[n - 1 - i] = 0.5 * w;
    }
    if n % 2 == 1 {
        xs[n / 2] = 0.5;
    }
    (xs, ws)
}

/// Gauss-Legendre rule with `order` points on `[0, 1]`.
pub fn gauss_interval(order: usize) -> Result<QuadRule> {
    if !(1..=30).contains(&order) {
        return invalid(format!("interval rule order must be in 1..=30, got {order}"));
    }
    let (x, w) = gauss_legendre01(order);
    Ok(QuadRule {
        points: x.into_iter().map(|t| [t, 0.0]).collect(),
        weights: w,
        exactness_degree: 2 * order - 1,
    })
}

/// Collapsed tensor rule with `n` points per direction on the reference
/// triangle; exact for total degree `2n - 1`.
pub fn collapsed_triangle(n: usize) -> QuadRule {
    let (gx, gw) = gauss_legendre01(n);
    let (jx, jw) = gauss_jacobi(n, 1.0);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for (&t, &wt) in jx.iter().zip(&jw) {
        let u = 1.0 - t;
        for (&v, &wv) in gx.iter().zip(&gw) {
            points.push([u, v * t]);
            weights.push(wt * wv);
        }
    }
    QuadRule { points, weights, exactness_degree: 2 * n - 1 }
}

/// Fully symmetric rule from a centroid weight and `(a, w)` orbits with
/// barycentric points `(a, a, 1-2a)`; weights are normalized to area 1.
fn symmetric_triangle(centroid: &[f64], orbits: &[(f64, f64)], degree: usize) -> QuadRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for &w in centroid {
        points.push([1.0 / 3.0, 1.0 / 3.0]);
        weights.push(w / 2.0);
    }
    for &(a, w) in orbits {
        let b = 1.0 - 2.0 * a;
        for p in [[a, a], [a, b], [b, a]] {
            points.push(p);
            weights.push(w / 2.0);
        }
    }
    QuadRule { points, weights, exactness_degree: degree }
}

/// Rule on the reference triangle exact for total degree at least `order`.
pub fn gauss_triangle(order: usize) -> Result<QuadRule> {
    match order {
        1 => Ok(QuadRule { points: vec![[1.0 / 3.0, 1.0 / 3.0]], weights: vec![0.5], exactness_degree: 1 }),
        2 => Ok(QuadRule {
            points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            weights: vec![1.0 / 6.0; 3],
            exactness_degree: 2,
        }),
        3 | 4 => Ok(symmetric_triangle(&[], &[(0.445948490915965, 0.223381589678011), (0.091576213509771, 0.109951743655322)], 4)),
        5 => Ok(symmetric_triangle(&[0.225], &[(0.470142064105115, 0.132394152788506), (0.101286507323456, 0.125939180544827)], 5)),
        6..=20 => Ok(collapsed_triangle(order / 2 + 1)),
        _ => invalid(format!("triangle rule order must be in 1..=20, got {order}")),
    }
}

/// Rule on the reference simplex of the given dimension with `order`
/// meaning "points" in 1D and "exactness degree" in 2D.
pub fn simplex_rule(dim: usize, order: usize) -> Result<QuadRule> {
    match dim {
        1 => gauss_interval(order),
        2 => gauss_triangle(order),
        _ => invalid(format!("unsupported dimension {dim}")),
    }
}

/// Element-pair configuration, classified by the number of shared vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairCase {
    Identical,
    SharedEdge,
    SharedVertex,
    Disjoint,
}

impl PairCase {
    pub fn from_shared(dim: usize, shared: usize) -> Self {
        match (dim, shared) {
            (_, 0) => PairCase::Disjoint,
            (1, 1) | (2, 1) => PairCase::SharedVertex,
            (2, 2) => PairCase::SharedEdge,
            _ => PairCase::Identical,
        }
    }
}

/// Point counts of the three factors of a singular pair rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairOrders {
    /// Gauss points per direction on the cone facets.
    pub facet: usize,
    /// Gauss-Jacobi points in the radial variable.
    pub radial: usize,
    /// Gauss points per direction along the fiber.
    pub fiber: usize,
}

impl PairOrders {
    pub fn uniform(order: usize) -> Self {
        PairOrders { facet: order, radial: order, fiber: order }
    }
}

/// Quadrature on `T̂ × T̂` for one pair configuration.
///
/// Shared vertices sit at fixed reference positions: for `SharedVertex`
/// both cells share reference vertex 0, for `SharedEdge` reference
/// vertices 0 and 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PairQuadRule {
    pub case: PairCase,
    pub dim: usize,
    pub points: Vec<(Point, Point)>,
    pub weights: Vec<f64>,
    pub order: usize,
}

impl PairQuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Point, Point) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&(x, y), &w)| w * f(x, y)).sum()
    }
}

/// Pair rule with the same point count in every factor.
pub fn singular_pair_rule(case: PairCase, order: usize, s: f64, dim: usize) -> Result<PairQuadRule> {
    pair_rule_with(case, PairOrders::uniform(order), s, dim)
}

/// A facet of a cone: `q(p) = origin + sum_j p_j * axis_j` for `p` in a
/// reference cell, together with `|det[q, dq/dp]|` which is constant on a
/// flat facet not containing the apex.
struct Facet<const N: usize> {
    origin: [f64; N],
    axes: Vec<[f64; N]>,
    cell: FacetCell,
    jac: f64,
}

#[derive(Clone, Copy)]
enum FacetCell {
    Point,
    Segment,
    Square,
    Triangle,
    /// segment (first parameter) times triangle (second and third)
    Prism,
}

fn facet_params(cell: FacetCell, n: usize) -> Vec<(Vec<f64>, f64)> {
    let (gx, gw) = gauss_legendre01(n);
    match cell {
        FacetCell::Point => vec![(vec![], 1.0)],
        FacetCell::Segment => gx.iter().zip(&gw).map(|(&x, &w)| (vec![x], w)).collect(),
        FacetCell::Square => {
            let mut out = Vec::new();
            for (&a, &wa) in gx.iter().zip(&gw) {
                for (&b, &wb) in gx.iter().zip(&gw) {
                    out.push((vec![a, b], wa * wb));
                }
            }
            out
        }
        FacetCell::Triangle => {
            let t = collapsed_triangle(n);
            t.points.iter().zip(&t.weights).map(|(p, &w)| (vec![p[0], p[1]], w)).collect()
        }
        FacetCell::Prism => {
            let t = collapsed_triangle(n);
            let mut out = Vec::new();
            for (&a, &wa) in gx.iter().zip(&gw) {
                for (p, &w) in t.points.iter().zip(&t.weights) {
                    out.push((vec![a, p[0], p[1]], wa * w));
                }
            }
            out
        }
    }
}

impl<const N: usize> Facet<N> {
    fn new(origin: [f64; N], axes: Vec<[f64; N]>, cell: FacetCell) -> Self {
        let mut m = DMatrix::<f64>::zeros(N, N);
        for i in 0..N {
            m[(i, 0)] = origin[i];
            for (j, ax) in axes.iter().enumerate() {
                m[(i, j + 1)] = ax[i];
            }
        }
        let jac = m.determinant().abs();
        Facet { origin, axes, cell, jac }
    }

    fn at(&self, p: &[f64]) -> [f64; N] {
        let mut q = self.origin;
        for (ax, &pj) in self.axes.iter().zip(p) {
            for i in 0..N {
                q[i] += pj * ax[i];
            }
        }
        q
    }
}

/// Emits the cone quadrature: for every facet point `q` with weight `wq`
/// and radial node `r`, calls `emit(r, q, weight)` where `weight` already
/// contains the facet Jacobian, the radial Jacobi weight divided by
/// `r^beta`, and `r^{n-1}` through the Jacobi weight.
fn cone<const N: usize>(
    facets: &[Facet<N>],
    orders: PairOrders,
    beta: f64,
    mut emit: impl FnMut(f64, [f64; N], f64),
) {
    let alpha = N as f64 - 1.0 + beta;
    let (rx, rw) = gauss_jacobi(orders.radial, alpha);
    for f in facets {
        for (p, wp) in facet_params(f.cell, orders.facet) {
            let q = f.at(&p);
            for (&r, &wr) in rx.iter().zip(&rw) {
                emit(r, q, f.jac * wp * wr * r.powf(-beta));
            }
        }
    }
}

/// Pair rule with independent point counts per factor.
pub fn pair_rule_with(case: PairCase, orders: PairOrders, s: f64, dim: usize) -> Result<PairQuadRule> {
    if !(s > 0.0 && s < 1.0) {
        return invalid(format!("fractional order must lie in (0,1), got {s}"));
    }
    if orders.facet == 0 || orders.radial == 0 || orders.fiber == 0 {
        return invalid("pair rule orders must be positive");
    }
    let beta = 2.0 - dim as f64 - 2.0 * s;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let (fx, fw) = gauss_legendre01(orders.fiber);
    match (dim, case) {
        (1, PairCase::Identical) => {
            // z = y - x in [-1, 1]; x ranges over an interval of length 1 - |z|
            let facets = [
                Facet::new([1.0], vec![], FacetCell::Point),
                Facet::new([-1.0], vec![], FacetCell::Point),
            ];
            cone(&facets, orders, beta, |r, q, w| {
                let z = r * q[0];
                let lo = (-z).max(0.0);
                for (&t, &wt) in fx.iter().zip(&fw) {
                    let x = lo + (1.0 - r) * t;
                    points.push(([x, 0.0], [x + z, 0.0]));
                    weights.push(w * (1.0 - r) * wt);
                }
            });
        }
        (1, PairCase::SharedVertex) => {
            // (x, y) in [0,1]^2 with the shared point at the origin of both
            let facets = [
                Facet::new([1.0, 0.0], vec![[0.0, 1.0]], FacetCell::Segment),
                Facet::new([0.0, 1.0], vec![[1.0, 0.0]], FacetCell::Segment),
            ];
            cone(&facets, orders, beta, |r, q, w| {
                points.push(([r * q[0], 0.0], [r * q[1], 0.0]));
                weights.push(w);
            });
        }
        (2, PairCase::Identical) => {
            // z = y - x ranges over the difference hexagon of the triangle;
            // x ranges over a homothetic copy scaled by 1 - r.
            let hex: [[f64; 2]; 6] = [[1.0, 0.0], [0.0, 1.0], [-1.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, -1.0]];
            let facets: Vec<Facet<2>> = (0..6)
                .map(|k| {
                    let a = hex[k];
                    let b = hex[(k + 1) % 6];
                    Facet::new(a, vec![[b[0] - a[0], b[1] - a[1]]], FacetCell::Segment)
                })
                .collect();
            let fiber = collapsed_triangle(orders.fiber);
            cone(&facets, orders, beta, |r, q, w| {
                let z = [r * q[0], r * q[1]];
                let mu1 = (-z[0]).max(0.0);
                let mu2 = (-z[1]).max(0.0);
                let scale = 1.0 - r;
                for (p, &wt) in fiber.points.iter().zip(&fiber.weights) {
                    let x = [mu1 + scale * p[0], mu2 + scale * p[1]];
                    points.push((x, [x[0] + z[0], x[1] + z[1]]));
                    weights.push(w * scale * scale * wt);
                }
            });
        }
        (2, PairCase::SharedEdge) => {
            // x = (sigma, tau), y = (sigma - d, tau'), z = (d, tau, tau')
            let facets = [
                Facet::new([0.0, 1.0, 0.0], vec![[1.0, -1.0, 0.0], [0.0, 0.0, 1.0]], FacetCell::Square),
                Facet::new([0.0, 0.0, 1.0], vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], FacetCell::Triangle),
                Facet::new([0.0, 1.0, 0.0], vec![[-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], FacetCell::Triangle),
                Facet::new([0.0, 0.0, 1.0], vec![[-1.0, 0.0, -1.0], [0.0, 1.0, 0.0]], FacetCell::Square),
            ];
            cone(&facets, orders, beta, |r, q, w| {
                let (d, tau, taup) = (r * q[0], r * q[1], r * q[2]);
                let lo = d.max(0.0);
                for (&t, &wt) in fx.iter().zip(&fw) {
                    let sigma = lo + (1.0 - r) * t;
                    points.push(([sigma, tau], [sigma - d, taup]));
                    weights.push(w * (1.0 - r) * wt);
                }
            });
        }
        (2, PairCase::SharedVertex) => {
            let facets = [
                Facet::new(
                    [1.0, 0.0, 0.0, 0.0],
                    vec![[-1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]],
                    FacetCell::Prism,
                ),
                Facet::new(
                    [0.0, 0.0, 1.0, 0.0],
                    vec![[0.0, 0.0, -1.0, 1.0], [1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]],
                    FacetCell::Prism,
                ),
            ];
            cone(&facets, orders, beta, |r, q, w| {
                points.push(([r * q[0], r * q[1]], [r * q[2], r * q[3]]));
                weights.push(w);
            });
        }
        (1 | 2, PairCase::Disjoint) => {
            let rule = simplex_rule(dim, orders.facet)?;
            for (&p, &wp) in rule.points.iter().zip(&rule.weights) {
                for (&q, &wq) in rule.points.iter().zip(&rule.weights) {
                    points.push((p, q));
                    weights.push(wp * wq);
                }
            }
        }
        _ => {
            return Err(Error::InvalidArgument(format!("unsupported pair case {case:?} in dimension {dim}")));
        }
    }
    Ok(PairQuadRule { case, dim, points, weights, order: orders.facet })
}

/// Ratio between successive cells of the geometric grading.
pub const EDGE_GRADING: f64 = 0.5;

/// Composite Gauss rule on `[0, 1]` graded geometrically toward `t = 0`,
/// for integrands with a near-singularity at distance
/// `distance_ratio` (relative to the unit length) from `t = 0`.
pub fn adaptive_edge_rule(distance_ratio: f64, base_order: usize) -> Result<QuadRule> {
    if !(distance_ratio > 0.0) {
        return invalid(format!("distance ratio must be positive, got {distance_ratio}"));
    }
    let base = gauss_interval(base_order)?;
    if distance_ratio >= 1.0 {
        return Ok(base);
    }
    let levels = (distance_ratio.ln() / EDGE_GRADING.ln()).ceil().max(1.0) as i32;
    let mut breaks = vec![0.0];
    for k in (1..=levels).rev() {
        breaks.push(EDGE_GRADING.powi(k));
    }
    breaks.push(1.0);
    breaks.dedup();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for win in breaks.windows(2) {
        let (a, b) = (win[0], win[1]);
        for (p, &w) in base.points.iter().zip(&base.weights) {
            points.push([a + (b - a) * p[0], 0.0]);
            weights.push((b - a) * w);
        }
    }
    Ok(QuadRule { points, weights, exactness_degree: base.exactness_degree })
}
