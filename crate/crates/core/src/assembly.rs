//! Assembly of the dense stiffness matrix of the fractional Laplacian, the
//! load vector and the mass matrix for continuous P1 elements.
//!
//! For zero-extended hat functions the form splits as
//!
//! ```text
//! a(φi, φj) = C/2 Σ_{T,T'} ∬_{T×T'} Di Dj k  +  C ∫_Ω φi φj ρ_c
//! ```
//!
//! with `Di = φi(x) - φi(y)`, `k = |x-y|^{-d-2s}` and `ρ_c(x)` the kernel
//! integrated over the complement of `Ω`. Pairs of cells that touch are
//! integrated with the singular cone rules. For a cell `T` with patch `P_T`
//! (all cells touching it), the `φi(x) φj(x)` parts of every disjoint pair
//! are combined with the complement term into
//! `C ∫_T φi φj ρ_{P_T}`, where `ρ_{P_T}(x)` integrates the kernel over the
//! complement of the patch. That integral is evaluated through the
//! divergence theorem as a sum over the patch boundary edges. Only the
//! cross parts `-C ∬ φi(x) φj(y) k` remain for disjoint pairs, which have a
//! smooth integrand.
//!
//! Cells are processed in fixed-size waves. Each cell fills a private strip
//! of rows; strips are added to the matrix sequentially in cell order, so
//! the floating-point result does not depend on the worker count.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::fem::{element_rule_for, ElementGeom, Grading};
use crate::mesh::{cross, sub, Mesh, Point, Segment};
use crate::pairs::{PairIntegrator, PairSettings};
use crate::quadrature::{gauss_jacobi, gauss_legendre01, simplex_rule};
use crate::solver::DenseCholesky;

/// `C(d,s) = -2^{2s} Γ(s+d/2) / (π^{d/2} Γ(-s))`.
pub fn normalization_constant(dim: usize, s: f64) -> Result<f64> {
    check_order(s)?;
    if !(dim == 1 || dim == 2) {
        return invalid(format!("unsupported dimension {dim}"));
    }
    let d = dim as f64;
    Ok(-(2f64).powf(2.0 * s) * libm::tgamma(s + d / 2.0)
        / (std::f64::consts::PI.powf(d / 2.0) * libm::tgamma(-s)))
}

fn check_order(s: f64) -> Result<()> {
    if s > 0.0 && s < 1.0 {
        Ok(())
    } else {
        invalid(format!("fractional order must lie in (0,1), got {s}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyConfig {
    /// Gauss points per facet direction of the shared-vertex cone rules;
    /// shared edges use 2 more and identical cells twice as many.
    pub singular_order: usize,
    /// Largest rule order on each cell of a disjoint pair.
    pub disjoint_order_near: usize,
    /// Rule order on each cell of a well-separated disjoint pair.
    pub disjoint_order_far: usize,
    /// Centroid distance over the larger diameter above which a pair is far;
    /// each halving of the gap below it raises the order by 2 up to the near
    /// order.
    pub separation_ratio: f64,
    /// Pairs below this ratio are split into children before integration.
    pub subdivision_ratio: f64,
    /// Maximum depth of pair subdivision.
    pub max_subdivision: usize,
    /// Gauss points of the angular rules for boundary-edge fluxes.
    pub exterior_edge_base_order: usize,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub workers: usize,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        AssemblyConfig {
            singular_order: 8,
            disjoint_order_near: 16,
            disjoint_order_far: 2,
            separation_ratio: 12.0,
            subdivision_ratio: 2.0,
            max_subdivision: 0,
            exterior_edge_base_order: 12,
            workers: 0,
        }
    }
}

impl AssemblyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.singular_order == 0
            || self.disjoint_order_near == 0
            || self.disjoint_order_far == 0
            || self.exterior_edge_base_order == 0
        {
            return invalid("quadrature orders must be at least 1");
        }
        if !(self.separation_ratio > 0.0) || !(self.subdivision_ratio >= 0.0) {
            return invalid("separation ratios must be positive");
        }
        Ok(())
    }

    pub fn pair_settings(&self) -> PairSettings {
        PairSettings {
            singular_order: self.singular_order,
            near_order: self.disjoint_order_near,
            far_order: self.disjoint_order_far,
            separation_ratio: self.separation_ratio,
            subdivision_ratio: self.subdivision_ratio,
            max_subdivision: self.max_subdivision,
        }
    }

    /// Settings for reference computations on very small meshes.
    pub fn high_accuracy() -> Self {
        AssemblyConfig {
            singular_order: 12,
            disjoint_order_near: 18,
            disjoint_order_far: 8,
            separation_ratio: 16.0,
            subdivision_ratio: 3.0,
            max_subdivision: 4,
            exterior_edge_base_order: 16,
            workers: 0,
        }
    }
}

/// Boundary of a domain for complement integrals.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Interval { a: f64, b: f64 },
    /// Directed segments with the domain on their left.
    Polygon(Vec<Segment>),
}

impl Boundary {
    pub fn of_mesh(mesh: &Mesh) -> Self {
        if mesh.dim() == 1 {
            let xs = mesh.coords().iter().map(|p| p[0]);
            let a = xs.clone().fold(f64::INFINITY, f64::min);
            let b = xs.fold(f64::NEG_INFINITY, f64::max);
            Boundary::Interval { a, b }
        } else {
            Boundary::Polygon(mesh.boundary_segments())
        }
    }

    /// Regular polygon with `n` vertices on the circle of radius `r`.
    pub fn regular_polygon(n: usize, r: f64) -> Self {
        let pts: Vec<Point> = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        Boundary::Polygon((0..n).map(|k| (pts[k], pts[(k + 1) % n])).collect())
    }
}

/// Angular rules for boundary-edge fluxes. With `σ = |δ| tan θ` the flux
/// through a segment becomes `sign(δ) |δ|^{-2s} ∫ cos^{2s} θ dθ`; near
/// `θ = ±π/2` the integrand is written as `u^{2s}` times a smooth factor.
struct EdgeQuad {
    s: f64,
    gl: (Vec<f64>, Vec<f64>),
    gj: (Vec<f64>, Vec<f64>),
    /// `∫_0^{π/2} cos^{2s}`.
    half: f64,
}

impl EdgeQuad {
    fn new(order: usize, s: f64) -> Self {
        let half = std::f64::consts::PI.sqrt() * libm::tgamma(s + 0.5) / (2.0 * libm::tgamma(s + 1.0));
        EdgeQuad { s, gl: gauss_legendre01(order), gj: gauss_jacobi(order, 2.0 * s), half }
    }

    /// `∫_0^θ cos^{2s}` for `0 ≤ θ ≤ π/4`.
    fn head(&self, theta: f64) -> f64 {
        let (x, w) = &self.gl;
        theta * x.iter().zip(w).map(|(&t, &w)| w * (theta * t).cos().powf(2.0 * self.s)).sum::<f64>()
    }

    /// `∫_0^c sin^{2s}` for `0 ≤ c ≤ π/4`.
    fn tail(&self, c: f64) -> f64 {
        if c == 0.0 {
            return 0.0;
        }
        let (x, w) = &self.gj;
        let smooth: f64 = x.iter().zip(w).map(|(&t, &w)| w * ((c * t).sin() / (c * t)).powf(2.0 * self.s)).sum();
        c.powf(2.0 * self.s + 1.0) * smooth
    }

    /// `∫_0^θ cos^{2s}` for `θ = atan2(σ, d)`, `d > 0`, odd in `σ`, with
    /// the far part returned separately as `(near, far)`: the value is
    /// `near - far` where `far` is a tail measured from `±π/2`.
    fn primitive(&self, sigma: f64, d: f64) -> (f64, f64) {
        let a = sigma.abs();
        let sign = if sigma < 0.0 { -1.0 } else { 1.0 };
        if a <= d {
            (sign * self.head(a.atan2(d)), 0.0)
        } else {
            (sign * self.half, sign * self.tail(d.atan2(a)))
        }
    }

    /// `∫_{σa}^{σb} d (d² + σ²)^{-1-s} dσ / d^{-2s}` for `d > 0`.
    fn angle_integral(&self, sa: f64, sb: f64, d: f64) -> f64 {
        let (na, fa) = self.primitive(sa, d);
        let (nb, fb) = self.primitive(sb, d);
        // the constant parts cancel exactly when both ends are far on one side
        (nb - na) - (fb - fa)
    }
}

/// `∫_{[a,b]} ((y-x)·n) |y-x|^{-2-2s} ds` over one directed segment with
/// outward normal on its right.
fn segment_flux(x: Point, a: Point, b: Point, quad: &EdgeQuad) -> f64 {
    let t = sub(b, a);
    let len = (t[0] * t[0] + t[1] * t[1]).sqrt();
    if len == 0.0 {
        return 0.0;
    }
    let n = [t[1] / len, -t[0] / len];
    let ax = sub(a, x);
    let delta = ax[0] * n[0] + ax[1] * n[1];
    if delta == 0.0 {
        return 0.0;
    }
    // σ measured from the foot of x on the segment's line
    let s0 = -(ax[0] * t[0] + ax[1] * t[1]) / len;
    let d = delta.abs();
    delta.signum() * d.powf(-2.0 * quad.s) * quad.angle_integral(-s0, len - s0, d)
}

/// `(1/(2s)) Σ_e ∫_e ((y-x)·n) |y-x|^{-2-2s}` over the segments; equals the
/// kernel integral over the exterior of the region they bound.
fn polygon_complement(x: Point, segs: &[Segment], quad: &EdgeQuad) -> f64 {
    segs.iter().map(|&(a, b)| segment_flux(x, a, b, quad)).sum::<f64>() / (2.0 * quad.s)
}

fn interval_complement(x: f64, a: f64, b: f64, s: f64) -> f64 {
    ((b - x).powf(-2.0 * s) + (x - a).powf(-2.0 * s)) / (2.0 * s)
}

fn winding_number(x: Point, segs: &[Segment]) -> f64 {
    let mut total = 0.0;
    for &(a, b) in segs {
        let u = sub(a, x);
        let v = sub(b, x);
        total += cross(u, v).atan2(u[0] * v[0] + u[1] * v[1]);
    }
    total / (2.0 * std::f64::consts::PI)
}

fn distance_to_segment(x: Point, a: Point, b: Point) -> f64 {
    let t = sub(b, a);
    let l2 = t[0] * t[0] + t[1] * t[1];
    let u = if l2 > 0.0 { (((x[0] - a[0]) * t[0] + (x[1] - a[1]) * t[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    let p = [a[0] + u * t[0], a[1] + u * t[1]];
    ((x[0] - p[0]).powi(2) + (x[1] - p[1]).powi(2)).sqrt()
}

/// Kernel `|x-y|^{-dim-2s}` integrated over `y` outside the domain.
pub fn exterior_weight(x: Point, boundary: &Boundary, s: f64, config: &AssemblyConfig) -> Result<f64> {
    check_order(s)?;
    config.validate()?;
    match boundary {
        Boundary::Interval { a, b } => {
            if !(x[0] > *a && x[0] < *b) {
                return invalid(format!("point {} is not inside ({a}, {b})", x[0]));
            }
            Ok(interval_complement(x[0], *a, *b, s))
        }
        Boundary::Polygon(segs) => {
            let scale = segs.iter().map(|&(a, b)| a[0].abs().max(a[1].abs()).max(b[0].abs()).max(b[1].abs())).fold(0.0, f64::max);
            let on_edge = segs.iter().any(|&(a, b)| distance_to_segment(x, a, b) <= 1e-14 * scale.max(1.0));
            if on_edge || winding_number(x, segs).round() != 1.0 {
                return invalid(format!("point ({}, {}) is not strictly inside the polygon", x[0], x[1]));
            }
            Ok(polygon_complement(x, segs, &EdgeQuad::new(config.exterior_edge_base_order, s)))
        }
    }
}

/// Dense stiffness system over the free vertices.
#[derive(Debug, Clone)]
pub struct StiffnessSystem {
    pub dim: usize,
    pub s: f64,
    pub c_ds: f64,
    /// Matrix row to vertex.
    pub free: Vec<usize>,
    /// Vertex to matrix row.
    pub row_of: Vec<Option<usize>>,
    /// Row-major `n × n` matrix.
    pub k: Vec<f64>,
    pub f: Vec<f64>,
    factor: Option<DenseCholesky>,
}

impl StiffnessSystem {
    pub fn size(&self) -> usize {
        self.free.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.row_of.len()
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.free.len() + j]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.size();
        (0..n).map(|i| self.k[i * n..(i + 1) * n].iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// `xᵀ K y`.
    pub fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Free-row part of a vertex vector.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&v| full[v]).collect()
    }

    /// Vertex vector with zeros at boundary vertices.
    pub fn extend(&self, rows: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vertices()];
        for (&v, &x) in self.free.iter().zip(rows) {
            out[v] = x;
        }
        out
    }

    /// Sets `F` from a load vector over all vertices.
    pub fn set_load(&mut self, full: &[f64]) -> Result<()> {
        if full.len() != self.num_vertices() {
            return invalid("load vector length differs from vertex count");
        }
        self.f = self.restrict(full);
        Ok(())
    }

    /// Cached Cholesky factor of `K`, computed on first use.
    pub fn factor(&mut self) -> Result<&DenseCholesky> {
        if self.factor.is_none() {
            self.factor = Some(DenseCholesky::factor(self.size(), &self.k)?);
        }
        Ok(self.factor.as_ref().expect("factor present"))
    }

    pub fn cached_factor(&self) -> Option<&DenseCholesky> {
        self.factor.as_ref()
    }

    /// Writes `FRLK1`, the matrix dimensions as little-endian `u64`, `K`
    /// row-major and then `F`, all as little-endian `f64`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let n = self.size();
        let mut out = Vec::with_capacity(5 + 16 + 8 * (n * n + n));
        out.extend_from_slice(b"FRLK1");
        out.extend_from_slice(&(n as u64).to_le_bytes());
        out.extend_from_slice(&(n as u64).to_le_bytes());
        for v in &self.k {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let f = if self.f.len() == n { self.f.clone() } else { vec![0.0; n] };
        for v in &f {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = std::fs::File::create(path)?;
        file.write_all(&out)?;
        Ok(())
    }

    /// Reads a dump written by [`StiffnessSystem::write_binary`] as `(n, K, F)`.
    pub fn read_binary(path: &Path) -> Result<(usize, Vec<f64>, Vec<f64>)> {
        let bytes = std::fs::read(path)?;
        if bytes.len() < 21 || &bytes[..5] != b"FRLK1" {
            return Err(Error::Parse("missing FRLK1 header".into()));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().expect("8 bytes")) as usize;
        let (n, m) = (word(5), word(13));
        if n != m || bytes.len() != 21 + 8 * (n * n + n) {
            return Err(Error::Parse("inconsistent dump size".into()));
        }
        let vals: Vec<f64> = bytes[21..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        Ok((n, vals[..n * n].to_vec(), vals[n * n..].to_vec()))
    }
}

struct Prepared<'a> {
    pairs: PairIntegrator<'a>,
    s: f64,
    c_ds: f64,
    row_of: Vec<Option<usize>>,
    n: usize,
    edge_quad: EdgeQuad,
}

impl Prepared<'_> {
    /// Boundary of the patch of cell `k` as directed segments (2D) or the
    /// patch interval (1D).
    fn patch_boundary(&self, patch: &[usize]) -> Vec<Segment> {
        let mesh = self.pairs.mesh;
        if mesh.dim() == 1 {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &t in patch {
                for &v in mesh.cell(t) {
                    lo = lo.min(mesh.vertex(v)[0]);
                    hi = hi.max(mesh.vertex(v)[0]);
                }
            }
            return vec![([lo, 0.0], [lo, 0.0]), ([hi, 0.0], [hi, 0.0])];
        }
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(3 * patch.len());
        for &t in patch {
            let c = mesh.cell(t);
            for i in 0..3 {
                edges.push((c[i], c[(i + 1) % 3]));
            }
        }
        edges
            .iter()
            .filter(|&&(u, v)| !edges.contains(&(v, u)))
            .map(|&(u, v)| (mesh.vertex(u), mesh.vertex(v)))
            .collect()
    }

    fn patch_weight(&self, x: Point, bnd: &[Segment]) -> f64 {
        if self.pairs.mesh.dim() == 1 {
            interval_complement(x[0], bnd[0].0[0], bnd[1].0[0], self.s)
        } else {
            polygon_complement(x, bnd, &self.edge_quad)
        }
    }

    /// Rows of cell `k` in the pre-symmetrized matrix `D + 2X`.
    fn strip(&self, k: usize) -> (Vec<usize>, Vec<f64>) {
        let mesh = self.pairs.mesh;
        let nv = mesh.dim() + 1;
        let cell = mesh.cell(k);
        let mut local_rows = Vec::new();
        let mut rows = Vec::new();
        for (i, &v) in cell.iter().enumerate() {
            if let Some(r) = self.row_of[v] {
                local_rows.push(i);
                rows.push(r);
            }
        }
        let n = self.n;
        let mut strip = vec![0.0; rows.len() * n];
        if rows.is_empty() {
            return (rows, strip);
        }
        let geom = &self.pairs.geoms[k];
        let patch = mesh.element_patch(k);

        // C ∫_T φa φb ρ_{P_T}; only patch-boundary parts touching T are
        // singular on T and need the graded rule
        let bnd = self.patch_boundary(&patch);
        let bflags: Vec<bool> = cell.iter().map(|&v| mesh.is_boundary(v)).collect();
        let touches = |e: &Segment| geom.verts[..nv].iter().any(|&v| v == e.0 || v == e.1);
        let (near, far): (Vec<Segment>, Vec<Segment>) = if mesh.dim() == 1 {
            if bflags.iter().any(|&b| b) { (bnd.clone(), Vec::new()) } else { (Vec::new(), bnd.clone()) }
        } else {
            bnd.iter().partition(|e| touches(e))
        };
        let mut local = [[0.0; 3]; 3];
        for (segs, rule) in [
            (&far, element_rule_for(geom, &bflags, EXTERIOR_RULE_ORDER, None)),
            (&near, element_rule_for(geom, &bflags, EXTERIOR_RULE_ORDER, Some(COMPLEMENT_GRADING))),
        ] {
            if segs.is_empty() {
                continue;
            }
            for (x, &w) in rule.points.iter().zip(&rule.weights) {
                let lam = geom.barycentric(*x);
                let rho = self.patch_weight(*x, segs);
                for a in 0..nv {
                    for b in 0..nv {
                        local[a][b] += w * rho * lam[a] * lam[b];
                    }
                }
            }
        }
        for (ri, &a) in local_rows.iter().enumerate() {
            for b in 0..nv {
                if let Some(c) = self.row_of[cell[b]] {
                    strip[ri * n + c] += self.c_ds * local[a][b];
                }
            }
        }

        // touching pairs, ordered (T, T')
        for &t2 in &patch {
            let (verts, mat) = self.pairs.touching(k, t2);
            let other = mesh.cell(t2);
            for (ri, &a) in local_rows.iter().enumerate() {
                let va = cell[a];
                let ua = verts.iter().position(|&u| u == va).expect("row vertex in union");
                let mult = if other.contains(&va) { 1.0 } else { 2.0 };
                for (ub, &vb) in verts.iter().enumerate() {
                    if let Some(c) = self.row_of[vb] {
                        strip[ri * n + c] += 0.5 * self.c_ds * mult * mat[ua][ub];
                    }
                }
            }
        }

        // disjoint pairs with a later cell, doubled
        let mut in_patch = vec![false; mesh.num_cells()];
        for &t in &patch {
            in_patch[t] = true;
        }
        for (t2, _) in in_patch.iter().enumerate().skip(k + 1).filter(|(_, &inside)| !inside) {
            let other = mesh.cell(t2);
            if other.iter().all(|&v| self.row_of[v].is_none()) {
                continue;
            }
            let mut blk = [[0.0; 3]; 3];
            self.pairs.disjoint(k, t2, &mut blk);
            for (ri, &a) in local_rows.iter().enumerate() {
                for b in 0..nv {
                    if let Some(c) = self.row_of[other[b]] {
                        strip[ri * n + c] -= 2.0 * self.c_ds * blk[a][b];
                    }
                }
            }
        }
        (rows, strip)
    }
}

/// Triangle rule order for the smooth part of the patch-complement term.
const EXTERIOR_RULE_ORDER: usize = 12;

/// Boundary grading for the patch-boundary parts that touch the cell.
const COMPLEMENT_GRADING: Grading = Grading { levels: 5, ratio: 0.25, order: 5 };

/// Cells per parallel wave.
const WAVE: usize = 32;

/// Assembles `K` over the free vertices; `F` is left at zero.
pub fn assemble_stiffness(mesh: &Mesh, s: f64, config: &AssemblyConfig) -> Result<StiffnessSystem> {
    check_order(s)?;
    config.validate()?;
    let dim = mesh.dim();
    let c_ds = normalization_constant(dim, s)?;
    let free = mesh.free_vertices();
    if free.is_empty() {
        return invalid("mesh has no free vertices");
    }
    let mut row_of = vec![None; mesh.num_vertices()];
    for (r, &v) in free.iter().enumerate() {
        row_of[v] = Some(r);
    }
    let n = free.len();
    let prep = Prepared {
        pairs: PairIntegrator::new(mesh, s, config.pair_settings())?,
        s,
        c_ds,
        row_of: row_of.clone(),
        n,
        edge_quad: EdgeQuad::new(config.exterior_edge_base_order, s),
    };

    let mut m = vec![0.0; n * n];
    let run = |m: &mut Vec<f64>| {
        let cells: Vec<usize> = (0..mesh.num_cells()).collect();
        for wave in cells.chunks(WAVE) {
            let strips: Vec<(Vec<usize>, Vec<f64>)> = wave.par_iter().map(|&k| prep.strip(k)).collect();
            for (rows, strip) in strips {
                for (ri, &r) in rows.iter().enumerate() {
                    let dst = &mut m[r * n..(r + 1) * n];
                    for (d, v) in dst.iter_mut().zip(&strip[ri * n..(ri + 1) * n]) {
                        *d += v;
                    }
                }
            }
        }
    };
    if config.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
        pool.install(|| run(&mut m));
    } else {
        run(&mut m);
    }
    // K = (M + Mᵀ)/2 with M = D + 2X
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    let mut system = StiffnessSystem { dim, s, c_ds, free, row_of, k: m, f: vec![0.0; n], factor: None };
    if let Err(e) = system.factor() {
        return Err(Error::Internal(format!("stiffness matrix failed the Cholesky check ({e})")));
    }
    Ok(system)
}

/// `F_i = ∫ f φ_i` over all vertices.
pub fn assemble_load(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
    let rule = simplex_rule(mesh.dim(), 6).expect("load rule");
    let mut out = vec![0.0; mesh.num_vertices()];
    for k in 0..mesh.num_cells() {
        let g = ElementGeom::new(mesh, k);
        let scale = g.volume / g.reference_volume();
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = g.map(*p);
            let lam = g.barycentric(x);
            let fx = f(x) * w * scale;
            for (i, &v) in mesh.cell(k).iter().enumerate() {
                out[v] += fx * lam[i];
            }
        }
    }
    out
}

/// Symmetric sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = &self.cols[self.row_ptr[i]..self.row_ptr[i + 1]];
        match r.binary_search(&j) {
            Ok(p) => self.values[self.row_ptr[i] + p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (self.row_ptr[i]..self.row_ptr[i + 1]).map(|p| self.values[p] * x[self.cols[p]]).sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                d[i * self.n + self.cols[p]] = self.values[p];
            }
        }
        d
    }
}

/// `M_ij = ∫ φi φj` over all vertices.
pub fn assemble_mass(mesh: &Mesh) -> CsrMatrix {
    let nvert = mesh.num_vertices();
    let nv = mesh.dim() + 1;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nvert];
    for k in 0..mesh.num_cells() {
        let vol = mesh.volume(k);
        // ∫ λa λb = vol (1 + δab) / ((d+1)(d+2))
        let base = vol / ((nv * (nv + 1)) as f64);
        let cell = mesh.cell(k);
        for a in 0..nv {
            for b in 0..nv {
                let v = if a == b { 2.0 * base } else { base };
                rows[cell[a]].push((cell[b], v));
            }
        }
    }
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut values = Vec::new();
    for mut r in rows {
        r.sort_by_key(|e| e.0);
        let mut last = usize::MAX;
        for (c, v) in r {
            if c == last {
                *values.last_mut().expect("entry") += v;
            } else {
                cols.push(c);
                values.push(v);
                last = c;
            }
        }
        row_ptr.push(cols.len());
    }
    CsrMatrix { n: nvert, row_ptr, cols, values }
}
