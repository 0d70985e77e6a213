//! Integration of the kernel `|x-y|^{-d-2t}` over pairs of mesh cells.

use crate::error::Result;
use crate::fem::ElementGeom;
use crate::mesh::{sub, Mesh, Point};
use crate::quadrature::{pair_rule_with, simplex_rule, PairCase, PairOrders, PairQuadRule, QuadRule};

/// Rule orders and subdivision thresholds for pair integrals.
///
/// A disjoint pair with centroid distance over diameter `ρ ≥ separation_ratio`
/// uses `far_order`; each halving of `ρ` below that adds 2 to the order, capped
/// at `near_order`. Pairs with `ρ < subdivision_ratio` are subdivided first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSettings {
    pub singular_order: usize,
    pub near_order: usize,
    pub far_order: usize,
    pub separation_ratio: f64,
    pub subdivision_ratio: f64,
    pub max_subdivision: usize,
}

impl PairSettings {
    /// Orders of the ladder, from far to near.
    fn ladder(&self) -> Vec<usize> {
        let top = self.near_order.max(self.far_order);
        (0..).map(|k| self.far_order + 2 * k).take_while(|&q| q < top).chain(std::iter::once(top)).collect()
    }

    /// Index into [`Self::ladder`] for separation ratio `ratio`. Below the
    /// far threshold the steps count halvings of `ratio - 1`, which tracks
    /// the gap between the cells in units of the larger diameter.
    fn tier(&self, ratio: f64, tiers: usize) -> usize {
        if ratio >= self.separation_ratio {
            return 0;
        }
        let gap = (ratio - 1.0).max(1e-3);
        let steps = (self.separation_ratio / gap).log2().ceil() as usize;
        steps.min(tiers - 1)
    }
}

/// Sub-simplex used by pair subdivision.
#[derive(Clone, Copy)]
pub(crate) struct Piece {
    verts: [Point; 3],
    centroid: Point,
    diam: f64,
}

impl Piece {
    fn new(nv: usize, verts: [Point; 3]) -> Self {
        let mut c = [0.0; 2];
        for v in &verts[..nv] {
            c[0] += v[0] / nv as f64;
            c[1] += v[1] / nv as f64;
        }
        let mut diam: f64 = 0.0;
        for i in 0..nv {
            for j in i + 1..nv {
                diam = diam.max(crate::mesh::dist(verts[i], verts[j]));
            }
        }
        Piece { verts, centroid: c, diam }
    }

    fn children(&self, nv: usize) -> Vec<Piece> {
        let v = &self.verts;
        let mid = |a: Point, b: Point| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
        if nv == 2 {
            let m = mid(v[0], v[1]);
            vec![Piece::new(2, [v[0], m, [0.0; 2]]), Piece::new(2, [m, v[1], [0.0; 2]])]
        } else {
            let (m01, m12, m20) = (mid(v[0], v[1]), mid(v[1], v[2]), mid(v[2], v[0]));
            vec![
                Piece::new(3, [v[0], m01, m20]),
                Piece::new(3, [m01, v[1], m12]),
                Piece::new(3, [m20, m12, v[2]]),
                Piece::new(3, [m01, m12, m20]),
            ]
        }
    }
}

/// Quadrature points on a cell with weights folded into the hat values.
#[derive(Clone, Default)]
pub(crate) struct WeightedPoints {
    points: Vec<Point>,
    /// `w_p φ_a(x_p)` for the local hats of the owning cell.
    hats: Vec<[f64; 3]>,
}

impl WeightedPoints {
    fn on_piece(piece: &Piece, owner: &ElementGeom, rule: &QuadRule) -> Self {
        let g = ElementGeom::from_points(&piece.verts[..owner.nv]);
        let scale = g.volume / g.reference_volume();
        let mut out = WeightedPoints::default();
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = g.map(*p);
            let lam = owner.barycentric(x);
            let w = w * scale;
            out.points.push(x);
            out.hats.push([w * lam[0], w * lam[1], w * lam[2]]);
        }
        out
    }
}

/// Pair integrals on one mesh for one kernel exponent.
pub(crate) struct PairIntegrator<'a> {
    pub mesh: &'a Mesh,
    expo: f64,
    settings: PairSettings,
    pub geoms: Vec<ElementGeom>,
    pub pieces: Vec<Piece>,
    /// Per ladder tier: the reference rule and its points on every cell.
    tiers: Vec<(QuadRule, Vec<WeightedPoints>)>,
    identical: PairQuadRule,
    edge: Option<PairQuadRule>,
    vertex: PairQuadRule,
}

impl<'a> PairIntegrator<'a> {
    /// Integrator for the kernel `|x-y|^{-d-2t}`.
    pub fn new(mesh: &'a Mesh, t: f64, settings: PairSettings) -> Result<Self> {
        let dim = mesh.dim();
        let nv = dim + 1;
        let geoms: Vec<ElementGeom> = (0..mesh.num_cells()).map(|k| ElementGeom::new(mesh, k)).collect();
        let pieces: Vec<Piece> = geoms.iter().map(|g| Piece::new(nv, g.verts)).collect();
        let mut tiers = Vec::new();
        for q in settings.ladder() {
            let rule = simplex_rule(dim, q)?;
            let pts = pieces.iter().zip(&geoms).map(|(p, g)| WeightedPoints::on_piece(p, g, &rule)).collect();
            tiers.push((rule, pts));
        }
        // P1 integrands are exact in the radial and fiber variables with these
        // counts; the facet integrands of the cheaper low-dimensional cases
        // get more points
        let q = settings.singular_order;
        let orders = PairOrders { facet: q, radial: 2, fiber: 1 };
        Ok(PairIntegrator {
            mesh,
            expo: -(dim as f64 + 2.0 * t) / 2.0,
            settings,
            geoms,
            pieces,
            tiers,
            identical: pair_rule_with(PairCase::Identical, PairOrders { facet: 2 * q, ..orders }, t, dim)?,
            edge: if dim == 2 { Some(pair_rule_with(PairCase::SharedEdge, PairOrders { facet: q + 2, ..orders }, t, dim)?) } else { None },
            vertex: pair_rule_with(PairCase::SharedVertex, orders, t, dim)?,
        })
    }

    #[inline]
    fn kernel(&self, x: Point, y: Point) -> f64 {
        let dx = x[0] - y[0];
        let dy = x[1] - y[1];
        (dx * dx + dy * dy).powf(self.expo)
    }

    /// `Σ_pq A[p][a] k(x_p, y_q) B[q][b]`.
    fn block(&self, a: &WeightedPoints, b: &WeightedPoints, out: &mut [[f64; 3]; 3]) {
        let nv = self.mesh.dim() + 1;
        for (xp, ha) in a.points.iter().zip(&a.hats) {
            let mut row = [0.0; 3];
            for (yq, hb) in b.points.iter().zip(&b.hats) {
                let k = self.kernel(*xp, *yq);
                for j in 0..nv {
                    row[j] += k * hb[j];
                }
            }
            for i in 0..nv {
                for j in 0..nv {
                    out[i][j] += ha[i] * row[j];
                }
            }
        }
    }

    /// Calls `visit` with the point sets covering a disjoint pair of
    /// (sub)cells, subdividing close pairs.
    fn visit_disjoint(&self, ta: usize, pa: &Piece, tb: usize, pb: &Piece, depth: usize, visit: &mut dyn FnMut(&WeightedPoints, &WeightedPoints)) {
        let ratio = crate::mesh::dist(pa.centroid, pb.centroid) / pa.diam.max(pb.diam);
        if ratio >= self.settings.subdivision_ratio || depth >= self.settings.max_subdivision {
            let (rule, pts) = &self.tiers[self.settings.tier(ratio, self.tiers.len())];
            if depth == 0 {
                visit(&pts[ta], &pts[tb]);
            } else {
                let a = WeightedPoints::on_piece(pa, &self.geoms[ta], rule);
                let b = WeightedPoints::on_piece(pb, &self.geoms[tb], rule);
                visit(&a, &b);
            }
        } else {
            let nv = self.mesh.dim() + 1;
            let ca = pa.children(nv);
            let cb = pb.children(nv);
            for a in &ca {
                for b in &cb {
                    self.visit_disjoint(ta, a, tb, b, depth + 1, visit);
                }
            }
        }
    }

    /// Cross integral `∬ φa(x) φb(y) k` for a disjoint pair of cells.
    pub fn disjoint(&self, ta: usize, tb: usize, out: &mut [[f64; 3]; 3]) {
        self.visit_disjoint(ta, &self.pieces[ta], tb, &self.pieces[tb], 0, &mut |a, b| self.block(a, b, out));
    }

    /// `∬ (v(x) - v(y))² k` over a disjoint pair of cells, with `va`, `vb`
    /// the local vertex values of `v` on each cell.
    pub fn disjoint_difference(&self, ta: usize, tb: usize, va: &[f64; 3], vb: &[f64; 3]) -> f64 {
        let nv = self.mesh.dim() + 1;
        let mut total = 0.0;
        self.visit_disjoint(ta, &self.pieces[ta], tb, &self.pieces[tb], 0, &mut |a, b| {
            // each hat row sums to the weight, and weights times values to w v
            let reduce = |p: &WeightedPoints, v: &[f64; 3]| -> Vec<(f64, f64)> {
                p.hats.iter().map(|h| (h[..nv].iter().sum::<f64>(), (0..nv).map(|i| h[i] * v[i]).sum::<f64>())).collect()
            };
            let ra = reduce(a, va);
            let rb = reduce(b, vb);
            for (xp, &(wp, wvp)) in a.points.iter().zip(&ra) {
                let vx = wvp / wp;
                for (yq, &(wq, wvq)) in b.points.iter().zip(&rb) {
                    let d = vx - wvq / wq;
                    total += wp * wq * d * d * self.kernel(*xp, *yq);
                }
            }
        });
        total
    }

    /// `∬_{T×T'} Da Db k` for a touching ordered pair, over the union of
    /// their vertices (cell `t1` vertices first, in cell order).
    pub fn touching(&self, t1: usize, t2: usize) -> (Vec<usize>, [[f64; 6]; 6]) {
        let mesh = self.mesh;
        let nv = mesh.dim() + 1;
        let c1 = mesh.cell(t1);
        let c2 = mesh.cell(t2);
        let shared: Vec<usize> = c1.iter().copied().filter(|v| c2.contains(v)).collect();
        let case = if t1 == t2 { PairCase::Identical } else { PairCase::from_shared(mesh.dim(), shared.len()) };
        // local orderings with shared vertices first, in the same order
        let order = |c: &[usize]| -> Vec<usize> {
            let mut o: Vec<usize> = shared.iter().map(|v| c.iter().position(|u| u == v).expect("shared")).collect();
            o.extend((0..nv).filter(|i| !shared.contains(&c[*i])));
            o
        };
        let (p1, p2) = if case == PairCase::Identical { ((0..nv).collect(), (0..nv).collect()) } else { (order(c1), order(c2)) };
        let rule = match case {
            PairCase::Identical => &self.identical,
            PairCase::SharedEdge => self.edge.as_ref().expect("edge rule in 2D"),
            _ => &self.vertex,
        };
        let mut verts: Vec<usize> = c1.to_vec();
        verts.extend(c2.iter().copied().filter(|v| !c1.contains(v)));
        let slot1: Vec<usize> = p1.iter().map(|&i| verts.iter().position(|&u| u == c1[i]).expect("slot")).collect();
        let slot2: Vec<usize> = p2.iter().map(|&i| verts.iter().position(|&u| u == c2[i]).expect("slot")).collect();
        let g1 = &self.geoms[t1];
        let g2 = &self.geoms[t2];
        let jac = |g: &ElementGeom, p: &[usize]| -> [Point; 2] {
            if nv == 2 {
                [sub(g.verts[p[1]], g.verts[p[0]]), [0.0; 2]]
            } else {
                [sub(g.verts[p[1]], g.verts[p[0]]), sub(g.verts[p[2]], g.verts[p[0]])]
            }
        };
        let j1 = jac(g1, &p1);
        let j2 = jac(g2, &p2);
        let nu = verts.len();
        let mut mat = [[0.0; 6]; 6];
        for (&(xh, yh), &w) in rule.points.iter().zip(&rule.weights) {
            let d = [
                j1[0][0] * xh[0] + j1[1][0] * xh[1] - j2[0][0] * yh[0] - j2[1][0] * yh[1],
                j1[0][1] * xh[0] + j1[1][1] * xh[1] - j2[0][1] * yh[0] - j2[1][1] * yh[1],
            ];
            let k = (d[0] * d[0] + d[1] * d[1]).powf(self.expo) * w;
            let mut diff = [0.0; 6];
            let l1 = [1.0 - xh[0] - xh[1], xh[0], xh[1]];
            let l2 = [1.0 - yh[0] - yh[1], yh[0], yh[1]];
            for i in 0..nv {
                diff[slot1[i]] += l1[i];
                diff[slot2[i]] -= l2[i];
            }
            for a in 0..nu {
                let da = diff[a] * k;
                for b in 0..nu {
                    mat[a][b] += da * diff[b];
                }
            }
        }
        let scale = g1.volume * g2.volume / (g1.reference_volume() * g2.reference_volume());
        for row in mat.iter_mut().take(nu) {
            for v in row.iter_mut().take(nu) {
                *v *= scale;
            }
        }
        (verts, mat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(near: usize, far: usize) -> PairSettings {
        PairSettings { singular_order: 8, near_order: near, far_order: far, separation_ratio: 12.0, subdivision_ratio: 2.0, max_subdivision: 0 }
    }

    #[test]
    fn ladder_steps_by_two_up_to_near() {
        assert_eq!(settings(16, 2).ladder(), vec![2, 4, 6, 8, 10, 12, 14, 16]);
        assert_eq!(settings(9, 2).ladder(), vec![2, 4, 6, 8, 9]);
        assert_eq!(settings(4, 6).ladder(), vec![6]);
    }

    #[test]
    fn tiers_grow_as_pairs_approach() {
        let st = settings(16, 2);
        let n = st.ladder().len();
        assert_eq!(st.tier(12.0, n), 0);
        assert_eq!(st.tier(100.0, n), 0);
        assert_eq!(st.tier(7.0, n), 1);
        assert_eq!(st.tier(4.0, n), 2);
        assert_eq!(st.tier(1.0, n), n - 1);
        let mut last = 0;
        for k in 0..200 {
            let t = st.tier(12.0 - 0.055 * k as f64, n);
            assert!(t >= last);
            last = t;
        }
    }

    #[test]
    fn disjoint_blocks_sum_to_kernel_integral() {
        // Σ_ab ∬ φa φb k = ∬ k, compared with the same integral at a higher ladder
        let m = crate::mesh::build_disc_mesh(8).unwrap();
        let (a, b) = (0, (0..m.num_cells()).find(|&t| m.shared_vertex_count(0, t) == 0).unwrap());
        let total = |st: PairSettings| {
            let pi = PairIntegrator::new(&m, 0.5, st).unwrap();
            let mut out = [[0.0; 3]; 3];
            pi.disjoint(a, b, &mut out);
            out.iter().flatten().sum::<f64>()
        };
        let coarse = total(settings(16, 2));
        let fine = total(PairSettings { max_subdivision: 3, subdivision_ratio: 4.0, ..settings(20, 12) });
        assert!(coarse > 0.0);
        assert!(((coarse - fine) / fine).abs() < 1e-8, "{coarse} {fine}");
    }
}
