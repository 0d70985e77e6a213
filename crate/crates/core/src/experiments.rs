//! Convergence studies on the unit disc and interval: runs, rate fits,
//! CSV tables and SVG plots.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use crate::assembly::{assemble_load, assemble_stiffness, AssemblyConfig};
use crate::error::{invalid, Error, Result};
use crate::mesh::{build_disc_mesh, build_interval_mesh, mark_subdomain, refine_uniform, Mesh, Region};
use crate::norms::{disc_exact_solution, energy_error, h1_seminorm_error, l2_error, localized_energy_error};
use crate::projections::CutoffFunction;
use crate::solver::{solve, SolveMethod};

pub const CSV_HEADER: &str = "s,level,h,ndof,l2_global,h1_global,l2_local,h1_local,energy_global,energy_local,wall_time_seconds";

/// Settings of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub s_values: Vec<f64>,
    /// Number of meshes, the coarsest being level 0.
    pub levels: usize,
    /// Side of the centered square (interval in 1D) for local errors.
    pub subdomain_side: f64,
    /// Compute the localized energy error with a cutoff from the local
    /// square to the outer square.
    pub localized_energy: bool,
    pub outer_side: f64,
    pub assembly: AssemblyConfig,
    pub project_boundary: bool,
    pub workers: usize,
    /// Boundary segments of the coarse disc fan (2D).
    pub boundary_segments: usize,
    /// Cells of the coarsest interval mesh (1D).
    pub interval_cells: usize,
    /// Levels with more free vertices are not run.
    pub max_dofs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dim: 2,
            s_values: vec![0.5],
            levels: 4,
            subdomain_side: 0.4,
            localized_energy: false,
            outer_side: 1.2,
            assembly: AssemblyConfig::default(),
            project_boundary: true,
            workers: 0,
            boundary_segments: 16,
            interval_cells: 8,
            max_dofs: 8000,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return invalid(format!("dimension must be 1 or 2, got {}", self.dim));
        }
        if self.levels < 2 {
            return invalid("at least two levels are needed");
        }
        if self.s_values.is_empty() || self.s_values.iter().any(|&s| !(s > 0.0 && s < 1.0)) {
            return invalid("every fractional order must lie in (0,1)");
        }
        if !(self.subdomain_side > 0.0) || (self.localized_energy && !(self.outer_side > self.subdomain_side)) {
            return invalid("subdomain sides must be positive and nested");
        }
        self.assembly.validate()
    }

    /// Meshes of all levels, each refined from the previous one.
    pub fn meshes(&self) -> Result<Vec<Mesh>> {
        let mut m = if self.dim == 1 { build_interval_mesh(self.interval_cells)? } else { build_disc_mesh(self.boundary_segments)? };
        let mut out = Vec::with_capacity(self.levels);
        for level in 0..self.levels {
            if level > 0 {
                m = refine_uniform(&m, self.project_boundary)?;
            }
            out.push(m.clone());
        }
        Ok(out)
    }

    fn square(&self, side: f64) -> Region {
        Region::Square { center: [0.0, 0.0], side }
    }
}

/// Errors of one `(s, level)` cell; missing or failed quantities are `None`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceRecord {
    pub s: f64,
    pub level: usize,
    pub h: f64,
    pub ndof: usize,
    pub l2_global: Option<f64>,
    pub h1_global: Option<f64>,
    pub l2_local: Option<f64>,
    pub h1_local: Option<f64>,
    pub energy_global: Option<f64>,
    pub energy_local: Option<f64>,
    pub wall_time_seconds: f64,
    /// Failure that aborted the cell, if any. Not part of the CSV.
    pub failure: Option<String>,
}

impl ConvergenceRecord {
    /// Error columns by CSV name.
    pub fn norms(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("l2_global", self.l2_global),
            ("h1_global", self.h1_global),
            ("l2_local", self.l2_local),
            ("h1_local", self.h1_local),
            ("energy_global", self.energy_global),
            ("energy_local", self.energy_local),
        ]
    }
}

/// Maps an undefined norm to a missing value.
fn defined(value: Result<f64>) -> Result<Option<f64>> {
    match value {
        Ok(v) => Ok(Some(v)),
        Err(Error::Undefined(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Solves and measures one `(s, level)` cell.
fn run_cell(config: &RunConfig, mesh: &Mesh, s: f64, record: &mut ConvergenceRecord) -> Result<()> {
    let exact = disc_exact_solution(s, config.dim)?;
    let assembly = AssemblyConfig { workers: config.workers, ..config.assembly };
    let mut system = assemble_stiffness(mesh, s, &assembly)?;
    system.set_load(&assemble_load(mesh, |_| exact.rhs_constant))?;
    let uh = solve(&mut system, SolveMethod::Cholesky)?;
    let local = mark_subdomain(mesh, &config.square(config.subdomain_side));
    record.l2_global = Some(l2_error(mesh, &exact, &uh, None)?);
    record.h1_global = defined(h1_seminorm_error(mesh, &exact, &uh, None))?;
    // coarse meshes may have no cells inside the local square
    record.l2_local = defined(l2_error(mesh, &exact, &uh, Some(&local)))?;
    record.h1_local = defined(h1_seminorm_error(mesh, &exact, &uh, Some(&local)))?;
    record.energy_global = Some(energy_error(&system, &uh, exact.energy_squared)?);
    if config.localized_energy {
        let outer = mark_subdomain(mesh, &config.square(config.outer_side));
        // coarse meshes cannot resolve the cutoff layer
        record.energy_local = match CutoffFunction::new(mesh, &local, &outer) {
            Ok(cutoff) => Some(localized_energy_error(mesh, &system, &exact, &uh, &cutoff)?),
            Err(Error::InvalidArgument(_)) => None,
            Err(e) => return Err(e),
        };
    }
    Ok(())
}

/// Runs every `(s, level)` cell in order. A failing cell yields a record
/// with its failure and no errors; the other cells still run.
pub fn run_convergence(config: &RunConfig) -> Result<Vec<ConvergenceRecord>> {
    config.validate()?;
    let meshes = config.meshes()?;
    let mut records = Vec::new();
    for &s in &config.s_values {
        for (level, mesh) in meshes.iter().enumerate() {
            let ndof = mesh.free_vertices().len();
            let mut record = ConvergenceRecord { s, level, h: mesh.h_max(), ndof, ..Default::default() };
            let start = Instant::now();
            if ndof > config.max_dofs {
                record.failure = Some(format!("{ndof} free vertices exceed the cap of {}", config.max_dofs));
            } else if let Err(e) = run_cell(config, mesh, s, &mut record) {
                let keep = ConvergenceRecord { s, level, h: record.h, ndof, ..Default::default() };
                record = ConvergenceRecord { failure: Some(e.to_string()), ..keep };
            }
            record.wall_time_seconds = start.elapsed().as_secs_f64();
            records.push(record);
        }
    }
    Ok(records)
}

/// Convergence orders of one norm for one `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub s: f64,
    pub norm: &'static str,
    /// Orders between successive levels; empty when the norm is missing.
    pub pairwise: Vec<f64>,
    /// Least-squares slope of `log e` against `log h` over the last three levels.
    pub slope: Option<f64>,
}

/// Orders for every `s` and norm, in the order the `s` values first appear.
pub fn fit_rates(records: &[ConvergenceRecord]) -> Result<Vec<RateRow>> {
    let mut s_values: Vec<f64> = Vec::new();
    for r in records {
        if !s_values.contains(&r.s) {
            s_values.push(r.s);
        }
    }
    let mut rows = Vec::new();
    for s in s_values {
        let mut group: Vec<&ConvergenceRecord> = records.iter().filter(|r| r.s == s).collect();
        group.sort_by_key(|r| r.level);
        if group.len() < 2 {
            return invalid(format!("s = {s} has fewer than two levels"));
        }
        for (i, (norm, _)) in group[0].norms().iter().enumerate() {
            let points: Vec<(f64, f64)> = group.iter().filter_map(|r| r.norms()[i].1.filter(|&e| e > 0.0).map(|e| (r.h, e))).collect();
            let pairwise: Vec<f64> = points.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect();
            let slope = (points.len() >= 2).then(|| least_squares_slope(&points[points.len().saturating_sub(3)..]));
            rows.push(RateRow { s, norm, pairwise, slope });
        }
    }
    Ok(rows)
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Rate table as aligned text.
pub fn format_rates(rows: &[RateRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>6} {:<14} {:>8} {:<}", "s", "norm", "slope", "pairwise");
    for r in rows {
        let slope = r.slope.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
        let pairs: Vec<String> = r.pairwise.iter().map(|v| format!("{v:.3}")).collect();
        let _ = writeln!(out, "{:>6} {:<14} {:>8} {}", r.s, r.norm, slope, pairs.join(" "));
    }
    out
}

fn float_field(v: f64) -> String {
    format!("{v:.16e}")
}

fn optional_field(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), float_field)
}

/// CSV text with [`CSV_HEADER`]; missing values are `nan`.
pub fn to_csv(records: &[ConvergenceRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let fields = [
            float_field(r.s),
            r.level.to_string(),
            float_field(r.h),
            r.ndof.to_string(),
            optional_field(r.l2_global),
            optional_field(r.h1_global),
            optional_field(r.l2_local),
            optional_field(r.h1_local),
            optional_field(r.energy_global),
            optional_field(r.energy_local),
            float_field(r.wall_time_seconds),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Parses CSV text written by [`to_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<ConvergenceRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(Error::Parse("unexpected CSV header".into()));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 11 {
            return Err(Error::Parse(format!("row {} has {} fields", i + 1, f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)));
        let int = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("row {}: {e}", i + 1)));
        let opt = |s: &str| -> Result<Option<f64>> { if s == "nan" { Ok(None) } else { num(s).map(Some) } };
        out.push(ConvergenceRecord {
            s: num(f[0])?,
            level: int(f[1])?,
            h: num(f[2])?,
            ndof: int(f[3])?,
            l2_global: opt(f[4])?,
            h1_global: opt(f[5])?,
            l2_local: opt(f[6])?,
            h1_local: opt(f[7])?,
            energy_global: opt(f[8])?,
            energy_local: opt(f[9])?,
            wall_time_seconds: num(f[10])?,
            failure: None,
        });
    }
    Ok(out)
}

pub fn emit_csv(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return invalid("no records to write");
    }
    std::fs::write(path, to_csv(records))?;
    Ok(())
}

/// Label, norm index and `(h, error)` points of one plotted curve.
type Series = (String, usize, Vec<(f64, f64)>);

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Log-log SVG of every defined error series against `h`, one polyline per
/// `(s, norm)`, with dashed guides of slopes `1/2+s`, `s−1/2` and 1.
pub fn to_svg(records: &[ConvergenceRecord]) -> Result<String> {
    let mut series: Vec<Series> = Vec::new();
    let mut s_values: Vec<f64> = Vec::new();
    for r in records {
        if !s_values.contains(&r.s) {
            s_values.push(r.s);
        }
    }
    for &s in &s_values {
        let group: Vec<&ConvergenceRecord> = records.iter().filter(|r| r.s == s).collect();
        for i in 0..6 {
            let pts: Vec<(f64, f64)> = group.iter().filter_map(|r| r.norms()[i].1.filter(|&e| e > 0.0).map(|e| (r.h, e))).collect();
            if !pts.is_empty() {
                series.push((format!("{} s={s}", group[0].norms()[i].0), i, pts));
            }
        }
    }
    if series.is_empty() {
        return invalid("no defined error values to plot");
    }
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.2.iter().copied()).collect();
    let lx: Vec<f64> = all.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = all.iter().map(|p| p.1.log10()).collect();
    let pad = |lo: f64, hi: f64| if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo - 0.05 * (hi - lo), hi + 0.05 * (hi - lo)) };
    let (x0, x1) = pad(lx.iter().cloned().fold(f64::INFINITY, f64::min), lx.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let (y0, y1) = pad(ly.iter().cloned().fold(f64::INFINITY, f64::min), ly.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let (w, h, margin) = (720.0, 480.0, 60.0);
    let px = |x: f64| margin + (x.log10() - x0) / (x1 - x0) * (w - 2.0 * margin);
    let py = |y: f64| h - margin - (y.log10() - y0) / (y1 - y0) * (h - 2.0 * margin);

    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<path d="M{m} {m} V{b} H{r}" fill="none" stroke="black"/>"#,
        m = margin,
        b = h - margin,
        r = w - margin
    );
    for d in x0.ceil() as i32..=x1.floor() as i32 {
        let x = px(10f64.powi(d));
        let _ = writeln!(out, r#"<text x="{x:.1}" y="{:.1}" font-size="12" text-anchor="middle">1e{d}</text>"#, h - margin + 18.0);
    }
    for d in y0.ceil() as i32..=y1.floor() as i32 {
        let y = py(10f64.powi(d));
        let _ = writeln!(out, r#"<text x="{:.1}" y="{y:.1}" font-size="12" text-anchor="end">1e{d}</text>"#, margin - 6.0);
    }
    let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">h</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(out, r#"<text x="16" y="{:.1}" font-size="14" transform="rotate(-90 16 {:.1})" text-anchor="middle">error</text>"#, h / 2.0, h / 2.0);

    // guides anchored at the coarsest point of the first series of each s
    let (hmin, hmax) = (10f64.powf(x0), 10f64.powf(x1));
    for &s in &s_values {
        let Some(anchor) = series.iter().find(|x| x.0.ends_with(&format!("s={s}"))).map(|x| x.2[0]) else { continue };
        for (slope, label) in [(0.5 + s, "1/2+s"), (s - 0.5, "s-1/2"), (1.0, "1")] {
            let at = |hh: f64| anchor.1 * (hh / anchor.0).powf(slope);
            let (ya, yb) = (at(hmin), at(hmax));
            if !(ya.is_finite() && yb.is_finite() && ya > 0.0 && yb > 0.0) {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="gray" stroke-dasharray="4 4"><title>h^({label}) s={s}</title></line>"#,
                px(hmin),
                py(ya).clamp(0.0, h),
                px(hmax),
                py(yb).clamp(0.0, h)
            );
        }
    }
    for (k, (name, norm, pts)) in series.iter().enumerate() {
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"><title>{name}</title></polyline>"#,
            PALETTE[*norm],
            coords.join(" ")
        );
        let _ = writeln!(out, r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{}">{name}</text>"#, w - margin - 116.0, margin + 14.0 * k as f64, PALETTE[*norm]);
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn emit_plot(records: &[ConvergenceRecord], path: &Path) -> Result<()> {
    std::fs::write(path, to_svg(records)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(level: usize, h: f64, e: f64) -> ConvergenceRecord {
        ConvergenceRecord { s: 0.3, level, h, ndof: 10 * (level + 1), l2_global: Some(e), l2_local: Some(e * 0.5), ..Default::default() }
    }

    #[test]
    fn rates_of_synthetic_power_law() {
        let hs = [0.5, 0.25, 0.125, 0.0625];
        let recs: Vec<ConvergenceRecord> = hs.iter().enumerate().map(|(l, &h)| record(l, h, h.powf(0.8))).collect();
        let rows = fit_rates(&recs).unwrap();
        let l2 = rows.iter().find(|r| r.norm == "l2_global").unwrap();
        assert!(l2.pairwise.iter().all(|r| (r - 0.8).abs() < 1e-12));
        assert!((l2.slope.unwrap() - 0.8).abs() < 1e-12);
        let h1 = rows.iter().find(|r| r.norm == "h1_global").unwrap();
        assert!(h1.pairwise.is_empty() && h1.slope.is_none());
        assert!(fit_rates(&recs[..1]).is_err());
    }

    #[test]
    fn two_point_rate() {
        let recs = vec![record(0, 1.0, 1.0), record(1, 0.5, 0.25)];
        let rows = fit_rates(&recs).unwrap();
        assert_eq!(rows[0].pairwise, vec![2.0]);
        assert_eq!(rows[0].slope, Some(2.0));
    }

    #[test]
    fn config_validation() {
        assert!(RunConfig::default().validate().is_ok());
        assert!(RunConfig { levels: 1, ..Default::default() }.validate().is_err());
        assert!(RunConfig { s_values: vec![1.0], ..Default::default() }.validate().is_err());
        assert!(RunConfig { dim: 3, ..Default::default() }.validate().is_err());
    }
}
