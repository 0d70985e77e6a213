mod common;

use fraclap::assembly::{assemble_stiffness, normalization_constant, AssemblyConfig, StiffnessSystem};
use fraclap::mesh::{build_disc_mesh, build_interval_mesh, disc_fan_mesh, refine_uniform, Mesh};

/// Largest relative entry error and largest error scaled by `√(Kii Kjj)`.
fn compare(sys: &StiffnessSystem, oracle: &[f64]) -> (f64, f64) {
    let n = sys.size();
    assert_eq!(oracle.len(), n * n);
    let (mut rel, mut scaled) = (0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..n {
            let (o, k) = (oracle[i * n + j], sys.entry(i, j));
            rel = rel.max(((k - o) / o).abs());
            scaled = scaled.max((k - o).abs() / (oracle[i * n + i] * oracle[j * n + j]).sqrt());
        }
    }
    (rel, scaled)
}

fn scaled(m: &Mesh, c: f64) -> Mesh {
    let coords = m.coords().iter().map(|p| [c * p[0], c * p[1]]).collect();
    let cells = (0..m.num_cells()).flat_map(|k| m.cell(k).to_vec()).collect();
    Mesh::from_parts(m.dim(), coords, cells, m.boundary_flags().to_vec()).unwrap()
}

#[test]
fn constant_matches_reflection_formula() {
    for dim in [1, 2] {
        for s in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let c = normalization_constant(dim, s).unwrap();
            let r = common::constant_by_reflection(dim, s);
            assert!(((c - r) / r).abs() < 1e-13, "dim={dim} s={s}");
        }
    }
}

#[test]
fn interval_entries_match_exact_values() {
    let m = build_interval_mesh(4).unwrap();
    for s in [0.1, 0.3, 0.5, 0.7, 0.9] {
        let sys = assemble_stiffness(&m, s, &AssemblyConfig::default()).unwrap();
        let (rel, scaled) = compare(&sys, &common::oracle_stiffness(&m, s, 0));
        assert!(rel < 1e-6 && scaled < 1e-7, "s={s}: {rel:e} {scaled:e}");
    }
}

#[test]
fn disc_entries_match_polar_oracle() {
    let m = refine_uniform(&disc_fan_mesh(4).unwrap(), true).unwrap();
    assert_eq!(m.num_cells(), 16);
    let s = 0.7;
    let sys = assemble_stiffness(&m, s, &AssemblyConfig::default()).unwrap();
    // the reference at this resolution is good to a few parts in 1e6
    let (rel, scaled) = compare(&sys, &common::oracle_stiffness(&m, s, 12));
    assert!(rel < 2e-5 && scaled < 2e-6, "{rel:e} {scaled:e}");
}

#[test]
fn stiffness_is_homogeneous() {
    for (m, s) in [(build_interval_mesh(6).unwrap(), 0.3), (build_disc_mesh(8).unwrap(), 0.6)] {
        let base = assemble_stiffness(&m, s, &AssemblyConfig::default()).unwrap();
        for c in [0.25, 4.0] {
            let sys = assemble_stiffness(&scaled(&m, c), s, &AssemblyConfig::default()).unwrap();
            let factor = c.powf(m.dim() as f64 - 2.0 * s);
            for (a, b) in sys.k.iter().zip(&base.k) {
                assert!((a - factor * b).abs() <= 1e-7 * (factor * b).abs().max(1e-3 * factor), "c={c}");
            }
        }
    }
}

#[test]
fn assembly_is_bitwise_independent_of_workers() {
    let m = build_disc_mesh(8).unwrap();
    let run = |workers| assemble_stiffness(&m, 0.45, &AssemblyConfig { workers, ..Default::default() }).unwrap().k;
    let one = run(1);
    for workers in [2, 3] {
        let k = run(workers);
        assert!(one.iter().zip(&k).all(|(a, b)| a.to_bits() == b.to_bits()), "workers={workers}");
    }
}

#[test]
fn stiffness_is_positive_definite_under_refinement() {
    let mut m = build_disc_mesh(8).unwrap();
    for _ in 0..2 {
        for s in [0.1, 0.9] {
            let sys = assemble_stiffness(&m, s, &AssemblyConfig::default()).unwrap();
            assert!(sys.cached_factor().unwrap().min_pivot() > 0.0);
        }
        m = refine_uniform(&m, true).unwrap();
    }
}

#[test]
fn rejects_invalid_orders() {
    let m = build_interval_mesh(4).unwrap();
    for s in [0.0, 1.0, -0.2, f64::NAN] {
        assert!(assemble_stiffness(&m, s, &AssemblyConfig::default()).is_err());
    }
    let bad = AssemblyConfig { singular_order: 0, ..Default::default() };
    assert!(assemble_stiffness(&m, 0.5, &bad).is_err());
}
