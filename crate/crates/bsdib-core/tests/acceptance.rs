//! Acceptance suite: ten end-to-end checks with pinned tolerances. Each
//! test prints one `ACCEPTANCE C<k> PASS` line (shown with --nocapture);
//! assertion messages carry the measured numbers on failure.
//!
//! The desk-scale morphology runs (C6-C8) share one graded nx=32 mesh and
//! cache full preset runs across tests, so the suite does each expensive
//! simulation exactly once.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};
use std::time::Instant;

use bsdib_core::cli_io::{find_preset, parse_run_config, run_to_directory};
use bsdib_core::kinetics::ModelParameters;
use bsdib_core::linalg::{max_asymmetry, spmv};
use bsdib_core::mesh::{build_graded_mesh, build_uniform_mesh, GradedMeshSpec, PolyhedralMesh};
use bsdib_core::solver::{
    bulk_plane_profile, pattern_indicators, rel_l2_distance, run_simulation, RunResult, SimMode,
    TimeSteppingConfig, PATTERN_STD_THRESHOLD,
};
use bsdib_core::vem::{
    assemble_operators, cell_operators, face_operators, poisson_patch_solve_error,
};

const AFFINE_SETS: [[f64; 4]; 5] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
    [0.3, 1.2, -0.7, 2.5],
];

fn affine(coeffs: [f64; 4], p: [f64; 3]) -> f64 {
    coeffs[0] + coeffs[1] * p[0] + coeffs[2] * p[1] + coeffs[3] * p[2]
}

fn patch_meshes() -> Vec<(String, PolyhedralMesh)> {
    let mut meshes: Vec<(String, PolyhedralMesh)> = [1u32, 2, 4]
        .iter()
        .map(|&nx| {
            (
                format!("uniform(L=1,nx={nx})"),
                build_uniform_mesh(1.0, nx).unwrap(),
            )
        })
        .collect();
    meshes.push((
        "graded(L=1,nx=4,fine_layers=1,coarse_levels=2)".into(),
        build_graded_mesh(&GradedMeshSpec {
            domain_edge: 1.0,
            nx: 4,
            fine_layers: 1,
            coarse_levels: 2,
        })
        .unwrap(),
    ));
    meshes
}

/// Largest violation of `P d = d` for the dof vector `d` of an affine
/// field, relative to the dof scale. Works for face and cell projectors
/// alike since both are square dof-to-dof matrices.
fn projector_defect<M>(
    projection: &M,
    vertex_ids: &[u32],
    mesh: &PolyhedralMesh,
    coeffs: [f64; 4],
) -> f64
where
    M: std::ops::Index<(usize, usize), Output = f64>,
{
    let dofs: Vec<f64> = vertex_ids
        .iter()
        .map(|&v| affine(coeffs, mesh.vertex(v as usize)))
        .collect();
    let n = dofs.len();
    let scale = 1.0 + dofs.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut y = 0.0;
        for j in 0..n {
            y += projection[(i, j)] * dofs[j];
        }
        worst = worst.max((y - dofs[i]).abs());
    }
    worst / scale
}

/// C1: every local projector is the identity on affine fields, and the
/// eliminated Poisson system reproduces affine interpolants.
#[test]
fn c01_vem_patch_identities() {
    let t0 = Instant::now();
    let mut n_faces = 0usize;
    let mut n_cells = 0usize;
    let mut worst_face = 0.0f64;
    let mut worst_cell = 0.0f64;
    let mut worst_solve = 0.0f64;
    for (name, mesh) in patch_meshes() {
        let face_ops: Vec<_> = (0..mesh.n_faces())
            .map(|f| face_operators(&mesh, f).unwrap())
            .collect();
        for fo in &face_ops {
            for coeffs in AFFINE_SETS {
                let defect = projector_defect(&fo.projection, &fo.vertex_ids, &mesh, coeffs);
                worst_face = worst_face.max(defect);
                assert!(
                    defect <= 1e-12,
                    "face projector defect {defect:.3e} on {name}"
                );
            }
            n_faces += 1;
        }
        for c in 0..mesh.n_cells() {
            let co = cell_operators(&mesh, c, &face_ops).unwrap();
            for coeffs in AFFINE_SETS {
                let defect = projector_defect(&co.projection, &co.vertex_ids, &mesh, coeffs);
                worst_cell = worst_cell.max(defect);
                assert!(
                    defect <= 1e-12,
                    "cell projector defect {defect:.3e} on {name} cell {c}"
                );
            }
            n_cells += 1;
        }
        let ops = assemble_operators(&mesh).unwrap();
        for coeffs in AFFINE_SETS {
            let err = poisson_patch_solve_error(&mesh, &ops, coeffs).unwrap();
            worst_solve = worst_solve.max(err);
            assert!(
                err <= 1e-10,
                "Poisson patch error {err:.3e} on {name} for {coeffs:?}"
            );
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "patch suite took {elapsed:.1}s");
    println!(
        "ACCEPTANCE C1 PASS: {n_faces} face / {n_cells} cell projectors exact on P1 \
         (worst {worst_face:.2e}/{worst_cell:.2e}), Poisson patch error {worst_solve:.2e}, \
         {elapsed:.2}s"
    );
}

/// C2: lumped masses integrate the measure of the domain and surface;
/// stiffness matrices are symmetric with the constant field in the kernel.
#[test]
fn c02_measure_and_structure() {
    let t0 = Instant::now();
    let mut meshes = patch_meshes();
    meshes.push((
        "graded(L=50,nx=8,fine_layers=1,coarse_levels=2)".into(),
        build_graded_mesh(&GradedMeshSpec {
            domain_edge: 50.0,
            nx: 8,
            fine_layers: 1,
            coarse_levels: 2,
        })
        .unwrap(),
    ));
    for (name, mesh) in &meshes {
        let ops = assemble_operators(mesh).unwrap();
        let l = mesh.domain_edge();
        let volume: f64 = ops.bulk_mass_lumped_full.iter().sum();
        let area: f64 = ops.surface_mass_lumped.iter().sum();
        let vol_rel = (volume - l.powi(3)).abs() / l.powi(3);
        let area_rel = (area - l.powi(2)).abs() / l.powi(2);
        assert!(
            vol_rel <= 1e-10,
            "bulk measure off by {vol_rel:.3e} on {name}"
        );
        assert!(
            area_rel <= 1e-10,
            "surface measure off by {area_rel:.3e} on {name}"
        );

        for (label, a) in [
            ("bulk", &ops.bulk_stiffness_full),
            ("surface", &ops.surface_stiffness),
        ] {
            // Column assembly reassociates sums, so exact symmetry holds up
            // to one rounding of the largest entry.
            let asym = max_asymmetry(a);
            assert!(
                asym <= 1e-13,
                "{label} stiffness asymmetry {asym:.3e} on {name}"
            );
            let max_abs = a.iter().fold(0.0f64, |acc, (v, _)| acc.max(v.abs()));
            let kernel = spmv(a, &vec![1.0; a.cols()])
                .into_iter()
                .fold(0.0f64, |acc, v| acc.max(v.abs()));
            assert!(
                kernel <= 1e-12 * (1.0 + max_abs),
                "{label} stiffness kernel violation {kernel:.3e} on {name}"
            );
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 10.0, "measure suite took {elapsed:.1}s");
    println!(
        "ACCEPTANCE C2 PASS: measures exact to 1e-10 and stiffness symmetric with constant \
         kernel on {} meshes, {elapsed:.2}s",
        meshes.len()
    );
}

/// C3: the closed-form stability inequalities agree with numeric
/// eigenvalues over the whole bifurcation grid.
#[test]
fn c03_stability_grid_agreement() {
    let t0 = Instant::now();
    let mut disagreements = Vec::new();
    for i in 0..50 {
        for j in 0..50 {
            let b = 1.0 + 99.0 * (i as f64) / 49.0;
            let c = 0.1 + 29.9 * (j as f64) / 49.0;
            let report = ModelParameters::baseline(b, c).stability_check().unwrap();
            let inequalities = report.b_condition && report.c_condition;
            let max_re = report
                .eigenvalues
                .iter()
                .fold(f64::NEG_INFINITY, |acc, e| acc.max(e.re));
            let numeric = max_re < 0.0;
            if inequalities != numeric {
                disagreements.push((b, c, max_re));
            }
        }
    }
    assert!(
        disagreements.is_empty(),
        "inequality and eigenvalue verdicts disagree at {disagreements:?}"
    );
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 5.0, "stability grid took {elapsed:.1}s");
    println!(
        "ACCEPTANCE C3 PASS: inequality and eigenvalue verdicts agree at all 2500 grid \
         points, {elapsed:.2}s"
    );
}

fn equilibrium_mesh() -> PolyhedralMesh {
    build_graded_mesh(&GradedMeshSpec {
        domain_edge: 50.0,
        nx: 16,
        fine_layers: 2,
        coarse_levels: 3,
    })
    .unwrap()
}

/// C4: the spatially homogeneous equilibrium is a fixed point of the full
/// discrete stepper.
#[test]
fn c04_equilibrium_fixed_point() {
    let t0 = Instant::now();
    let mesh = equilibrium_mesh();
    let params = find_preset("D3").unwrap().parameters();
    let eq = params.equilibrium();
    let mut ts = TimeSteppingConfig::new(2e-3, 2.0);
    ts.ic_amplitude = 0.0;
    ts.snapshot_every = 0;
    assert_eq!(ts.n_steps(), 1000);
    let result = run_simulation(&mesh, &params, &ts, SimMode::Coupled3d).unwrap();
    let f = &result.final_state;
    let drift = [
        (
            f.b.iter().fold(0.0f64, |a, &v| a.max((v - eq.b).abs())),
            "b",
        ),
        (
            f.q.iter().fold(0.0f64, |a, &v| a.max((v - eq.q).abs())),
            "q",
        ),
        (
            f.eta.iter().fold(0.0f64, |a, &v| a.max((v - eq.eta).abs())),
            "eta",
        ),
        (
            f.theta
                .iter()
                .fold(0.0f64, |a, &v| a.max((v - eq.theta).abs())),
            "theta",
        ),
    ];
    let mut worst = 0.0f64;
    for (d, name) in drift {
        assert!(d <= 1e-12, "{name} drifted {d:.3e} from equilibrium");
        worst = worst.max(d);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "equilibrium run took {elapsed:.1}s");
    println!(
        "ACCEPTANCE C4 PASS: 1000 steps at D3 parameters moved no dof more than \
         {worst:.2e} from equilibrium, {elapsed:.1}s"
    );
}

/// C5: with the couplings off and the bulk at equilibrium, the coupled
/// stepper reproduces the surface-only trajectory step for step.
#[test]
fn c05_decoupled_trajectories_coincide() {
    let t0 = Instant::now();
    let mesh = equilibrium_mesh();
    let mut params = find_preset("D3").unwrap().parameters();
    params.psi_eta = 0.0;
    params.psi_theta = 0.0;
    params.validate().unwrap();
    let mut ts = TimeSteppingConfig::new(2e-3, 1.0);
    ts.snapshot_every = 1;
    assert_eq!(ts.n_steps(), 500);
    let run_3d = run_simulation(&mesh, &params, &ts, SimMode::Coupled3d).unwrap();
    let run_2d = run_simulation(&mesh, &params, &ts, SimMode::Surface2d).unwrap();
    assert_eq!(run_3d.snapshots.len(), run_2d.snapshots.len());
    let mut worst = 0.0f64;
    for (a, b) in run_3d.snapshots.iter().zip(&run_2d.snapshots) {
        assert_eq!(a.step, b.step);
        for (x, y) in a.eta.iter().zip(&b.eta).chain(a.theta.iter().zip(&b.theta)) {
            worst = worst.max((x - y).abs());
        }
    }
    assert!(
        worst <= 1e-10,
        "decoupled trajectories deviate by {worst:.3e}"
    );
    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed < 60.0, "decoupling runs took {elapsed:.1}s");
    println!(
        "ACCEPTANCE C5 PASS: 500-step 3d and 2d trajectories agree to {worst:.2e}, \
         {elapsed:.1}s"
    );
}

static DESK_MESH: LazyLock<PolyhedralMesh> = LazyLock::new(|| {
    build_graded_mesh(&GradedMeshSpec {
        domain_edge: 50.0,
        nx: 32,
        fine_layers: 2,
        coarse_levels: 3,
    })
    .unwrap()
});

static SURFACE_WEIGHTS: LazyLock<Vec<f64>> =
    LazyLock::new(|| assemble_operators(&DESK_MESH).unwrap().surface_mass_lumped);

type RunCache = Mutex<HashMap<(String, SimMode), Arc<RunResult>>>;

/// Full preset run at desk scale, computed once per (preset, mode).
fn desk_run(preset_name: &str, mode: SimMode) -> Arc<RunResult> {
    static CACHE: LazyLock<RunCache> = LazyLock::new(|| Mutex::new(HashMap::new()));
    let key = (preset_name.to_string(), mode);
    if let Some(hit) = CACHE.lock().unwrap().get(&key) {
        return hit.clone();
    }
    let preset = find_preset(preset_name).unwrap();
    let params = preset.parameters();
    let mut ts = preset.time_stepping();
    ts.snapshot_every = 0;
    let result = Arc::new(run_simulation(&DESK_MESH, &params, &ts, mode).unwrap());
    CACHE.lock().unwrap().insert(key, result.clone());
    result
}

fn eta_indicators(run: &RunResult) -> bsdib_core::solver::PatternIndicators {
    pattern_indicators(&run.final_state.eta, &SURFACE_WEIGHTS)
}

/// C6: at the Turing-region presets the coupled model patterns where the
/// surface-only model stays flat; T4 is expected flat in both modes but at
/// different levels.
///
/// Two clauses are known red at the nx=32 desk scale and kept red on
/// purpose; the failure message carries the measured evidence. Both are
/// resolution limits of the desk mesh (see the #[ignore]d companion tests
/// `t2_decay_slows_with_resolution` and
/// `t4_high_branch_at_doubled_resolution`), while T1 and T3 resolve fine.
#[test]
fn c06_turing_region_enlargement() {
    let t0 = Instant::now();
    let mut summary = String::new();
    let mut failures: Vec<String> = Vec::new();
    for name in ["T1", "T2", "T3"] {
        let std_3d = eta_indicators(&desk_run(name, SimMode::Coupled3d)).std;
        let std_2d = eta_indicators(&desk_run(name, SimMode::Surface2d)).std;
        summary.push_str(&format!("{name} std 3d/2d {std_3d:.2e}/{std_2d:.2e}; "));
        if std_3d < PATTERN_STD_THRESHOLD {
            failures.push(format!(
                "{name} 3d should pattern: std {std_3d:.3e} < {PATTERN_STD_THRESHOLD:.0e}"
            ));
        }
        if std_2d >= PATTERN_STD_THRESHOLD {
            failures.push(format!(
                "{name} 2d should stay homogeneous: std {std_2d:.3e}"
            ));
        }
    }
    let i3 = eta_indicators(&desk_run("T4", SimMode::Coupled3d));
    let i2 = eta_indicators(&desk_run("T4", SimMode::Surface2d));
    let gap = (i3.weighted_mean - i2.weighted_mean).abs();
    summary.push_str(&format!(
        "T4 std 3d/2d {:.2e}/{:.2e} level gap {gap:.3}",
        i3.std, i2.std
    ));
    if !(i3.std < PATTERN_STD_THRESHOLD && i2.std < PATTERN_STD_THRESHOLD && gap > 1e-3) {
        failures.push(format!(
            "T4 should be homogeneous in both modes with level gap > 1e-3: measured 3d std \
             {:.3e} (weighted mean {:.4}), 2d std {:.3e} (weighted mean {:.4}), gap {gap:.4}",
            i3.std, i3.weighted_mean, i2.std, i2.weighted_mean
        ));
    }
    let elapsed = t0.elapsed().as_secs_f64();
    if !failures.is_empty() {
        let msg = format!(
            "{} clause(s) fail at the desk scale: {}. Known resolution limits of the nx=32 \
             mesh rather than solver defects. T2's coupled instability sits below the desk \
             resolution: its seeded noise decays at rate ~0.44 per time unit here and still \
             decays at nx=64, but 9x slower (~0.05); the two rates extrapolate in h^2 to a \
             positive growth rate ~+0.08 as h -> 0, consistent with stripes emerging only \
             near production resolution (nx=128). T4's coupled run leaves the unstable base \
             state but pins metastable low-branch holes (steady by T=150, seed- and \
             amplitude-independent) instead of finishing the jump to the homogeneous high \
             branch eta = 1.4714 (largest root of 4x^3 + 2x^2 - 15x + 5 = 0); at nx=64 the \
             same preset ends fully homogeneous at eta mean 1.4713, std 0.0 as expected. \
             Run the #[ignore]d companion tests in this file to reproduce the nx=64 \
             evidence.",
            failures.len(),
            failures.join("; ")
        );
        println!("ACCEPTANCE C6 FAIL: {summary}; {msg} {elapsed:.0}s");
        panic!("{msg}");
    }
    println!("ACCEPTANCE C6 PASS: {summary}, {elapsed:.0}s");
}

/// C7: at D3 both models pattern and the morphologies differ.
#[test]
fn c07_morphology_change() {
    let t0 = Instant::now();
    let run_3d = desk_run("D3", SimMode::Coupled3d);
    let run_2d = desk_run("D3", SimMode::Surface2d);
    let i3 = eta_indicators(&run_3d);
    let i2 = eta_indicators(&run_2d);
    assert!(
        i3.std >= PATTERN_STD_THRESHOLD && i2.std >= PATTERN_STD_THRESHOLD,
        "D3 should pattern in both modes: std 3d {:.3e}, 2d {:.3e}",
        i3.std,
        i2.std
    );
    let distance = rel_l2_distance(
        &run_3d.final_state.eta,
        &run_2d.final_state.eta,
        &SURFACE_WEIGHTS,
    );
    assert!(
        distance > 0.1,
        "D3 3d and 2d fields should differ: relative L2 distance {distance:.4}"
    );
    let elapsed = t0.elapsed().as_secs_f64();
    println!(
        "ACCEPTANCE C7 PASS: D3 patterned in both modes (std {:.2}/{:.2}), relative L2 \
         distance {distance:.3}, skewness 3d {:.2} vs 2d {:.2} (recorded), {elapsed:.0}s",
        i3.std, i2.std, i3.skewness, i2.skewness
    );
}

/// C8: in a patterned coupled run the bulk variation concentrates at the
/// working surface.
#[test]
fn c08_bulk_localization() {
    let run = desk_run("T1", SimMode::Coupled3d);
    let profile = bulk_plane_profile(&DESK_MESH, &run.final_state.b);
    assert!(profile.len() >= 3);
    for w in profile.windows(2) {
        assert!(w[0].0 < w[1].0, "plane z values must ascend");
    }
    let surface_std = profile[0].1;
    let top_interior_std = profile[profile.len() - 2].1;
    let max_std = profile.iter().fold(0.0f64, |a, p| a.max(p.1));
    assert!(
        surface_std == max_std,
        "bulk variation should peak at the surface plane: {surface_std:.3e} vs max {max_std:.3e}"
    );
    assert!(
        surface_std >= 10.0 * top_interior_std,
        "surface plane std {surface_std:.3e} not 10x the topmost interior plane \
         {top_interior_std:.3e}"
    );
    println!(
        "ACCEPTANCE C8 PASS: per-plane std of b peaks at z=0 ({surface_std:.2e}) and is \
         {:.0}x the topmost interior plane ({top_interior_std:.2e})",
        surface_std / top_interior_std
    );
}

/// C9: rerunning a preset with a fixed seed reproduces every CSV byte.
#[test]
fn c09_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let config = parse_run_config("preset = D3\nT = 0.1\nnx = 16\nsnapshot_every = 10\n").unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_to_directory(&config, SimMode::Coupled3d, &out_a, false).unwrap();
    run_to_directory(&config, SimMode::Coupled3d, &out_b, false).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(&out_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    assert!(names.len() >= 3, "expected snapshot series, got {names:?}");
    for name in &names {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert!(a == b, "{name} differs between identical runs");
    }
    println!(
        "ACCEPTANCE C9 PASS: {} CSV files byte-identical across repeated runs",
        names.len()
    );
}

/// C10: the production mesh reports the published resolution.
#[test]
fn c10_production_mesh_counts() {
    let mesh = build_graded_mesh(&GradedMeshSpec {
        domain_edge: 50.0,
        nx: 128,
        fine_layers: 2,
        coarse_levels: 5,
    })
    .unwrap();
    assert_eq!(mesh.n_gamma_vertices(), 129 * 129);
    let total = mesh.n_vertices();
    assert!(
        (5.0e4..=6.0e4).contains(&(total as f64)),
        "total nodes {total} outside [5e4, 6e4]"
    );
    assert_eq!(total, 55632);
    println!("ACCEPTANCE C10 PASS: production mesh has 129x129 surface nodes and {total} total");
}

/// Companion evidence for the C6 red on T2: the decay rate of the seeded
/// noise in the coupled run shrinks roughly as h^2 toward a positive
/// continuum growth rate, so the stripe instability exists but sits below
/// what the desk mesh resolves. Fits the late-time rate sigma of
/// std(eta)(t) ~ exp(sigma t) on short horizons at nx=32 and nx=64 and
/// checks the h^2 extrapolation of the pair is growth. Ignored by default
/// since it takes about 20 minutes; run with `-- --ignored` to reproduce.
#[test]
#[ignore = "long: reruns preset T2 probes at nx=32 and nx=64"]
fn t2_decay_slows_with_resolution() {
    let preset = find_preset("T2").unwrap();
    let mut sigma = [0.0f64; 2];
    let mut h = [0.0f64; 2];
    for (slot, (nx, coarse_levels)) in [(32u32, 3u32), (64, 4)].iter().enumerate() {
        let mesh = build_graded_mesh(&GradedMeshSpec {
            domain_edge: 50.0,
            nx: *nx,
            fine_layers: 2,
            coarse_levels: *coarse_levels,
        })
        .unwrap();
        let ops = assemble_operators(&mesh).unwrap();
        let mut ts = preset.time_stepping();
        ts.t_end = 8.0;
        ts.snapshot_every = 500; // tau = 2e-3, so one snapshot per time unit
        let run = run_simulation(&mesh, &preset.parameters(), &ts, SimMode::Coupled3d).unwrap();
        let stds: Vec<f64> = run
            .snapshots
            .iter()
            .map(|s| pattern_indicators(&s.eta, &ops.surface_mass_lumped).std)
            .collect();
        // Late-time window: the first couple of units hold a kinetic
        // transient; average the last four unit-time log ratios.
        let tail = &stds[stds.len() - 5..];
        sigma[slot] = tail.windows(2).map(|w| (w[1] / w[0]).ln()).sum::<f64>() / 4.0;
        h[slot] = 50.0 / *nx as f64;
    }
    let (s32, s64) = (sigma[0], sigma[1]);
    assert!(s32 < -0.3, "expected strong decay at nx=32, rate {s32:.3}");
    assert!(s64 < 0.0, "expected residual decay at nx=64, rate {s64:.3}");
    assert!(
        s64 > s32 / 5.0,
        "decay should slow at least 5x with resolution: {s32:.3} -> {s64:.3}"
    );
    let slope = (s64 - s32) / (h[0] * h[0] - h[1] * h[1]);
    let continuum = s64 + slope * h[1] * h[1];
    assert!(
        continuum > 0.0,
        "h^2 extrapolation of ({s32:.3}, {s64:.3}) should be growth, got {continuum:.3}"
    );
    println!(
        "T2 decay rates: {s32:.3} at nx=32, {s64:.3} at nx=64; h^2 extrapolation {continuum:+.3} \
         per time unit (growth in the continuum)"
    );
}

/// Companion evidence for the C6 red: one resolution step up (nx=64) the T4
/// preset ends fully homogeneous on the high branch in coupled mode, which
/// is the verdict C6 expects at nx=32. Ignored by default since it takes
/// about half an hour; run with `-- --ignored` to reproduce.
#[test]
#[ignore = "long: reruns preset T4 at nx=64"]
fn t4_high_branch_at_doubled_resolution() {
    let mesh = build_graded_mesh(&GradedMeshSpec {
        domain_edge: 50.0,
        nx: 64,
        fine_layers: 2,
        coarse_levels: 4,
    })
    .unwrap();
    let ops = assemble_operators(&mesh).unwrap();
    let preset = find_preset("T4").unwrap();
    let mut ts = preset.time_stepping();
    ts.snapshot_every = 0;
    let run = run_simulation(&mesh, &preset.parameters(), &ts, SimMode::Coupled3d).unwrap();
    let ind = pattern_indicators(&run.final_state.eta, &ops.surface_mass_lumped);
    assert!(
        ind.std < PATTERN_STD_THRESHOLD,
        "expected homogeneous at nx=64, measured std {:.3e}",
        ind.std
    );
    assert!(
        (ind.weighted_mean - 1.4714).abs() < 1e-2,
        "expected the high branch, measured eta mean {:.4}",
        ind.weighted_mean
    );
    println!(
        "T4 at nx=64: eta weighted mean {:.4}, std {:.2e}; the high-branch homogeneous \
         verdict holds one resolution step above the desk scale",
        ind.weighted_mean, ind.std
    );
}
