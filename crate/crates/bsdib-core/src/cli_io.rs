//! Run configuration, experiment presets, output writers, and comparison
//! reports: everything the command-line front end needs around the solver.
//!
//! Config and parameter files share one flat `name = value` format with `#`
//! comments. A run directory holds the surface fields as CSV, the bulk
//! fields as legacy VTK, the per-step increment series, and a metadata file
//! with everything needed to reproduce the run bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use sprs::CsMat;
use thiserror::Error;

use crate::kinetics::{self, KineticsError, ModelParameters, StabilityReport};
use crate::mesh::{
    build_graded_mesh, build_uniform_mesh, GradedMeshSpec, MeshError, PolyhedralMesh,
};
use crate::solver::{
    pattern_indicators, rel_l2_distance, run_simulation, IncrementNorm, IncrementSeries,
    PatternIndicators, RunResult, SimMode, SolverError, TimeSteppingConfig, PATTERN_STD_THRESHOLD,
};
use crate::vem::{assemble_operators, DiscreteOperators};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    /// Process exit code: 2 config, 3 divergence, 4 I/O, 1 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Kinetics(_) => 2,
            CliError::Mesh(MeshError::InvalidSpec(_)) => 2,
            CliError::Mesh(MeshError::Io(_))
            | CliError::Mesh(MeshError::MalformedFile(_))
            | CliError::Mesh(MeshError::UnexpectedEof) => 4,
            CliError::Mesh(_) => 1,
            CliError::Solver(SolverError::NonFinite { .. }) => 3,
            CliError::Solver(SolverError::InvalidConfig(_)) => 2,
            CliError::Solver(_) => 1,
            CliError::Io { .. } => 4,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One row of the experiment table: bifurcation point, coupling, horizon,
/// and the morphologies the two models are expected to settle into.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentPreset {
    pub name: &'static str,
    pub a2: f64,
    pub b_coef: f64,
    pub c_coef: f64,
    pub gamma: f64,
    /// Applied to both coupling constants.
    pub psi: f64,
    pub t_end: f64,
    pub tau: f64,
    pub pattern_3d: &'static str,
    pub pattern_2d: &'static str,
}

/// The eight standard experiments. T1 through T4 pick bifurcation points
/// where only the coupled model patterns; D1 through D4 pick a point where
/// both do, with different morphologies.
pub const PRESETS: [ExperimentPreset; 8] = [
    ExperimentPreset {
        name: "T1",
        a2: 1.0,
        b_coef: 50.0,
        c_coef: 10.0,
        gamma: 0.0,
        psi: 0.5,
        t_end: 200.0,
        tau: 2e-3,
        pattern_3d: "Thin worms",
        pattern_2d: "homogeneous",
    },
    ExperimentPreset {
        name: "T2",
        a2: 1.0,
        b_coef: 75.0,
        c_coef: 5.0,
        gamma: 0.0,
        psi: 0.3,
        t_end: 200.0,
        tau: 2e-3,
        pattern_3d: "Stripes",
        pattern_2d: "homogeneous",
    },
    ExperimentPreset {
        name: "T3",
        a2: 1.0,
        b_coef: 35.0,
        c_coef: 15.0,
        gamma: 0.0,
        psi: 0.5,
        t_end: 100.0,
        tau: 5e-3,
        pattern_3d: "Holes",
        pattern_2d: "homogeneous",
    },
    ExperimentPreset {
        name: "T4",
        a2: 1.0,
        b_coef: 30.0,
        c_coef: 20.0,
        gamma: 0.0,
        psi: 0.5,
        t_end: 50.0,
        tau: 5e-3,
        pattern_3d: "homogeneous (different from 2D)",
        pattern_2d: "homogeneous",
    },
    ExperimentPreset {
        name: "D1",
        a2: 1.0,
        b_coef: 66.0,
        c_coef: 3.0,
        gamma: 0.2,
        psi: 0.1,
        t_end: 200.0,
        tau: 5e-3,
        pattern_3d: "Holes and worms",
        pattern_2d: "Labyrinth",
    },
    ExperimentPreset {
        name: "D2",
        a2: 1.0,
        b_coef: 66.0,
        c_coef: 3.0,
        gamma: 0.2,
        psi: 0.15,
        t_end: 50.0,
        tau: 2e-3,
        pattern_3d: "Holes and small worms",
        pattern_2d: "Labyrinth",
    },
    ExperimentPreset {
        name: "D3",
        a2: 1.0,
        b_coef: 66.0,
        c_coef: 3.0,
        gamma: 0.2,
        psi: 0.2,
        t_end: 50.0,
        tau: 2e-3,
        pattern_3d: "Holes",
        pattern_2d: "Labyrinth",
    },
    ExperimentPreset {
        name: "D4",
        a2: 1.0,
        b_coef: 3.0,
        c_coef: 30.0,
        gamma: 0.2,
        psi: 0.1,
        t_end: 200.0,
        tau: 5e-3,
        pattern_3d: "Holes",
        pattern_2d: "Bigger Holes",
    },
];

pub fn find_preset(name: &str) -> Option<&'static ExperimentPreset> {
    PRESETS.iter().find(|p| p.name.eq_ignore_ascii_case(name))
}

impl ExperimentPreset {
    pub fn parameters(&self) -> ModelParameters {
        let mut params = ModelParameters::baseline(self.b_coef, self.c_coef);
        params.a2 = self.a2;
        params.gamma = self.gamma;
        params.psi_eta = self.psi;
        params.psi_theta = self.psi;
        params.refresh_derived_d();
        params
    }

    pub fn time_stepping(&self) -> TimeSteppingConfig {
        TimeSteppingConfig::new(self.tau, self.t_end)
    }
}

/// The preset table in its checked-in text form, one CSV row per preset.
pub fn render_presets_csv() -> String {
    let mut out = String::from("name,A2,B,C,gamma,psi,T,tau,pattern_3d,pattern_2d\n");
    for p in &PRESETS {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            p.name,
            p.a2,
            p.b_coef,
            p.c_coef,
            p.gamma,
            p.psi,
            p.t_end,
            p.tau,
            p.pattern_3d,
            p.pattern_2d
        )
        .unwrap();
    }
    out
}

/// Which mesh a run is carried out on.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSpec {
    Graded(GradedMeshSpec),
    Uniform { domain_edge: f64, nx: u32 },
}

impl MeshSpec {
    /// Desk-scale default: fine near the working surface, aggressively
    /// coarsened above, on the standard domain.
    pub fn desk_default() -> Self {
        MeshSpec::Graded(GradedMeshSpec {
            domain_edge: 50.0,
            nx: 32,
            fine_layers: 2,
            coarse_levels: 3,
        })
    }

    pub fn build(&self) -> Result<PolyhedralMesh, MeshError> {
        match self {
            MeshSpec::Graded(spec) => build_graded_mesh(spec),
            MeshSpec::Uniform { domain_edge, nx } => build_uniform_mesh(*domain_edge, *nx),
        }
    }

    /// Canonical one-line form, accepted back by [`MeshSpec::parse`].
    pub fn describe(&self) -> String {
        match self {
            MeshSpec::Graded(s) => format!(
                "graded:L={},nx={},fine_layers={},coarse_levels={}",
                s.domain_edge, s.nx, s.fine_layers, s.coarse_levels
            ),
            MeshSpec::Uniform { domain_edge, nx } => {
                format!("uniform:L={},nx={}", domain_edge, nx)
            }
        }
    }

    pub fn parse(text: &str) -> Result<MeshSpec, CliError> {
        let (kind, rest) = text.split_once(':').ok_or_else(|| {
            CliError::Config(format!("mesh spec `{text}` lacks a `kind:` prefix"))
        })?;
        let mut fields = std::collections::HashMap::new();
        for part in rest.split(',') {
            let (k, v) = part.split_once('=').ok_or_else(|| {
                CliError::Config(format!("mesh spec field `{part}` is not `key=value`"))
            })?;
            fields.insert(k.trim().to_string(), v.trim().to_string());
        }
        let take_f64 = |fields: &std::collections::HashMap<String, String>, key: &str| {
            fields
                .get(key)
                .ok_or_else(|| CliError::Config(format!("mesh spec misses `{key}`")))?
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("mesh spec `{key}` is not a number")))
        };
        let take_u32 = |fields: &std::collections::HashMap<String, String>, key: &str| {
            fields
                .get(key)
                .ok_or_else(|| CliError::Config(format!("mesh spec misses `{key}`")))?
                .parse::<u32>()
                .map_err(|_| CliError::Config(format!("mesh spec `{key}` is not an integer")))
        };
        let spec = match kind.trim() {
            "graded" => MeshSpec::Graded(GradedMeshSpec {
                domain_edge: take_f64(&fields, "L")?,
                nx: take_u32(&fields, "nx")?,
                fine_layers: take_u32(&fields, "fine_layers")?,
                coarse_levels: take_u32(&fields, "coarse_levels")?,
            }),
            "uniform" => MeshSpec::Uniform {
                domain_edge: take_f64(&fields, "L")?,
                nx: take_u32(&fields, "nx")?,
            },
            other => {
                return Err(CliError::Config(format!(
                    "unknown mesh kind `{other}` (expected graded or uniform)"
                )))
            }
        };
        let expected = match &spec {
            MeshSpec::Graded(_) => 4,
            MeshSpec::Uniform { .. } => 2,
        };
        if fields.len() != expected {
            return Err(CliError::Config(format!(
                "mesh spec `{text}` has extra fields"
            )));
        }
        Ok(spec)
    }
}

/// Fully resolved run: model constants, mesh, and time stepping.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset_name: Option<String>,
    pub params: ModelParameters,
    pub mesh: MeshSpec,
    pub ts: TimeSteppingConfig,
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    parse_run_config(&text)
}

/// Parse a run config. Lines apply in order: a `preset` line loads the
/// experiment's constants and horizon, later keys override single values.
/// Without a preset, `B`, `C`, `psi` (or both `psi_eta` and `psi_theta`),
/// `T`, and `tau` are required.
pub fn parse_run_config(text: &str) -> Result<RunConfig, CliError> {
    let mut preset_name = None;
    let mut params = ModelParameters::baseline(1.0, 1.0);
    let mut mesh_kind: Option<String> = None;
    let mut domain_edge = 50.0f64;
    let mut nx = 32u32;
    let mut fine_layers = 2u32;
    let mut coarse_levels = 3u32;
    let mut ts = TimeSteppingConfig::new(f64::NAN, f64::NAN);
    let mut snapshot_every: Option<usize> = None;
    let mut seen = std::collections::HashSet::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let Some((key, value)) = kinetics::split_key_value(raw, line_no)? else {
            continue;
        };
        let bad_number = || CliError::Config(format!("line {line_no}: `{key}` is not a number"));
        let bad_integer = || CliError::Config(format!("line {line_no}: `{key}` is not an integer"));
        match key {
            "preset" => {
                let preset = find_preset(value).ok_or_else(|| {
                    CliError::Config(format!("line {line_no}: unknown preset `{value}`"))
                })?;
                preset_name = Some(preset.name.to_string());
                params = preset.parameters();
                ts.tau = preset.tau;
                ts.t_end = preset.t_end;
                seen.extend(["B", "C", "psi", "T", "tau"]);
            }
            "mesh" => mesh_kind = Some(value.to_string()),
            "L" => domain_edge = value.parse().map_err(|_| bad_number())?,
            "nx" => nx = value.parse().map_err(|_| bad_integer())?,
            "fine_layers" => fine_layers = value.parse().map_err(|_| bad_integer())?,
            "coarse_levels" => coarse_levels = value.parse().map_err(|_| bad_integer())?,
            "T" => {
                ts.t_end = value.parse().map_err(|_| bad_number())?;
                seen.insert("T");
            }
            "tau" => {
                ts.tau = value.parse().map_err(|_| bad_number())?;
                seen.insert("tau");
            }
            "seed" => ts.seed = value.parse().map_err(|_| bad_integer())?,
            "ic_amplitude" => ts.ic_amplitude = value.parse().map_err(|_| bad_number())?,
            "max_field" => ts.max_field = value.parse().map_err(|_| bad_number())?,
            "snapshot_every" => snapshot_every = Some(value.parse().map_err(|_| bad_integer())?),
            "increment_norm" => {
                ts.increment_norm = match value {
                    "l2" => IncrementNorm::L2,
                    "linf" => IncrementNorm::Linf,
                    other => {
                        return Err(CliError::Config(format!(
                            "line {line_no}: unknown increment norm `{other}` (expected l2 or linf)"
                        )))
                    }
                }
            }
            _ if kinetics::is_parameter_key(key) => {
                params.set_parameter(key, value, line_no)?;
                if matches!(key, "B" | "C") {
                    seen.insert(if key == "B" { "B" } else { "C" });
                }
                if matches!(key, "psi" | "psi_eta" | "psi_theta") {
                    seen.insert("psi");
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "line {line_no}: unknown config key `{other}`"
                )))
            }
        }
    }

    if text.lines().all(|l| {
        let t = l.split('#').next().unwrap_or("").trim();
        t.is_empty()
    }) {
        return Err(CliError::Config("missing preset or parameters".into()));
    }
    for required in ["B", "C", "psi", "T", "tau"] {
        if !seen.contains(required) {
            return Err(CliError::Config(format!(
                "missing required key `{required}` (or a preset that provides it)"
            )));
        }
    }

    params.refresh_derived_d();
    params.validate()?;
    ts.validate()?;
    // Default cadence: about a hundred evenly spaced snapshots.
    ts.snapshot_every = snapshot_every.unwrap_or_else(|| (ts.n_steps() / 100).max(1));

    let mesh = match mesh_kind.as_deref() {
        None | Some("graded") => MeshSpec::Graded(GradedMeshSpec {
            domain_edge,
            nx,
            fine_layers,
            coarse_levels,
        }),
        Some("uniform") => MeshSpec::Uniform { domain_edge, nx },
        Some(other) => {
            return Err(CliError::Config(format!(
                "unknown mesh kind `{other}` (expected graded or uniform)"
            )))
        }
    };
    if let MeshSpec::Graded(spec) = &mesh {
        spec.validate()?;
    }
    Ok(RunConfig {
        preset_name,
        params,
        mesh,
        ts,
    })
}

pub fn parse_mode(text: &str) -> Result<SimMode, CliError> {
    match text {
        "3d" => Ok(SimMode::Coupled3d),
        "2d" => Ok(SimMode::Surface2d),
        other => Err(CliError::Config(format!(
            "unknown mode `{other}` (expected 3d or 2d)"
        ))),
    }
}

pub fn mode_name(mode: SimMode) -> &'static str {
    match mode {
        SimMode::Coupled3d => "3d",
        SimMode::Surface2d => "2d",
    }
}

/// Surface fields, one row per surface node in node order, 17 significant
/// digits throughout.
pub fn write_surface_csv(
    path: &Path,
    mesh: &PolyhedralMesh,
    eta: &[f64],
    theta: &[f64],
) -> Result<(), CliError> {
    let n = mesh.n_gamma_vertices();
    assert_eq!(eta.len(), n);
    assert_eq!(theta.len(), n);
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> io::Result<()> {
        writeln!(w, "x,y,eta,theta")?;
        for k in 0..n {
            let p = mesh.vertex(k);
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                p[0], p[1], eta[k], theta[k]
            )?;
        }
        w.flush()
    };
    write().map_err(io_err(path))
}

/// Columns of a surface CSV, in file order.
#[derive(Debug, Clone, Default)]
pub struct SurfaceFields {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
}

pub fn read_surface_csv(path: &Path) -> Result<SurfaceFields, CliError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut out = SurfaceFields::default();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if idx == 0 {
            if line.trim() != "x,y,eta,theta" {
                return Err(CliError::Config(format!(
                    "{}: unexpected surface CSV header `{line}`",
                    path.display()
                )));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let mut values = [0.0f64; 4];
        let mut parts = line.split(',');
        for slot in values.iter_mut() {
            *slot = parts
                .next()
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| {
                    CliError::Config(format!("{}: malformed CSV row {}", path.display(), idx + 1))
                })?;
        }
        out.x.push(values[0]);
        out.y.push(values[1]);
        out.eta.push(values[2]);
        out.theta.push(values[3]);
    }
    Ok(out)
}

/// Bulk fields on the full polyhedral mesh as an ASCII legacy VTK
/// unstructured grid of polyhedron cells with point scalars `b` and `q`.
pub fn write_vtk_legacy(
    path: &Path,
    mesh: &PolyhedralMesh,
    b: &[f64],
    q: &[f64],
) -> Result<(), CliError> {
    assert_eq!(b.len(), mesh.n_vertices());
    assert_eq!(q.len(), mesh.n_vertices());
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> io::Result<()> {
        writeln!(w, "# vtk DataFile Version 2.0")?;
        writeln!(w, "bulk concentration fields")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", mesh.n_vertices())?;
        for v in 0..mesh.n_vertices() {
            let p = mesh.vertex(v);
            writeln!(w, "{:.16e} {:.16e} {:.16e}", p[0], p[1], p[2])?;
        }
        // Polyhedron cell streams: total count of trailing integers, number
        // of faces, then each face as its vertex count and ids.
        let mut streams: Vec<Vec<usize>> = Vec::with_capacity(mesh.n_cells());
        for c in 0..mesh.n_cells() {
            let mut stream = Vec::new();
            let faces: Vec<usize> = mesh.cell(c).map(|(f, _)| f).collect();
            stream.push(faces.len());
            for f in faces {
                let verts = mesh.face(f);
                stream.push(verts.len());
                stream.extend(verts.iter().map(|&v| v as usize));
            }
            streams.push(stream);
        }
        let total: usize = streams.iter().map(|s| s.len() + 1).sum();
        writeln!(w, "CELLS {} {}", mesh.n_cells(), total)?;
        for stream in &streams {
            write!(w, "{}", stream.len())?;
            for v in stream {
                write!(w, " {v}")?;
            }
            writeln!(w)?;
        }
        writeln!(w, "CELL_TYPES {}", mesh.n_cells())?;
        for _ in 0..mesh.n_cells() {
            writeln!(w, "42")?;
        }
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, field) in [("b", b), ("q", q)] {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for value in field {
                writeln!(w, "{value:.16e}")?;
            }
        }
        w.flush()
    };
    write().map_err(io_err(path))
}

pub fn write_increments_csv(path: &Path, series: &IncrementSeries) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> io::Result<()> {
        writeln!(w, "step,time,eta_increment,theta_increment")?;
        for i in 0..series.times.len() {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e}",
                i + 1,
                series.times[i],
                series.eta[i],
                series.theta[i]
            )?;
        }
        w.flush()
    };
    write().map_err(io_err(path))
}

/// Sparse matrix in coordinate text form: `row col value` per stored entry,
/// sorted row-major, 17 significant digits.
pub fn dump_matrix(path: &Path, matrix: &CsMat<f64>) -> Result<(), CliError> {
    let mut entries: Vec<(usize, usize, f64)> = matrix
        .iter()
        .map(|(value, (row, col))| (row, col, *value))
        .collect();
    entries.sort_by_key(|&(r, c, _)| (r, c));
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> io::Result<()> {
        for (r, c, v) in &entries {
            writeln!(w, "{r} {c} {v:.16e}")?;
        }
        w.flush()
    };
    write().map_err(io_err(path))
}

fn dump_diagonal(path: &Path, diag: &[f64]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> io::Result<()> {
        for (i, v) in diag.iter().enumerate() {
            writeln!(w, "{i} {i} {v:.16e}")?;
        }
        w.flush()
    };
    write().map_err(io_err(path))
}

/// Debug dump of the assembled global operators into a directory.
pub fn dump_operators(out_dir: &Path, ops: &DiscreteOperators) -> Result<(), CliError> {
    dump_matrix(
        &out_dir.join("bulk_stiffness.txt"),
        &ops.bulk_stiffness_full,
    )?;
    dump_diagonal(
        &out_dir.join("bulk_mass_lumped.txt"),
        &ops.bulk_mass_lumped_full,
    )?;
    dump_matrix(
        &out_dir.join("surface_stiffness.txt"),
        &ops.surface_stiffness,
    )?;
    dump_diagonal(
        &out_dir.join("surface_mass_lumped.txt"),
        &ops.surface_mass_lumped,
    )?;
    Ok(())
}

fn format_params(params: &ModelParameters) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: f64| writeln!(s, "{k} = {v}").unwrap();
    kv("d_omega", params.d_omega);
    kv("d_gamma", params.d_gamma);
    kv("k_b", params.k_b);
    kv("k_q", params.k_q);
    kv("b0", params.b0);
    kv("q0", params.q0);
    kv("rho", params.rho);
    kv("alpha", params.alpha);
    kv("gamma", params.gamma);
    kv("A1", params.a1);
    kv("A2", params.a2);
    kv("B", params.b_coef);
    kv("C", params.c_coef);
    kv("D", params.d_coef);
    kv("k2", params.k2);
    kv("k3", params.k3);
    kv("psi_eta", params.psi_eta);
    kv("psi_theta", params.psi_theta);
    writeln!(s, "D_derived = {}", params.d_is_derived).unwrap();
    s
}

/// Everything needed to reproduce the run plus per-stage wall clock.
pub fn write_metadata(
    path: &Path,
    config: &RunConfig,
    mode: SimMode,
    result: &RunResult,
    mesh_build_seconds: f64,
) -> Result<(), CliError> {
    let mut s = String::new();
    writeln!(s, "version = {}", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(s, "mode = {}", mode_name(mode)).unwrap();
    writeln!(
        s,
        "preset = {}",
        config.preset_name.as_deref().unwrap_or("none")
    )
    .unwrap();
    writeln!(s, "mesh = {}", config.mesh.describe()).unwrap();
    writeln!(s, "seed = {}", config.ts.seed).unwrap();
    writeln!(s, "tau = {}", config.ts.tau).unwrap();
    writeln!(s, "T = {}", config.ts.t_end).unwrap();
    writeln!(s, "n_steps = {}", result.n_steps).unwrap();
    writeln!(s, "ic_amplitude = {}", config.ts.ic_amplitude).unwrap();
    writeln!(s, "snapshot_every = {}", config.ts.snapshot_every).unwrap();
    // The increment norm is a per-step ||difference||; it is not normalized.
    writeln!(s, "increment_norm = {}", config.ts.increment_norm.name()).unwrap();
    writeln!(s, "max_field = {}", config.ts.max_field).unwrap();
    s.push_str(&format_params(&config.params));
    writeln!(s, "growing_increments = {}", result.growing_increments).unwrap();
    writeln!(s, "mesh_build_seconds = {:.3}", mesh_build_seconds).unwrap();
    writeln!(s, "assembly_seconds = {:.3}", result.stage_times.assembly).unwrap();
    writeln!(
        s,
        "factorization_seconds = {:.3}",
        result.stage_times.factorization
    )
    .unwrap();
    writeln!(s, "stepping_seconds = {:.3}", result.stage_times.stepping).unwrap();
    fs::write(path, s).map_err(io_err(path))
}

/// Paths produced by [`run_to_directory`].
pub struct RunArtifacts {
    pub result: RunResult,
    pub surface_csv: PathBuf,
    pub bulk_vtk: Option<PathBuf>,
    pub increments_csv: PathBuf,
    pub metadata: PathBuf,
}

/// Build the mesh, run the simulation, and write the run directory:
/// `surface_final.csv`, intermediate `surface_step*.csv` at the snapshot
/// cadence, `bulk_final.vtk` (coupled mode), `increments.csv`,
/// `metadata.txt`, and optionally the assembled operator dumps.
pub fn run_to_directory(
    config: &RunConfig,
    mode: SimMode,
    out_dir: &Path,
    dump_matrices: bool,
) -> Result<RunArtifacts, CliError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let t0 = Instant::now();
    let mesh = config.mesh.build()?;
    let mesh_build_seconds = t0.elapsed().as_secs_f64();

    let result = run_simulation(&mesh, &config.params, &config.ts, mode)?;

    for snap in &result.snapshots {
        if snap.step == result.n_steps {
            continue;
        }
        let name = format!("surface_step{:08}.csv", snap.step);
        write_surface_csv(&out_dir.join(name), &mesh, &snap.eta, &snap.theta)?;
    }
    let surface_csv = out_dir.join("surface_final.csv");
    write_surface_csv(
        &surface_csv,
        &mesh,
        &result.final_state.eta,
        &result.final_state.theta,
    )?;
    let bulk_vtk = match mode {
        SimMode::Coupled3d => {
            let path = out_dir.join("bulk_final.vtk");
            write_vtk_legacy(&path, &mesh, &result.final_state.b, &result.final_state.q)?;
            Some(path)
        }
        SimMode::Surface2d => None,
    };
    let increments_csv = out_dir.join("increments.csv");
    write_increments_csv(&increments_csv, &result.increments)?;
    if dump_matrices {
        let ops = assemble_operators(&mesh).map_err(SolverError::from)?;
        dump_operators(out_dir, &ops)?;
    }
    let metadata = out_dir.join("metadata.txt");
    write_metadata(&metadata, config, mode, &result, mesh_build_seconds)?;
    Ok(RunArtifacts {
        result,
        surface_csv,
        bulk_vtk,
        increments_csv,
        metadata,
    })
}

/// Side-by-side surface-field statistics of two runs on the same mesh.
#[derive(Debug, Clone, Copy)]
pub struct RunComparison {
    pub eta_a: PatternIndicators,
    pub eta_b: PatternIndicators,
    pub a_patterned: bool,
    pub b_patterned: bool,
    /// Relative weighted-L2 distances between the two runs' fields.
    pub eta_distance: f64,
    pub theta_distance: f64,
    /// Gap between the weighted means of eta; separates two homogeneous
    /// steady states that settled at different levels.
    pub eta_mean_gap: f64,
}

/// Compare two surface solutions under a common weight vector. The verdict
/// threshold separates grown patterns from decayed noise.
pub fn compare_surface_fields(
    eta_a: &[f64],
    theta_a: &[f64],
    eta_b: &[f64],
    theta_b: &[f64],
    weights: &[f64],
) -> RunComparison {
    let ia = pattern_indicators(eta_a, weights);
    let ib = pattern_indicators(eta_b, weights);
    RunComparison {
        eta_a: ia,
        eta_b: ib,
        a_patterned: ia.std >= PATTERN_STD_THRESHOLD,
        b_patterned: ib.std >= PATTERN_STD_THRESHOLD,
        eta_distance: rel_l2_distance(eta_a, eta_b, weights),
        theta_distance: rel_l2_distance(theta_a, theta_b, weights),
        eta_mean_gap: (ia.weighted_mean - ib.weighted_mean).abs(),
    }
}

/// Compare the final surface fields of two run directories. The runs must
/// be on the same surface mesh; node coordinates are required to match.
pub fn compare_run_directories(a: &Path, b: &Path) -> Result<RunComparison, CliError> {
    let fa = read_surface_csv(&a.join("surface_final.csv"))?;
    let fb = read_surface_csv(&b.join("surface_final.csv"))?;
    if fa.x.len() != fb.x.len() {
        return Err(CliError::Config(format!(
            "surface meshes differ: {} vs {} nodes",
            fa.x.len(),
            fb.x.len()
        )));
    }
    let scale =
        fa.x.iter()
            .chain(&fa.y)
            .fold(1.0f64, |acc, v| acc.max(v.abs()));
    for k in 0..fa.x.len() {
        if (fa.x[k] - fb.x[k]).abs() > 1e-12 * scale || (fa.y[k] - fb.y[k]).abs() > 1e-12 * scale {
            return Err(CliError::Config(format!(
                "surface meshes differ at node {k}"
            )));
        }
    }
    // Directory comparisons weight nodes equally: the exact quadrature
    // weights live with the mesh, not the CSV, and the verdicts only need
    // order-of-magnitude statistics.
    let weights = vec![1.0; fa.x.len()];
    Ok(compare_surface_fields(
        &fa.eta, &fa.theta, &fb.eta, &fb.theta, &weights,
    ))
}

pub fn render_comparison(cmp: &RunComparison, name_a: &str, name_b: &str) -> String {
    let verdict = |patterned: bool| {
        if patterned {
            "patterned"
        } else {
            "homogeneous"
        }
    };
    let mut s = String::new();
    for (name, ind, patterned) in [
        (name_a, &cmp.eta_a, cmp.a_patterned),
        (name_b, &cmp.eta_b, cmp.b_patterned),
    ] {
        writeln!(
            s,
            "{name}: eta mean {:.6} std {:.6} min {:.6} max {:.6} skew {:.3} -> {}",
            ind.weighted_mean,
            ind.std,
            ind.min,
            ind.max,
            ind.skewness,
            verdict(patterned)
        )
        .unwrap();
    }
    writeln!(
        s,
        "relative L2 distance: eta {:.6} theta {:.6}",
        cmp.eta_distance, cmp.theta_distance
    )
    .unwrap();
    writeln!(s, "eta mean gap: {:.6}", cmp.eta_mean_gap).unwrap();
    s
}

pub fn render_stability(report: &StabilityReport) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "surface block: trace {} det {}",
        report.trace_surface, report.det_surface
    )
    .unwrap();
    writeln!(
        s,
        "B condition (threshold {}): {}",
        report.b_threshold, report.b_condition
    )
    .unwrap();
    writeln!(
        s,
        "C condition (threshold {}): {}",
        report.c_threshold, report.c_condition
    )
    .unwrap();
    for (i, e) in report.eigenvalues.iter().enumerate() {
        writeln!(s, "eigenvalue {}: {} + {}i", i + 1, e.re, e.im).unwrap();
    }
    writeln!(
        s,
        "equilibrium: {}",
        if report.stable { "stable" } else { "unstable" }
    )
    .unwrap();
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_uniform_mesh;

    #[test]
    fn presets_match_the_checked_in_golden_table() {
        let golden = include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/tests/data/presets_golden.csv"
        ));
        assert_eq!(render_presets_csv(), golden);
    }

    #[test]
    fn preset_lookup_resolves_the_full_parameter_set() {
        let d3 = find_preset("D3").unwrap();
        assert_eq!(
            (d3.b_coef, d3.c_coef, d3.gamma, d3.psi),
            (66.0, 3.0, 0.2, 0.2)
        );
        assert_eq!((d3.t_end, d3.tau), (50.0, 2e-3));
        let params = d3.parameters();
        assert_eq!(params.psi_eta, 0.2);
        assert!(params.d_is_derived);
        assert!(find_preset("t1").is_some());
        assert!(find_preset("T9").is_none());
    }

    #[test]
    fn config_files_resolve_presets_and_overrides() {
        let config = parse_run_config("preset = D3\n").unwrap();
        assert_eq!(config.preset_name.as_deref(), Some("D3"));
        assert_eq!(config.params.b_coef, 66.0);
        assert_eq!(config.ts.tau, 2e-3);
        assert_eq!(config.ts.t_end, 50.0);
        assert_eq!(config.mesh, MeshSpec::desk_default());
        // 25000 steps at the default cadence leave 100 snapshots.
        assert_eq!(config.ts.snapshot_every, 250);

        let config = parse_run_config("preset = D3\nB = 70\nnx = 16\nseed = 9\n").unwrap();
        assert_eq!(config.params.b_coef, 70.0);
        assert_eq!(config.ts.seed, 9);
        match config.mesh {
            MeshSpec::Graded(s) => assert_eq!(s.nx, 16),
            _ => panic!("expected graded mesh"),
        }

        let explicit = parse_run_config(
            "B = 66\nC = 3\npsi = 0.2\nT = 1\ntau = 0.01\nmesh = uniform\nL = 1\nnx = 2\n",
        )
        .unwrap();
        assert!(explicit.preset_name.is_none());
        assert_eq!(
            explicit.mesh,
            MeshSpec::Uniform {
                domain_edge: 1.0,
                nx: 2
            }
        );
    }

    #[test]
    fn config_errors_are_specific() {
        let err = parse_run_config("").unwrap_err();
        assert!(err.to_string().contains("missing preset or parameters"));
        let err = parse_run_config("B = 66\nC = 3\n").unwrap_err();
        assert!(err.to_string().contains("missing required key"));
        let err = parse_run_config("preset = D3\nwibble = 3\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = parse_run_config("preset = Z9\n").unwrap_err();
        assert!(err.to_string().contains("unknown preset"));
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn mesh_specs_round_trip_through_their_text_form() {
        for spec in [
            MeshSpec::desk_default(),
            MeshSpec::Uniform {
                domain_edge: 1.5,
                nx: 4,
            },
            MeshSpec::Graded(GradedMeshSpec {
                domain_edge: 50.0,
                nx: 128,
                fine_layers: 2,
                coarse_levels: 5,
            }),
        ] {
            let text = spec.describe();
            assert_eq!(MeshSpec::parse(&text).unwrap(), spec);
        }
        assert!(MeshSpec::parse("graded:L=50").is_err());
        assert!(MeshSpec::parse("spherical:r=1").is_err());
        assert!(MeshSpec::parse("uniform:L=1,nx=2,extra=3").is_err());
    }

    #[test]
    fn surface_csv_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_uniform_mesh(1.0, 1).unwrap();
        let eta = vec![0.25, -1.5, 3.0e-7, 0.0];
        let theta = vec![0.5, 0.5, 0.5, 0.5];
        let path = dir.path().join("surface.csv");
        write_surface_csv(&path, &mesh, &eta, &theta).unwrap();
        let fields = read_surface_csv(&path).unwrap();
        assert_eq!(fields.eta, eta);
        assert_eq!(fields.theta, theta);
        assert_eq!(fields.x.len(), 4);
        for k in 0..4 {
            let p = mesh.vertex(k);
            assert_eq!(fields.x[k], p[0]);
            assert_eq!(fields.y[k], p[1]);
        }
    }

    #[test]
    fn vtk_writer_emits_polyhedron_cells() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_uniform_mesh(1.0, 1).unwrap();
        let b = vec![1.0; 8];
        let q = vec![2.0; 8];
        let path = dir.path().join("bulk.vtk");
        write_vtk_legacy(&path, &mesh, &b, &q).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 2.0\n"));
        assert!(text.contains("DATASET UNSTRUCTURED_GRID"));
        assert!(text.contains("POINTS 8 double"));
        assert!(text.contains("CELL_TYPES 1\n42"));
        assert!(text.contains("SCALARS b double 1"));
        assert!(text.contains("SCALARS q double 1"));
        // One cube: 6 faces, each 4 vertices. Stream length 1 + 6*(1+4) = 31,
        // plus the leading count itself in the CELLS size column.
        assert!(text.contains("CELLS 1 32"));
        let cell_line = text
            .lines()
            .skip_while(|l| !l.starts_with("CELLS"))
            .nth(1)
            .unwrap();
        let ints: Vec<usize> = cell_line
            .split_whitespace()
            .map(|t| t.parse().unwrap())
            .collect();
        assert_eq!(ints[0], 31);
        assert_eq!(ints[1], 6);
        assert_eq!(ints[2], 4);
    }

    #[test]
    fn matrix_dump_is_sorted_row_major() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = sprs::TriMat::new((3, 3));
        t.add_triplet(2, 0, 1.5);
        t.add_triplet(0, 1, -2.0);
        t.add_triplet(0, 0, 4.0);
        let path = dir.path().join("m.txt");
        dump_matrix(&path, &t.to_csc()).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().collect();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].starts_with("0 0 4.0"));
        assert!(rows[1].starts_with("0 1 -2.0"));
        assert!(rows[2].starts_with("2 0 1.5"));
    }

    #[test]
    fn run_directories_are_deterministic_and_comparable() {
        let dir = tempfile::tempdir().unwrap();
        let config = parse_run_config(
            "B = 66\nC = 3\npsi = 0\nT = 0.05\ntau = 0.01\nmesh = uniform\nL = 1\nnx = 2\nsnapshot_every = 2\n",
        )
        .unwrap();
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let arts_a = run_to_directory(&config, SimMode::Coupled3d, &out_a, false).unwrap();
        let arts_b = run_to_directory(&config, SimMode::Coupled3d, &out_b, false).unwrap();
        let bytes_a = fs::read(&arts_a.surface_csv).unwrap();
        let bytes_b = fs::read(&arts_b.surface_csv).unwrap();
        assert_eq!(bytes_a, bytes_b);
        assert!(arts_a.bulk_vtk.is_some());
        assert!(out_a.join("surface_step00000002.csv").exists());
        let meta = fs::read_to_string(&arts_a.metadata).unwrap();
        assert!(meta.contains("seed = 42"));
        assert!(meta.contains("mesh = uniform:L=1,nx=2"));
        assert!(meta.contains("increment_norm = l2"));
        assert!(meta.contains("stepping_seconds"));

        let cmp = compare_run_directories(&out_a, &out_b).unwrap();
        assert_eq!(cmp.eta_distance, 0.0);
        assert_eq!(cmp.theta_distance, 0.0);
        assert_eq!(cmp.eta_mean_gap, 0.0);
        let rendered = render_comparison(&cmp, "a", "b");
        assert!(rendered.contains("relative L2 distance"));
    }

    #[test]
    fn directory_comparison_rejects_different_meshes() {
        let dir = tempfile::tempdir().unwrap();
        let mesh_a = build_uniform_mesh(1.0, 1).unwrap();
        let mesh_b = build_uniform_mesh(1.0, 2).unwrap();
        for (mesh, sub) in [(&mesh_a, "a"), (&mesh_b, "b")] {
            let out = dir.path().join(sub);
            fs::create_dir_all(&out).unwrap();
            let n = mesh.n_gamma_vertices();
            write_surface_csv(
                &out.join("surface_final.csv"),
                mesh,
                &vec![0.0; n],
                &vec![0.5; n],
            )
            .unwrap();
        }
        let err =
            compare_run_directories(&dir.path().join("a"), &dir.path().join("b")).unwrap_err();
        assert!(err.to_string().contains("meshes differ"));
    }

    #[test]
    fn matrix_dumps_cover_the_assembled_operators() {
        let dir = tempfile::tempdir().unwrap();
        let mesh = build_uniform_mesh(1.0, 1).unwrap();
        let ops = assemble_operators(&mesh).unwrap();
        dump_operators(dir.path(), &ops).unwrap();
        for name in [
            "bulk_stiffness.txt",
            "bulk_mass_lumped.txt",
            "surface_stiffness.txt",
            "surface_mass_lumped.txt",
        ] {
            let text = fs::read_to_string(dir.path().join(name)).unwrap();
            assert!(!text.is_empty(), "{name} empty");
        }
        let mass = fs::read_to_string(dir.path().join("surface_mass_lumped.txt")).unwrap();
        assert_eq!(mass.lines().count(), 4);
        let first: f64 = mass
            .lines()
            .next()
            .unwrap()
            .split_whitespace()
            .nth(2)
            .unwrap()
            .parse()
            .unwrap();
        assert!((first - 0.25).abs() < 1e-12);
    }
}
