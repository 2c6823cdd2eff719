//! Polyhedral meshes of the cube `[0,L]^3` graded toward the bottom face.
//!
//! The working surface `Gamma` is the bottom face `z = 0`. Meshes are built
//! from axis-aligned layers: a stack of fine cubic layers sitting on `Gamma`,
//! followed by coarsening levels whose horizontal edge doubles per level. A
//! coarsening-level cell is a "false cube": a rectangular box whose bottom
//! face is split into four sub-squares matching the finer level below, giving
//! 13 vertices and 9 faces (4 lateral, 1 top, 4 bottom). The split-edge
//! midpoints and the bottom-face center are the mesh's hanging nodes.
//!
//! Numbering conventions relied on by the rest of the crate:
//! - vertices on `Gamma` come first (`0..n_gamma`), the top plane comes last;
//! - faces store one vertex cycle; each incident cell records whether that
//!   cycle is outward-oriented for it;
//! - all cells are convex axis-aligned boxes or false cubes, so face
//!   triangulation by centroid fans is exact.

mod build;
mod io;
mod quality;

pub use build::{build_graded_mesh, build_uniform_mesh, GradedMeshSpec};
pub use io::{deserialize_mesh, read_mesh_file, serialize_mesh, write_mesh_file};
pub use quality::{mesh_quality_report, MeshQualityReport};

use thiserror::Error;

/// Relative geometric tolerance for planarity and tag checks, scaled by `L`.
pub const GEOMETRY_REL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid mesh spec: {0}")]
    InvalidSpec(String),
    #[error("mesh is inconsistent: {0}")]
    Inconsistent(String),
    #[error("mesh file is malformed: {0}")]
    MalformedFile(String),
    #[error("unexpected end of stream")]
    UnexpectedEof,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Classification of mesh faces by the boundary piece they lie on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum FaceTag {
    Interior = 0,
    /// Bottom face `z = 0`, the working surface.
    Gamma = 1,
    /// Lateral walls `x, y` in `{0, L}`.
    GammaLateral = 2,
    /// Top face `z = L`.
    GammaTop = 3,
}

impl FaceTag {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Self::Interior),
            1 => Some(Self::Gamma),
            2 => Some(Self::GammaLateral),
            3 => Some(Self::GammaTop),
            _ => None,
        }
    }
}

/// Classification of vertices. A vertex on both `Gamma` and a lateral wall is
/// `OnGamma`; `Gamma` and the top plane never share vertices for `L > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum VertexTag {
    Other = 0,
    OnGamma = 1,
    OnGammaTop = 2,
}

impl VertexTag {
    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Self::Other),
            1 => Some(Self::OnGamma),
            2 => Some(Self::OnGammaTop),
            _ => None,
        }
    }
}

/// Polyhedral mesh with flat (CSR-style) connectivity storage.
#[derive(Debug, Clone)]
pub struct PolyhedralMesh {
    pub(crate) vertices: Vec<[f64; 3]>,
    /// Face `f` lists vertices `face_vertices[face_offsets[f]..face_offsets[f+1]]`
    /// as an ordered cycle.
    pub(crate) face_offsets: Vec<usize>,
    pub(crate) face_vertices: Vec<u32>,
    /// Cell `c` lists faces `cell_faces[cell_offsets[c]..cell_offsets[c+1]]`.
    pub(crate) cell_offsets: Vec<usize>,
    pub(crate) cell_faces: Vec<u32>,
    /// Parallel to `cell_faces`: true when the stored cycle is outward for
    /// that cell.
    pub(crate) cell_face_outward: Vec<bool>,
    pub(crate) face_tags: Vec<FaceTag>,
    pub(crate) vertex_tags: Vec<VertexTag>,
    /// Domain edge length `L`.
    pub(crate) domain_edge: f64,
    /// Number of vertices on `Gamma`; they occupy ids `0..n_gamma`.
    pub(crate) n_gamma: usize,
}

impl PolyhedralMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.face_offsets.len() - 1
    }

    pub fn n_cells(&self) -> usize {
        self.cell_offsets.len() - 1
    }

    pub fn n_gamma_vertices(&self) -> usize {
        self.n_gamma
    }

    pub fn domain_edge(&self) -> f64 {
        self.domain_edge
    }

    pub fn vertex(&self, v: usize) -> [f64; 3] {
        self.vertices[v]
    }

    pub fn vertex_tag(&self, v: usize) -> VertexTag {
        self.vertex_tags[v]
    }

    pub fn face_tag(&self, f: usize) -> FaceTag {
        self.face_tags[f]
    }

    /// Vertex cycle of face `f`.
    pub fn face(&self, f: usize) -> &[u32] {
        &self.face_vertices[self.face_offsets[f]..self.face_offsets[f + 1]]
    }

    /// Faces of cell `c` with their outward-orientation flags.
    pub fn cell(&self, c: usize) -> impl Iterator<Item = (usize, bool)> + '_ {
        let range = self.cell_offsets[c]..self.cell_offsets[c + 1];
        range.map(move |k| (self.cell_faces[k] as usize, self.cell_face_outward[k]))
    }

    /// Sorted unique vertex ids of cell `c`.
    pub fn cell_vertices(&self, c: usize) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .cell(c)
            .flat_map(|(f, _)| self.face(f).iter().copied())
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn face_coords(&self, f: usize) -> Vec<[f64; 3]> {
        self.face(f)
            .iter()
            .map(|&v| self.vertices[v as usize])
            .collect()
    }

    /// Area-weighted (Newell) normal; its length is the polygon area.
    pub fn face_area_vector(&self, f: usize) -> [f64; 3] {
        polygon_area_vector(&self.face_coords(f))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        norm(self.face_area_vector(f))
    }

    pub fn face_centroid(&self, f: usize) -> [f64; 3] {
        polygon_centroid(&self.face_coords(f))
    }

    pub fn face_diameter(&self, f: usize) -> f64 {
        point_set_diameter(&self.face_coords(f))
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        let coords: Vec<[f64; 3]> = self
            .cell_vertices(c)
            .iter()
            .map(|&v| self.vertices[v as usize])
            .collect();
        point_set_diameter(&coords)
    }

    /// Volume and centroid via the divergence theorem over triangulated faces.
    pub fn cell_volume_centroid(&self, c: usize) -> (f64, [f64; 3]) {
        // Reference point keeps the moment arithmetic well-scaled.
        let verts = self.cell_vertices(c);
        let mut origin = [0.0; 3];
        for &v in &verts {
            let p = self.vertices[v as usize];
            for d in 0..3 {
                origin[d] += p[d];
            }
        }
        for d in 0..3 {
            origin[d] /= verts.len() as f64;
        }

        let mut volume = 0.0;
        let mut first_moment = [0.0; 3];
        for (f, outward) in self.cell(c) {
            let sign = if outward { 1.0 } else { -1.0 };
            let coords = self.face_coords(f);
            for (a, b, cc) in triangle_fan(&coords) {
                let (a, b, cc) = (sub(a, origin), sub(b, origin), sub(cc, origin));
                let area_vec = scale(cross(sub(b, a), sub(cc, a)), 0.5 * sign);
                // div(x,0,0)=1: V = sum over faces of x * n_x.
                let mid = [
                    (a[0] + b[0] + cc[0]) / 3.0,
                    (a[1] + b[1] + cc[1]) / 3.0,
                    (a[2] + b[2] + cc[2]) / 3.0,
                ];
                volume += mid[0] * area_vec[0];
                // int x_d dV = 1/2 * surface int of x_d^2 n_d.
                for d in 0..3 {
                    let q = (a[d] * a[d]
                        + b[d] * b[d]
                        + cc[d] * cc[d]
                        + a[d] * b[d]
                        + a[d] * cc[d]
                        + b[d] * cc[d])
                        / 6.0;
                    first_moment[d] += 0.5 * q * area_vec[d];
                }
            }
        }
        let centroid = [
            origin[0] + first_moment[0] / volume,
            origin[1] + first_moment[1] / volume,
            origin[2] + first_moment[2] / volume,
        ];
        (volume, centroid)
    }

    /// Sorted distinct z-coordinates of the mesh planes.
    pub fn plane_z_values(&self) -> Vec<f64> {
        let tol = GEOMETRY_REL_TOL * self.domain_edge;
        let mut zs: Vec<f64> = self.vertices.iter().map(|p| p[2]).collect();
        zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut out: Vec<f64> = Vec::new();
        for z in zs {
            if out.last().is_none_or(|&l| (z - l).abs() > tol) {
                out.push(z);
            }
        }
        out
    }

    /// Structural and geometric consistency checks. Quadratic work is avoided,
    /// so this is safe to call on large meshes, but it is opt-in.
    pub fn validate(&self) -> Result<(), MeshError> {
        let nv = self.n_vertices();
        let nf = self.n_faces();
        let l = self.domain_edge;
        let tol = GEOMETRY_REL_TOL * l;

        if !(l.is_finite() && l > 0.0) {
            return Err(MeshError::Inconsistent(format!("domain edge {l}")));
        }

        // Index ranges.
        if self.face_vertices.iter().any(|&v| v as usize >= nv) {
            return Err(MeshError::Inconsistent(
                "face vertex id out of range".into(),
            ));
        }
        if self.cell_faces.iter().any(|&f| f as usize >= nf) {
            return Err(MeshError::Inconsistent("cell face id out of range".into()));
        }

        // Surface-first numbering and vertex tags against geometry.
        for (v, p) in self.vertices.iter().enumerate() {
            let expected = if p[2].abs() <= tol {
                VertexTag::OnGamma
            } else if (p[2] - l).abs() <= tol {
                VertexTag::OnGammaTop
            } else {
                VertexTag::Other
            };
            if self.vertex_tags[v] != expected {
                return Err(MeshError::Inconsistent(format!(
                    "vertex {v} tag {:?} disagrees with z = {}",
                    self.vertex_tags[v], p[2]
                )));
            }
            let on_gamma = self.vertex_tags[v] == VertexTag::OnGamma;
            if on_gamma != (v < self.n_gamma) {
                return Err(MeshError::Inconsistent(
                    "Gamma vertices must occupy ids 0..n_gamma".into(),
                ));
            }
        }

        // Face planarity and tags against geometry.
        for f in 0..nf {
            let coords = self.face_coords(f);
            if coords.len() < 3 {
                return Err(MeshError::Inconsistent(format!(
                    "face {f} has < 3 vertices"
                )));
            }
            let nvec = polygon_area_vector(&coords);
            let area = norm(nvec);
            if !(area > 0.0) {
                return Err(MeshError::Inconsistent(format!("face {f} has zero area")));
            }
            let unit = scale(nvec, 1.0 / area);
            let c = polygon_centroid(&coords);
            for p in &coords {
                if dot(sub(*p, c), unit).abs() > tol {
                    return Err(MeshError::Inconsistent(format!("face {f} is not planar")));
                }
            }
            let expected = boundary_tag(&coords, l, tol);
            if self.face_tags[f] != expected {
                return Err(MeshError::Inconsistent(format!(
                    "face {f} tag {:?} disagrees with geometry ({:?} expected)",
                    self.face_tags[f], expected
                )));
            }
        }

        // Watertightness: interior faces belong to exactly two cells with
        // opposite orientation flags, boundary faces to exactly one with the
        // stored cycle outward.
        let mut owners: Vec<Vec<bool>> = vec![Vec::new(); nf];
        for c in 0..self.n_cells() {
            for (f, outward) in self.cell(c) {
                owners[f].push(outward);
            }
        }
        for f in 0..nf {
            match (self.face_tags[f], owners[f].as_slice()) {
                (FaceTag::Interior, [a, b]) if *a != *b => {}
                (FaceTag::Interior, o) => {
                    return Err(MeshError::Inconsistent(format!(
                        "interior face {f} has owners {o:?}"
                    )))
                }
                (_, [true]) => {}
                (_, o) => {
                    return Err(MeshError::Inconsistent(format!(
                        "boundary face {f} has owners {o:?}"
                    )))
                }
            }
        }

        // Orientation flags against geometry, cell combinatorics, volume sum.
        let mut volume_sum = 0.0;
        for c in 0..self.n_cells() {
            let (vol, cell_centroid) = self.cell_volume_centroid(c);
            if !(vol > 0.0) {
                return Err(MeshError::Inconsistent(format!("cell {c} volume {vol}")));
            }
            volume_sum += vol;
            for (f, outward) in self.cell(c) {
                let coords = self.face_coords(f);
                let nvec = polygon_area_vector(&coords);
                let d = dot(nvec, sub(polygon_centroid(&coords), cell_centroid));
                if (d > 0.0) != outward {
                    return Err(MeshError::Inconsistent(format!(
                        "cell {c} face {f} orientation flag disagrees with geometry"
                    )));
                }
            }
            let nv_cell = self.cell_vertices(c).len();
            let nf_cell = self.cell(c).count();
            if !((nv_cell == 8 && nf_cell == 6) || (nv_cell == 13 && nf_cell == 9)) {
                return Err(MeshError::Inconsistent(format!(
                    "cell {c} has {nv_cell} vertices / {nf_cell} faces; expected a box or false cube"
                )));
            }
        }
        let vol_expected = l * l * l;
        if (volume_sum - vol_expected).abs() > 1e-10 * vol_expected {
            return Err(MeshError::Inconsistent(format!(
                "cell volumes sum to {volume_sum}, expected {vol_expected}"
            )));
        }

        let gamma_area: f64 = (0..nf)
            .filter(|&f| self.face_tags[f] == FaceTag::Gamma)
            .map(|f| self.face_area(f))
            .sum();
        let area_expected = l * l;
        if (gamma_area - area_expected).abs() > 1e-10 * area_expected {
            return Err(MeshError::Inconsistent(format!(
                "Gamma faces sum to area {gamma_area}, expected {area_expected}"
            )));
        }

        Ok(())
    }
}

/// The surface grid on `Gamma`: faces of the bulk mesh at `z = 0`, indexing
/// bulk vertices `0..n_vertices` directly.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub(crate) face_offsets: Vec<usize>,
    pub(crate) face_vertices: Vec<u32>,
    /// Global face id in the parent bulk mesh, per surface face.
    pub(crate) bulk_face_ids: Vec<u32>,
    pub(crate) n_vertices: usize,
    pub(crate) domain_edge: f64,
}

impl SurfaceMesh {
    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_faces(&self) -> usize {
        self.face_offsets.len() - 1
    }

    pub fn face(&self, f: usize) -> &[u32] {
        &self.face_vertices[self.face_offsets[f]..self.face_offsets[f + 1]]
    }

    pub fn bulk_face_id(&self, f: usize) -> usize {
        self.bulk_face_ids[f] as usize
    }

    pub fn domain_edge(&self) -> f64 {
        self.domain_edge
    }
}

/// Collects the `Gamma` faces of `mesh` into a [`SurfaceMesh`].
pub fn extract_surface_mesh(mesh: &PolyhedralMesh) -> Result<SurfaceMesh, MeshError> {
    let tol = GEOMETRY_REL_TOL * mesh.domain_edge;
    let mut face_offsets = vec![0usize];
    let mut face_vertices = Vec::new();
    let mut bulk_face_ids = Vec::new();
    for f in 0..mesh.n_faces() {
        if mesh.face_tags[f] != FaceTag::Gamma {
            continue;
        }
        for &v in mesh.face(f) {
            if v as usize >= mesh.n_gamma {
                return Err(MeshError::Inconsistent(format!(
                    "Gamma face {f} uses vertex {v} outside the surface-first block"
                )));
            }
            if mesh.vertices[v as usize][2].abs() > tol {
                return Err(MeshError::Inconsistent(format!(
                    "Gamma face {f} has vertex {v} off the z = 0 plane"
                )));
            }
            face_vertices.push(v);
        }
        face_offsets.push(face_vertices.len());
        bulk_face_ids.push(f as u32);
    }
    if bulk_face_ids.is_empty() {
        return Err(MeshError::Inconsistent("mesh has no Gamma faces".into()));
    }
    Ok(SurfaceMesh {
        face_offsets,
        face_vertices,
        bulk_face_ids,
        n_vertices: mesh.n_gamma,
        domain_edge: mesh.domain_edge,
    })
}

fn boundary_tag(coords: &[[f64; 3]], l: f64, tol: f64) -> FaceTag {
    let all = |f: &dyn Fn(&[f64; 3]) -> bool| coords.iter().all(f);
    if all(&|p| p[2].abs() <= tol) {
        FaceTag::Gamma
    } else if all(&|p| (p[2] - l).abs() <= tol) {
        FaceTag::GammaTop
    } else if all(&|p| p[0].abs() <= tol)
        || all(&|p| (p[0] - l).abs() <= tol)
        || all(&|p| p[1].abs() <= tol)
        || all(&|p| (p[1] - l).abs() <= tol)
    {
        FaceTag::GammaLateral
    } else {
        FaceTag::Interior
    }
}

// Small fixed-size vector helpers used across the mesh and VEM modules.

pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Newell area vector: half the sum of consecutive cross products.
pub(crate) fn polygon_area_vector(coords: &[[f64; 3]]) -> [f64; 3] {
    let n = coords.len();
    let mut acc = [0.0; 3];
    for i in 0..n {
        let a = coords[i];
        let b = coords[(i + 1) % n];
        let c = cross(a, b);
        for d in 0..3 {
            acc[d] += 0.5 * c[d];
        }
    }
    acc
}

/// Area centroid of a planar polygon, via a fan around the vertex average.
pub(crate) fn polygon_centroid(coords: &[[f64; 3]]) -> [f64; 3] {
    let n = coords.len();
    let mut p0 = [0.0; 3];
    for p in coords {
        for d in 0..3 {
            p0[d] += p[d];
        }
    }
    for d in 0..3 {
        p0[d] /= n as f64;
    }
    let mut area_acc = 0.0;
    let mut cen_acc = [0.0; 3];
    for i in 0..n {
        let a = coords[i];
        let b = coords[(i + 1) % n];
        let t_area = norm(cross(sub(a, p0), sub(b, p0))) * 0.5;
        area_acc += t_area;
        for d in 0..3 {
            cen_acc[d] += t_area * (p0[d] + a[d] + b[d]) / 3.0;
        }
    }
    if area_acc == 0.0 {
        return p0;
    }
    scale(cen_acc, 1.0 / area_acc)
}

/// Triangles `(center, v_i, v_{i+1})` covering a convex polygon, preserving
/// its orientation. Degenerate slivers (collinear vertices) have zero area
/// and contribute nothing downstream.
pub(crate) fn triangle_fan(coords: &[[f64; 3]]) -> Vec<([f64; 3], [f64; 3], [f64; 3])> {
    let n = coords.len();
    let mut p0 = [0.0; 3];
    for p in coords {
        for d in 0..3 {
            p0[d] += p[d];
        }
    }
    for d in 0..3 {
        p0[d] /= n as f64;
    }
    (0..n)
        .map(|i| (p0, coords[i], coords[(i + 1) % n]))
        .collect()
}

pub(crate) fn point_set_diameter(coords: &[[f64; 3]]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            best = best.max(norm(sub(coords[i], coords[j])));
        }
    }
    best
}
