//! Mesh quality metrics and hanging-node detection.

use std::collections::HashMap;

use super::{dot, norm, scale, sub, PolyhedralMesh};

/// Rank tolerance for the edge-direction span test at a vertex.
const RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct MeshQualityReport {
    pub n_vertices: usize,
    pub n_cells: usize,
    pub n_faces: usize,
    pub n_gamma_vertices: usize,
    pub n_hanging_vertices: usize,
    pub min_cell_volume: f64,
    pub max_cell_volume: f64,
    pub min_face_area: f64,
    pub max_face_area: f64,
    pub min_cell_diameter: f64,
    pub max_cell_diameter: f64,
    /// Worst shape ratio `h_E^3 / (3 sqrt(3) |E|)`, normalized to 1 for cubes.
    pub max_cell_aspect: f64,
}

/// A vertex hangs when some incident cell's edges at it span fewer than three
/// directions: split-face midpoints see only the two in-plane directions, the
/// split-face center likewise, while true corners always see a full frame.
pub fn hanging_vertex_flags(mesh: &PolyhedralMesh) -> Vec<bool> {
    let mut flags = vec![false; mesh.n_vertices()];
    let mut dirs_at: HashMap<u32, Vec<[f64; 3]>> = HashMap::new();
    for c in 0..mesh.n_cells() {
        dirs_at.clear();
        for (f, _) in mesh.cell(c) {
            let cycle = mesh.face(f);
            for i in 0..cycle.len() {
                let a = cycle[i];
                let b = cycle[(i + 1) % cycle.len()];
                let d = sub(mesh.vertex(b as usize), mesh.vertex(a as usize));
                dirs_at.entry(a).or_default().push(d);
                dirs_at.entry(b).or_default().push(d);
            }
        }
        for (&v, dirs) in dirs_at.iter() {
            if !flags[v as usize] && direction_rank(dirs) < 3 {
                flags[v as usize] = true;
            }
        }
    }
    flags
}

fn direction_rank(dirs: &[[f64; 3]]) -> usize {
    let mut basis: Vec<[f64; 3]> = Vec::with_capacity(3);
    for &d in dirs {
        let len = norm(d);
        if len == 0.0 {
            continue;
        }
        let mut r = scale(d, 1.0 / len);
        for b in &basis {
            let p = dot(r, *b);
            for k in 0..3 {
                r[k] -= p * b[k];
            }
        }
        let rlen = norm(r);
        if rlen > RANK_TOL {
            basis.push(scale(r, 1.0 / rlen));
            if basis.len() == 3 {
                return 3;
            }
        }
    }
    basis.len()
}

pub fn mesh_quality_report(mesh: &PolyhedralMesh) -> MeshQualityReport {
    let mut min_face_area = f64::INFINITY;
    let mut max_face_area = 0.0f64;
    for f in 0..mesh.n_faces() {
        let a = mesh.face_area(f);
        min_face_area = min_face_area.min(a);
        max_face_area = max_face_area.max(a);
    }

    let mut min_cell_volume = f64::INFINITY;
    let mut max_cell_volume = 0.0f64;
    let mut min_cell_diameter = f64::INFINITY;
    let mut max_cell_diameter = 0.0f64;
    let mut max_cell_aspect = 0.0f64;
    for c in 0..mesh.n_cells() {
        let (vol, _) = mesh.cell_volume_centroid(c);
        let diam = mesh.cell_diameter(c);
        min_cell_volume = min_cell_volume.min(vol);
        max_cell_volume = max_cell_volume.max(vol);
        min_cell_diameter = min_cell_diameter.min(diam);
        max_cell_diameter = max_cell_diameter.max(diam);
        max_cell_aspect = max_cell_aspect.max(diam.powi(3) / (3.0 * 3.0f64.sqrt() * vol));
    }

    let n_hanging_vertices = hanging_vertex_flags(mesh).iter().filter(|&&b| b).count();

    MeshQualityReport {
        n_vertices: mesh.n_vertices(),
        n_cells: mesh.n_cells(),
        n_faces: mesh.n_faces(),
        n_gamma_vertices: mesh.n_gamma_vertices(),
        n_hanging_vertices,
        min_cell_volume,
        max_cell_volume,
        min_face_area,
        max_face_area,
        min_cell_diameter,
        max_cell_diameter,
        max_cell_aspect,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_graded_mesh, build_uniform_mesh, GradedMeshSpec};

    #[test]
    fn uniform_mesh_has_no_hanging_vertices() {
        let mesh = build_uniform_mesh(1.0, 3).unwrap();
        let report = mesh_quality_report(&mesh);
        assert_eq!(report.n_hanging_vertices, 0);
        assert!((report.max_cell_aspect - 1.0).abs() < 1e-12);
        let third = 1.0f64 / 3.0;
        assert!((report.min_cell_volume - third.powi(3)).abs() < 1e-15);
        assert!((report.max_face_area - third * third).abs() < 1e-15);
    }

    #[test]
    fn graded_mesh_hanging_count_and_positions() {
        // Interface planes contribute 3 n^2 + 2 n hanging vertices each:
        // 16 for n=2 plus 5 for n=1.
        let mesh = build_graded_mesh(&GradedMeshSpec {
            domain_edge: 1.0,
            nx: 4,
            fine_layers: 1,
            coarse_levels: 2,
        })
        .unwrap();
        let flags = hanging_vertex_flags(&mesh);
        assert_eq!(flags.iter().filter(|&&b| b).count(), 21);

        let find = |p: [f64; 3]| {
            (0..mesh.n_vertices())
                .find(|&v| {
                    let q = mesh.vertex(v);
                    (q[0] - p[0]).abs() < 1e-14
                        && (q[1] - p[1]).abs() < 1e-14
                        && (q[2] - p[2]).abs() < 1e-14
                })
                .unwrap()
        };
        // Split-edge midpoint and split-face center on the first interface.
        assert!(flags[find([0.25, 0.0, 0.25])]);
        assert!(flags[find([0.25, 0.25, 0.25])]);
        // A coarse-grid corner on the same plane is not hanging.
        assert!(!flags[find([0.5, 0.5, 0.25])]);
        // Nothing on the working surface hangs.
        for v in 0..mesh.n_gamma_vertices() {
            assert!(!flags[v]);
        }
    }

    #[test]
    fn stretched_box_aspect_exceeds_one() {
        let mesh = build_graded_mesh(&GradedMeshSpec {
            domain_edge: 1.0,
            nx: 4,
            fine_layers: 1,
            coarse_levels: 0,
        })
        .unwrap();
        let report = mesh_quality_report(&mesh);
        assert!(report.max_cell_aspect > 1.5);
        assert_eq!(report.n_hanging_vertices, 0);
    }
}
