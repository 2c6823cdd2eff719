//! Global operators: bulk and surface stiffness, lumped masses, and the
//! free/fixed dof split.
//!
//! The top plane carries Dirichlet data, so its vertices are eliminated from
//! the solved system. The mesh numbers them last, which keeps the free block
//! a contiguous prefix; the surface dofs are the prefix `0..n_surface` of
//! that block in turn.

use sprs::{CsMat, TriMat};

use super::local::{cell_operators, face_operators, CellOperators, FaceOperators, VemError};
use crate::linalg::{spmv, SpdSolver};
use crate::mesh::{FaceTag, PolyhedralMesh, VertexTag};

/// Worker count for element computations: `BSDIB_THREADS` when set to a
/// positive integer, otherwise the machine's available parallelism. Results
/// never depend on it; scattering stays sequential.
pub(crate) fn worker_threads() -> usize {
    match std::env::var("BSDIB_THREADS") {
        Ok(s) => s.trim().parse().ok().filter(|&t| t >= 1).unwrap_or(1),
        Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
    }
}

/// Maps `f` over `0..n` on `threads` workers, preserving index order.
fn parallel_map<T: Send, F: Fn(usize) -> T + Sync>(n: usize, threads: usize, f: F) -> Vec<T> {
    if threads <= 1 || n < 2 * threads {
        return (0..n).map(f).collect();
    }
    let mut out: Vec<Option<T>> = Vec::with_capacity(n);
    out.resize_with(n, || None);
    let chunk = n.div_ceil(threads);
    std::thread::scope(|scope| {
        for (t, slice) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (k, slot) in slice.iter_mut().enumerate() {
                    *slot = Some(f(t * chunk + k));
                }
            });
        }
    });
    out.into_iter()
        .map(|o| o.expect("worker filled slot"))
        .collect()
}

/// Dof bookkeeping: vertices `0..n_free` are solved for, the rest hold
/// Dirichlet data; `0..n_surface` are the working-surface dofs.
#[derive(Debug, Clone)]
pub struct ReductionMap {
    n_vertices: usize,
    n_free: usize,
    n_surface: usize,
}

impl ReductionMap {
    fn from_mesh(mesh: &PolyhedralMesh) -> Result<Self, VemError> {
        let n = mesh.n_vertices();
        let n_fixed = (0..n)
            .filter(|&v| mesh.vertex_tag(v) == VertexTag::OnGammaTop)
            .count();
        let n_free = n - n_fixed;
        for v in n_free..n {
            if mesh.vertex_tag(v) != VertexTag::OnGammaTop {
                return Err(VemError::Degenerate(
                    "top-plane vertices must occupy the tail of the numbering".into(),
                ));
            }
        }
        let n_surface = mesh.n_gamma_vertices();
        if n_surface > n_free {
            return Err(VemError::Degenerate(
                "surface dofs must be free (the surface touches the top plane)".into(),
            ));
        }
        Ok(ReductionMap {
            n_vertices: n,
            n_free,
            n_surface,
        })
    }

    /// Hand-built map for synthetic operator tests.
    #[cfg(test)]
    pub(crate) fn with_counts(n_vertices: usize, n_free: usize, n_surface: usize) -> Self {
        assert!(n_surface <= n_free && n_free <= n_vertices);
        ReductionMap {
            n_vertices,
            n_free,
            n_surface,
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_free(&self) -> usize {
        self.n_free
    }

    pub fn n_fixed(&self) -> usize {
        self.n_vertices - self.n_free
    }

    pub fn n_surface(&self) -> usize {
        self.n_surface
    }

    pub fn is_free(&self, v: usize) -> bool {
        v < self.n_free
    }

    /// Pads a free-dof vector with zeros on the fixed tail.
    pub fn prolong(&self, free: &[f64]) -> Vec<f64> {
        assert_eq!(free.len(), self.n_free);
        let mut full = Vec::with_capacity(self.n_vertices);
        full.extend_from_slice(free);
        full.resize(self.n_vertices, 0.0);
        full
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        assert_eq!(full.len(), self.n_vertices);
        full[..self.n_free].to_vec()
    }
}

pub struct DiscreteOperators {
    pub reduction: ReductionMap,
    /// Stiffness on free dofs.
    pub bulk_stiffness: CsMat<f64>,
    /// Stiffness on all dofs, Dirichlet rows included.
    pub bulk_stiffness_full: CsMat<f64>,
    /// Free-row, fixed-column coupling block (columns indexed from the first
    /// fixed vertex).
    pub bulk_dirichlet_coupling: CsMat<f64>,
    pub bulk_mass_lumped: Vec<f64>,
    pub bulk_mass_lumped_full: Vec<f64>,
    pub surface_stiffness: CsMat<f64>,
    pub surface_mass_lumped: Vec<f64>,
}

pub fn assemble_operators(mesh: &PolyhedralMesh) -> Result<DiscreteOperators, VemError> {
    let reduction = ReductionMap::from_mesh(mesh)?;
    let threads = worker_threads();

    let face_ops: Vec<FaceOperators> =
        parallel_map(mesh.n_faces(), threads, |f| face_operators(mesh, f))
            .into_iter()
            .collect::<Result<_, _>>()?;
    let cell_ops: Vec<CellOperators> = parallel_map(mesh.n_cells(), threads, |c| {
        cell_operators(mesh, c, &face_ops)
    })
    .into_iter()
    .collect::<Result<_, _>>()?;

    let n = reduction.n_vertices();
    let n_free = reduction.n_free();
    let n_fixed = reduction.n_fixed();

    let mut full = TriMat::new((n, n));
    let mut free = TriMat::new((n_free, n_free));
    let mut coupling = TriMat::new((n_free, n_fixed));
    let mut mass_full = vec![0.0f64; n];
    for co in &cell_ops {
        let ids = &co.vertex_ids;
        for (i, &gi) in ids.iter().enumerate() {
            let gi = gi as usize;
            mass_full[gi] += co.projected_integrals[i];
            for (j, &gj) in ids.iter().enumerate() {
                let gj = gj as usize;
                let v = co.stiffness[(i, j)];
                full.add_triplet(gi, gj, v);
                if gi < n_free {
                    if gj < n_free {
                        free.add_triplet(gi, gj, v);
                    } else {
                        coupling.add_triplet(gi, gj - n_free, v);
                    }
                }
            }
        }
    }

    let mut surface = TriMat::new((reduction.n_surface(), reduction.n_surface()));
    let mut surface_mass = vec![0.0f64; reduction.n_surface()];
    for f in 0..mesh.n_faces() {
        if mesh.face_tag(f) != FaceTag::Gamma {
            continue;
        }
        let fo = &face_ops[f];
        for (i, &gi) in fo.vertex_ids.iter().enumerate() {
            let gi = gi as usize;
            surface_mass[gi] += fo.projected_integrals[i];
            for (j, &gj) in fo.vertex_ids.iter().enumerate() {
                surface.add_triplet(gi, gj as usize, fo.stiffness[(i, j)]);
            }
        }
    }

    for (v, &m) in mass_full.iter().enumerate() {
        if !(m > 0.0) {
            return Err(VemError::NonPositiveMass {
                vertex: v,
                value: m,
            });
        }
    }
    for (v, &m) in surface_mass.iter().enumerate() {
        if !(m > 0.0) {
            return Err(VemError::NonPositiveMass {
                vertex: v,
                value: m,
            });
        }
    }

    Ok(DiscreteOperators {
        bulk_stiffness: free.to_csc(),
        bulk_stiffness_full: full.to_csc(),
        bulk_dirichlet_coupling: coupling.to_csc(),
        bulk_mass_lumped: mass_full[..n_free].to_vec(),
        bulk_mass_lumped_full: mass_full,
        surface_stiffness: surface.to_csc(),
        surface_mass_lumped: surface_mass,
        reduction,
    })
}

/// Lumped mass of the boundary faces matching `tags`, on all mesh vertices.
pub fn assemble_boundary_mass_lumped(
    mesh: &PolyhedralMesh,
    tags: &[FaceTag],
) -> Result<Vec<f64>, VemError> {
    let mut out = vec![0.0f64; mesh.n_vertices()];
    for f in 0..mesh.n_faces() {
        if !tags.contains(&mesh.face_tag(f)) {
            continue;
        }
        let fo = face_operators(mesh, f)?;
        for (i, &gi) in fo.vertex_ids.iter().enumerate() {
            out[gi as usize] += fo.projected_integrals[i];
        }
    }
    Ok(out)
}

/// Consistency residual of the bulk operator on the affine field
/// `p = c0 + c . x`: the stiffness applied to its vertex values must equal
/// the boundary-flux load everywhere the solution is not pinned. Returns the
/// largest violation over free rows.
pub fn poisson_patch_residual(
    mesh: &PolyhedralMesh,
    ops: &DiscreteOperators,
    coeffs: [f64; 4],
) -> Result<f64, VemError> {
    let p = |x: [f64; 3]| coeffs[0] + coeffs[1] * x[0] + coeffs[2] * x[1] + coeffs[3] * x[2];
    let grad = [coeffs[1], coeffs[2], coeffs[3]];
    let dofs: Vec<f64> = (0..mesh.n_vertices()).map(|v| p(mesh.vertex(v))).collect();
    let applied = spmv(&ops.bulk_stiffness_full, &dofs);
    let flux = neumann_flux_load(mesh, grad)?;
    let mut worst = 0.0f64;
    for i in 0..ops.reduction.n_free() {
        worst = worst.max((applied[i] - flux[i]).abs());
    }
    Ok(worst)
}

/// Solves the Dirichlet/Neumann problem whose exact solution is the affine
/// field, and returns the largest nodal error. Exercises the eliminated
/// system `A_ff u = load - A_fd p_fixed`.
pub fn poisson_patch_solve_error(
    mesh: &PolyhedralMesh,
    ops: &DiscreteOperators,
    coeffs: [f64; 4],
) -> Result<f64, VemError> {
    let p = |x: [f64; 3]| coeffs[0] + coeffs[1] * x[0] + coeffs[2] * x[1] + coeffs[3] * x[2];
    let grad = [coeffs[1], coeffs[2], coeffs[3]];
    let n_free = ops.reduction.n_free();
    let fixed: Vec<f64> = (n_free..mesh.n_vertices())
        .map(|v| p(mesh.vertex(v)))
        .collect();
    let flux = neumann_flux_load(mesh, grad)?;
    let lifted = spmv(&ops.bulk_dirichlet_coupling, &fixed);
    let rhs: Vec<f64> = (0..n_free).map(|i| flux[i] - lifted[i]).collect();
    let solver = SpdSolver::new(&ops.bulk_stiffness)?;
    let u = solver.solve(&rhs);
    let mut worst = 0.0f64;
    for (i, &ui) in u.iter().enumerate() {
        worst = worst.max((ui - p(mesh.vertex(i))).abs());
    }
    Ok(worst)
}

/// Load vector `int_boundary (g . n) phi_i` over the Neumann part of the
/// boundary (working surface and lateral walls) for a constant field `g`,
/// using the same projected face integrals the stiffness is built from.
fn neumann_flux_load(mesh: &PolyhedralMesh, grad: [f64; 3]) -> Result<Vec<f64>, VemError> {
    let mut load = vec![0.0f64; mesh.n_vertices()];
    for f in 0..mesh.n_faces() {
        if !matches!(mesh.face_tag(f), FaceTag::Gamma | FaceTag::GammaLateral) {
            continue;
        }
        let fo = face_operators(mesh, f)?;
        let g =
            grad[0] * fo.unit_normal[0] + grad[1] * fo.unit_normal[1] + grad[2] * fo.unit_normal[2];
        for (i, &gi) in fo.vertex_ids.iter().enumerate() {
            load[gi as usize] += g * fo.projected_integrals[i];
        }
    }
    Ok(load)
}

/// Surface analogue of [`poisson_patch_residual`]: the surface stiffness
/// applied to `p = c0 + cx x + cy y` must match the line flux through the
/// surface boundary edges (trapezoid rule, consistent with the face
/// projectors).
pub fn surface_patch_residual(
    mesh: &PolyhedralMesh,
    ops: &DiscreteOperators,
    coeffs: [f64; 3],
) -> Result<f64, VemError> {
    use std::collections::HashMap;

    let n_surface = ops.reduction.n_surface();
    let p = |x: [f64; 3]| coeffs[0] + coeffs[1] * x[0] + coeffs[2] * x[1];
    let dofs: Vec<f64> = (0..n_surface).map(|v| p(mesh.vertex(v))).collect();
    let applied = spmv(&ops.surface_stiffness, &dofs);

    // Boundary edges appear in exactly one surface face; interior edges in
    // two.
    let mut edge_count: HashMap<(u32, u32), ((u32, u32), usize)> = HashMap::new();
    for f in 0..mesh.n_faces() {
        if mesh.face_tag(f) != FaceTag::Gamma {
            continue;
        }
        let cycle = mesh.face(f);
        for i in 0..cycle.len() {
            let (a, b) = (cycle[i], cycle[(i + 1) % cycle.len()]);
            let key = (a.min(b), a.max(b));
            let entry = edge_count.entry(key).or_insert(((a, b), 0));
            entry.1 += 1;
        }
    }
    let mut flux = vec![0.0f64; n_surface];
    for (_, ((a, b), count)) in edge_count {
        if count != 1 {
            continue;
        }
        let pa = mesh.vertex(a as usize);
        let pb = mesh.vertex(b as usize);
        let edge = [pb[0] - pa[0], pb[1] - pa[1]];
        let len = (edge[0] * edge[0] + edge[1] * edge[1]).sqrt();
        // Surface faces wind counterclockwise seen from outside the bulk
        // (negative z), so the in-plane outward normal of a boundary edge is
        // the edge direction rotated by -90 degrees in that view.
        let n_e = [-edge[1] / len, edge[0] / len];
        let g = coeffs[1] * n_e[0] + coeffs[2] * n_e[1];
        let half = 0.5 * len * g;
        flux[a as usize] += half;
        flux[b as usize] += half;
    }

    let mut worst = 0.0f64;
    for i in 0..n_surface {
        worst = worst.max((applied[i] - flux[i]).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_asymmetry;
    use crate::mesh::{build_graded_mesh, build_uniform_mesh, GradedMeshSpec};

    fn graded_sample() -> PolyhedralMesh {
        build_graded_mesh(&GradedMeshSpec {
            domain_edge: 1.0,
            nx: 4,
            fine_layers: 1,
            coarse_levels: 2,
        })
        .unwrap()
    }

    #[test]
    fn lumped_masses_tile_the_measures() {
        for mesh in [build_uniform_mesh(1.0, 2).unwrap(), graded_sample()] {
            let ops = assemble_operators(&mesh).unwrap();
            let vol: f64 = ops.bulk_mass_lumped_full.iter().sum();
            assert!((vol - 1.0).abs() < 1e-13, "bulk volume {vol}");
            let area: f64 = ops.surface_mass_lumped.iter().sum();
            assert!((area - 1.0).abs() < 1e-13, "surface area {area}");
            for &m in &ops.bulk_mass_lumped_full {
                assert!(m > 0.0);
            }
        }
    }

    #[test]
    fn stiffness_is_symmetric_with_constant_kernel() {
        let mesh = graded_sample();
        let ops = assemble_operators(&mesh).unwrap();
        // Local matrices are mirrored exactly; sparse compression may still
        // reassociate duplicate sums, so allow an ulp.
        assert!(max_asymmetry(&ops.bulk_stiffness_full) < 1e-15);
        assert!(max_asymmetry(&ops.surface_stiffness) < 1e-15);

        let ones = vec![1.0; mesh.n_vertices()];
        let k = spmv(&ops.bulk_stiffness_full, &ones);
        let worst = k.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        assert!(worst < 1e-13, "constant kernel violated by {worst}");

        let ones_s = vec![1.0; ops.reduction.n_surface()];
        let ks = spmv(&ops.surface_stiffness, &ones_s);
        let worst_s = ks.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
        assert!(worst_s < 1e-13);
    }

    #[test]
    fn patch_identities_hold_on_the_graded_mesh() {
        let mesh = graded_sample();
        let ops = assemble_operators(&mesh).unwrap();
        let coeffs = [0.3, 1.0, -2.0, 0.5];
        let residual = poisson_patch_residual(&mesh, &ops, coeffs).unwrap();
        assert!(residual < 1e-13, "bulk patch residual {residual}");
        let err = poisson_patch_solve_error(&mesh, &ops, coeffs).unwrap();
        assert!(err < 1e-11, "bulk patch solve error {err}");
        let s_res = surface_patch_residual(&mesh, &ops, [0.7, -1.0, 2.0]).unwrap();
        assert!(s_res < 1e-13, "surface patch residual {s_res}");
    }

    #[test]
    fn reduction_map_shapes() {
        let mesh = graded_sample();
        let ops = assemble_operators(&mesh).unwrap();
        let r = &ops.reduction;
        assert_eq!(r.n_vertices(), 63);
        assert_eq!(r.n_fixed(), 4);
        assert_eq!(r.n_free(), 59);
        assert_eq!(r.n_surface(), 25);
        let free = vec![2.0; r.n_free()];
        let full = r.prolong(&free);
        assert_eq!(full.len(), 63);
        assert_eq!(full[58], 2.0);
        assert_eq!(full[59], 0.0);
        assert_eq!(r.restrict(&full), free);

        assert_eq!(ops.bulk_stiffness.rows(), 59);
        assert_eq!(ops.bulk_dirichlet_coupling.cols(), 4);
        assert_eq!(ops.surface_stiffness.rows(), 25);
    }

    #[test]
    fn boundary_mass_covers_the_selected_faces() {
        let mesh = build_uniform_mesh(2.0, 2).unwrap();
        let gamma = assemble_boundary_mass_lumped(&mesh, &[FaceTag::Gamma]).unwrap();
        let total: f64 = gamma.iter().sum();
        assert!((total - 4.0).abs() < 1e-13);
        // Only surface vertices carry mass.
        for (v, &m) in gamma.iter().enumerate() {
            if v < mesh.n_gamma_vertices() {
                assert!(m > 0.0);
            } else {
                assert_eq!(m, 0.0);
            }
        }
        let lateral = assemble_boundary_mass_lumped(&mesh, &[FaceTag::GammaLateral]).unwrap();
        let total_l: f64 = lateral.iter().sum();
        assert!((total_l - 16.0).abs() < 1e-13);
    }

    #[test]
    fn threads_do_not_change_the_matrices() {
        let mesh = graded_sample();
        let a = assemble_operators(&mesh).unwrap();
        // Force a multi-threaded map even on single-core machines.
        let b = {
            std::env::set_var("BSDIB_THREADS", "3");
            let ops = assemble_operators(&mesh);
            std::env::remove_var("BSDIB_THREADS");
            ops.unwrap()
        };
        let triplets = |m: &CsMat<f64>| -> Vec<(usize, usize, u64)> {
            m.iter().map(|(v, (r, c))| (r, c, v.to_bits())).collect()
        };
        assert_eq!(
            triplets(&a.bulk_stiffness_full),
            triplets(&b.bulk_stiffness_full)
        );
        assert_eq!(a.bulk_mass_lumped_full.len(), b.bulk_mass_lumped_full.len());
        for (x, y) in a.bulk_mass_lumped_full.iter().zip(&b.bulk_mass_lumped_full) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}
