//! Builders for uniform and bottom-graded meshes of `[0,L]^3`.

use std::collections::HashMap;

use super::{FaceTag, MeshError, PolyhedralMesh, VertexTag};

/// Parameters of a graded mesh of the cube `[0,L]^3`.
///
/// The bottom of the stack is `fine_layers` layers of `nx * nx` cubes with
/// edge `h = L/nx`. Above them sit `coarse_levels` levels, one cell thick
/// each, whose horizontal edge doubles per level; their cells are false
/// cubes (bottom face split 2x2 to match the level below). Natural heights
/// are `h` per fine layer and `2^k h` for level `k`; the topmost layer or
/// level is stretched or squeezed so the stack fills `[0,L]` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradedMeshSpec {
    pub domain_edge: f64,
    /// Fine cells per side on the working surface.
    pub nx: u32,
    pub fine_layers: u32,
    pub coarse_levels: u32,
}

impl GradedMeshSpec {
    pub fn validate(&self) -> Result<(), MeshError> {
        let GradedMeshSpec {
            domain_edge,
            nx,
            fine_layers,
            coarse_levels,
        } = *self;
        if !(domain_edge.is_finite() && domain_edge > 0.0) {
            return Err(MeshError::InvalidSpec(format!(
                "domain edge must be positive and finite, got {domain_edge}"
            )));
        }
        if nx == 0 {
            return Err(MeshError::InvalidSpec("nx must be at least 1".into()));
        }
        if fine_layers == 0 {
            return Err(MeshError::InvalidSpec(
                "at least one fine layer is required".into(),
            ));
        }
        if coarse_levels >= 32 {
            return Err(MeshError::InvalidSpec(format!(
                "coarse_levels = {coarse_levels} is out of range"
            )));
        }
        let stride = 1u64 << coarse_levels;
        if !(nx as u64).is_multiple_of(stride) {
            return Err(MeshError::InvalidSpec(format!(
                "nx = {nx} is not divisible by 2^coarse_levels = {stride}"
            )));
        }
        // Height budget in h-units: everything below the topmost layer/level
        // must leave it positive thickness. Below-top is fine_layers - 1 when
        // there are no coarse levels, else fine_layers + (2 + ... + 2^(cl-1)).
        let below_top = if coarse_levels == 0 {
            fine_layers as u64 - 1
        } else {
            fine_layers as u64 + (stride - 2)
        };
        if below_top >= nx as u64 {
            return Err(MeshError::InvalidSpec(format!(
                "grading stack too tall: {below_top} h-units below the topmost \
                 layer, domain height is {nx}"
            )));
        }
        if self.vertex_count_estimate() > u32::MAX as u64 {
            return Err(MeshError::InvalidSpec(
                "mesh too large for 32-bit vertex indexing".into(),
            ));
        }
        Ok(())
    }

    fn plane_sides(&self) -> Vec<u64> {
        let mut sides = vec![self.nx as u64 + 1; self.fine_layers as usize + 1];
        for k in 1..=self.coarse_levels {
            sides.push((self.nx as u64 >> k) + 1);
        }
        sides
    }

    fn vertex_count_estimate(&self) -> u64 {
        self.plane_sides().iter().map(|&s| s * s).sum()
    }
}

pub fn build_uniform_mesh(domain_edge: f64, nx: u32) -> Result<PolyhedralMesh, MeshError> {
    build_graded_mesh(&GradedMeshSpec {
        domain_edge,
        nx,
        fine_layers: nx,
        coarse_levels: 0,
    })
}

struct Plane {
    z: f64,
    /// Grid points per side; ids are `base + gy * side + gx`, x fastest.
    side: usize,
    base: usize,
}

impl Plane {
    fn vertex(&self, gx: usize, gy: usize) -> u32 {
        (self.base + gy * self.side + gx) as u32
    }
}

/// Interning face table: one stored cycle per face, deduplicated by vertex
/// set. All faces produced by the builders are quads.
struct FaceTable {
    offsets: Vec<usize>,
    vertices: Vec<u32>,
    tags: Vec<FaceTag>,
    registry: HashMap<[u32; 4], u32>,
}

impl FaceTable {
    fn with_capacity(nf: usize) -> Self {
        FaceTable {
            offsets: {
                let mut v = Vec::with_capacity(nf + 1);
                v.push(0);
                v
            },
            vertices: Vec::with_capacity(4 * nf),
            tags: Vec::with_capacity(nf),
            registry: HashMap::with_capacity(nf),
        }
    }

    /// Returns the face id and whether `cycle` is the stored (creator's
    /// outward) orientation. A second reference always comes from the
    /// opposite side, so the face must be interior.
    fn intern(&mut self, cycle: [u32; 4], tag: FaceTag) -> (u32, bool) {
        let mut key = cycle;
        key.sort_unstable();
        if let Some(&fid) = self.registry.get(&key) {
            debug_assert_eq!(self.tags[fid as usize], FaceTag::Interior);
            debug_assert_eq!(tag, FaceTag::Interior);
            (fid, false)
        } else {
            let fid = self.tags.len() as u32;
            self.vertices.extend_from_slice(&cycle);
            self.offsets.push(self.vertices.len());
            self.tags.push(tag);
            self.registry.insert(key, fid);
            (fid, true)
        }
    }
}

pub fn build_graded_mesh(spec: &GradedMeshSpec) -> Result<PolyhedralMesh, MeshError> {
    spec.validate()?;
    let l = spec.domain_edge;
    let nx = spec.nx as usize;
    let fl = spec.fine_layers as usize;
    let cl = spec.coarse_levels as usize;
    let h = l / nx as f64;

    // Plane schedule, bottom-up. The topmost plane is pinned to exactly L.
    let n_planes = fl + 1 + cl;
    let mut planes: Vec<Plane> = Vec::with_capacity(n_planes);
    let mut base = 0usize;
    for j in 0..=fl {
        let z = if cl == 0 && j == fl { l } else { j as f64 * h };
        let side = nx + 1;
        planes.push(Plane { z, side, base });
        base += side * side;
    }
    for k in 1..=cl {
        let z = if k == cl {
            l
        } else {
            (fl + (1usize << (k + 1)) - 2) as f64 * h
        };
        let side = (nx >> k) + 1;
        planes.push(Plane { z, side, base });
        base += side * side;
    }
    let n_vertices = base;

    // Vertices plane by plane, row-major with x fastest; boundary
    // coordinates snapped to exactly 0 and L.
    let mut vertices = Vec::with_capacity(n_vertices);
    let mut vertex_tags = Vec::with_capacity(n_vertices);
    for (p, plane) in planes.iter().enumerate() {
        let spacing = l / (plane.side - 1) as f64;
        let tag = if p == 0 {
            VertexTag::OnGamma
        } else if p == n_planes - 1 {
            VertexTag::OnGammaTop
        } else {
            VertexTag::Other
        };
        for gy in 0..plane.side {
            let y = if gy == plane.side - 1 {
                l
            } else {
                gy as f64 * spacing
            };
            for gx in 0..plane.side {
                let x = if gx == plane.side - 1 {
                    l
                } else {
                    gx as f64 * spacing
                };
                vertices.push([x, y, plane.z]);
                vertex_tags.push(tag);
            }
        }
    }
    let n_gamma = (nx + 1) * (nx + 1);

    // Face count by construction: horizontal quads per plane plus vertical
    // quads per layer/level; used for preallocation only.
    let mut nf_estimate = (fl + 1) * nx * nx + 2 * fl * nx * (nx + 1);
    for k in 1..=cl {
        let n_k = nx >> k;
        nf_estimate += n_k * n_k + 2 * n_k * (n_k + 1);
    }
    let mut faces = FaceTable::with_capacity(nf_estimate);

    let n_cells_total = fl * nx * nx + (1..=cl).map(|k| (nx >> k) * (nx >> k)).sum::<usize>();
    let mut cell_offsets = Vec::with_capacity(n_cells_total + 1);
    cell_offsets.push(0usize);
    let mut cell_faces: Vec<u32> =
        Vec::with_capacity(6 * fl * nx * nx + 9 * (n_cells_total - fl * nx * nx));
    let mut cell_face_outward: Vec<bool> = Vec::with_capacity(cell_faces.capacity());

    let push_cell = |faces_of_cell: &[([u32; 4], FaceTag)],
                     table: &mut FaceTable,
                     cell_faces: &mut Vec<u32>,
                     cell_face_outward: &mut Vec<bool>,
                     cell_offsets: &mut Vec<usize>| {
        for &(cycle, tag) in faces_of_cell {
            let (fid, outward) = table.intern(cycle, tag);
            cell_faces.push(fid);
            cell_face_outward.push(outward);
        }
        cell_offsets.push(cell_faces.len());
    };

    use FaceTag::{Gamma, GammaLateral, GammaTop, Interior};
    let lateral = |on_boundary: bool| if on_boundary { GammaLateral } else { Interior };

    // Fine layers: standard cubes (the topmost one may be a stretched box
    // when there are no coarse levels).
    for layer in 0..fl {
        let top_is_domain_top = cl == 0 && layer + 1 == fl;
        let (pb, pt) = (&planes[layer], &planes[layer + 1]);
        for jy in 0..nx {
            for ix in 0..nx {
                let v00 = pb.vertex(ix, jy);
                let v10 = pb.vertex(ix + 1, jy);
                let v11 = pb.vertex(ix + 1, jy + 1);
                let v01 = pb.vertex(ix, jy + 1);
                let w00 = pt.vertex(ix, jy);
                let w10 = pt.vertex(ix + 1, jy);
                let w11 = pt.vertex(ix + 1, jy + 1);
                let w01 = pt.vertex(ix, jy + 1);
                let cell = [
                    // Cycles are outward for this cell: -z, +z, -y, +x, +y, -x.
                    (
                        [v00, v01, v11, v10],
                        if layer == 0 { Gamma } else { Interior },
                    ),
                    (
                        [w00, w10, w11, w01],
                        if top_is_domain_top {
                            GammaTop
                        } else {
                            Interior
                        },
                    ),
                    ([v00, v10, w10, w00], lateral(jy == 0)),
                    ([v10, v11, w11, w10], lateral(ix == nx - 1)),
                    ([v11, v01, w01, w11], lateral(jy == nx - 1)),
                    ([v01, v00, w00, w01], lateral(ix == 0)),
                ];
                push_cell(
                    &cell,
                    &mut faces,
                    &mut cell_faces,
                    &mut cell_face_outward,
                    &mut cell_offsets,
                );
            }
        }
    }

    // Coarse levels: false cubes. The 3x3 bottom patch lives on the previous
    // plane; lateral quads skip the bottom-edge midpoints, which is exactly
    // what makes those midpoints hanging.
    for k in 1..=cl {
        let n_k = nx >> k;
        let (pb, pt) = (&planes[fl + k - 1], &planes[fl + k]);
        for jy in 0..n_k {
            for ix in 0..n_k {
                let b = |a: usize, c: usize| pb.vertex(2 * ix + a, 2 * jy + c);
                let t = |a: usize, c: usize| pt.vertex(ix + a, jy + c);
                let cell = [
                    ([b(0, 0), b(0, 1), b(1, 1), b(1, 0)], Interior),
                    ([b(1, 0), b(1, 1), b(2, 1), b(2, 0)], Interior),
                    ([b(0, 1), b(0, 2), b(1, 2), b(1, 1)], Interior),
                    ([b(1, 1), b(1, 2), b(2, 2), b(2, 1)], Interior),
                    (
                        [t(0, 0), t(1, 0), t(1, 1), t(0, 1)],
                        if k == cl { GammaTop } else { Interior },
                    ),
                    ([b(0, 0), b(2, 0), t(1, 0), t(0, 0)], lateral(jy == 0)),
                    ([b(2, 0), b(2, 2), t(1, 1), t(1, 0)], lateral(ix == n_k - 1)),
                    ([b(2, 2), b(0, 2), t(0, 1), t(1, 1)], lateral(jy == n_k - 1)),
                    ([b(0, 2), b(0, 0), t(0, 0), t(0, 1)], lateral(ix == 0)),
                ];
                push_cell(
                    &cell,
                    &mut faces,
                    &mut cell_faces,
                    &mut cell_face_outward,
                    &mut cell_offsets,
                );
            }
        }
    }

    debug_assert_eq!(faces.tags.len(), nf_estimate);

    Ok(PolyhedralMesh {
        vertices,
        face_offsets: faces.offsets,
        face_vertices: faces.vertices,
        cell_offsets,
        cell_faces,
        cell_face_outward,
        face_tags: faces.tags,
        vertex_tags,
        domain_edge: l,
        n_gamma,
    })
}
