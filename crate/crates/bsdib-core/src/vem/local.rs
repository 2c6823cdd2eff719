//! Local projectors and element matrices on single faces and cells.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::mesh::{
    cross, dot, norm, point_set_diameter, polygon_area_vector, polygon_centroid, scale, sub,
    triangle_fan, PolyhedralMesh,
};

#[derive(Debug, Error)]
pub enum VemError {
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("projector system is singular ({0})")]
    SingularProjector(String),
    #[error("lumped mass is not positive at vertex {vertex}: {value}")]
    NonPositiveMass { vertex: usize, value: f64 },
    #[error(transparent)]
    Linalg(#[from] crate::linalg::LinalgError),
}

/// Degree-4 triangle rule: barycentric abscissae and weights (weights sum to
/// one and scale by the triangle area).
const TRI_RULE: [([f64; 3], f64); 6] = [
    (
        [0.816847572980459, 0.091576213509771, 0.091576213509771],
        0.109951743655322,
    ),
    (
        [0.091576213509771, 0.816847572980459, 0.091576213509771],
        0.109951743655322,
    ),
    (
        [0.091576213509771, 0.091576213509771, 0.816847572980459],
        0.109951743655322,
    ),
    (
        [0.108103018168070, 0.445948490915965, 0.445948490915965],
        0.223381589678011,
    ),
    (
        [0.445948490915965, 0.108103018168070, 0.445948490915965],
        0.223381589678011,
    ),
    (
        [0.445948490915965, 0.445948490915965, 0.108103018168070],
        0.223381589678011,
    ),
];

/// Integrates `f` over the triangle `(a, b, c)`, exactly for degree <= 4.
fn triangle_integral(a: [f64; 3], b: [f64; 3], c: [f64; 3], f: &dyn Fn([f64; 3]) -> f64) -> f64 {
    let area = 0.5 * norm(cross(sub(b, a), sub(c, a)));
    let mut acc = 0.0;
    for (bary, w) in TRI_RULE {
        let p = [
            bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0],
            bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1],
            bary[0] * a[2] + bary[1] * b[2] + bary[2] * c[2],
        ];
        acc += w * f(p);
    }
    acc * area
}

/// Integrates `f` over a convex planar polygon via its centroid fan.
fn polygon_integral(coords: &[[f64; 3]], f: &dyn Fn([f64; 3]) -> f64) -> f64 {
    triangle_fan(coords)
        .into_iter()
        .map(|(a, b, c)| triangle_integral(a, b, c, f))
        .sum()
}

/// Mirrors the upper triangle onto the lower one so products that are
/// symmetric up to roundoff become exactly symmetric.
fn symmetrize(m: &mut DMatrix<f64>) {
    for i in 1..m.nrows() {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
}

pub struct FaceOperators {
    /// Global vertex ids in cycle order; local dof `i` is `vertex_ids[i]`.
    pub vertex_ids: Vec<u32>,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Projection onto in-plane linears, in the dof basis (`P = D Pi`).
    pub projection: DMatrix<f64>,
    /// `int_F (projection of the i-th basis function)`; equals the mass row
    /// sums and serves both as the lumped mass and, scaled by the normal, as
    /// the boundary term of cell projectors.
    pub projected_integrals: Vec<f64>,
    pub area: f64,
    pub diameter: f64,
    /// Unit normal of the stored cycle orientation.
    pub unit_normal: [f64; 3],
}

pub fn face_operators(mesh: &PolyhedralMesh, f: usize) -> Result<FaceOperators, VemError> {
    face_operators_from_coords(&mesh.face_coords(f), mesh.face(f).to_vec())
}

pub(crate) fn face_operators_from_coords(
    coords: &[[f64; 3]],
    vertex_ids: Vec<u32>,
) -> Result<FaceOperators, VemError> {
    let n = coords.len();
    if n < 3 || vertex_ids.len() != n {
        return Err(VemError::Degenerate(format!("{n}-gon face")));
    }
    let area_vec = polygon_area_vector(coords);
    let area = norm(area_vec);
    if !(area > 0.0) {
        return Err(VemError::Degenerate("zero face area".into()));
    }
    let normal = scale(area_vec, 1.0 / area);

    // In-plane frame: first strictly longest edge fixes e1 (deterministic
    // under ties), the normal fixes e2.
    let mut e1 = [0.0; 3];
    let mut best = -1.0;
    for i in 0..n {
        let d = sub(coords[(i + 1) % n], coords[i]);
        let len = norm(d);
        if len > best {
            best = len;
            e1 = d;
        }
    }
    let mut e1 = {
        // Remove any off-plane roundoff before normalizing.
        let off = dot(e1, normal);
        sub(e1, scale(normal, off))
    };
    let e1_len = norm(e1);
    if !(e1_len > 0.0) {
        return Err(VemError::Degenerate("zero-length longest edge".into()));
    }
    e1 = scale(e1, 1.0 / e1_len);
    let e2 = cross(normal, e1);
    let origin = polygon_centroid(coords);
    let h = point_set_diameter(coords);

    let local = |p: [f64; 3]| -> [f64; 2] {
        let d = sub(p, origin);
        [dot(d, e1), dot(d, e2)]
    };

    let mut d_mat = DMatrix::zeros(n, 3);
    for i in 0..n {
        let xi = local(coords[i]);
        d_mat[(i, 0)] = 1.0;
        d_mat[(i, 1)] = xi[0] / h;
        d_mat[(i, 2)] = xi[1] / h;
    }

    let mut b_mat = DMatrix::zeros(3, n);
    for i in 0..n {
        b_mat[(0, i)] = 1.0 / n as f64;
    }
    for i in 0..n {
        let j = (i + 1) % n;
        let edge = sub(coords[j], coords[i]);
        let len = norm(edge);
        if !(len > 0.0) {
            return Err(VemError::Degenerate("zero-length edge".into()));
        }
        // Outward in-plane edge normal; trapezoid rule splits the edge
        // integral of a hat function evenly between its endpoints.
        let n_e = scale(cross(edge, normal), 1.0 / len);
        for (r, e_r) in [e1, e2].into_iter().enumerate() {
            let w = len / (2.0 * h) * dot(e_r, n_e);
            b_mat[(r + 1, i)] += w;
            b_mat[(r + 1, j)] += w;
        }
    }

    let g = &b_mat * &d_mat;
    let g_inv = g
        .try_inverse()
        .ok_or_else(|| VemError::SingularProjector("face".into()))?;
    let pi_star = &g_inv * &b_mat;
    let p = &d_mat * &pi_star;

    let mut h_mat = DMatrix::zeros(3, 3);
    for r in 0..3 {
        for s in r..3 {
            h_mat[(r, s)] = polygon_integral(coords, &|point| {
                let xi = local(point);
                let m = [1.0, xi[0] / h, xi[1] / h];
                m[r] * m[s]
            });
        }
    }
    symmetrize(&mut h_mat);

    let mut g_tilde = DMatrix::zeros(3, 3);
    g_tilde[(1, 1)] = area / (h * h);
    g_tilde[(2, 2)] = area / (h * h);

    let eye = DMatrix::identity(n, n);
    let s_mat = {
        let r = &eye - &p;
        r.transpose() * &r
    };

    let mut mass = pi_star.transpose() * &h_mat * &pi_star + &s_mat * (h * h);
    let mut stiffness = pi_star.transpose() * &g_tilde * &pi_star + &s_mat;
    symmetrize(&mut mass);
    symmetrize(&mut stiffness);

    let projected_integrals: Vec<f64> = (0..n)
        .map(|i| (0..3).map(|a| h_mat[(0, a)] * pi_star[(a, i)]).sum())
        .collect();

    Ok(FaceOperators {
        vertex_ids,
        mass,
        stiffness,
        projection: p,
        projected_integrals,
        area,
        diameter: h,
        unit_normal: normal,
    })
}

pub struct CellOperators {
    /// Sorted global vertex ids; local dof `i` is `vertex_ids[i]`.
    pub vertex_ids: Vec<u32>,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Projection onto linears, in the dof basis (`P = D Pi`).
    pub projection: DMatrix<f64>,
    /// `int_E (projection of the i-th basis function)`, the lumped mass.
    pub projected_integrals: Vec<f64>,
    pub volume: f64,
    pub diameter: f64,
}

/// Builds the cell projector and matrices; `face_ops` must hold operators
/// for every global face id the cell references.
pub fn cell_operators(
    mesh: &PolyhedralMesh,
    c: usize,
    face_ops: &[FaceOperators],
) -> Result<CellOperators, VemError> {
    let ids = mesh.cell_vertices(c);
    let n = ids.len();
    let (volume, centroid) = mesh.cell_volume_centroid(c);
    if !(volume > 0.0) {
        return Err(VemError::Degenerate(format!("cell {c} volume {volume}")));
    }
    let h = mesh.cell_diameter(c);

    let mut d_mat = DMatrix::zeros(n, 4);
    for (i, &v) in ids.iter().enumerate() {
        let d = sub(mesh.vertex(v as usize), centroid);
        d_mat[(i, 0)] = 1.0;
        for r in 0..3 {
            d_mat[(i, r + 1)] = d[r] / h;
        }
    }

    let mut b_mat = DMatrix::zeros(4, n);
    for i in 0..n {
        b_mat[(0, i)] = 1.0 / n as f64;
    }
    for (f, outward) in mesh.cell(c) {
        let fo = &face_ops[f];
        let sigma = if outward { 1.0 } else { -1.0 };
        for (local_f, &gid) in fo.vertex_ids.iter().enumerate() {
            let i = ids
                .binary_search(&gid)
                .expect("face vertex belongs to cell");
            let q = sigma * fo.projected_integrals[local_f] / h;
            for r in 0..3 {
                b_mat[(r + 1, i)] += q * fo.unit_normal[r];
            }
        }
    }

    let g = &b_mat * &d_mat;
    let g_inv = g
        .try_inverse()
        .ok_or_else(|| VemError::SingularProjector(format!("cell {c}")))?;
    let pi_star = &g_inv * &b_mat;
    let p = &d_mat * &pi_star;

    // Monomial mass via divergence lifting in x: integrands on faces have
    // degree <= 3, which the triangle rule handles exactly.
    const EXPS: [[u32; 3]; 4] = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]];
    let mut h_mat = DMatrix::zeros(4, 4);
    for r in 0..4 {
        for s in r..4 {
            let e = [
                EXPS[r][0] + EXPS[s][0],
                EXPS[r][1] + EXPS[s][1],
                EXPS[r][2] + EXPS[s][2],
            ];
            h_mat[(r, s)] = integrate_scaled_monomial(mesh, c, e, centroid, h);
        }
    }
    symmetrize(&mut h_mat);

    let mut g_tilde = DMatrix::zeros(4, 4);
    for r in 1..4 {
        g_tilde[(r, r)] = volume / (h * h);
    }

    let eye = DMatrix::identity(n, n);
    let s_mat = {
        let r = &eye - &p;
        r.transpose() * &r
    };

    let mut mass = pi_star.transpose() * &h_mat * &pi_star + &s_mat * (h * h * h);
    let mut stiffness = pi_star.transpose() * &g_tilde * &pi_star + &s_mat * h;
    symmetrize(&mut mass);
    symmetrize(&mut stiffness);

    let projected_integrals: Vec<f64> = (0..n)
        .map(|i| (0..4).map(|a| h_mat[(0, a)] * pi_star[(a, i)]).sum())
        .collect();

    Ok(CellOperators {
        vertex_ids: ids,
        mass,
        stiffness,
        projection: p,
        projected_integrals,
        volume,
        diameter: h,
    })
}

/// `int_E ((x-c)/h)^ex ((y-c)/h)^ey ((z-c)/h)^ez` over cell `c`, by lifting
/// the x-exponent and integrating the lift over the boundary.
fn integrate_scaled_monomial(
    mesh: &PolyhedralMesh,
    c: usize,
    exps: [u32; 3],
    centroid: [f64; 3],
    h: f64,
) -> f64 {
    let lifted = [exps[0] + 1, exps[1], exps[2]];
    let mut acc = 0.0;
    for (f, outward) in mesh.cell(c) {
        let coords = mesh.face_coords(f);
        let area_vec = polygon_area_vector(&coords);
        let area = norm(area_vec);
        if area == 0.0 {
            continue;
        }
        let sigma = if outward { 1.0 } else { -1.0 };
        let nx = sigma * area_vec[0] / area;
        if nx == 0.0 {
            continue;
        }
        acc += nx
            * polygon_integral(&coords, &|p| {
                let mut w = 1.0;
                for d in 0..3 {
                    let base = (p[d] - centroid[d]) / h;
                    for _ in 0..lifted[d] {
                        w *= base;
                    }
                }
                w
            });
    }
    acc * h / (exps[0] + 1) as f64
}
