//! Binary mesh files in the `BSMESH1` format.
//!
//! Layout: the 8-byte magic `BSMESH1\n`, one ASCII header line
//! `nv=<nv> nf=<nf> nc=<nc> n_gamma=<ng> L=<L>\n`, then little-endian binary
//! sections in order: vertex coordinates (three f64 each), faces (i32 vertex
//! count followed by that many i32 vertex ids), cells (i32 face count
//! followed by signed 1-based face ids, negated when the stored cycle points
//! into the cell), vertex tags (one u8 each), face tags (one u8 each).
//! Round-trips are bit-exact; `L` is written with enough digits to reparse
//! exactly.

use std::fs::File;
use std::io::{BufReader, BufWriter, ErrorKind, Read, Write};
use std::path::Path;

use super::{FaceTag, MeshError, PolyhedralMesh, VertexTag};

const MAGIC: &[u8; 8] = b"BSMESH1\n";
const MAX_HEADER_LEN: usize = 256;
const MAX_LIST_LEN: i32 = 1 << 20;

pub fn write_mesh_file(mesh: &PolyhedralMesh, path: &Path) -> Result<(), MeshError> {
    let mut w = BufWriter::new(File::create(path)?);
    serialize_mesh(mesh, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_mesh_file(path: &Path) -> Result<PolyhedralMesh, MeshError> {
    let mut r = BufReader::new(File::open(path)?);
    deserialize_mesh(&mut r)
}

pub fn serialize_mesh<W: Write>(mesh: &PolyhedralMesh, w: &mut W) -> Result<(), MeshError> {
    w.write_all(MAGIC)?;
    let header = format!(
        "nv={} nf={} nc={} n_gamma={} L={}\n",
        mesh.n_vertices(),
        mesh.n_faces(),
        mesh.n_cells(),
        mesh.n_gamma_vertices(),
        mesh.domain_edge()
    );
    w.write_all(header.as_bytes())?;

    for p in &mesh.vertices {
        for &x in p {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    for f in 0..mesh.n_faces() {
        let cycle = mesh.face(f);
        w.write_all(&(cycle.len() as i32).to_le_bytes())?;
        for &v in cycle {
            w.write_all(&(v as i32).to_le_bytes())?;
        }
    }
    for c in 0..mesh.n_cells() {
        let faces: Vec<(usize, bool)> = mesh.cell(c).collect();
        w.write_all(&(faces.len() as i32).to_le_bytes())?;
        for (f, outward) in faces {
            let signed = (f as i32 + 1) * if outward { 1 } else { -1 };
            w.write_all(&signed.to_le_bytes())?;
        }
    }
    for &t in &mesh.vertex_tags {
        w.write_all(&[t as u8])?;
    }
    for &t in &mesh.face_tags {
        w.write_all(&[t as u8])?;
    }
    Ok(())
}

pub fn deserialize_mesh<R: Read>(r: &mut R) -> Result<PolyhedralMesh, MeshError> {
    let mut magic = [0u8; 8];
    read_exact(r, &mut magic)?;
    if &magic != MAGIC {
        return Err(MeshError::MalformedFile("bad magic".into()));
    }

    let header = read_header_line(r)?;
    let mut fields = header.split_whitespace();
    let nv: usize = parse_field(fields.next(), "nv")?;
    let nf: usize = parse_field(fields.next(), "nf")?;
    let nc: usize = parse_field(fields.next(), "nc")?;
    let n_gamma: usize = parse_field(fields.next(), "n_gamma")?;
    let domain_edge: f64 = parse_field(fields.next(), "L")?;
    if fields.next().is_some() {
        return Err(MeshError::MalformedFile("trailing header fields".into()));
    }

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        vertices.push([read_f64(r)?, read_f64(r)?, read_f64(r)?]);
    }

    let mut face_offsets = Vec::with_capacity(nf + 1);
    face_offsets.push(0usize);
    let mut face_vertices = Vec::new();
    for _ in 0..nf {
        let count = read_list_len(r)?;
        for _ in 0..count {
            let v = read_i32(r)?;
            if v < 0 || v as usize >= nv {
                return Err(MeshError::MalformedFile(format!("face vertex id {v}")));
            }
            face_vertices.push(v as u32);
        }
        face_offsets.push(face_vertices.len());
    }

    let mut cell_offsets = Vec::with_capacity(nc + 1);
    cell_offsets.push(0usize);
    let mut cell_faces = Vec::new();
    let mut cell_face_outward = Vec::new();
    for _ in 0..nc {
        let count = read_list_len(r)?;
        for _ in 0..count {
            let e = read_i32(r)?;
            if e == 0 || e.unsigned_abs() as usize > nf {
                return Err(MeshError::MalformedFile(format!("cell face entry {e}")));
            }
            cell_faces.push(e.unsigned_abs() - 1);
            cell_face_outward.push(e > 0);
        }
        cell_offsets.push(cell_faces.len());
    }

    let mut vertex_tags = Vec::with_capacity(nv);
    for _ in 0..nv {
        let b = read_u8(r)?;
        vertex_tags.push(
            VertexTag::from_u8(b)
                .ok_or_else(|| MeshError::MalformedFile(format!("vertex tag byte {b}")))?,
        );
    }
    let mut face_tags = Vec::with_capacity(nf);
    for _ in 0..nf {
        let b = read_u8(r)?;
        face_tags.push(
            FaceTag::from_u8(b)
                .ok_or_else(|| MeshError::MalformedFile(format!("face tag byte {b}")))?,
        );
    }

    let mesh = PolyhedralMesh {
        vertices,
        face_offsets,
        face_vertices,
        cell_offsets,
        cell_faces,
        cell_face_outward,
        face_tags,
        vertex_tags,
        domain_edge,
        n_gamma,
    };
    mesh.validate()?;
    Ok(mesh)
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), MeshError> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == ErrorKind::UnexpectedEof {
            MeshError::UnexpectedEof
        } else {
            MeshError::Io(e)
        }
    })
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8, MeshError> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b)?;
    Ok(b[0])
}

fn read_i32<R: Read>(r: &mut R) -> Result<i32, MeshError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(i32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, MeshError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_list_len<R: Read>(r: &mut R) -> Result<i32, MeshError> {
    let count = read_i32(r)?;
    if !(3..=MAX_LIST_LEN).contains(&count) {
        return Err(MeshError::MalformedFile(format!("list length {count}")));
    }
    Ok(count)
}

fn read_header_line<R: Read>(r: &mut R) -> Result<String, MeshError> {
    let mut bytes = Vec::with_capacity(64);
    loop {
        let b = read_u8(r)?;
        if b == b'\n' {
            break;
        }
        bytes.push(b);
        if bytes.len() > MAX_HEADER_LEN {
            return Err(MeshError::MalformedFile("header line too long".into()));
        }
    }
    String::from_utf8(bytes).map_err(|_| MeshError::MalformedFile("header is not UTF-8".into()))
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, key: &str) -> Result<T, MeshError> {
    let field = field.ok_or_else(|| MeshError::MalformedFile(format!("missing field {key}")))?;
    let value = field
        .strip_prefix(key)
        .and_then(|s| s.strip_prefix('='))
        .ok_or_else(|| MeshError::MalformedFile(format!("expected {key}=..., got {field}")))?;
    value
        .parse()
        .map_err(|_| MeshError::MalformedFile(format!("cannot parse {key} from {value}")))
}
