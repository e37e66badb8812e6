use std::io::{BufRead, Write};

use super::SurfaceMesh;
use crate::{BdieError, Point, Result};

/// Writes vertices and triangles in the OFF text format.
pub fn write_off<W: Write>(mesh: &SurfaceMesh, mut w: W) -> Result<()> {
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", mesh.n_vertices(), mesh.n_triangles())?;
    for v in &mesh.vertices {
        writeln!(w, "{:e} {:e} {:e}", v[0], v[1], v[2])?;
    }
    for t in &mesh.triangles {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

/// Reads a triangle mesh in OFF format. Orientation is taken as given.
pub fn read_off<R: BufRead>(r: R) -> Result<SurfaceMesh> {
    let mut tokens = Vec::new();
    for line in r.lines() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("");
        tokens.extend(body.split_whitespace().map(str::to_owned));
    }
    let mut it = tokens.into_iter();
    let bad = |m: &str| BdieError::Parse(format!("OFF: {m}"));
    if it.next().as_deref() != Some("OFF") {
        return Err(bad("missing header"));
    }
    let mut next_num = |what: &str| -> Result<f64> {
        it.next()
            .ok_or_else(|| bad(&format!("unexpected end while reading {what}")))?
            .parse::<f64>()
            .map_err(|_| bad(&format!("malformed {what}")))
    };
    let nv = next_num("vertex count")? as usize;
    let nf = next_num("face count")? as usize;
    let _ne = next_num("edge count")?;
    let mut verts = Vec::with_capacity(nv);
    for _ in 0..nv {
        verts.push(Point::new(next_num("coordinate")?, next_num("coordinate")?, next_num("coordinate")?));
    }
    let mut tris = Vec::with_capacity(nf);
    for _ in 0..nf {
        if next_num("face size")? as usize != 3 {
            return Err(bad("only triangular faces are supported"));
        }
        let mut t = [0usize; 3];
        for i in &mut t {
            let x = next_num("vertex index")?;
            if x < 0.0 || x.fract() != 0.0 {
                return Err(bad("vertex index"));
            }
            *i = x as usize;
        }
        tris.push(t);
    }
    SurfaceMesh::from_raw(verts, tris)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_icosphere;

    #[test]
    fn round_trip() {
        let m = build_icosphere(2).unwrap();
        let mut buf = Vec::new();
        write_off(&m, &mut buf).unwrap();
        let back = read_off(&buf[..]).unwrap();
        assert_eq!(back.triangles, m.triangles);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_off(&b"PLY\n"[..]).is_err());
        assert!(read_off(&b"OFF\n3 1 0\n0 0 0\n1 0 0\n"[..]).is_err());
        assert!(read_off(&b"OFF\n4 1 0\n0 0 0\n1 0 0\n0 1 0\n0 0 1\n4 0 1 2 3\n"[..]).is_err());
    }
}
