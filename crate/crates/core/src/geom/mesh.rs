use super::Vec3;
use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// A triangle mesh: vertex positions plus index triples.
///
/// Remeshed templates additionally carry the `(U, V)` dimensions of the quad
/// grid they were deformed from; their vertices are laid out row-major with
/// azimuth wrapping, so `N_v = U * V`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    /// Quad-grid dimensions for remeshed templates, `None` for raw meshes.
    pub grid_dims: Option<(usize, usize)>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Self {
        Mesh { vertices, faces, grid_dims: None }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    /// Checks index bounds and rejects faces with repeated indices.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        for (i, f) in self.faces.iter().enumerate() {
            if f[0] >= n || f[1] >= n || f[2] >= n {
                return Err(Error::MalformedManifest(format!(
                    "face {i} references vertex out of range (N_v = {n})"
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::MalformedManifest(format!("face {i} has repeated indices")));
            }
        }
        if let Some((u, v)) = self.grid_dims {
            if u * v != n {
                return Err(Error::MalformedManifest(format!(
                    "grid dims {u}x{v} inconsistent with N_v = {n}"
                )));
            }
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::MalformedManifest(format!("vertex {i} is not finite")));
            }
        }
        Ok(())
    }

    /// Centers the mesh on its bounding-box center and scales it to fit a
    /// unit-radius bounding sphere.
    pub fn normalize_to_unit_sphere(&mut self) {
        if self.vertices.is_empty() {
            return;
        }
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices {
            lo = Vec3::new(lo.x.min(v.x), lo.y.min(v.y), lo.z.min(v.z));
            hi = Vec3::new(hi.x.max(v.x), hi.y.max(v.y), hi.z.max(v.z));
        }
        let center = (lo + hi) * 0.5;
        let mut radius: f64 = 0.0;
        for v in &self.vertices {
            radius = radius.max((*v - center).norm());
        }
        if radius == 0.0 {
            radius = 1.0;
        }
        for v in &mut self.vertices {
            *v = (*v - center) / radius;
        }
    }

    /// Loads a Wavefront OBJ file. Only `v` and `f` records are interpreted;
    /// faces with more than three vertices are fan-triangulated and negative
    /// (relative) indices are resolved against the vertices seen so far.
    pub fn load_obj(path: &Path) -> Result<Mesh> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let file = std::fs::File::open(path)?;
        let reader = BufReader::new(file);
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let mut it = line.split_whitespace();
            match it.next() {
                Some("v") => {
                    let mut coord = |name: &str| -> Result<f64> {
                        it.next()
                            .ok_or_else(|| bad_obj(path, lineno, &format!("missing {name}")))?
                            .parse::<f64>()
                            .map_err(|_| bad_obj(path, lineno, &format!("bad {name}")))
                    };
                    let (x, y, z) = (coord("x")?, coord("y")?, coord("z")?);
                    vertices.push(Vec3::new(x, y, z));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in it {
                        let first = tok.split('/').next().unwrap_or("");
                        let i: i64 =
                            first.parse().map_err(|_| bad_obj(path, lineno, "bad face index"))?;
                        let resolved = if i > 0 {
                            (i - 1) as usize
                        } else if i < 0 {
                            let n = vertices.len() as i64 + i;
                            if n < 0 {
                                return Err(bad_obj(path, lineno, "negative index out of range"));
                            }
                            n as usize
                        } else {
                            return Err(bad_obj(path, lineno, "face index 0"));
                        };
                        idx.push(resolved);
                    }
                    if idx.len() < 3 {
                        return Err(bad_obj(path, lineno, "face with fewer than 3 vertices"));
                    }
                    for k in 1..idx.len() - 1 {
                        faces.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        let mesh = Mesh::new(vertices, faces);
        mesh.validate()?;
        Ok(mesh)
    }

    /// Writes the mesh as OBJ with 1-based face indices.
    pub fn save_obj(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for v in &self.vertices {
            writeln!(out, "v {} {} {}", v.x, v.y, v.z)?;
        }
        for f in &self.faces {
            writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }

    /// Writes OBJ with per-vertex RGB colors appended to each `v` record.
    pub fn save_obj_colored(&self, path: &Path, colors: &[[f64; 3]]) -> Result<()> {
        if colors.len() != self.vertices.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} vertex colors", self.vertices.len()),
                got: format!("{}", colors.len()),
            });
        }
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for (v, c) in self.vertices.iter().zip(colors) {
            writeln!(out, "v {} {} {} {:.4} {:.4} {:.4}", v.x, v.y, v.z, c[0], c[1], c[2])?;
        }
        for f in &self.faces {
            writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
        }
        Ok(())
    }
}

fn bad_obj(path: &Path, lineno: usize, what: &str) -> Error {
    Error::MalformedManifest(format!("{}:{}: {what}", path.display(), lineno + 1))
}
