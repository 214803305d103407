use crate::error::{Error, Result};
use crate::geom::{Mesh, Vec3};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// A deformable UV sphere: a `U x V` grid of 3D points with azimuth wrap in
/// `U` and collapsed pole rows at `j = 0` and `j = V-1`.
///
/// The grid keeps `N_v = U * V` vertices (pole rows store `U` coincident
/// copies so the grid stays rectangular for the quad-topology regularizers);
/// the derived triangle mesh references only column 0 of each pole row and
/// [`SphereGrid::sync_poles`] keeps the copies coincident after updates.
/// Triangulation is fixed: two triangles per quad with the same diagonal,
/// one triangle per pole quad.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    pub u: usize,
    pub v: usize,
    /// Row-major positions: `points[j * u + i]` for azimuth index `i`,
    /// latitude index `j` (north pole at `j = 0`).
    pub points: Vec<Vec3>,
}

/// Grid-topology sidecar stored next to remeshed OBJ files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSidecar {
    pub u: usize,
    pub v: usize,
    /// Azimuth wraps: column `u-1` connects back to column 0.
    pub wrap_u: bool,
    /// Rows 0 and v-1 are collapsed pole rows.
    pub pole_rows: [usize; 2],
}

impl SphereGrid {
    /// Unit sphere sampled on the grid, centered at `center` with `radius`.
    pub fn unit_sphere(u: usize, v: usize, center: Vec3, radius: f64) -> Self {
        assert!(u >= 3 && v >= 3, "grid must be at least 3x3");
        let mut points = Vec::with_capacity(u * v);
        for j in 0..v {
            let theta = std::f64::consts::PI * j as f64 / (v - 1) as f64;
            for i in 0..u {
                let phi = std::f64::consts::TAU * i as f64 / u as f64;
                let p = Vec3::new(
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                );
                points.push(center + p * radius);
            }
        }
        let mut grid = SphereGrid { u, v, points };
        grid.sync_poles();
        grid
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.u + i
    }

    #[inline]
    pub fn point(&self, i: usize, j: usize) -> Vec3 {
        self.points[self.idx(i, j)]
    }

    /// The canonical (column 0) vertex index used by pole-row faces.
    fn pole_canonical(&self, j: usize) -> usize {
        self.idx(0, j)
    }

    /// Copies the canonical pole position into the duplicate pole vertices.
    pub fn sync_poles(&mut self) {
        for &j in &[0, self.v - 1] {
            let p = self.points[self.pole_canonical(j)];
            for i in 1..self.u {
                let idx = self.idx(i, j);
                self.points[idx] = p;
            }
        }
    }

    /// Quad-grid 4-neighborhood with azimuth wrap and latitude clamp.
    pub fn neighbors(&self, i: usize, j: usize) -> [(usize, usize); 4] {
        let left = if i == 0 { self.u - 1 } else { i - 1 };
        let right = if i + 1 == self.u { 0 } else { i + 1 };
        let up = j.saturating_sub(1);
        let down = (j + 1).min(self.v - 1);
        [(left, j), (right, j), (i, up), (i, down)]
    }

    /// Derived triangle mesh view. Quads between interior rows yield two
    /// triangles with a fixed diagonal; quads adjacent to a pole yield one.
    pub fn to_mesh(&self) -> Mesh {
        let mut faces = Vec::new();
        let u = self.u;
        for j in 0..self.v - 1 {
            for i in 0..u {
                let i1 = (i + 1) % u;
                let a = self.vertex_ref(i, j);
                let b = self.vertex_ref(i1, j);
                let c = self.vertex_ref(i, j + 1);
                let d = self.vertex_ref(i1, j + 1);
                if j == 0 {
                    // North pole: a == b, single triangle.
                    faces.push([a, d, c]);
                } else if j + 2 == self.v {
                    // South pole: c == d, single triangle.
                    faces.push([a, b, c]);
                } else {
                    faces.push([a, b, c]);
                    faces.push([b, d, c]);
                }
            }
        }
        let mut mesh = Mesh::new(self.points.clone(), faces);
        mesh.grid_dims = Some((self.u, self.v));
        mesh
    }

    /// Index used by faces for grid node `(i, j)`: pole rows collapse to
    /// their canonical vertex.
    fn vertex_ref(&self, i: usize, j: usize) -> usize {
        if j == 0 || j == self.v - 1 {
            self.pole_canonical(j)
        } else {
            self.idx(i, j)
        }
    }

    pub fn sidecar(&self) -> GridSidecar {
        GridSidecar { u: self.u, v: self.v, wrap_u: true, pole_rows: [0, self.v - 1] }
    }

    /// Writes the grid as OBJ plus a JSON topology sidecar.
    pub fn save(&self, obj_path: &Path, sidecar_path: &Path) -> Result<()> {
        self.to_mesh().save_obj(obj_path)?;
        let json = serde_json::to_string_pretty(&self.sidecar())?;
        std::fs::write(sidecar_path, json)?;
        Ok(())
    }

    /// Reconstructs a grid from an OBJ written by [`SphereGrid::save`].
    pub fn load(obj_path: &Path, sidecar_path: &Path) -> Result<SphereGrid> {
        let mesh = Mesh::load_obj(obj_path)?;
        if !sidecar_path.exists() {
            return Err(Error::MissingFile(sidecar_path.to_path_buf()));
        }
        let sidecar: GridSidecar = serde_json::from_str(&std::fs::read_to_string(sidecar_path)?)
            .map_err(|e| Error::MalformedManifest(format!("{}: {e}", sidecar_path.display())))?;
        if mesh.vertices.len() != sidecar.u * sidecar.v {
            return Err(Error::MalformedManifest(format!(
                "grid sidecar {}x{} does not match {} vertices",
                sidecar.u,
                sidecar.v,
                mesh.vertices.len()
            )));
        }
        let mut grid = SphereGrid { u: sidecar.u, v: sidecar.v, points: mesh.vertices };
        grid.sync_poles();
        Ok(grid)
    }

    /// Applies an arbitrary deformation to every grid point, then re-collapses
    /// the poles. Used to build synthetic grid-topology templates.
    pub fn deform(&mut self, f: impl Fn(Vec3) -> Vec3) {
        for p in &mut self.points {
            *p = f(*p);
        }
        self.sync_poles();
    }
}
