//! Staggered (MAC) grid layout on the box domain.
//!
//! Velocity component `a` lives on the faces normal to axis `a`: its array has
//! `cells[a] + 1` entries along that axis and `cells[b]` along the others.
//! Entries `0` and `cells[a]` along axis `a` sit on the walls and are held at
//! zero. Pressure and force densities are cell-centred.

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::geometry::{BodyShape, Domain, Vec3};

use super::FluidError;

/// Minimum resolution per axis.
pub const MIN_CELLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub extents: Vec3,
    pub cells: [usize; 3],
}

impl GridSpec {
    pub fn new(extents: Vec3, cells: [usize; 3]) -> Result<Self, String> {
        let g = GridSpec { extents, cells };
        g.validate()?;
        Ok(g)
    }

    pub fn cube(side: f64, n: usize) -> Result<Self, String> {
        Self::new(Vec3::repeat(side), [n; 3])
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.cells.iter().any(|&n| n < MIN_CELLS) {
            return Err(format!("grid needs at least {MIN_CELLS} cells per axis, got {:?}", self.cells));
        }
        if self.extents.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
            return Err(format!("domain extents must be positive, got {:?}", self.extents));
        }
        Ok(())
    }

    pub fn domain(&self) -> Domain {
        Domain::new(self.extents)
    }

    pub fn spacing(&self) -> Vec3 {
        Vec3::new(
            self.extents.x / self.cells[0] as f64,
            self.extents.y / self.cells[1] as f64,
            self.extents.z / self.cells[2] as f64,
        )
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing().min()
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().max()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn cell_shape(&self) -> (usize, usize, usize) {
        (self.cells[0], self.cells[1], self.cells[2])
    }

    pub fn face_shape(&self, axis: usize) -> (usize, usize, usize) {
        let mut c = self.cells;
        c[axis] += 1;
        (c[0], c[1], c[2])
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.spacing();
        Vec3::new((i as f64 + 0.5) * h.x, (j as f64 + 0.5) * h.y, (k as f64 + 0.5) * h.z)
    }

    /// Position of face `idx` of velocity component `axis`.
    pub fn face_position(&self, axis: usize, idx: [usize; 3]) -> Vec3 {
        let h = self.spacing();
        let mut x = Vec3::zeros();
        for d in 0..3 {
            let offset = if d == axis { 0.0 } else { 0.5 };
            x[d] = (idx[d] as f64 + offset) * h[d];
        }
        x
    }

    /// Cells whose centres lie in `shape` shifted to `center`. Fails when the
    /// body reaches the outermost cell layer or leaves the grid.
    pub fn covered_cells(
        &self,
        shape: &BodyShape,
        center: &Vec3,
        body: usize,
    ) -> Result<Vec<[usize; 3]>, FluidError> {
        let h = self.spacing();
        let e = shape.aabb_half_extents();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for d in 0..3 {
            let a = ((center[d] - e[d]) / h[d] - 0.5).floor();
            let b = ((center[d] + e[d]) / h[d] - 0.5).ceil();
            if !(a.is_finite() && b.is_finite()) || a < 0.0 || b > (self.cells[d] - 1) as f64 {
                return Err(FluidError::BodyOutsideDomain { body });
            }
            lo[d] = a as usize;
            hi[d] = b as usize;
        }
        let mut out = Vec::new();
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for k in lo[2]..=hi[2] {
                    if shape.contains(center, &self.cell_center(i, j, k)) {
                        let idx = [i, j, k];
                        if (0..3).any(|d| idx[d] == 0 || idx[d] == self.cells[d] - 1) {
                            return Err(FluidError::BodyOutsideDomain { body });
                        }
                        out.push(idx);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Face-centred vector field, one array per component.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub c: [Array3<f64>; 3],
}

impl FaceField {
    pub fn zeros(grid: &GridSpec) -> Self {
        FaceField {
            c: [
                Array3::zeros(grid.face_shape(0)),
                Array3::zeros(grid.face_shape(1)),
                Array3::zeros(grid.face_shape(2)),
            ],
        }
    }

    /// Samples `f` at every face and zeroes the wall faces.
    pub fn from_fn(grid: &GridSpec, f: impl Fn(&Vec3) -> Vec3) -> Self {
        let mut out = Self::zeros(grid);
        for a in 0..3 {
            let n = grid.cells[a];
            for ((i, j, k), v) in out.c[a].indexed_iter_mut() {
                let idx = [i, j, k];
                if idx[a] == 0 || idx[a] == n {
                    continue;
                }
                *v = f(&grid.face_position(a, idx))[a];
            }
        }
        out
    }

    pub fn scale(&mut self, s: f64) {
        for a in &mut self.c {
            a.mapv_inplace(|v| v * s);
        }
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &FaceField) {
        for a in 0..3 {
            self.c[a].scaled_add(s, &other.c[a]);
        }
    }

    pub fn sub(&self, other: &FaceField) -> FaceField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.c
            .iter()
            .flat_map(|a| a.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|a| a.iter().all(|v| v.is_finite()))
    }

    /// Largest magnitude on a wall face; zero for a no-slip field.
    pub fn wall_max_abs(&self, grid: &GridSpec) -> f64 {
        let mut m = 0.0f64;
        for a in 0..3 {
            let n = grid.cells[a];
            for ((i, j, k), v) in self.c[a].indexed_iter() {
                let idx = [i, j, k];
                if idx[a] == 0 || idx[a] == n {
                    m = m.max(v.abs());
                }
            }
        }
        m
    }

    pub fn zero_walls(&mut self, grid: &GridSpec) {
        for a in 0..3 {
            let n = grid.cells[a];
            for ((i, j, k), v) in self.c[a].indexed_iter_mut() {
                let idx = [i, j, k];
                if idx[a] == 0 || idx[a] == n {
                    *v = 0.0;
                }
            }
        }
    }

    /// Face-to-cell averaging of each component.
    pub fn cell_centered(&self, grid: &GridSpec) -> [Array3<f64>; 3] {
        let shape = grid.cell_shape();
        std::array::from_fn(|a| {
            let src = &self.c[a];
            Array3::from_shape_fn(shape, |(i, j, k)| {
                let mut hi = [i, j, k];
                hi[a] += 1;
                0.5 * (src[[i, j, k]] + src[hi])
            })
        })
    }

    /// Velocity at the centre of cell `idx`.
    #[inline]
    pub fn cell_value(&self, idx: [usize; 3]) -> Vec3 {
        let mut v = Vec3::zeros();
        for a in 0..3 {
            let mut hi = idx;
            hi[a] += 1;
            v[a] = 0.5 * (self.c[a][idx] + self.c[a][hi]);
        }
        v
    }
}

/// Cell-centred force density (force per unit volume).
#[derive(Debug, Clone, PartialEq)]
pub struct ForceDensityField {
    pub c: [Array3<f64>; 3],
}

impl ForceDensityField {
    pub fn zeros(grid: &GridSpec) -> Self {
        let s = grid.cell_shape();
        ForceDensityField { c: [Array3::zeros(s), Array3::zeros(s), Array3::zeros(s)] }
    }

    pub fn add_at(&mut self, idx: [usize; 3], d: &Vec3) {
        for a in 0..3 {
            self.c[a][idx] += d[a];
        }
    }

    pub fn value(&self, idx: [usize; 3]) -> Vec3 {
        Vec3::new(self.c[0][idx], self.c[1][idx], self.c[2][idx])
    }

    /// Sum of density times cell volume.
    pub fn integral(&self, grid: &GridSpec) -> Vec3 {
        let v = grid.cell_volume();
        Vec3::new(self.c[0].sum() * v, self.c[1].sum() * v, self.c[2].sum() * v)
    }

    pub fn is_zero(&self) -> bool {
        self.c.iter().all(|a| a.iter().all(|&v| v == 0.0))
    }

    /// Cell-to-face averaging onto interior faces; wall faces get zero.
    pub fn to_faces(&self, grid: &GridSpec) -> FaceField {
        let mut out = FaceField::zeros(grid);
        for a in 0..3 {
            let n = grid.cells[a];
            let src = &self.c[a];
            for ((i, j, k), v) in out.c[a].indexed_iter_mut() {
                let idx = [i, j, k];
                if idx[a] == 0 || idx[a] == n {
                    continue;
                }
                let mut lo = idx;
                lo[a] -= 1;
                *v = 0.5 * (src[lo] + src[idx]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_shapes() {
        let g = GridSpec::new(Vec3::new(1.0, 2.0, 0.5), [8, 16, 10]).unwrap();
        assert_eq!(g.spacing(), Vec3::new(0.125, 0.125, 0.05));
        assert_eq!(g.face_shape(1), (8, 17, 10));
        assert!(GridSpec::cube(1.0, 7).is_err());
        assert!(GridSpec::new(Vec3::new(1.0, 0.0, 1.0), [8; 3]).is_err());
    }

    #[test]
    fn covered_cells_of_aligned_box_are_exact() {
        let g = GridSpec::cube(1.0, 16).unwrap();
        let h = g.min_spacing();
        let shape = BodyShape::cuboid(Vec3::repeat(2.0 * h)).unwrap();
        let cells = g.covered_cells(&shape, &Vec3::repeat(0.5), 0).unwrap();
        assert_eq!(cells.len(), 64);
        // shifted by a fraction of a cell: still four centres per axis
        let cells = g.covered_cells(&shape, &Vec3::new(0.51, 0.47, 0.5003), 0).unwrap();
        assert_eq!(cells.len(), 64);
    }

    #[test]
    fn bodies_touching_the_wall_layer_are_rejected() {
        let g = GridSpec::cube(1.0, 16).unwrap();
        let ball = BodyShape::ball(0.1).unwrap();
        assert!(g.covered_cells(&ball, &Vec3::new(0.5, 0.5, 0.5), 0).is_ok());
        assert_eq!(
            g.covered_cells(&ball, &Vec3::new(0.12, 0.5, 0.5), 3),
            Err(FluidError::BodyOutsideDomain { body: 3 })
        );
        assert!(g.covered_cells(&ball, &Vec3::new(-0.5, 0.5, 0.5), 0).is_err());
    }

    #[test]
    fn face_cell_averaging_are_transposes() {
        let g = GridSpec::new(Vec3::new(1.0, 1.0, 1.0), [8, 9, 10]).unwrap();
        let u = FaceField::from_fn(&g, |x| Vec3::new(x.y.sin(), x.z * x.x, (3.0 * x.x).cos()));
        let mut f = ForceDensityField::zeros(&g);
        for (n, a) in f.c.iter_mut().enumerate() {
            for ((i, j, k), v) in a.indexed_iter_mut() {
                *v = ((i * 7 + j * 3 + k + n) % 5) as f64 - 2.0;
            }
        }
        let lhs: f64 = (0..3).map(|a| (&f.to_faces(&g).c[a] * &u.c[a]).sum()).sum();
        let uc = u.cell_centered(&g);
        let rhs: f64 = (0..3).map(|a| (&f.c[a] * &uc[a]).sum()).sum();
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }
}
