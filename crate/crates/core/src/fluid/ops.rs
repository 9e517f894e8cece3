//! Grid kernels on the MAC layout: divergence, gradient, the no-slip vector
//! Laplacian, and the cell-centred Neumann Laplacian.
//!
//! All arrays are in standard (row-major) layout, so kernels index the flat
//! slices directly.

use ndarray::Array3;

use super::grid::{FaceField, GridSpec};

#[inline]
fn flat(i: usize, j: usize, k: usize, n1: usize, n2: usize) -> usize {
    (i * n1 + j) * n2 + k
}

/// Cell-centred divergence of a face field.
pub fn divergence(u: &FaceField, grid: &GridSpec) -> Array3<f64> {
    let (nx, ny, nz) = grid.cell_shape();
    let h = grid.spacing();
    let ux = u.c[0].as_slice().expect("standard layout");
    let uy = u.c[1].as_slice().expect("standard layout");
    let uz = u.c[2].as_slice().expect("standard layout");
    let mut out = Array3::zeros((nx, ny, nz));
    let o = out.as_slice_mut().expect("standard layout");
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let dx = ux[flat(i + 1, j, k, ny, nz)] - ux[flat(i, j, k, ny, nz)];
                let dy = uy[flat(i, j + 1, k, ny + 1, nz)] - uy[flat(i, j, k, ny + 1, nz)];
                let dz = uz[flat(i, j, k + 1, ny, nz + 1)] - uz[flat(i, j, k, ny, nz + 1)];
                o[flat(i, j, k, ny, nz)] = dx / h.x + dy / h.y + dz / h.z;
            }
        }
    }
    out
}

/// Face gradient of a cell field; wall faces are left at zero.
pub fn gradient(phi: &Array3<f64>, grid: &GridSpec) -> FaceField {
    let h = grid.spacing();
    let mut g = FaceField::zeros(grid);
    for a in 0..3 {
        let n = grid.cells[a];
        for ((i, j, k), v) in g.c[a].indexed_iter_mut() {
            let idx = [i, j, k];
            if idx[a] == 0 || idx[a] == n {
                continue;
            }
            let mut lo = idx;
            lo[a] -= 1;
            *v = (phi[idx] - phi[lo]) / h[a];
        }
    }
    g
}

/// `out = Δ src` for velocity component `axis`.
///
/// Along `axis` the wall entries are Dirichlet nodes. Across the other axes
/// the wall sits half a cell outside the first row, imposed with the odd
/// ghost value `u_ghost = -u_0`. Wall entries of `out` are zero. The operator
/// is symmetric negative definite on the interior entries.
pub fn vector_laplacian_component(axis: usize, src: &[f64], out: &mut [f64], grid: &GridSpec) {
    let shape = grid.face_shape(axis);
    let dims = [shape.0, shape.1, shape.2];
    let h = grid.spacing();
    let inv_h2 = [1.0 / (h.x * h.x), 1.0 / (h.y * h.y), 1.0 / (h.z * h.z)];
    let strides = [dims[1] * dims[2], dims[2], 1];
    let n_axis = grid.cells[axis];
    for i in 0..dims[0] {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let idx = [i, j, k];
                let p = i * strides[0] + j * strides[1] + k;
                if idx[axis] == 0 || idx[axis] == n_axis {
                    out[p] = 0.0;
                    continue;
                }
                let c = src[p];
                let mut acc = 0.0;
                for d in 0..3 {
                    let s = strides[d];
                    let last = dims[d] - 1;
                    let (lo, hi) = if d == axis {
                        // wall nodes are zero
                        let lo = if idx[d] == 1 { 0.0 } else { src[p - s] };
                        let hi = if idx[d] == last - 1 { 0.0 } else { src[p + s] };
                        (lo, hi)
                    } else {
                        let lo = if idx[d] == 0 { -c } else { src[p - s] };
                        let hi = if idx[d] == last { -c } else { src[p + s] };
                        (lo, hi)
                    };
                    acc += (lo - 2.0 * c + hi) * inv_h2[d];
                }
                out[p] = acc;
            }
        }
    }
}

pub fn vector_laplacian(u: &FaceField, grid: &GridSpec) -> FaceField {
    let mut out = FaceField::zeros(grid);
    for a in 0..3 {
        let src = u.c[a].as_slice().expect("standard layout");
        let dst = out.c[a].as_slice_mut().expect("standard layout");
        vector_laplacian_component(a, src, dst, grid);
    }
    out
}

/// `out = -L phi` for the cell-centred Laplacian with zero-flux walls
/// (`L = div ∘ grad` on the MAC grid). Positive semidefinite; constants span
/// the null space.
pub fn neg_neumann_laplacian(src: &[f64], out: &mut [f64], grid: &GridSpec) {
    let (nx, ny, nz) = grid.cell_shape();
    let h = grid.spacing();
    let w = [1.0 / (h.x * h.x), 1.0 / (h.y * h.y), 1.0 / (h.z * h.z)];
    let dims = [nx, ny, nz];
    let strides = [ny * nz, nz, 1];
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let idx = [i, j, k];
                let p = flat(i, j, k, ny, nz);
                let c = src[p];
                let mut acc = 0.0;
                for d in 0..3 {
                    let s = strides[d];
                    if idx[d] > 0 {
                        acc += (c - src[p - s]) * w[d];
                    }
                    if idx[d] + 1 < dims[d] {
                        acc += (c - src[p + s]) * w[d];
                    }
                }
                out[p] = acc;
            }
        }
    }
}

/// Discrete L² inner product of two face fields (uniform face weight = cell volume).
pub fn inner(a: &FaceField, b: &FaceField, grid: &GridSpec) -> f64 {
    let s: f64 = (0..3)
        .map(|d| {
            a.c[d]
                .as_slice()
                .unwrap()
                .iter()
                .zip(b.c[d].as_slice().unwrap())
                .map(|(x, y)| x * y)
                .sum::<f64>()
        })
        .sum();
    s * grid.cell_volume()
}

pub fn l2_norm(u: &FaceField, grid: &GridSpec) -> f64 {
    inner(u, u, grid).sqrt()
}

/// `sqrt(Σ v² · cell volume)` over a cell field.
pub fn cell_l2_norm(v: &Array3<f64>, grid: &GridSpec) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * grid.cell_volume()).sqrt()
}

/// `-(Δu, u)`: the discrete Dirichlet energy `‖∇u‖²`.
pub fn gradient_energy(u: &FaceField, grid: &GridSpec) -> f64 {
    -inner(&vector_laplacian(u, grid), u, grid)
}

/// Divergence relative to the natural scale `‖u‖ / h_min`.
pub fn relative_divergence(u: &FaceField, grid: &GridSpec) -> f64 {
    let norm = l2_norm(u, grid);
    if norm == 0.0 {
        return 0.0;
    }
    cell_l2_norm(&divergence(u, grid), grid) * grid.min_spacing() / norm
}
