//! Conjugate gradients on flat slices, plus the separable eigen-solver for
//! the cell-centred Neumann Laplacian used as its preconditioner.

use std::f64::consts::PI;

use super::grid::GridSpec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    /// True residual `‖b − Ax‖ / ‖b‖` at exit.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Preconditioned CG for a symmetric positive (semi)definite operator.
///
/// With `singular = true` the right-hand side, residuals and solution are
/// kept orthogonal to constants. Returns `Err(stats)` when `max_iter` is
/// exhausted above tolerance.
pub fn conjugate_gradient(
    apply: &dyn Fn(&[f64], &mut [f64]),
    precond: Option<&dyn Fn(&[f64], &mut [f64])>,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    singular: bool,
) -> Result<CgStats, CgStats> {
    let n = b.len();
    let mut rhs = b.to_vec();
    if singular {
        remove_mean(&mut rhs);
    }
    let b_norm = dot(&rhs, &rhs).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, relative_residual: 0.0 });
    }
    let mut r = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    let true_residual = |x: &[f64], r: &mut [f64], ap: &mut [f64]| {
        apply(x, ap);
        for i in 0..n {
            r[i] = rhs[i] - ap[i];
        }
        if singular {
            remove_mean(r);
        }
        dot(r, r).sqrt()
    };

    // restart from the true residual until it, not the recurrence, is below tolerance
    loop {
        let mut r_norm = true_residual(x, &mut r, &mut ap);
        if r_norm <= tol * b_norm {
            break;
        }
        if iterations >= max_iter {
            return Err(CgStats { iterations, relative_residual: r_norm / b_norm });
        }
        let precondition = |r: &[f64], z: &mut [f64]| {
            match precond {
                Some(m) => m(r, z),
                None => z.copy_from_slice(r),
            }
            if singular {
                remove_mean(z);
            }
        };
        precondition(&r, &mut z);
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while r_norm > tol * b_norm && iterations < max_iter {
            apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(CgStats { iterations, relative_residual: r_norm / b_norm });
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            iterations += 1;
            r_norm = dot(&r, &r).sqrt();
            precondition(&r, &mut z);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
    if singular {
        remove_mean(x);
    }
    let res = true_residual(x, &mut r, &mut ap);
    Ok(CgStats { iterations, relative_residual: res / b_norm })
}

/// Exact inverse of the cell-centred Neumann Laplacian on a uniform box
/// grid, by separable cosine eigen-decomposition along each axis. The
/// constant mode is mapped to zero.
#[derive(Debug, Clone)]
pub struct NeumannEigenSolver {
    dims: [usize; 3],
    /// Orthonormal cosine basis per axis, row `k` is mode `k`.
    bases: [Vec<f64>; 3],
    eigen: [Vec<f64>; 3],
}

impl NeumannEigenSolver {
    pub fn new(grid: &GridSpec) -> Self {
        let h = grid.spacing();
        let build = |d: usize| {
            let n = grid.cells[d];
            let mut q = vec![0.0; n * n];
            for k in 0..n {
                let c = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
                for i in 0..n {
                    q[k * n + i] = c * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
                }
            }
            let lam = (0..n)
                .map(|k| (2.0 - 2.0 * (PI * k as f64 / n as f64).cos()) / (h[d] * h[d]))
                .collect::<Vec<_>>();
            (q, lam)
        };
        let (q0, l0) = build(0);
        let (q1, l1) = build(1);
        let (q2, l2) = build(2);
        NeumannEigenSolver { dims: grid.cells, bases: [q0, q1, q2], eigen: [l0, l1, l2] }
    }

    /// `out[.., k, ..] = Σ_i Q[k][i] src[.., i, ..]` along axis `d` (or with
    /// `Qᵀ` when `transpose`).
    fn transform_axis(&self, d: usize, src: &[f64], out: &mut [f64], transpose: bool) {
        let [n0, n1, n2] = self.dims;
        let n = self.dims[d];
        let q = &self.bases[d];
        let strides = [n1 * n2, n2, 1];
        let s = strides[d];
        let mut line = vec![0.0; n];
        let outer: Vec<[usize; 2]> = match d {
            0 => (0..n1).flat_map(|j| (0..n2).map(move |k| [j, k])).collect(),
            1 => (0..n0).flat_map(|i| (0..n2).map(move |k| [i, k])).collect(),
            _ => (0..n0).flat_map(|i| (0..n1).map(move |j| [i, j])).collect(),
        };
        for [a, b] in outer {
            let base = match d {
                0 => a * strides[1] + b,
                1 => a * strides[0] + b,
                _ => a * strides[0] + b * strides[1],
            };
            for (i, l) in line.iter_mut().enumerate() {
                *l = src[base + i * s];
            }
            for k in 0..n {
                let mut acc = 0.0;
                if transpose {
                    for i in 0..n {
                        acc += q[i * n + k] * line[i];
                    }
                } else {
                    let row = &q[k * n..(k + 1) * n];
                    for i in 0..n {
                        acc += row[i] * line[i];
                    }
                }
                out[base + k * s] = acc;
            }
        }
    }

    /// Solves `(-L) x = r` for zero-mean `x`.
    pub fn solve(&self, r: &[f64], x: &mut [f64]) {
        let [n0, n1, n2] = self.dims;
        let mut a = r.to_vec();
        let mut b = vec![0.0; r.len()];
        self.transform_axis(0, &a, &mut b, false);
        self.transform_axis(1, &b, &mut a, false);
        self.transform_axis(2, &a, &mut b, false);
        for i in 0..n0 {
            for j in 0..n1 {
                for k in 0..n2 {
                    let p = (i * n1 + j) * n2 + k;
                    let lam = self.eigen[0][i] + self.eigen[1][j] + self.eigen[2][k];
                    b[p] = if p == 0 { 0.0 } else { b[p] / lam };
                }
            }
        }
        self.transform_axis(2, &b, &mut a, true);
        self.transform_axis(1, &a, &mut b, true);
        self.transform_axis(0, &b, x, true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::ops::neg_neumann_laplacian;
    use crate::geometry::Vec3;

    fn rhs(n: usize, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect();
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= m);
        v
    }

    #[test]
    fn eigen_solver_inverts_neumann_laplacian() {
        let g = GridSpec::new(Vec3::new(1.0, 0.7, 1.2), [8, 11, 9]).unwrap();
        let b = rhs(g.num_cells(), 5);
        let solver = NeumannEigenSolver::new(&g);
        let mut x = vec![0.0; b.len()];
        solver.solve(&b, &mut x);
        let mut ax = vec![0.0; b.len()];
        neg_neumann_laplacian(&x, &mut ax, &g);
        let err = ax.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let bn = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err < 1e-13 * bn, "{err}");
    }

    #[test]
    fn plain_and_preconditioned_cg_agree() {
        let g = GridSpec::cube(1.0, 10).unwrap();
        let b = rhs(g.num_cells(), 9);
        let op = |x: &[f64], y: &mut [f64]| neg_neumann_laplacian(x, y, &g);
        let mut x1 = vec![0.0; b.len()];
        let s1 = conjugate_gradient(&op, None, &b, &mut x1, 1e-12, 5000, true).unwrap();
        let eig = NeumannEigenSolver::new(&g);
        let pre = |r: &[f64], z: &mut [f64]| eig.solve(r, z);
        let mut x2 = vec![0.0; b.len()];
        let s2 = conjugate_gradient(&op, Some(&pre), &b, &mut x2, 1e-12, 50, true).unwrap();
        assert!(s2.iterations <= 2, "{s2:?}");
        assert!(s1.iterations > 10);
        let diff = x1.iter().zip(&x2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-9, "{diff}");
    }

    #[test]
    fn exhausted_iterations_are_reported() {
        let g = GridSpec::cube(1.0, 12).unwrap();
        let b = rhs(g.num_cells(), 1);
        let op = |x: &[f64], y: &mut [f64]| neg_neumann_laplacian(x, y, &g);
        let mut x = vec![0.0; b.len()];
        let err = conjugate_gradient(&op, None, &b, &mut x, 1e-14, 3, true).unwrap_err();
        assert_eq!(err.iterations, 3);
        assert!(err.relative_residual > 1e-14);
    }
}
