//! Conjugate gradients and a shift-invert Lanczos for the smallest nonzero
//! eigenvalue of a symmetric positive semidefinite operator.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Jacobi-preconditioned CG for `A x = b`, `A` symmetric positive definite.
pub fn cg<F>(apply: F, diag: &[f64], b: &[f64], tol: f64, max_iter: usize) -> CgOutcome
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return CgOutcome { x: vec![0.0; n], iterations: 0, rel_residual: 0.0 };
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    let mut res = 1.0;
    while it < max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        it += 1;
        res = dot(&r, &r).sqrt() / bnorm;
        if res < tol {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome { x, iterations: it, rel_residual: res }
}

pub fn dense_solve(a: DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let lu = a.lu();
    lu.solve(&DVector::from_column_slice(b))
        .map(|v| v.as_slice().to_vec())
        .ok_or_else(|| Error::Param("singular system".into()))
}

fn project_out(v: &mut [f64], null: &[f64]) {
    let c = dot(v, null);
    axpy(v, -c, null);
}

/// Smallest eigenvalue of `A` on the orthogonal complement of the unit vector
/// `null`, where `A null = 0`. Lanczos on `A^{-1}` (applied by deflated CG),
/// restarted from the best Ritz vector.
pub fn smallest_nonzero_eigenvalue<F>(apply: F, null: &[f64], tol: f64) -> f64
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = null.len();
    let solve = |b: &[f64]| -> Vec<f64> {
        let mut bb = b.to_vec();
        project_out(&mut bb, null);
        let op = |x: &[f64], out: &mut [f64]| {
            apply(x, out);
            project_out(out, null);
        };
        let mut x = cg(op, &vec![1.0; n], &bb, 1e-12, 20 * n + 100).x;
        project_out(&mut x, null);
        x
    };
    // deterministic, generic start vector
    let mut v: Vec<f64> = (0..n).map(|i| ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5).collect();
    let mut best = f64::NAN;
    for _restart in 0..20 {
        project_out(&mut v, null);
        let nv = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= nv);
        let m = 40.min(n - 1).max(1);
        let mut basis: Vec<Vec<f64>> = vec![v.clone()];
        let mut alpha = Vec::new();
        let mut beta = Vec::new();
        for j in 0..m {
            let mut w = solve(&basis[j]);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            for q in &basis {
                let c = dot(&w, q);
                axpy(&mut w, -c, q);
            }
            for q in &basis {
                let c = dot(&w, q);
                axpy(&mut w, -c, q);
            }
            let b = dot(&w, &w).sqrt();
            if j + 1 == m || b < 1e-14 {
                break;
            }
            beta.push(b);
            w.iter_mut().for_each(|x| *x /= b);
            basis.push(w);
        }
        let k = alpha.len();
        let t = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j || j + 1 == i {
                beta[i.min(j)]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (imax, &mu) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let lam = 1.0 / mu;
        let mut ritz = vec![0.0; n];
        for (i, q) in basis.iter().enumerate().take(k) {
            axpy(&mut ritz, eig.eigenvectors[(i, imax)], q);
        }
        let mut ar = vec![0.0; n];
        apply(&ritz, &mut ar);
        let resid: f64 = ar.iter().zip(&ritz).map(|(a, r)| (a - lam * r).powi(2)).sum::<f64>().sqrt();
        let converged = (best - lam).abs() <= tol * lam || resid <= tol * lam;
        best = lam;
        if converged || k < m {
            break;
        }
        v = ritz;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_matches_dense_on_path_laplacian() {
        let n = 30;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.5
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let dense = dense_solve(a.clone(), &b).unwrap();
        let apply = |x: &[f64], out: &mut [f64]| {
            let y = &a * DVector::from_column_slice(x);
            out.copy_from_slice(y.as_slice());
        };
        let out = cg(apply, &[2.5; 30], &b, 1e-13, 1000);
        for (x, y) in out.x.iter().zip(dense.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn lanczos_cycle_gap() {
        // cycle Laplacian: gap 2 - 2cos(2π/n)
        let n = 200;
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                out[i] = 2.0 * x[i] - x[(i + 1) % n] - x[(i + n - 1) % n];
            }
        };
        let null = vec![1.0 / (n as f64).sqrt(); n];
        let lam = smallest_nonzero_eigenvalue(apply, &null, 1e-10);
        let want = 2.0 - 2.0 * (2.0 * std::f64::consts::PI / n as f64).cos();
        assert!((lam - want).abs() < 1e-8 * want, "{lam} vs {want}");
    }
}
