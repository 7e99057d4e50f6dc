//! Dense symmetric positive definite factorization and solve.

use ndarray::Array2;

use crate::error::{Error, Result};

/// Cholesky factorization A = L L^T. Fails with the 1-based order of the
/// first non-positive pivot when A is not positive definite.
pub(crate) fn cholesky(a: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    let mut l = a.as_standard_layout().to_owned();
    // zero the strict upper triangle; only the lower part is computed
    for i in 0..n {
        for j in (i + 1)..n {
            l[[i, j]] = 0.0;
        }
    }
    let data = l.as_slice_mut().expect("standard layout");
    for j in 0..n {
        // pivot
        let mut diag = data[j * n + j];
        {
            let row_j = &data[j * n..j * n + j];
            diag -= row_j.iter().map(|v| v * v).sum::<f64>();
        }
        if !diag.is_finite() || diag <= 0.0 {
            return Err(Error::SingularSystem { order: j + 1 });
        }
        let diag = diag.sqrt();
        data[j * n + j] = diag;
        // column below the pivot
        for i in (j + 1)..n {
            let (head, tail) = data.split_at_mut(i * n);
            let row_j = &head[j * n..j * n + j];
            let row_i = &mut tail[..j + 1];
            let mut sum = row_i[j];
            for (a, b) in row_i[..j].iter().zip(row_j) {
                sum -= a * b;
            }
            row_i[j] = sum / diag;
        }
    }
    Ok(l)
}

/// Solves A X = B for all columns of B given the lower factor L of A.
///
/// Right-hand-side rows are updated with fused slice loops; both
/// substitutions are O(n^2) axpy operations over the RHS width.
pub(crate) fn cholesky_solve(l: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = l.nrows();
    let m = b.ncols();
    let mut x = b.as_standard_layout().to_owned();
    let data = x.as_slice_mut().expect("standard layout");

    // Forward substitution: L Y = B.
    for i in 0..n {
        for k in 0..i {
            let lik = l[[i, k]];
            if lik != 0.0 {
                let (head, tail) = data.split_at_mut(i * m);
                let row_k = &head[k * m..(k + 1) * m];
                let row_i = &mut tail[..m];
                for (xi, xk) in row_i.iter_mut().zip(row_k) {
                    *xi -= lik * xk;
                }
            }
        }
        let inv = 1.0 / l[[i, i]];
        for v in &mut data[i * m..(i + 1) * m] {
            *v *= inv;
        }
    }

    // Back substitution: L^T X = Y.
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[[k, i]];
            if lki != 0.0 {
                let (head, tail) = data.split_at_mut(k * m);
                let row_i = &mut head[i * m..(i + 1) * m];
                let row_k = &tail[..m];
                for (xi, xk) in row_i.iter_mut().zip(row_k) {
                    *xi -= lki * xk;
                }
            }
        }
        let inv = 1.0 / l[[i, i]];
        for v in &mut data[i * m..(i + 1) * m] {
            *v *= inv;
        }
    }
    x
}

/// Solves the symmetric positive definite system A X = B.
pub(crate) fn solve_spd(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let l = cholesky(a)?;
    Ok(cholesky_solve(&l, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};

    fn random_spd(n: usize, seed: u64) -> Array2<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut r = Array2::zeros((n, n));
        r.mapv_inplace(|_: f64| rng.gen_range(-1.0..1.0));
        r.t().dot(&r) + Array2::<f64>::eye(n)
    }

    #[test]
    fn solves_small_system() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![[2.0], [1.0]];
        let x = solve_spd(&a, &b).unwrap();
        let residual = a.dot(&x) - &b;
        assert!(residual.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn residual_small_on_random_spd() {
        for seed in 0..5 {
            let a = random_spd(12, seed);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 100);
            let mut b = Array2::zeros((12, 7));
            b.mapv_inplace(|_: f64| rng.gen_range(-3.0..3.0));
            let x = solve_spd(&a, &b).unwrap();
            let residual = a.dot(&x) - &b;
            let norm: f64 = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(norm < 1e-10, "seed {seed}: residual {norm}");
        }
    }

    #[test]
    fn reports_first_bad_pivot() {
        // Rank-1 matrix: second pivot fails.
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        match cholesky(&a) {
            Err(Error::SingularSystem { order }) => assert_eq!(order, 2),
            other => panic!("expected singular error, got {other:?}"),
        }
    }
}
