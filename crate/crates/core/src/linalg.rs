//! Dense solvers for the small symmetric systems that show up in IRLS
//! (at most a few dozen unknowns), plus a Cholesky factorisation.

/// Solve A x = b for symmetric A (row-major, n*n). Tries Cholesky first;
/// if a pivot is not positive (A not positive definite, e.g. a washed-out
/// weight matrix), falls back to Gaussian elimination with partial pivoting.
/// Returns None when A is numerically singular.
pub fn solve_sym(a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    assert_eq!(a.len(), n * n, "matrix/vector size mismatch");
    if let Some(chol) = cholesky(a, n) {
        return Some(cholesky_solve(&chol, b));
    }
    solve_partial_pivot(a.to_vec(), b.to_vec())
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix,
/// or None if a pivot is ≤ 0 or non-finite.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solve L Lᵀ x = b given the lower factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= l[i * n + k] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= l[k * n + i] * y[k];
        }
        y[i] /= l[i * n + i];
    }
    y
}

fn solve_partial_pivot(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for r in col + 1..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if !(best > 1e-300) || !best.is_finite() {
            return None;
        }
        if piv != col {
            for j in 0..n {
                a.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] -= f * a[col * n + j];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[i * n + j] * x[j];
        }
        x[i] = s / a[i * n + i];
        if !x[i].is_finite() {
            return None;
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        // A = [[4,1],[1,3]], b = [1,2] -> x = [1/11, 7/11]
        let a = [4.0, 1.0, 1.0, 3.0];
        let b = [1.0, 2.0];
        let x = solve_sym(&a, &b).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-12);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn residual_small_on_random_spd() {
        // Build A = M Mᵀ + I for a fixed M, check ‖Ax - b‖ after solving.
        let n = 8;
        let mut m = vec![0.0; n * n];
        let mut s = 1u64;
        for v in m.iter_mut() {
            // simple LCG is plenty for a deterministic test fixture
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5;
        }
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut t = if i == j { 1.0 } else { 0.0 };
                for k in 0..n {
                    t += m[i * n + k] * m[j * n + k];
                }
                a[i * n + j] = t;
            }
        }
        let b: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let x = solve_sym(&a, &b).unwrap();
        for i in 0..n {
            let mut r = -b[i];
            for j in 0..n {
                r += a[i * n + j] * x[j];
            }
            assert!(r.abs() < 1e-10, "residual {r} at row {i}");
        }
    }

    #[test]
    fn indefinite_falls_back_to_pivoting() {
        // Symmetric but indefinite; Cholesky must fail, pivoting must not.
        let a = [0.0, 2.0, 2.0, 0.0];
        let b = [2.0, 4.0];
        let x = solve_sym(&a, &b).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_returns_none() {
        let a = [1.0, 2.0, 2.0, 4.0];
        let b = [1.0, 2.0];
        assert!(solve_sym(&a, &b).is_none());
    }
}
