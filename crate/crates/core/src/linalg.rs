//! Compressed sparse rows and restarted GMRES with right preconditioning.

#[derive(Debug, Clone, Default)]
pub(crate) struct CsrMatrix {
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    diag: Vec<f64>,
}

impl CsrMatrix {
    pub fn with_capacity(rows: usize, nonzeros: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows + 1);
        row_ptr.push(0);
        Self {
            row_ptr,
            cols: Vec::with_capacity(nonzeros),
            vals: Vec::with_capacity(nonzeros),
            diag: Vec::with_capacity(rows),
        }
    }

    /// Append the next row. Entries may repeat a column; they are summed.
    pub fn push_row(&mut self, entries: &[(usize, f64)]) {
        let row = self.diag.len();
        let start = self.cols.len();
        let mut d = 0.0;
        for &(c, v) in entries {
            if c == row {
                d += v;
            }
            if let Some(k) = self.cols[start..].iter().position(|&x| x == c) {
                self.vals[start + k] += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
            }
        }
        self.diag.push(d);
        self.row_ptr.push(self.cols.len());
    }

    pub fn rows(&self) -> usize {
        self.diag.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// One Gauss-Seidel pass from zero, visiting rows in `order`.
    /// For a matrix that is lower triangular in that order this is an exact solve.
    pub fn gauss_seidel_from_zero(&self, order: &[usize], z: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for &r in order {
            let off: f64 = self.row(r).filter(|&(c, _)| c != r).map(|(c, v)| v * y[c]).sum();
            y[r] = (z[r] - off) / self.diag[r];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct GmresOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solve `A x = b` starting from the contents of `x`. Convergence is judged on
/// the true residual `|b - A x| / |b|` at every restart.
pub(crate) fn gmres(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    precond: impl Fn(&[f64], &mut [f64]),
    restart: usize,
    tol: f64,
    max_iter: usize,
) -> GmresOutcome {
    let n = a.rows();
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    let m = restart.max(1);

    loop {
        a.matvec(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= tol || total >= max_iter || !rel.is_finite() {
            return GmresOutcome {
                iterations: total,
                relative_residual: rel,
                converged: rel <= tol,
            };
        }

        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        basis.push(r.iter().map(|v| v / beta).collect());
        let mut h = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k = 0;

        for j in 0..m {
            precond(&basis[j], &mut z);
            a.matvec(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let hnext = norm(&w);
            h[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let rho = h[j][j].hypot(h[j + 1][j]);
            if rho == 0.0 {
                k = j;
                break;
            }
            cs[j] = h[j][j] / rho;
            sn[j] = h[j + 1][j] / rho;
            h[j][j] = rho;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            total += 1;
            k = j + 1;
            if g[j + 1].abs() / bnorm <= 0.5 * tol || hnext == 0.0 || total >= max_iter {
                break;
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }

        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|l| h[i][l] * y[l]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut u = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (uk, vk) in u.iter_mut().zip(v) {
                *uk += yi * vk;
            }
        }
        precond(&u, &mut z);
        for (xk, zk) in x.iter_mut().zip(&z) {
            *xk += zk;
        }
        if k == 0 {
            // stagnation: nothing more to gain from another cycle
            a.matvec(x, &mut r);
            let rel = r.iter().zip(b).map(|(ri, bi)| (bi - ri) * (bi - ri)).sum::<f64>().sqrt() / bnorm;
            return GmresOutcome {
                iterations: total,
                relative_residual: rel,
                converged: rel <= tol,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_dominant(n: usize, seed: u64) -> (CsrMatrix, DMatrix<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = DMatrix::zeros(n, n);
        let mut csr = CsrMatrix::with_capacity(n, 5 * n);
        for r in 0..n {
            let mut entries = Vec::new();
            let mut off = 0.0;
            for _ in 0..3 {
                let c = rng.random_range(0..n);
                if c != r {
                    let v = -rng.random_range(0.0..1.0);
                    off += f64::abs(v);
                    entries.push((c, v));
                }
            }
            entries.push((r, off + rng.random_range(0.0..0.2)));
            for &(c, v) in &entries {
                dense[(r, c)] += v;
            }
            csr.push_row(&entries);
        }
        (csr, dense)
    }

    #[test]
    fn matches_dense_solve() {
        let n = 60;
        let (a, dense) = random_dominant(n, 3);
        let b: Vec<f64> = (0..n).map(|k| (k as f64 * 0.37).sin() + 1.0).collect();
        let exact = dense.clone().lu().solve(&DVector::from_column_slice(&b)).unwrap();
        let mut x = vec![0.0; n];
        let out = gmres(&a, &b, &mut x, |v, z| z.copy_from_slice(v), 10, 1e-12, 2000);
        assert!(out.converged, "{out:?}");
        for k in 0..n {
            assert!((x[k] - exact[k]).abs() <= 1e-8 * exact.amax().max(1.0));
        }
    }

    #[test]
    fn triangular_preconditioner_is_exact_solve() {
        let mut a = CsrMatrix::with_capacity(4, 8);
        a.push_row(&[(0, 2.0)]);
        a.push_row(&[(1, 3.0), (0, -1.0)]);
        a.push_row(&[(2, 1.0), (1, -0.5), (0, -0.25)]);
        a.push_row(&[(3, 4.0), (2, -2.0)]);
        let b = [2.0, 2.0, 1.0, 2.0];
        let mut y = [0.0; 4];
        a.gauss_seidel_from_zero(&[0, 1, 2, 3], &b, &mut y);
        let mut ay = [0.0; 4];
        a.matvec(&y, &mut ay);
        for k in 0..4 {
            assert!((ay[k] - b[k]).abs() < 1e-15);
        }
        let mut x = [0.0; 4];
        let order = [0, 1, 2, 3];
        let out = gmres(&a, &b, &mut x, |v, z| a.gauss_seidel_from_zero(&order, v, z), 5, 1e-13, 10);
        assert!(out.converged && out.iterations <= 1);
    }

    #[test]
    fn repeated_columns_are_summed() {
        let mut a = CsrMatrix::with_capacity(1, 2);
        a.push_row(&[(0, 1.0), (0, 2.5)]);
        let mut y = [0.0];
        a.matvec(&[2.0], &mut y);
        assert_eq!(y[0], 7.0);
    }
}
