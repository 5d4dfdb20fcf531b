//! Small sparse linear algebra kit: CSR matrices, tridiagonal elimination,
//! conjugate gradients and restarted GMRES.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, Default)]
pub(crate) struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Csr {
            n,
            row_ptr,
            cols: Vec::with_capacity(nnz),
            vals: Vec::with_capacity(nnz),
        }
    }

    pub fn push(&mut self, col: usize, val: f64) {
        self.cols.push(col);
        self.vals.push(val);
    }

    pub fn finish_row(&mut self) {
        self.row_ptr.push(self.cols.len());
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n) {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .filter(|&k| self.cols[k] == i)
                    .map(|k| self.vals[k])
                    .sum()
            })
            .collect()
    }

    pub fn add_diagonal(&mut self, shift: &[f64]) {
        for i in 0..self.n {
            if let Some(k) = (self.row_ptr[i]..self.row_ptr[i + 1]).find(|&k| self.cols[k] == i) {
                self.vals[k] += shift[i];
            }
        }
    }
}

/// Tridiagonal system `lower[i]·x[i-1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]`.
#[derive(Debug, Clone, Default)]
pub(crate) struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    #[cfg(test)]
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    pub fn add_diagonal(&mut self, shift: &[f64]) {
        self.diag.iter_mut().zip(shift).for_each(|(d, s)| *d += s);
    }

    /// Thomas algorithm (no pivoting).
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        for i in 0..n {
            if i > 0 {
                denom = self.diag[i] - self.lower[i] * c[i - 1];
            }
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::SolverStagnation {
                    iterations: i,
                    residual: f64::INFINITY,
                });
            }
            c[i] = if i + 1 < n { self.upper[i] / denom } else { 0.0 };
            d[i] = if i > 0 {
                (rhs[i] - self.lower[i] * d[i - 1]) / denom
            } else {
                rhs[i] / denom
            };
        }
        for i in (0..n.saturating_sub(1)).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        if d.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverStagnation {
                iterations: n,
                residual: f64::INFINITY,
            });
        }
        Ok(d)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradients for a symmetric positive definite operator.
pub(crate) fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= rel_tol * bnorm {
            return Ok(x);
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    // confirm with the true residual before giving up
    apply(&x, &mut ap);
    let res = norm(&rhs.iter().zip(&ap).map(|(b, a)| b - a).collect::<Vec<_>>()) / bnorm;
    if res <= rel_tol {
        Ok(x)
    } else {
        Err(Error::SolverStagnation {
            iterations: max_iter,
            residual: res,
        })
    }
}

/// Restarted GMRES(m) with right Jacobi preconditioning.
pub(crate) fn gmres(
    a: &Csr,
    rhs: &[f64],
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(x);
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let mut work = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut total = 0;
    let mut last_cycle = f64::INFINITY;
    loop {
        a.matvec(&x, &mut work);
        let r: Vec<f64> = rhs.iter().zip(&work).map(|(b, w)| b - w).collect();
        let beta = norm(&r);
        let rel = beta / bnorm;
        if rel <= rel_tol {
            return Ok(x);
        }
        if total >= max_iter || rel > 0.999 * last_cycle {
            return Err(Error::SolverStagnation {
                iterations: total,
                residual: rel,
            });
        }
        last_cycle = rel;

        let m = restart.min(n).max(1);
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut hess = vec![vec![0.0; m]; m + 1];
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            for i in 0..n {
                z[i] = v[k][i] * inv_diag[i];
            }
            a.matvec(&z, &mut work);
            let mut wv = work.clone();
            for j in 0..=k {
                let hjk = dot(&wv, &v[j]);
                hess[j][k] = hjk;
                for i in 0..n {
                    wv[i] -= hjk * v[j][i];
                }
            }
            let hn = norm(&wv);
            hess[k + 1][k] = hn;
            for j in 0..k {
                let t = cs[j] * hess[j][k] + sn[j] * hess[j + 1][k];
                hess[j + 1][k] = -sn[j] * hess[j][k] + cs[j] * hess[j + 1][k];
                hess[j][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                break;
            }
            cs[k] = hess[k][k] / denom;
            sn[k] = hess[k + 1][k] / denom;
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() <= rel_tol * bnorm * 0.5 || hn == 0.0 || total >= max_iter {
                break;
            }
            v.push(wv.iter().map(|w| w / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            for i in 0..n {
                x[i] += yj * v[j][i] * inv_diag[i];
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SolverStagnation {
                iterations: total,
                residual: f64::NAN,
            });
        }
    }
}
