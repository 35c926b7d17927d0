//! Lanczos approximation of exp(−iτH)v for real symmetric H.
//!
//! The projected tridiagonal matrix is diagonalised with implicit QL. While
//! the subspace grows only the first and last rows of the eigenvector matrix
//! are tracked, which is all the a-posteriori error estimate
//! β_m·|[exp(−iτT_m)e₁]_m| needs.

use num_complex::Complex64;

/// Reusable Lanczos workspace.
#[derive(Debug, Clone)]
pub struct Krylov {
    basis: Vec<Vec<Complex64>>,
    w: Vec<Complex64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    max_dim: usize,
}

/// Outcome of one exponential.
#[derive(Debug, Clone, Copy)]
pub struct KrylovStats {
    pub dim: usize,
    pub error: f64,
}

impl Krylov {
    pub fn new(n: usize, max_dim: usize) -> Self {
        Self {
            basis: (0..=max_dim).map(|_| vec![Complex64::default(); n]).collect(),
            w: vec![Complex64::default(); n],
            alpha: Vec::with_capacity(max_dim),
            beta: Vec::with_capacity(max_dim + 1),
            max_dim,
        }
    }

    /// v ← exp(−iτH)v, where `matvec(x, y)` sets y = Hx for a real symmetric
    /// H. Returns `None` if `max_dim` vectors do not reach an estimated error
    /// below `tol` (v is then left untouched).
    pub fn apply_exp(
        &mut self,
        mut matvec: impl FnMut(&[Complex64], &mut [Complex64]),
        tau: f64,
        v: &mut [Complex64],
        tol: f64,
    ) -> Option<KrylovStats> {
        let beta0 = norm(v);
        if beta0 == 0.0 {
            return Some(KrylovStats { dim: 0, error: 0.0 });
        }
        self.alpha.clear();
        self.beta.clear();
        for (q, x) in self.basis[0].iter_mut().zip(v.iter()) {
            *q = x / beta0;
        }
        let mut converged = None;
        for j in 0..self.max_dim {
            matvec(&self.basis[j], &mut self.w);
            let a: f64 = dot_re(&self.basis[j], &self.w);
            axpy(-a, &self.basis[j], &mut self.w);
            if j > 0 {
                let b = self.beta[j - 1];
                axpy(-b, &self.basis[j - 1], &mut self.w);
            }
            self.alpha.push(a);
            let b = norm(&self.w);
            let m = j + 1;
            let scale = self.alpha.iter().map(|x| x.abs()).fold(0.0, f64::max) + 1.0;
            if b <= 1e-14 * scale {
                // Invariant subspace: the projection is exact.
                converged = Some(KrylovStats { dim: m, error: 0.0 });
                break;
            }
            self.beta.push(b);
            if m >= 3 || m == self.max_dim {
                let err = beta0 * b * last_component(&self.alpha, &self.beta[..m - 1], tau);
                if err < tol {
                    converged = Some(KrylovStats { dim: m, error: err });
                    break;
                }
            }
            if m < self.max_dim {
                for (q, x) in self.basis[m].iter_mut().zip(self.w.iter()) {
                    *q = x / b;
                }
            }
        }
        let stats = converged?;
        let m = stats.dim;
        let y = exp_first_column(&self.alpha[..m], &self.beta[..m - 1], tau);
        for x in v.iter_mut() {
            *x = Complex64::default();
        }
        for (k, yk) in y.iter().enumerate() {
            let c = yk * beta0;
            for (x, q) in v.iter_mut().zip(&self.basis[k]) {
                *x += c * q;
            }
        }
        Some(stats)
    }
}

#[inline]
fn norm(x: &[Complex64]) -> f64 {
    x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

#[inline]
fn dot_re(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

#[inline]
fn axpy(a: f64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

/// |[exp(−iτT)e₁]_{m−1}| for the m×m tridiagonal T.
fn last_component(alpha: &[f64], beta: &[f64], tau: f64) -> f64 {
    let m = alpha.len();
    let mut d = alpha.to_vec();
    let mut e = beta.to_vec();
    e.push(0.0);
    let mut rows = vec![unit(m, 0), unit(m, m - 1)];
    if tridiagonal_ql(&mut d, &mut e, &mut rows).is_err() {
        return f64::INFINITY;
    }
    let mut acc = Complex64::default();
    for j in 0..m {
        acc += Complex64::from_polar(rows[0][j] * rows[1][j], -tau * d[j]);
    }
    acc.norm()
}

/// exp(−iτT)e₁ for the m×m tridiagonal T.
fn exp_first_column(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<Complex64> {
    let m = alpha.len();
    let mut d = alpha.to_vec();
    let mut e = beta.to_vec();
    e.push(0.0);
    let mut rows: Vec<Vec<f64>> = (0..m).map(|k| unit(m, k)).collect();
    tridiagonal_ql(&mut d, &mut e, &mut rows).expect("QL converges on a matrix it already diagonalised");
    let c: Vec<Complex64> = (0..m).map(|j| Complex64::from_polar(rows[0][j], -tau * d[j])).collect();
    rows.iter()
        .map(|row| row.iter().zip(&c).map(|(q, cj)| cj * *q).sum())
        .collect()
}

fn unit(m: usize, k: usize) -> Vec<f64> {
    let mut u = vec![0.0; m];
    u[k] = 1.0;
    u
}

/// Implicit QL with Wilkinson shifts on a symmetric tridiagonal matrix
/// (diagonal `d`, `e[i]` coupling i and i+1, `e[m−1]` unused). On return `d`
/// holds the eigenvalues and each tracked row of the identity has been
/// turned into the same row of the eigenvector matrix.
fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], rows: &mut [Vec<f64>]) -> Result<(), ()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(());
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                for z in rows.iter_mut() {
                    let f = z[i + 1];
                    z[i + 1] = s * z[i] + c * f;
                    z[i] = c * z[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}
