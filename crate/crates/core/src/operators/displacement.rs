//! Matrix elements of the displacement operator D(λ) = exp(λa† − λa) for
//! real λ.
//!
//! Elements are generated along diagonals n − m = k with the three-term
//! recurrence of the associated Laguerre polynomials, normalised so that
//! factorials never appear:
//!
//! ```text
//! f_{j+1} = [(2j + 1 + k − λ²) f_j − √(j(j+k)) f_{j−1}] / √((j+1)(j+k+1)),
//! f_j = ⟨j+k|D(λ)|j⟩,   f_0 = e^{−λ²/2} λ^k / √k!
//! ```
//!
//! Along a diagonal the sequence grows through the classically forbidden
//! region and then oscillates, so forward iteration is stable. A running log
//! scale keeps the start value representable when e^{−λ²/2} underflows.
//! The upper triangle follows from ⟨n|D(λ)|m⟩ = (−1)^{m−n} ⟨m|D(λ)|n⟩.

const RESCALE_ABOVE: f64 = 1e150;

/// ⟨n|D(λ)|m⟩ for D(λ) = exp(λa† − λa).
pub fn displacement_matrix_element(n: usize, m: usize, lambda: f64) -> f64 {
    let (hi, lo) = if n >= m { (n, m) } else { (m, n) };
    let k = hi - lo;
    let mut value = 0.0;
    walk_diagonal(k, lambda, lo + 1, |j, v| {
        if j == lo {
            value = v;
        }
    });
    if n < m && k % 2 == 1 {
        -value
    } else {
        value
    }
}

/// Dense table of ⟨n|D(λ)|m⟩ for n < rows, m < cols.
#[derive(Debug, Clone)]
pub struct DisplacementTable {
    lambda: f64,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DisplacementTable {
    pub fn new(lambda: f64, rows: usize, cols: usize) -> Self {
        let mut data = vec![0.0; rows * cols];
        // Lower triangle and diagonal: n = m + k.
        for k in 0..rows {
            let len = cols.min(rows - k);
            walk_diagonal(k, lambda, len, |j, v| data[(j + k) * cols + j] = v);
        }
        // Upper triangle: m = n + k, with the parity sign.
        for k in 1..cols {
            let len = rows.min(cols - k);
            let sign = if k % 2 == 1 { -1.0 } else { 1.0 };
            walk_diagonal(k, lambda, len, |j, v| data[j * cols + j + k] = sign * v);
        }
        Self {
            lambda,
            rows,
            cols,
            data,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.data[n * self.cols + m]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }
}

/// Calls `emit(j, ⟨j+k|D(λ)|j⟩)` for j in 0..len.
fn walk_diagonal(k: usize, lambda: f64, len: usize, mut emit: impl FnMut(usize, f64)) {
    if len == 0 {
        return;
    }
    if lambda == 0.0 {
        let v = if k == 0 { 1.0 } else { 0.0 };
        for j in 0..len {
            emit(j, v);
        }
        return;
    }
    let x = lambda * lambda;
    let kf = k as f64;
    let sign = if lambda < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };

    // log f_0 = −x/2 + k ln|λ| − ½ ln k!
    let half_log_fact: f64 = (2..=k).map(|i| (i as f64).ln()).sum::<f64>() * 0.5;
    let log_f0 = -0.5 * x + kf * lambda.abs().ln() - half_log_fact;

    // Values are f * exp(log_scale).
    let mut log_scale = log_f0;
    let mut prev: f64 = 0.0;
    let mut cur: f64 = 1.0;
    for j in 0..len {
        let v = if cur == 0.0 {
            0.0
        } else {
            let l = cur.abs().ln() + log_scale;
            if l < -745.0 {
                0.0
            } else {
                cur.signum() * l.exp()
            }
        };
        emit(j, sign * v);
        if j + 1 == len {
            break;
        }
        let jf = j as f64;
        let next =
            ((2.0 * jf + 1.0 + kf - x) * cur - (jf * (jf + kf)).sqrt() * prev) / ((jf + 1.0) * (jf + kf + 1.0)).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            prev /= RESCALE_ABOVE;
            cur /= RESCALE_ABOVE;
            log_scale += RESCALE_ABOVE.ln();
        }
    }
}
