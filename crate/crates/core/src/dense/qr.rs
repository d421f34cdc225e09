use super::Mat;
use crate::error::{Error, Result};

/// Compact WY form `Q = I - Y T Y^T` of a product of Householder
/// reflectors, `Y` unit lower trapezoidal, `T` upper triangular.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactWY {
    pub y: Mat,
    pub t: Mat,
}

impl CompactWY {
    pub fn rows(&self) -> usize {
        self.y.rows()
    }

    pub fn reflectors(&self) -> usize {
        self.y.cols()
    }

    fn apply(&self, c: &Mat, transpose: bool) -> Result<Mat> {
        if c.rows() != self.y.rows() {
            return Err(Error::DimensionMismatch(format!(
                "reflector block has {} rows, operand has {}",
                self.y.rows(),
                c.rows()
            )));
        }
        let k = self.reflectors();
        let w = c.cols();
        // Z = Y^T C
        let mut z = Mat::zeros(k, w);
        for i in 0..self.y.rows() {
            let ci = c.row(i);
            for p in 0..k {
                let y = self.y[(i, p)];
                if y == 0.0 {
                    continue;
                }
                for (zv, cv) in z.row_mut(p).iter_mut().zip(ci) {
                    *zv += y * cv;
                }
            }
        }
        let tz = if transpose {
            self.t.transpose().matmul(&z)
        } else {
            self.t.matmul(&z)
        };
        let mut out = c.clone();
        for i in 0..self.y.rows() {
            for p in 0..k {
                let y = self.y[(i, p)];
                if y == 0.0 {
                    continue;
                }
                for (o, t) in out.row_mut(i).iter_mut().zip(tz.row(p)) {
                    *o -= y * t;
                }
            }
        }
        Ok(out)
    }

    /// `Q^T C`
    pub fn apply_qt(&self, c: &Mat) -> Result<Mat> {
        self.apply(c, true)
    }

    /// `Q C`
    pub fn apply_q(&self, c: &Mat) -> Result<Mat> {
        self.apply(c, false)
    }

    /// Explicit `h x h` orthogonal factor.
    pub fn to_q(&self) -> Mat {
        self.apply_q(&Mat::identity(self.rows())).expect("square identity")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QrFactors {
    pub wy: CompactWY,
    /// `min(h, n) x n` upper triangular with nonnegative diagonal.
    pub r: Mat,
}

/// Reflector sending `x` to `beta e1` with `beta = ||x|| >= 0`.
/// Returns `(v, tau, beta)` with `v[0] = 1`.
fn reflector(x: &[f64]) -> (Vec<f64>, f64, f64) {
    let x1 = x[0];
    let sigma: f64 = x[1..].iter().map(|v| v * v).sum();
    let mut v = x.to_vec();
    v[0] = 1.0;
    if sigma == 0.0 {
        return if x1 >= 0.0 {
            (v, 0.0, x1)
        } else {
            (v, 2.0, -x1)
        };
    }
    let norm = (x1 * x1 + sigma).sqrt();
    let v1 = if x1 <= 0.0 { x1 - norm } else { -sigma / (x1 + norm) };
    let tau = 2.0 * v1 * v1 / (sigma + v1 * v1);
    for e in &mut v[1..] {
        *e /= v1;
    }
    (v, tau, norm)
}

/// Householder QR of an `h x n` matrix.
pub fn householder_qr(a: &Mat) -> QrFactors {
    let (h, n) = a.shape();
    let k = h.min(n);
    let mut w = a.clone();
    let mut y = Mat::zeros(h, k);
    let mut taus = Vec::with_capacity(k);
    for c in 0..k {
        let x: Vec<f64> = (c..h).map(|i| w[(i, c)]).collect();
        let (v, tau, beta) = reflector(&x);
        if tau != 0.0 {
            for j in c + 1..n {
                let dot: f64 = (c..h).map(|i| v[i - c] * w[(i, j)]).sum();
                let s = tau * dot;
                for i in c..h {
                    w[(i, j)] -= s * v[i - c];
                }
            }
        }
        w[(c, c)] = beta;
        for i in c + 1..h {
            w[(i, c)] = 0.0;
        }
        for i in c..h {
            y[(i, c)] = v[i - c];
        }
        taus.push(tau);
    }
    // T(0..i, i) = -tau_i T(0..i, 0..i) Y(:, 0..i)^T v_i
    let mut t = Mat::zeros(k, k);
    for i in 0..k {
        t[(i, i)] = taus[i];
        let yv: Vec<f64> = (0..i)
            .map(|p| (i..h).map(|r| y[(r, p)] * y[(r, i)]).sum())
            .collect();
        for p in 0..i {
            let s: f64 = (p..i).map(|q| t[(p, q)] * yv[q]).sum();
            t[(p, i)] = -taus[i] * s;
        }
    }
    QrFactors {
        wy: CompactWY { y, t },
        r: w.block(0, 0, k, n),
    }
}
