use serde::{Deserialize, Serialize};

use super::Mat;
use crate::error::{Error, Result};

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(msg()))
    }
}

/// Solves `L X = B` with `L` unit lower triangular (only the strictly lower
/// part of `l` is read).
pub fn trsm_lower_unit(l: &Mat, b: &Mat) -> Result<Mat> {
    check(l.rows() == l.cols() && l.rows() == b.rows(), || {
        format!("trsm_lower_unit: L {:?}, B {:?}", l.shape(), b.shape())
    })?;
    let mut x = b.clone();
    for i in 0..l.rows() {
        for k in 0..i {
            let f = l[(i, k)];
            if f == 0.0 {
                continue;
            }
            for j in 0..x.cols() {
                let v = x[(k, j)];
                x[(i, j)] -= f * v;
            }
        }
    }
    Ok(x)
}

/// Solves `U X = B` with `U` upper triangular.
pub fn trsm_upper(u: &Mat, b: &Mat) -> Result<Mat> {
    check(u.rows() == u.cols() && u.rows() == b.rows(), || {
        format!("trsm_upper: U {:?}, B {:?}", u.shape(), b.shape())
    })?;
    let n = u.rows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        for k in i + 1..n {
            let f = u[(i, k)];
            if f == 0.0 {
                continue;
            }
            for j in 0..x.cols() {
                let v = x[(k, j)];
                x[(i, j)] -= f * v;
            }
        }
        let d = u[(i, i)];
        for j in 0..x.cols() {
            x[(i, j)] /= d;
        }
    }
    Ok(x)
}

/// Solves `X U = B` with `U` upper triangular.
pub fn trsm_upper_right(u: &Mat, b: &Mat) -> Result<Mat> {
    check(u.rows() == u.cols() && u.rows() == b.cols(), || {
        format!("trsm_upper_right: U {:?}, B {:?}", u.shape(), b.shape())
    })?;
    let n = u.rows();
    let mut x = b.clone();
    for i in 0..x.rows() {
        for j in 0..n {
            let mut v = x[(i, j)];
            for k in 0..j {
                v -= x[(i, k)] * u[(k, j)];
            }
            x[(i, j)] = v / u[(j, j)];
        }
    }
    Ok(x)
}

/// `alpha A B + beta C`
pub fn gemm(a: &Mat, b: &Mat, c: &Mat, alpha: f64, beta: f64) -> Result<Mat> {
    check(a.cols() == b.rows() && c.rows() == a.rows() && c.cols() == b.cols(), || {
        format!("gemm: A {:?}, B {:?}, C {:?}", a.shape(), b.shape(), c.shape())
    })?;
    let ab = a.matmul(b);
    Ok(Mat::from_fn(c.rows(), c.cols(), |i, j| alpha * ab[(i, j)] + beta * c[(i, j)]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub one: f64,
    pub inf: f64,
    pub fro: f64,
    pub maxabs: f64,
}

pub fn norms(a: &Mat) -> Norms {
    let one = (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let inf = (0..a.rows())
        .map(|i| a.row(i).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Norms {
        one,
        inf,
        fro: a.frobenius(),
        maxabs: a.max_abs(),
    }
}
