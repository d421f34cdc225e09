use super::{Mat, Perm};
use crate::error::{Error, Result};

/// `P A = L U` with `L` unit lower `m x k` and `U` upper `k x n`,
/// `k = min(m, n)`.
#[derive(Debug, Clone)]
pub struct GeppResult {
    pub perm: Perm,
    pub l: Mat,
    pub u: Mat,
    /// max |A^(k)| after each elimination step.
    pub growth_trace: Vec<f64>,
}

/// Index of the largest |a(i, col)| for `i` in `from..rows`; ties go to the
/// smallest index.
fn pivot_row(a: &Mat, col: usize, from: usize) -> usize {
    let mut best = from;
    let mut best_val = a[(from, col)].abs();
    for i in from + 1..a.rows() {
        let v = a[(i, col)].abs();
        if v > best_val {
            best = i;
            best_val = v;
        }
    }
    best
}

fn eliminate(w: &mut Mat, k: usize) {
    let (m, n) = w.shape();
    let d = w[(k, k)];
    for i in k + 1..m {
        let f = w[(i, k)] / d;
        w[(i, k)] = f;
        if f == 0.0 {
            continue;
        }
        for j in k + 1..n {
            let v = w[(k, j)];
            w[(i, j)] -= f * v;
        }
    }
}

fn trailing_max(w: &Mat, k: usize) -> f64 {
    let mut mx = 0.0f64;
    for i in k + 1..w.rows() {
        for j in k + 1..w.cols() {
            mx = mx.max(w[(i, j)].abs());
        }
    }
    mx
}

/// Gaussian elimination with partial pivoting.
pub fn gepp(a: &Mat) -> Result<GeppResult> {
    let (m, n) = a.shape();
    let k = m.min(n);
    let mut w = a.clone();
    let mut perm = Perm::identity(m);
    let mut growth_trace = Vec::with_capacity(k);
    for c in 0..k {
        let p = pivot_row(&w, c, c);
        if w[(p, c)] == 0.0 {
            return Err(Error::SingularPivot { step: c });
        }
        w.swap_rows(c, p);
        perm.swap(c, p);
        eliminate(&mut w, c);
        growth_trace.push(trailing_max(&w, c));
    }
    let l = Mat::from_fn(m, k, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => w[(i, j)],
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Less => 0.0,
    });
    let u = Mat::from_fn(k, n, |i, j| if j >= i { w[(i, j)] } else { 0.0 });
    Ok(GeppResult {
        perm,
        l,
        u,
        growth_trace,
    })
}

/// Row selection by partial pivoting that never fails: a zero column keeps
/// the current row and skips the elimination step. The first `min(m, n)`
/// entries of the returned permutation are the selected rows.
pub fn gepp_select(a: &Mat) -> Perm {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut perm = Perm::identity(m);
    for c in 0..m.min(n) {
        let p = pivot_row(&w, c, c);
        if w[(p, c)] == 0.0 {
            continue;
        }
        w.swap_rows(c, p);
        perm.swap(c, p);
        eliminate(&mut w, c);
    }
    perm
}
