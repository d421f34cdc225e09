//! Leading-order flop counts for the dense kernels, shared by the simulated
//! runs and the analytical models.

/// Householder QR of an `h x b` block (`h >= b`).
pub fn qr_flops(h: usize, b: usize) -> f64 {
    let (h, b) = (h as f64, b as f64);
    (2.0 * h * b * b - 2.0 * b * b * b / 3.0).max(0.0)
}

/// QR of two stacked `b x b` triangles.
pub fn tri_stack_qr_flops(b: usize) -> f64 {
    let b = b as f64;
    2.0 * b * b * b / 3.0
}

/// Applying `b` reflectors of length `h` to `w` columns.
pub fn apply_flops(h: usize, b: usize, w: f64) -> f64 {
    let (h, b) = (h as f64, b as f64);
    ((4.0 * h * b - 2.0 * b * b) * w).max(0.0)
}

/// Applying the reflectors of a stacked-triangle factorization to `w`
/// columns of two `b`-row blocks.
pub fn stacked_apply_flops(b: usize, w: f64) -> f64 {
    let b = b as f64;
    2.0 * b * b * w
}

/// LU with partial pivoting of an `h x b` panel.
pub fn gepp_flops(h: usize, b: usize) -> f64 {
    let (h, b) = (h as f64, b as f64);
    (h * b * b - b * b * b / 3.0).max(0.0)
}

/// Triangular solve with a `b x b` triangle and `w` right-hand sides.
pub fn trsm_flops(b: usize, w: f64) -> f64 {
    let b = b as f64;
    b * b * w
}

pub fn gemm_flops(m: f64, k: f64, n: f64) -> f64 {
    2.0 * m * k * n
}
