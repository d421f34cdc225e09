//! Recursive multilevel Cannon multiplication.

use crate::dense::Mat;
use crate::error::{Error, Result};
use crate::flops::gemm_flops;
use crate::platform::Platform;
use crate::vm::Ledger;

fn square_side(platform: &Platform, level: usize) -> Result<usize> {
    let spec = platform.level(level);
    if spec.p_rows != spec.p_cols {
        return Err(Error::NonSquareGrid {
            level,
            p_rows: spec.p_rows,
            p_cols: spec.p_cols,
        });
    }
    Ok(spec.p_rows)
}

/// `C + A B` computed block-wise by Cannon's algorithm on the grids of levels
/// `k, k-1, .., 1`, charging the communication to `ledger`.
pub fn ml_cannon(c: &Mat, a: &Mat, b: &Mat, platform: &Platform, k: usize, ledger: &mut Ledger) -> Result<Mat> {
    let n = a.rows();
    if a.shape() != (n, n) || b.shape() != (n, n) || c.shape() != (n, n) {
        return Err(Error::ShapeError(format!(
            "cannon needs equal square operands, got A {:?}, B {:?}, C {:?}",
            a.shape(),
            b.shape(),
            c.shape()
        )));
    }
    if k > platform.depth() {
        return Err(Error::LevelOutOfRange {
            level: k,
            depth: platform.depth(),
        });
    }
    let mut span = 1;
    for level in 1..=k {
        span *= square_side(platform, level)?;
    }
    if n % span != 0 {
        return Err(Error::ShapeError(format!(
            "order {n} is not divisible by the grid side product {span}"
        )));
    }
    let mut out = c.clone();
    multiply(&mut out, a, b, platform, k);
    charge_gemm(ledger, n as f64, n as f64, n as f64, k)?;
    Ok(out)
}

fn multiply(c: &mut Mat, a: &Mat, b: &Mat, platform: &Platform, k: usize) {
    if k == 0 {
        *c = c.add(&a.matmul(b));
        return;
    }
    let q = platform.level(k).p_rows;
    let nb = a.rows() / q;
    for i in 0..q {
        for j in 0..q {
            let mut cij = c.block(i * nb, j * nb, nb, nb);
            for h in 0..q {
                let s = (i + j + h) % q;
                let aik = a.block(i * nb, s * nb, nb, nb);
                let bkj = b.block(s * nb, j * nb, nb, nb);
                multiply(&mut cij, &aik, &bkj, platform, k - 1);
            }
            c.set_block(i * nb, j * nb, &cij);
        }
    }
}

/// Charges an `m x kk` by `kk x n` product distributed over the grid of
/// `level` and everything below it. Square grids use Cannon's schedule,
/// other grids a broadcast-based product (A along grid rows, B along grid
/// columns, then local products).
pub fn charge_gemm(ledger: &mut Ledger, m: f64, kk: f64, n: f64, level: usize) -> Result<()> {
    if m <= 0.0 || kk <= 0.0 || n <= 0.0 {
        return Ok(());
    }
    if level == 0 {
        ledger.record_flops(gemm_flops(m, kk, n));
        return Ok(());
    }
    let spec = ledger.platform().level(level).clone();
    let (pr, pc) = (spec.p_rows, spec.p_cols);
    if pr == pc {
        let q = pr as f64;
        let (mb, kb, nb) = (m / q, kk / q, n / q);
        if pr > 1 {
            ledger.record_p2p_tagged("cannon_skew", mb * kb, level)?;
            ledger.record_p2p_tagged("cannon_skew", kb * nb, level)?;
        }
        for _ in 0..pr {
            ledger.parallel(pr * pc, |l| charge_gemm(l, mb, kb, nb, level - 1))?;
            if pr > 1 {
                ledger.record_p2p_tagged("cannon_shift", mb * kb, level)?;
                ledger.record_p2p_tagged("cannon_shift", kb * nb, level)?;
            }
        }
        Ok(())
    } else {
        let (mb, nb) = (m / pr as f64, n / pc as f64);
        ledger.record_bcast_tagged("summa_a", mb * kk, level, pc)?;
        ledger.record_bcast_tagged("summa_b", kk * nb, level, pr)?;
        ledger.parallel(pr * pc, |l| charge_gemm(l, mb, kk, nb, level - 1))
    }
}
