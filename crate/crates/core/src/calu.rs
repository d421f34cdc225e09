//! Tournament-pivoting LU: one-level CALU and its 1D and 2D multilevel
//! recursions.
//!
//! Row interchanges always act on whole rows of the working matrix, so the
//! strictly lower part of the result holds `L` and the upper part `U`, with
//! `P A = L U` for the accumulated permutation.

use serde::{Deserialize, Serialize};

use crate::caqr::{merge_rounds, split_rows};
use crate::cannon::charge_gemm;
use crate::dense::{gepp_select, trsm_lower_unit, Mat, Perm};
use crate::error::{Error, Result};
use crate::flops::{gepp_flops, trsm_flops};
use crate::platform::Platform;
use crate::schedule::BlockSchedule;
use crate::vm::{Ledger, Team};

#[derive(Debug, Clone)]
pub struct LuResult {
    pub perm: Perm,
    /// `m x n` unit lower trapezoidal.
    pub l: Mat,
    /// `n x n` upper triangular.
    pub u: Mat,
    /// `|pivot| / max |column|` at every elimination step.
    pub tau_trace: Vec<f64>,
    /// Largest trailing-matrix entry after each outermost panel.
    pub growth_trace: Vec<f64>,
    pub ledger: Ledger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PivotQuality {
    pub steps: usize,
    pub tau_min: f64,
    pub fraction_tau_eq_one: f64,
    /// Counts over ten equal bins of `(0, 1]`, the last bin being
    /// `(0.9, 1]`.
    pub histogram: [usize; 10],
}

/// Summary of the pivot thresholds. An empty trace gives the vacuous report
/// `tau_min = 1`, `fraction_tau_eq_one = 1`.
pub fn pivot_quality(result: &LuResult) -> PivotQuality {
    let taus = &result.tau_trace;
    let mut histogram = [0usize; 10];
    for &t in taus {
        let bin = ((t * 10.0).ceil() as usize).clamp(1, 10) - 1;
        histogram[bin] += 1;
    }
    let ones = taus.iter().filter(|&&t| t == 1.0).count();
    PivotQuality {
        steps: taus.len(),
        tau_min: taus.iter().copied().fold(1.0, f64::min),
        fraction_tau_eq_one: if taus.is_empty() {
            1.0
        } else {
            ones as f64 / taus.len() as f64
        },
        histogram,
    }
}

/// How one level of a tournament maps onto the machine.
struct Grid {
    /// Level of the grid broadcasts along rows and columns.
    level: usize,
    /// Nodes holding the panel rows.
    row_team: Team,
    p_cols: usize,
    /// Level at which leaf and merge selections run; 0 is plain GEPP.
    select_level: usize,
    max_leaves: usize,
    /// Level-1 elements sharing the work of one leaf.
    flop_div: f64,
}

struct Run<'a> {
    w: Mat,
    perm: Perm,
    schedule: &'a BlockSchedule,
    platform: &'a Platform,
    /// Main run (records pivot thresholds and growth) or a selection copy.
    record: bool,
    tau: Vec<f64>,
    growth: Vec<f64>,
}

impl<'a> Run<'a> {
    fn new(w: Mat, schedule: &'a BlockSchedule, platform: &'a Platform, record: bool) -> Self {
        let m = w.rows();
        Run {
            w,
            perm: Perm::identity(m),
            schedule,
            platform,
            record,
            tau: Vec::new(),
            growth: Vec::new(),
        }
    }

    fn swap(&mut self, a: usize, b: usize) {
        self.w.swap_rows(a, b);
        self.perm.swap(a, b);
    }

    /// Picks `bw` rows among the positions `cands` using columns
    /// `pc0..pc0+bw`.
    fn select(&self, ledger: &mut Ledger, cands: &[usize], pc0: usize, bw: usize, level: usize) -> Result<Vec<usize>> {
        let copy = self.w.gather(cands, pc0, bw);
        let local: Vec<usize> = if level == 0 {
            ledger.record_flops(gepp_flops(cands.len(), bw));
            gepp_select(&copy).as_slice()[..bw].to_vec()
        } else {
            let mut sub = Run::new(copy, self.schedule, self.platform, false);
            sub.lu2d(ledger, 0, 0, bw, level, false)?;
            sub.perm.as_slice()[..bw].to_vec()
        };
        Ok(local.into_iter().map(|i| cands[i]).collect())
    }

    fn sample_growth(&mut self, r0: usize, c0: usize) {
        let mut mx = 0.0f64;
        for i in r0..self.w.rows() {
            for j in c0..self.w.cols() {
                mx = mx.max(self.w[(i, j)].abs());
            }
        }
        self.growth.push(mx);
    }

    /// Tournament, interchanges and elimination of the panel at
    /// `(r0p, pc0)` of width `bw`, then the update of columns up to `t_end`.
    fn panel_step(
        &mut self,
        ledger: &mut Ledger,
        r0p: usize,
        pc0: usize,
        bw: usize,
        t_end: usize,
        g: &Grid,
    ) -> Result<()> {
        let m = self.w.rows();
        let active: Vec<usize> = (r0p..m).collect();
        let h = active.len();
        let q = g.max_leaves.min(h / bw).max(1);
        let chunks = split_rows(&active, q);

        let mut cands = Vec::with_capacity(q);
        ledger.open_parallel(1);
        for chunk in &chunks {
            ledger.open_sequential();
            let c = self.select(ledger, chunk, pc0, bw, g.select_level);
            ledger.close()?;
            cands.push(c?);
        }
        ledger.close()?;
        for (j, pairs) in merge_rounds(q).into_iter().enumerate() {
            let level = g.row_team.level_at_distance(1 << j);
            ledger.record_p2p_tagged("lu_tournament", (bw * bw) as f64, level)?;
            ledger.open_parallel(1);
            for (src, tgt) in pairs {
                let stacked: Vec<usize> = cands[src].iter().chain(&cands[tgt]).copied().collect();
                ledger.open_sequential();
                let c = self.select(ledger, &stacked, pc0, bw, g.select_level);
                ledger.close()?;
                cands[src] = c?;
            }
            ledger.close()?;
        }

        let mut at: Vec<usize> = (0..m).collect();
        let mut where_is: Vec<usize> = (0..m).collect();
        for (k, &win) in cands[0].iter().enumerate() {
            let target = r0p + k;
            let p = where_is[win];
            if p != target {
                self.swap(target, p);
                let (ot, op) = (at[target], at[p]);
                at.swap(target, p);
                where_is[ot] = p;
                where_is[op] = target;
            }
        }

        for k in 0..bw {
            let (pr, pc) = (r0p + k, pc0 + k);
            let piv = self.w[(pr, pc)];
            if piv == 0.0 {
                if self.record {
                    return Err(Error::SingularPanel { column: pc });
                }
                continue;
            }
            if self.record {
                let colmax = (pr..m).fold(0.0f64, |mx, i| mx.max(self.w[(i, pc)].abs()));
                self.tau.push(piv.abs() / colmax);
            }
            for i in pr + 1..m {
                let f = self.w[(i, pc)] / piv;
                self.w[(i, pc)] = f;
                if f == 0.0 {
                    continue;
                }
                for j in pc + 1..pc0 + bw {
                    let v = self.w[(pr, j)];
                    self.w[(i, j)] -= f * v;
                }
            }
        }

        let h_loc = h as f64 / q as f64;
        let pcf = g.p_cols as f64;
        let b = bw as f64;
        ledger.record_flops(h_loc * b * b / g.flop_div);
        ledger.record_bcast_tagged("lu_pivots", b, g.level, g.p_cols)?;
        if q > 1 {
            let top = g.row_team.parts().last().map_or(g.level, |&(_, l)| l);
            ledger.record_p2p_tagged("lu_swap", b * self.w.cols() as f64 / pcf, top)?;
        }
        ledger.record_bcast_tagged("lu_lkk", b * b / 2.0, g.level, g.p_cols)?;

        let t0 = pc0 + bw;
        if t_end > t0 {
            let width = t_end - t0;
            self.update(r0p, pc0, bw, t0, width)?;
            let wl = width as f64 / pcf;
            ledger.record_flops(trsm_flops(bw, wl) / g.flop_div);
            g.row_team.bcast(ledger, "lu_urow", b * wl)?;
            ledger.record_bcast_tagged("lu_lcol", h_loc * b, g.level, g.p_cols)?;
            ledger.parallel(q * g.p_cols, |l| charge_gemm(l, h_loc, b, wl, g.level - 1))?;
        }
        Ok(())
    }

    /// Block row of `U` and Schur complement for the `bw` pivots at
    /// `(r0p, pc0)`, over columns `t0..t0+width`.
    fn update(&mut self, r0p: usize, pc0: usize, bw: usize, t0: usize, width: usize) -> Result<()> {
        let lkk = self.w.block(r0p, pc0, bw, bw).unit_lower();
        let urow = trsm_lower_unit(&lkk, &self.w.block(r0p, t0, bw, width))?;
        self.w.set_block(r0p, t0, &urow);
        let below = self.w.rows() - r0p - bw;
        if below > 0 {
            let lb = self.w.block(r0p + bw, pc0, below, bw);
            let s = self.w.block(r0p + bw, t0, below, width);
            self.w.set_block(r0p + bw, t0, &s.sub(&lb.matmul(&urow)));
        }
        Ok(())
    }

    fn lu2d(&mut self, ledger: &mut Ledger, r0: usize, c0: usize, nc: usize, r: usize, top: bool) -> Result<()> {
        let spec = self.platform.level(r).clone();
        let g = Grid {
            level: r,
            row_team: Team::single(spec.p_rows, r),
            p_cols: spec.p_cols,
            select_level: r - 1,
            max_leaves: spec.p_rows,
            flop_div: self.platform.elements_below(r) as f64,
        };
        let b = self.schedule.block(r).min(nc);
        for s in 0..nc.div_ceil(b) {
            let bw = b.min(nc - s * b);
            self.panel_step(ledger, r0 + s * b, c0 + s * b, bw, c0 + nc, &g)?;
            if top && self.record {
                self.sample_growth(r0 + s * b + bw, c0 + s * b + bw);
            }
        }
        Ok(())
    }

    fn lu1d(&mut self, ledger: &mut Ledger, r0: usize, c0: usize, nc: usize, r: usize, top: bool) -> Result<()> {
        if r == 1 {
            let team = Team::new((1..=self.platform.depth()).map(|k| (self.platform.level(k).p_rows, k)).collect());
            let g = Grid {
                level: 1,
                max_leaves: team.size(),
                row_team: team,
                p_cols: self.platform.level(1).p_cols,
                select_level: 0,
                flop_div: 1.0,
            };
            let b = self.schedule.block(1).min(nc);
            for s in 0..nc.div_ceil(b) {
                let bw = b.min(nc - s * b);
                self.panel_step(ledger, r0 + s * b, c0 + s * b, bw, c0 + nc, &g)?;
                if top && self.record {
                    self.sample_growth(r0 + s * b + bw, c0 + s * b + bw);
                }
            }
            return Ok(());
        }
        let spec = self.platform.level(r).clone();
        let (prf, pcf) = (spec.p_rows as f64, spec.p_cols as f64);
        let b = self.schedule.block(r).min(nc);
        for s in 0..nc.div_ceil(b) {
            let bw = b.min(nc - s * b);
            let (r0p, pc0) = (r0 + s * b, c0 + s * b);
            self.lu1d(ledger, r0p, pc0, bw, r - 1, false)?;
            let bf = bw as f64;
            let h = (self.w.rows() - r0p) as f64;
            ledger.record_bcast_tagged("lu_pivots", bf, r, spec.p_cols)?;
            ledger.record_p2p_tagged("lu_swap", bf * self.w.cols() as f64 / pcf, r)?;
            let t0 = pc0 + bw;
            let t_end = c0 + nc;
            if t_end > t0 {
                let width = t_end - t0;
                self.update(r0p, pc0, bw, t0, width)?;
                let wl = width as f64 / pcf;
                ledger.record_bcast_tagged("lu_lkk", bf * bf / 2.0, r, spec.p_cols)?;
                ledger.record_flops(trsm_flops(bw, wl) / self.platform.elements_below(r) as f64);
                Team::single(spec.p_rows, r).bcast(ledger, "lu_urow", bf * wl)?;
                ledger.record_bcast_tagged("lu_lcol", h / prf * bf, r, spec.p_cols)?;
                ledger.parallel(spec.nodes(), |l| charge_gemm(l, h / prf, bf, wl, r - 1))?;
            }
            if top && self.record {
                self.sample_growth(r0p + bw, t0);
            }
        }
        Ok(())
    }

    fn finish(self, ledger: Ledger) -> LuResult {
        let (m, n) = self.w.shape();
        LuResult {
            l: self.w.block(0, 0, m, n).unit_lower(),
            u: self.w.block(0, 0, n, n).upper(),
            perm: self.perm,
            tau_trace: self.tau,
            growth_trace: self.growth,
            ledger,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    OneD,
    TwoD,
}

fn run(a: &Mat, platform: &Platform, schedule: &BlockSchedule, mut ledger: Ledger, variant: Variant) -> Result<LuResult> {
    let (m, n) = a.shape();
    schedule.check(m, n, platform)?;
    if platform.depth() >= 4 {
        log::warn!("ML-CALU with {} levels is experimental", platform.depth());
    }
    let mut r = Run::new(a.clone(), schedule, platform, true);
    if n > 0 {
        let l = platform.depth();
        match variant {
            Variant::OneD => r.lu1d(&mut ledger, 0, 0, n, l, true)?,
            Variant::TwoD => r.lu2d(&mut ledger, 0, 0, n, l, true)?,
        }
    }
    Ok(r.finish(ledger))
}

/// One-level CALU with panel width `b` on the level-1 grid of `platform`.
pub fn calu(a: &Mat, platform: &Platform, b: usize) -> Result<LuResult> {
    let one = platform.truncated(1)?;
    mlcalu_2d(a, &one, &BlockSchedule::new(vec![b])?)
}

/// One-level CALU on a synthetic `p_rows x p_cols` machine.
pub fn calu_grid(a: &Mat, b: usize, p_rows: usize, p_cols: usize) -> Result<LuResult> {
    calu(a, &Platform::synthetic(&[(p_rows, p_cols)])?, b)
}

pub fn mlcalu_1d(a: &Mat, platform: &Platform, schedule: &BlockSchedule) -> Result<LuResult> {
    mlcalu_1d_with(a, platform, schedule, Ledger::new(platform))
}

pub fn mlcalu_1d_with(a: &Mat, platform: &Platform, schedule: &BlockSchedule, ledger: Ledger) -> Result<LuResult> {
    run(a, platform, schedule, ledger, Variant::OneD)
}

pub fn mlcalu_2d(a: &Mat, platform: &Platform, schedule: &BlockSchedule) -> Result<LuResult> {
    mlcalu_2d_with(a, platform, schedule, Ledger::new(platform))
}

pub fn mlcalu_2d_with(a: &Mat, platform: &Platform, schedule: &BlockSchedule, ledger: Ledger) -> Result<LuResult> {
    run(a, platform, schedule, ledger, Variant::TwoD)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::gepp;
    use rand::{Rng, SeedableRng};

    fn random(n: usize, seed: u64) -> Mat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn residual(a: &Mat, f: &LuResult) -> f64 {
        f.perm.apply_rows(a).sub(&f.l.matmul(&f.u)).frobenius() / a.frobenius()
    }

    #[test]
    fn single_leaf_is_gepp() {
        let a = random(12, 1);
        let g = gepp(&a).unwrap();
        for b in [3, 12] {
            let f = calu_grid(&a, b, 1, 1).unwrap();
            assert_eq!(f.perm, g.perm);
            assert!(f.l.sub(&g.l).max_abs() <= 1e-15);
            assert!(f.u.sub(&g.u).max_abs() <= 1e-14);
            assert_eq!(pivot_quality(&f).fraction_tau_eq_one, 1.0);
        }
    }

    #[test]
    fn diagonally_dominant_needs_no_pivoting() {
        let a = Mat::from_fn(16, 16, |i, j| if i == j { 50.0 } else { ((i * 3 + j * 5) % 7) as f64 / 7.0 });
        let f = calu_grid(&a, 4, 4, 1).unwrap();
        assert!(f.perm.is_identity());
        assert!(f.tau_trace.iter().all(|&t| t == 1.0));
    }

    #[test]
    fn random_residuals() {
        let a = random(32, 2);
        let f = calu_grid(&a, 4, 4, 2).unwrap();
        assert!(residual(&a, &f) <= 1e-13);
        let p = Platform::synthetic(&[(2, 2), (2, 2)]).unwrap();
        let a = random(64, 3);
        let f = mlcalu_2d(&a, &p, &BlockSchedule::new(vec![2, 8]).unwrap()).unwrap();
        assert!(residual(&a, &f) <= 1e-12);
        assert!(f.tau_trace.iter().all(|&t| t > 0.0 && t <= 1.0));
        assert_eq!(f.tau_trace.len(), 64);
    }

    #[test]
    fn one_d_matches_flat_calu() {
        let p = Platform::synthetic(&[(2, 2), (2, 2)]).unwrap();
        let s = BlockSchedule::new(vec![4, 8]).unwrap();
        let a = random(64, 4);
        let ml = mlcalu_1d(&a, &p, &s).unwrap();
        let flat = calu_grid(&a, 4, 4, 1).unwrap();
        assert_eq!(ml.perm, flat.perm);
        let tol = 1e-12 * a.frobenius();
        assert!(ml.l.sub(&flat.l).max_abs() <= tol);
        assert!(ml.u.sub(&flat.u).max_abs() <= tol);
    }

    #[test]
    fn one_level_variants_coincide() {
        let p = Platform::synthetic(&[(4, 2)]).unwrap();
        let s = BlockSchedule::new(vec![4]).unwrap();
        let a = random(32, 5);
        let x = mlcalu_1d(&a, &p, &s).unwrap();
        let y = mlcalu_2d(&a, &p, &s).unwrap();
        let z = calu(&a, &p, 4).unwrap();
        assert_eq!(x.perm, z.perm);
        assert_eq!(y.perm, z.perm);
        assert_eq!(x.l, z.l);
        assert_eq!(x.ledger.counts().unwrap(), z.ledger.counts().unwrap());
        assert_eq!(y.ledger.counts().unwrap(), z.ledger.counts().unwrap());
    }

    #[test]
    fn identity_is_fixed() {
        let p = Platform::synthetic(&[(2, 2), (2, 2)]).unwrap();
        let s = BlockSchedule::new(vec![2, 4]).unwrap();
        for f in [
            mlcalu_1d(&Mat::identity(16), &p, &s).unwrap(),
            mlcalu_2d(&Mat::identity(16), &p, &s).unwrap(),
        ] {
            assert!(f.perm.is_identity());
            assert_eq!(f.l, Mat::identity(16));
            assert_eq!(f.u, Mat::identity(16));
        }
    }

    #[test]
    fn tournament_can_miss_the_column_maximum() {
        // Leaf 1 ties on the first column, keeps row e and eliminates row f
        // in favour of g, so the merge never sees f's 5.5 in column 2.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let head: [[f64; 2]; 8] = [
            [10.0, 0.0],
            [0.0, 1.0],
            [0.0, 0.5],
            [0.0, 0.2],
            [1.0, 5.0],
            [1.0, 5.5],
            [0.5, 0.0],
            [0.0, 0.1],
        ];
        let a = Mat::from_fn(8, 8, |i, j| if j < 2 { head[i][j] } else { rng.random_range(-1.0..1.0) });
        let f = calu_grid(&a, 2, 2, 1).unwrap();
        assert_eq!(&f.perm.as_slice()[..2], &[0, 4]);
        // exhaustive scan of column 2 after eliminating with row 0
        let col: Vec<f64> = (1..8).map(|i| a[(i, 1)] - a[(i, 0)] / a[(0, 0)] * a[(0, 1)]).collect();
        let mx = col.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert_eq!(mx, 5.5);
        assert_eq!(f.tau_trace[0], 1.0);
        assert!((f.tau_trace[1] - 5.0 / 5.5).abs() < 1e-15);
        let q = pivot_quality(&f);
        assert!(q.tau_min < 1.0);
        assert_eq!(q.histogram.iter().sum::<usize>(), 8);
    }

    #[test]
    fn singular_panel_is_reported() {
        let mut a = random(8, 6);
        for i in 0..8 {
            a[(i, 1)] = 2.0 * a[(i, 0)];
        }
        assert!(matches!(calu_grid(&a, 2, 2, 1), Err(Error::SingularPanel { column: 1 })));
    }

    #[test]
    fn empty_matrix_gives_empty_report() {
        let p = Platform::synthetic(&[(2, 2)]).unwrap();
        let f = calu(&Mat::zeros(0, 0), &p, 1).unwrap();
        let q = pivot_quality(&f);
        assert_eq!(q.steps, 0);
        assert_eq!(q.tau_min, 1.0);
    }
}
