//! Multilevel communication-avoiding QR.
//!
//! A call at level `r` factors a block of rows panel by panel. Each panel is
//! split into up to `Pr_r` contiguous leaves, each leaf is factored by a call
//! at level `r - 1`, and the leaf triangles are merged along a binary tree
//! whose nodes are again level `r - 1` calls on two stacked triangles. Level
//! 0 is a dense Householder QR on one processing element.

use serde::{Deserialize, Serialize};

use crate::dense::{householder_qr, CompactWY, Mat};
use crate::error::{Error, Result};
use crate::flops::{apply_flops, qr_flops, stacked_apply_flops, tri_stack_qr_flops};
use crate::platform::{ceil_log2, Platform};
use crate::schedule::BlockSchedule;
use crate::vm::Ledger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf(usize),
    Merge { round: usize, source: usize, target: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeKey {
    /// Invocation counter, distinguishes recursive calls with equal
    /// `(level, step)`.
    pub call: usize,
    /// Level of the call whose leaf or merge produced the entry.
    pub level: usize,
    pub step: usize,
    pub node: TreeNode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeEntry {
    pub key: TreeKey,
    /// Global row indices the reflectors act on.
    pub rows: Vec<usize>,
    /// First column of the factored block.
    pub col: usize,
    pub wy: CompactWY,
}

/// Reflectors of a factorization, in the order they were produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct HouseholderTree {
    pub m: usize,
    pub entries: Vec<TreeEntry>,
}

impl HouseholderTree {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &TreeKey) -> Option<&TreeEntry> {
        self.entries.iter().find(|e| &e.key == key)
    }
}

/// Shape of a factorization, kept for charging updates.
#[derive(Debug, Clone, PartialEq)]
pub enum QrTrace {
    Dense { rows: usize, cols: usize },
    Stacked { cols: usize },
    Level { level: usize, panels: Vec<PanelTrace> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelTrace {
    pub b: usize,
    pub leaves: Vec<(usize, QrTrace)>,
    /// One representative factorization per merge round, with the number of
    /// pairs in that round.
    pub rounds: Vec<(usize, QrTrace)>,
}

#[derive(Debug, Clone)]
pub struct QrResult {
    pub r: Mat,
    pub tree: HouseholderTree,
    pub ledger: Ledger,
    pub trace: QrTrace,
}

impl QrResult {
    /// Explicit `m x m` orthogonal factor.
    pub fn q(&self) -> Result<Mat> {
        ml_apply(&self.tree, &Mat::identity(self.tree.m), false)
    }
}

struct Run<'a> {
    w: Mat,
    schedule: &'a BlockSchedule,
    platform: &'a Platform,
    tree: Vec<TreeEntry>,
    calls: usize,
}

/// Balanced contiguous split of `rows` into `q` chunks, larger chunks first.
pub(crate) fn split_rows(rows: &[usize], q: usize) -> Vec<&[usize]> {
    let h = rows.len();
    let base = h / q;
    let extra = h % q;
    let mut out = Vec::with_capacity(q);
    let mut start = 0;
    for i in 0..q {
        let len = base + usize::from(i < extra);
        out.push(&rows[start..start + len]);
        start += len;
    }
    out
}

/// Merge pairs `(source, target)` of a binary tree over `q` leaves.
pub(crate) fn merge_rounds(q: usize) -> Vec<Vec<(usize, usize)>> {
    (0..ceil_log2(q) as usize)
        .map(|j| {
            let stride = 1 << j;
            (0..q)
                .step_by(stride * 2)
                .filter(|i| i + stride < q)
                .map(|i| (i, i + stride))
                .collect()
        })
        .collect()
}

impl Run<'_> {
    fn next_call(&mut self) -> usize {
        self.calls += 1;
        self.calls - 1
    }

    fn factor(
        &mut self,
        ledger: &mut Ledger,
        rows: &[usize],
        c0: usize,
        nc: usize,
        r: usize,
        stacked: bool,
        (level, step, node): (usize, usize, TreeNode),
    ) -> Result<QrTrace> {
        let call = self.next_call();
        if r == 0 {
            let f = householder_qr(&self.w.gather(rows, c0, nc));
            let mut out = Mat::zeros(rows.len(), nc);
            out.set_block(0, 0, &f.r);
            self.w.scatter(rows, c0, &out);
            self.tree.push(TreeEntry {
                key: TreeKey {
                    call,
                    level,
                    step,
                    node,
                },
                rows: rows.to_vec(),
                col: c0,
                wy: f.wy,
            });
            return Ok(if stacked {
                ledger.record_flops(tri_stack_qr_flops(nc));
                QrTrace::Stacked { cols: nc }
            } else {
                ledger.record_flops(qr_flops(rows.len(), nc));
                QrTrace::Dense {
                    rows: rows.len(),
                    cols: nc,
                }
            });
        }

        let b = self.schedule.block(r).min(nc);
        let spec = self.platform.level(r).clone();
        let mut panels = Vec::new();
        for s in 0..nc.div_ceil(b) {
            let pc0 = c0 + s * b;
            let bw = b.min(nc - s * b);
            let active = &rows[s * b..];
            let q = spec.p_rows.min(active.len() / bw).max(1);
            let chunks = split_rows(active, q);
            let first_entry = self.tree.len();

            let mut leaves = Vec::with_capacity(q);
            ledger.open_parallel(1);
            for (i, chunk) in chunks.iter().enumerate() {
                ledger.open_sequential();
                let t = self.factor(ledger, chunk, pc0, bw, r - 1, false, (r, s, TreeNode::Leaf(i)));
                ledger.close()?;
                leaves.push((chunk.len(), t?));
            }
            ledger.close()?;

            let mut rounds = Vec::new();
            for (j, pairs) in merge_rounds(q).into_iter().enumerate() {
                ledger.record_p2p_tagged("qr_tree", (bw * (bw + 1) / 2) as f64, r)?;
                let mut rep = None;
                ledger.open_parallel(1);
                for &(src, tgt) in &pairs {
                    let stacked_rows: Vec<usize> =
                        chunks[src][..bw].iter().chain(&chunks[tgt][..bw]).copied().collect();
                    ledger.open_parallel(2);
                    let t = self.factor(
                        ledger,
                        &stacked_rows,
                        pc0,
                        bw,
                        r - 1,
                        true,
                        (
                            r,
                            s,
                            TreeNode::Merge {
                                round: j,
                                source: src,
                                target: tgt,
                            },
                        ),
                    );
                    ledger.close()?;
                    let t = t?;
                    rep.get_or_insert(t);
                }
                ledger.close()?;
                rounds.push((pairs.len(), rep.expect("nonempty round")));
            }

            let panel = PanelTrace { b: bw, leaves, rounds };

            let t0 = pc0 + bw;
            let width = c0 + nc - t0;
            if width > 0 {
                for e in &self.tree[first_entry..] {
                    let c = self.w.gather(&e.rows, t0, width);
                    self.w.scatter(&e.rows, t0, &e.wy.apply_qt(&c)?);
                }
                charge_panel_update(ledger, &panel, r, width as f64)?;
            }
            panels.push(panel);
        }
        Ok(QrTrace::Level { level: r, panels })
    }
}

/// Charges applying the transformations of a factorization with shape
/// `trace` to `w` further columns.
pub fn charge_update(ledger: &mut Ledger, trace: &QrTrace, w: f64) -> Result<()> {
    match trace {
        QrTrace::Dense { rows, cols } => {
            ledger.record_flops(apply_flops(*rows, *cols, w));
            Ok(())
        }
        QrTrace::Stacked { cols } => {
            ledger.record_flops(stacked_apply_flops(*cols, w));
            Ok(())
        }
        QrTrace::Level { level, panels } => {
            for p in panels {
                charge_panel_update(ledger, p, *level, w)?;
            }
            Ok(())
        }
    }
}

fn charge_panel_update(ledger: &mut Ledger, panel: &PanelTrace, r: usize, w: f64) -> Result<()> {
    let pc = ledger.platform().level(r).p_cols;
    let local = w / pc as f64;
    let b = panel.b as f64;
    ledger.open_parallel(1);
    for (h, t) in &panel.leaves {
        ledger.open_sequential();
        let out = ledger
            .record_bcast_tagged("qr_upfact", *h as f64 * b, r, pc)
            .and_then(|_| charge_update(ledger, t, local));
        ledger.close()?;
        out?;
    }
    ledger.close()?;
    for (pairs, t) in &panel.rounds {
        ledger.record_bcast_tagged("qr_upelim_bcast", b * b, r, pc)?;
        ledger.record_p2p_tagged("qr_upelim", b * local, r)?;
        ledger.parallel(*pairs, |l| l.parallel(2, |l| charge_update(l, t, local)))?;
    }
    Ok(())
}

/// ML-CAQR of `a` with a fresh ledger.
pub fn ml_caqr(a: &Mat, platform: &Platform, schedule: &BlockSchedule) -> Result<QrResult> {
    ml_caqr_with(a, platform, schedule, Ledger::new(platform))
}

/// ML-CAQR of `a`, recording into `ledger`.
pub fn ml_caqr_with(a: &Mat, platform: &Platform, schedule: &BlockSchedule, mut ledger: Ledger) -> Result<QrResult> {
    let (m, n) = a.shape();
    schedule.check(m, n, platform)?;
    let l = platform.depth();
    let mut run = Run {
        w: a.clone(),
        schedule,
        platform,
        tree: Vec::new(),
        calls: 0,
    };
    let rows: Vec<usize> = (0..m).collect();
    let trace = if n == 0 {
        QrTrace::Level {
            level: l,
            panels: Vec::new(),
        }
    } else {
        run.factor(&mut ledger, &rows, 0, n, l, false, (l + 1, 0, TreeNode::Leaf(0)))?
    };
    let r = run.w.block(0, 0, n, n).upper();
    Ok(QrResult {
        r,
        tree: HouseholderTree { m, entries: run.tree },
        ledger,
        trace,
    })
}

/// One-level CAQR on the level-1 grid of `platform` with panel width `b`.
pub fn caqr(a: &Mat, platform: &Platform, b: usize) -> Result<QrResult> {
    let one = platform.truncated(1)?;
    ml_caqr(a, &one, &BlockSchedule::new(vec![b])?)
}

/// `Q^T c` when `transpose`, else `Q c`.
pub fn ml_apply(tree: &HouseholderTree, c: &Mat, transpose: bool) -> Result<Mat> {
    if c.rows() != tree.m {
        return Err(Error::ShapeError(format!(
            "operand has {} rows, factorization has {}",
            c.rows(),
            tree.m
        )));
    }
    let mut out = c.clone();
    let w = c.cols();
    let mut step = |e: &TreeEntry| -> Result<()> {
        let blk = out.gather(&e.rows, 0, w);
        let res = if transpose {
            e.wy.apply_qt(&blk)?
        } else {
            e.wy.apply_q(&blk)?
        };
        out.scatter(&e.rows, 0, &res);
        Ok(())
    };
    if transpose {
        tree.entries.iter().try_for_each(&mut step)?;
    } else {
        tree.entries.iter().rev().try_for_each(&mut step)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::{validate, PlatformSpec};
    use rand::{Rng, SeedableRng};

    fn grid(levels: &[(usize, usize)]) -> Platform {
        validate(PlatformSpec::fully_pipelined(levels, 1 << 20, 1e-6, 1e-9, 1e-10)).unwrap()
    }

    fn random(m: usize, n: usize, seed: u64) -> Mat {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Mat::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0))
    }

    fn residual(a: &Mat, res: &QrResult) -> f64 {
        let (m, n) = a.shape();
        let mut rr = Mat::zeros(m, n);
        rr.set_block(0, 0, &res.r);
        ml_apply(&res.tree, &rr, false).unwrap().sub(a).frobenius() / a.frobenius()
    }

    #[test]
    fn rounds_are_hypercube_pairs() {
        assert_eq!(merge_rounds(4), vec![vec![(0, 1), (2, 3)], vec![(0, 2)]]);
        assert_eq!(merge_rounds(3), vec![vec![(0, 1)], vec![(0, 2)]]);
        assert!(merge_rounds(1).is_empty());
        let rows: Vec<usize> = (0..7).collect();
        let s = split_rows(&rows, 3);
        assert_eq!(s, vec![&[0, 1, 2][..], &[3, 4][..], &[5, 6][..]]);
    }

    #[test]
    fn two_level_matches_reference() {
        let p = grid(&[(2, 2), (2, 2)]);
        let a = random(64, 32, 1);
        let s = BlockSchedule::new(vec![4, 8]).unwrap();
        let res = ml_caqr(&a, &p, &s).unwrap();
        assert!(residual(&a, &res) <= 1e-13);
        let reference = householder_qr(&a).r;
        assert!(res.r.sub(&reference).max_abs() <= 1e-12);
    }

    #[test]
    fn one_level_baseline() {
        let p = grid(&[(4, 1)]);
        let a = random(16, 4, 2);
        let res = caqr(&a, &p, 2).unwrap();
        assert!(res.r.sub(&householder_qr(&a).r).max_abs() <= 1e-12);
        let single = grid(&[(1, 1)]);
        let res = caqr(&a, &single, 2).unwrap();
        assert_eq!(res.ledger.counts().unwrap().words[0], 0.0);
    }

    #[test]
    fn tsqr_tree_words() {
        let p = grid(&[(4, 1)]);
        let a = random(16, 2, 3);
        let res = caqr(&a, &p, 2).unwrap();
        assert_eq!(res.ledger.counts().unwrap().words[0], 6.0);
    }

    #[test]
    fn identity_and_apply_round_trip() {
        let p = grid(&[(2, 2), (2, 1)]);
        let s = BlockSchedule::new(vec![2, 4]).unwrap();
        let res = ml_caqr(&Mat::identity(16), &p, &s).unwrap();
        assert_eq!(res.r, Mat::identity(16));
        let c = random(16, 3, 4);
        assert_eq!(ml_apply(&res.tree, &c, true).unwrap(), c);

        let a = random(32, 16, 5);
        let res = ml_caqr(&a, &p, &s).unwrap();
        assert!(matches!(ml_apply(&res.tree, &c, true), Err(Error::ShapeError(_))));
        let c = random(32, 3, 6);
        let back = ml_apply(&res.tree, &ml_apply(&res.tree, &c, true).unwrap(), false).unwrap();
        assert!(back.sub(&c).frobenius() <= 1e-13 * c.frobenius());
        let qta = ml_apply(&res.tree, &a, true).unwrap();
        assert!(qta.block(0, 0, 16, 16).sub(&res.r).max_abs() <= 1e-13);
        let q = res.q().unwrap();
        assert!(q.transpose().matmul(&q).sub(&Mat::identity(32)).frobenius() <= 1e-13);
    }

    #[test]
    fn elimination_events_per_panel() {
        let p = grid(&[(4, 2)]);
        let a = random(32, 8, 7);
        let ledger = Ledger::with_event_log(&p);
        let res = ml_caqr_with(&a, &p, &BlockSchedule::new(vec![4]).unwrap(), ledger).unwrap();
        let count = |tag: &str| res.ledger.events().iter().filter(|e| e.tag == tag).count();
        assert_eq!(count("qr_tree"), 2 * 2);
        // the last panel has no trailing columns
        assert_eq!(count("qr_upelim"), 2);
    }

    #[test]
    fn merge_is_computed_twice_in_aggregate() {
        let p = grid(&[(2, 1)]);
        let res = caqr(&random(4, 2, 9), &p, 2).unwrap();
        let c = res.ledger.counts().unwrap();
        assert_eq!(c.flops, qr_flops(2, 2) + tri_stack_qr_flops(2));
        assert_eq!(c.aggregate_flops, 2.0 * qr_flops(2, 2) + 2.0 * tri_stack_qr_flops(2));
    }

    #[test]
    fn rejects_bad_schedules() {
        let p = grid(&[(2, 2), (2, 2)]);
        let a = random(64, 30, 8);
        assert!(matches!(
            ml_caqr(&a, &p, &BlockSchedule::new(vec![4, 8]).unwrap()),
            Err(Error::ShapeError(_))
        ));
        assert!(matches!(
            ml_caqr(&random(64, 32, 8), &p, &BlockSchedule::new(vec![8]).unwrap()),
            Err(Error::PlatformTooDeep { .. })
        ));
    }
}
