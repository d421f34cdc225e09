//! Analytical cost models: closed-form bounds of the multilevel algorithms,
//! a recursive evaluation of ML-CAQR, one-level CAQR/CALU mapped onto the
//! hierarchy, default block sizes and sweeps.
//!
//! Logarithms are base 2 throughout. Asymptotic `O(.)` remainders of the
//! closed forms are dropped.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cannon::charge_gemm;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::platform::{lower_bounds, CostVector, Platform};
use crate::schedule::BlockSchedule;
use crate::vm::Ledger;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Caqr,
    Calu,
    Mlcaqr,
    Mlcalu1d,
    Mlcalu2d,
    Mlcannon,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Caqr,
        Algorithm::Calu,
        Algorithm::Mlcaqr,
        Algorithm::Mlcalu1d,
        Algorithm::Mlcalu2d,
        Algorithm::Mlcannon,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Caqr => "caqr",
            Algorithm::Calu => "calu",
            Algorithm::Mlcaqr => "mlcaqr",
            Algorithm::Mlcalu1d => "mlcalu1d",
            Algorithm::Mlcalu2d => "mlcalu2d",
            Algorithm::Mlcannon => "mlcannon",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct ModelInputs {
    pub n: usize,
    pub platform: Platform,
    /// Falls back to [`default_blocks`] when absent.
    pub schedule: Option<BlockSchedule>,
}

impl ModelInputs {
    pub fn new(n: usize, platform: &Platform) -> Self {
        ModelInputs {
            n,
            platform: platform.clone(),
            schedule: None,
        }
    }

    fn schedule(&self) -> BlockSchedule {
        self.schedule.clone().unwrap_or_else(|| default_blocks(self.n, &self.platform))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub algorithm: Algorithm,
    pub n: usize,
    pub p: usize,
    pub cost: CostVector,
    /// `n^2 / sqrt(sP_k)` per level.
    pub words_bound: Vec<f64>,
    pub bound_ratio: Vec<f64>,
    pub ccr: f64,
    /// Recursive evaluation, next to the closed form (ML-CAQR only).
    pub recursive: Option<CostVector>,
    pub notes: Vec<String>,
}

impl ModelReport {
    fn new(algorithm: Algorithm, n: usize, platform: &Platform, cost: CostVector) -> Result<Self> {
        let words_bound = (1..=platform.depth())
            .map(|k| lower_bounds(n, k, platform).map(|b| b.words_bound))
            .collect::<Result<Vec<_>>>()?;
        let bound_ratio = cost.words.iter().zip(&words_bound).map(|(w, b)| w / b).collect();
        Ok(ModelReport {
            algorithm,
            n,
            p: platform.total_nodes(),
            ccr: cost.ccr(),
            cost,
            words_bound,
            bound_ratio,
            recursive: None,
            notes: Vec::new(),
        })
    }

    /// Recursive total time over closed-form total time.
    pub fn recursive_ratio(&self) -> Option<f64> {
        self.recursive.as_ref().map(|r| r.total_time / self.cost.total_time)
    }
}

fn lg(x: f64) -> f64 {
    x.log2()
}

/// Block sizes `b_k = n / (sqrt(sP_k) prod_{j>=k} log^2 P_j)`, each log
/// floored at 1, rounded and clamped to `[1, n]`, then lowered until
/// `b_l | n` and `b_{k-1} | b_k`.
pub fn default_blocks(n: usize, platform: &Platform) -> BlockSchedule {
    assert!(n >= 1, "default_blocks needs n >= 1");
    let l = platform.depth();
    let mut b: Vec<usize> = (1..=l)
        .map(|k| {
            let logs: f64 = (k..=l).map(|j| lg(platform.nodes(j) as f64).max(1.0).powi(2)).product();
            let denom = (platform.subtree_nodes(k) as f64).sqrt() * logs;
            ((n as f64 / denom).round() as usize).clamp(1, n)
        })
        .collect();
    while n % b[l - 1] != 0 {
        b[l - 1] -= 1;
    }
    for k in (0..l - 1).rev() {
        b[k] = b[k].min(b[k + 1]);
        while b[k + 1] % b[k] != 0 {
            b[k] -= 1;
        }
    }
    BlockSchedule::new(b).expect("adjusted blocks form a divisibility chain")
}

/// Upper bound `N_r = 2^(l-r) prod_{j=r..l} log Pr_j` on the number of
/// calls at recursion depth `r`.
pub fn calls_at_depth(r: usize, platform: &Platform) -> Result<f64> {
    platform.check_level(r)?;
    let l = platform.depth();
    let logs: f64 = (r..=l).map(|j| lg(platform.level(j).p_rows as f64)).product();
    Ok(2f64.powi((l - r) as i32) * logs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneLevel {
    Caqr,
    Calu,
}

/// Leading-order constants of the one-level algorithms:
/// `F = flops n^3/P`, `W = words n^2/sqrt(P) log P`,
/// `S = messages sqrt(P) log^3 P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneLevelConstants {
    pub caqr_flops: f64,
    pub calu_flops: f64,
    pub words: f64,
    pub messages: f64,
}

impl Default for OneLevelConstants {
    fn default() -> Self {
        OneLevelConstants {
            caqr_flops: 4.0 / 3.0,
            calu_flops: 2.0 / 3.0,
            words: 1.0,
            messages: 1.0,
        }
    }
}

pub fn onelevel_cost(algorithm: OneLevel, n: usize, platform: &Platform) -> Result<ModelReport> {
    onelevel_cost_with(algorithm, n, platform, &OneLevelConstants::default())
}

/// One-level algorithm on the whole machine. Every transfer crosses the
/// top level, so only `alpha_l`, `beta_l` are charged, and the bandwidth of
/// a level-`l` link is shared by the `P / sP_l` elements behind it. Words
/// reported at level `k` are the traffic through one level-`k` link.
pub fn onelevel_cost_with(
    algorithm: OneLevel,
    n: usize,
    platform: &Platform,
    c: &OneLevelConstants,
) -> Result<ModelReport> {
    if n == 0 {
        return Err(Error::Config("matrix order must be >= 1".into()));
    }
    let l = platform.depth();
    let nf = n as f64;
    let p = platform.total_nodes() as f64;
    let logp = lg(p);
    let (cf, tag) = match algorithm {
        OneLevel::Caqr => (c.caqr_flops, Algorithm::Caqr),
        OneLevel::Calu => (c.calu_flops, Algorithm::Calu),
    };
    let flops = cf * nf.powi(3) / p;
    let w = c.words * nf * nf / p.sqrt() * logp;
    let s = c.messages * p.sqrt() * logp.powi(3);
    let words: Vec<f64> = (1..=l).map(|k| w * platform.elements_below(k) as f64).collect();
    let messages = vec![s; l];
    let top = platform.level(l);
    let mut comm_time = vec![0.0; l];
    comm_time[l - 1] = words[l - 1] * top.beta + s * top.alpha;
    let flop_time = flops * platform.gamma();
    let cost = CostVector {
        total_time: flop_time + comm_time.iter().sum::<f64>(),
        words,
        messages,
        comm_time,
        flops,
        flop_time,
    };
    let mut report = ModelReport::new(tag, n, platform, cost)?;
    report.notes.push("one-level mapping: top-level link, shared bandwidth".into());
    Ok(report)
}

/// Closed-form ML-CAQR bound plus the recursive evaluation. With one level
/// this is the one-level CAQR model.
pub fn mlcaqr_cost(inputs: &ModelInputs) -> Result<ModelReport> {
    let (n, pl) = (inputs.n, &inputs.platform);
    let l = pl.depth();
    let schedule = inputs.schedule();
    schedule.check(n, n, pl).or_else(|e| match e {
        Error::PlatformTooDeep { .. } => Err(e),
        _ => Ok(()),
    })?;
    let recursive = Recursion::new(pl, &schedule).mlcaqr(n as f64);
    if l == 1 {
        let mut r = onelevel_cost(OneLevel::Caqr, n, pl)?;
        r.algorithm = Algorithm::Mlcaqr;
        r.recursive = Some(recursive);
        return Ok(r);
    }
    let nf = n as f64;
    let n2 = nf * nf;
    let p = pl.total_nodes() as f64;
    let lf = l as f64;
    let logp = |j: usize| lg(pl.nodes(j) as f64);
    let sp = |k: usize| pl.subtree_nodes(k) as f64;
    let buf = |k: usize| pl.level(k).buffer_words as f64;
    let prod_log: f64 = (1..=l).map(logp).product();

    let mut words = vec![0.0; l];
    let mut messages = vec![0.0; l];
    words[0] = n2 / p.sqrt() * (lf * logp(1) + logp(l) + 4.0 * lf * prod_log);
    messages[0] = lf * p.sqrt() * (1..=l).map(|j| logp(j).powi(3)).product::<f64>();
    for k in 2..l {
        let lk = (l - k) as f64;
        let tail: f64 = (k..=l).map(logp).product();
        words[k - 1] += lk * n2 / sp(k).sqrt() * (1.0 + 2.0 * tail / (pl.nodes(l) as f64).sqrt());
        messages[k - 1] += n2 / (buf(k) * sp(k).sqrt()) * lk * logp(k);
    }
    let pl_root = (pl.nodes(l) as f64).sqrt();
    let mid: f64 = (2..l).map(|j| (pl.nodes(j) as f64).sqrt()).product();
    words[l - 1] += n2 / sp(l).sqrt() * logp(l);
    messages[l - 1] += n2 / (buf(l) * pl_root) * logp(l) + n2 / (buf(l) * pl_root * mid) * logp(l);
    let flops = 4.0 * nf.powi(3) / p;

    let cost = CostVector::priced(words, messages, flops, pl);
    let mut r = ModelReport::new(Algorithm::Mlcaqr, n, pl, cost)?;
    r.recursive = Some(recursive);
    r.notes.push("closed form: O(.) terms dropped".into());
    Ok(r)
}

/// Closed-form ML-CALU bound (2D variant), with `P_k^* = sP_k`. With one
/// level this is the one-level CALU model.
pub fn mlcalu_cost(inputs: &ModelInputs) -> Result<ModelReport> {
    let (n, pl) = (inputs.n, &inputs.platform);
    let l = pl.depth();
    if l == 1 {
        let mut r = onelevel_cost(OneLevel::Calu, n, pl)?;
        r.algorithm = Algorithm::Mlcalu2d;
        return Ok(r);
    }
    let nf = n as f64;
    let n2 = nf * nf;
    let p = pl.total_nodes() as f64;
    let lf = l as f64;
    let logp = |j: usize| lg(pl.nodes(j) as f64);
    let log_l = logp(l);

    let flops = 2.0 * nf.powi(3) / (3.0 * p)
        + if log_l > 0.0 { nf.powi(3) / (p * log_l * log_l) } else { 0.0 }
        + nf.powi(3) / p * 0.375f64.powi(l as i32 - 2) * (5.0 / 16.0 * lf - 53.0 / 128.0);

    let half = |j: usize| 1.0 + 0.5 * logp(j);
    let head = n2 / (2.0 * p.sqrt()) * logp(1) * (2..=l).map(half).product::<f64>();
    let tail3: f64 = (3..=l).map(half).product();
    let mut words = vec![0.0; l];
    let mut messages = vec![0.0; l];
    words[0] = head;
    messages[0] = head;
    for k in 1..=l {
        let pk = pl.nodes(k) as f64;
        let inner = 8.0 / 3.0 * log_l * log_l * (1.0 + (l - k) as f64 / pk.sqrt())
            + (lf - 2.0) / 8.0 * (1.0 + lf / 4.0) * tail3;
        let base = n2 / (pl.subtree_nodes(k) as f64).sqrt() * inner;
        words[k - 1] += base;
        messages[k - 1] += base / pl.level(k).buffer_words as f64;
    }
    let cost = CostVector::priced(words, messages, flops.max(0.0), pl);
    let mut r = ModelReport::new(Algorithm::Mlcalu2d, n, pl, cost)?;
    r.notes.push("closed form: O(.) terms dropped".into());
    Ok(r)
}

/// Multilevel Cannon priced by charging a dry ledger.
pub fn mlcannon_cost(inputs: &ModelInputs) -> Result<ModelReport> {
    let (n, pl) = (inputs.n, &inputs.platform);
    let mut ledger = Ledger::new(pl);
    let nf = n as f64;
    charge_gemm(&mut ledger, nf, nf, nf, pl.depth())?;
    ModelReport::new(Algorithm::Mlcannon, n, pl, ledger.price()?)
}

/// Model of `algorithm` at order `n`.
pub fn model(algorithm: Algorithm, inputs: &ModelInputs) -> Result<ModelReport> {
    match algorithm {
        Algorithm::Caqr => onelevel_cost(OneLevel::Caqr, inputs.n, &inputs.platform),
        Algorithm::Calu => onelevel_cost(OneLevel::Calu, inputs.n, &inputs.platform),
        Algorithm::Mlcaqr => mlcaqr_cost(inputs),
        Algorithm::Mlcalu2d => mlcalu_cost(inputs),
        Algorithm::Mlcalu1d => {
            let mut r = mlcalu_cost(inputs)?;
            r.algorithm = Algorithm::Mlcalu1d;
            r.notes.push("1D variant priced with the 2D bound".into());
            Ok(r)
        }
        Algorithm::Mlcannon => mlcannon_cost(inputs),
    }
}

/// Most-square `pr x pc` factorization of `t` with `pr <= pc`.
pub fn near_square(t: usize) -> (usize, usize) {
    let mut pr = (t as f64).sqrt() as usize;
    while pr > 1 && t % pr != 0 {
        pr -= 1;
    }
    let pr = pr.max(1);
    (pr, t / pr)
}

/// Cartesian sweep over `ns` and top-level node counts `tops` (the
/// platform as given when `tops` is empty), `n` outermost.
pub fn sweep(algorithm: Algorithm, platform: &Platform, ns: &[usize], tops: &[usize]) -> Result<Vec<ModelReport>> {
    sweep_with(algorithm, platform, ns, tops, Exec::default())
}

pub fn sweep_with(
    algorithm: Algorithm,
    platform: &Platform,
    ns: &[usize],
    tops: &[usize],
    exec: Exec,
) -> Result<Vec<ModelReport>> {
    let l = platform.depth();
    let platforms: Vec<Platform> = if tops.is_empty() {
        vec![platform.clone()]
    } else {
        tops.iter()
            .map(|&t| {
                let (pr, pc) = near_square(t);
                platform.with_grid(l, pr, pc)
            })
            .collect::<Result<_>>()?
    };
    let cells: Vec<(usize, &Platform)> = ns.iter().flat_map(|&n| platforms.iter().map(move |p| (n, p))).collect();
    exec.map(&cells, |&(n, p)| model(algorithm, &ModelInputs::new(n, p)))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub n: usize,
    #[serde(rename = "P")]
    pub p: usize,
    pub level: usize,
    pub words: f64,
    pub messages: f64,
    pub comm_time_s: f64,
    pub flop_time_s: f64,
    pub total_time_s: f64,
    pub ccr: f64,
    pub bound_ratio: f64,
}

/// One row per level of each report.
pub fn rows(reports: &[ModelReport]) -> Vec<CostRow> {
    reports
        .iter()
        .flat_map(|r| {
            (0..r.cost.depth()).map(move |k| CostRow {
                n: r.n,
                p: r.p,
                level: k + 1,
                words: r.cost.words[k],
                messages: r.cost.messages[k],
                comm_time_s: r.cost.comm_time[k],
                flop_time_s: r.cost.flop_time,
                total_time_s: r.cost.total_time,
                ccr: r.ccr,
                bound_ratio: r.bound_ratio[k],
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(out: W, reports: &[ModelReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows(reports) {
        w.serialize(row).map_err(|e| Error::Config(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| Error::Config(format!("csv: {e}")))
}

#[derive(Debug, Clone)]
struct Acc {
    words: Vec<f64>,
    messages: Vec<f64>,
    flops: f64,
}

impl Acc {
    fn zero(l: usize) -> Self {
        Acc {
            words: vec![0.0; l],
            messages: vec![0.0; l],
            flops: 0.0,
        }
    }

    fn axpy(&mut self, s: f64, o: &Acc) {
        for (x, y) in self.words.iter_mut().zip(&o.words) {
            *x += s * y;
        }
        for (x, y) in self.messages.iter_mut().zip(&o.messages) {
            *x += s * y;
        }
        self.flops += s * o.flops;
    }
}

/// Recursive ML-CAQR cost with real-valued row splits and `log Pr` rounds.
///
/// The cost of a nested factorization is affine in its row count and the
/// cost of a nested update bilinear in rows and columns, so each is
/// evaluated at the corners of the unit square once per `(level, width)`
/// and interpolated.
struct Recursion<'a> {
    p: &'a Platform,
    s: &'a BlockSchedule,
    qr_memo: HashMap<(usize, usize), [Acc; 2]>,
    upd_memo: HashMap<(usize, usize), [Acc; 4]>,
}

impl<'a> Recursion<'a> {
    fn new(p: &'a Platform, s: &'a BlockSchedule) -> Self {
        Recursion {
            p,
            s,
            qr_memo: HashMap::new(),
            upd_memo: HashMap::new(),
        }
    }

    fn zero(&self) -> Acc {
        Acc::zero(self.p.depth())
    }

    fn p2p(&self, acc: &mut Acc, d: f64, r: usize, times: f64) {
        let mut wk = d;
        for k in (1..=r).rev() {
            acc.words[k - 1] += times * wk;
            if k >= 2 {
                acc.messages[k - 1] += times * wk / self.p.level(k).buffer_words as f64;
                wk /= self.p.nodes(k - 1) as f64;
            }
        }
        acc.messages[0] += times;
    }

    fn bcast(&self, acc: &mut Acc, d: f64, r: usize) {
        let fan = lg(self.p.level(r).p_cols as f64);
        self.p2p(acc, d, r, fan);
    }

    fn mlcaqr(mut self, n: f64) -> CostVector {
        let l = self.p.depth();
        let a = self.qr_eval(l, self.s.block(l).min(n as usize), n as usize, n);
        CostVector::priced(a.words, a.messages, a.flops, self.p)
    }

    /// Factorization of an `h x nb` block at level `r`.
    fn qr(&mut self, r: usize, nb: usize, stacked: bool, h: f64) -> Acc {
        if r == 0 {
            let b = nb as f64;
            let mut a = self.zero();
            a.flops = if stacked {
                2.0 * b * b * b / 3.0
            } else {
                2.0 * h * b * b - 2.0 * b * b * b / 3.0
            };
            return a;
        }
        let key = (r, nb);
        if !self.qr_memo.contains_key(&key) {
            let b = self.s.block(r).min(nb);
            let c = [self.qr_eval(r, b, nb, 0.0), self.qr_eval(r, b, nb, 1.0)];
            self.qr_memo.insert(key, c);
        }
        let c = &self.qr_memo[&key];
        let mut a = c[0].clone();
        a.axpy(-h, &c[0]);
        a.axpy(h, &c[1]);
        a
    }

    fn qr_eval(&mut self, r: usize, b: usize, nb: usize, h: f64) -> Acc {
        let pr = self.p.level(r).p_rows as f64;
        let rounds = lg(pr);
        let mut acc = self.zero();
        for s in 0..nb.div_ceil(b) {
            let bw = b.min(nb - s * b);
            let bf = bw as f64;
            let active = h - (s * b) as f64;
            let leaf = self.qr(r - 1, bw, false, active / pr);
            acc.axpy(1.0, &leaf);
            self.p2p(&mut acc, bf * bf / 2.0, r, rounds);
            let merge = self.qr(r - 1, bw, true, 2.0 * bf);
            acc.axpy(rounds, &merge);
            let width = nb - s * b - bw;
            if width > 0 {
                let u = self.panel_update(r, bw, active, width as f64);
                acc.axpy(1.0, &u);
            }
        }
        acc
    }

    fn panel_update(&mut self, r: usize, bw: usize, active: f64, w: f64) -> Acc {
        let spec = self.p.level(r);
        let (pr, pc) = (spec.p_rows as f64, spec.p_cols as f64);
        let rounds = lg(pr);
        let bf = bw as f64;
        let local = w / pc;
        let mut acc = self.zero();
        self.bcast(&mut acc, active / pr * bf, r);
        let leaf = self.upd(r - 1, bw, false, active / pr, local);
        acc.axpy(1.0, &leaf);
        let mut round = self.zero();
        self.bcast(&mut round, bf * bf, r);
        self.p2p(&mut round, bf * local, r, 1.0);
        let merge = self.upd(r - 1, bw, true, 2.0 * bf, local);
        round.axpy(1.0, &merge);
        acc.axpy(rounds, &round);
        acc
    }

    /// Applying the factorization of an `h x nb` block at level `r` to `w`
    /// columns.
    fn upd(&mut self, r: usize, nb: usize, stacked: bool, h: f64, w: f64) -> Acc {
        let b = nb as f64;
        if r == 0 {
            let mut a = self.zero();
            a.flops = if stacked {
                2.0 * b * b * w
            } else {
                (4.0 * h * b - 2.0 * b * b) * w
            };
            return a;
        }
        let key = (r, nb);
        if !self.upd_memo.contains_key(&key) {
            let c = [
                self.upd_eval(r, nb, 0.0, 0.0),
                self.upd_eval(r, nb, 1.0, 0.0),
                self.upd_eval(r, nb, 0.0, 1.0),
                self.upd_eval(r, nb, 1.0, 1.0),
            ];
            self.upd_memo.insert(key, c);
        }
        let c = &self.upd_memo[&key];
        let mut a = c[0].clone();
        a.axpy(h, &c[1]);
        a.axpy(-h, &c[0]);
        a.axpy(w, &c[2]);
        a.axpy(-w, &c[0]);
        let hw = h * w;
        a.axpy(hw, &c[3]);
        a.axpy(-hw, &c[1]);
        a.axpy(-hw, &c[2]);
        a.axpy(hw, &c[0]);
        a
    }

    fn upd_eval(&mut self, r: usize, nb: usize, h: f64, w: f64) -> Acc {
        let b = self.s.block(r).min(nb);
        let mut acc = self.zero();
        for s in 0..nb.div_ceil(b) {
            let bw = b.min(nb - s * b);
            let u = self.panel_update(r, bw, h - (s * b) as f64, w);
            acc.axpy(1.0, &u);
        }
        acc
    }
}
