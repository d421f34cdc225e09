//! Hierarchical cluster platform description and elementary communication
//! pricing.
//!
//! A platform has `l` nested levels. Level 1 is the deepest one (processing
//! elements); a node of level `i + 1` is a `p_rows x p_cols` grid of level-`i`
//! nodes. Each level carries its own latency `alpha`, inverse bandwidth `beta`
//! (seconds per 8-byte word) and network buffer size.
//!
//! Volumes are expressed per node of the level at which a communication takes
//! place: a point-to-point transfer of `D` words between two level-`r` nodes
//! moves `W_r = D` words through the level-`r` network, and
//! `W_k = W_{k+1} / P_k` words per node of every lower level `k < r`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bytes per word; bandwidths in configs are given in GB/s.
pub const WORD_BYTES: f64 = 8.0;

/// How much message aggregation a level's network allows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    /// Aggregates everything coming from below into a single message (`B_i = M_i`).
    FullyPipelined,
    /// Aggregation up to a buffer strictly smaller than the node memory.
    Bufferized,
    /// Messages from the level below are forwarded as-is (`B_i = B_{i-1}`).
    Forward,
}

impl std::fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            NetworkKind::FullyPipelined => "fully_pipelined",
            NetworkKind::Bufferized => "bufferized",
            NetworkKind::Forward => "forward",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSpec {
    pub p_rows: usize,
    pub p_cols: usize,
    /// Seconds per message.
    pub alpha: f64,
    /// Seconds per word.
    pub beta: f64,
    pub buffer_words: u64,
    pub network: NetworkKind,
}

impl LevelSpec {
    pub fn nodes(&self) -> usize {
        self.p_rows * self.p_cols
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlatformSpec {
    /// Deepest level first.
    pub levels: Vec<LevelSpec>,
    pub mem_level1_words: u64,
    /// Seconds per floating-point operation.
    pub gamma: f64,
}

impl PlatformSpec {
    /// Builds a spec where every level is fully pipelined, so that
    /// `B_1 = M_1` and `B_i = P_{i-1} B_{i-1}`. Latency and bandwidth are
    /// shared by all levels; handy for synthetic test machines.
    pub fn fully_pipelined(
        grids: &[(usize, usize)],
        mem_level1_words: u64,
        alpha: f64,
        beta: f64,
        gamma: f64,
    ) -> Self {
        let mut levels = Vec::with_capacity(grids.len());
        let mut buffer = mem_level1_words;
        let mut below = 1u64;
        for &(p_rows, p_cols) in grids {
            buffer *= below;
            levels.push(LevelSpec {
                p_rows,
                p_cols,
                alpha,
                beta,
                buffer_words: buffer,
                network: NetworkKind::FullyPipelined,
            });
            below = (p_rows * p_cols) as u64;
        }
        PlatformSpec {
            levels,
            mem_level1_words,
            gamma,
        }
    }
}

/// A platform whose invariants have been checked, together with its derived
/// tables. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Platform {
    spec: PlatformSpec,
    total_nodes: usize,
    /// `subtree_nodes[i-1] = sP_i = prod_{j=i..l} P_j`
    subtree_nodes: Vec<usize>,
    /// `aggregated_memory[i-1] = M_i = M_1 prod_{j<i} P_j`
    aggregated_memory: Vec<f64>,
}

/// Checks a platform description and computes its derived tables.
pub fn validate(spec: PlatformSpec) -> Result<Platform> {
    if spec.levels.is_empty() {
        return Err(Error::EmptyPlatform);
    }
    if spec.mem_level1_words == 0 {
        return Err(Error::InvalidLevel {
            level: 1,
            reason: "mem_level1_words must be >= 1".into(),
        });
    }
    if !(spec.gamma >= 0.0 && spec.gamma.is_finite()) {
        return Err(Error::Config(format!("gamma must be finite and >= 0, got {}", spec.gamma)));
    }
    for (idx, lv) in spec.levels.iter().enumerate() {
        let level = idx + 1;
        let bad = |reason: &str| Error::InvalidLevel {
            level,
            reason: reason.to_string(),
        };
        if lv.p_rows == 0 || lv.p_cols == 0 {
            return Err(bad("grid dimensions must be >= 1"));
        }
        if !(lv.alpha > 0.0 && lv.alpha.is_finite()) {
            return Err(bad("alpha must be positive"));
        }
        if !(lv.beta > 0.0 && lv.beta.is_finite()) {
            return Err(bad("beta must be positive"));
        }
        if lv.buffer_words == 0 {
            return Err(bad("buffer_words must be >= 1"));
        }
    }

    let first = &spec.levels[0];
    if first.buffer_words != spec.mem_level1_words {
        return Err(Error::NetworkKindMismatch {
            level: 1,
            kind: first.network.to_string(),
            buffer: first.buffer_words as f64,
            reason: format!("level 1 requires B_1 = M_1 = {}", spec.mem_level1_words),
        });
    }
    if first.network != NetworkKind::FullyPipelined {
        return Err(Error::NetworkKindMismatch {
            level: 1,
            kind: first.network.to_string(),
            buffer: first.buffer_words as f64,
            reason: "level 1 is fully pipelined by convention".into(),
        });
    }

    let l = spec.levels.len();
    let mut aggregated_memory = Vec::with_capacity(l);
    let mut mem = spec.mem_level1_words as f64;
    for i in 0..l {
        if i > 0 {
            mem *= spec.levels[i - 1].nodes() as f64;
        }
        aggregated_memory.push(mem);
    }

    for i in 1..l {
        let level = i + 1;
        let lv = &spec.levels[i];
        let prev = &spec.levels[i - 1];
        let lower = prev.buffer_words;
        let upper = prev.buffer_words.saturating_mul(prev.nodes() as u64);
        let b = lv.buffer_words;
        if b < lower || b > upper {
            return Err(Error::BufferConstraintViolation {
                level,
                buffer: b as f64,
                lower: lower as f64,
                upper: upper as f64,
            });
        }
        let mismatch = |reason: String| Error::NetworkKindMismatch {
            level,
            kind: lv.network.to_string(),
            buffer: b as f64,
            reason,
        };
        match lv.network {
            NetworkKind::FullyPipelined if b != upper => {
                return Err(mismatch(format!("fully pipelined requires B = P_(i-1) B_(i-1) = {upper}")))
            }
            NetworkKind::Forward if b != lower => {
                return Err(mismatch(format!("forward requires B = B_(i-1) = {lower}")))
            }
            NetworkKind::Bufferized if (b as f64) >= aggregated_memory[i] => {
                return Err(mismatch(format!(
                    "bufferized requires B < M_i = {}",
                    aggregated_memory[i]
                )))
            }
            _ => {}
        }
    }

    let mut subtree_nodes = vec![1usize; l];
    let mut acc = 1usize;
    for i in (0..l).rev() {
        acc *= spec.levels[i].nodes();
        subtree_nodes[i] = acc;
    }

    Ok(Platform {
        total_nodes: acc,
        subtree_nodes,
        aggregated_memory,
        spec,
    })
}

impl Platform {
    pub fn spec(&self) -> &PlatformSpec {
        &self.spec
    }

    /// Number of levels `l`.
    pub fn depth(&self) -> usize {
        self.spec.levels.len()
    }

    /// Level `i`, 1-based.
    pub fn level(&self, i: usize) -> &LevelSpec {
        &self.spec.levels[i - 1]
    }

    pub fn check_level(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.depth() {
            Err(Error::LevelOutOfRange {
                level: i,
                depth: self.depth(),
            })
        } else {
            Ok(())
        }
    }

    /// `P_i`
    pub fn nodes(&self, i: usize) -> usize {
        self.level(i).nodes()
    }

    /// `P`, the number of processing elements.
    pub fn total_nodes(&self) -> usize {
        self.total_nodes
    }

    /// `sP_i`, the number of level-`i` nodes in the whole machine.
    pub fn subtree_nodes(&self, i: usize) -> usize {
        self.subtree_nodes[i - 1]
    }

    /// `M_i`
    pub fn aggregated_memory(&self, i: usize) -> f64 {
        self.aggregated_memory[i - 1]
    }

    /// Processing elements inside one level-`i` node, `prod_{j<i} P_j`.
    pub fn elements_below(&self, i: usize) -> usize {
        (1..i).map(|j| self.nodes(j)).product()
    }

    pub fn gamma(&self) -> f64 {
        self.spec.gamma
    }

    /// Returns a copy with the grid of level `i` replaced. Buffers of the
    /// levels above are recomputed from their network kind; bufferized
    /// levels keep their declared buffer.
    /// The platform made of levels `1..=k` only.
    pub fn truncated(&self, k: usize) -> Result<Platform> {
        self.check_level(k)?;
        let mut spec = self.spec().clone();
        spec.levels.truncate(k);
        validate(spec)
    }

    pub fn with_grid(&self, i: usize, p_rows: usize, p_cols: usize) -> Result<Platform> {
        self.check_level(i)?;
        let mut spec = self.spec.clone();
        spec.levels[i - 1].p_rows = p_rows;
        spec.levels[i - 1].p_cols = p_cols;
        for j in i..spec.levels.len() {
            let below = &spec.levels[j - 1];
            let (b_prev, p_prev) = (below.buffer_words, below.nodes() as u64);
            let lv = &mut spec.levels[j];
            match lv.network {
                NetworkKind::FullyPipelined => lv.buffer_words = b_prev * p_prev,
                NetworkKind::Forward => lv.buffer_words = b_prev,
                NetworkKind::Bufferized => {}
            }
        }
        validate(spec)
    }

    pub fn from_json_str(text: &str) -> Result<Platform> {
        let cfg: PlatformConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("platform config: {e}")))?;
        validate(cfg.into_spec()?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Platform> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Fully pipelined test machine with the given grids (deepest first),
    /// 2^32 words per element, alpha = 1e-6 s, beta = 1e-9 s, gamma = 1e-10 s.
    pub fn synthetic(grids: &[(usize, usize)]) -> Result<Platform> {
        validate(PlatformSpec::fully_pipelined(grids, 1 << 32, 1e-6, 1e-9, 1e-10))
    }

    /// The NERSC Hopper model bundled with the crate.
    pub fn hopper() -> Platform {
        Self::from_json_str(HOPPER_JSON).expect("bundled hopper.json is valid")
    }

    /// The sample exascale machine bundled with the crate.
    pub fn exascale() -> Platform {
        Self::from_json_str(EXASCALE_JSON).expect("bundled exascale.json is valid")
    }

    pub fn to_config(&self) -> PlatformConfig {
        PlatformConfig {
            schema_version: Some(CONFIG_SCHEMA_VERSION),
            gamma: self.spec.gamma,
            mem_level1_words: self.spec.mem_level1_words,
            levels: self
                .spec
                .levels
                .iter()
                .map(|lv| LevelConfig {
                    p_rows: lv.p_rows,
                    p_cols: lv.p_cols,
                    alpha_s: lv.alpha,
                    bandwidth_gbps: WORD_BYTES / lv.beta / 1e9,
                    buffer_words: lv.buffer_words,
                    network: lv.network,
                })
                .collect(),
        }
    }
}

pub const CONFIG_SCHEMA_VERSION: u32 = 1;
pub const HOPPER_JSON: &str = include_str!("../platforms/hopper.json");
pub const EXASCALE_JSON: &str = include_str!("../platforms/exascale.json");

/// On-disk platform description. Levels are listed deepest first.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PlatformConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_version: Option<u32>,
    pub gamma: f64,
    pub mem_level1_words: u64,
    pub levels: Vec<LevelConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LevelConfig {
    pub p_rows: usize,
    pub p_cols: usize,
    pub alpha_s: f64,
    #[serde(rename = "bandwidth_GBps")]
    pub bandwidth_gbps: f64,
    pub buffer_words: u64,
    pub network: NetworkKind,
}

impl PlatformConfig {
    pub fn into_spec(self) -> Result<PlatformSpec> {
        if let Some(v) = self.schema_version {
            if v != CONFIG_SCHEMA_VERSION {
                return Err(Error::Config(format!("unsupported schema_version {v}")));
            }
        }
        let levels = self
            .levels
            .into_iter()
            .enumerate()
            .map(|(i, lv)| {
                if !(lv.bandwidth_gbps > 0.0 && lv.bandwidth_gbps.is_finite()) {
                    return Err(Error::InvalidLevel {
                        level: i + 1,
                        reason: "bandwidth_GBps must be positive".into(),
                    });
                }
                Ok(LevelSpec {
                    p_rows: lv.p_rows,
                    p_cols: lv.p_cols,
                    alpha: lv.alpha_s,
                    beta: WORD_BYTES / (lv.bandwidth_gbps * 1e9),
                    buffer_words: lv.buffer_words,
                    network: lv.network,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PlatformSpec {
            levels,
            mem_level1_words: self.mem_level1_words,
            gamma: self.gamma,
        })
    }
}

/// Per-level communication counts and their prices along the critical path.
/// Vectors are indexed by `level - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostVector {
    pub words: Vec<f64>,
    pub messages: Vec<f64>,
    pub comm_time: Vec<f64>,
    pub flops: f64,
    pub flop_time: f64,
    pub total_time: f64,
}

impl CostVector {
    pub fn zero(depth: usize) -> Self {
        CostVector {
            words: vec![0.0; depth],
            messages: vec![0.0; depth],
            comm_time: vec![0.0; depth],
            flops: 0.0,
            flop_time: 0.0,
            total_time: 0.0,
        }
    }

    /// Prices raw counts: `comm_time_k = words_k beta_k + messages_k alpha_k`
    /// and `flop_time = flops gamma`, with no overlap between the two.
    pub fn priced(words: Vec<f64>, messages: Vec<f64>, flops: f64, platform: &Platform) -> Self {
        debug_assert_eq!(words.len(), platform.depth());
        debug_assert_eq!(messages.len(), platform.depth());
        let comm_time: Vec<f64> = words
            .iter()
            .zip(&messages)
            .enumerate()
            .map(|(k, (w, s))| w * platform.level(k + 1).beta + s * platform.level(k + 1).alpha)
            .collect();
        let flop_time = flops * platform.gamma();
        let total_time = flop_time + comm_time.iter().sum::<f64>();
        CostVector {
            words,
            messages,
            comm_time,
            flops,
            flop_time,
            total_time,
        }
    }

    pub fn depth(&self) -> usize {
        self.words.len()
    }

    pub fn comm_time_total(&self) -> f64 {
        self.comm_time.iter().sum()
    }

    /// Communication-to-computation ratio. Infinite when there is no
    /// computation but some communication.
    pub fn ccr(&self) -> f64 {
        let comm = self.comm_time_total();
        if self.flop_time > 0.0 {
            comm / self.flop_time
        } else if comm > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }

    /// Component-wise sum (sequential composition).
    pub fn add(&self, other: &CostVector) -> CostVector {
        assert_eq!(self.depth(), other.depth(), "cost vectors of different depth");
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        CostVector {
            words: zip(&self.words, &other.words),
            messages: zip(&self.messages, &other.messages),
            comm_time: zip(&self.comm_time, &other.comm_time),
            flops: self.flops + other.flops,
            flop_time: self.flop_time + other.flop_time,
            total_time: self.total_time + other.total_time,
        }
    }

    pub fn scale(&self, factor: f64) -> CostVector {
        let s = |v: &[f64]| v.iter().map(|x| x * factor).collect::<Vec<_>>();
        CostVector {
            words: s(&self.words),
            messages: s(&self.messages),
            comm_time: s(&self.comm_time),
            flops: self.flops * factor,
            flop_time: self.flop_time * factor,
            total_time: self.total_time * factor,
        }
    }
}

/// `ceil(log2 q)` for `q >= 1`; the number of rounds of a binary tree over
/// `q` participants.
pub fn ceil_log2(q: usize) -> u32 {
    assert!(q >= 1, "ceil_log2 of zero");
    usize::BITS - (q - 1).leading_zeros()
}

/// Per-level word and message counts of a point-to-point transfer of
/// `volume` words between two level-`level` nodes.
pub fn p2p_counts(volume: f64, level: usize, platform: &Platform) -> Result<(Vec<f64>, Vec<f64>)> {
    platform.check_level(level)?;
    if !(volume >= 0.0 && volume.is_finite()) {
        return Err(Error::Config(format!("volume must be finite and >= 0, got {volume}")));
    }
    let l = platform.depth();
    let mut words = vec![0.0; l];
    let mut messages = vec![0.0; l];
    if volume == 0.0 {
        return Ok((words, messages));
    }
    words[level - 1] = volume;
    for k in (1..level).rev() {
        words[k - 1] = words[k] / platform.nodes(k) as f64;
    }
    let cap = platform.spec().mem_level1_words as f64;
    if words[0] > cap {
        return Err(Error::MemoryOverflow {
            words: words[0],
            capacity: cap,
        });
    }
    messages[0] = 1.0;
    for k in 2..=level {
        messages[k - 1] = (words[k - 1] / platform.level(k).buffer_words as f64).ceil();
    }
    Ok((words, messages))
}

/// Point-to-point communication of `volume` words between two nodes of
/// level `level`; every level below participates with its share.
pub fn p2p_cost(volume: f64, level: usize, platform: &Platform) -> Result<CostVector> {
    let (w, s) = p2p_counts(volume, level, platform)?;
    Ok(CostVector::priced(w, s, 0.0, platform))
}

/// Broadcast among `fanout` level-`level` nodes, as `ceil(log2 fanout)`
/// point-to-point rounds.
pub fn bcast_cost(volume: f64, level: usize, fanout: usize, platform: &Platform) -> Result<CostVector> {
    if fanout == 0 {
        return Err(Error::Config("broadcast fanout must be >= 1".into()));
    }
    let one = p2p_cost(volume, level, platform)?;
    Ok(one.scale(ceil_log2(fanout) as f64))
}

/// Communication lower bounds at one level for an `n x n` dense
/// factorization, asymptotic constants taken as 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBounds {
    pub words_bound: f64,
    pub messages_bound: f64,
    pub memory_bound: f64,
}

pub fn lower_bounds(n: usize, level: usize, platform: &Platform) -> Result<LowerBounds> {
    platform.check_level(level)?;
    if n == 0 {
        return Err(Error::Config("matrix order must be >= 1".into()));
    }
    let n2 = (n as f64) * (n as f64);
    let sp = platform.subtree_nodes(level) as f64;
    let root = sp.sqrt();
    let b = platform.level(level).buffer_words as f64;
    Ok(LowerBounds {
        words_bound: n2 / root,
        messages_bound: n2 / (b * root),
        memory_bound: n2 / sp,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level() -> Platform {
        // P_1 = 4, B_2 = 1000: level 2 is bufferized (M_2 = 4 M_1).
        let spec = PlatformSpec {
            levels: vec![
                LevelSpec {
                    p_rows: 2,
                    p_cols: 2,
                    alpha: 1e-9,
                    beta: 1e-10,
                    buffer_words: 1000,
                    network: NetworkKind::FullyPipelined,
                },
                LevelSpec {
                    p_rows: 2,
                    p_cols: 2,
                    alpha: 1e-6,
                    beta: 1e-9,
                    buffer_words: 1000,
                    network: NetworkKind::Forward,
                },
            ],
            mem_level1_words: 1000,
            gamma: 1e-10,
        };
        validate(spec).unwrap()
    }

    #[test]
    fn derived_tables() {
        let p = validate(PlatformSpec::fully_pipelined(&[(2, 2), (1, 2), (2, 4)], 100, 1e-9, 1e-9, 1e-9)).unwrap();
        assert_eq!(p.total_nodes(), 4 * 2 * 8);
        assert_eq!(p.subtree_nodes(1), 64);
        assert_eq!(p.subtree_nodes(3), 8);
        assert_eq!(p.aggregated_memory(1), 100.0);
        assert_eq!(p.aggregated_memory(3), 800.0);
        assert_eq!(p.level(2).buffer_words, 400);
        assert_eq!(p.level(3).buffer_words, 800);
    }

    #[test]
    fn single_level_is_valid() {
        let p = validate(PlatformSpec::fully_pipelined(&[(3, 5)], 77, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(p.total_nodes(), 15);
        assert_eq!(p.subtree_nodes(1), 15);
    }

    #[test]
    fn buffer_below_previous_level_is_rejected() {
        let mut spec = PlatformSpec::fully_pipelined(&[(2, 2), (2, 2)], 1000, 1e-9, 1e-9, 1e-9);
        spec.levels[1].buffer_words = 500;
        spec.levels[1].network = NetworkKind::Bufferized;
        assert!(matches!(validate(spec), Err(Error::BufferConstraintViolation { level: 2, .. })));
    }

    #[test]
    fn network_kind_must_match_buffer() {
        let mut spec = PlatformSpec::fully_pipelined(&[(2, 2), (2, 2)], 1000, 1e-9, 1e-9, 1e-9);
        spec.levels[1].buffer_words = 2000;
        assert!(matches!(validate(spec.clone()), Err(Error::NetworkKindMismatch { level: 2, .. })));
        spec.levels[1].network = NetworkKind::Forward;
        assert!(matches!(validate(spec.clone()), Err(Error::NetworkKindMismatch { level: 2, .. })));
        spec.levels[1].network = NetworkKind::Bufferized;
        assert!(validate(spec).is_ok());
    }

    #[test]
    fn empty_and_degenerate_specs() {
        let spec = PlatformSpec {
            levels: vec![],
            mem_level1_words: 1,
            gamma: 1.0,
        };
        assert_eq!(validate(spec), Err(Error::EmptyPlatform));
        let mut spec = PlatformSpec::fully_pipelined(&[(2, 2)], 10, 1.0, 1.0, 1.0);
        spec.levels[0].alpha = 0.0;
        assert!(matches!(validate(spec), Err(Error::InvalidLevel { level: 1, .. })));
        let mut spec = PlatformSpec::fully_pipelined(&[(2, 2)], 10, 1.0, 1.0, 1.0);
        spec.levels[0].buffer_words = 5;
        assert!(matches!(validate(spec), Err(Error::NetworkKindMismatch { level: 1, .. })));
    }

    #[test]
    fn p2p_single_level() {
        let p = validate(PlatformSpec::fully_pipelined(&[(2, 2)], 10_000, 2e-6, 3e-9, 1.0)).unwrap();
        let c = p2p_cost(500.0, 1, &p).unwrap();
        assert_eq!(c.words, vec![500.0]);
        assert_eq!(c.messages, vec![1.0]);
        assert_eq!(c.comm_time[0], 2e-6 + 500.0 * 3e-9);
    }

    #[test]
    fn p2p_two_levels_counts() {
        let spec = PlatformSpec {
            levels: vec![
                LevelSpec {
                    p_rows: 2,
                    p_cols: 2,
                    alpha: 1e-9,
                    beta: 1e-10,
                    buffer_words: 4000,
                    network: NetworkKind::FullyPipelined,
                },
                LevelSpec {
                    p_rows: 2,
                    p_cols: 2,
                    alpha: 1e-6,
                    beta: 1e-9,
                    buffer_words: 4000,
                    network: NetworkKind::Forward,
                },
            ],
            mem_level1_words: 4000,
            gamma: 1e-10,
        };
        // W_1 = 2000 must fit in M_1 = B_1, so B_2 >= 2000; a forward
        // network with B_2 = 4000 needs two messages.
        let p = validate(spec).unwrap();
        let c = p2p_cost(8000.0, 2, &p).unwrap();
        assert_eq!(c.words, vec![2000.0, 8000.0]);
        assert_eq!(c.messages, vec![1.0, 2.0]);
    }

    #[test]
    fn p2p_zero_volume_and_errors() {
        let p = two_level();
        let c = p2p_cost(0.0, 2, &p).unwrap();
        assert!(c.words.iter().chain(&c.messages).all(|&x| x == 0.0));
        assert!(matches!(p2p_cost(1.0, 3, &p), Err(Error::LevelOutOfRange { .. })));
        assert!(matches!(p2p_cost(1.0, 0, &p), Err(Error::LevelOutOfRange { .. })));
        assert!(matches!(p2p_cost(8000.0, 2, &p), Err(Error::MemoryOverflow { .. })));
    }

    #[test]
    fn bcast_rounds() {
        let p = two_level();
        assert_eq!(bcast_cost(100.0, 2, 1, &p).unwrap(), CostVector::zero(2));
        assert_eq!(bcast_cost(100.0, 2, 2, &p).unwrap(), p2p_cost(100.0, 2, &p).unwrap());
        let eight = bcast_cost(100.0, 2, 8, &p).unwrap();
        let one = p2p_cost(100.0, 2, &p).unwrap();
        assert_eq!(eight.words, one.scale(3.0).words);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1), 0);
    }

    #[test]
    fn lower_bound_substitution() {
        let p = validate(PlatformSpec::fully_pipelined(&[(4, 4)], 65536, 1.0, 1.0, 1.0)).unwrap();
        let lb = lower_bounds(1024, 1, &p).unwrap();
        assert_eq!(lb.words_bound, 262144.0);
        assert_eq!(lb.memory_bound, 65536.0);
        // B_1 = M_1 = n^2 / P gives the sqrt(P) latency form.
        assert_eq!(lb.messages_bound, 4.0);
        let one = validate(PlatformSpec::fully_pipelined(&[(1, 1)], 10, 1.0, 1.0, 1.0)).unwrap();
        assert_eq!(lower_bounds(7, 1, &one).unwrap().words_bound, 49.0);
    }

    #[test]
    fn bundled_platforms() {
        let h = Platform::hopper();
        assert_eq!(h.depth(), 3);
        assert_eq!(h.nodes(1), 12);
        assert_eq!(h.nodes(2), 2);
        assert_eq!(h.nodes(3), 9350);
        assert!((h.level(1).beta - 4.04e-10).abs() < 1e-12);
        let e = Platform::exascale();
        assert_eq!(e.total_nodes(), 1024 * 32 * 32768);
        assert_eq!(e.level(3).alpha, 1.5e-7);
        let round = Platform::from_json_str(&serde_json::to_string(&e.to_config()).unwrap()).unwrap();
        assert_eq!(round.total_nodes(), e.total_nodes());
    }
}
