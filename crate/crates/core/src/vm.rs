//! Simulated hierarchical machine.
//!
//! Algorithms record communications and flops into a [`Ledger`]. The ledger
//! keeps a stack of regions: a sequential region sums what happens inside
//! it, a parallel region keeps the component-wise maximum over its branches
//! for the critical path and the (multiplicity-scaled) sum for aggregate
//! volumes. Symmetric parallel work is simulated by one representative
//! branch opened with the branch count as multiplicity.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::platform::{ceil_log2, p2p_counts, CostVector, Platform};

pub const LEDGER_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub words: Vec<f64>,
    pub messages: Vec<f64>,
    pub aggregate_words: Vec<f64>,
    pub flops: f64,
    pub aggregate_flops: f64,
}

impl Counts {
    pub fn zero(depth: usize) -> Self {
        Counts {
            words: vec![0.0; depth],
            messages: vec![0.0; depth],
            aggregate_words: vec![0.0; depth],
            flops: 0.0,
            aggregate_flops: 0.0,
        }
    }

    fn add(&mut self, o: &Counts) {
        for k in 0..self.words.len() {
            self.words[k] += o.words[k];
            self.messages[k] += o.messages[k];
            self.aggregate_words[k] += o.aggregate_words[k];
        }
        self.flops += o.flops;
        self.aggregate_flops += o.aggregate_flops;
    }

    fn branch(&mut self, o: &Counts) {
        for k in 0..self.words.len() {
            self.words[k] = self.words[k].max(o.words[k]);
            self.messages[k] = self.messages[k].max(o.messages[k]);
            self.aggregate_words[k] += o.aggregate_words[k];
        }
        self.flops = self.flops.max(o.flops);
        self.aggregate_flops += o.aggregate_flops;
    }

    fn scale_aggregate(&mut self, m: f64) {
        for a in &mut self.aggregate_words {
            *a *= m;
        }
        self.aggregate_flops *= m;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegionKind {
    Sequential,
    Parallel { multiplicity: usize },
}

#[derive(Debug, Clone)]
struct Frame {
    kind: RegionKind,
    acc: Counts,
}

/// One simulated point-to-point transfer (broadcast rounds included).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P2pEvent {
    pub tag: String,
    pub level: usize,
    pub volume: f64,
    pub words: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Ledger {
    platform: Platform,
    stack: Vec<Frame>,
    events: Option<Vec<P2pEvent>>,
}

impl Ledger {
    pub fn new(platform: &Platform) -> Self {
        Ledger {
            platform: platform.clone(),
            stack: vec![Frame {
                kind: RegionKind::Sequential,
                acc: Counts::zero(platform.depth()),
            }],
            events: None,
        }
    }

    /// Same as [`Ledger::new`] but keeps every transfer for inspection.
    pub fn with_event_log(platform: &Platform) -> Self {
        let mut l = Self::new(platform);
        l.events = Some(Vec::new());
        l
    }

    pub fn platform(&self) -> &Platform {
        &self.platform
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn events(&self) -> &[P2pEvent] {
        self.events.as_deref().unwrap_or(&[])
    }

    fn record(&mut self, c: Counts) {
        let top = self.stack.last_mut().expect("root frame");
        match top.kind {
            RegionKind::Sequential => top.acc.add(&c),
            RegionKind::Parallel { .. } => top.acc.branch(&c),
        }
    }

    fn log(&mut self, tag: &str, level: usize, volume: f64, words: &[f64]) {
        if let Some(ev) = self.events.as_mut() {
            ev.push(P2pEvent {
                tag: tag.to_owned(),
                level,
                volume,
                words: words.to_vec(),
            });
        }
    }

    pub fn record_p2p(&mut self, volume: f64, level: usize) -> Result<()> {
        self.record_p2p_tagged("p2p", volume, level)
    }

    pub fn record_p2p_tagged(&mut self, tag: &str, volume: f64, level: usize) -> Result<()> {
        let (words, messages) = p2p_counts(volume, level, &self.platform)?;
        if volume == 0.0 {
            return Ok(());
        }
        self.log(tag, level, volume, &words);
        let mut c = Counts::zero(self.platform.depth());
        for k in 0..level {
            c.aggregate_words[k] = volume;
        }
        c.words = words;
        c.messages = messages;
        self.record(c);
        Ok(())
    }

    /// Transfer of `per_pe` words from every level-1 element of a level-`level`
    /// node.
    pub fn record_p2p_pe(&mut self, per_pe: f64, level: usize) -> Result<()> {
        self.platform.check_level(level)?;
        self.record_p2p(per_pe * self.platform.elements_below(level) as f64, level)
    }

    pub fn record_bcast(&mut self, volume: f64, level: usize, fanout: usize) -> Result<()> {
        self.record_bcast_tagged("bcast", volume, level, fanout)
    }

    pub fn record_bcast_tagged(&mut self, tag: &str, volume: f64, level: usize, fanout: usize) -> Result<()> {
        if fanout == 0 {
            return Err(Error::Config("broadcast fanout must be >= 1".into()));
        }
        let (words, messages) = p2p_counts(volume, level, &self.platform)?;
        let rounds = ceil_log2(fanout) as f64;
        if volume == 0.0 || rounds == 0.0 {
            return Ok(());
        }
        self.log(tag, level, volume, &words);
        let mut c = Counts::zero(self.platform.depth());
        for k in 0..level {
            c.aggregate_words[k] = volume * (fanout - 1) as f64;
        }
        c.words = words.iter().map(|w| w * rounds).collect();
        c.messages = messages.iter().map(|m| m * rounds).collect();
        self.record(c);
        Ok(())
    }

    pub fn record_flops(&mut self, f: f64) {
        if f == 0.0 {
            return;
        }
        let mut c = Counts::zero(self.platform.depth());
        c.flops = f;
        c.aggregate_flops = f;
        self.record(c);
    }

    pub fn open_sequential(&mut self) {
        self.stack.push(Frame {
            kind: RegionKind::Sequential,
            acc: Counts::zero(self.platform.depth()),
        });
    }

    pub fn open_parallel(&mut self, multiplicity: usize) {
        self.stack.push(Frame {
            kind: RegionKind::Parallel {
                multiplicity: multiplicity.max(1),
            },
            acc: Counts::zero(self.platform.depth()),
        });
    }

    pub fn close(&mut self) -> Result<()> {
        if self.stack.len() <= 1 {
            return Err(Error::NoOpenRegion);
        }
        let mut f = self.stack.pop().expect("checked");
        if let RegionKind::Parallel { multiplicity } = f.kind {
            f.acc.scale_aggregate(multiplicity as f64);
        }
        self.record(f.acc);
        Ok(())
    }

    pub fn sequential<T>(&mut self, body: impl FnOnce(&mut Ledger) -> Result<T>) -> Result<T> {
        self.open_sequential();
        let out = body(self);
        self.close()?;
        out
    }

    pub fn parallel<T>(
        &mut self,
        multiplicity: usize,
        body: impl FnOnce(&mut Ledger) -> Result<T>,
    ) -> Result<T> {
        self.open_parallel(multiplicity);
        let out = body(self);
        self.close()?;
        out
    }

    /// Totals recorded so far; requires every region to be closed.
    pub fn counts(&self) -> Result<&Counts> {
        if self.stack.len() != 1 {
            return Err(Error::UnbalancedRegions {
                open: self.stack.len() - 1,
            });
        }
        Ok(&self.stack[0].acc)
    }

    pub fn price(&self) -> Result<CostVector> {
        let c = self.counts()?;
        Ok(CostVector::priced(
            c.words.clone(),
            c.messages.clone(),
            c.flops,
            &self.platform,
        ))
    }

    /// Appends another closed ledger sequentially.
    pub fn append(&mut self, other: &Ledger) -> Result<()> {
        let c = other.counts()?.clone();
        self.record(c);
        if let (Some(mine), Some(theirs)) = (self.events.as_mut(), other.events.as_ref()) {
            mine.extend(theirs.iter().cloned());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<serde_json::Value> {
        let c = self.counts()?;
        let mut levels = serde_json::Map::new();
        for k in 0..c.words.len() {
            levels.insert(
                (k + 1).to_string(),
                json!({
                    "words": c.words[k],
                    "messages": c.messages[k],
                    "aggregate_words": c.aggregate_words[k],
                }),
            );
        }
        Ok(json!({
            "schema_version": LEDGER_SCHEMA_VERSION,
            "levels": levels,
            "flops": c.flops,
            "aggregate_flops": c.aggregate_flops,
        }))
    }
}

/// Group of nodes spread over several levels, innermost first: `(count,
/// level)` pairs. A flat index `i` in the team has digit `i mod count_0` at
/// the innermost level, and so on outward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Team {
    parts: Vec<(usize, usize)>,
}

impl Team {
    pub fn new(parts: Vec<(usize, usize)>) -> Self {
        Team {
            parts: parts.into_iter().filter(|&(c, _)| c > 1).collect(),
        }
    }

    pub fn single(count: usize, level: usize) -> Self {
        Self::new(vec![(count, level)])
    }

    pub fn size(&self) -> usize {
        self.parts.iter().map(|&(c, _)| c).product()
    }

    pub fn parts(&self) -> &[(usize, usize)] {
        &self.parts
    }

    /// Level of the link joining members `i` and `i + d`, for `d` a power of
    /// two below the team size.
    pub fn level_at_distance(&self, d: usize) -> usize {
        let mut span = 1;
        for &(c, level) in &self.parts {
            span *= c;
            if d < span {
                return level;
            }
        }
        self.parts.last().map_or(1, |&(_, l)| l)
    }

    /// Broadcast of `volume` words across the team, one tree per level.
    pub fn bcast(&self, ledger: &mut Ledger, tag: &str, volume: f64) -> Result<()> {
        for &(c, level) in &self.parts {
            ledger.record_bcast_tagged(tag, volume, level, c)?;
        }
        Ok(())
    }
}
