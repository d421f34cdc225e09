use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::platform::Platform;

/// Panel widths `b_1..b_l`, one per level, innermost first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSchedule {
    blocks: Vec<usize>,
}

impl BlockSchedule {
    pub fn new(blocks: Vec<usize>) -> Result<Self> {
        if blocks.is_empty() || blocks.contains(&0) {
            return Err(Error::ShapeError(format!("block sizes must be positive, got {blocks:?}")));
        }
        for r in 1..blocks.len() {
            if blocks[r] % blocks[r - 1] != 0 {
                return Err(Error::ShapeError(format!(
                    "b_{} = {} does not divide b_{} = {}",
                    r,
                    blocks[r - 1],
                    r + 1,
                    blocks[r]
                )));
            }
        }
        Ok(BlockSchedule { blocks })
    }

    pub fn levels(&self) -> usize {
        self.blocks.len()
    }

    /// `b_r`, 1-based.
    pub fn block(&self, r: usize) -> usize {
        self.blocks[r - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.blocks
    }

    /// Checks the schedule against an `m x n` problem on `platform`.
    pub fn check(&self, m: usize, n: usize, platform: &Platform) -> Result<()> {
        let l = platform.depth();
        if self.blocks.len() != l {
            return Err(Error::PlatformTooDeep {
                levels: l,
                blocks: self.blocks.len(),
            });
        }
        if m < n {
            return Err(Error::ShapeError(format!("need m >= n, got {m}x{n}")));
        }
        let top = self.block(l);
        if n % top != 0 {
            return Err(Error::ShapeError(format!("b_{l} = {top} does not divide n = {n}")));
        }
        let pr = platform.level(l).p_rows;
        if n > 0 && m / pr < top {
            return Err(Error::ShapeError(format!(
                "leaf row count {m}/{pr} is below the block size {top}"
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::{validate, PlatformSpec};

    #[test]
    fn chain_and_checks() {
        assert!(BlockSchedule::new(vec![4, 8]).is_ok());
        assert!(matches!(BlockSchedule::new(vec![3, 8]), Err(Error::ShapeError(_))));
        assert!(BlockSchedule::new(vec![]).is_err());
        let p = validate(PlatformSpec::fully_pipelined(&[(2, 2), (2, 2)], 1 << 20, 1e-6, 1e-9, 1e-10)).unwrap();
        let s = BlockSchedule::new(vec![4, 8]).unwrap();
        assert!(s.check(64, 32, &p).is_ok());
        assert!(matches!(s.check(64, 36, &p), Err(Error::ShapeError(_))));
        assert!(matches!(s.check(8, 8, &p), Err(Error::ShapeError(_))));
        let one = BlockSchedule::new(vec![4]).unwrap();
        assert_eq!(one.check(64, 32, &p), Err(Error::PlatformTooDeep { levels: 2, blocks: 1 }));
    }
}
