use std::ops::Range;

use crate::error::{Result, SmcError};

/// Per-level sample sizes `N_l` of a multilevel ensemble.
///
/// Level `l` owns the contiguous index block `offset(l)..offset(l + 1)`; the
/// blocks partition `0..total_size()`. The canonical construction is
/// [`LevelSchedule::new`] with multipliers `c_0..c_L` (`c_L == 1`) and a base
/// size `N`, giving `N_l = c_l * N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelSchedule {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
}

impl LevelSchedule {
    pub fn new(multipliers: &[usize], base_size: usize) -> Result<Self> {
        match multipliers.last() {
            None => return Err(SmcError::Config("schedule needs at least one level".into())),
            Some(&c) if c != 1 => return Err(SmcError::Config(format!("top-level multiplier must be 1, got {c}"))),
            _ => {}
        }
        if multipliers.contains(&0) {
            return Err(SmcError::Config("level multipliers must be positive".into()));
        }
        if base_size == 0 {
            return Err(SmcError::Config("base size must be positive".into()));
        }
        Ok(Self::build(multipliers.iter().map(|c| c * base_size).collect()))
    }

    /// Classical single-level (bootstrap filter) schedule.
    pub fn single(size: usize) -> Result<Self> {
        Self::new(&[1], size)
    }

    /// Arbitrary level sizes. Upper levels may be empty, which expresses the
    /// truncated allocations (`N_L = 0`) used in cost sweeps; level 0 may not.
    pub fn from_sizes(sizes: Vec<usize>) -> Result<Self> {
        match sizes.first() {
            None => Err(SmcError::Config("schedule needs at least one level".into())),
            Some(0) => Err(SmcError::Config("level 0 must hold at least one particle".into())),
            Some(_) => Ok(Self::build(sizes)),
        }
    }

    fn build(sizes: Vec<usize>) -> Self {
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        LevelSchedule { sizes, offsets }
    }

    pub fn num_levels(&self) -> usize {
        self.sizes.len()
    }

    /// Index `L` of the top level.
    pub fn top_level(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn level_size(&self, level: usize) -> usize {
        self.sizes[level]
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Top-level size, the `N` of `N_l = c_l * N`.
    pub fn base_size(&self) -> usize {
        self.sizes[self.top_level()]
    }

    /// Integer multipliers, when every level size is a multiple of a nonzero base size.
    pub fn multipliers(&self) -> Option<Vec<usize>> {
        let n = self.base_size();
        if n == 0 || self.sizes.iter().any(|s| s % n != 0) {
            return None;
        }
        Some(self.sizes.iter().map(|s| s / n).collect())
    }

    pub fn total_size(&self) -> usize {
        self.offsets[self.sizes.len()]
    }

    /// Number of particles on levels below `level`.
    pub fn offset(&self, level: usize) -> usize {
        self.offsets[level]
    }

    pub fn range(&self, level: usize) -> Range<usize> {
        self.offsets[level]..self.offsets[level + 1]
    }

    pub fn level_of(&self, index: usize) -> usize {
        assert!(index < self.total_size(), "particle index out of range");
        self.offsets.partition_point(|&o| o <= index) - 1
    }

    /// Same level proportions multiplied by `factor`, rounding to the nearest
    /// integer and keeping level 0 nonempty.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let sizes: Vec<usize> = self
            .sizes
            .iter()
            .map(|&s| (s as f64 * factor).round() as usize)
            .collect();
        Self::from_sizes(sizes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_level_index_sets() {
        let s = LevelSchedule::new(&[4, 1], 2).unwrap();
        assert_eq!(s.total_size(), 10);
        assert_eq!(s.range(0), 0..8);
        assert_eq!(s.range(1), 8..10);
        assert_eq!(s.level_of(7), 0);
        assert_eq!(s.level_of(8), 1);
        assert_eq!(s.multipliers(), Some(vec![4, 1]));
    }

    #[test]
    fn rejects_bad_multipliers() {
        assert!(LevelSchedule::new(&[4, 2], 2).is_err());
        assert!(LevelSchedule::new(&[0, 1], 2).is_err());
        assert!(LevelSchedule::new(&[1], 0).is_err());
        assert!(LevelSchedule::new(&[], 3).is_err());
    }

    #[test]
    fn truncated_top_level() {
        let s = LevelSchedule::from_sizes(vec![5, 0]).unwrap();
        assert_eq!(s.total_size(), 5);
        assert_eq!(s.range(1), 5..5);
        assert_eq!(s.multipliers(), None);
        assert!(LevelSchedule::from_sizes(vec![0, 3]).is_err());
    }

    proptest! {
        #[test]
        fn levels_partition_indices(mults in prop::collection::vec(1usize..6, 0..4), n in 1usize..7) {
            let mut c = mults.clone();
            c.push(1);
            let s = LevelSchedule::new(&c, n).unwrap();
            let mut seen = vec![0u8; s.total_size()];
            for (l, &cl) in c.iter().enumerate() {
                prop_assert_eq!(s.range(l).len(), cl * n);
                prop_assert!(s.offset(l) <= s.offset(l + 1));
                for i in s.range(l) {
                    seen[i] += 1;
                    prop_assert_eq!(s.level_of(i), l);
                }
            }
            prop_assert!(seen.iter().all(|&k| k == 1));
        }
    }
}
