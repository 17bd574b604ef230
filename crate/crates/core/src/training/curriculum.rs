use serde::{Deserialize, Serialize};

/// Difficulty-ordered levels of `block` problems. The next level is added
/// once the greedy success rate on the active set reaches the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub total: usize,
    /// 0 means a single level holding every problem.
    pub block: usize,
    pub threshold: f64,
    /// Active levels, starting at 1.
    pub level: usize,
    /// Levels whose success threshold has been met.
    pub completed: usize,
}

impl CurriculumState {
    pub fn new(total: usize, block: usize, threshold: f64) -> Self {
        CurriculumState {
            total,
            block,
            threshold,
            level: 1,
            completed: 0,
        }
    }

    pub fn num_levels(&self) -> usize {
        if self.block == 0 || self.total == 0 {
            1
        } else {
            self.total.div_ceil(self.block)
        }
    }

    /// Number of leading problems currently trained on.
    pub fn active(&self) -> usize {
        if self.block == 0 {
            self.total
        } else {
            (self.block * self.level).min(self.total)
        }
    }

    pub fn is_complete(&self) -> bool {
        self.completed >= self.num_levels()
    }

    /// Records one evaluation. Returns true when a new level was added.
    pub fn observe(&mut self, success: f64) -> bool {
        if self.is_complete() || success < self.threshold {
            return false;
        }
        self.completed += 1;
        if self.level < self.num_levels() {
            self.level += 1;
            true
        } else {
            false
        }
    }
}
