//! Model-free reference algorithms: arithmetic evaluation, the fixed
//! leftmost rewriting strategy, the polynomial normaliser and difficulty
//! scores.

mod poly;
mod ra;

use serde::{Deserialize, Serialize};

pub use poly::{
    eval_poly, poly_derivation, poly_normalize, poly_normalize_capped, poly_of, Poly, PolyDerivation,
    DEFAULT_VALUE_CAP,
};
pub use ra::{eval_ra, lopl_next, lopl_solve, lopl_solve_with, LoplOrder, LoplSolution};

use crate::envs::{EnvKind, Problem};
use crate::error::OracleError;

#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Low,
    Medium,
    High,
}

/// Category boundaries on oracle rewrite counts.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Counts below this are low.
    pub low_below: usize,
    /// Counts up to and including this (and not low) are medium.
    pub medium_max: usize,
    /// Oracle rewrite budget; exceeding it counts as high.
    pub limit: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            low_below: 90,
            medium_max: 130,
            limit: 5000,
        }
    }
}

impl Thresholds {
    pub fn categorize(&self, steps: Option<usize>) -> Category {
        match steps {
            Some(s) if s < self.low_below => Category::Low,
            Some(s) if s <= self.medium_max => Category::Medium,
            _ => Category::High,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Difficulty {
    /// Oracle rewrite count; `None` when the oracle ran out of budget.
    pub steps: Option<usize>,
    pub category: Category,
}

pub fn difficulty(problem: &Problem, env: EnvKind) -> Result<Difficulty, OracleError> {
    difficulty_with(problem, env, &Thresholds::default())
}

/// RA: rewrites of the fixed leftmost strategy. POLY: rewrites of the
/// normaliser's derivation.
pub fn difficulty_with(problem: &Problem, env: EnvKind, th: &Thresholds) -> Result<Difficulty, OracleError> {
    let steps = match env {
        EnvKind::Ra => lopl_solve(&problem.term, th.limit).map(|s| s.steps),
        EnvKind::Poly => {
            let d = poly_derivation(&problem.term, DEFAULT_VALUE_CAP)?;
            Some(d.steps()).filter(|&s| s <= th.limit)
        }
        EnvKind::Aim => return Err(OracleError::Unsupported("no difficulty oracle for AIM".into())),
    };
    Ok(Difficulty {
        steps,
        category: th.categorize(steps),
    })
}
