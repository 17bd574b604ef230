use std::collections::HashMap;

use rand::Rng;

use super::episode::Episode;
use crate::envs::{EnvSpec, EnvState, Problem};
use crate::error::{Error, Result};

/// One stored step: the state, the action taken there and the legal-action
/// mask it was chosen under.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: EnvState,
    pub action: usize,
    pub mask: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub ctx_seed: u64,
    pub steps: Vec<Transition>,
}

impl Solution {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn actions(&self) -> Vec<usize> {
        self.steps.iter().map(|t| t.action).collect()
    }

    fn from_episode(e: &Episode) -> Self {
        Solution {
            ctx_seed: e.ctx_seed,
            steps: e
                .states
                .iter()
                .zip(&e.actions)
                .zip(&e.masks)
                .map(|((s, &a), m)| Transition {
                    state: s.clone(),
                    action: a,
                    mask: m.clone(),
                })
                .collect(),
        }
    }
}

/// Up to `k` shortest solutions per problem. Among equal lengths the
/// earliest found is kept.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionHistory {
    k: usize,
    order: Vec<String>,
    index: HashMap<String, usize>,
    solutions: Vec<Vec<Solution>>,
}

/// A sampled training example: the solution's context seed and one of its
/// steps.
#[derive(Clone, Copy, Debug)]
pub struct Draw<'a> {
    pub problem: &'a str,
    pub ctx_seed: u64,
    pub step: &'a Transition,
}

impl SolutionHistory {
    pub fn new(k: usize) -> Self {
        SolutionHistory {
            k: k.max(1),
            order: vec![],
            index: HashMap::new(),
            solutions: vec![],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Problems with at least one stored solution.
    pub fn solved_count(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, problem_id: &str) -> bool {
        self.index.contains_key(problem_id)
    }

    pub fn get(&self, problem_id: &str) -> &[Solution] {
        self.index.get(problem_id).map_or(&[], |&i| &self.solutions[i])
    }

    /// Solved problems in the order they were first solved.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[Solution])> {
        self.order.iter().map(String::as_str).zip(self.solutions.iter().map(Vec::as_slice))
    }

    pub fn shortest(&self, problem_id: &str) -> Option<usize> {
        self.get(problem_id).first().map(Solution::len)
    }

    /// Stores a solved episode if it is among the `k` shortest. Returns
    /// whether it was kept.
    pub fn insert(&mut self, e: &Episode) -> bool {
        // a zero-step solution has nothing to imitate
        if !e.solved() || e.is_empty() {
            return false;
        }
        let i = match self.index.get(&e.problem_id) {
            Some(&i) => i,
            None => {
                self.index.insert(e.problem_id.clone(), self.order.len());
                self.order.push(e.problem_id.clone());
                self.solutions.push(vec![]);
                self.order.len() - 1
            }
        };
        let list = &mut self.solutions[i];
        let pos = list.partition_point(|s| s.len() <= e.len());
        if pos >= self.k {
            return false;
        }
        list.insert(pos, Solution::from_episode(e));
        list.truncate(self.k);
        true
    }

    /// Two-stage draw: a solved problem uniformly, then a step uniformly
    /// from all of that problem's stored solutions.
    pub fn sample_stratified<'a, R: Rng>(&'a self, batch: usize, rng: &mut R) -> Result<Vec<Draw<'a>>> {
        if batch == 0 {
            return Ok(vec![]);
        }
        if self.is_empty() {
            return Err(Error::Invalid("cannot sample from an empty history".into()));
        }
        Ok((0..batch)
            .map(|_| {
                let p = rng.random_range(0..self.order.len());
                let sols = &self.solutions[p];
                let total: usize = sols.iter().map(Solution::len).sum();
                let mut j = rng.random_range(0..total);
                let sol = sols
                    .iter()
                    .find(|s| {
                        if j < s.len() {
                            true
                        } else {
                            j -= s.len();
                            false
                        }
                    })
                    .expect("index within total");
                Draw {
                    problem: &self.order[p],
                    ctx_seed: sol.ctx_seed,
                    step: &sol.steps[j],
                }
            })
            .collect())
    }

    /// Number of stored solutions that fail to replay to a solved state.
    pub fn count_invalid(&self, env: &EnvSpec, problems: &HashMap<&str, &Problem>) -> usize {
        self.iter()
            .flat_map(|(id, sols)| sols.iter().map(move |s| (id, s)))
            .filter(|(id, s)| {
                let Some(p) = problems.get(id) else { return true };
                !matches!(env.replay(p, &s.actions()), Ok(r) if env.is_solved(&r.next))
            })
            .count()
    }
}

/// Keeps `e` in `h` if it is solved and among the `k` shortest.
pub fn update_history(h: &mut SolutionHistory, e: &Episode) -> bool {
    h.insert(e)
}

pub fn sample_batch_stratified<'a, R: Rng>(h: &'a SolutionHistory, batch: usize, rng: &mut R) -> Result<Vec<Draw<'a>>> {
    h.sample_stratified(batch, rng)
}

/// Index of a problem drawn with weight `bias` if it has no stored
/// solution and weight 1 otherwise.
pub fn sample_problem_biased<R: Rng>(problems: &[Problem], h: &SolutionHistory, bias: f64, rng: &mut R) -> usize {
    assert!(!problems.is_empty(), "no problems to sample from");
    let weight = |p: &Problem| if h.contains(&p.id) { 1.0 } else { bias };
    let total: f64 = problems.iter().map(weight).sum();
    let mut u = rng.random::<f64>() * total;
    for (i, p) in problems.iter().enumerate() {
        u -= weight(p);
        if u < 0.0 {
            return i;
        }
    }
    problems.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Outcome;

    fn ep(id: &str, len: usize, tag: u64) -> Episode {
        let env = EnvSpec::new(crate::envs::EnvKind::Ra);
        let s = env.reset(&Problem::new(id, crate::term::Term::numeral(1))).unwrap();
        Episode {
            problem_id: id.into(),
            ctx_seed: tag,
            states: vec![s; len + 1],
            actions: vec![0; len],
            masks: vec![vec![true; 9]; len],
            probs: vec![1.0; len],
            rewards: vec![0.0; len],
            outcome: Outcome::Solved,
        }
    }

    fn lengths(h: &SolutionHistory, id: &str) -> Vec<usize> {
        h.get(id).iter().map(Solution::len).collect()
    }

    #[test]
    fn keeps_k_shortest() {
        let mut h = SolutionHistory::new(1);
        h.insert(&ep("p", 7, 0));
        h.insert(&ep("p", 5, 0));
        assert_eq!(lengths(&h, "p"), vec![5]);
        h.insert(&ep("p", 7, 0));
        assert_eq!(lengths(&h, "p"), vec![5]);

        let mut h = SolutionHistory::new(2);
        for l in [9, 5, 7] {
            h.insert(&ep("p", l, 0));
        }
        assert_eq!(lengths(&h, "p"), vec![5, 7]);
    }

    #[test]
    fn earliest_wins_ties() {
        let mut h = SolutionHistory::new(1);
        h.insert(&ep("p", 4, 1));
        assert!(!h.insert(&ep("p", 4, 2)));
        assert_eq!(h.get("p")[0].ctx_seed, 1);
    }

    #[test]
    fn unsolved_is_ignored() {
        let mut h = SolutionHistory::new(1);
        let mut e = ep("p", 3, 0);
        e.outcome = Outcome::StepLimit;
        assert!(!h.insert(&e));
        assert!(h.is_empty());
        assert!(h.sample_stratified(1, &mut rand::rng()).is_err());
        assert!(h.sample_stratified(0, &mut rand::rng()).unwrap().is_empty());
    }
}
