use std::collections::HashMap;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::envs::{EnvSpec, EnvState, Outcome, Problem};
use crate::error::NeuralError;
use crate::neural::{EpisodeContext, TreePolicy};
use crate::scalar::Scalar;
use crate::term::{Path, Term};

/// How a rollout picks actions.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum Selection {
    /// Most probable legal action; ties go to the lowest id.
    Greedy,
    /// Sample from the policy; with probability `noise` take a uniformly
    /// random legal action instead.
    Sample { noise: f64 },
}

/// One rollout. `states` has one more entry than `actions`; step `i` takes
/// `actions[i]` in `states[i]` under `masks[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub problem_id: String,
    /// Seed of the episode's fresh-variable context.
    pub ctx_seed: u64,
    pub states: Vec<EnvState>,
    pub actions: Vec<usize>,
    pub masks: Vec<Vec<bool>>,
    /// Probability the behaviour policy gave the taken action, noise
    /// included.
    pub probs: Vec<f64>,
    pub rewards: Vec<f64>,
    pub outcome: Outcome,
}

impl Episode {
    /// Number of env steps, cursor moves included.
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn solved(&self) -> bool {
        self.outcome == Outcome::Solved
    }

    pub fn final_state(&self) -> &EnvState {
        self.states.last().expect("an episode has a start state")
    }
}

/// Runs `policy` on `problem` until it is solved, the step limit is hit or
/// no action is legal. A dead end counts as a failure.
pub fn run_episode<T: Scalar, R: Rng>(
    env: &EnvSpec,
    problem: &Problem,
    policy: &TreePolicy<T>,
    ctx_seed: u64,
    selection: Selection,
    rng: &mut R,
) -> Result<Episode, NeuralError> {
    let ctx = EpisodeContext::<T>::new(ctx_seed, policy.config().n);
    let start = env.reset(problem)?;
    let mut ep = Episode {
        problem_id: problem.id.clone(),
        ctx_seed,
        outcome: if env.is_solved(&start) { Outcome::Solved } else { Outcome::Ongoing },
        states: vec![start],
        actions: vec![],
        masks: vec![],
        probs: vec![],
        rewards: vec![],
    };
    while ep.outcome == Outcome::Ongoing {
        let s = ep.final_state();
        let mask = env.action_mask(s);
        let legal: Vec<usize> = (0..mask.len()).filter(|&a| mask[a]).collect();
        if legal.is_empty() {
            ep.outcome = Outcome::StepLimit;
            break;
        }
        let out = policy.forward(s, &ctx, &mask)?;
        let (action, prob) = match selection {
            Selection::Greedy => {
                let a = out.greedy();
                (a, out.probs[a].as_f64())
            }
            Selection::Sample { noise } => {
                let a = if noise > 0.0 && rng.random_bool(noise.min(1.0)) {
                    *legal.choose(rng).expect("nonempty")
                } else {
                    sample_index(&out.probs, rng)
                };
                let p = (1.0 - noise) * out.probs[a].as_f64() + noise / legal.len() as f64;
                (a, p)
            }
        };
        let r = env.step(s, action)?;
        ep.actions.push(action);
        ep.masks.push(mask);
        ep.probs.push(prob);
        ep.rewards.push(r.reward);
        ep.states.push(r.next);
        ep.outcome = r.outcome;
    }
    Ok(ep)
}

/// Noisy sampled rollout, the episode generator of the imitation trainers.
pub fn collect_episode<T: Scalar, R: Rng>(
    env: &EnvSpec,
    problem: &Problem,
    policy: &TreePolicy<T>,
    ctx_seed: u64,
    noise: f64,
    rng: &mut R,
) -> Result<Episode, NeuralError> {
    run_episode(env, problem, policy, ctx_seed, Selection::Sample { noise }, rng)
}

fn sample_index<T: Scalar, R: Rng>(probs: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.iter().enumerate() {
        let p = p.as_f64();
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Cuts every loop: when a (term, cursor) pair recurs, the steps between
/// its first and second occurrence are dropped. The result has no
/// repeated position and ends in the same state.
pub fn prune_loops(e: &Episode) -> Episode {
    let mut seen: HashMap<(&Term, &Path), usize> = HashMap::new();
    // indices into e.states of the kept states
    let mut keep: Vec<usize> = Vec::with_capacity(e.states.len());
    for (i, s) in e.states.iter().enumerate() {
        if let Some(&at) = seen.get(&(&s.term, &s.cursor)) {
            for dropped in keep.drain(at + 1..) {
                let d = &e.states[dropped];
                seen.remove(&(&d.term, &d.cursor));
            }
        } else {
            seen.insert((&s.term, &s.cursor), keep.len());
            keep.push(i);
        }
    }
    let mut out = Episode {
        problem_id: e.problem_id.clone(),
        ctx_seed: e.ctx_seed,
        states: Vec::with_capacity(keep.len()),
        actions: vec![],
        masks: vec![],
        probs: vec![],
        rewards: vec![],
        outcome: e.outcome,
    };
    for (j, &i) in keep.iter().enumerate() {
        let mut s = e.states[i].clone();
        s.steps_taken = j;
        out.states.push(s);
        if j + 1 < keep.len() {
            // the step out of a kept state is the one taken at its last
            // visit, which is the step right before the next kept state
            let step = keep[j + 1] - 1;
            out.actions.push(e.actions[step]);
            out.masks.push(e.masks[step].clone());
            out.probs.push(e.probs[step]);
            out.rewards.push(e.rewards[step]);
        }
    }
    out
}

/// `V_t^n = sum_{i<n} gamma^i r_{t+i} + gamma^n V(s_{t+n})`, truncated at
/// the episode end. `bootstrap` is the value of the final state, zero when
/// the episode ended in a terminal state.
pub fn n_step_targets(rewards: &[f64], values: &[f64], bootstrap: f64, gamma: f64, n: usize) -> Vec<f64> {
    let len = rewards.len();
    assert_eq!(values.len(), len, "one value per step");
    let n = n.max(1);
    (0..len)
        .map(|t| {
            // discounts by repeated multiplication: `powi` may round
            // differently depending on inlining
            let end = (t + n).min(len);
            let mut g = 0.0;
            let mut discount = 1.0;
            for r in &rewards[t..end] {
                g += discount * r;
                discount *= gamma;
            }
            let tail = if end < len { values[end] } else { bootstrap };
            g + discount * tail
        })
        .collect()
}

/// Discounted Monte Carlo returns.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Vec<f64> {
    let mut out = vec![0.0; rewards.len()];
    let mut g = 0.0;
    for (t, r) in rewards.iter().enumerate().rev() {
        g = r + gamma * g;
        out[t] = g;
    }
    out
}
