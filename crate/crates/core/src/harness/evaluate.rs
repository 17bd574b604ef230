use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{EnvSpec, Problem};
use crate::error::{Error, Result};
use crate::neural::TreePolicy;
use crate::scalar::Scalar;
use crate::training::{eval_ctx_seed, run_episode, Selection};

/// Exploration noise of budgeted attempts.
pub const BUDGET_NOISE: f64 = 0.05;

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EvalMode {
    /// One argmax rollout per problem.
    GreedyOnce,
    /// Repeated rollouts until the first success or until `seconds` of
    /// wall-clock time have been spent on the problem. The first attempt
    /// is greedy, the rest sample with 5% noise. `max_attempts` optionally
    /// caps the number of attempts as well.
    BudgetSampled { seconds: f64, max_attempts: Option<usize> },
}

impl EvalMode {
    pub fn budget(seconds: f64) -> Self {
        EvalMode::BudgetSampled {
            seconds,
            max_attempts: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemOutcome {
    pub id: String,
    pub solved: bool,
    pub attempts: usize,
    pub seconds: f64,
    /// Actions of the successful attempt.
    pub solution: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub n: usize,
    pub solved: usize,
    /// `solved / n`.
    pub rate: f64,
    pub seconds_per_problem: f64,
    pub wall_time: f64,
    /// Solved problems keyed by the attempt that first succeeded.
    pub attempts_histogram: BTreeMap<usize, usize>,
    pub outcomes: Vec<ProblemOutcome>,
}

/// Runs `policy` on every problem. Greedy rollouts use the same fresh
/// variable context as curriculum evaluation, so they are reproducible;
/// budgeted attempts draw contexts and actions from a generator seeded by
/// `seed` and the problem id.
pub fn evaluate<T: Scalar>(
    policy: &TreePolicy<T>,
    env: &EnvSpec,
    problems: &[Problem],
    mode: EvalMode,
    seed: u64,
) -> Result<EvalReport> {
    if problems.is_empty() {
        return Err(Error::Invalid("cannot evaluate on an empty problem set".into()));
    }
    if policy.config().env != env.kind || policy.config().num_actions != env.num_actions() {
        return Err(Error::Invalid(format!(
            "checkpoint is for {} with {} actions, environment is {} with {}",
            policy.config().env,
            policy.config().num_actions,
            env.kind,
            env.num_actions()
        )));
    }
    if let EvalMode::BudgetSampled { seconds, .. } = mode {
        if !(seconds.is_finite() && seconds > 0.0) {
            return Err(Error::Invalid(format!("budget must be a positive number of seconds, got {seconds}")));
        }
    }
    let started = Instant::now();
    let mut outcomes = Vec::with_capacity(problems.len());
    for p in problems {
        outcomes.push(run_problem(policy, env, p, mode, seed)?);
    }
    let wall_time = started.elapsed().as_secs_f64();
    let solved = outcomes.iter().filter(|o| o.solved).count();
    let mut attempts_histogram = BTreeMap::new();
    for o in outcomes.iter().filter(|o| o.solved) {
        *attempts_histogram.entry(o.attempts).or_insert(0) += 1;
    }
    let n = problems.len();
    Ok(EvalReport {
        mode,
        n,
        solved,
        rate: solved as f64 / n as f64,
        seconds_per_problem: outcomes.iter().map(|o| o.seconds).sum::<f64>() / n as f64,
        wall_time,
        attempts_histogram,
        outcomes,
    })
}

fn run_problem<T: Scalar>(
    policy: &TreePolicy<T>,
    env: &EnvSpec,
    p: &Problem,
    mode: EvalMode,
    seed: u64,
) -> Result<ProblemOutcome> {
    let clock = Instant::now();
    let greedy = run_episode(
        env,
        p,
        policy,
        eval_ctx_seed(&p.id),
        Selection::Greedy,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let mut attempts = 1;
    let mut found = greedy.solved().then(|| greedy.actions.clone());
    if let EvalMode::BudgetSampled { seconds, max_attempts } = mode {
        let budget = Duration::from_secs_f64(seconds);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ eval_ctx_seed(&p.id));
        while found.is_none() && clock.elapsed() < budget && max_attempts.is_none_or(|m| attempts < m) {
            attempts += 1;
            let ctx_seed = rng.random();
            let e = run_episode(env, p, policy, ctx_seed, Selection::Sample { noise: BUDGET_NOISE }, &mut rng)?;
            if e.solved() {
                found = Some(e.actions);
            }
        }
    }
    Ok(ProblemOutcome {
        id: p.id.clone(),
        solved: found.is_some(),
        attempts,
        seconds: clock.elapsed().as_secs_f64(),
        solution: found,
    })
}
