//! Helpers shared by the integration tests: random terms and an
//! independent central-difference gradient oracle.
#![allow(dead_code)]

use eqprove_core::envs::{EnvKind, EnvState};
use eqprove_core::neural::{EpisodeContext, LossKind, Sample, Target, TreePolicy};
use eqprove_core::term::{Path, Symbol, Term};
use rand::seq::IndexedRandom;
use rand::Rng;
use std::sync::Arc;

/// Random term over the environment's signature with roughly `budget`
/// operator nodes. AIM terms are equations and may contain fresh variables.
pub fn random_term<R: Rng>(env: EnvKind, budget: usize, rng: &mut R) -> Term {
    let sig = env.signature();
    let ops: Vec<Symbol> = sig.operators().iter().copied().filter(|&s| s != Symbol::Equals).collect();
    let mut leaves = sig.named_leaves();
    if sig.allows_fresh() {
        leaves.extend([Symbol::Fresh(0), Symbol::Fresh(1), Symbol::Fresh(4)]);
    }
    fn go<R: Rng>(ops: &[Symbol], leaves: &[Symbol], budget: usize, rng: &mut R) -> Term {
        if budget == 0 || rng.random_bool(0.2) {
            return Term::leaf(*leaves.choose(rng).unwrap());
        }
        let op = *ops.choose(rng).unwrap();
        let k = op.arity();
        let mut left = budget - 1;
        let args = (0..k)
            .map(|i| {
                let share = if i + 1 == k { left } else { rng.random_range(0..=left) };
                left -= share;
                go(ops, leaves, share, rng)
            })
            .collect();
        Term::new(op, args).unwrap()
    }
    if env == EnvKind::Aim {
        let l = rng.random_range(0..=budget);
        let a = go(&ops, &leaves, l, rng);
        let b = go(&ops, &leaves, budget - l, rng);
        Term::equation(a, b)
    } else {
        go(&ops, &leaves, budget, rng)
    }
}

pub fn random_state<R: Rng>(env: EnvKind, budget: usize, rng: &mut R) -> EnvState {
    let term = random_term(env, budget, rng);
    let paths = term.paths();
    let cursor = paths.choose(rng).cloned().unwrap_or_else(Path::root);
    EnvState {
        term,
        cursor,
        steps_taken: 0,
        problem_id: Arc::from("fd"),
        goal: None,
    }
}

/// Owned data behind a [`Sample`].
pub struct OwnedSample {
    pub state: EnvState,
    pub ctx: EpisodeContext<f64>,
    pub mask: Vec<bool>,
    pub target: Target<f64>,
}

impl OwnedSample {
    pub fn view(&self) -> Sample<'_, f64> {
        Sample {
            state: &self.state,
            ctx: &self.ctx,
            mask: &self.mask,
            target: self.target,
        }
    }
}

/// Random batch with random masks (the target action is always legal),
/// returns, advantages of both signs and behaviour probabilities.
pub fn random_batch<R: Rng>(env: EnvKind, n: usize, actions: usize, size: usize, rng: &mut R) -> Vec<OwnedSample> {
    (0..size)
        .map(|_| {
            let budget = rng.random_range(1..=4);
            let state = random_state(env, budget, rng);
            let mut mask: Vec<bool> = (0..actions).map(|_| rng.random_bool(0.5)).collect();
            let action = rng.random_range(0..actions);
            mask[action] = true;
            let target = Target::ppo(
                action,
                rng.random_range(-1.0..1.5),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.02..0.9),
            );
            OwnedSample {
                state,
                ctx: EpisodeContext::new(rng.random(), n),
                mask,
                target,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct FdReport {
    pub max_rel: f64,
    pub checked: usize,
    /// Coordinates whose one-sided differences disagree, meaning a ReLU,
    /// clip or hinge kink lies within the step.
    pub kinks: usize,
}

/// `|a - f| / max(|a|, |f|, floor)`.
pub fn rel_error(a: f64, f: f64, floor: f64) -> f64 {
    (a - f).abs() / a.abs().max(f.abs()).max(floor)
}

pub const REL_FLOOR: f64 = 1e-5;

/// Compares the analytic gradient of every parameter against central
/// differences with step `h`.
pub fn fd_check(policy: &TreePolicy<f64>, batch: &[OwnedSample], kind: LossKind, h: f64) -> FdReport {
    let views: Vec<Sample<'_, f64>> = batch.iter().map(OwnedSample::view).collect();
    let (l0, g) = policy.grad(&views, kind).unwrap();
    let trainable = policy.layout().trainable_mask();
    let mut p = policy.clone();
    let mut report = FdReport::default();
    for i in 0..p.num_params() {
        let orig = p.params()[i];
        p.params_mut()[i] = orig + h;
        let up = p.loss(&views, kind).unwrap();
        p.params_mut()[i] = orig - h;
        let down = p.loss(&views, kind).unwrap();
        p.params_mut()[i] = orig;
        let fd = if trainable[i] { (up - down) / (2.0 * h) } else { 0.0 };
        let fwd = (up - l0) / h;
        let bwd = (l0 - down) / h;
        if (fwd - bwd).abs() > 1e-3 * fd.abs().max(1.0) {
            report.kinks += 1;
            continue;
        }
        report.checked += 1;
        report.max_rel = report.max_rel.max(rel_error(g.data[i], fd, REL_FLOOR));
    }
    report
}
