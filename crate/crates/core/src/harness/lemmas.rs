use std::fmt;
use std::time::{Duration, Instant};

use crate::envs::{EnvKind, EnvSpec, Problem};
use crate::error::{Error, Result};
use crate::neural::{EpisodeContext, TreePolicy};
use crate::scalar::Scalar;
use crate::term::{print_term, Path, Term};
use crate::training::eval_ctx_seed;

/// One rewrite of a lemma's trace, relative to the side it acted on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceStep {
    pub path: Path,
    pub action: usize,
    /// Which alternative of the action fired.
    pub rule: usize,
    pub first_fresh: u32,
}

/// `lhs = rhs`, where `rhs` is what the policy rewrote side `side` of the
/// goal into.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Lemma {
    pub side: usize,
    pub lhs: Term,
    pub rhs: Term,
    pub trace: Vec<TraceStep>,
}

impl fmt::Display for Lemma {
    /// The lemma as an equation s-expression, `(= lhs rhs)`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(= {} {})", print_term(&self.lhs), print_term(&self.rhs))
    }
}

/// Runs `policy` greedily on an AIM goal for at most `time_cap` and turns
/// every side it changed into a lemma. Nothing is emitted when no rewrite
/// happened.
pub fn emit_lemmas<T: Scalar>(
    policy: &TreePolicy<T>,
    env: &EnvSpec,
    problem: &Problem,
    time_cap: Duration,
) -> Result<Vec<Lemma>> {
    if env.kind != EnvKind::Aim {
        return Err(Error::Invalid(format!("lemmas need an aim environment, got {}", env.kind)));
    }
    let started = Instant::now();
    let ctx = EpisodeContext::<T>::new(eval_ctx_seed(&problem.id), policy.config().n);
    let mut s = env.reset(problem)?;
    let mut traces: [Vec<TraceStep>; 2] = [vec![], vec![]];
    while !env.is_solved(&s) && s.steps_taken < env.step_limit && started.elapsed() < time_cap {
        let mask = env.action_mask(&s);
        if !mask.iter().any(|&m| m) {
            break;
        }
        let a = policy.forward(&s, &ctx, &mask)?.greedy();
        if let Some(&side) = s.cursor.indices().first() {
            let at = s.cursor_term();
            let first_fresh = s.term.next_fresh_index();
            if let Some(rule) = env.actions[a].rules().iter().position(|r| r.matches(at)) {
                traces[side].push(TraceStep {
                    path: Path(s.cursor.indices()[1..].to_vec()),
                    action: a,
                    rule,
                    first_fresh,
                });
            }
        }
        s = env.step(&s, a)?.next;
    }
    let mut out = vec![];
    for (side, trace) in traces.into_iter().enumerate() {
        let lhs = problem.term.arg(side).clone();
        let rhs = s.term.arg(side).clone();
        if !trace.is_empty() && lhs != rhs {
            out.push(Lemma { side, lhs, rhs, trace });
        }
    }
    Ok(out)
}

/// Replays the lemma's trace from `lhs`; true when it ends at `rhs`.
pub fn verify_lemma(env: &EnvSpec, lemma: &Lemma) -> bool {
    let mut t = lemma.lhs.clone();
    for step in &lemma.trace {
        let Some(rule) = env.actions.get(step.action).and_then(|a| a.rules().get(step.rule)) else {
            return false;
        };
        let Ok(at) = t.subterm_at(&step.path) else {
            return false;
        };
        let Some(new) = rule.apply(at, step.first_fresh) else {
            return false;
        };
        match t.replace_at(&step.path, new) {
            Ok(next) => t = next,
            Err(_) => return false,
        }
    }
    t == lemma.rhs
}
