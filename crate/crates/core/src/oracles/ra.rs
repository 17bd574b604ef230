use std::sync::OnceLock;

use crate::envs::{EnvKind, EnvSpec};
use crate::term::{Path, Symbol, Term};

/// Value of a Robinson-arithmetic term. Saturates at `u128::MAX`.
pub fn eval_ra(t: &Term) -> u128 {
    match t.symbol() {
        Symbol::Zero => 0,
        Symbol::Succ => eval_ra(t.arg(0)).saturating_add(1),
        Symbol::Add => eval_ra(t.arg(0)).saturating_add(eval_ra(t.arg(1))),
        Symbol::Mul => eval_ra(t.arg(0)).saturating_mul(eval_ra(t.arg(1))),
        sym => panic!("eval_ra: `{sym}` is not a Robinson-arithmetic symbol"),
    }
}

/// Which redex the fixed strategy picks when several apply.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq)]
pub enum LoplOrder {
    /// First redex in pre-order: the leftmost, outermost one.
    #[default]
    Outermost,
    /// First redex in post-order: the leftmost, innermost one.
    Innermost,
}

/// A run of the fixed strategy that reached the numeral.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoplSolution {
    /// Rewrite steps; cursor moves are not counted.
    pub steps: usize,
    /// Replayable RA action ids, moves included.
    pub actions: Vec<usize>,
    pub normal_form: Term,
}

/// Value-reducing RA rewrites: `x+0`, `x+S(y)`, `x*0`, `x*S(y)`.
const REDUCING: [usize; 4] = [0, 2, 4, 5];

/// Rewrites the leftmost redex of the reducing rules until only `S` and `0`
/// remain. Returns `None` when more than `limit` rewrites would be needed.
pub fn lopl_solve(t: &Term, limit: usize) -> Option<LoplSolution> {
    lopl_solve_with(t, limit, LoplOrder::default())
}

pub fn lopl_solve_with(t: &Term, limit: usize, order: LoplOrder) -> Option<LoplSolution> {
    let env = ra_env();
    let mut term = t.clone();
    let mut actions = Vec::new();
    let mut steps = 0;
    while let Some((p, a)) = next_redex(env, &term, order) {
        if steps == limit {
            return None;
        }
        let sub = term.subterm_at(&p).ok()?;
        let new = env.actions[a].rules()[0].apply(sub, 0)?;
        term = term.replace_at(&p, new).ok()?;
        actions.extend(env.actions_for_rewrite_at(&p, a));
        steps += 1;
    }
    Some(LoplSolution {
        steps,
        actions,
        normal_form: term,
    })
}

/// Position and RA action id of the redex the strategy rewrites next;
/// `None` on a numeral.
pub fn lopl_next(t: &Term, order: LoplOrder) -> Option<(Path, usize)> {
    next_redex(ra_env(), t, order)
}

fn ra_env() -> &'static EnvSpec {
    static ENV: OnceLock<EnvSpec> = OnceLock::new();
    ENV.get_or_init(|| EnvSpec::new(EnvKind::Ra))
}

fn next_redex(env: &EnvSpec, t: &Term, order: LoplOrder) -> Option<(Path, usize)> {
    let paths = match order {
        LoplOrder::Outermost => t.paths(),
        LoplOrder::Innermost => t.paths_post_order(),
    };
    paths.into_iter().find_map(|p| {
        let sub = t.subterm_at(&p).ok()?;
        REDUCING
            .iter()
            .find(|&&a| env.actions[a].rules()[0].matches(sub))
            .map(|&a| (p, a))
    })
}
