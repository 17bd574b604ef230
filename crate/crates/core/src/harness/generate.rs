use std::collections::HashSet;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::problems::{ProblemEntry, ProblemSet};
use crate::envs::{EnvKind, EnvSpec, Problem};
use crate::error::{Error, Result};
use crate::oracles::{difficulty, lopl_solve, poly_derivation, poly_normalize_capped};
use crate::term::{Path, Symbol, Term};

const ATTEMPTS_PER_PROBLEM: usize = 2000;

fn give_up(env: EnvKind, have: usize, want: usize) -> Error {
    Error::Invalid(format!("{env} generator found only {have} of {want} problems; relax the parameters"))
}

fn contains_op(t: &Term, ops: &[Symbol]) -> bool {
    ops.iter().any(|&s| t.contains_symbol(s))
}

/// `depth` bounds the nesting of binary operators; `S` chains are free.
fn random_ra<R: Rng>(depth: usize, rng: &mut R) -> Term {
    let leaf = |rng: &mut R| Term::numeral(rng.random_range(0..4));
    if depth == 0 {
        return leaf(rng);
    }
    match rng.random_range(0..5) {
        0 => leaf(rng),
        1 => Term::succ(random_ra(depth, rng)),
        2 | 3 => Term::add(random_ra(depth - 1, rng), random_ra(depth - 1, rng)),
        _ => Term::mul(random_ra(depth - 1, rng), random_ra(depth - 1, rng)),
    }
}

fn random_poly<R: Rng>(depth: usize, rng: &mut R) -> Term {
    let leaf = |rng: &mut R| {
        if rng.random_bool(0.5) {
            Term::var(*['x', 'y', 'z'].choose(rng).unwrap())
        } else {
            Term::numeral(rng.random_range(0..3))
        }
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.random_range(0..6) {
        0 => leaf(rng),
        1 => Term::succ(random_poly(depth, rng)),
        2 | 3 => Term::add(random_poly(depth - 1, rng), random_poly(depth - 1, rng)),
        4 => Term::mul(random_poly(depth - 1, rng), random_poly(depth - 1, rng)),
        _ => Term::pow(random_poly(depth - 1, rng), Term::numeral(rng.random_range(0..4))),
    }
}

/// Sorts by oracle steps (unknown last) and numbers the problems in that
/// order.
fn finish(env: EnvKind, mut entries: Vec<ProblemEntry>) -> ProblemSet {
    entries.sort_by_key(|e| e.difficulty.and_then(|d| d.steps).unwrap_or(usize::MAX));
    for (i, e) in entries.iter_mut().enumerate() {
        e.problem.id = format!("{env}-{i:05}");
    }
    ProblemSet { env, entries }
}

/// Random RA terms with at most `max_depth` nested `+`/`*` levels and at least one `+` or
/// `*`, each solvable by the fixed strategy within the episode step limit.
/// Sorted by difficulty.
pub fn generate_ra(count: usize, max_depth: usize, seed: u64) -> Result<ProblemSet> {
    if max_depth < 1 {
        return Err(Error::Invalid("max_depth must be at least 1".into()));
    }
    let env = EnvSpec::new(EnvKind::Ra);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut entries = vec![];
    let mut attempts = 0;
    while entries.len() < count {
        attempts += 1;
        if attempts > ATTEMPTS_PER_PROBLEM * count {
            return Err(give_up(EnvKind::Ra, entries.len(), count));
        }
        let depth = rng.random_range(1..=max_depth);
        let t = random_ra(depth, &mut rng);
        if !contains_op(&t, &[Symbol::Add, Symbol::Mul]) || !seen.insert(t.clone()) {
            continue;
        }
        // the action count bounds the rewrite count, so the step limit is
        // also a rewrite budget and keeps huge values from being unfolded
        let Some(sol) = lopl_solve(&t, env.step_limit) else {
            continue;
        };
        if sol.actions.len() > env.step_limit {
            continue;
        }
        let problem = Problem::new(String::new(), t);
        let difficulty = difficulty(&problem, EnvKind::Ra).ok();
        entries.push(ProblemEntry {
            problem,
            difficulty,
            solution: Some(sol.actions),
        });
    }
    Ok(finish(EnvKind::Ra, entries))
}

/// Random polynomial expressions with at most `max_depth` nested operator
/// levels whose normal form, and every intermediate value of the oracle
/// derivation, stays within `value_cap`. The goal is the normal form; the oracle
/// derivation is attached when it fits the step limit, and problems
/// without one are resampled.
pub fn generate_poly(count: usize, max_depth: usize, value_cap: u64, seed: u64) -> Result<ProblemSet> {
    if max_depth < 1 {
        return Err(Error::Invalid("max_depth must be at least 1".into()));
    }
    let env = EnvSpec::new(EnvKind::Poly);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut entries = vec![];
    let mut attempts = 0;
    while entries.len() < count {
        attempts += 1;
        if attempts > ATTEMPTS_PER_PROBLEM * count {
            return Err(give_up(EnvKind::Poly, entries.len(), count));
        }
        let depth = rng.random_range(1..=max_depth);
        let t = random_poly(depth, &mut rng);
        if !seen.insert(t.clone()) {
            continue;
        }
        let Ok(goal) = poly_normalize_capped(&t, value_cap) else {
            continue;
        };
        if goal == t {
            continue;
        }
        let Ok(der) = poly_derivation(&t, value_cap) else {
            continue;
        };
        let actions = der.actions();
        if actions.len() > env.step_limit {
            continue;
        }
        let problem = Problem::new(String::new(), t).with_goal(goal);
        let difficulty = difficulty(&problem, EnvKind::Poly).ok();
        entries.push(ProblemEntry {
            problem,
            difficulty,
            solution: Some(actions),
        });
    }
    Ok(finish(EnvKind::Poly, entries))
}

fn random_loop_term<R: Rng>(ops: usize, rng: &mut R) -> Term {
    let leaves = [Symbol::Var(b'x'), Symbol::Var(b'y'), Symbol::Var(b'z'), Symbol::Identity];
    if ops == 0 {
        return Term::leaf(*leaves.choose(rng).unwrap());
    }
    let op = *[Symbol::Mul, Symbol::Mul, Symbol::LeftDiv, Symbol::RightDiv].choose(rng).unwrap();
    let left = rng.random_range(0..ops);
    Term::new(op, vec![random_loop_term(left, rng), random_loop_term(ops - 1 - left, rng)]).expect("binary")
}

/// Steps `actions` from the start and stops at the first solved state.
/// `None` when the sequence is illegal or never solves the problem.
fn solving_prefix(env: &EnvSpec, problem: &Problem, actions: &[usize]) -> Option<Vec<usize>> {
    let mut s = env.reset(problem).ok()?;
    if env.is_solved(&s) {
        return Some(vec![]);
    }
    for (i, &a) in actions.iter().enumerate() {
        let r = env.step(&s, a).ok()?;
        if env.is_solved(&r.next) {
            return Some(actions[..=i].to_vec());
        }
        if r.done {
            return None;
        }
        s = r.next;
    }
    None
}

/// Largest side produced while scrambling.
const AIM_MAX_SIDE: usize = 40;

/// Loop-theory goals made by scrambling one side of a trivial `t = t`.
/// Each problem uses between 1 and `scramble_depth` rewrites, each the
/// forward or backward direction of an axiom whose opposite direction
/// needs no fresh variable, so undoing them in reverse order is a
/// solution. That solution is attached, checked to fit the step limit.
pub fn generate_aim(count: usize, scramble_depth: usize, seed: u64) -> Result<ProblemSet> {
    if scramble_depth < 1 {
        return Err(Error::Invalid("scramble_depth must be at least 1".into()));
    }
    let env = EnvSpec::new(EnvKind::Aim);
    // rewrite ids come in forward/backward pairs 2i, 2i + 1
    let rewrites: Vec<usize> = (0..env.num_actions())
        .filter(|&a| !env.actions[a].is_move())
        .filter(|&a| {
            let plain = |id: usize| env.actions[id].rules().iter().all(|r| !r.introduces_fresh());
            plain(a) && plain(a ^ 1)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut entries = vec![];
    let mut attempts = 0;
    'outer: while entries.len() < count {
        attempts += 1;
        if attempts > ATTEMPTS_PER_PROBLEM * count {
            return Err(give_up(EnvKind::Aim, entries.len(), count));
        }
        let base = random_loop_term(rng.random_range(0..=2), &mut rng);
        let side = rng.random_range(0..2usize);
        let mut eq = Term::equation(base.clone(), base);
        let depth = rng.random_range(1..=scramble_depth);
        let mut undo: Vec<(Path, usize)> = vec![];
        for _ in 0..depth {
            let sub_paths: Vec<Path> = eq.arg(side).paths().into_iter().map(|p| prefixed(side, &p)).collect();
            let mut options = vec![];
            for p in &sub_paths {
                let at = eq.subterm_at(p).expect("path from term");
                for &a in &rewrites {
                    if env.actions[a].rules()[0].matches(at) {
                        options.push((p.clone(), a));
                    }
                }
            }
            let Some((p, a)) = options.choose(&mut rng).cloned() else {
                continue 'outer;
            };
            let at = eq.subterm_at(&p).expect("valid path");
            let new = env.actions[a].rules()[0].apply(at, 0).expect("matched");
            eq = eq.replace_at(&p, new).expect("valid path");
            if eq.arg(side).size() > AIM_MAX_SIDE {
                continue 'outer;
            }
            undo.push((p, a ^ 1));
        }
        if eq.arg(0) == eq.arg(1) || !seen.insert(eq.clone()) {
            continue;
        }
        let actions: Vec<usize> = undo
            .iter()
            .rev()
            .flat_map(|(p, a)| env.actions_for_rewrite_at(p, *a))
            .collect();
        let problem = Problem::new(String::new(), eq);
        let Some(solution) = solving_prefix(&env, &problem, &actions) else {
            continue;
        };
        entries.push(ProblemEntry {
            problem,
            difficulty: None,
            solution: Some(solution),
        });
    }
    Ok(finish(EnvKind::Aim, entries))
}

fn prefixed(first: usize, p: &Path) -> Path {
    let mut v = vec![first];
    v.extend_from_slice(p.indices());
    Path(v)
}
