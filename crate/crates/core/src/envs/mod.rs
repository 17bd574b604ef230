//! The three rewriting environments behind one contract.
//!
//! An environment is an immutable [`EnvSpec`]: a signature, an ordered
//! action table and a step limit. Episodes are sequences of [`EnvState`]
//! values produced by [`EnvSpec::step`]; states are plain values and may be
//! stepped from any thread.
//!
//! Reward is sparse: 1 on the step that solves the problem, 0 otherwise.

mod tables;

pub use tables::{aim_equations, aim_table_tsv, AimEquation};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::EnvError;
use crate::term::{Path, RewriteRule, Signature, Symbol, Term};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    /// Robinson arithmetic normalisation.
    Ra,
    /// Polynomial normalisation.
    Poly,
    /// Loop-theory equational goals.
    Aim,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Ra => "ra",
            EnvKind::Poly => "poly",
            EnvKind::Aim => "aim",
        }
    }

    pub fn signature(self) -> Signature {
        match self {
            EnvKind::Ra => Signature::robinson(),
            EnvKind::Poly => Signature::polynomial(),
            EnvKind::Aim => Signature::aim(),
        }
    }

    /// Size of the action table.
    pub fn num_actions(self) -> usize {
        match self {
            EnvKind::Ra => 9,
            EnvKind::Poly => 28,
            EnvKind::Aim => 177,
        }
    }

    /// Default episode step limit.
    pub fn default_step_limit(self) -> usize {
        match self {
            EnvKind::Ra | EnvKind::Poly => 100,
            EnvKind::Aim => 30,
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ra" => Ok(EnvKind::Ra),
            "poly" => Ok(EnvKind::Poly),
            "aim" => Ok(EnvKind::Aim),
            _ => Err(EnvError::UnknownEnv(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvConfig {
    pub step_limit: usize,
}

impl EnvConfig {
    pub fn for_kind(kind: EnvKind) -> Self {
        EnvConfig {
            step_limit: kind.default_step_limit(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ActionKind {
    /// Rewrite at the cursor with the first alternative that matches.
    Rewrite(Vec<RewriteRule>),
    /// Move the cursor to the given child.
    Move(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Action {
    pub id: usize,
    pub name: String,
    pub kind: ActionKind,
    pub resets_cursor: bool,
}

impl Action {
    pub fn is_move(&self) -> bool {
        matches!(self.kind, ActionKind::Move(_))
    }

    pub fn rules(&self) -> &[RewriteRule] {
        match &self.kind {
            ActionKind::Rewrite(r) => r,
            ActionKind::Move(_) => &[],
        }
    }
}

/// A problem instance: the start term and, for polynomials, the target
/// normal form.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub id: String,
    pub term: Term,
    pub goal: Option<Term>,
}

impl Problem {
    pub fn new(id: impl Into<String>, term: Term) -> Self {
        Problem {
            id: id.into(),
            term,
            goal: None,
        }
    }

    pub fn with_goal(mut self, goal: Term) -> Self {
        self.goal = Some(goal);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EnvState {
    pub term: Term,
    pub cursor: Path,
    pub steps_taken: usize,
    pub problem_id: Arc<str>,
    pub goal: Option<Term>,
}

impl EnvState {
    pub fn cursor_term(&self) -> &Term {
        self.term
            .subterm_at(&self.cursor)
            .expect("cursor is valid by construction")
    }

    /// The pair used for loop detection: term plus cursor.
    pub fn same_position(&self, other: &EnvState) -> bool {
        self.cursor == other.cursor && self.term == other.term
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Solved,
    StepLimit,
    Ongoing,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next: EnvState,
    pub reward: f64,
    pub done: bool,
    pub outcome: Outcome,
}

/// An environment: signature, action table and step limit.
#[derive(Clone, Debug)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub signature: Signature,
    pub actions: Vec<Action>,
    pub step_limit: usize,
}

/// Builds the environment `kind` with its full action table.
pub fn make_env(kind: EnvKind, config: &EnvConfig) -> Result<EnvSpec, EnvError> {
    if config.step_limit == 0 {
        return Err(EnvError::Config("step_limit must be positive".into()));
    }
    let actions = match kind {
        EnvKind::Ra => tables::robinson_actions(),
        EnvKind::Poly => tables::polynomial_actions(),
        EnvKind::Aim => tables::aim_actions(),
    };
    assert_eq!(actions.len(), kind.num_actions(), "{kind} action table size");
    Ok(EnvSpec {
        kind,
        signature: kind.signature(),
        actions,
        step_limit: config.step_limit,
    })
}

impl EnvSpec {
    /// Environment with its default configuration.
    pub fn new(kind: EnvKind) -> Self {
        make_env(kind, &EnvConfig::for_kind(kind)).expect("default config is valid")
    }

    pub fn with_step_limit(mut self, limit: usize) -> Self {
        self.step_limit = limit.max(1);
        self
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Id of the action moving the cursor to child `i`.
    pub fn move_action(&self, child: usize) -> Option<usize> {
        self.actions
            .iter()
            .find(|a| a.kind == ActionKind::Move(child))
            .map(|a| a.id)
    }

    pub fn action_by_name(&self, name: &str) -> Option<usize> {
        self.actions.iter().find(|a| a.name == name).map(|a| a.id)
    }

    pub fn reset(&self, problem: &Problem) -> Result<EnvState, EnvError> {
        self.signature.check(&problem.term)?;
        if self.kind == EnvKind::Poly && problem.goal.is_none() {
            return Err(EnvError::MissingGoal(problem.id.clone()));
        }
        if self.kind == EnvKind::Aim && problem.term.symbol() != Symbol::Equals {
            return Err(EnvError::Config(format!("problem `{}` is not an equation", problem.id)));
        }
        if let Some(g) = &problem.goal {
            self.signature.check(g)?;
        }
        Ok(EnvState {
            term: problem.term.clone(),
            cursor: Path::root(),
            steps_taken: 0,
            problem_id: Arc::from(problem.id.as_str()),
            goal: problem.goal.clone(),
        })
    }

    pub fn is_solved_term(&self, term: &Term, goal: Option<&Term>) -> bool {
        match self.kind {
            EnvKind::Ra => {
                let mut only_numeral = true;
                term.visit(&mut |n| {
                    only_numeral &= matches!(n.symbol(), Symbol::Zero | Symbol::Succ);
                });
                only_numeral
            }
            EnvKind::Poly => goal.is_some_and(|g| g == term),
            EnvKind::Aim => term.symbol() == Symbol::Equals && term.arg(0) == term.arg(1),
        }
    }

    pub fn is_solved(&self, s: &EnvState) -> bool {
        self.is_solved_term(&s.term, s.goal.as_ref())
    }

    pub fn is_legal(&self, s: &EnvState, action: usize) -> bool {
        let Some(a) = self.actions.get(action) else {
            return false;
        };
        let at = s.cursor_term();
        match &a.kind {
            ActionKind::Move(i) => *i < at.args().len(),
            ActionKind::Rewrite(rules) => rules.iter().any(|r| r.matches(at)),
        }
    }

    /// Ids of the actions applicable in `s`, ascending.
    pub fn legal_actions(&self, s: &EnvState) -> Vec<usize> {
        (0..self.actions.len()).filter(|&a| self.is_legal(s, a)).collect()
    }

    pub fn action_mask(&self, s: &EnvState) -> Vec<bool> {
        (0..self.actions.len()).map(|a| self.is_legal(s, a)).collect()
    }

    /// Applies a legal action. Illegal actions are a contract violation and
    /// are reported, never treated as a learnable outcome.
    pub fn step(&self, s: &EnvState, action: usize) -> Result<StepResult, EnvError> {
        if s.steps_taken >= self.step_limit {
            return Err(EnvError::EpisodeOver);
        }
        let a = self
            .actions
            .get(action)
            .ok_or(EnvError::IllegalAction { action })?;
        let at = s.cursor_term();
        let (term, cursor) = match &a.kind {
            ActionKind::Move(i) => {
                if *i >= at.args().len() {
                    return Err(EnvError::IllegalAction { action });
                }
                (s.term.clone(), s.cursor.child(*i))
            }
            ActionKind::Rewrite(rules) => {
                let first_fresh = s.term.next_fresh_index();
                let new_sub = rules
                    .iter()
                    .find_map(|r| r.apply(at, first_fresh))
                    .ok_or(EnvError::IllegalAction { action })?;
                let term = s.term.replace_at(&s.cursor, new_sub)?;
                let cursor = if a.resets_cursor { Path::root() } else { s.cursor.clone() };
                (term, cursor)
            }
        };
        let next = EnvState {
            term,
            cursor,
            steps_taken: s.steps_taken + 1,
            problem_id: s.problem_id.clone(),
            goal: s.goal.clone(),
        };
        let (outcome, done, reward) = if self.is_solved(&next) {
            (Outcome::Solved, true, 1.0)
        } else if next.steps_taken >= self.step_limit {
            (Outcome::StepLimit, true, 0.0)
        } else {
            (Outcome::Ongoing, false, 0.0)
        };
        Ok(StepResult {
            next,
            reward,
            done,
            outcome,
        })
    }

    /// Folds [`EnvSpec::step`] over `actions` from the problem's start state.
    /// Actions left over once the episode has ended are reported as an
    /// error at their index.
    pub fn replay(&self, problem: &Problem, actions: &[usize]) -> Result<StepResult, EnvError> {
        let start = self.reset(problem)?;
        let solved = self.is_solved(&start);
        let mut result = StepResult {
            outcome: if solved { Outcome::Solved } else { Outcome::Ongoing },
            done: solved,
            reward: 0.0,
            next: start,
        };
        for (index, &a) in actions.iter().enumerate() {
            if result.done && index > 0 {
                return Err(EnvError::Replay {
                    index,
                    source: Box::new(EnvError::EpisodeOver),
                });
            }
            result = self.step(&result.next, a).map_err(|e| EnvError::Replay {
                index,
                source: Box::new(e),
            })?;
        }
        Ok(result)
    }

    /// The moves from the root to `p` followed by `rewrite`: the action
    /// sequence that applies a rewrite at `p` when the cursor starts at the
    /// root.
    pub fn actions_for_rewrite_at(&self, p: &Path, rewrite: usize) -> Vec<usize> {
        let mut out: Vec<usize> = p
            .indices()
            .iter()
            .map(|&i| self.move_action(i).expect("child index has a move action"))
            .collect();
        out.push(rewrite);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::term::parse_term;

    fn ra(s: &str) -> Term {
        parse_term(s, &Signature::robinson()).unwrap()
    }

    #[test]
    fn action_counts() {
        let ra_env = EnvSpec::new(EnvKind::Ra);
        assert_eq!(ra_env.num_actions(), 9);
        assert_eq!(ra_env.actions.iter().filter(|a| a.is_move()).count(), 2);
        let poly = EnvSpec::new(EnvKind::Poly);
        assert_eq!(poly.num_actions(), 28);
        assert_eq!(poly.actions.iter().filter(|a| a.is_move()).count(), 2);
        let aim = EnvSpec::new(EnvKind::Aim);
        assert_eq!(aim.num_actions(), 177);
        assert_eq!(aim.actions.iter().filter(|a| a.is_move()).count(), 3);
        for env in [&ra_env, &poly] {
            assert!(env.actions[7].is_move() && env.actions[8].is_move());
            for a in &env.actions {
                assert_eq!(a.resets_cursor, !a.is_move());
            }
        }
    }

    #[test]
    fn bad_config() {
        assert!(make_env(EnvKind::Ra, &EnvConfig { step_limit: 0 }).is_err());
        assert!("ra".parse::<EnvKind>().is_ok());
        assert!("lambda".parse::<EnvKind>().is_err());
    }

    #[test]
    fn reset_examples() {
        let env = EnvSpec::new(EnvKind::Ra);
        let s = env.reset(&Problem::new("p", ra("(+ (S 0) 0)"))).unwrap();
        assert!(s.cursor.is_root());
        assert_eq!(s.steps_taken, 0);
        let poly = EnvSpec::new(EnvKind::Poly);
        let x = Term::var('x');
        assert!(matches!(
            poly.reset(&Problem::new("q", x.clone())),
            Err(EnvError::MissingGoal(_))
        ));
        let s = poly.reset(&Problem::new("q", Term::add(x.clone(), Term::zero())).with_goal(x.clone())).unwrap();
        assert_eq!(s.goal, Some(x));
        assert!(env.reset(&Problem::new("bad", parse_term("(^ 0 0)", &Signature::polynomial()).unwrap())).is_err());
    }

    #[test]
    fn trivially_true_aim_goal_finishes_on_first_step() {
        let aim = EnvSpec::new(EnvKind::Aim);
        let t = parse_term("(= (* x y) (* x y))", &Signature::aim()).unwrap();
        let s = aim.reset(&Problem::new("triv", t)).unwrap();
        assert!(aim.is_solved(&s));
        let legal = aim.legal_actions(&s);
        // at the equation root only moves apply
        assert!(legal.iter().all(|&a| aim.actions[a].is_move()));
        let r = aim.step(&s, legal[0]).unwrap();
        assert!(r.done);
        assert_eq!(r.outcome, Outcome::Solved);
        assert_eq!(r.reward, 1.0);
    }

    #[test]
    fn legal_actions_on_zero() {
        let env = EnvSpec::new(EnvKind::Ra);
        let s = env.reset(&Problem::new("z", ra("0"))).unwrap();
        // only x -> x + 0 matches a bare 0
        assert_eq!(env.legal_actions(&s), vec![1]);
    }

    #[test]
    fn legal_actions_on_succ_plus_zero() {
        let env = EnvSpec::new(EnvKind::Ra);
        let s = env.reset(&Problem::new("p", ra("(+ (S 0) 0)"))).unwrap();
        // x+0->x, x->x+0, both moves; S(x+y) -> x+S(y) does not match here
        assert_eq!(env.legal_actions(&s), vec![0, 1, 7, 8]);
    }

    #[test]
    fn worked_example_two_plus_one() {
        let env = EnvSpec::new(EnvKind::Ra);
        let p = Problem::new("ex", ra("(+ (S (S 0)) (S 0))"));
        let s0 = env.reset(&p).unwrap();
        let r1 = env.step(&s0, 2).unwrap(); // x + S(y) -> S(x + y)
        assert_eq!(r1.next.term, ra("(S (+ (S (S 0)) 0))"));
        assert!(r1.next.cursor.is_root());
        let r2 = env.step(&r1.next, 7).unwrap(); // move into S
        assert_eq!(r2.next.term, r1.next.term);
        assert_eq!(r2.next.cursor, Path(vec![0]));
        assert_eq!((r2.reward, r2.done), (0.0, false));
        let r3 = env.step(&r2.next, 0).unwrap(); // x + 0 -> x
        assert_eq!(r3.next.term, ra("(S (S (S 0)))"));
        assert_eq!(r3.outcome, Outcome::Solved);
        assert_eq!(r3.reward, 1.0);
        assert_eq!(env.replay(&p, &[2, 7, 0]).unwrap().outcome, Outcome::Solved);
    }

    #[test]
    fn replay_examples() {
        let env = EnvSpec::new(EnvKind::Ra);
        let p = Problem::new("p", ra("(+ (S 0) 0)"));
        let r = env.replay(&p, &[0]).unwrap();
        assert_eq!(r.outcome, Outcome::Solved);
        assert_eq!(r.next.steps_taken, 1);
        assert_eq!(env.replay(&p, &[]).unwrap().outcome, Outcome::Ongoing);
        match env.replay(&p, &[1, 4]) {
            Err(EnvError::Replay { index: 1, .. }) => {}
            other => panic!("expected illegal action at index 1, got {other:?}"),
        }
        assert!(matches!(env.replay(&p, &[0, 0]), Err(EnvError::Replay { index: 1, .. })));
    }

    #[test]
    fn step_limit_ends_episode() {
        let env = EnvSpec::new(EnvKind::Ra).with_step_limit(3);
        let s = env.reset(&Problem::new("p", ra("(+ (S 0) (S 0))"))).unwrap();
        let r1 = env.step(&s, 1).unwrap();
        let r2 = env.step(&r1.next, 1).unwrap();
        assert!(!r2.done);
        let r3 = env.step(&r2.next, 1).unwrap();
        assert!(r3.done);
        assert_eq!(r3.outcome, Outcome::StepLimit);
        assert_eq!(r3.reward, 0.0);
        assert!(matches!(env.step(&r3.next, 1), Err(EnvError::EpisodeOver)));
    }

    #[test]
    fn illegal_action_is_an_error() {
        let env = EnvSpec::new(EnvKind::Ra);
        let s = env.reset(&Problem::new("z", ra("0"))).unwrap();
        assert_eq!(env.step(&s, 0), Err(EnvError::IllegalAction { action: 0 }));
        assert_eq!(env.step(&s, 7), Err(EnvError::IllegalAction { action: 7 }));
        assert_eq!(env.step(&s, 99), Err(EnvError::IllegalAction { action: 99 }));
    }

    #[test]
    fn aim_fresh_variable_is_introduced() {
        let aim = EnvSpec::new(EnvKind::Aim);
        let b1_back = aim.action_by_name("b1<").unwrap();
        let t = parse_term("(= x (* e x))", &Signature::aim()).unwrap();
        let s = aim.reset(&Problem::new("f", t)).unwrap();
        let s = aim.step(&s, aim.move_action(0).unwrap()).unwrap().next;
        let r = aim.step(&s, b1_back).unwrap();
        assert_eq!(
            r.next.term,
            parse_term("(= (\\ v0 (* v0 x)) (* e x))", &Signature::aim()).unwrap()
        );
        assert!(r.next.cursor.is_root());
    }
}
