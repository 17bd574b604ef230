use super::{Path, Symbol, Term};
use crate::error::TermError;

/// Pattern-variable bindings produced by [`match_pattern`].
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Bindings(Vec<(u8, Term)>);

impl Bindings {
    pub fn get(&self, var: u8) -> Option<&Term> {
        self.0.iter().find(|(v, _)| *v == var).map(|(_, t)| t)
    }

    pub fn insert(&mut self, var: u8, t: Term) {
        match self.0.iter_mut().find(|(v, _)| *v == var) {
            Some(slot) => slot.1 = t,
            None => self.0.push((var, t)),
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (char, &Term)> {
        self.0.iter().map(|(v, t)| (*v as char, t))
    }
}

fn match_into(pattern: &Term, t: &Term, b: &mut Bindings) -> bool {
    match pattern.symbol() {
        Symbol::Pattern(v) => {
            // Pattern variables range over object terms, never equations.
            if t.symbol() == Symbol::Equals {
                return false;
            }
            match b.get(v) {
                Some(bound) => bound == t,
                None => {
                    b.0.push((v, t.clone()));
                    true
                }
            }
        }
        sym => {
            sym == t.symbol()
                && pattern
                    .args()
                    .iter()
                    .zip(t.args())
                    .all(|(p, s)| match_into(p, s, b))
        }
    }
}

/// One-sided syntactic matching. Repeated pattern variables must bind equal
/// subterms.
pub fn match_pattern(pattern: &Term, t: &Term) -> Option<Bindings> {
    let mut b = Bindings::default();
    match_into(pattern, t, &mut b).then_some(b)
}

/// Substitutes bindings into a pattern. Unbound pattern variables are left
/// in place.
pub fn instantiate(pattern: &Term, b: &Bindings) -> Term {
    match pattern.symbol() {
        Symbol::Pattern(v) => b.get(v).cloned().unwrap_or_else(|| pattern.clone()),
        _ if pattern.is_leaf() => pattern.clone(),
        sym => Term::app(sym, pattern.args().iter().map(|a| instantiate(a, b)).collect()),
    }
}

fn pattern_vars(t: &Term, out: &mut Vec<u8>) {
    if let Symbol::Pattern(v) = t.symbol() {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    for a in t.args() {
        pattern_vars(a, out);
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum RuleDirection {
    Forward,
    Backward,
}

/// How right-hand-side variables that the left-hand side does not bind get
/// their value.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UnboundPolicy {
    /// Such a direction is inadmissible.
    Reject,
    /// Each unbound variable becomes a new proof variable `v<k>`.
    Fresh,
}

/// An oriented rewrite `lhs -> rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteRule {
    pub id: String,
    pub direction: RuleDirection,
    pub lhs: Term,
    pub rhs: Term,
    pub unbound_policy: UnboundPolicy,
    unbound: Vec<u8>,
}

impl RewriteRule {
    /// Fails with [`TermError::Inadmissible`] when the rhs needs a variable
    /// the lhs does not bind and the policy is [`UnboundPolicy::Reject`].
    pub fn new(
        id: impl Into<String>,
        lhs: Term,
        rhs: Term,
        direction: RuleDirection,
        unbound_policy: UnboundPolicy,
    ) -> Result<Self, TermError> {
        let id = id.into();
        let mut lv = Vec::new();
        let mut rv = Vec::new();
        pattern_vars(&lhs, &mut lv);
        pattern_vars(&rhs, &mut rv);
        let unbound: Vec<u8> = rv.into_iter().filter(|v| !lv.contains(v)).collect();
        if !unbound.is_empty() && unbound_policy == UnboundPolicy::Reject {
            return Err(TermError::Inadmissible(id));
        }
        if unbound.is_empty() && unbound_policy != UnboundPolicy::Reject {
            return Err(TermError::Inadmissible(format!("{id}: binding policy on a rule with no unbound variables")));
        }
        Ok(RewriteRule {
            id,
            direction,
            lhs,
            rhs,
            unbound_policy,
            unbound,
        })
    }

    /// Forward (`lhs -> rhs`) rule with no unbound variables.
    pub fn oriented(id: impl Into<String>, lhs: Term, rhs: Term) -> Result<Self, TermError> {
        Self::new(id, lhs, rhs, RuleDirection::Forward, UnboundPolicy::Reject)
    }

    /// Pattern variables the rhs introduces.
    pub fn unbound_vars(&self) -> &[u8] {
        &self.unbound
    }

    pub fn introduces_fresh(&self) -> bool {
        self.unbound_policy == UnboundPolicy::Fresh
    }

    pub fn matches(&self, t: &Term) -> bool {
        let mut b = Bindings::default();
        match_into(&self.lhs, t, &mut b)
    }

    /// Rewrites `t` at its root. Fresh variables are numbered from
    /// `first_fresh`.
    pub fn apply(&self, t: &Term, first_fresh: u32) -> Option<Term> {
        let mut b = match_pattern(&self.lhs, t)?;
        for (i, &v) in self.unbound.iter().enumerate() {
            b.insert(v, Term::leaf(Symbol::Fresh(first_fresh + i as u32)));
        }
        Some(instantiate(&self.rhs, &b))
    }
}

/// Applies `rule` at `p`. Fresh variables are numbered after the largest
/// one already present anywhere in `t`. Returns `Ok(None)` when the rule
/// does not match there.
pub fn rewrite_at(t: &Term, p: &Path, rule: &RewriteRule) -> Result<Option<Term>, TermError> {
    rewrite_at_with(t, p, rule, t.next_fresh_index())
}

/// [`rewrite_at`] with an explicit first fresh-variable index.
pub fn rewrite_at_with(
    t: &Term,
    p: &Path,
    rule: &RewriteRule,
    first_fresh: u32,
) -> Result<Option<Term>, TermError> {
    let sub = t.subterm_at(p)?;
    match rule.apply(sub, first_fresh) {
        Some(new) => Ok(Some(t.replace_at(p, new)?)),
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_pattern;
    use super::super::{parse_term, Signature};
    use super::*;

    fn ra(s: &str) -> Term {
        parse_term(s, &Signature::robinson()).unwrap()
    }

    fn pat(s: &str) -> Term {
        parse_pattern(s, &Signature::polynomial()).unwrap()
    }

    fn rule(l: &str, r: &str) -> RewriteRule {
        RewriteRule::oriented(format!("{l}->{r}"), pat(l), pat(r)).unwrap()
    }

    #[test]
    fn match_examples() {
        let b = match_pattern(&pat("(+ ?x 0)"), &ra("(+ (S 0) 0)")).unwrap();
        assert_eq!(b.get(b'x'), Some(&ra("(S 0)")));
        let b = match_pattern(&pat("(+ (* ?x ?y) ?x)"), &ra("(+ (* (S 0) 0) (S 0))")).unwrap();
        assert_eq!(b.get(b'x'), Some(&ra("(S 0)")));
        assert_eq!(b.get(b'y'), Some(&ra("0")));
        assert!(match_pattern(&pat("(+ ?x 0)"), &ra("(+ 0 (S 0))")).is_none());
        // repeated variable must bind equal subterms
        assert!(match_pattern(&pat("(+ (* ?x ?y) ?x)"), &ra("(+ (* (S 0) 0) 0)")).is_none());
    }

    #[test]
    fn rewrite_examples() {
        let r3 = rule("(+ ?x (S ?y))", "(S (+ ?x ?y))");
        let r1 = rule("(+ ?x 0)", "?x");
        let t = ra("(+ (S (S 0)) (S 0))");
        let t1 = rewrite_at(&t, &Path::root(), &r3).unwrap().unwrap();
        assert_eq!(t1, ra("(S (+ (S (S 0)) 0))"));
        let t2 = rewrite_at(&t1, &Path(vec![0]), &r1).unwrap().unwrap();
        assert_eq!(t2, ra("(S (S (S 0)))"));
        assert_eq!(rewrite_at(&ra("0"), &Path::root(), &r1).unwrap(), None);
        assert!(rewrite_at(&ra("0"), &Path(vec![0]), &r1).is_err());
    }

    #[test]
    fn inadmissible_direction_rejected() {
        // x * 0 -> 0 backwards would need an invented x
        let err = RewriteRule::oriented("mul0<", pat("0"), pat("(* ?x 0)")).unwrap_err();
        assert!(matches!(err, TermError::Inadmissible(_)));
    }

    #[test]
    fn fresh_bindings() {
        let aim = Signature::aim();
        let l = parse_pattern("?y", &aim).unwrap();
        let r = parse_pattern("(\\ ?x (* ?x ?y))", &aim).unwrap();
        let fresh = RewriteRule::new("b1<", l, r, RuleDirection::Backward, UnboundPolicy::Fresh).unwrap();
        let t = parse_term("(= (* v0 x) x)", &aim).unwrap();
        let out = rewrite_at(&t, &Path(vec![1]), &fresh).unwrap().unwrap();
        assert_eq!(out, parse_term("(= (* v0 x) (\\ v1 (* v1 x)))", &aim).unwrap());
        // variables never bind the equation itself
        assert_eq!(rewrite_at(&t, &Path::root(), &fresh).unwrap(), None);
    }
}
