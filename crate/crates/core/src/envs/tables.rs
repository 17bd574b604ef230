use std::fmt::Write;

use super::{Action, ActionKind};
use crate::term::parse::parse_pattern;
use crate::term::{print_term, RewriteRule, RuleDirection, Signature, Term, UnboundPolicy};

const AIM_EQUATIONS: &str = include_str!("aim_equations.tsv");

fn pattern(text: &str, sig: &Signature) -> Term {
    parse_pattern(text, sig).unwrap_or_else(|e| panic!("bad built-in pattern {text:?}: {e}"))
}

fn arith_rule(lhs: &str, rhs: &str) -> RewriteRule {
    let sig = Signature::polynomial();
    RewriteRule::oriented(format!("{lhs} -> {rhs}"), pattern(lhs, &sig), pattern(rhs, &sig))
        .unwrap_or_else(|e| panic!("built-in rule {lhs} -> {rhs}: {e}"))
}

fn rewrite(id: usize, alternatives: &[(&str, &str)]) -> Action {
    let rules: Vec<RewriteRule> = alternatives.iter().map(|(l, r)| arith_rule(l, r)).collect();
    Action {
        id,
        name: rules.iter().map(|r| r.id.as_str()).collect::<Vec<_>>().join(" | "),
        kind: ActionKind::Rewrite(rules),
        resets_cursor: true,
    }
}

fn moves(first_id: usize, n: usize, names: &[&str]) -> Vec<Action> {
    (0..n)
        .map(|i| Action {
            id: first_id + i,
            name: names[i].to_string(),
            kind: ActionKind::Move(i),
            resets_cursor: false,
        })
        .collect()
}

const ROBINSON_REWRITES: [(&str, &str); 7] = [
    ("(+ ?x 0)", "?x"),
    ("?x", "(+ ?x 0)"),
    ("(+ ?x (S ?y))", "(S (+ ?x ?y))"),
    ("(S (+ ?x ?y))", "(+ ?x (S ?y))"),
    ("(* ?x 0)", "0"),
    ("(* ?x (S ?y))", "(+ (* ?x ?y) ?x)"),
    ("(+ (* ?x ?y) ?x)", "(* ?x (S ?y))"),
];

/// Seven rewrites, then move-left and move-right.
pub(crate) fn robinson_actions() -> Vec<Action> {
    let mut out: Vec<Action> = ROBINSON_REWRITES
        .iter()
        .enumerate()
        .map(|(i, r)| rewrite(i, &[*r]))
        .collect();
    out.extend(moves(7, 2, &["move-left", "move-right"]));
    out
}

/// The Robinson table, both moves, then nineteen polynomial rewrites.
pub(crate) fn polynomial_actions() -> Vec<Action> {
    let mut out = robinson_actions();
    let extra: [&[(&str, &str)]; 19] = [
        &[("(+ ?x ?y)", "(+ ?y ?x)"), ("(* ?x ?y)", "(* ?y ?x)")],
        &[("(^ ?x 0)", "(S 0)")],
        &[("(^ ?x (S ?y))", "(* (^ ?x ?y) ?x)")],
        &[("(* (^ ?x ?y) ?x)", "(^ ?x (S ?y))")],
        &[("(+ (+ ?x ?y) ?z)", "(+ ?x (+ ?y ?z))"), ("(* (* ?x ?y) ?z)", "(* ?x (* ?y ?z))")],
        &[("(+ ?x (+ ?y ?z))", "(+ (+ ?x ?y) ?z)"), ("(* ?x (* ?y ?z))", "(* (* ?x ?y) ?z)")],
        &[("(* ?x (+ ?y ?z))", "(+ (* ?x ?y) (* ?x ?z))")],
        &[("(+ (* ?x ?y) (* ?x ?z))", "(* ?x (+ ?y ?z))")],
        &[("(* ?x (S 0))", "?x")],
        &[("?x", "(* ?x (S 0))")],
        &[("(^ (S 0) ?x)", "(S 0)")],
        &[("(^ ?x (S 0))", "?x")],
        &[("?x", "(^ ?x (S 0))")],
        &[("(^ ?x (+ ?y ?z))", "(* (^ ?x ?y) (^ ?x ?z))")],
        &[("(* (^ ?x ?y) (^ ?x ?z))", "(^ ?x (+ ?y ?z))")],
        &[("(^ (* ?x ?y) ?z)", "(* (^ ?x ?z) (^ ?y ?z))")],
        &[("(* (^ ?x ?z) (^ ?y ?z))", "(^ (* ?x ?y) ?z)")],
        &[("(^ (^ ?x ?y) ?z)", "(^ ?x (* ?y ?z))")],
        &[("(^ ?x (* ?y ?z))", "(^ (^ ?x ?y) ?z)")],
    ];
    for alts in extra {
        let id = out.len();
        out.push(rewrite(id, alts));
    }
    out
}

/// One loop-theory identity, as listed (axioms, definitions, known
/// propositions).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AimEquation {
    pub name: String,
    pub lhs: Term,
    pub rhs: Term,
}

pub fn aim_equations() -> Vec<AimEquation> {
    let sig = Signature::aim();
    AIM_EQUATIONS
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .map(|line| {
            let mut cols = line.split('\t');
            let (name, lhs, rhs) = match (cols.next(), cols.next(), cols.next()) {
                (Some(n), Some(l), Some(r)) => (n, l, r),
                _ => panic!("malformed equation line {line:?}"),
            };
            AimEquation {
                name: name.to_string(),
                lhs: pattern(lhs, &sig),
                rhs: pattern(rhs, &sig),
            }
        })
        .collect()
}

/// For each equation in order: the forward direction, then the backward
/// direction. A direction whose right side needs a variable the left side
/// does not bind introduces a fresh proof variable for it. The three moves
/// come last.
pub(crate) fn aim_actions() -> Vec<Action> {
    let mut out = Vec::new();
    for eq in aim_equations() {
        for (dir, lhs, rhs, tag) in [
            (RuleDirection::Forward, &eq.lhs, &eq.rhs, '>'),
            (RuleDirection::Backward, &eq.rhs, &eq.lhs, '<'),
        ] {
            let id = format!("{}{tag}", eq.name);
            let rule = RewriteRule::new(id.clone(), lhs.clone(), rhs.clone(), dir, UnboundPolicy::Reject)
                .or_else(|_| RewriteRule::new(id.clone(), lhs.clone(), rhs.clone(), dir, UnboundPolicy::Fresh))
                .expect("every direction is admissible with fresh binding");
            out.push(Action {
                id: out.len(),
                name: id,
                kind: ActionKind::Rewrite(vec![rule]),
                resets_cursor: true,
            });
        }
    }
    let first = out.len();
    out.extend(moves(first, 3, &["move-arg0", "move-arg1", "move-arg2"]));
    out
}

/// The AIM action table as TSV: `id name lhs rhs binding`.
pub fn aim_table_tsv() -> String {
    let mut s = String::from("id\tname\tlhs\trhs\tbinding\n");
    for a in aim_actions() {
        match &a.kind {
            ActionKind::Rewrite(rules) => {
                let r = &rules[0];
                let binding = if r.introduces_fresh() { "fresh" } else { "-" };
                writeln!(s, "{}\t{}\t{}\t{}\t{binding}", a.id, a.name, print_term(&r.lhs), print_term(&r.rhs)).unwrap();
            }
            ActionKind::Move(i) => {
                writeln!(s, "{}\t{}\tmove\t{i}\t-", a.id, a.name).unwrap();
            }
        }
    }
    s
}
