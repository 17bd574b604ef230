//! Terms: immutable ordered trees over a fixed symbol vocabulary.
//!
//! The three environments share one vocabulary. A [`Signature`] selects the
//! subset that is legal for an environment; arities never differ between
//! signatures.

pub(crate) mod parse;
mod rewrite;

pub use parse::{parse_term, print_term};
pub use rewrite::{
    instantiate, match_pattern, rewrite_at, rewrite_at_with, Bindings, RewriteRule, RuleDirection,
    UnboundPolicy,
};

use std::fmt;
use std::sync::Arc;

use crate::error::TermError;

/// Every symbol that can occur in a term or pattern.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Zero,
    Succ,
    Add,
    Mul,
    Pow,
    /// Equation root of an AIM goal.
    Equals,
    /// Left division `\`.
    LeftDiv,
    /// Right division `/`.
    RightDiv,
    /// Loop identity `e`.
    Identity,
    /// Inner mapping `L(u, x, y)`.
    InnerL,
    /// Inner mapping `R(u, x, y)`.
    InnerR,
    /// Inner mapping `T(u, x)`.
    InnerT,
    /// Associator `a(x, y, z)`.
    Associator,
    /// Commutator `K(x, y)`.
    Commutator,
    /// Object variable named by a single lowercase ASCII letter.
    Var(u8),
    /// Proof-introduced variable `v<k>`.
    Fresh(u32),
    /// Pattern variable `?<letter>`; only appears in rule patterns.
    Pattern(u8),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub enum SymbolKind {
    Operator,
    Constant,
    BoundVariable,
    FreshVariable,
    PatternVariable,
}

impl Symbol {
    pub fn arity(self) -> usize {
        use Symbol::*;
        match self {
            Zero | Identity | Var(_) | Fresh(_) | Pattern(_) => 0,
            Succ => 1,
            Add | Mul | Pow | Equals | LeftDiv | RightDiv | InnerT | Commutator => 2,
            InnerL | InnerR | Associator => 3,
        }
    }

    pub fn kind(self) -> SymbolKind {
        match self {
            Symbol::Zero | Symbol::Identity => SymbolKind::Constant,
            Symbol::Var(_) => SymbolKind::BoundVariable,
            Symbol::Fresh(_) => SymbolKind::FreshVariable,
            Symbol::Pattern(_) => SymbolKind::PatternVariable,
            _ => SymbolKind::Operator,
        }
    }

    pub fn is_leaf(self) -> bool {
        self.arity() == 0
    }

    /// Printed name, as accepted by the parser.
    pub fn name(self) -> String {
        use Symbol::*;
        match self {
            Zero => "0".into(),
            Succ => "S".into(),
            Add => "+".into(),
            Mul => "*".into(),
            Pow => "^".into(),
            Equals => "=".into(),
            LeftDiv => "\\".into(),
            RightDiv => "/".into(),
            Identity => "e".into(),
            InnerL => "L".into(),
            InnerR => "R".into(),
            InnerT => "T".into(),
            Associator => "a".into(),
            Commutator => "K".into(),
            Var(c) => (c as char).to_string(),
            Fresh(k) => format!("v{k}"),
            Pattern(c) => format!("?{}", c as char),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Which symbols an environment accepts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub name: &'static str,
    operators: Vec<Symbol>,
    constants: Vec<Symbol>,
    variables: Vec<u8>,
    fresh: bool,
}

impl Signature {
    /// Robinson arithmetic: `0`, `S`, `+`, `*`.
    pub fn robinson() -> Self {
        Signature {
            name: "ra",
            operators: vec![Symbol::Succ, Symbol::Add, Symbol::Mul],
            constants: vec![Symbol::Zero],
            variables: vec![],
            fresh: false,
        }
    }

    /// Polynomial arithmetic: Robinson plus `^` and variables `x y z`.
    pub fn polynomial() -> Self {
        Signature {
            name: "poly",
            operators: vec![Symbol::Succ, Symbol::Add, Symbol::Mul, Symbol::Pow],
            constants: vec![Symbol::Zero],
            variables: b"xyz".to_vec(),
            fresh: false,
        }
    }

    /// Loop theory goals: `=` at the root, quasigroup operations, inner
    /// mappings, object variables `x y z u v w` and fresh `v<k>`.
    pub fn aim() -> Self {
        Signature {
            name: "aim",
            operators: vec![
                Symbol::Equals,
                Symbol::Mul,
                Symbol::LeftDiv,
                Symbol::RightDiv,
                Symbol::InnerT,
                Symbol::Commutator,
                Symbol::InnerL,
                Symbol::InnerR,
                Symbol::Associator,
            ],
            constants: vec![Symbol::Identity],
            variables: b"xyzuvw".to_vec(),
            fresh: true,
        }
    }

    pub fn contains(&self, sym: Symbol) -> bool {
        match sym {
            Symbol::Var(c) => self.variables.contains(&c),
            Symbol::Fresh(_) => self.fresh,
            // Patterns are checked by the rule constructor, not the signature.
            Symbol::Pattern(_) => true,
            s => self.operators.contains(&s) || self.constants.contains(&s),
        }
    }

    pub fn operators(&self) -> &[Symbol] {
        &self.operators
    }

    /// Named leaves (constants and object variables), in a fixed order.
    pub fn named_leaves(&self) -> Vec<Symbol> {
        self.constants
            .iter()
            .copied()
            .chain(self.variables.iter().map(|&c| Symbol::Var(c)))
            .collect()
    }

    pub fn variables(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.variables.iter().map(|&c| Symbol::Var(c))
    }

    pub fn allows_fresh(&self) -> bool {
        self.fresh
    }

    /// Checks every node of `t` against this signature.
    pub fn check(&self, t: &Term) -> Result<(), TermError> {
        let mut err = None;
        t.visit(&mut |node| {
            if err.is_none() && (!self.contains(node.symbol()) || node.symbol().kind() == SymbolKind::PatternVariable)
            {
                err = Some(TermError::UnknownSymbol(node.symbol().name()));
            }
        });
        err.map_or(Ok(()), Err)
    }
}

/// Child-index address of a subterm, starting at the root.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path(pub Vec<usize>);

impl Path {
    pub fn root() -> Self {
        Path(Vec::new())
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn child(&self, i: usize) -> Path {
        let mut v = self.0.clone();
        v.push(i);
        Path(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Path {
    fn from(v: Vec<usize>) -> Self {
        Path(v)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, PartialEq, Eq, Hash)]
struct Node {
    sym: Symbol,
    args: Vec<Term>,
}

/// An immutable, cheaply clonable term.
#[derive(Clone)]
pub struct Term(Arc<Node>);

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl Eq for Term {}

impl std::hash::Hash for Term {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.0.hash(state)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_term(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_term(self))
    }
}

impl Term {
    /// Builds a node, checking the arity.
    pub fn new(sym: Symbol, args: Vec<Term>) -> Result<Term, TermError> {
        if args.len() != sym.arity() {
            return Err(TermError::Arity {
                symbol: sym.name(),
                expected: sym.arity(),
                found: args.len(),
            });
        }
        Ok(Term(Arc::new(Node { sym, args })))
    }

    /// Builds a node whose arity the caller already knows to be right.
    pub(crate) fn app(sym: Symbol, args: Vec<Term>) -> Term {
        debug_assert_eq!(args.len(), sym.arity(), "arity of {sym}");
        Term(Arc::new(Node { sym, args }))
    }

    pub fn leaf(sym: Symbol) -> Term {
        Term::app(sym, Vec::new())
    }

    pub fn zero() -> Term {
        Term::leaf(Symbol::Zero)
    }

    pub fn var(name: char) -> Term {
        Term::leaf(Symbol::Var(name as u8))
    }

    pub fn succ(t: Term) -> Term {
        Term::app(Symbol::Succ, vec![t])
    }

    pub fn add(a: Term, b: Term) -> Term {
        Term::app(Symbol::Add, vec![a, b])
    }

    pub fn mul(a: Term, b: Term) -> Term {
        Term::app(Symbol::Mul, vec![a, b])
    }

    pub fn pow(a: Term, b: Term) -> Term {
        Term::app(Symbol::Pow, vec![a, b])
    }

    pub fn equation(lhs: Term, rhs: Term) -> Term {
        Term::app(Symbol::Equals, vec![lhs, rhs])
    }

    /// `S^n(0)`.
    pub fn numeral(n: u64) -> Term {
        (0..n).fold(Term::zero(), |t, _| Term::succ(t))
    }

    /// Value of a successor tower, if this term is one.
    pub fn as_numeral(&self) -> Option<u64> {
        let mut n = 0;
        let mut t = self;
        loop {
            match t.symbol() {
                Symbol::Zero => return Some(n),
                Symbol::Succ => {
                    n += 1;
                    t = &t.args()[0];
                }
                _ => return None,
            }
        }
    }

    pub fn symbol(&self) -> Symbol {
        self.0.sym
    }

    pub fn args(&self) -> &[Term] {
        &self.0.args
    }

    pub fn arg(&self, i: usize) -> &Term {
        &self.0.args[i]
    }

    pub fn is_leaf(&self) -> bool {
        self.0.args.is_empty()
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.args().iter().map(Term::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.args().iter().map(Term::depth).max().unwrap_or(0)
    }

    /// Pre-order visit of every node.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        for a in self.args() {
            a.visit(f);
        }
    }

    pub fn contains_symbol(&self, sym: Symbol) -> bool {
        self.symbol() == sym || self.args().iter().any(|a| a.contains_symbol(sym))
    }

    /// Smallest `k` such that `v<k>` does not occur in this term.
    pub fn next_fresh_index(&self) -> u32 {
        let mut next = 0;
        self.visit(&mut |n| {
            if let Symbol::Fresh(k) = n.symbol() {
                next = next.max(k + 1);
            }
        });
        next
    }

    pub fn subterm_at(&self, p: &Path) -> Result<&Term, TermError> {
        let mut t = self;
        for (depth, &i) in p.0.iter().enumerate() {
            t = t.args().get(i).ok_or_else(|| TermError::InvalidPath {
                path: p.to_string(),
                depth,
            })?;
        }
        Ok(t)
    }

    pub fn is_valid_path(&self, p: &Path) -> bool {
        self.subterm_at(p).is_ok()
    }

    /// Copy of `self` with the subterm at `p` replaced. Only the spine from
    /// the root to `p` is rebuilt; every other subtree is shared.
    pub fn replace_at(&self, p: &Path, new: Term) -> Result<Term, TermError> {
        self.subterm_at(p)?;
        Ok(self.replace_unchecked(&p.0, new))
    }

    fn replace_unchecked(&self, p: &[usize], new: Term) -> Term {
        match p.split_first() {
            None => new,
            Some((&i, rest)) => {
                let mut args = self.args().to_vec();
                args[i] = args[i].replace_unchecked(rest, new);
                Term::app(self.symbol(), args)
            }
        }
    }

    /// All valid paths in post-order (children left to right, then node).
    pub fn paths_post_order(&self) -> Vec<Path> {
        fn go(t: &Term, prefix: &mut Vec<usize>, out: &mut Vec<Path>) {
            for i in 0..t.args().len() {
                prefix.push(i);
                go(t.arg(i), prefix, out);
                prefix.pop();
            }
            out.push(Path(prefix.clone()));
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// All valid paths in pre-order.
    pub fn paths(&self) -> Vec<Path> {
        fn go(t: &Term, prefix: &mut Vec<usize>, out: &mut Vec<Path>) {
            out.push(Path(prefix.clone()));
            for i in 0..t.args().len() {
                prefix.push(i);
                go(t.arg(i), prefix, out);
                prefix.pop();
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }
}

/// Free-standing form of [`Term::subterm_at`].
pub fn subterm_at<'a>(t: &'a Term, p: &Path) -> Result<&'a Term, TermError> {
    t.subterm_at(p)
}
