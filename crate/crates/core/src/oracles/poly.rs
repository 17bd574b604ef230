use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::OnceLock;

use crate::envs::{EnvKind, EnvSpec};
use crate::error::OracleError;
use crate::term::{Path, Symbol, Term};

/// Largest coefficient or exponent the normaliser accepts.
pub const DEFAULT_VALUE_CAP: u64 = 100;

const VARS: [u8; 3] = [b'x', b'y', b'z'];

/// Exponents of x, y, z.
type Mono = [u64; 3];

/// A polynomial with natural coefficients, as monomial -> coefficient.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Poly(BTreeMap<Mono, u64>);

impl Poly {
    fn constant(c: u64) -> Poly {
        let mut m = BTreeMap::new();
        if c > 0 {
            m.insert([0; 3], c);
        }
        Poly(m)
    }

    fn var(i: usize) -> Poly {
        let mut e = [0; 3];
        e[i] = 1;
        Poly(BTreeMap::from([(e, 1)]))
    }

    fn as_constant(&self) -> Option<u64> {
        match self.0.len() {
            0 => Some(0),
            1 => self.0.get(&[0; 3]).copied(),
            _ => None,
        }
    }

    fn add(&self, o: &Poly, cap: u64) -> Result<Poly, OracleError> {
        let mut out = self.0.clone();
        for (m, c) in &o.0 {
            let slot = out.entry(*m).or_insert(0);
            *slot = bounded(*slot + c, cap)?;
        }
        Ok(Poly(out))
    }

    fn mul(&self, o: &Poly, cap: u64) -> Result<Poly, OracleError> {
        let mut out = BTreeMap::new();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &o.0 {
                let mut m = [0; 3];
                for i in 0..3 {
                    m[i] = bounded(ma[i] + mb[i], cap)?;
                }
                let slot = out.entry(m).or_insert(0);
                *slot = bounded(*slot + bounded(ca.saturating_mul(*cb), cap)?, cap)?;
            }
        }
        Ok(Poly(out))
    }

    fn pow(&self, k: u64, cap: u64) -> Result<Poly, OracleError> {
        let mut out = Poly::constant(1);
        for _ in 0..k {
            out = out.mul(self, cap)?;
        }
        Ok(out)
    }

    /// Monomials in canonical order: descending total degree, then
    /// descending exponent vector.
    fn sorted(&self) -> Vec<(Mono, u64)> {
        let mut v: Vec<(Mono, u64)> = self.0.iter().map(|(m, c)| (*m, *c)).collect();
        v.sort_by(|a, b| mono_order(&b.0, &a.0));
        v
    }

    /// The canonical term.
    pub fn to_term(&self) -> Term {
        let monos: Vec<Term> = self.sorted().iter().map(|(m, c)| mono_term(m, *c)).collect();
        right_nest(monos, Term::add).unwrap_or_else(Term::zero)
    }
}

fn bounded(v: u64, cap: u64) -> Result<u64, OracleError> {
    if v > cap {
        Err(OracleError::ValueBound { cap })
    } else {
        Ok(v)
    }
}

/// Graded lexicographic order with x before y before z.
fn mono_order(a: &Mono, b: &Mono) -> Ordering {
    let da: u64 = a.iter().sum();
    let db: u64 = b.iter().sum();
    da.cmp(&db).then_with(|| a.cmp(b))
}

fn right_nest(items: Vec<Term>, op: fn(Term, Term) -> Term) -> Option<Term> {
    items.into_iter().rev().reduce(|acc, t| op(t, acc))
}

fn mono_term(m: &Mono, c: u64) -> Term {
    let factors: Vec<Term> = (0..3)
        .filter(|&i| m[i] > 0)
        .map(|i| {
            let v = Term::var(VARS[i] as char);
            if m[i] == 1 {
                v
            } else {
                Term::pow(v, Term::numeral(m[i]))
            }
        })
        .collect();
    match right_nest(factors, Term::mul) {
        None => Term::numeral(c),
        Some(pp) if c == 1 => pp,
        Some(pp) => Term::mul(Term::numeral(c), pp),
    }
}

/// Algebraic value of a polynomial-signature term. Exponents must be
/// constant; every intermediate coefficient and exponent must stay within
/// `cap`.
pub fn poly_of(t: &Term, cap: u64) -> Result<Poly, OracleError> {
    match t.symbol() {
        Symbol::Zero => Ok(Poly::default()),
        Symbol::Succ => poly_of(t.arg(0), cap)?.add(&Poly::constant(1), cap),
        Symbol::Var(v) => match VARS.iter().position(|&c| c == v) {
            Some(i) => Ok(Poly::var(i)),
            None => Err(OracleError::Unsupported(format!("variable `{}`", v as char))),
        },
        Symbol::Add => poly_of(t.arg(0), cap)?.add(&poly_of(t.arg(1), cap)?, cap),
        Symbol::Mul => poly_of(t.arg(0), cap)?.mul(&poly_of(t.arg(1), cap)?, cap),
        Symbol::Pow => {
            let base = poly_of(t.arg(0), cap)?;
            let k = poly_of(t.arg(1), cap)?
                .as_constant()
                .ok_or_else(|| OracleError::Unsupported(format!("non-constant exponent in {t}")))?;
            base.pow(k, cap)
        }
        sym => Err(OracleError::Unsupported(format!("symbol `{sym}`"))),
    }
}

/// Canonical normal form: a right-nested sum of monomials in descending
/// graded lexicographic order, each `c * pp` (or `pp` when `c = 1`) with
/// `pp` a right-nested product of `v` or `v^k`, numerals as successor
/// towers, and `0` for the empty sum.
pub fn poly_normalize(t: &Term) -> Result<Term, OracleError> {
    poly_normalize_capped(t, DEFAULT_VALUE_CAP)
}

pub fn poly_normalize_capped(t: &Term, cap: u64) -> Result<Term, OracleError> {
    Ok(poly_of(t, cap)?.to_term())
}

/// Numeric value under an assignment to x, y, z; `None` on overflow.
pub fn eval_poly(t: &Term, env: &[u64; 3]) -> Option<u128> {
    match t.symbol() {
        Symbol::Zero => Some(0),
        Symbol::Succ => eval_poly(t.arg(0), env)?.checked_add(1),
        Symbol::Var(v) => Some(env[VARS.iter().position(|&c| c == v)?] as u128),
        Symbol::Add => eval_poly(t.arg(0), env)?.checked_add(eval_poly(t.arg(1), env)?),
        Symbol::Mul => eval_poly(t.arg(0), env)?.checked_mul(eval_poly(t.arg(1), env)?),
        Symbol::Pow => {
            let base = eval_poly(t.arg(0), env)?;
            let k = u32::try_from(eval_poly(t.arg(1), env)?).ok()?;
            base.checked_pow(k)
        }
        _ => None,
    }
}

/// A rewrite derivation from a term to its normal form using only the
/// polynomial environment's rewrite actions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolyDerivation {
    /// `(position, action id)` per rewrite, in order.
    pub rewrites: Vec<(Path, usize)>,
    pub normal_form: Term,
}

impl PolyDerivation {
    pub fn steps(&self) -> usize {
        self.rewrites.len()
    }

    /// Replayable env actions: before each rewrite the cursor is walked
    /// down from the root.
    pub fn actions(&self) -> Vec<usize> {
        let env = poly_env();
        self.rewrites
            .iter()
            .flat_map(|(p, a)| env.actions_for_rewrite_at(p, *a))
            .collect()
    }
}

// Action ids in the polynomial table.
const ADD_ZERO: usize = 0;
const INTRO_ZERO: usize = 1;
const ADD_SUCC: usize = 2;
const SUCC_ADD: usize = 3;
const MUL_ZERO: usize = 4;
const MUL_SUCC: usize = 5;
const COMM: usize = 9;
const POW_ZERO: usize = 10;
const POW_SUCC: usize = 11;
const ASSOC_R: usize = 13;
const ASSOC_L: usize = 14;
const DIST: usize = 15;
const UNDIST: usize = 16;
const MUL_ONE: usize = 17;
const INTRO_ONE: usize = 18;
const POW_ONE: usize = 20;
const INTRO_POW_ONE: usize = 21;
const POW_ADD_REV: usize = 23;
const POW_POW: usize = 26;

fn poly_env() -> &'static EnvSpec {
    static ENV: OnceLock<EnvSpec> = OnceLock::new();
    ENV.get_or_init(|| EnvSpec::new(EnvKind::Poly))
}

/// Derives the normal form of `t` by rewriting bottom-up with env actions.
/// The rewrite count is the polynomial difficulty measure.
pub fn poly_derivation(t: &Term, cap: u64) -> Result<PolyDerivation, OracleError> {
    // The algebraic pass validates the fragment and the value bound, so
    // the rewriting pass below cannot fail or blow up.
    let target = poly_normalize_capped(t, cap)?;
    let mut d = Deriver {
        env: poly_env(),
        log: Vec::new(),
    };
    let normal_form = d.norm(t.clone(), &Path::root());
    if normal_form != target {
        return Err(OracleError::Unsupported(format!("derivation of {t} ended at {normal_form}")));
    }
    Ok(PolyDerivation {
        rewrites: d.log,
        normal_form,
    })
}

/// Sort key of a canonical summand or factor.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Key {
    /// Summand: its exponent vector (larger comes first).
    Mono(Mono),
    /// Factor: numerals first, then x, y, z.
    Factor(usize),
}

/// Exponent vector of a canonical power product or monomial.
fn mono_of(t: &Term) -> Mono {
    let mut e = [0; 3];
    fn go(t: &Term, e: &mut Mono) {
        match t.symbol() {
            Symbol::Var(v) => e[var_index(v)] += 1,
            Symbol::Pow => {
                let Symbol::Var(v) = t.arg(0).symbol() else { unreachable!("canonical factor") };
                e[var_index(v)] += t.arg(1).as_numeral().expect("canonical exponent");
            }
            Symbol::Mul => {
                go(t.arg(0), e);
                go(t.arg(1), e);
            }
            _ => {}
        }
    }
    go(t, &mut e);
    e
}

fn var_index(v: u8) -> usize {
    VARS.iter().position(|&c| c == v).expect("polynomial variable")
}

fn factor_key(t: &Term) -> usize {
    match t.symbol() {
        Symbol::Var(v) => 1 + var_index(v),
        Symbol::Pow => match t.arg(0).symbol() {
            Symbol::Var(v) => 1 + var_index(v),
            _ => unreachable!("canonical factor"),
        },
        _ => 0,
    }
}

/// True when `a` must stay before `b`; `None` when they combine.
fn precedes(a: &Key, b: &Key) -> Option<bool> {
    match (a, b) {
        (Key::Mono(x), Key::Mono(y)) => match mono_order(x, y) {
            Ordering::Equal => None,
            o => Some(o == Ordering::Greater),
        },
        (Key::Factor(x), Key::Factor(y)) => match x.cmp(y) {
            Ordering::Equal => None,
            o => Some(o == Ordering::Less),
        },
        _ => unreachable!("mixed keys"),
    }
}

struct Deriver {
    env: &'static EnvSpec,
    log: Vec<(Path, usize)>,
}

impl Deriver {
    /// Applies action `a` at `local` inside `t`, where `t` sits at `base`.
    fn rw(&mut self, t: &Term, base: &Path, local: &[usize], a: usize) -> Term {
        let p = Path(local.to_vec());
        let sub = t.subterm_at(&p).expect("derivation path");
        let new = self.env.actions[a]
            .rules()
            .iter()
            .find_map(|r| r.apply(sub, 0))
            .unwrap_or_else(|| panic!("action {a} does not apply to {sub}"));
        let mut full = base.0.clone();
        full.extend_from_slice(local);
        self.log.push((Path(full), a));
        t.replace_at(&p, new).expect("derivation path")
    }

    /// Runs `f` on child `i` of `t` and splices the result back.
    fn at(&mut self, t: &Term, base: &Path, i: usize, f: impl FnOnce(&mut Self, Term, &Path) -> Term) -> Term {
        let child = f(self, t.arg(i).clone(), &base.child(i));
        t.replace_at(&Path(vec![i]), child).expect("child exists")
    }

    fn norm(&mut self, t: Term, base: &Path) -> Term {
        match t.symbol() {
            Symbol::Zero | Symbol::Var(_) => t,
            Symbol::Succ => {
                let t = self.at(&t, base, 0, |d, c, b| d.norm(c, b));
                if t.as_numeral().is_some() {
                    return t;
                }
                // S(P) -> S(P + 0) -> P + S(0), then merge the constant in
                let t = self.rw(&t, base, &[0], INTRO_ZERO);
                let t = self.rw(&t, base, &[], SUCC_ADD);
                self.add(t, base)
            }
            Symbol::Add => {
                let t = self.at(&t, base, 0, |d, c, b| d.norm(c, b));
                let t = self.at(&t, base, 1, |d, c, b| d.norm(c, b));
                self.add(t, base)
            }
            Symbol::Mul => {
                let t = self.at(&t, base, 0, |d, c, b| d.norm(c, b));
                let t = self.at(&t, base, 1, |d, c, b| d.norm(c, b));
                self.mul(t, base)
            }
            Symbol::Pow => {
                let t = self.at(&t, base, 0, |d, c, b| d.norm(c, b));
                let t = self.at(&t, base, 1, |d, c, b| d.norm(c, b));
                self.pow(t, base)
            }
            sym => unreachable!("`{sym}` rejected by the algebraic pass"),
        }
    }

    /// `A + B` with both sides canonical.
    fn add(&mut self, t: Term, base: &Path) -> Term {
        let (a, b) = (t.arg(0), t.arg(1));
        if b.symbol() == Symbol::Zero {
            return self.rw(&t, base, &[], ADD_ZERO);
        }
        if a.symbol() == Symbol::Zero {
            let t = self.rw(&t, base, &[], COMM);
            return self.rw(&t, base, &[], ADD_ZERO);
        }
        self.merge(t, base, Symbol::Add)
    }

    /// Merges two canonical sorted chains joined by `op` (`+` or `*`).
    fn merge(&mut self, t: Term, base: &Path, op: Symbol) -> Term {
        if t.arg(0).symbol() == op {
            // (a1 . A') . B -> a1 . (A' . B)
            let t = self.rw(&t, base, &[], ASSOC_R);
            let t = self.at(&t, base, 1, |d, c, b| d.merge(c, b, op));
            return self.insert(t, base, op);
        }
        self.insert(t, base, op)
    }

    fn key(&self, t: &Term, op: Symbol) -> Key {
        if op == Symbol::Add {
            Key::Mono(mono_of(t))
        } else {
            Key::Factor(factor_key(t))
        }
    }

    /// `m . C` with `m` a single item and `C` a canonical chain.
    fn insert(&mut self, t: Term, base: &Path, op: Symbol) -> Term {
        let m = t.arg(0);
        let c = t.arg(1);
        let chain = c.symbol() == op;
        let first = if chain { c.arg(0) } else { c };
        match precedes(&self.key(m, op), &self.key(first, op)) {
            Some(true) => t,
            None if !chain => self.combine(t, base, op),
            None => {
                let t = self.rw(&t, base, &[], ASSOC_L);
                self.at(&t, base, 0, |d, c, b| d.combine(c, b, op))
            }
            Some(false) if !chain => self.rw(&t, base, &[], COMM),
            Some(false) => {
                // m . (c1 . C') -> (m . c1) . C' -> (c1 . m) . C' -> c1 . (m . C')
                let t = self.rw(&t, base, &[], ASSOC_L);
                let t = self.rw(&t, base, &[0], COMM);
                let t = self.rw(&t, base, &[], ASSOC_R);
                self.at(&t, base, 1, |d, c, b| d.insert(c, b, op))
            }
        }
    }

    fn combine(&mut self, t: Term, base: &Path, op: Symbol) -> Term {
        if op == Symbol::Add {
            self.combine_like(t, base)
        } else {
            self.combine_factors(t, base)
        }
    }

    /// Two monomials with the same power product.
    fn combine_like(&mut self, t: Term, base: &Path) -> Term {
        if t.arg(0).as_numeral().is_some() {
            return self.add_numerals(t, base);
        }
        // bring both to `pp * c`, factor out pp, add the coefficients
        let t = self.at(&t, base, 0, |d, c, b| d.coefficient_last(c, b));
        let t = self.at(&t, base, 1, |d, c, b| d.coefficient_last(c, b));
        let t = self.rw(&t, base, &[], UNDIST);
        let t = self.at(&t, base, 1, |d, c, b| d.add_numerals(c, b));
        self.rw(&t, base, &[], COMM)
    }

    /// `c * pp` -> `pp * c`; `pp` -> `pp * 1`.
    fn coefficient_last(&mut self, t: Term, base: &Path) -> Term {
        if t.symbol() == Symbol::Mul && t.arg(0).as_numeral().is_some() {
            self.rw(&t, base, &[], COMM)
        } else {
            self.rw(&t, base, &[], INTRO_ONE)
        }
    }

    /// `m + n` on numerals.
    fn add_numerals(&mut self, t: Term, base: &Path) -> Term {
        if t.arg(1).symbol() == Symbol::Zero {
            return self.rw(&t, base, &[], ADD_ZERO);
        }
        let t = self.rw(&t, base, &[], ADD_SUCC);
        self.at(&t, base, 0, |d, c, b| d.add_numerals(c, b))
    }

    /// `m * n` on numerals.
    fn mul_numerals(&mut self, t: Term, base: &Path) -> Term {
        match t.arg(1).as_numeral() {
            Some(0) => self.rw(&t, base, &[], MUL_ZERO),
            Some(1) => self.rw(&t, base, &[], MUL_ONE),
            _ => {
                let t = self.rw(&t, base, &[], MUL_SUCC);
                let t = self.at(&t, base, 0, |d, c, b| d.mul_numerals(c, b));
                self.add_numerals(t, base)
            }
        }
    }

    /// Two factors with the same key: numerals or powers of one variable.
    fn combine_factors(&mut self, t: Term, base: &Path) -> Term {
        if t.arg(0).as_numeral().is_some() {
            return self.mul_numerals(t, base);
        }
        let mut t = t;
        for i in 0..2 {
            if t.arg(i).symbol() != Symbol::Pow {
                t = self.rw(&t, base, &[i], INTRO_POW_ONE);
            }
        }
        let t = self.rw(&t, base, &[], POW_ADD_REV);
        self.at(&t, base, 1, |d, c, b| d.add_numerals(c, b))
    }

    /// `A * B` with both sides canonical.
    fn mul(&mut self, t: Term, base: &Path) -> Term {
        let (a, b) = (t.arg(0), t.arg(1));
        if b.symbol() == Symbol::Zero {
            return self.rw(&t, base, &[], MUL_ZERO);
        }
        if a.symbol() == Symbol::Zero {
            let t = self.rw(&t, base, &[], COMM);
            return self.rw(&t, base, &[], MUL_ZERO);
        }
        if b.as_numeral() == Some(1) {
            return self.rw(&t, base, &[], MUL_ONE);
        }
        if a.as_numeral() == Some(1) {
            let t = self.rw(&t, base, &[], COMM);
            return self.rw(&t, base, &[], MUL_ONE);
        }
        if b.symbol() == Symbol::Add {
            let t = self.rw(&t, base, &[], DIST);
            let t = self.at(&t, base, 0, |d, c, b| d.mul(c, b));
            let t = self.at(&t, base, 1, |d, c, b| d.mul(c, b));
            return self.add(t, base);
        }
        if a.symbol() == Symbol::Add {
            let t = self.rw(&t, base, &[], COMM);
            return self.mul(t, base);
        }
        self.merge(t, base, Symbol::Mul)
    }

    /// `A ^ k` with `A` canonical and `k` a numeral.
    fn pow(&mut self, t: Term, base: &Path) -> Term {
        let k = t.arg(1).as_numeral().expect("constant exponent");
        let a = t.arg(0);
        match k {
            0 => self.rw(&t, base, &[], POW_ZERO),
            1 => self.rw(&t, base, &[], POW_ONE),
            _ if matches!(a.symbol(), Symbol::Var(_)) => t,
            _ if a.symbol() == Symbol::Pow && matches!(a.arg(0).symbol(), Symbol::Var(_)) => {
                let t = self.rw(&t, base, &[], POW_POW);
                self.at(&t, base, 1, |d, c, b| d.mul_numerals(c, b))
            }
            _ => {
                let t = self.rw(&t, base, &[], POW_SUCC);
                let t = self.at(&t, base, 0, |d, c, b| d.pow(c, b));
                self.mul(t, base)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::Problem;
    use crate::term::{parse_term, Signature};

    fn p(s: &str) -> Term {
        parse_term(s, &Signature::polynomial()).unwrap()
    }

    #[test]
    fn worked_example() {
        let t = p("(* (^ (* z y) 3) (* (+ (* 2 0) y) (+ (* 1 x) z)))");
        let want = p("(+ (* x (* (^ y 4) (^ z 3))) (* (^ y 4) (^ z 4)))");
        assert_eq!(poly_normalize(&t).unwrap(), want);
        let d = poly_derivation(&t, DEFAULT_VALUE_CAP).unwrap();
        assert_eq!(d.normal_form, want);
    }

    #[test]
    fn canonical_shapes() {
        assert_eq!(poly_normalize(&p("x")).unwrap(), p("x"));
        assert_eq!(poly_normalize(&p("(* 0 x)")).unwrap(), p("0"));
        assert_eq!(poly_normalize(&p("(+ 2 1)")).unwrap(), p("3"));
        assert_eq!(
            poly_normalize(&p("(* (+ x y) (+ x y))")).unwrap(),
            p("(+ (^ x 2) (+ (* 2 (* x y)) (^ y 2)))")
        );
        assert_eq!(poly_normalize(&p("(+ x (+ 1 (* z x)))")).unwrap(), p("(+ (* x z) (+ x 1))"));
    }

    #[test]
    fn value_cap() {
        let t = p("(^ (+ x 1) 7)");
        assert!(matches!(poly_normalize_capped(&t, 20), Err(OracleError::ValueBound { cap: 20 })));
        assert!(poly_normalize(&t).is_ok());
        assert!(matches!(poly_normalize(&p("(^ x y)")), Err(OracleError::Unsupported(_))));
    }

    #[test]
    fn derivations_replay_to_the_goal() {
        let env = EnvSpec::new(EnvKind::Poly).with_step_limit(100_000);
        for s in [
            "x",
            "(S x)",
            "(S (S (* x y)))",
            "(* (+ x y) (+ x y))",
            "(^ (+ x (S 0)) 3)",
            "(+ (* 3 x) (* x 2))",
            "(* (* y x) (* 2 (* z x)))",
            "(^ (^ x 2) 3)",
            "(* 0 (+ x y))",
            "(+ 0 (* 1 z))",
            "(^ (* x y) 0)",
            "(* (+ (S 0) x) (S (S 0)))",
        ] {
            let t = p(s);
            let d = poly_derivation(&t, DEFAULT_VALUE_CAP).unwrap();
            let goal = poly_normalize(&t).unwrap();
            assert_eq!(d.normal_form, goal, "{s}");
            let r = env.replay(&Problem::new("p", t.clone()).with_goal(goal.clone()), &d.actions()).unwrap();
            assert_eq!(r.next.term, goal, "{s}");
        }
    }
}
