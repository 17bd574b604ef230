use super::{Signature, Symbol, Term};
use crate::error::TermError;

fn is_symbol_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "_\\/*+=?^.-".contains(c)
}

#[derive(Debug, PartialEq)]
enum Token<'a> {
    Open(usize),
    Close(usize),
    Atom(usize, &'a str),
}

fn tokenize(text: &str) -> Result<Vec<Token<'_>>, TermError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '(' {
            out.push(Token::Open(i));
            chars.next();
        } else if c == ')' {
            out.push(Token::Close(i));
            chars.next();
        } else if is_symbol_char(c) {
            let start = i;
            let mut end = i;
            while let Some(&(j, d)) = chars.peek() {
                if !is_symbol_char(d) {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
            out.push(Token::Atom(start, &text[start..end]));
        } else {
            return Err(TermError::Syntax {
                pos: i,
                msg: format!("unexpected character {c:?}"),
            });
        }
    }
    Ok(out)
}

/// Resolves a symbol name. Decimal literals are successor-tower sugar in
/// the arithmetic signatures; in the loop signature `1` names the identity.
fn resolve(name: &str, sig: &Signature, patterns: bool) -> Result<Resolved, TermError> {
    let unknown = || TermError::UnknownSymbol(name.to_string());
    let sym = match name {
        "0" if sig.contains(Symbol::Zero) => Symbol::Zero,
        "S" => Symbol::Succ,
        "+" => Symbol::Add,
        "*" | "." => Symbol::Mul,
        "^" => Symbol::Pow,
        "=" => Symbol::Equals,
        "\\" => Symbol::LeftDiv,
        "/" => Symbol::RightDiv,
        "e" => Symbol::Identity,
        "1" if sig.contains(Symbol::Identity) => Symbol::Identity,
        "L" => Symbol::InnerL,
        "R" => Symbol::InnerR,
        "T" => Symbol::InnerT,
        "a" => Symbol::Associator,
        "K" => Symbol::Commutator,
        _ => {
            let bytes = name.as_bytes();
            if bytes.iter().all(u8::is_ascii_digit) && sig.contains(Symbol::Zero) {
                let n: u64 = name.parse().map_err(|_| unknown())?;
                return Ok(Resolved::Numeral(n));
            }
            if bytes.len() == 1 && bytes[0].is_ascii_lowercase() {
                Symbol::Var(bytes[0])
            } else if bytes.len() >= 2 && bytes[0] == b'v' && bytes[1..].iter().all(u8::is_ascii_digit) {
                Symbol::Fresh(name[1..].parse().map_err(|_| unknown())?)
            } else if patterns && bytes.len() == 2 && bytes[0] == b'?' && bytes[1].is_ascii_lowercase() {
                Symbol::Pattern(bytes[1])
            } else {
                return Err(unknown());
            }
        }
    };
    if !sig.contains(sym) {
        return Err(unknown());
    }
    Ok(Resolved::Symbol(sym))
}

enum Resolved {
    Symbol(Symbol),
    Numeral(u64),
}

struct Parser<'a, 'b> {
    tokens: Vec<Token<'a>>,
    pos: usize,
    sig: &'b Signature,
    patterns: bool,
    len: usize,
}

impl Parser<'_, '_> {
    fn eof(&self) -> TermError {
        TermError::Syntax {
            pos: self.len,
            msg: "unexpected end of input".into(),
        }
    }

    fn head(&self, name: &str, at: usize, args: Vec<Term>) -> Result<Term, TermError> {
        match resolve(name, self.sig, self.patterns).map_err(|e| match e {
            TermError::UnknownSymbol(s) => TermError::UnknownSymbolAt { symbol: s, pos: at },
            e => e,
        })? {
            Resolved::Symbol(sym) => Term::new(sym, args),
            Resolved::Numeral(n) if args.is_empty() => Ok(Term::numeral(n)),
            Resolved::Numeral(_) => Err(TermError::Arity {
                symbol: name.to_string(),
                expected: 0,
                found: args.len(),
            }),
        }
    }

    fn term(&mut self) -> Result<Term, TermError> {
        match self.tokens.get(self.pos) {
            None => Err(self.eof()),
            Some(&Token::Close(i)) => Err(TermError::Syntax {
                pos: i,
                msg: "unexpected ')'".into(),
            }),
            Some(&Token::Atom(i, name)) => {
                self.pos += 1;
                self.head(name, i, Vec::new())
            }
            Some(&Token::Open(i)) => {
                self.pos += 1;
                let (at, name) = match self.tokens.get(self.pos) {
                    Some(&Token::Atom(j, name)) => (j, name),
                    Some(_) => {
                        return Err(TermError::Syntax {
                            pos: i + 1,
                            msg: "expected a symbol after '('".into(),
                        })
                    }
                    None => return Err(self.eof()),
                };
                self.pos += 1;
                let mut args = Vec::new();
                loop {
                    match self.tokens.get(self.pos) {
                        None => return Err(self.eof()),
                        Some(Token::Close(_)) => {
                            self.pos += 1;
                            break;
                        }
                        Some(_) => args.push(self.term()?),
                    }
                }
                self.head(name, at, args)
            }
        }
    }
}

fn parse_with(text: &str, sig: &Signature, patterns: bool) -> Result<Term, TermError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        sig,
        patterns,
        len: text.len(),
    };
    let t = p.term()?;
    if let Some(tok) = p.tokens.get(p.pos) {
        let pos = match *tok {
            Token::Open(i) | Token::Close(i) | Token::Atom(i, _) => i,
        };
        return Err(TermError::Syntax {
            pos,
            msg: "trailing input after term".into(),
        });
    }
    Ok(t)
}

/// Parses an s-expression term over `sig`. Pattern variables are rejected.
pub fn parse_term(text: &str, sig: &Signature) -> Result<Term, TermError> {
    parse_with(text, sig, false)
}

/// Parses a rule pattern: like [`parse_term`] but `?x`-style pattern
/// variables are allowed.
pub(crate) fn parse_pattern(text: &str, sig: &Signature) -> Result<Term, TermError> {
    parse_with(text, sig, true)
}

/// Canonical s-expression: leaves bare, applications parenthesised, single
/// spaces.
pub fn print_term(t: &Term) -> String {
    let mut out = String::new();
    write_term(t, &mut out);
    out
}

fn write_term(t: &Term, out: &mut String) {
    if t.is_leaf() {
        out.push_str(&t.symbol().name());
        return;
    }
    out.push('(');
    out.push_str(&t.symbol().name());
    for a in t.args() {
        out.push(' ');
        write_term(a, out);
    }
    out.push(')');
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_robinson_example() {
        let t = parse_term("(+ (S (S 0)) (S 0))", &Signature::robinson()).unwrap();
        assert_eq!(t, Term::add(Term::numeral(2), Term::numeral(1)));
        assert_eq!(parse_term("0", &Signature::robinson()).unwrap(), Term::zero());
    }

    #[test]
    fn parses_polynomial_with_variable() {
        let t = parse_term("(* x (S 0))", &Signature::polynomial()).unwrap();
        assert_eq!(t, Term::mul(Term::var('x'), Term::numeral(1)));
        assert_eq!(parse_term("(^ y 3)", &Signature::polynomial()).unwrap(), Term::pow(Term::var('y'), Term::numeral(3)));
    }

    #[test]
    fn prints_canonically() {
        assert_eq!(print_term(&Term::numeral(3)), "(S (S (S 0)))");
        assert_eq!(print_term(&Term::add(Term::var('x'), Term::zero())), "(+ x 0)");
        let t = parse_term("(T  u\n x)", &Signature::aim()).unwrap();
        assert_eq!(print_term(&t), "(T u x)");
    }

    #[test]
    fn aim_identity_alias() {
        let sig = Signature::aim();
        assert_eq!(parse_term("1", &sig).unwrap(), parse_term("e", &sig).unwrap());
        let t = parse_term("(\\ x (* x y))", &sig).unwrap();
        assert_eq!(t.symbol(), Symbol::LeftDiv);
        assert_eq!(print_term(&t), "(\\ x (* x y))");
    }

    #[test]
    fn errors() {
        let ra = Signature::robinson();
        assert!(matches!(parse_term("(+ 0", &ra), Err(TermError::Syntax { pos: 4, .. })));
        assert!(matches!(parse_term("(+ 0 0))", &ra), Err(TermError::Syntax { pos: 7, .. })));
        assert!(matches!(parse_term("(+ 0 x)", &ra), Err(TermError::UnknownSymbolAt { pos: 5, .. })));
        assert!(matches!(parse_term("(S 0 0)", &ra), Err(TermError::Arity { expected: 1, found: 2, .. })));
        assert!(matches!(parse_term("(+ 0 #)", &ra), Err(TermError::Syntax { pos: 5, .. })));
        assert!(parse_term("?x", &Signature::polynomial()).is_err());
        assert!(parse_term("", &ra).is_err());
        assert!(parse_term("(T x)", &Signature::aim()).is_err());
    }

    fn arb_aim_term() -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![
            Just(Term::leaf(Symbol::Identity)),
            prop::sample::select(b"xyzuvw".to_vec()).prop_map(|c| Term::leaf(Symbol::Var(c))),
            (0u32..5).prop_map(|k| Term::leaf(Symbol::Fresh(k))),
        ];
        leaf.prop_recursive(5, 40, 3, |inner| {
            (
                prop::sample::select(vec![
                    Symbol::Mul,
                    Symbol::LeftDiv,
                    Symbol::RightDiv,
                    Symbol::InnerT,
                    Symbol::Commutator,
                    Symbol::InnerL,
                    Symbol::InnerR,
                    Symbol::Associator,
                ]),
                prop::collection::vec(inner, 3),
            )
                .prop_map(|(s, mut args)| {
                    args.truncate(s.arity());
                    Term::app(s, args)
                })
        })
    }

    proptest! {
        #[test]
        fn round_trip(t in arb_aim_term()) {
            let sig = Signature::aim();
            prop_assert_eq!(parse_term(&print_term(&t), &sig).unwrap(), t);
        }
    }
}
