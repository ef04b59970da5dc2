//! Text grammars: rationals, polynomials `2*t1^2*t3 - t4`, associative
//! polynomials `2*x2.x1 - x1.x2`, Lie S-expressions and composition
//! expressions.
//!
//! Lie S-expressions: `y3` is a generator, `(b e1 e2 ...)` a left-normed
//! bracket, `(* 3/2 e)` a scalar multiple, `(+ e1 e2 ...)` a sum, `(- e)` or
//! `(- e1 e2)` a difference, `(. e t1^2*t3)` the polynomial action and `0`
//! the zero element.

use std::sync::Arc;

use crate::assoc::{AssocPoly, Word};
use crate::endo::{Composition, Factor, Family};
use crate::error::{Error, Result};
use crate::lie::{Bracketing, LieElement};
use crate::quotient::{Poly, QuotElement, QuotientContext};
use crate::ratlin::Rat;

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parse(msg.into()))
}

/// Splits `s` into signed terms at top-level `+`/`-`.
fn signed_terms(s: &str) -> Result<Vec<(bool, String)>> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return err("empty expression");
    }
    let mut out = Vec::new();
    let mut neg = false;
    let mut cur = String::new();
    let mut prev: Option<char> = None;
    for ch in s.chars() {
        // a sign right after `^`, `/` or `*` belongs to the number
        let glued = matches!(prev, Some('^') | Some('/') | Some('*'));
        if (ch == '+' || ch == '-') && !glued {
            if !cur.is_empty() {
                out.push((neg, std::mem::take(&mut cur)));
            } else if prev.is_some() {
                return err(format!("dangling sign in `{s}`"));
            }
            neg = ch == '-';
        } else {
            cur.push(ch);
        }
        prev = Some(ch);
    }
    if cur.is_empty() {
        return err(format!("trailing sign in `{s}`"));
    }
    out.push((neg, cur));
    Ok(out)
}

fn index(s: &str, prefix: char, n: usize) -> Result<usize> {
    let rest = s.strip_prefix(prefix).ok_or_else(|| Error::Parse(format!("expected `{prefix}<index>`, got `{s}`")))?;
    let i: usize = rest.parse().map_err(|_| Error::Parse(format!("bad index in `{s}`")))?;
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    Ok(i)
}

fn is_number(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_digit() || c == '/' || c == '-')
}

/// `t1^2*t3 - 2/3*t4 + 1` in rank `n`.
pub fn parse_poly(s: &str, n: usize) -> Result<Poly> {
    let mut acc = Poly::zero(n);
    for (neg, term) in signed_terms(s)? {
        let mut c = Rat::one();
        let mut exps = vec![0u32; n];
        for f in term.split('*') {
            if is_number(f) {
                c = &c * &f.parse::<Rat>()?;
                continue;
            }
            let (v, e) = match f.split_once('^') {
                Some((v, e)) => (v, e.parse::<u32>().map_err(|_| Error::Parse(format!("bad exponent in `{f}`")))?),
                None => (f, 1),
            };
            exps[index(v, 't', n)? - 1] += e;
        }
        if neg {
            c = -c;
        }
        acc = acc.add(&Poly::monomial(n, exps, c));
    }
    Ok(acc)
}

/// `2*x2.x1 - x1.x2 + 3` in rank `n`.
pub fn parse_assoc(s: &str, n: usize) -> Result<AssocPoly> {
    let mut acc = AssocPoly::zero(n);
    for (neg, term) in signed_terms(s)? {
        let (c, w) = match term.split_once('*') {
            Some((c, w)) => (c.parse::<Rat>()?, w),
            None if is_number(&term) => (term.parse::<Rat>()?, ""),
            None => (Rat::one(), term.as_str()),
        };
        let word = if w.is_empty() || w == "1" {
            Word::empty()
        } else {
            Word(w.split('.').map(|l| index(l, 'x', n).map(|i| i as u8)).collect::<Result<_>>()?)
        };
        acc.add_term(word, &if neg { -c } else { c });
    }
    Ok(acc)
}

/// Parsed Lie S-expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LieExpr {
    Zero,
    Gen(usize),
    Bracket(Vec<LieExpr>),
    Scale(Rat, Box<LieExpr>),
    Sum(Vec<LieExpr>),
    Neg(Box<LieExpr>),
    Diff(Box<LieExpr>, Box<LieExpr>),
    Dot(Box<LieExpr>, Poly),
}

#[derive(Debug)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn read_sexp(s: &str) -> Result<Sexp> {
    let toks: Vec<String> = s.replace('(', " ( ").replace(')', " ) ").split_whitespace().map(String::from).collect();
    let mut pos = 0;
    let e = read_at(&toks, &mut pos)?;
    if pos != toks.len() {
        return err(format!("trailing input after expression in `{s}`"));
    }
    Ok(e)
}

fn read_at(toks: &[String], pos: &mut usize) -> Result<Sexp> {
    let t = toks.get(*pos).ok_or_else(|| Error::Parse("unexpected end of expression".into()))?;
    *pos += 1;
    match t.as_str() {
        "(" => {
            let mut items = Vec::new();
            loop {
                match toks.get(*pos).map(String::as_str) {
                    None => return err("unbalanced `(`"),
                    Some(")") => {
                        *pos += 1;
                        return Ok(Sexp::List(items));
                    }
                    _ => items.push(read_at(toks, pos)?),
                }
            }
        }
        ")" => err("unbalanced `)`"),
        _ => Ok(Sexp::Atom(t.clone())),
    }
}

fn to_expr(e: &Sexp, n: usize) -> Result<LieExpr> {
    match e {
        Sexp::Atom(a) if a == "0" => Ok(LieExpr::Zero),
        Sexp::Atom(a) => Ok(LieExpr::Gen(index(a, 'y', n)?)),
        Sexp::List(items) => {
            let (head, rest) = match items.split_first() {
                Some((Sexp::Atom(h), r)) => (h.as_str(), r),
                _ => return err("list must start with an operator"),
            };
            let sub = |r: &[Sexp]| r.iter().map(|x| to_expr(x, n)).collect::<Result<Vec<_>>>();
            match (head, rest.len()) {
                ("b", m) if m >= 2 => Ok(LieExpr::Bracket(sub(rest)?)),
                ("+", _) => Ok(LieExpr::Sum(sub(rest)?)),
                ("-", 1) => Ok(LieExpr::Neg(Box::new(to_expr(&rest[0], n)?))),
                ("-", 2) => Ok(LieExpr::Diff(Box::new(to_expr(&rest[0], n)?), Box::new(to_expr(&rest[1], n)?))),
                ("*", 2) => match &rest[0] {
                    Sexp::Atom(c) => Ok(LieExpr::Scale(c.parse()?, Box::new(to_expr(&rest[1], n)?))),
                    _ => err("scalar must be a rational"),
                },
                (".", 2) => match &rest[1] {
                    Sexp::Atom(f) => Ok(LieExpr::Dot(Box::new(to_expr(&rest[0], n)?), parse_poly(f, n)?)),
                    _ => err("polynomial must be an atom such as t1^2*t3"),
                },
                _ => err(format!("bad form `({head} ...)` with {} arguments", rest.len())),
            }
        }
    }
}

pub fn parse_lie(s: &str, n: usize) -> Result<LieExpr> {
    to_expr(&read_sexp(s)?, n)
}

impl LieExpr {
    /// Evaluates in the free Lie algebra of rank `n`; the polynomial action
    /// is not available there.
    pub fn eval_free(&self, n: usize) -> Result<LieElement> {
        Ok(match self {
            LieExpr::Zero => LieElement::zero(n),
            LieExpr::Gen(i) => LieElement::generator(n, *i)?,
            LieExpr::Bracket(v) => {
                let mut acc = v[0].eval_free(n)?;
                for x in &v[1..] {
                    acc = acc.bracket(&x.eval_free(n)?)?;
                }
                acc
            }
            LieExpr::Scale(c, e) => e.eval_free(n)?.scale(c),
            LieExpr::Sum(v) => {
                let mut acc = LieElement::zero(n);
                for x in v {
                    acc = acc.add(&x.eval_free(n)?)?;
                }
                acc
            }
            LieExpr::Neg(e) => e.eval_free(n)?.scale(&Rat::from_int(-1)),
            LieExpr::Diff(a, b) => a.eval_free(n)?.sub(&b.eval_free(n)?)?,
            LieExpr::Dot(..) => return err("polynomial action needs a quotient context"),
        })
    }

    pub fn eval(&self, ctx: &Arc<QuotientContext>) -> Result<QuotElement> {
        Ok(match self {
            LieExpr::Zero => ctx.zero(),
            LieExpr::Gen(i) => ctx.generator(*i)?,
            LieExpr::Bracket(v) => {
                let mut acc = v[0].eval(ctx)?;
                for x in &v[1..] {
                    acc = acc.bracket(&x.eval(ctx)?)?;
                }
                acc
            }
            LieExpr::Scale(c, e) => e.eval(ctx)?.scale(c),
            LieExpr::Sum(v) => {
                let mut acc = ctx.zero();
                for x in v {
                    acc = acc.add(&x.eval(ctx)?)?;
                }
                acc
            }
            LieExpr::Neg(e) => e.eval(ctx)?.scale(&Rat::from_int(-1)),
            LieExpr::Diff(a, b) => a.eval(ctx)?.sub(&b.eval(ctx)?)?,
            LieExpr::Dot(e, f) => e.eval(ctx)?.dot_action(f)?,
        })
    }
}

fn write_bracketing(b: &Bracketing, out: &mut String) {
    match b {
        Bracketing::Letter(l) => out.push_str(&format!("y{l}")),
        Bracketing::Bracket(a, c) => {
            out.push_str("(b ");
            write_bracketing(a, out);
            out.push(' ');
            write_bracketing(c, out);
            out.push(')');
        }
    }
}

/// S-expression of an element in its Lyndon basis coordinates.
pub fn lie_to_sexpr(u: &LieElement) -> String {
    let mut terms = Vec::new();
    for (&d, comp) in u.components() {
        let t = crate::lie::basis_table(u.rank(), d);
        for (&i, c) in comp {
            let mut s = String::new();
            write_bracketing(&Bracketing::of(t.word(i)), &mut s);
            terms.push(if c.is_one() { s } else { format!("(* {c} {s})") });
        }
    }
    match terms.len() {
        0 => "0".into(),
        1 => terms.pop().expect("one term"),
        _ => format!("(+ {})", terms.join(" ")),
    }
}

/// Top-level tokens of a composition: whitespace splits only outside parentheses.
fn composition_tokens(s: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut depth = 0i32;
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return err("unbalanced `)` in composition");
                }
            }
            _ => {}
        }
        if ch.is_whitespace() && depth == 0 {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            cur.push(ch);
        }
    }
    if depth != 0 {
        return err("unbalanced `(` in composition");
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    Ok(out)
}

fn usize_param(params: &[(String, String)], key: &str) -> Result<Option<usize>> {
    params
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.parse::<usize>().map_err(|_| Error::Parse(format!("`{key}` expects an integer, got `{v}`"))))
        .transpose()
}

fn required(params: &[(String, String)], key: &str, family: &str) -> Result<usize> {
    usize_param(params, key)?.ok_or_else(|| Error::Parse(format!("`{family}` needs `{key}=`")))
}

fn family(name: &str, params: &[(String, String)], n: usize) -> Result<Family> {
    let known: &[&str] = match name {
        "id" => &[],
        "tau" => &["i", "j", "a"],
        "sigma" => &["i", "j"],
        "perm" => &["rho"],
        "phi" => &["i", "u"],
        "alpha" => &["f", "slot"],
        "omega" => &["kappa"],
        "beta" | "gamma" | "delta" | "epsilon" | "zeta" | "eta" | "theta" => &["f"],
        _ => return err(format!("unknown family `{name}`")),
    };
    if let Some((k, _)) = params.iter().find(|(k, _)| !known.contains(&k.as_str())) {
        return err(format!("`{name}` has no parameter `{k}`"));
    }
    let get = |k: &str| params.iter().find(|(x, _)| x == k).map(|(_, v)| v.as_str());
    let f = || get("f").map_or(Ok(Poly::one(n)), |v| parse_poly(v, n));
    Ok(match name {
        "id" => Family::Identity,
        "tau" => Family::Tau {
            i: required(params, "i", name)?,
            j: required(params, "j", name)?,
            a: get("a").map_or(Ok(Rat::one()), str::parse)?,
        },
        "sigma" => Family::Sigma { i: required(params, "i", name)?, j: required(params, "j", name)? },
        "perm" => {
            let v = get("rho").ok_or_else(|| Error::Parse("`perm` needs `rho=`".into()))?;
            Family::Perm(v.split(',').map(|x| x.parse().map_err(|_| Error::Parse(format!("bad permutation `{v}`")))).collect::<Result<_>>()?)
        }
        "phi" => {
            let u = get("u").ok_or_else(|| Error::Parse("`phi` needs `u=`".into()))?;
            Family::Elementary { i: required(params, "i", name)?, u: parse_lie(u, n)?.eval_free(n)? }
        }
        "alpha" => match get("slot").unwrap_or("left") {
            "left" => Family::AlphaLeft(f()?),
            "right" => Family::AlphaRight(f()?),
            s => return err(format!("slot must be left or right, got `{s}`")),
        },
        "beta" => Family::Beta(f()?),
        "gamma" => Family::Gamma(f()?),
        "delta" => Family::Delta(f()?),
        "epsilon" => Family::Epsilon(f()?),
        "zeta" => Family::Zeta(f()?),
        "eta" => Family::Eta(f()?),
        "theta" => Family::Theta(f()?),
        "omega" => Family::Omega(required(params, "kappa", name)?),
        _ => unreachable!("checked above"),
    })
}

/// Parses a written product such as `inv(alpha f=t1^2 slot=left) tau i=3 j=2`.
pub fn parse_composition(s: &str, n: usize) -> Result<Composition> {
    let mut factors: Vec<Factor> = Vec::new();
    let mut pending: Option<(String, Vec<(String, String)>)> = None;
    let flush = |p: &mut Option<(String, Vec<(String, String)>)>, out: &mut Vec<Factor>| -> Result<()> {
        if let Some((name, params)) = p.take() {
            out.push(Factor::new(family(&name, &params, n)?));
        }
        Ok(())
    };
    for tok in composition_tokens(s)? {
        if let Some(inner) = tok.strip_prefix("inv(").and_then(|t| t.strip_suffix(')')) {
            flush(&mut pending, &mut factors)?;
            let c = parse_composition(inner, n)?;
            let [f] = <[Factor; 1]>::try_from(c.0).map_err(|_| Error::Parse(format!("`inv(...)` takes one factor: `{tok}`")))?;
            factors.push(Factor { family: f.family, inverse: !f.inverse });
        } else if let Some((k, v)) = tok.split_once('=') {
            match pending.as_mut() {
                Some((_, params)) => params.push((k.to_string(), v.to_string())),
                None => return err(format!("parameter `{tok}` before any family")),
            }
        } else {
            flush(&mut pending, &mut factors)?;
            pending = Some((tok, Vec::new()));
        }
    }
    flush(&mut pending, &mut factors)?;
    if factors.is_empty() {
        return err("empty composition");
    }
    Ok(Composition(factors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials() {
        let p = parse_poly("t1^2*t3 - 2/3*t4 + 1", 4).unwrap();
        assert_eq!(p.terms().len(), 3);
        assert_eq!(parse_poly(&p.to_string(), 4).unwrap(), p);
        assert_eq!(parse_poly("t2*t2", 4).unwrap(), Poly::monomial_from(4, &[(2, 2)]).unwrap());
        assert!(parse_poly("t5", 4).is_err());
        assert!(parse_poly("t1 +", 4).is_err());
    }

    #[test]
    fn assoc_round_trip() {
        let f = parse_assoc("2*x2.x1 - 1*x1.x2", 4).unwrap();
        assert_eq!(f.to_string(), "-1*x1.x2 + 2*x2.x1");
        assert_eq!(parse_assoc(&f.to_string(), 4).unwrap(), f);
        assert_eq!(parse_assoc("x1.x1 - 3", 2).unwrap().coeff(&Word::empty()), Rat::from_int(-3));
    }

    #[test]
    fn lie_expressions() {
        let e = parse_lie("(b y1 y2 y1)", 3).unwrap().eval_free(3).unwrap();
        let x = |i| LieElement::generator(3, i).unwrap();
        assert_eq!(e, x(1).bracket(&x(2)).unwrap().bracket(&x(1)).unwrap());
        let s = parse_lie("(+ (* 3/2 (b y1 y2)) (- (b y2 y3)))", 3).unwrap().eval_free(3).unwrap();
        assert_eq!(parse_lie(&lie_to_sexpr(&s), 3).unwrap().eval_free(3).unwrap(), s);
        assert!(parse_lie("(b y1)", 3).is_err());
        assert!(parse_lie("(b y1 y2", 3).is_err());
        assert!(parse_lie("(. (b y1 y2) t1)", 3).unwrap().eval_free(3).is_err());
    }

    #[test]
    fn dot_in_quotient() {
        let ctx = QuotientContext::metabelian(3, 4).unwrap();
        let a = parse_lie("(. (b y1 y2) t3)", 3).unwrap().eval(&ctx).unwrap();
        assert_eq!(a, ctx.commutator(&[1, 2, 3]).unwrap());
    }

    #[test]
    fn compositions() {
        let c = parse_composition("inv(alpha f=t1^2 slot=left) tau i=3 j=2 alpha f=t1^2 slot=left", 4).unwrap();
        assert_eq!(c.0.len(), 3);
        assert!(c.0[0].inverse);
        assert_eq!(c.0[1].family, Family::Tau { i: 3, j: 2, a: Rat::one() });
        assert_eq!(parse_composition(&c.to_string(), 4).unwrap(), c);
        let p = parse_composition("phi i=2 u=(b y3 y4) inv(inv(sigma i=1 j=2))", 4).unwrap();
        assert!(!p.0[1].inverse);
        assert!(parse_composition("tau i=1", 4).is_err());
        let ctx = QuotientContext::free(4, 2).unwrap();
        assert!(parse_composition("tau i=1 j=1", 4).unwrap().evaluate(&ctx, crate::endo::Convention::RightmostFirst).is_err());
        assert!(parse_composition("foo", 4).is_err());
        assert!(parse_composition("i=2", 4).is_err());
        assert!(parse_composition("alpha g=t1", 4).is_err());
    }
}
