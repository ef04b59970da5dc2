//! Non-tameness certificates through Fox-type derivatives.
//!
//! Each certificate stores its witness in the associative text grammar (or
//! as a polynomial in `z`), so it can be re-checked independently.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::assoc::{block_det_mod, is_balanced, is_balanced_baseline, phi, AssocPoly, Mat2, PolyZ, Word};
use crate::error::{Error, Result};
use crate::lie::{basis_table, left_normed, LieElement};
use crate::quotient::{ideal_component, IdealSpec};
use crate::ratlin::{binomial, Rat, RowSpace, SparseVec};

/// The modulus `Lambda^(4) = (z^4)`.
pub const LAMBDA: usize = 4;

/// `J(e)_{ij} = d_i(expand(image_j))`.
pub fn jacobian(images: &[LieElement]) -> Result<Vec<Vec<AssocPoly>>> {
    let n = images.len();
    let expanded: Vec<AssocPoly> = images.iter().map(|u| u.expand()).collect();
    (1..=n).map(|i| expanded.iter().map(|f| f.partial(i)).collect::<Result<Vec<_>>>()).collect()
}

fn x(n: usize, i: usize) -> LieElement {
    LieElement::generator(n, i).expect("index in range")
}

fn word(letters: impl IntoIterator<Item = u8>) -> Word {
    Word(letters.into_iter().collect())
}

/// `v_kappa = [x_1, x_2, (kappa-1) x_1, [x_3, x_4]]`.
pub fn v_kappa(n: usize, kappa: usize) -> Result<LieElement> {
    if n < 4 || kappa == 0 {
        return Err(Error::Precondition("needs n >= 4 and kappa >= 1".into()));
    }
    let mut bs = vec![x(n, 2)];
    bs.extend(std::iter::repeat(x(n, 1)).take(kappa - 1));
    bs.push(x(n, 3).bracket(&x(n, 4))?);
    left_normed(&x(n, 1), &bs)
}

/// `[x_1, x_j, m x_1]`.
pub fn nested(n: usize, j: usize, m: usize) -> Result<LieElement> {
    let mut bs = vec![x(n, j)];
    bs.extend(std::iter::repeat(x(n, 1)).take(m));
    left_normed(&x(n, 1), &bs)
}

/// `sum_{k=1}^{m+1} (-1)^{k-1} C(m+1,k) x_1^k x_j x_1^{m+1-k} - x_j x_1^{m+1}`.
pub fn nested_closed_form(n: usize, j: usize, m: usize) -> Result<AssocPoly> {
    let j = j as u8;
    let mut terms = Vec::new();
    for k in 1..=m + 1 {
        let sign = if k % 2 == 1 { Rat::one() } else { Rat::from_int(-1) };
        let w = std::iter::repeat(1).take(k).chain([j]).chain(std::iter::repeat(1).take(m + 1 - k));
        terms.push((word(w), &sign * &binomial(m as u64 + 1, k as u64)));
    }
    terms.push((word(std::iter::once(j).chain(std::iter::repeat(1).take(m + 1))), Rat::from_int(-1)));
    AssocPoly::from_terms(n, terms)
}

/// `(sum_{k=1}^{m+1} (-1)^{k-1} C(m+1,k) x_1^{k-1} x_2 x_1^{m+1-k}) [x_3, x_4]`.
pub fn derivative_closed_form(n: usize, m: usize) -> Result<AssocPoly> {
    let mut terms = Vec::new();
    for k in 1..=m + 1 {
        let sign = if k % 2 == 1 { Rat::one() } else { Rat::from_int(-1) };
        let w = std::iter::repeat(1).take(k - 1).chain([2]).chain(std::iter::repeat(1).take(m + 1 - k));
        terms.push((word(w), &sign * &binomial(m as u64 + 1, k as u64)));
    }
    let left = AssocPoly::from_terms(n, terms)?;
    left.mul(&x(n, 3).bracket(&x(n, 4))?.expand())
}

/// The three derivative identities for one `(m, j)`.
#[derive(Clone, Debug, Serialize)]
pub struct NestedCheck {
    pub m: usize,
    pub j: usize,
    pub expansion: bool,
    pub partial_j: bool,
    pub partial_1: bool,
}

impl NestedCheck {
    pub fn holds(&self) -> bool {
        self.expansion && self.partial_j && self.partial_1
    }
}

pub fn nested_check(n: usize, m: usize, j: usize) -> Result<NestedCheck> {
    if j < 2 || j > n || n < 4 {
        return Err(Error::Precondition("needs n >= 4 and 2 <= j <= n".into()));
    }
    let e = nested(n, j, m)?.expand();
    let power = AssocPoly::monomial(n, word(std::iter::repeat(1).take(m + 1)), Rat::from_int(-1));
    let v = left_normed(&x(n, 1), &[vec![x(n, 2)], vec![x(n, 1); m], vec![x(n, 3).bracket(&x(n, 4))?]].concat())?;
    Ok(NestedCheck {
        m,
        j,
        expansion: e == nested_closed_form(n, j, m)?,
        partial_j: e.partial(j)? == power,
        partial_1: v.expand().partial(1)? == derivative_closed_form(n, m)?,
    })
}

/// `Phi(f)` with every entry reduced modulo `z^4`.
pub fn phi_mod(f: &AssocPoly) -> Result<Mat2> {
    Ok(phi(f)?.mod_lambda(LAMBDA))
}

pub fn trace(m: &Mat2) -> PolyZ {
    let [a, _, _, d] = m.entries();
    a.add(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    BalancedFailure,
    TraceFailure,
    DeterminantFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Algebra {
    /// `L_n / gamma_3(L'_n)`.
    #[serde(rename = "Cn")]
    Cn,
    #[serde(rename = "Rn")]
    Rn,
}

impl Algebra {
    fn ideal_parts(self) -> Vec<IdealSpec> {
        match self {
            Algebra::Cn => vec![IdealSpec::Gamma3Derived],
            Algebra::Rn => vec![IdealSpec::Gamma3Derived, IdealSpec::DerivedGamma3],
        }
    }

    fn ideal(self) -> IdealSpec {
        match self {
            Algebra::Cn => IdealSpec::Jn,
            Algebra::Rn => IdealSpec::In,
        }
    }

    fn family(self) -> &'static str {
        match self {
            Algebra::Cn => "phi",
            Algebra::Rn => "omega",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Subject {
    pub family: String,
    pub kappa: usize,
    pub algebra: Algebra,
}

#[derive(Clone, Debug, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub subject: Subject,
    pub witness: BTreeMap<String, String>,
    pub reduced_mod: String,
    pub verdict: String,
    pub tool_version: String,
}

/// Result of asking for a certificate.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Outcome {
    Certified(Certificate),
    /// The obstruction did not fire; no claim is made.
    NotCertified { reason: String },
    /// The conclusion rests on an external result and is not recomputed.
    External { reason: String },
}

fn certificate(kind: CertificateKind, algebra: Algebra, kappa: usize, witness: BTreeMap<String, String>, verdict: String) -> Certificate {
    Certificate {
        kind,
        subject: Subject { family: algebra.family().into(), kappa, algebra },
        witness,
        reduced_mod: format!("z^{LAMBDA}"),
        verdict,
        tool_version: env!("CARGO_PKG_VERSION").into(),
    }
}

const N: usize = 4;

/// Degree-5 witness: for `kappa = 2` any lift agrees with `x_1 -> x_1 + v_2`
/// modulo degree 6, because the ideal has no degree-5 part.
pub fn certify_balanced_obstruction(kappa: usize, algebra: Algebra) -> Result<Outcome> {
    if kappa != 2 {
        return Err(Error::Precondition("balanced obstruction is for kappa = 2".into()));
    }
    let ideal_deg5 = ideal_component(algebra.ideal(), N, 5).rank();
    let w = v_kappa(N, 2)?.expand().partial(1)?;
    let fast = is_balanced(&w)?;
    let slow = is_balanced_baseline(&w)?;
    if fast != slow {
        return Err(Error::Precondition("balanced tests disagree".into()));
    }
    let mut wit = BTreeMap::new();
    wit.insert("polynomial".into(), w.to_string());
    wit.insert("balanced".into(), fast.to_string());
    wit.insert("ideal_rank_degree_5".into(), ideal_deg5.to_string());
    if fast || ideal_deg5 != 0 {
        return Ok(Outcome::NotCertified { reason: "derivative is balanced or corrections reach degree 5".into() });
    }
    Ok(Outcome::Certified(certificate(
        CertificateKind::BalancedFailure,
        algebra,
        2,
        wit,
        format!("d_1(v_2) is not balanced; {}_2 is non-tame", algebra.family()),
    )))
}

/// Spanning set of an ideal summand in degree `d`: left-normed `[a_1, a_2, a_3]`
/// over basis elements of degree `>= 2` for `gamma_3(L')`, and `[b_1, b_2]`
/// over basis elements of degree `>= 3` for `(gamma_3 L)'`.
pub fn ideal_spanning_set(spec: IdealSpec, n: usize, d: usize) -> Result<Vec<LieElement>> {
    let basis = |deg: usize| -> Vec<LieElement> { (0..basis_table(n, deg).len()).map(|i| LieElement::basis_element(n, deg, i)).collect() };
    let mut out = Vec::new();
    match spec {
        IdealSpec::Gamma3Derived => {
            for d1 in 2..=d.saturating_sub(4) {
                for d2 in 2..=d - d1 - 2 {
                    let d3 = d - d1 - d2;
                    let (b1, b2, b3) = (basis(d1), basis(d2), basis(d3));
                    for a in &b1 {
                        for b in &b2 {
                            let ab = a.bracket(b)?;
                            for c in &b3 {
                                out.push(ab.bracket(c)?);
                            }
                        }
                    }
                }
            }
        }
        IdealSpec::DerivedGamma3 => {
            for d1 in 3..=d.saturating_sub(3) {
                let (b1, b2) = (basis(d1), basis(d - d1));
                for a in &b1 {
                    for b in &b2 {
                        out.push(a.bracket(b)?);
                    }
                }
            }
        }
        _ => return Err(Error::Precondition("spanning sets exist for the two summands only".into())),
    }
    Ok(out)
}

/// How many spanning vectors were checked and whether all of `Phi(d_i(u))`
/// had entries in `Lambda^(4)`.
#[derive(Clone, Debug, Serialize)]
pub struct Containment {
    pub spec: String,
    pub degree: usize,
    pub vectors: usize,
    pub derivatives_checked: usize,
    pub spans_component: bool,
    /// Every entry of every `Phi(d_i(u))` lies in `Lambda^(4)`.
    pub all_in_lambda: bool,
    /// Every trace `Tr Phi(d_i(u))` lies in `Lambda^(4)`.
    pub traces_in_lambda: bool,
}

pub fn lambda_containment(spec: IdealSpec, n: usize, d: usize) -> Result<Containment> {
    let set = ideal_spanning_set(spec, n, d)?;
    let ok = set
        .par_iter()
        .map(|u| {
            let e = u.expand();
            let (mut entries, mut traces) = (true, true);
            for i in 1..=n {
                let m = phi_mod(&e.partial(i)?)?;
                entries &= m.entries().iter().all(|p| p.is_zero());
                traces &= trace(&m).is_zero();
            }
            Ok((entries, traces))
        })
        .collect::<Result<Vec<(bool, bool)>>>()?;
    let comp = ideal_component(spec, n, d);
    let len = basis_table(n, d).len();
    let mut span = RowSpace::new(len);
    for u in &set {
        let v = SparseVec::from_pairs(len, u.coords(d).into_iter().flatten().map(|(i, c)| (*i, c.clone())));
        span.rref_insert(&v)?;
        if span.rank() == comp.rank() {
            break;
        }
    }
    Ok(Containment {
        spec: spec.name(),
        degree: d,
        vectors: set.len(),
        derivatives_checked: set.len() * n,
        spans_component: span.rank() == comp.rank(),
        all_in_lambda: ok.iter().all(|b| b.0),
        traces_in_lambda: ok.iter().all(|b| b.1),
    })
}

/// `kappa = 3`: `Tr Phi(d_1 v_3) = 2 z^3`, while the trace of every degree-6
/// correction lies in `Lambda^(4)`. Entrywise containment is also reported;
/// it holds for `gamma_3(L')` but not for `(gamma_3 L)'`.
pub fn certify_trace_obstruction(algebra: Algebra) -> Result<Outcome> {
    let w = v_kappa(N, 3)?.expand().partial(1)?;
    let tr = trace(&phi_mod(&w)?);
    let expected = PolyZ::monomial(Rat::from_int(2), 3);
    let checks = algebra.ideal_parts().into_iter().map(|s| lambda_containment(s, N, 6)).collect::<Result<Vec<_>>>()?;
    let mut wit = BTreeMap::new();
    wit.insert("polynomial".into(), w.to_string());
    wit.insert("trace".into(), tr.to_string());
    for c in &checks {
        wit.insert(
            format!("corrections_{}", c.spec),
            format!(
                "{} vectors, {} derivatives, spans={}, entries_in_lambda={}, traces_in_lambda={}",
                c.vectors, c.derivatives_checked, c.spans_component, c.all_in_lambda, c.traces_in_lambda
            ),
        );
    }
    if tr != expected || !checks.iter().all(|c| c.traces_in_lambda && c.spans_component) {
        return Ok(Outcome::NotCertified { reason: "trace or correction containment check failed".into() });
    }
    Ok(Outcome::Certified(certificate(
        CertificateKind::TraceFailure,
        algebra,
        3,
        wit,
        format!("trace of any lift is 2z^3 mod z^4, never 0; {}_3 is non-tame", algebra.family()),
    )))
}

/// `kappa >= 4`: the Jacobian under `Phi` has determinant `1 + 2z^3` mod `z^4`.
pub fn certify_det_obstruction(kappa: usize) -> Result<Outcome> {
    if kappa < 4 {
        return Err(Error::Precondition("determinant obstruction is for kappa >= 4".into()));
    }
    let mut images: Vec<LieElement> = (1..=N).map(|i| x(N, i)).collect();
    images[0] = images[0].add(&v_kappa(N, kappa)?)?;
    let jac = jacobian(&images)?;
    let blocks = jac.iter().map(|row| row.iter().map(phi_mod).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
    let det = block_det_mod(&blocks, LAMBDA)?;
    let alt: Rat = (1..=kappa as u64).fold(Rat::zero(), |acc, l| {
        let s = if l % 2 == 1 { Rat::one() } else { Rat::from_int(-1) };
        &acc + &(&s * &binomial(kappa as u64, l))
    });
    let mut wit = BTreeMap::new();
    wit.insert("block_1_1".into(), blocks[0][0].to_string());
    wit.insert("determinant".into(), det.to_string());
    wit.insert("alternating_sum".into(), alt.to_string());
    if det.is_constant() {
        return Ok(Outcome::NotCertified { reason: "determinant is a unit".into() });
    }
    Ok(Outcome::Certified(certificate(
        CertificateKind::DeterminantFailure,
        Algebra::Cn,
        kappa,
        wit,
        format!("Jacobian determinant is {det} mod z^4, not a unit; phi_{kappa} is non-tame"),
    )))
}

/// Dispatch by family and `kappa`. `omega` is defined on `R_n`, `phi` on `C_n`.
pub fn certify(algebra: Algebra, kappa: usize) -> Result<Outcome> {
    match (algebra, kappa) {
        (_, 0) => Err(Error::Precondition("kappa must be positive".into())),
        (_, 1) => Ok(Outcome::External { reason: "external: relies on [10, Lemma 2.1]".into() }),
        (_, 2) => certify_balanced_obstruction(2, algebra),
        (_, 3) => certify_trace_obstruction(algebra),
        (Algebra::Cn, k) => certify_det_obstruction(k),
        (Algebra::Rn, _) => Ok(Outcome::NotCertified { reason: "no obstruction is known to apply for omega with kappa >= 4".into() }),
    }
}
