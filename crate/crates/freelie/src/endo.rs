//! Endomorphisms of a quotient context, given by generator images.
//!
//! All computations happen in the quotient truncated above the context's
//! `maxdeg`: an endomorphism of `L/V` induces one of `L/(V + gamma_{maxdeg+1})`,
//! and that is the algebra whose elements [`QuotElement`] can hold.
//!
//! `compose(a, b)` is `a ∘ b`: `b` acts first. A written product `A B C` of
//! automorphisms is read as `A ∘ B ∘ C`; for example `tau i=3 j=2 alpha f=1`
//! first applies `alpha`, then the transvection.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::density::GradedTuple;
use crate::error::{Error, Result};
use crate::lie::{basis_table, GLMatrix, LieElement};
use crate::quotient::{Poly, QuotElement, QuotientContext};
use crate::ratlin::Rat;

#[derive(Clone)]
pub struct Endo {
    ctx: Arc<QuotientContext>,
    images: Vec<QuotElement>,
}

impl PartialEq for Endo {
    fn eq(&self, o: &Self) -> bool {
        self.ctx.same_as(&o.ctx) && self.images == o.images
    }
}

impl Eq for Endo {}

impl fmt::Debug for Endo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, im) in self.images.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "y{} -> {}", i + 1, im)?;
        }
        Ok(())
    }
}

/// An inverse produced by [`Endo::invert_mod`].
#[derive(Clone, Debug)]
pub struct Inverse {
    pub endo: Endo,
    /// Both composites are the identity through `maxdeg` and the inverse
    /// stabilized below `maxdeg`.
    pub exact: bool,
}

impl Endo {
    pub fn new(ctx: &Arc<QuotientContext>, images: Vec<QuotElement>) -> Result<Self> {
        if images.len() != ctx.n() {
            return Err(Error::DimensionMismatch { expected: ctx.n(), got: images.len() });
        }
        for im in &images {
            if !im.ctx().same_as(ctx) {
                return Err(Error::Precondition("image lives in a different context".into()));
            }
        }
        Ok(Endo { ctx: ctx.clone(), images })
    }

    pub fn identity(ctx: &Arc<QuotientContext>) -> Self {
        let images = (1..=ctx.n()).map(|i| ctx.generator(i).expect("in range")).collect();
        Endo { ctx: ctx.clone(), images }
    }

    /// `y_i -> sum_j g[j][i] y_j`.
    pub fn linear(ctx: &Arc<QuotientContext>, g: &GLMatrix) -> Result<Self> {
        if g.n() != ctx.n() {
            return Err(Error::RankMismatch(g.n(), ctx.n()));
        }
        let images = (1..=ctx.n())
            .map(|i| ctx.reduce(&LieElement::generator(ctx.n(), i)?.gl_act(g)?))
            .collect::<Result<_>>()?;
        Ok(Endo { ctx: ctx.clone(), images })
    }

    /// `y_i -> y_i + u`, other generators fixed.
    pub fn elementary(ctx: &Arc<QuotientContext>, i: usize, u: &QuotElement) -> Result<Self> {
        let mut e = Self::identity(ctx);
        let slot = e.images.get_mut(i.wrapping_sub(1)).ok_or(Error::IndexOutOfRange { index: i, n: ctx.n() })?;
        *slot = slot.add(u)?;
        Ok(e)
    }

    /// `y_i -> y_i + deviations[i]`.
    pub fn from_deviations(ctx: &Arc<QuotientContext>, deviations: &[QuotElement]) -> Result<Self> {
        let mut e = Self::identity(ctx);
        if deviations.len() != ctx.n() {
            return Err(Error::DimensionMismatch { expected: ctx.n(), got: deviations.len() });
        }
        for (im, d) in e.images.iter_mut().zip(deviations) {
            *im = im.add(d)?;
        }
        Ok(e)
    }

    pub fn ctx(&self) -> &Arc<QuotientContext> {
        &self.ctx
    }

    pub fn images(&self) -> &[QuotElement] {
        &self.images
    }

    /// Image of `y_i`, 1-based.
    pub fn image(&self, i: usize) -> &QuotElement {
        &self.images[i - 1]
    }

    /// `image_i - y_i` for every generator.
    pub fn deviations(&self) -> Vec<QuotElement> {
        self.images
            .iter()
            .enumerate()
            .map(|(i, im)| im.sub(&self.ctx.generator(i + 1).expect("in range")).expect("same context"))
            .collect()
    }

    /// The matrix of the induced map on generators (column convention).
    pub fn linear_part(&self) -> GLMatrix {
        let n = self.ctx.n();
        let mut g = GLMatrix::from_rows(vec![vec![Rat::zero(); n]; n]).expect("square");
        for (i, im) in self.images.iter().enumerate() {
            if let Some(c) = im.lift().coords(1) {
                for (j, x) in c {
                    g.set(*j, i, x.clone());
                }
            }
        }
        g
    }

    pub fn is_linear(&self) -> bool {
        self.images.iter().all(|im| im.lift().degrees().all(|d| d == 1))
    }

    /// Identity on generators modulo the derived algebra.
    pub fn is_ia(&self) -> bool {
        self.linear_part() == GLMatrix::identity(self.ctx.n())
    }

    /// Least degree of a nonzero deviation, if any.
    pub fn min_deviation_degree(&self) -> Option<usize> {
        self.deviations().iter().filter_map(|d| d.lift().min_degree()).min()
    }

    fn check(&self, u: &QuotElement) -> Result<()> {
        if !u.ctx().same_as(&self.ctx) {
            return Err(Error::Precondition("element lives in a different context".into()));
        }
        Ok(())
    }

    pub fn apply(&self, u: &QuotElement) -> Result<QuotElement> {
        self.check(u)?;
        Applier::new(self).apply(u)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Endo) -> Result<Endo> {
        if !other.ctx.same_as(&self.ctx) {
            return Err(Error::Precondition("endomorphisms of different contexts".into()));
        }
        let mut ap = Applier::new(self);
        let images = other.images.iter().map(|im| ap.apply(im)).collect::<Result<_>>()?;
        Ok(Endo { ctx: self.ctx.clone(), images })
    }

    /// Inverse modulo components of degree above `d`: invert the linear part,
    /// then strip deviations of `self ∘ psi`, lowest degree first.
    pub fn invert_mod(&self, d: usize) -> Result<Inverse> {
        let maxdeg = self.ctx.maxdeg();
        let d = d.min(maxdeg);
        let ginv = self.linear_part().inverse()?;
        let mut psi = Endo::linear(&self.ctx, &ginv)?;
        loop {
            let c = self.compose(&psi)?;
            let devs = c.deviations();
            let Some(s) = devs.iter().filter_map(|x| x.lift().min_degree()).min().filter(|&s| s <= d) else {
                break;
            };
            let fix: Vec<QuotElement> = devs.iter().map(|x| x.component(s).scale(&Rat::from_int(-1))).collect();
            psi = psi.compose(&Endo::from_deviations(&self.ctx, &fix)?)?;
        }
        let id = Endo::identity(&self.ctx);
        let two_sided = self.compose(&psi)? == id && psi.compose(self)? == id;
        let below_top = psi.deviations().iter().all(|x| x.lift().max_degree().map_or(true, |m| m < maxdeg));
        Ok(Inverse { endo: psi, exact: two_sided && below_top })
    }

    /// Inverse through `maxdeg`; fails unless the result is a two-sided inverse there.
    pub fn inverse(&self) -> Result<Endo> {
        let inv = self.invert_mod(self.ctx.maxdeg())?;
        Ok(inv.endo)
    }

    /// `nu_k`: degree-`k` deviations of an element of `I_k E`.
    pub fn nu(&self, k: usize) -> Result<GradedTuple> {
        if k < 2 {
            return Err(Error::Precondition("nu_k needs k >= 2".into()));
        }
        if !self.is_ia() || self.min_deviation_degree().is_some_and(|m| m < k) {
            return Err(Error::Precondition(format!("endomorphism does not fix generators modulo degree {k}")));
        }
        let slots = self.deviations().iter().map(|x| x.component(k)).collect();
        GradedTuple::new(&self.ctx, k, slots)
    }
}

/// Substitution with memoized images of Lyndon basis elements.
struct Applier<'a> {
    e: &'a Endo,
    linear: Option<GLMatrix>,
    memo: HashMap<(usize, usize), LieElement>,
}

impl<'a> Applier<'a> {
    fn new(e: &'a Endo) -> Self {
        let linear = e.is_linear().then(|| e.linear_part());
        Applier { e, linear, memo: HashMap::new() }
    }

    fn apply(&mut self, u: &QuotElement) -> Result<QuotElement> {
        let ctx = &self.e.ctx;
        if let Some(g) = &self.linear {
            return ctx.reduce(&u.lift().gl_act(g)?);
        }
        let mut acc = LieElement::zero(ctx.n());
        for (&d, comp) in u.lift().components() {
            for (&i, c) in comp {
                let img = self.basis_image(d, i)?;
                acc.add_scaled_in_place(&img, c);
            }
        }
        ctx.reduce_truncated(&acc)
    }

    fn basis_image(&mut self, d: usize, i: usize) -> Result<LieElement> {
        if d == 1 {
            return Ok(self.e.images[i].lift().clone());
        }
        if let Some(v) = self.memo.get(&(d, i)) {
            return Ok(v.clone());
        }
        let ((da, ia), (db, ib)) = basis_table(self.e.ctx.n(), d).factors(i).expect("degree >= 2");
        let a = self.basis_image(da, ia)?;
        let b = self.basis_image(db, ib)?;
        let ctx = &self.e.ctx;
        let v = ctx.reduce_truncated(&a.bracket_trunc(&b, ctx.maxdeg())?)?.lift().clone();
        self.memo.insert((d, i), v.clone());
        Ok(v)
    }
}

/// `nu_{j+k-1}(phi^{-1} psi^{-1} phi psi)` for `phi` in `I_j E`, `psi` in `I_k E`.
pub fn graded_commutator(phi: &Endo, j: usize, psi: &Endo, k: usize) -> Result<GradedTuple> {
    for (e, m) in [(phi, j), (psi, k)] {
        if !e.is_ia() || e.min_deviation_degree().is_some_and(|x| x < m) {
            return Err(Error::Precondition(format!("argument is not in I_{m} E")));
        }
    }
    let c = phi.inverse()?.compose(&psi.inverse()?)?.compose(phi)?.compose(psi)?;
    c.nu(j + k - 1)
}

/// Which end of a written product acts first.
#[derive(Clone, Copy, PartialEq, Eq, Debug, serde::Serialize)]
pub enum Convention {
    /// `A B C` means `A ∘ B ∘ C`: the rightmost factor acts first.
    RightmostFirst,
    /// `A B C` means `C ∘ B ∘ A`.
    LeftmostFirst,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Family {
    Identity,
    /// `tau_{i,j,a}: y_i -> y_i + a y_j`.
    Tau { i: usize, j: usize, a: Rat },
    Sigma { i: usize, j: usize },
    /// `tau_rho: y_i -> y_{rho(i)}`.
    Perm(Vec<usize>),
    /// `phi_{i,u}: y_i -> y_i + u`.
    Elementary { i: usize, u: LieElement },
    /// `alpha_{(f,1)}`.
    AlphaLeft(Poly),
    /// `alpha_{(1,f)}`.
    AlphaRight(Poly),
    Beta(Poly),
    Gamma(Poly),
    Delta(Poly),
    Epsilon(Poly),
    Zeta(Poly),
    Eta(Poly),
    Theta(Poly),
    /// `y_1 -> y_1 + [y_1, y_2, (kappa-1) y_1, [y_3, y_4]]`.
    Omega(usize),
}

fn need_rank(ctx: &QuotientContext, n: usize) -> Result<()> {
    if ctx.n() < n {
        return Err(Error::Precondition(format!("family needs rank at least {n}")));
    }
    Ok(())
}

impl Family {
    pub fn endo(&self, ctx: &Arc<QuotientContext>) -> Result<Endo> {
        let n = ctx.n();
        let first = |u: QuotElement| Endo::elementary(ctx, 1, &u);
        let poly = |f: &Poly| -> Result<()> {
            need_rank(ctx, 4)?;
            if f.rank() != n {
                return Err(Error::RankMismatch(f.rank(), n));
            }
            Ok(())
        };
        match self {
            Family::Identity => Ok(Endo::identity(ctx)),
            Family::Tau { i, j, a } => {
                if *i == 0 || *j == 0 || *i > n || *j > n || i == j {
                    return Err(Error::Precondition("transvection needs distinct indices in range".into()));
                }
                Endo::linear(ctx, &GLMatrix::transvection(n, *i, *j, a.clone()))
            }
            Family::Sigma { i, j } => {
                if *i == 0 || *j == 0 || *i > n || *j > n {
                    return Err(Error::IndexOutOfRange { index: (*i).max(*j), n });
                }
                Endo::linear(ctx, &GLMatrix::swap(n, *i, *j))
            }
            Family::Perm(rho) => {
                let mut seen = rho.clone();
                seen.sort_unstable();
                if seen != (1..=n).collect::<Vec<_>>() {
                    return Err(Error::Precondition("not a permutation of 1..n".into()));
                }
                Endo::linear(ctx, &GLMatrix::permutation(rho))
            }
            Family::Elementary { i, u } => Endo::elementary(ctx, *i, &ctx.reduce(u)?),
            Family::AlphaLeft(f) => {
                poly(f)?;
                first(ctx.u_elem(1, 2, f, 3, 4)?)
            }
            Family::AlphaRight(f) => {
                poly(f)?;
                first(ctx.v_elem(1, 2, 3, 4, f)?)
            }
            Family::Beta(f) => {
                poly(f)?;
                first(ctx.u_elem(1, 2, f, 2, 4)?)
            }
            Family::Gamma(f) => {
                poly(f)?;
                first(ctx.u_elem(1, 2, f, 1, 4)?)
            }
            Family::Delta(f) => {
                poly(f)?;
                first(ctx.u_elem(1, 2, f, 2, 3)?)
            }
            Family::Epsilon(f) => {
                poly(f)?;
                first(ctx.u_elem(2, 3, f, 2, 3)?)
            }
            Family::Zeta(f) => {
                poly(f)?;
                first(ctx.u_elem(2, 3, f, 2, 4)?)
            }
            Family::Eta(f) => {
                poly(f)?;
                first(ctx.u_elem(3, 4, f, 1, 3)?)
            }
            Family::Theta(f) => {
                poly(f)?;
                need_rank(ctx, 5)?;
                first(ctx.u_elem(2, 3, f, 4, n)?)
            }
            Family::Omega(kappa) => {
                need_rank(ctx, 4)?;
                if *kappa == 0 {
                    return Err(Error::Precondition("kappa must be positive".into()));
                }
                let f = Poly::monomial_from(n, &[(1, *kappa as u32 - 1)])?;
                first(ctx.u_elem(1, 2, &f, 3, 4)?)
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Identity => write!(f, "id"),
            Family::Tau { i, j, a } if a.is_one() => write!(f, "tau i={i} j={j}"),
            Family::Tau { i, j, a } => write!(f, "tau i={i} j={j} a={a}"),
            Family::Sigma { i, j } => write!(f, "sigma i={i} j={j}"),
            Family::Perm(rho) => {
                let s: Vec<String> = rho.iter().map(|x| x.to_string()).collect();
                write!(f, "perm rho={}", s.join(","))
            }
            Family::Elementary { i, u } => write!(f, "phi i={i} u={}", crate::parse::lie_to_sexpr(u)),
            Family::AlphaLeft(p) => write!(f, "alpha f={} slot=left", compact(p)),
            Family::AlphaRight(p) => write!(f, "alpha f={} slot=right", compact(p)),
            Family::Beta(p) => write!(f, "beta f={}", compact(p)),
            Family::Gamma(p) => write!(f, "gamma f={}", compact(p)),
            Family::Delta(p) => write!(f, "delta f={}", compact(p)),
            Family::Epsilon(p) => write!(f, "epsilon f={}", compact(p)),
            Family::Zeta(p) => write!(f, "zeta f={}", compact(p)),
            Family::Eta(p) => write!(f, "eta f={}", compact(p)),
            Family::Theta(p) => write!(f, "theta f={}", compact(p)),
            Family::Omega(k) => write!(f, "omega kappa={k}"),
        }
    }
}

/// Polynomial text without spaces, so it survives whitespace tokenizing.
fn compact(p: &Poly) -> String {
    p.to_string().replace(' ', "")
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Factor {
    pub family: Family,
    pub inverse: bool,
}

impl Factor {
    pub fn new(family: Family) -> Self {
        Factor { family, inverse: false }
    }

    pub fn inv(family: Family) -> Self {
        Factor { family, inverse: true }
    }

    pub fn endo(&self, ctx: &Arc<QuotientContext>) -> Result<Endo> {
        let e = self.family.endo(ctx)?;
        if self.inverse {
            e.inverse()
        } else {
            Ok(e)
        }
    }
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.inverse {
            write!(f, "inv({})", self.family)
        } else {
            write!(f, "{}", self.family)
        }
    }
}

/// A written product of automorphisms.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Composition(pub Vec<Factor>);

impl Composition {
    pub fn evaluate(&self, ctx: &Arc<QuotientContext>, conv: Convention) -> Result<Endo> {
        let endos: Vec<Endo> = self.0.par_iter().map(|f| f.endo(ctx)).collect::<Result<_>>()?;
        let mut acc = Endo::identity(ctx);
        match conv {
            Convention::RightmostFirst => {
                for e in &endos {
                    acc = acc.compose(e)?;
                }
            }
            Convention::LeftmostFirst => {
                for e in &endos {
                    acc = e.compose(&acc)?;
                }
            }
        }
        Ok(acc)
    }

    /// `g x g^{-1}` for each factor `x` of `inner`, wrapped as `g inner g^{-1}`.
    pub fn conjugate(g: Family, inner: Vec<Factor>) -> Vec<Factor> {
        let mut v = vec![Factor::new(g.clone())];
        v.extend(inner);
        v.push(Factor::inv(g));
        v
    }
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        write!(f, "{}", if s.is_empty() { "id".into() } else { s.join(" ") })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, serde::Serialize)]
pub struct Discrepancy {
    pub generator: usize,
    pub degree: usize,
    /// First differing canonical coordinate and the two values there.
    pub coordinate: usize,
    pub lhs_value: String,
    pub rhs_value: String,
}

impl fmt::Display for Discrepancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "image of y{} differs in degree {} at coordinate {}: {} vs {}",
            self.generator, self.degree, self.coordinate, self.lhs_value, self.rhs_value
        )
    }
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct IdentityReport {
    pub holds: bool,
    /// The reading under which the identity holds, if any.
    pub convention: Option<Convention>,
    /// Discrepancy under the fixed reading, when it fails there.
    pub fixed_discrepancy: Option<Discrepancy>,
    /// Discrepancy under the reversed reading, when it was tried and failed.
    pub reversed_discrepancy: Option<Discrepancy>,
}

fn first_difference(a: &Endo, b: &Endo, d: usize) -> Result<Option<Discrepancy>> {
    for i in 0..a.images.len() {
        for deg in 1..=d {
            let x = a.images[i].coords(deg)?;
            let y = b.images[i].coords(deg)?;
            if x != y {
                let mut cols: Vec<usize> = x.iter().map(|(c, _)| c).chain(y.iter().map(|(c, _)| c)).collect();
                cols.sort_unstable();
                let c = cols.into_iter().find(|&c| x.get(c) != y.get(c)).expect("vectors differ");
                return Ok(Some(Discrepancy {
                    generator: i + 1,
                    degree: deg,
                    coordinate: c,
                    lhs_value: x.get(c).to_string(),
                    rhs_value: y.get(c).to_string(),
                }));
            }
        }
    }
    Ok(None)
}

/// Checks `lhs = rhs` on every generator through degree `d`, first with the
/// fixed reading and then, only if that fails, with the reversed one.
pub fn verify_identity(lhs: &Composition, rhs: &Composition, ctx: &Arc<QuotientContext>, d: usize) -> Result<IdentityReport> {
    if d > ctx.maxdeg() {
        return Err(Error::DegreeOverflow { degree: d, maxdeg: ctx.maxdeg() });
    }
    let check = |conv| -> Result<Option<Discrepancy>> {
        let a = lhs.evaluate(ctx, conv)?;
        let b = rhs.evaluate(ctx, conv)?;
        first_difference(&a, &b, d)
    };
    let fixed = check(Convention::RightmostFirst)?;
    if fixed.is_none() {
        return Ok(IdentityReport { holds: true, convention: Some(Convention::RightmostFirst), fixed_discrepancy: None, reversed_discrepancy: None });
    }
    let reversed = check(Convention::LeftmostFirst)?;
    Ok(IdentityReport {
        holds: reversed.is_none(),
        convention: reversed.is_none().then_some(Convention::LeftmostFirst),
        fixed_discrepancy: fixed,
        reversed_discrepancy: reversed,
    })
}

/// A named identity with the context it is checked in.
#[derive(Clone, Debug)]
pub struct NamedIdentity {
    pub name: String,
    pub n: usize,
    pub maxdeg: usize,
    pub degree: usize,
    pub lhs: Composition,
    pub rhs: Composition,
}

impl NamedIdentity {
    pub fn verify(&self) -> Result<IdentityReport> {
        let ctx = QuotientContext::r_n(self.n, self.maxdeg)?;
        verify_identity(&self.lhs, &self.rhs, &ctx, self.degree)
    }
}

fn act(g: &GLMatrix, f: &Poly) -> Poly {
    f.gl_act(g).expect("same rank")
}

/// The five kernel identities for one `f`, plus the `theta` identity when `n >= 5`.
pub fn kernel_identities(n: usize, f: &Poly) -> Vec<NamedIdentity> {
    let deg = f.homogeneous_degree().unwrap_or(0) as usize + 4;
    let tinv = |i, j| GLMatrix::transvection(n, i, j, Rat::from_int(-1));
    let tau = |i, j| Family::Tau { i, j, a: Rat::one() };
    let mk = |name: &str, lhs: Vec<Factor>, rhs: Vec<Factor>| NamedIdentity {
        name: format!("{name} f={}", compact(f)),
        n,
        maxdeg: deg + 1,
        degree: deg + 1,
        lhs: Composition(lhs),
        rhs: Composition(rhs),
    };
    let f32 = act(&tinv(3, 2), f);
    let f42 = act(&tinv(4, 2), f);
    let f13 = act(&tinv(1, 3), f);
    let f23 = act(&tinv(2, 3), f);
    let mut out = vec![
        mk(
            "beta",
            vec![Factor::new(Family::Beta(f.clone()))],
            vec![
                Factor::inv(Family::AlphaLeft(f.clone())),
                Factor::new(tau(3, 2)),
                Factor::new(Family::AlphaLeft(f32)),
                Factor::inv(tau(3, 2)),
            ],
        ),
        mk(
            "delta",
            vec![Factor::new(Family::Delta(f.clone()))],
            vec![
                Factor::new(Family::AlphaLeft(f.clone())),
                Factor::new(tau(4, 2)),
                Factor::inv(Family::AlphaLeft(f42)),
                Factor::inv(tau(4, 2)),
            ],
        ),
        mk(
            "epsilon",
            vec![Factor::new(Family::Epsilon(f.clone()))],
            vec![
                Factor::new(Family::Delta(f.clone())),
                Factor::new(tau(1, 3)),
                Factor::inv(Family::Delta(f13.clone())),
                Factor::inv(tau(1, 3)),
            ],
        ),
        mk(
            "zeta",
            vec![Factor::new(Family::Zeta(f.clone()))],
            vec![
                Factor::new(Family::Beta(f.clone())),
                Factor::new(tau(1, 3)),
                Factor::inv(Family::Beta(f13)),
                Factor::inv(tau(1, 3)),
            ],
        ),
        mk(
            "eta",
            vec![Factor::new(Family::Eta(f.clone()))],
            vec![
                Factor::new(Family::AlphaRight(f.clone())),
                Factor::new(tau(2, 3)),
                Factor::inv(Family::AlphaRight(f23)),
                Factor::inv(tau(2, 3)),
            ],
        ),
    ];
    if n >= 5 {
        let s = act(&GLMatrix::swap(n, 2, 4), f);
        let st = act(&tinv(1, n), &s);
        out.push(mk(
            "theta",
            Composition::conjugate(Family::Sigma { i: 2, j: 4 }, vec![Factor::new(Family::Theta(f.clone()))]),
            vec![
                Factor::new(Family::AlphaRight(s)),
                Factor::new(tau(1, n)),
                Factor::inv(Family::AlphaRight(st)),
                Factor::inv(tau(1, n)),
            ],
        ));
    }
    out
}

/// The permutation-conjugation identity for `tau_rho`, `phi_{i,u}`.
pub fn permutation_identity(rho: &[usize], i: usize, u: &LieElement) -> Result<NamedIdentity> {
    let n = rho.len();
    let g = GLMatrix::permutation(rho);
    let deg = u.max_degree().ok_or_else(|| Error::Precondition("u must be nonzero".into()))?;
    Ok(NamedIdentity {
        name: format!("perm rho={:?} i={i}", rho),
        n,
        maxdeg: deg + 1,
        degree: deg + 1,
        lhs: Composition(Composition::conjugate(Family::Perm(rho.to_vec()), vec![Factor::new(Family::Elementary { i, u: u.clone() })])),
        rhs: Composition(vec![Factor::new(Family::Elementary { i: rho[i - 1], u: u.gl_act(&g)? })]),
    })
}

fn bracket_of(n: usize, a: usize, b: usize) -> LieElement {
    LieElement::generator(n, a).unwrap().bracket(&LieElement::generator(n, b).unwrap()).unwrap()
}

fn mono(n: usize, fs: &[(usize, u32)]) -> Poly {
    Poly::monomial_from(n, fs).expect("in range")
}

/// The commutator identity producing `alpha_{(1,t_3)}` in degree 5.
pub fn degree_five_identity(n: usize) -> NamedIdentity {
    degree_five_with(n, mono(n, &[(4, 1)]), "eq-3.23")
}

/// The same identity with `alpha_{(t_4,1)}` replaced by `alpha_{(t_3,1)}`; must fail.
pub fn degree_five_perturbed(n: usize) -> NamedIdentity {
    degree_five_with(n, mono(n, &[(3, 1)]), "eq-3.23 perturbed")
}

/// The tame automorphism `y_2 -> y_2 + [y_3, y_4]`.
pub fn phi_23_34(n: usize) -> Family {
    Family::Elementary { i: 2, u: bracket_of(n, 3, 4) }
}

/// The tame automorphism `y_1 -> y_1 + [y_2, y_3]`.
pub fn phi_1_23(n: usize) -> Family {
    Family::Elementary { i: 1, u: bracket_of(n, 2, 3) }
}

/// Left side `beta_{(1,1)}^{-1} phi beta_{(1,1)} phi^{-1}`.
pub fn degree_five_lhs(n: usize) -> Composition {
    let one = Poly::one(n);
    Composition(vec![
        Factor::inv(Family::Beta(one.clone())),
        Factor::new(phi_23_34(n)),
        Factor::new(Family::Beta(one)),
        Factor::inv(phi_23_34(n)),
    ])
}

fn degree_five_with(n: usize, last: Poly, name: &str) -> NamedIdentity {
    let mut rhs = Composition::conjugate(Family::Sigma { i: 3, j: 4 }, vec![Factor::inv(Family::AlphaRight(mono(n, &[(3, 1)])))]);
    rhs.extend(Composition::conjugate(Family::Sigma { i: 2, j: 4 }, vec![Factor::new(Family::Beta(mono(n, &[(3, 1)])))]));
    rhs.extend(Composition::conjugate(Family::Sigma { i: 2, j: 3 }, vec![Factor::new(Family::AlphaLeft(last))]));
    NamedIdentity { name: name.into(), n, maxdeg: 6, degree: 6, lhs: degree_five_lhs(n), rhs: Composition(rhs) }
}

/// Left side `gamma_{(t_2^{k-5},1)}^{-1} phi_1^{-1} gamma_{(t_2^{k-5},1)} phi_1`.
pub fn higher_degree_lhs(n: usize, k: usize) -> Composition {
    let f = mono(n, &[(2, k as u32 - 5)]);
    Composition(vec![
        Factor::inv(Family::Gamma(f.clone())),
        Factor::inv(phi_1_23(n)),
        Factor::new(Family::Gamma(f)),
        Factor::new(phi_1_23(n)),
    ])
}

/// The commutator identity producing `alpha_{(1,t_3^{k-4})}` in degree `k >= 6`.
pub fn higher_degree_identity(n: usize, k: usize) -> NamedIdentity {
    let inner = Composition::conjugate(Family::Sigma { i: 3, j: 4 }, vec![Factor::new(Family::AlphaRight(mono(n, &[(3, k as u32 - 4)])))]);
    let rhs = Composition::conjugate(Family::Sigma { i: 2, j: 4 }, inner);
    NamedIdentity { name: format!("eq-3.24 k={k}"), n, maxdeg: k + 1, degree: k + 1, lhs: higher_degree_lhs(n, k), rhs: Composition(rhs) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::tests::homogeneous;
    use proptest::prelude::*;

    fn r4(maxdeg: usize) -> Arc<QuotientContext> {
        QuotientContext::r_n(4, maxdeg).unwrap()
    }

    #[test]
    fn identity_and_linear() {
        let r = r4(5);
        let u = r.u_elem(1, 2, &Poly::one(4), 3, 4).unwrap();
        assert_eq!(Endo::identity(&r).apply(&u).unwrap(), u);
        let t = Family::Tau { i: 1, j: 2, a: Rat::from_int(3) }.endo(&r).unwrap();
        let inv = t.invert_mod(5).unwrap();
        assert!(inv.exact);
        assert_eq!(inv.endo, Family::Tau { i: 1, j: 2, a: Rat::from_int(-3) }.endo(&r).unwrap());
        assert_eq!(t.compose(&Endo::identity(&r)).unwrap(), t);
    }

    #[test]
    fn omega_one_on_y1() {
        let r = r4(5);
        let w = Family::Omega(1).endo(&r).unwrap();
        let expected = r.generator(1).unwrap().add(&r.commutator(&[1, 2]).unwrap().bracket(&r.commutator(&[3, 4]).unwrap()).unwrap()).unwrap();
        assert_eq!(w.apply(&r.generator(1).unwrap()).unwrap(), expected);
    }

    #[test]
    fn omega_inverse_exact() {
        for kappa in 1..=2 {
            let r = r4(kappa + 4);
            let w = Family::Omega(kappa).endo(&r).unwrap();
            let inv = w.invert_mod(kappa + 3).unwrap();
            assert!(inv.exact);
            assert_eq!(w.compose(&inv.endo).unwrap(), Endo::identity(&r));
            let dev = inv.endo.deviations();
            assert_eq!(dev[0], w.deviations()[0].scale(&Rat::from_int(-1)));
        }
    }

    #[test]
    fn tame_inverse() {
        let r = r4(5);
        let phi = phi_23_34(4).endo(&r).unwrap();
        let inv = phi.invert_mod(5).unwrap();
        assert!(inv.exact);
        let expected = r.generator(2).unwrap().sub(&r.commutator(&[3, 4]).unwrap()).unwrap();
        assert_eq!(inv.endo.image(2), &expected);
    }

    #[test]
    fn nu_examples() {
        let r = r4(6);
        assert!(Endo::identity(&r).nu(4).unwrap().is_zero());
        let w = Family::Omega(2).endo(&r).unwrap();
        let t = w.nu(5).unwrap();
        assert_eq!(t.slots()[0], r.commutator(&[1, 2, 1]).unwrap().bracket(&r.commutator(&[3, 4]).unwrap()).unwrap());
        assert!(t.slots()[1..].iter().all(|s| s.is_zero()));
        assert!(w.nu(6).is_err());
    }

    #[test]
    fn permutation_conjugation_instance() {
        let u = bracket_of(4, 1, 2).bracket(&bracket_of(4, 3, 4)).unwrap();
        let id = permutation_identity(&[2, 1, 3, 4], 1, &u).unwrap();
        let rep = id.verify().unwrap();
        assert!(rep.holds);
        assert_eq!(rep.convention, Some(Convention::RightmostFirst));
    }

    #[test]
    fn degree_five_and_negative_control() {
        let rep = degree_five_identity(4).verify().unwrap();
        assert!(rep.holds, "{rep:?}");
        let bad = degree_five_perturbed(4).verify().unwrap();
        assert!(!bad.holds);
        assert!(bad.fixed_discrepancy.is_some() && bad.reversed_discrepancy.is_some());
    }

    #[test]
    fn kernel_identities_for_constant_f() {
        for id in kernel_identities(4, &Poly::one(4)) {
            let rep = id.verify().unwrap();
            assert!(rep.holds, "{}: {rep:?}", id.name);
        }
    }

    #[test]
    fn graded_commutator_with_identity() {
        let r = r4(6);
        let w = Family::Omega(1).endo(&r).unwrap();
        assert!(graded_commutator(&w, 4, &Endo::identity(&r), 2).unwrap().is_zero());
    }

    #[test]
    fn graded_commutator_matches_higher_degree_identity() {
        let r = r4(6);
        let gamma = Family::Gamma(Poly::monomial_from(4, &[(2, 1)]).unwrap()).endo(&r).unwrap();
        let phi1 = phi_1_23(4).endo(&r).unwrap();
        let c = graded_commutator(&gamma, 5, &phi1, 2).unwrap();
        assert!(!c.is_zero());
        let id = higher_degree_identity(4, 6);
        assert_eq!(id.verify().unwrap().convention, Some(Convention::RightmostFirst));
        assert_eq!(c, id.rhs.evaluate(&r, Convention::RightmostFirst).unwrap().nu(6).unwrap());
    }

    #[test]
    fn display_round_trip() {
        let c = degree_five_lhs(4);
        let parsed = crate::parse::parse_composition(&c.to_string(), 4).unwrap();
        assert_eq!(parsed, c);
    }

    fn kernel_endo(r: &Arc<QuotientContext>, pick: &[(usize, usize, i64)]) -> Endo {
        // Deviations built from u(a,b;1;c,d) elements land in R''.
        let mut devs = vec![r.zero(); 4];
        for &(slot, seed, c) in pick {
            let (a, b, x, y) = (1 + seed % 4, 1 + (seed / 4) % 4, 1 + (seed / 16) % 4, 1 + (seed / 64) % 4);
            if a == b || x == y {
                continue;
            }
            let u = r.u_elem(a, b, &Poly::one(4), x, y).unwrap();
            devs[slot] = devs[slot].add_scaled(&u, &Rat::from_int(c)).unwrap();
        }
        Endo::from_deviations(r, &devs).unwrap()
    }

    fn ia_endo(r: &Arc<QuotientContext>, devs: Vec<LieElement>) -> Endo {
        let q: Vec<QuotElement> = devs.iter().map(|d| r.reduce(d).unwrap()).collect();
        Endo::from_deviations(r, &q).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 100, rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha, ..ProptestConfig::default() })]

        #[test]
        fn apply_is_homomorphism(d1 in homogeneous(4, 2), d2 in homogeneous(4, 3), u in homogeneous(4, 2), v in homogeneous(4, 3)) {
            let r = r4(6);
            let e = ia_endo(&r, vec![d1.clone(), d2, LieElement::zero(4), d1]);
            let (qu, qv) = (r.reduce(&u).unwrap(), r.reduce(&v).unwrap());
            let lhs = e.apply(&qu.bracket(&qv).unwrap()).unwrap();
            let rhs = e.apply(&qu).unwrap().bracket_trunc(&e.apply(&qv).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
            let sum = e.apply(&qu.add(&qu.scale(&Rat::from_int(2))).unwrap()).unwrap();
            prop_assert_eq!(sum, e.apply(&qu).unwrap().scale(&Rat::from_int(3)));
        }

        #[test]
        fn kernel_is_abelian_and_fixes_r2(a in prop::collection::vec((0usize..4, 0usize..256, -2i64..=2), 1..4),
                                          b in prop::collection::vec((0usize..4, 0usize..256, -2i64..=2), 1..4),
                                          w in 0usize..256) {
            let r = r4(5);
            let (p, q) = (kernel_endo(&r, &a), kernel_endo(&r, &b));
            prop_assert_eq!(p.compose(&q).unwrap(), q.compose(&p).unwrap());
            let wq = kernel_endo(&r, &[(0, w, 1)]).deviations()[0].clone();
            prop_assert_eq!(p.apply(&wq).unwrap(), wq);
        }

        #[test]
        fn nu_is_additive(a in homogeneous(4, 3), b in homogeneous(4, 3), c in homogeneous(4, 3), d in homogeneous(4, 4)) {
            let r = r4(5);
            let z = LieElement::zero(4);
            let p = ia_endo(&r, vec![a, z.clone(), b, z.clone()]);
            let q = ia_endo(&r, vec![c, d, z.clone(), z]);
            let lhs = p.compose(&q).unwrap().nu(3).unwrap();
            prop_assert_eq!(lhs, p.nu(3).unwrap().add(&q.nu(3).unwrap()).unwrap());
        }

        #[test]
        fn graded_commutator_antisymmetric(a in homogeneous(4, 2), b in homogeneous(4, 3), c in homogeneous(4, 2)) {
            let r = r4(5);
            let z = LieElement::zero(4);
            let p = ia_endo(&r, vec![a, z.clone(), z.clone(), c]);
            let q = ia_endo(&r, vec![z.clone(), b, z.clone(), z]);
            let pq = graded_commutator(&p, 2, &q, 3).unwrap();
            let qp = graded_commutator(&q, 3, &p, 2).unwrap();
            prop_assert_eq!(pq, qp.scale(&Rat::from_int(-1)));
        }
    }
}
