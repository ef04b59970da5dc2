//! Tuples `(u_1, ..., u_n)` of degree-`k` elements, the `GL_n` action on
//! them, and exact closure of submodules generated by seed tuples.
//!
//! The action is `g (u_1, ..., u_n) = (g u_1, ..., g u_n) g^{-1}`. Tuples are
//! flattened slot-major, each slot in the context's canonical coordinates of
//! degree `k`.
//!
//! Closure runs in two independent ways. Group mode saturates under
//! transvections `tau_{i,j,a}`, `a = 1..=k+1`, and all permutation matrices.
//! Lie mode saturates under the infinitesimal action of the matrix units.
//! In Lie mode the work is split into torus weight spaces: a `gl_n`-submodule
//! is the sum of its weight spaces, so seeds are split into weight components
//! first and only off-diagonal units (which shift the weight) are applied.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::endo::{degree_five_lhs, higher_degree_lhs, Convention, Family};
use crate::error::{Error, Result};
use crate::lie::{basis_table, GLMatrix, LieElement};
use crate::quotient::{second_derived_rank, Poly, QuotElement, QuotientContext};
use crate::ratlin::{Rat, RowSpace, SparseVec};

#[derive(Clone)]
pub struct GradedTuple {
    ctx: Arc<QuotientContext>,
    k: usize,
    slots: Vec<QuotElement>,
}

impl PartialEq for GradedTuple {
    fn eq(&self, o: &Self) -> bool {
        self.ctx.same_as(&o.ctx) && self.k == o.k && self.slots == o.slots
    }
}

impl Eq for GradedTuple {}

impl fmt::Debug for GradedTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.slots.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{s}")?;
        }
        write!(f, ")")
    }
}

impl GradedTuple {
    pub fn new(ctx: &Arc<QuotientContext>, k: usize, slots: Vec<QuotElement>) -> Result<Self> {
        if slots.len() != ctx.n() {
            return Err(Error::DimensionMismatch { expected: ctx.n(), got: slots.len() });
        }
        if k > ctx.maxdeg() {
            return Err(Error::DegreeOverflow { degree: k, maxdeg: ctx.maxdeg() });
        }
        for s in &slots {
            if !s.ctx().same_as(ctx) {
                return Err(Error::Precondition("slot lives in a different context".into()));
            }
            if s.degrees().iter().any(|&d| d != k) {
                return Err(Error::NotHomogeneous);
            }
        }
        Ok(GradedTuple { ctx: ctx.clone(), k, slots })
    }

    pub fn zero(ctx: &Arc<QuotientContext>, k: usize) -> Result<Self> {
        Self::new(ctx, k, vec![ctx.zero(); ctx.n()])
    }

    /// `u` in slot `i` (1-based), zero elsewhere.
    pub fn single(ctx: &Arc<QuotientContext>, k: usize, i: usize, u: QuotElement) -> Result<Self> {
        if i == 0 || i > ctx.n() {
            return Err(Error::IndexOutOfRange { index: i, n: ctx.n() });
        }
        let mut slots = vec![ctx.zero(); ctx.n()];
        slots[i - 1] = u;
        Self::new(ctx, k, slots)
    }

    pub fn ctx(&self) -> &Arc<QuotientContext> {
        &self.ctx
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn slots(&self) -> &[QuotElement] {
        &self.slots
    }

    pub fn is_zero(&self) -> bool {
        self.slots.iter().all(|s| s.is_zero())
    }

    fn same_shape(&self, o: &GradedTuple) -> Result<()> {
        if !self.ctx.same_as(&o.ctx) || self.k != o.k {
            return Err(Error::Precondition("tuples of different shape".into()));
        }
        Ok(())
    }

    pub fn add(&self, o: &GradedTuple) -> Result<GradedTuple> {
        self.same_shape(o)?;
        let slots = self.slots.iter().zip(&o.slots).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(GradedTuple { ctx: self.ctx.clone(), k: self.k, slots })
    }

    pub fn sub(&self, o: &GradedTuple) -> Result<GradedTuple> {
        self.add(&o.scale(&Rat::from_int(-1)))
    }

    pub fn scale(&self, c: &Rat) -> GradedTuple {
        GradedTuple { ctx: self.ctx.clone(), k: self.k, slots: self.slots.iter().map(|s| s.scale(c)).collect() }
    }

    pub fn flat_dim(&self) -> usize {
        self.ctx.n() * self.ctx.dim(self.k).expect("k <= maxdeg")
    }

    pub fn flatten(&self) -> SparseVec {
        let dk = self.ctx.dim(self.k).expect("k <= maxdeg");
        let mut pairs = Vec::new();
        for (s, u) in self.slots.iter().enumerate() {
            for (c, x) in u.coords(self.k).expect("k <= maxdeg").iter() {
                pairs.push((s * dk + c, x.clone()));
            }
        }
        SparseVec::from_pairs(self.ctx.n() * dk, pairs)
    }

    pub fn from_flat(ctx: &Arc<QuotientContext>, k: usize, v: &SparseVec) -> Result<Self> {
        let dk = ctx.dim(k)?;
        if v.dim() != ctx.n() * dk {
            return Err(Error::DimensionMismatch { expected: ctx.n() * dk, got: v.dim() });
        }
        let mut parts: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); ctx.n()];
        for (i, x) in v.iter() {
            parts[i / dk].push((i % dk, x.clone()));
        }
        let slots = parts
            .into_iter()
            .map(|p| ctx.from_coords(k, &SparseVec::from_pairs(dk, p)))
            .collect::<Result<_>>()?;
        Self::new(ctx, k, slots)
    }
}

/// `(g u_1, ..., g u_n) g^{-1}`.
pub fn tuple_act(g: &GLMatrix, t: &GradedTuple) -> Result<GradedTuple> {
    let ginv = g.inverse()?;
    let moved: Vec<QuotElement> = t.slots.iter().map(|u| u.gl_act(g)).collect::<Result<_>>()?;
    let n = t.ctx.n();
    let slots = (0..n)
        .map(|j| {
            let mut acc = t.ctx.zero();
            for (i, u) in moved.iter().enumerate() {
                let c = ginv.get(i, j);
                if !c.is_zero() {
                    acc = acc.add_scaled(u, c)?;
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    GradedTuple::new(&t.ctx, t.k, slots)
}

/// Derivative at the identity of the action along the matrix unit `E_{ij}`:
/// the derivation `x_j -> x_i` on every slot, minus `u_i` in slot `j`.
pub fn infinitesimal_act(i: usize, j: usize, t: &GradedTuple) -> Result<GradedTuple> {
    let n = t.ctx.n();
    if i == 0 || j == 0 || i > n || j > n {
        return Err(Error::IndexOutOfRange { index: i.max(j), n });
    }
    let mut slots: Vec<QuotElement> = t.slots.iter().map(|u| u.derivation_act(i, j)).collect::<Result<_>>()?;
    slots[j - 1] = slots[j - 1].sub(&t.slots[i - 1])?;
    GradedTuple::new(&t.ctx, t.k, slots)
}

/// `chi` of a named family: its degree-`k` deviation tuple.
pub fn chi(ctx: &Arc<QuotientContext>, family: &Family, k: usize) -> Result<GradedTuple> {
    family.endo(ctx)?.nu(k)
}

/// `n * rank (R''_n)^k`, the dimension of the kernel model.
pub fn ambient_dim(n: usize, k: usize) -> usize {
    n * second_derived_rank(n, k)
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Group,
    Lie,
    Both,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "group" => Ok(Mode::Group),
            "lie" => Ok(Mode::Lie),
            "both" => Ok(Mode::Both),
            _ => Err(Error::Parse(format!("unknown mode {s:?}"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Group => "group",
            Mode::Lie => "lie",
            Mode::Both => "both",
        })
    }
}

/// A subspace of flattened degree-`k` tuples.
#[derive(Clone, Debug)]
pub struct SubmoduleSpan {
    ctx: Arc<QuotientContext>,
    k: usize,
    space: RowSpace,
}

impl SubmoduleSpan {
    pub fn empty(ctx: &Arc<QuotientContext>, k: usize) -> Result<Self> {
        Ok(SubmoduleSpan { ctx: ctx.clone(), k, space: RowSpace::new(ctx.n() * ctx.dim(k)?) })
    }

    pub fn dim(&self) -> usize {
        self.space.rank()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn space(&self) -> &RowSpace {
        &self.space
    }

    pub fn contains(&self, t: &GradedTuple) -> Result<bool> {
        check_membership(t, self)
    }

    /// Sum of two spans of the same shape.
    pub fn sum(&self, o: &SubmoduleSpan) -> Result<SubmoduleSpan> {
        if !self.ctx.same_as(&o.ctx) || self.k != o.k {
            return Err(Error::Precondition("spans of different shape".into()));
        }
        let mut s = self.clone();
        for r in o.space.rows() {
            s.space.rref_insert(r)?;
        }
        Ok(s)
    }

    pub fn same_span(&self, o: &SubmoduleSpan) -> bool {
        self.space.same_span(&o.space)
    }
}

pub fn check_membership(t: &GradedTuple, span: &SubmoduleSpan) -> Result<bool> {
    if !t.ctx.same_as(&span.ctx) || t.k != span.k {
        return Err(Error::Precondition("tuple and span have different shapes".into()));
    }
    span.space.in_span(&t.flatten())
}

/// A linear map on the degree-`k` coordinates, stored by columns.
struct SlotMap {
    cols: Vec<Vec<(usize, Rat)>>,
}

impl SlotMap {
    fn build(ctx: &Arc<QuotientContext>, k: usize, f: impl Fn(&QuotElement) -> Result<QuotElement> + Sync) -> Result<Self> {
        let dk = ctx.dim(k)?;
        let cols = (0..dk)
            .into_par_iter()
            .map(|c| {
                let e = ctx.from_coords(k, &SparseVec::unit(dk, c))?;
                Ok(f(&e)?.coords(k)?.iter().map(|(i, x)| (i, x.clone())).collect())
            })
            .collect::<Result<_>>()?;
        Ok(SlotMap { cols })
    }

    fn apply_into(&self, u: &[(usize, Rat)], coef: &Rat, out: &mut [Rat]) {
        for (c, x) in u {
            let s = x * coef;
            for (r, y) in &self.cols[*c] {
                out[*r] += &(&s * y);
            }
        }
    }
}

/// A generator of the closure: `t -> (M u_1, ..., M u_n) A + (u_1, ..., u_n) B`
/// where `M` acts on every slot and `A`, `B` mix slots.
struct TupleOp {
    slot: SlotMap,
    mix: Vec<Vec<Rat>>,
    extra: Vec<Vec<Rat>>,
}

impl TupleOp {
    fn apply(&self, v: &SparseVec, n: usize, dk: usize) -> SparseVec {
        let mut parts: Vec<Vec<(usize, Rat)>> = vec![Vec::new(); n];
        for (i, x) in v.iter() {
            parts[i / dk].push((i % dk, x.clone()));
        }
        let mut out = vec![Rat::zero(); n * dk];
        for (i, part) in parts.iter().enumerate() {
            if part.is_empty() {
                continue;
            }
            for j in 0..n {
                let a = &self.mix[i][j];
                let dst = &mut out[j * dk..(j + 1) * dk];
                if !a.is_zero() {
                    self.slot.apply_into(part, a, dst);
                }
                let b = &self.extra[i][j];
                if !b.is_zero() {
                    for (c, x) in part {
                        dst[*c] += &(x * b);
                    }
                }
            }
        }
        SparseVec::from_dense(&out)
    }
}

fn zero_mat(n: usize) -> Vec<Vec<Rat>> {
    vec![vec![Rat::zero(); n]; n]
}

fn group_ops(ctx: &Arc<QuotientContext>, k: usize, params: usize) -> Result<Vec<TupleOp>> {
    let n = ctx.n();
    let mut gens = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            if i != j {
                for a in 1..=params as i64 {
                    gens.push(GLMatrix::transvection(n, i, j, Rat::from_int(a)));
                }
            }
        }
    }
    for p in permutations(n) {
        if p.iter().enumerate().any(|(i, &x)| x != i + 1) {
            gens.push(GLMatrix::permutation(&p));
        }
    }
    gens.into_iter()
        .map(|g| {
            let ginv = g.inverse()?;
            let slot = SlotMap::build(ctx, k, |e| e.gl_act(&g))?;
            let mix = (0..n).map(|i| (0..n).map(|j| ginv.get(i, j).clone()).collect()).collect();
            Ok(TupleOp { slot, mix, extra: zero_mat(n) })
        })
        .collect()
}

fn lie_ops(ctx: &Arc<QuotientContext>, k: usize) -> Result<Vec<TupleOp>> {
    let n = ctx.n();
    let mut out = Vec::new();
    for i in 1..=n {
        for j in 1..=n {
            if i == j {
                continue;
            }
            let slot = SlotMap::build(ctx, k, |e| e.derivation_act(i, j))?;
            let mut mix = zero_mat(n);
            for (s, row) in mix.iter_mut().enumerate() {
                row[s] = Rat::one();
            }
            let mut extra = zero_mat(n);
            extra[i - 1][j - 1] = Rat::from_int(-1);
            out.push(TupleOp { slot, mix, extra });
        }
    }
    Ok(out)
}

/// All permutations of `1..=n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut p: Vec<usize> = (1..=n).collect();
    loop {
        out.push(p.clone());
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| p[i] < p[i + 1]) else {
            return out;
        };
        let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).expect("exists");
        p.swap(i, j);
        p[i + 1..].reverse();
    }
}

/// Worklist saturation of `space` under `ops`. Candidates for a batch are
/// reduced in parallel against a snapshot, then inserted by one writer.
fn saturate(space: &mut RowSpace, seeds: Vec<SparseVec>, ops: &[TupleOp], n: usize, dk: usize, cap: Option<usize>) -> Result<()> {
    let mut queue: Vec<SparseVec> = Vec::new();
    for s in seeds {
        if space.rref_insert(&s)? {
            queue.push(s);
        }
    }
    while !queue.is_empty() {
        if cap.is_some_and(|c| space.rank() >= c) {
            return Ok(());
        }
        let batch = std::mem::take(&mut queue);
        let snapshot = &*space;
        let residues: Vec<SparseVec> = batch
            .par_iter()
            .flat_map_iter(|v| ops.iter().map(move |op| op.apply(v, n, dk)))
            .map(|w| snapshot.reduce(&w))
            .filter(|r| !matches!(r, Ok(x) if x.is_zero()))
            .collect::<Result<_>>()?;
        for r in residues {
            if space.rref_insert(&r)? {
                queue.push(r);
            }
        }
    }
    Ok(())
}

/// Torus weight of every flat coordinate: content of the basis word minus the slot.
fn weights(ctx: &QuotientContext, k: usize) -> Result<Vec<Vec<i32>>> {
    let n = ctx.n();
    let table = basis_table(n, k);
    let contents: Vec<Vec<i32>> =
        ctx.complement(k)?.iter().map(|&idx| table.content(idx).iter().map(|&x| x as i32).collect()).collect();
    let mut out = Vec::with_capacity(n * contents.len());
    for slot in 0..n {
        for c in &contents {
            let mut w = c.clone();
            w[slot] -= 1;
            out.push(w);
        }
    }
    Ok(out)
}

fn group_closure(seeds: &[GradedTuple], ctx: &Arc<QuotientContext>, k: usize, params: usize) -> Result<SubmoduleSpan> {
    let mut span = SubmoduleSpan::empty(ctx, k)?;
    let ops = group_ops(ctx, k, params)?;
    let cap = if ctx.ideal() == crate::quotient::IdealSpec::In && k >= 4 {
        let sd = crate::quotient::second_derived_component(ctx, k)?;
        let inside = seeds
            .iter()
            .flat_map(|s| s.slots.iter())
            .map(|u| sd.space.in_span(&u.coords(k)?))
            .collect::<Result<Vec<bool>>>()?;
        inside.into_iter().all(|b| b).then(|| ambient_dim(ctx.n(), k))
    } else {
        None
    };
    saturate(&mut span.space, seeds.iter().map(|s| s.flatten()).collect(), &ops, ctx.n(), ctx.dim(k)?, cap)?;
    Ok(span)
}

fn lie_closure(seeds: &[GradedTuple], ctx: &Arc<QuotientContext>, k: usize) -> Result<SubmoduleSpan> {
    let dk = ctx.dim(k)?;
    let n = ctx.n();
    let ops = lie_ops(ctx, k)?;
    let wt = weights(ctx, k)?;
    let mut parts: BTreeMap<Vec<i32>, Vec<(usize, Rat)>> = BTreeMap::new();
    for s in seeds {
        for (i, x) in s.flatten().iter() {
            parts.entry(wt[i].clone()).or_default().push((i, x.clone()));
        }
    }
    // Saturate weight space by weight space: an op moves a weight vector to
    // another weight vector, so each residue is routed to its own block.
    let mut blocks: HashMap<Vec<i32>, RowSpace> = HashMap::new();
    let mut queue: Vec<(Vec<i32>, SparseVec)> = Vec::new();
    for (w, p) in parts {
        let v = SparseVec::from_pairs(n * dk, p);
        let b = blocks.entry(w.clone()).or_insert_with(|| RowSpace::new(n * dk));
        if b.rref_insert(&v)? {
            queue.push((w, v));
        }
    }
    while !queue.is_empty() {
        let batch = std::mem::take(&mut queue);
        let snapshot = &blocks;
        let residues: Vec<(Vec<i32>, SparseVec)> = batch
            .par_iter()
            .flat_map_iter(|(_, v)| ops.iter().map(move |op| op.apply(v, n, dk)))
            .filter(|w| !w.is_zero())
            .map(|w| {
                let key = wt[w.leading().expect("nonzero").0].clone();
                let r = match snapshot.get(&key) {
                    Some(b) => b.reduce(&w)?,
                    None => w,
                };
                Ok((key, r))
            })
            .filter(|r| !matches!(r, Ok((_, x)) if x.is_zero()))
            .collect::<Result<_>>()?;
        for (key, r) in residues {
            let b = blocks.entry(key.clone()).or_insert_with(|| RowSpace::new(n * dk));
            if b.rref_insert(&r)? {
                queue.push((key, r));
            }
        }
    }
    let mut span = SubmoduleSpan::empty(ctx, k)?;
    let mut keys: Vec<_> = blocks.keys().cloned().collect();
    keys.sort();
    for key in keys {
        for r in blocks[&key].rows() {
            span.space.rref_insert(r)?;
        }
    }
    Ok(span)
}

#[derive(Clone, Debug)]
pub struct Closure {
    pub span: SubmoduleSpan,
    /// Group and Lie closures coincide; `None` unless both were run.
    pub agreed: Option<bool>,
}

fn check_seeds(seeds: &[GradedTuple]) -> Result<(Arc<QuotientContext>, usize)> {
    let first = seeds.first().ok_or_else(|| Error::Precondition("no seeds".into()))?;
    for s in seeds {
        if !s.ctx.same_as(&first.ctx) || s.k != first.k {
            return Err(Error::Precondition("seeds of different shape".into()));
        }
    }
    Ok((first.ctx.clone(), first.k))
}

/// Smallest subspace containing the seeds and closed under the chosen action.
pub fn module_closure(seeds: &[GradedTuple], mode: Mode) -> Result<Closure> {
    module_closure_with(seeds, mode, None)
}

/// As [`module_closure`], with an explicit number of transvection parameters
/// (default `k + 1`).
pub fn module_closure_with(seeds: &[GradedTuple], mode: Mode, params: Option<usize>) -> Result<Closure> {
    let (ctx, k) = check_seeds(seeds)?;
    let params = params.unwrap_or(k + 1);
    match mode {
        Mode::Group => Ok(Closure { span: group_closure(seeds, &ctx, k, params)?, agreed: None }),
        Mode::Lie => Ok(Closure { span: lie_closure(seeds, &ctx, k)?, agreed: None }),
        Mode::Both => {
            let (g, l) = rayon::join(|| group_closure(seeds, &ctx, k, params), || lie_closure(seeds, &ctx, k));
            let (g, l) = (g?, l?);
            let agreed = g.same_span(&l);
            Ok(Closure { span: g, agreed: Some(agreed) })
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub n: usize,
    pub k: usize,
    pub ambient_dim: usize,
    pub closure_dim: usize,
    pub seeds: Vec<String>,
    pub mode: Mode,
    pub agreed: bool,
    pub elapsed_ms: u128,
}

impl DensityReport {
    pub fn holds(&self) -> bool {
        self.agreed && self.closure_dim == self.ambient_dim
    }
}

/// The two generators `alpha_{(t_1^{k-4},1)}`, `alpha_{(1,t_3^{k-4})}`.
pub fn theorem_seeds(n: usize, k: usize) -> Result<Vec<Family>> {
    if n < 4 || k < 4 {
        return Err(Error::Precondition("needs n, k >= 4".into()));
    }
    let e = k as u32 - 4;
    Ok(vec![
        Family::AlphaLeft(Poly::monomial_from(n, &[(1, e)])?),
        Family::AlphaRight(Poly::monomial_from(n, &[(3, e)])?),
    ])
}

/// Closure of the two theorem seeds against the kernel model dimension.
pub fn density_check(n: usize, k: usize, mode: Mode) -> Result<DensityReport> {
    let start = Instant::now();
    let ctx = QuotientContext::r_n(n, k)?;
    let fams = theorem_seeds(n, k)?;
    let seeds = fams.iter().map(|f| chi(&ctx, f, k)).collect::<Result<Vec<_>>>()?;
    let closure = module_closure(&seeds, mode)?;
    Ok(DensityReport {
        n,
        k,
        ambient_dim: ambient_dim(n, k),
        closure_dim: closure.span.dim(),
        seeds: fams.iter().map(|f| f.to_string()).collect(),
        mode,
        agreed: closure.agreed.unwrap_or(true),
        elapsed_ms: start.elapsed().as_millis(),
    })
}

/// Closures under `a = 1..=k+1` and `a = 1..=k+3` coincide.
pub fn vandermonde_sufficient(seeds: &[GradedTuple]) -> Result<bool> {
    let (_, k) = check_seeds(seeds)?;
    let a = module_closure_with(seeds, Mode::Group, Some(k + 1))?;
    let b = module_closure_with(seeds, Mode::Group, Some(k + 3))?;
    Ok(a.span.same_span(&b.span))
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipCheck {
    pub item: String,
    pub targets: usize,
    pub holds: bool,
}

fn monomials_in(n: usize, vars: &[usize], d: u32) -> Vec<Poly> {
    Poly::monomials(n, d)
        .into_iter()
        .filter(|e| e.iter().enumerate().all(|(i, &x)| x == 0 || vars.contains(&(i + 1))))
        .map(|e| Poly::monomial(n, e, Rat::one()))
        .collect()
}

/// The itemized memberships behind the theorem at `(n, k)`, each over every
/// monomial in the stated variables.
pub fn membership_checks(n: usize, k: usize) -> Result<Vec<MembershipCheck>> {
    let ctx = QuotientContext::r_n(n, k)?;
    let fams = theorem_seeds(n, k)?;
    let (s1, s2) = (chi(&ctx, &fams[0], k)?, chi(&ctx, &fams[1], k)?);
    let (n1, n2) = rayon::join(|| module_closure(&[s1], Mode::Group), || module_closure(&[s2], Mode::Group));
    let (n1, n2) = (n1?.span, n2?.span);
    let nn = n1.sum(&n2)?;
    let d = k as u32 - 4;
    let all: Vec<usize> = (1..=n).collect();
    let tail = |from: usize| -> Vec<usize> { (from..=n).collect() };
    let with = |mut a: Vec<usize>, b: Vec<usize>| {
        a.extend(b);
        a
    };
    type Maker = fn(Poly) -> Family;
    let left: Maker = Family::AlphaLeft;
    let right: Maker = Family::AlphaRight;
    let gamma: Maker = Family::Gamma;
    let mut items: Vec<(String, &SubmoduleSpan, Maker, Vec<Poly>)> = Vec::new();
    items.push(("left t_i^d, i>=2".into(), &n1, left, (2..=n).map(|i| Poly::monomial_from(n, &[(i, d)]).unwrap()).collect()));
    items.push(("left monomials in t1,t2".into(), &n1, left, monomials_in(n, &[1, 2], d)));
    items.push(("left monomials in t1,t_i".into(), &n1, left, (2..=n).flat_map(|i| monomials_in(n, &[1, i], d)).collect()));
    items.push(("left all monomials".into(), &n1, left, monomials_in(n, &all, d)));
    items.push(("right t_i^d, i>=4".into(), &n2, right, (4..=n).map(|i| Poly::monomial_from(n, &[(i, d)]).unwrap()).collect()));
    items.push(("right monomials in t3,t4".into(), &n2, right, monomials_in(n, &[3, 4], d)));
    items.push(("right monomials in t3,t_i".into(), &n2, right, (4..=n).flat_map(|i| monomials_in(n, &[3, i], d)).collect()));
    items.push(("right monomials in t3..tn".into(), &n2, right, monomials_in(n, &tail(3), d)));
    items.push(("gamma monomials in t1,t2,t5..tn".into(), &nn, gamma, monomials_in(n, &with(vec![1, 2], tail(5)), d)));
    items.push(("gamma monomials in t1,t2,t4..tn".into(), &nn, gamma, monomials_in(n, &with(vec![1, 2], tail(4)), d)));
    items.push(("gamma all monomials".into(), &nn, gamma, monomials_in(n, &all, d)));
    items.push(("right all monomials".into(), &nn, right, monomials_in(n, &all, d)));
    items
        .into_par_iter()
        .map(|(item, span, make, targets)| {
            let mut holds = true;
            for f in &targets {
                holds &= span.contains(&chi(&ctx, &make(f.clone()), k)?)?;
            }
            Ok(MembershipCheck { item, targets: targets.len(), holds })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct StepReport {
    pub n: usize,
    pub k: usize,
    /// The commutator identity used at this step holds exactly, when one is used.
    pub identity_holds: Option<bool>,
    pub closure_dim: usize,
    pub ambient_dim: usize,
    pub holds: bool,
}

/// The inductive step at degree `k`: the commutator construction supplies a
/// tuple which, with `alpha_{(t_1^{k-4},1)}`, generates the whole kernel model.
pub fn check_induction_step(k: usize, n: usize) -> Result<StepReport> {
    if n < 4 || !(4..=7).contains(&k) {
        return Err(Error::Precondition("needs n >= 4 and k in 4..=7".into()));
    }
    let ctx = QuotientContext::r_n(n, k)?;
    let a1 = chi(&ctx, &theorem_seeds(n, k)?[0], k)?;
    let (extra, identity_holds) = match k {
        4 => (None, None),
        5 => {
            let id = crate::endo::degree_five_identity(n);
            let rep = crate::endo::verify_identity(&id.lhs, &id.rhs, &QuotientContext::r_n(n, 6)?, 6)?;
            (Some(degree_five_lhs(n).evaluate(&ctx, Convention::RightmostFirst)?.nu(5)?), Some(rep.holds))
        }
        _ => {
            let id = crate::endo::higher_degree_identity(n, k);
            let rep = id.verify()?;
            (Some(higher_degree_lhs(n, k).evaluate(&ctx, Convention::RightmostFirst)?.nu(k)?), Some(rep.holds))
        }
    };
    let mut seeds = vec![a1];
    seeds.extend(extra);
    let closure = module_closure(&seeds, Mode::Group)?;
    let ambient = ambient_dim(n, k);
    Ok(StepReport {
        n,
        k,
        identity_holds,
        closure_dim: closure.span.dim(),
        ambient_dim: ambient,
        holds: identity_holds.unwrap_or(true) && closure.span.dim() == ambient,
    })
}

/// Lie element as a tuple slot, for callers holding free-algebra data.
pub fn slot_of(ctx: &Arc<QuotientContext>, u: &LieElement) -> Result<QuotElement> {
    ctx.reduce(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::tests::gl_matrix;
    use proptest::prelude::*;

    fn r4(k: usize) -> Arc<QuotientContext> {
        QuotientContext::r_n(4, k).unwrap()
    }

    fn mono(n: usize, fs: &[(usize, u32)]) -> Poly {
        Poly::monomial_from(n, fs).unwrap()
    }

    fn alpha(ctx: &Arc<QuotientContext>, f: Poly, k: usize) -> GradedTuple {
        chi(ctx, &Family::AlphaLeft(f), k).unwrap()
    }

    #[test]
    fn identity_action() {
        let r = r4(5);
        let t = alpha(&r, mono(4, &[(1, 1)]), 5);
        assert_eq!(tuple_act(&GLMatrix::identity(4), &t).unwrap(), t);
    }

    #[test]
    fn swap_matches_permutation_conjugation() {
        let r = r4(4);
        let t = alpha(&r, Poly::one(4), 4);
        let g = GLMatrix::swap(4, 1, 2);
        // sigma_{1,2} alpha_{(1,1)} sigma_{1,2}^{-1} sends y_2 to y_2 + [[y_2,y_1],[y_3,y_4]].
        let expected = GradedTuple::single(&r, 4, 2, r.u_elem(2, 1, &Poly::one(4), 3, 4).unwrap()).unwrap();
        assert_eq!(tuple_act(&g, &t).unwrap(), expected);
    }

    #[test]
    fn transvection_vector_of_tau_3_1() {
        // f = t1 t2 at k = 6; slot 1 and slot 3 as in the V.d.a computation.
        let r = r4(6);
        let f = mono(4, &[(1, 1), (2, 1)]);
        let a = Rat::from_int(3);
        let got = tuple_act(&GLMatrix::transvection(4, 3, 1, a.clone()), &alpha(&r, f.clone(), 6)).unwrap();
        let u34 = r.u_elem(1, 2, &f, 3, 4).unwrap();
        let u14 = r.u_elem(1, 2, &f, 1, 4).unwrap();
        let s1 = u34.add_scaled(&u14, &a).unwrap();
        let s3 = u34.scale(&(-&a)).add_scaled(&u14, &(-&(&a * &a))).unwrap();
        let expected = GradedTuple::new(&r, 6, vec![s1, r.zero(), s3, r.zero()]).unwrap();
        assert_eq!(got, expected);
    }

    #[test]
    fn infinitesimal_is_derivative() {
        let r = r4(5);
        let t = alpha(&r, mono(4, &[(2, 1)]), 5).add(&chi(&r, &Family::Gamma(mono(4, &[(3, 1)])), 5).unwrap()).unwrap();
        for (i, j) in [(1, 2), (3, 1), (4, 2)] {
            // Entries are polynomials in a of degree <= k + 1, so eight nodes
            // determine the derivative at a = 0 exactly.
            let act = |a: i64| tuple_act(&GLMatrix::transvection(4, j, i, Rat::from_int(a)), &t).unwrap();
            let pts: Vec<GradedTuple> = (0..=7).map(act).collect();
            let mut d = GradedTuple::zero(&r, 5).unwrap();
            for (m, p) in pts.iter().enumerate() {
                let w = lagrange_derivative_at_zero(m, 7);
                d = d.add(&p.scale(&w)).unwrap();
            }
            assert_eq!(d, infinitesimal_act(i, j, &t).unwrap());
        }
    }

    /// `L_m'(0)` for the Lagrange basis on nodes `0..=top`.
    fn lagrange_derivative_at_zero(m: usize, top: usize) -> Rat {
        let nodes: Vec<i64> = (0..=top as i64).collect();
        let xm = nodes[m];
        let denom = nodes.iter().filter(|&&x| x != xm).fold(Rat::one(), |acc, &x| &acc * &Rat::from_int(xm - x));
        // derivative of prod_{x != xm}(a - x) at a = 0
        let others: Vec<i64> = nodes.iter().copied().filter(|&x| x != xm).collect();
        let mut num = Rat::zero();
        for skip in 0..others.len() {
            let mut p = Rat::one();
            for (q, &x) in others.iter().enumerate() {
                if q != skip {
                    p = &p * &Rat::from_int(-x);
                }
            }
            num += &p;
        }
        &num / &denom
    }

    #[test]
    fn diagonal_unit_eigenvalue() {
        let k = 6;
        let r = r4(k);
        let t = alpha(&r, mono(4, &[(1, k as u32 - 4)]), k);
        let got = infinitesimal_act(1, 1, &t).unwrap();
        // letter 1 occurs k - 3 times; slot 1 contributes -1
        assert_eq!(got, t.scale(&Rat::from_int(k as i64 - 4)));
        assert!(infinitesimal_act(2, 3, &GradedTuple::zero(&r, k).unwrap()).unwrap().is_zero());
    }

    #[test]
    fn zero_seed_closure() {
        let r = r4(4);
        let c = module_closure(&[GradedTuple::zero(&r, 4).unwrap()], Mode::Both).unwrap();
        assert_eq!(c.span.dim(), 0);
        assert_eq!(c.agreed, Some(true));
    }

    #[test]
    fn density_4_4() {
        let rep = density_check(4, 4, Mode::Both).unwrap();
        assert_eq!(rep.ambient_dim, 60);
        assert_eq!(rep.closure_dim, 60);
        assert!(rep.agreed);
    }

    #[test]
    fn left_alpha_membership_at_4_5() {
        let r = r4(5);
        let n1 = module_closure(&[alpha(&r, mono(4, &[(1, 1)]), 5)], Mode::Lie).unwrap().span;
        for i in 2..=4 {
            assert!(n1.contains(&alpha(&r, mono(4, &[(i, 1)]), 5)).unwrap());
        }
        assert!(n1.dim() < ambient_dim(4, 5));
        // alpha_{(1,t_3)} is outside N_{4,5,1}
        assert!(!n1.contains(&chi(&r, &Family::AlphaRight(mono(4, &[(3, 1)])), 5).unwrap()).unwrap());
    }

    #[test]
    fn gamma_in_sum_at_4_5() {
        let r = r4(5);
        let seeds: Vec<GradedTuple> = theorem_seeds(4, 5).unwrap().iter().map(|f| chi(&r, f, 5).unwrap()).collect();
        let nn = module_closure(&seeds, Mode::Group).unwrap().span;
        assert!(nn.contains(&chi(&r, &Family::Gamma(mono(4, &[(1, 1)])), 5).unwrap()).unwrap());
    }

    #[test]
    fn membership_in_4_6() {
        let r = r4(6);
        let n1 = module_closure(&[alpha(&r, mono(4, &[(1, 2)]), 6)], Mode::Lie).unwrap().span;
        assert!(n1.contains(&alpha(&r, mono(4, &[(1, 1), (2, 1)]), 6)).unwrap());
    }

    #[test]
    fn induction_step_4_and_5() {
        for k in [4, 5] {
            let rep = check_induction_step(k, 4).unwrap();
            assert!(rep.holds, "{rep:?}");
        }
    }

    #[test]
    fn permutations_count() {
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(1), vec![vec![1]]);
    }

    #[test]
    fn flatten_round_trip() {
        let r = r4(5);
        let t = alpha(&r, mono(4, &[(4, 1)]), 5);
        assert_eq!(GradedTuple::from_flat(&r, 5, &t.flatten()).unwrap(), t);
    }

    #[test]
    fn vandermonde_at_4_4() {
        let r = r4(4);
        let t = alpha(&r, Poly::one(4), 4);
        assert!(vandermonde_sufficient(&[t]).unwrap());
    }

    fn invertible(g: &GLMatrix) -> bool {
        g.inverse().is_ok()
    }

    fn tuple_strategy() -> impl Strategy<Value = Vec<(usize, usize, usize, usize, usize, i64)>> {
        prop::collection::vec((1usize..=4, 1usize..=4, 1usize..=4, 1usize..=4, 1usize..=4, -2i64..=2), 1..4)
    }

    fn build(r: &Arc<QuotientContext>, terms: &[(usize, usize, usize, usize, usize, i64)]) -> GradedTuple {
        let mut t = GradedTuple::zero(r, 5).unwrap();
        for &(slot, a, b, c, v, x) in terms {
            let d = if c == 4 { 3 } else { 4 };
            let u = r.u_elem(a, b, &Poly::var(4, v).unwrap(), c, d).unwrap();
            t = t.add(&GradedTuple::single(r, 5, slot, u.scale(&Rat::from_int(x))).unwrap()).unwrap();
        }
        t
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 100, rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha, ..ProptestConfig::default() })]

        #[test]
        fn action_is_associative(g in gl_matrix(4), h in gl_matrix(4), terms in tuple_strategy()) {
            prop_assume!(invertible(&g) && invertible(&h));
            let r = r4(5);
            let t = build(&r, &terms);
            let lhs = tuple_act(&g.mul(&h), &t).unwrap();
            let rhs = tuple_act(&g, &tuple_act(&h, &t).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn action_is_linear(g in gl_matrix(4), terms in tuple_strategy(), c in -3i64..=3) {
            prop_assume!(invertible(&g));
            let r = r4(5);
            let t = build(&r, &terms);
            let c = Rat::from_int(c);
            prop_assert_eq!(tuple_act(&g, &t.scale(&c)).unwrap(), tuple_act(&g, &t).unwrap().scale(&c));
        }

        #[test]
        fn nu_is_equivariant(g in gl_matrix(4), terms in tuple_strategy()) {
            prop_assume!(invertible(&g));
            let r = r4(5);
            let t = build(&r, &terms);
            let phi = crate::endo::Endo::from_deviations(&r, t.slots()).unwrap();
            let ge = crate::endo::Endo::linear(&r, &g).unwrap();
            let conj = ge.compose(&phi).unwrap().compose(&ge.inverse().unwrap()).unwrap();
            prop_assert_eq!(conj.nu(5).unwrap(), tuple_act(&g, &phi.nu(5).unwrap()).unwrap());
        }
    }
}
