//! Seeded randomized invariant suites, runnable outside the test harness.
//!
//! Each property draws its inputs from a ChaCha stream derived from the seed
//! and the property name, so a single property can be replayed in isolation.

use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assoc::{block_det_mod, is_balanced, is_balanced_baseline, phi, AssocPoly, Mat2, PolyZ, Word};
use crate::density::{tuple_act, vandermonde_sufficient, GradedTuple};
use crate::endo::{graded_commutator, Endo};
use crate::error::{Error, Result};
use crate::lie::{basis_table, extract, GLMatrix, LieElement};
use crate::obstruct::{jacobian, trace};
use crate::quotient::{ideal_basis, ideal_component, IdealSpec, Poly, QuotElement, QuotientContext};
use crate::ratlin::{Rat, RowSpace, SparseVec};
use crate::schur::{lr_tensor, schur_dim, Partition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Ratlin,
    Assoc,
    Lie,
    Quotient,
    Endo,
    Density,
    Schur,
    Obstruct,
}

impl Suite {
    pub const ALL: [Suite; 8] =
        [Suite::Ratlin, Suite::Assoc, Suite::Lie, Suite::Quotient, Suite::Endo, Suite::Density, Suite::Schur, Suite::Obstruct];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Ratlin => "ratlin",
            Suite::Assoc => "assoc",
            Suite::Lie => "lie",
            Suite::Quotient => "quotient",
            Suite::Endo => "endo",
            Suite::Density => "density",
            Suite::Schur => "schur",
            Suite::Obstruct => "obstruct",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::Parse(format!("unknown suite {s:?}")))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub suite: &'static str,
    pub property: &'static str,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

impl PropertyReport {
    pub fn holds(&self) -> bool {
        self.failures == 0
    }
}

type Check = fn(&mut ChaCha8Rng) -> Result<bool>;

fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn run(suite: Suite, props: &[(&'static str, Check, usize)], cases: usize, seed: u64) -> Vec<PropertyReport> {
    props
        .iter()
        .map(|&(property, f, divisor)| {
            let cases = (cases / divisor).max(1);
            let mut rng = stream(seed, property);
            let mut failures = 0;
            let mut first_failure = None;
            for case in 0..cases {
                let outcome = f(&mut rng);
                if !matches!(outcome, Ok(true)) {
                    failures += 1;
                    first_failure.get_or_insert_with(|| match outcome {
                        Err(e) => format!("case {case}: error {e}"),
                        _ => format!("case {case}: property violated"),
                    });
                }
            }
            PropertyReport { suite: suite.name(), property, cases, failures, first_failure }
        })
        .collect()
}

/// Runs every property of `suite` for `cases` random inputs. The closure
/// comparison in the density suite is costlier and uses a tenth of the cases.
pub fn run_suite(suite: Suite, cases: usize, seed: u64) -> Vec<PropertyReport> {
    let props: &[(&'static str, Check, usize)] = match suite {
        Suite::Ratlin => &[("rank matches dense elimination", rank_oracle, 1), ("rank is order insensitive", rank_order, 1), ("field laws", field_laws, 1)],
        Suite::Assoc => &[
            ("reconstruction from derivatives", reconstruction, 1),
            ("derivation laws", derivation_laws, 1),
            ("representation is multiplicative", phi_hom, 1),
            ("balanced fast path matches oracle", balanced_oracle, 1),
            ("block determinant matches expansion", block_det, 1),
        ],
        Suite::Lie => &[
            ("jacobi identity", jacobi, 1),
            ("embedding round trip", round_trip, 1),
            ("embedding is a Lie homomorphism", expand_hom, 1),
            ("linear action commutes with bracket", gl_bracket, 1),
        ],
        Suite::Quotient => &[
            ("ideal is GL-invariant", ideal_gl_invariant, 1),
            ("ideal closed under brackets with generators", ideal_closed, 1),
            ("reduction is idempotent and linear", reduce_linear, 1),
        ],
        Suite::Endo => &[
            ("substitution is a homomorphism", apply_hom, 1),
            ("kernel of the projection is abelian", kernel_abelian, 1),
            ("leading terms are additive", nu_additive, 1),
            ("graded commutator is antisymmetric", commutator_antisymmetric, 1),
        ],
        Suite::Density => &[
            ("action is associative", action_assoc, 1),
            ("leading terms are equivariant", nu_equivariant, 1),
            ("specializations suffice", vandermonde, 10),
        ],
        Suite::Schur => &[
            ("tensor product is commutative", lr_commutative, 1),
            ("tensor product respects row bound", lr_rows, 1),
            ("dimension is multiplicative", lr_dim, 1),
            ("dimension positive iff shape fits", dim_positive, 1),
        ],
        Suite::Obstruct => &[
            ("Lie elements have zero constant term", lie_no_constant, 1),
            ("commutators of words are traceless", traceless, 1),
            ("jacobian of linear maps is the matrix", linear_jacobian, 1),
        ],
    };
    run(suite, props, cases, seed)
}

fn int(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Rat {
    Rat::from_int(rng.gen_range(lo..=hi))
}

fn lie_hom(rng: &mut ChaCha8Rng, n: usize, d: usize) -> LieElement {
    let len = basis_table(n, d).len();
    let terms = rng.gen_range(1..5);
    LieElement::from_coords(n, d, (0..terms).map(|_| (rng.gen_range(0..len), int(rng, -3, 3))).collect::<Vec<_>>())
}

fn lie_elem(rng: &mut ChaCha8Rng, n: usize, maxdeg: usize) -> LieElement {
    let parts = rng.gen_range(1..3);
    (0..parts).fold(LieElement::zero(n), |a, _| {
        let d = rng.gen_range(1..=maxdeg);
        a.add(&lie_hom(rng, n, d)).expect("same rank")
    })
}

fn assoc(rng: &mut ChaCha8Rng, n: usize, maxdeg: usize) -> AssocPoly {
    let terms = rng.gen_range(0..6);
    let ts: Vec<(Word, Rat)> = (0..terms)
        .map(|_| {
            let len = rng.gen_range(0..=maxdeg);
            (Word((0..len).map(|_| rng.gen_range(1..=n as u8)).collect()), int(rng, -3, 3))
        })
        .collect();
    AssocPoly::from_terms(n, ts).expect("letters in range")
}

fn gl(rng: &mut ChaCha8Rng, n: usize) -> GLMatrix {
    loop {
        let rows = (0..n).map(|_| (0..n).map(|_| int(rng, -2, 2)).collect()).collect();
        let g = GLMatrix::from_rows(rows).expect("square");
        if g.inverse().is_ok() {
            return g;
        }
    }
}

fn rows(rng: &mut ChaCha8Rng, dim: usize) -> Vec<SparseVec> {
    let count = rng.gen_range(0..dim + 3);
    (0..count)
        .map(|_| {
            let nnz = rng.gen_range(0..=3);
            SparseVec::from_pairs(dim, (0..nnz).map(|_| (rng.gen_range(0..dim), int(rng, -3, 3))).collect::<Vec<_>>())
        })
        .collect()
}

fn dense_rank(rows: &[SparseVec], dim: usize) -> usize {
    let mut m: Vec<Vec<Rat>> = rows.iter().map(|r| r.to_dense()).collect();
    let mut rank = 0;
    for c in 0..dim {
        let Some(p) = (rank..m.len()).find(|&r| !m[r][c].is_zero()) else { continue };
        m.swap(rank, p);
        for r in 0..m.len() {
            if r != rank && !m[r][c].is_zero() {
                let f = &m[r][c] / &m[rank][c];
                let pivot = m[rank].clone();
                for (x, y) in m[r].iter_mut().zip(&pivot) {
                    *x -= &(&f * y);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn span(rows: &[SparseVec], dim: usize) -> Result<RowSpace> {
    let mut s = RowSpace::new(dim);
    for r in rows {
        s.rref_insert(r)?;
    }
    Ok(s)
}

fn rank_oracle(rng: &mut ChaCha8Rng) -> Result<bool> {
    let dim = rng.gen_range(1..12);
    let rs = rows(rng, dim);
    Ok(span(&rs, dim)?.rank() == dense_rank(&rs, dim))
}

fn rank_order(rng: &mut ChaCha8Rng) -> Result<bool> {
    let dim = rng.gen_range(1..10);
    let rs = rows(rng, dim);
    let mut rev = rs.clone();
    rev.reverse();
    Ok(span(&rs, dim)?.same_span(&span(&rev, dim)?))
}

fn field_laws(rng: &mut ChaCha8Rng) -> Result<bool> {
    let a = &int(rng, -1000, 1000) / &int(rng, 1, 50);
    let b = &int(rng, -1000, 1000) / &int(rng, 1, 50);
    let c = &int(rng, i64::MAX / 4, i64::MAX / 2) / &int(rng, 1, 50);
    let distrib = &a * &(&b + &c) == &(&a * &b) + &(&a * &c);
    let inverse = b.is_zero() || &(&a / &b) * &b == a;
    Ok(distrib && inverse && &(&a + &c) - &c == a)
}

fn reconstruction(rng: &mut ChaCha8Rng) -> Result<bool> {
    let n = rng.gen_range(2..=5);
    let f = assoc(rng, n, 6);
    let mut g = AssocPoly::one(n).scale(&f.epsilon());
    for i in 1..=n {
        g = g.add(&AssocPoly::x(n, i).mul(&f.partial(i)?)?)?;
    }
    Ok(g == f)
}

fn derivation_laws(rng: &mut ChaCha8Rng) -> Result<bool> {
    let (f, g) = (assoc(rng, 4, 4), assoc(rng, 4, 4));
    let i = rng.gen_range(1..=4);
    let (a, b) = (int(rng, -3, 3), int(rng, -3, 3));
    let linear = f.scale(&a).add(&g.scale(&b))?.partial(i)? == f.partial(i)?.scale(&a).add(&g.partial(i)?.scale(&b))?;
    let product = f.mul(&g)?.partial(i)? == f.partial(i)?.mul(&g)?.add(&g.partial(i)?.scale(&f.epsilon()))?;
    Ok(linear && product)
}

fn phi_hom(rng: &mut ChaCha8Rng) -> Result<bool> {
    let (f, g) = (assoc(rng, 4, 5), assoc(rng, 4, 5));
    Ok(phi(&f.mul(&g)?)? == phi(&f)?.mul(&phi(&g)?))
}

fn balanced_oracle(rng: &mut ChaCha8Rng) -> Result<bool> {
    let d = rng.gen_range(2..=6);
    let mut f = AssocPoly::zero(4);
    for _ in 0..rng.gen_range(1..6) {
        let w = Word((0..d).map(|_| rng.gen_range(1..=4u8)).collect());
        let c = int(rng, -3, 3);
        f = f.add(&AssocPoly::monomial(4, w.clone(), c.clone()))?;
        // Half the time add the matching rotation so balanced inputs occur.
        if rng.gen_bool(0.5) {
            f = f.sub(&AssocPoly::monomial(4, w.rotate(), c))?;
        }
    }
    Ok(is_balanced(&f)? == is_balanced_baseline(&f)?)
}

fn poly_z(rng: &mut ChaCha8Rng) -> PolyZ {
    let len = rng.gen_range(0..4);
    PolyZ::from_coeffs((0..len).map(|_| int(rng, -2, 2)).collect())
}

fn block_det(rng: &mut ChaCha8Rng) -> Result<bool> {
    let mut mat = || Mat2::new(poly_z(rng), poly_z(rng), poly_z(rng), poly_z(rng));
    let blocks = vec![vec![mat(), mat()], vec![mat(), mat()]];
    let m = rng.gen_range(1..=6);
    let e = |r: usize, c: usize| -> PolyZ {
        let b = &blocks[r / 2][c / 2];
        [&b.a, &b.b, &b.c, &b.d][(r % 2) * 2 + c % 2].clone()
    };
    // Leibniz expansion over the 24 permutations of four indices.
    let mut det = PolyZ::zero();
    for p in crate::density::permutations(4) {
        let inversions = (0..4).flat_map(|i| (i + 1..4).map(move |j| (i, j))).filter(|&(i, j)| p[i] > p[j]).count();
        let mut term = PolyZ::one();
        for (r, &c) in p.iter().enumerate() {
            term = term.mul(&e(r, c - 1));
        }
        det = if inversions % 2 == 0 { det.add(&term) } else { det.sub(&term) };
    }
    Ok(block_det_mod(&blocks, m)? == det.mod_lambda(m))
}

fn jacobi(rng: &mut ChaCha8Rng) -> Result<bool> {
    let (a, b, c) = (lie_elem(rng, 3, 2), lie_elem(rng, 3, 2), lie_elem(rng, 3, 2));
    let s = a.bracket(&b)?.bracket(&c)?.add(&b.bracket(&c)?.bracket(&a)?)?.add(&c.bracket(&a)?.bracket(&b)?)?;
    Ok(s.is_zero())
}

fn round_trip(rng: &mut ChaCha8Rng) -> Result<bool> {
    let n = rng.gen_range(2..=5);
    let u = lie_elem(rng, n, if n <= 3 { 7 } else { 5 });
    Ok(extract(&u.expand())? == u)
}

fn expand_hom(rng: &mut ChaCha8Rng) -> Result<bool> {
    let (u, v) = (lie_elem(rng, 4, 3), lie_elem(rng, 4, 3));
    Ok(u.bracket(&v)?.expand() == u.expand().commutator(&v.expand())?)
}

fn gl_bracket(rng: &mut ChaCha8Rng) -> Result<bool> {
    let g = gl(rng, 3);
    let (u, v) = (lie_elem(rng, 3, 2), lie_elem(rng, 3, 2));
    Ok(u.bracket(&v)?.gl_act(&g)? == u.gl_act(&g)?.bracket(&v.gl_act(&g)?)?)
}

const SPECS: [IdealSpec; 5] = [IdealSpec::DerivedSquared, IdealSpec::Gamma3Derived, IdealSpec::DerivedGamma3, IdealSpec::In, IdealSpec::Jn];

fn in_ideal(spec: IdealSpec, u: &LieElement, d: usize) -> Result<bool> {
    let rs = ideal_basis(spec, 4, d);
    rs.in_span(&SparseVec::from_pairs(rs.dim(), u.coords(d).cloned().unwrap_or_default()))
}

fn random_ideal_vector(rng: &mut ChaCha8Rng, spec: IdealSpec, d: usize) -> Option<LieElement> {
    let rows = ideal_component(spec, 4, d).rows();
    if rows.is_empty() {
        return None;
    }
    let mut u = LieElement::zero(4);
    for _ in 0..rng.gen_range(1..3) {
        let r = LieElement::from_coords(4, d, rows[rng.gen_range(0..rows.len())].clone());
        u = u.add_scaled(&r, &int(rng, -2, 2));
    }
    Some(u)
}

fn ideal_gl_invariant(rng: &mut ChaCha8Rng) -> Result<bool> {
    let spec = SPECS[rng.gen_range(0..SPECS.len())];
    let d = rng.gen_range(4..=6);
    let g = gl(rng, 4);
    match random_ideal_vector(rng, spec, d) {
        None => Ok(true),
        Some(u) => in_ideal(spec, &u.gl_act(&g)?, d),
    }
}

fn ideal_closed(rng: &mut ChaCha8Rng) -> Result<bool> {
    let spec = SPECS[rng.gen_range(0..SPECS.len())];
    let d = rng.gen_range(4..=6);
    let i = rng.gen_range(1..=4);
    match random_ideal_vector(rng, spec, d) {
        None => Ok(true),
        Some(u) => in_ideal(spec, &u.bracket(&LieElement::generator(4, i)?)?, d + 1),
    }
}

fn r4(maxdeg: usize) -> Result<Arc<QuotientContext>> {
    QuotientContext::r_n(4, maxdeg)
}

fn reduce_linear(rng: &mut ChaCha8Rng) -> Result<bool> {
    let r = r4(5)?;
    let (a, b, c) = (lie_hom(rng, 4, 5), lie_hom(rng, 4, 5), int(rng, -3, 3));
    let ra = r.reduce(&a)?;
    let idem = r.reduce(ra.lift())? == ra;
    let lin = r.reduce(&a.add_scaled(&b, &c))? == ra.add_scaled(&r.reduce(&b)?, &c)?;
    Ok(idem && lin)
}

fn ia_endo(r: &Arc<QuotientContext>, devs: &[LieElement]) -> Result<Endo> {
    let q: Vec<QuotElement> = devs.iter().map(|d| r.reduce(d)).collect::<Result<_>>()?;
    Endo::from_deviations(r, &q)
}

fn apply_hom(rng: &mut ChaCha8Rng) -> Result<bool> {
    let r = r4(6)?;
    let (d1, d2) = (lie_hom(rng, 4, 2), lie_hom(rng, 4, 3));
    let e = ia_endo(&r, &[d1.clone(), d2, LieElement::zero(4), d1])?;
    let (u, v) = (r.reduce(&lie_hom(rng, 4, 2))?, r.reduce(&lie_hom(rng, 4, 3))?);
    Ok(e.apply(&u.bracket(&v)?)? == e.apply(&u)?.bracket_trunc(&e.apply(&v)?)?)
}

fn kernel_endo(rng: &mut ChaCha8Rng, r: &Arc<QuotientContext>) -> Result<Endo> {
    let mut devs = vec![r.zero(); 4];
    for _ in 0..rng.gen_range(1..4) {
        let slot = rng.gen_range(0..4);
        let (a, b, x, y) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4));
        if a == b || x == y {
            continue;
        }
        devs[slot] = devs[slot].add_scaled(&r.u_elem(a, b, &Poly::one(4), x, y)?, &int(rng, -2, 2))?;
    }
    Endo::from_deviations(r, &devs)
}

fn kernel_abelian(rng: &mut ChaCha8Rng) -> Result<bool> {
    let r = r4(5)?;
    let (p, q) = (kernel_endo(rng, &r)?, kernel_endo(rng, &r)?);
    Ok(p.compose(&q)? == q.compose(&p)?)
}

fn nu_additive(rng: &mut ChaCha8Rng) -> Result<bool> {
    let r = r4(5)?;
    let z = LieElement::zero(4);
    let p = ia_endo(&r, &[lie_hom(rng, 4, 3), z.clone(), lie_hom(rng, 4, 3), z.clone()])?;
    let q = ia_endo(&r, &[lie_hom(rng, 4, 3), lie_hom(rng, 4, 4), z.clone(), z])?;
    Ok(p.compose(&q)?.nu(3)? == p.nu(3)?.add(&q.nu(3)?)?)
}

fn commutator_antisymmetric(rng: &mut ChaCha8Rng) -> Result<bool> {
    let r = r4(5)?;
    let z = LieElement::zero(4);
    let p = ia_endo(&r, &[lie_hom(rng, 4, 2), z.clone(), z.clone(), lie_hom(rng, 4, 2)])?;
    let q = ia_endo(&r, &[z.clone(), lie_hom(rng, 4, 3), z.clone(), z])?;
    Ok(graded_commutator(&p, 2, &q, 3)? == graded_commutator(&q, 3, &p, 2)?.scale(&Rat::from_int(-1)))
}

fn random_tuple(rng: &mut ChaCha8Rng, r: &Arc<QuotientContext>) -> Result<GradedTuple> {
    let mut t = GradedTuple::zero(r, 5)?;
    for _ in 0..rng.gen_range(1..4) {
        let (slot, a, b, c, v) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4));
        let d = if c == 4 { 3 } else { 4 };
        let u = r.u_elem(a, b, &Poly::var(4, v)?, c, d)?;
        t = t.add(&GradedTuple::single(r, 5, slot, u.scale(&int(rng, -2, 2)))?)?;
    }
    Ok(t)
}

fn action_assoc(rng: &mut ChaCha8Rng) -> Result<bool> {
    let r = r4(5)?;
    let (g, h) = (gl(rng, 4), gl(rng, 4));
    let t = random_tuple(rng, &r)?;
    Ok(tuple_act(&g.mul(&h), &t)? == tuple_act(&g, &tuple_act(&h, &t)?)?)
}

fn nu_equivariant(rng: &mut ChaCha8Rng) -> Result<bool> {
    let r = r4(5)?;
    let g = gl(rng, 4);
    let t = random_tuple(rng, &r)?;
    let phi = Endo::from_deviations(&r, t.slots())?;
    let ge = Endo::linear(&r, &g)?;
    let conj = ge.compose(&phi)?.compose(&ge.inverse()?)?;
    Ok(conj.nu(5)? == tuple_act(&g, &phi.nu(5)?)?)
}

fn vandermonde(rng: &mut ChaCha8Rng) -> Result<bool> {
    let r = QuotientContext::r_n(4, 4)?;
    let mut slots = vec![r.zero(); 4];
    for _ in 0..rng.gen_range(1..3) {
        let (a, b, c, d) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4));
        if a != b && c != d {
            let slot = rng.gen_range(0..4);
            slots[slot] = slots[slot].add_scaled(&r.u_elem(a, b, &Poly::one(4), c, d)?, &int(rng, -2, 2))?;
        }
    }
    vandermonde_sufficient(&[GradedTuple::new(&r, 4, slots)?])
}

fn partition(rng: &mut ChaCha8Rng, max_len: usize, max_part: u32) -> Partition {
    let len = rng.gen_range(0..=max_len);
    let mut v: Vec<u32> = (0..len).map(|_| rng.gen_range(1..=max_part)).collect();
    v.sort_unstable_by(|a, b| b.cmp(a));
    Partition::new(v).expect("sorted positive parts")
}

fn lr_commutative(rng: &mut ChaCha8Rng) -> Result<bool> {
    let (a, b, n) = (partition(rng, 3, 3), partition(rng, 3, 3), rng.gen_range(1..5));
    Ok(lr_tensor(&a, &b, n) == lr_tensor(&b, &a, n))
}

fn lr_rows(rng: &mut ChaCha8Rng) -> Result<bool> {
    let (a, b, n) = (partition(rng, 3, 3), partition(rng, 3, 3), rng.gen_range(1..5));
    Ok(lr_tensor(&a, &b, n).max_rows() <= n)
}

fn lr_dim(rng: &mut ChaCha8Rng) -> Result<bool> {
    let (a, b, n) = (partition(rng, 3, 3), partition(rng, 3, 3), rng.gen_range(1..5));
    Ok(lr_tensor(&a, &b, n).dim(n) == schur_dim(&a, n) * schur_dim(&b, n))
}

fn dim_positive(rng: &mut ChaCha8Rng) -> Result<bool> {
    let (a, n) = (partition(rng, 6, 4), rng.gen_range(1..6));
    Ok((schur_dim(&a, n) > 0) == (a.len() <= n))
}

fn lie_no_constant(rng: &mut ChaCha8Rng) -> Result<bool> {
    let u = lie_elem(rng, 4, 4);
    Ok(u.expand().epsilon().is_zero())
}

fn traceless(rng: &mut ChaCha8Rng) -> Result<bool> {
    let (f, g) = (assoc(rng, 4, 3), assoc(rng, 4, 3));
    Ok(trace(&phi(&f.commutator(&g)?)?).is_zero())
}

fn linear_jacobian(rng: &mut ChaCha8Rng) -> Result<bool> {
    let g = gl(rng, 4);
    let images: Vec<LieElement> = (1..=4).map(|j| LieElement::generator(4, j)?.gl_act(&g)).collect::<Result<_>>()?;
    let jac = jacobian(&images)?;
    for (i, row) in jac.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let c = images[j].coords(1).and_then(|m| m.get(&i)).cloned().unwrap_or_else(Rat::zero);
            if *e != AssocPoly::one(4).scale(&c) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
