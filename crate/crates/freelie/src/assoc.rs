//! The free associative algebra `A_n = K<x_1, ..., x_n>`, left partial
//! derivatives, the balanced test, and the 2x2 representation over `K[z]`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::error::{Error, Result};
use crate::ratlin::{Rat, RowSpace, SparseVec};

/// A monomial; letters are generator indices starting at 1.
/// Ordered by length first, then lexicographically.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(i: usize) -> Self {
        Word(vec![i as u8])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = Vec::with_capacity(self.0.len() + other.0.len());
        v.extend_from_slice(&self.0);
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// Moves the first letter to the end.
    pub fn rotate(&self) -> Word {
        let mut v = self.0.clone();
        if !v.is_empty() {
            v.rotate_left(1);
        }
        Word(v)
    }

    /// Lexicographically least rotation, the necklace representative.
    pub fn necklace(&self) -> Word {
        let mut best = self.0.clone();
        let mut cur = self.0.clone();
        for _ in 1..cur.len() {
            cur.rotate_left(1);
            if cur < best {
                best.clone_from(&cur);
            }
        }
        Word(best)
    }
}

impl Ord for Word {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&o.0.len()).then_with(|| self.0.cmp(&o.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (k, l) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ".")?;
            }
            write!(f, "x{l}")?;
        }
        Ok(())
    }
}

/// Element of `A_n` as a finite word-to-coefficient map.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct AssocPoly {
    n: usize,
    terms: BTreeMap<Word, Rat>,
}

impl AssocPoly {
    pub fn zero(n: usize) -> Self {
        AssocPoly { n, terms: BTreeMap::new() }
    }

    pub fn one(n: usize) -> Self {
        Self::monomial(n, Word::empty(), Rat::one())
    }

    pub fn monomial(n: usize, w: Word, c: Rat) -> Self {
        let mut p = Self::zero(n);
        p.add_term(w, &c);
        p
    }

    pub fn x(n: usize, i: usize) -> Self {
        Self::monomial(n, Word::letter(i), Rat::one())
    }

    pub fn from_terms(n: usize, terms: impl IntoIterator<Item = (Word, Rat)>) -> Result<Self> {
        let mut p = Self::zero(n);
        for (w, c) in terms {
            if let Some(&l) = w.0.iter().find(|&&l| l == 0 || l as usize > n) {
                return Err(Error::IndexOutOfRange { index: l as usize, n });
            }
            p.add_term(w, &c);
        }
        Ok(p)
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &BTreeMap<Word, Rat> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, w: &Word) -> Rat {
        self.terms.get(w).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, w: Word, c: &Rat) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(w) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c.clone());
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let s = e.get() + c;
                if s.is_zero() {
                    e.remove();
                } else {
                    *e.get_mut() = s;
                }
            }
        }
    }

    fn same_rank(&self, o: &AssocPoly) -> Result<()> {
        if self.n != o.n {
            return Err(Error::RankMismatch(self.n, o.n));
        }
        Ok(())
    }

    pub fn add(&self, o: &AssocPoly) -> Result<AssocPoly> {
        self.same_rank(o)?;
        Ok(self.add_scaled(o, &Rat::one()))
    }

    pub fn sub(&self, o: &AssocPoly) -> Result<AssocPoly> {
        self.same_rank(o)?;
        Ok(self.add_scaled(o, &Rat::from_int(-1)))
    }

    /// `self + c * o`, ranks assumed equal.
    pub fn add_scaled(&self, o: &AssocPoly, c: &Rat) -> AssocPoly {
        let mut r = self.clone();
        for (w, x) in &o.terms {
            r.add_term(w.clone(), &(x * c));
        }
        r
    }

    pub fn scale(&self, c: &Rat) -> AssocPoly {
        if c.is_zero() {
            return Self::zero(self.n);
        }
        AssocPoly { n: self.n, terms: self.terms.iter().map(|(w, x)| (w.clone(), x * c)).collect() }
    }

    pub fn mul(&self, o: &AssocPoly) -> Result<AssocPoly> {
        self.same_rank(o)?;
        let mut acc: HashMap<Word, Rat> = HashMap::new();
        for (u, a) in &self.terms {
            for (v, b) in &o.terms {
                *acc.entry(u.concat(v)).or_default() += &(a * b);
            }
        }
        Ok(AssocPoly { n: self.n, terms: acc.into_iter().filter(|(_, c)| !c.is_zero()).collect() })
    }

    /// `uv - vu`.
    pub fn commutator(&self, o: &AssocPoly) -> Result<AssocPoly> {
        self.mul(o)?.sub(&o.mul(self)?)
    }

    /// Coefficient of the empty word.
    pub fn epsilon(&self) -> Rat {
        self.coeff(&Word::empty())
    }

    /// `f_i` in `f = f_0 + sum x_i f_i`.
    pub fn partial(&self, i: usize) -> Result<AssocPoly> {
        if i == 0 || i > self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        let terms = self
            .terms
            .iter()
            .filter(|(w, _)| w.0.first() == Some(&(i as u8)))
            .map(|(w, c)| (Word(w.0[1..].to_vec()), c.clone()))
            .collect();
        Ok(AssocPoly { n: self.n, terms })
    }

    /// Common degree of all terms, `None` for mixed degrees, `Some(0)` for zero.
    pub fn homogeneous_degree(&self) -> Option<usize> {
        let mut it = self.terms.keys().map(Word::len);
        match it.next() {
            None => Some(0),
            Some(d) => it.all(|e| e == d).then_some(d),
        }
    }

    pub fn component(&self, d: usize) -> AssocPoly {
        AssocPoly {
            n: self.n,
            terms: self.terms.iter().filter(|(w, _)| w.len() == d).map(|(w, c)| (w.clone(), c.clone())).collect(),
        }
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(Word::len).max().unwrap_or(0)
    }
}

impl fmt::Display for AssocPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (k, (w, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            let a = c.abs();
            match (k, neg) {
                (0, true) => write!(f, "-")?,
                (0, false) => {}
                (_, true) => write!(f, " - ")?,
                (_, false) => write!(f, " + ")?,
            }
            if w.is_empty() {
                write!(f, "{a}")?;
            } else {
                write!(f, "{a}*{w}")?;
            }
        }
        Ok(())
    }
}

fn all_words(n: usize, m: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    for _ in 0..m {
        out = out
            .into_iter()
            .flat_map(|w| {
                (1..=n).map(move |l| {
                    let mut v = w.0.clone();
                    v.push(l as u8);
                    Word(v)
                })
            })
            .collect();
    }
    out
}

fn word_index(w: &Word, n: usize) -> usize {
    w.0.iter().fold(0, |acc, &l| acc * n + (l as usize - 1))
}

/// Span of all rotation differences `w - rot(w)` among degree-`m` words,
/// with words indexed in base-`n` order.
pub fn balanced_space(n: usize, m: usize) -> RowSpace {
    let dim = n.pow(m as u32);
    let mut space = RowSpace::new(dim);
    for w in all_words(n, m) {
        let r = w.rotate();
        if r == w {
            continue;
        }
        let v = SparseVec::from_pairs(dim, [(word_index(&w, n), Rat::one()), (word_index(&r, n), Rat::from_int(-1))]);
        space.rref_insert(&v).expect("dimensions agree");
    }
    space
}

/// Balanced test by span membership; the reference implementation.
pub fn is_balanced_baseline(f: &AssocPoly) -> Result<bool> {
    let m = f.homogeneous_degree().ok_or(Error::NotHomogeneous)?;
    let space = balanced_space(f.n, m);
    let v = SparseVec::from_pairs(space.dim(), f.terms.iter().map(|(w, c)| (word_index(w, f.n), c.clone())));
    space.in_span(&v)
}

/// Balanced test via necklace sums: every cyclic class must have zero
/// coefficient sum.
pub fn is_balanced(f: &AssocPoly) -> Result<bool> {
    f.homogeneous_degree().ok_or(Error::NotHomogeneous)?;
    let mut sums: HashMap<Word, Rat> = HashMap::new();
    for (w, c) in &f.terms {
        *sums.entry(w.necklace()).or_default() += c;
    }
    Ok(sums.values().all(Rat::is_zero))
}

/// Polynomial in `z` over ℚ, low degree first, trailing zeros trimmed.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct PolyZ(Vec<Rat>);

impl PolyZ {
    pub fn zero() -> Self {
        PolyZ(Vec::new())
    }

    pub fn constant(c: Rat) -> Self {
        Self::from_coeffs(vec![c])
    }

    pub fn one() -> Self {
        Self::constant(Rat::one())
    }

    /// `c * z^e`.
    pub fn monomial(c: Rat, e: usize) -> Self {
        let mut v = vec![Rat::zero(); e + 1];
        v[e] = c;
        Self::from_coeffs(v)
    }

    pub fn from_coeffs(mut v: Vec<Rat>) -> Self {
        while v.last().is_some_and(Rat::is_zero) {
            v.pop();
        }
        PolyZ(v)
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.0
    }

    pub fn coeff(&self, e: usize) -> Rat {
        self.0.get(e).cloned().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn is_constant(&self) -> bool {
        self.0.len() <= 1
    }

    pub fn add(&self, o: &PolyZ) -> PolyZ {
        let len = self.0.len().max(o.0.len());
        Self::from_coeffs((0..len).map(|i| &self.coeff(i) + &o.coeff(i)).collect())
    }

    pub fn sub(&self, o: &PolyZ) -> PolyZ {
        self.add(&o.scale(&Rat::from_int(-1)))
    }

    pub fn scale(&self, c: &Rat) -> PolyZ {
        Self::from_coeffs(self.0.iter().map(|x| x * c).collect())
    }

    pub fn mul(&self, o: &PolyZ) -> PolyZ {
        if self.is_zero() || o.is_zero() {
            return PolyZ::zero();
        }
        let mut v = vec![Rat::zero(); self.0.len() + o.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in o.0.iter().enumerate() {
                v[i + j] += &(a * b);
            }
        }
        Self::from_coeffs(v)
    }

    /// Truncation modulo the ideal generated by `z^m`.
    pub fn mod_lambda(&self, m: usize) -> PolyZ {
        Self::from_coeffs(self.0.iter().take(m).cloned().collect())
    }

    /// Product truncated modulo `z^m`.
    pub fn mul_mod(&self, o: &PolyZ, m: usize) -> PolyZ {
        self.mod_lambda(m).mul(&o.mod_lambda(m)).mod_lambda(m)
    }
}

impl fmt::Display for PolyZ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (e, c) in self.0.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let a = c.abs();
            match (first, c.is_negative()) {
                (true, true) => write!(f, "-")?,
                (true, false) => {}
                (false, true) => write!(f, " - ")?,
                (false, false) => write!(f, " + ")?,
            }
            first = false;
            match e {
                0 => write!(f, "{a}")?,
                1 if a.is_one() => write!(f, "z")?,
                1 => write!(f, "{a}*z")?,
                _ if a.is_one() => write!(f, "z^{e}")?,
                _ => write!(f, "{a}*z^{e}")?,
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// 2x2 matrix over `K[z]`, entries row-major `[[a, b], [c, d]]`.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Mat2 {
    pub a: PolyZ,
    pub b: PolyZ,
    pub c: PolyZ,
    pub d: PolyZ,
}

impl Mat2 {
    pub fn new(a: PolyZ, b: PolyZ, c: PolyZ, d: PolyZ) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn zero() -> Self {
        Mat2::default()
    }

    pub fn identity() -> Self {
        Mat2::new(PolyZ::one(), PolyZ::zero(), PolyZ::zero(), PolyZ::one())
    }

    pub fn entries(&self) -> [&PolyZ; 4] {
        [&self.a, &self.b, &self.c, &self.d]
    }

    fn map(&self, f: impl Fn(&PolyZ) -> PolyZ) -> Mat2 {
        Mat2::new(f(&self.a), f(&self.b), f(&self.c), f(&self.d))
    }

    pub fn add(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a.add(&o.a), self.b.add(&o.b), self.c.add(&o.c), self.d.add(&o.d))
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2::new(self.a.sub(&o.a), self.b.sub(&o.b), self.c.sub(&o.c), self.d.sub(&o.d))
    }

    pub fn scale(&self, k: &Rat) -> Mat2 {
        self.map(|p| p.scale(k))
    }

    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2::new(
            self.a.mul(&o.a).add(&self.b.mul(&o.c)),
            self.a.mul(&o.b).add(&self.b.mul(&o.d)),
            self.c.mul(&o.a).add(&self.d.mul(&o.c)),
            self.c.mul(&o.b).add(&self.d.mul(&o.d)),
        )
    }

    pub fn trace(&self) -> PolyZ {
        self.a.add(&self.d)
    }

    pub fn det(&self) -> PolyZ {
        self.a.mul(&self.d).sub(&self.b.mul(&self.c))
    }

    pub fn mod_lambda(&self, m: usize) -> Mat2 {
        self.map(|p| p.mod_lambda(m))
    }

    pub fn is_zero(&self) -> bool {
        self.entries().iter().all(|p| p.is_zero())
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[[{}, {}], [{}, {}]]", self.a, self.b, self.c, self.d)
    }
}

/// The image of a generator under the representation.
pub fn phi_generator(i: usize) -> Mat2 {
    let z = || PolyZ::monomial(Rat::one(), 1);
    let mz = || PolyZ::monomial(Rat::from_int(-1), 1);
    match i {
        2 => Mat2::new(z(), mz(), z(), mz()),
        3 => Mat2::new(PolyZ::zero(), z(), PolyZ::zero(), PolyZ::zero()),
        4 => Mat2::new(PolyZ::zero(), PolyZ::zero(), z(), PolyZ::zero()),
        _ => Mat2::identity(),
    }
}

/// The algebra homomorphism `A_n -> M_2(K[z])`; requires `n >= 4`.
pub fn phi(f: &AssocPoly) -> Result<Mat2> {
    if f.n < 4 {
        return Err(Error::Precondition(format!("representation needs rank >= 4, got {}", f.n)));
    }
    let gens: Vec<Mat2> = (0..=f.n).map(phi_generator).collect();
    let mut acc = Mat2::zero();
    for (w, c) in &f.terms {
        let mut m = Mat2::identity();
        for &l in &w.0 {
            if (2..=4).contains(&l) {
                m = m.mul(&gens[l as usize]);
            }
        }
        acc = acc.add(&m.scale(c));
    }
    Ok(acc)
}

/// Determinant of the `2n x 2n` matrix assembled from 2x2 blocks, modulo
/// `z^m`. Uses the Faddeev-LeVerrier recurrence, which needs no division
/// by ring elements other than nonzero integers.
pub fn block_det_mod(blocks: &[Vec<Mat2>], m: usize) -> Result<PolyZ> {
    let nb = blocks.len();
    if blocks.iter().any(|r| r.len() != nb) {
        return Err(Error::Precondition("block matrix must be square".into()));
    }
    if m == 0 {
        return Err(Error::Precondition("modulus exponent must be positive".into()));
    }
    let size = 2 * nb;
    let a: Vec<Vec<PolyZ>> = (0..size)
        .map(|r| {
            (0..size)
                .map(|c| {
                    let b = &blocks[r / 2][c / 2];
                    let e = match (r % 2, c % 2) {
                        (0, 0) => &b.a,
                        (0, 1) => &b.b,
                        (1, 0) => &b.c,
                        _ => &b.d,
                    };
                    e.mod_lambda(m)
                })
                .collect()
        })
        .collect();
    Ok(det_mod(&a, m))
}

fn det_mod(a: &[Vec<PolyZ>], m: usize) -> PolyZ {
    let size = a.len();
    if size == 0 {
        return PolyZ::one();
    }
    let matmul = |x: &[Vec<PolyZ>], y: &[Vec<PolyZ>]| -> Vec<Vec<PolyZ>> {
        (0..size)
            .map(|i| {
                (0..size)
                    .map(|j| {
                        let mut s = PolyZ::zero();
                        for k in 0..size {
                            if !x[i][k].is_zero() && !y[k][j].is_zero() {
                                s = s.add(&x[i][k].mul_mod(&y[k][j], m));
                            }
                        }
                        s
                    })
                    .collect()
            })
            .collect()
    };
    // M_1 = I, c = -tr(A M_k)/k, M_{k+1} = A M_k + c I.
    let mut mk: Vec<Vec<PolyZ>> =
        (0..size).map(|i| (0..size).map(|j| if i == j { PolyZ::one() } else { PolyZ::zero() }).collect()).collect();
    let mut c = PolyZ::zero();
    for k in 1..=size {
        let am = matmul(a, &mk);
        let tr = (0..size).fold(PolyZ::zero(), |s, i| s.add(&am[i][i]));
        c = tr.scale(&Rat::new(-1, k as i64));
        if k < size {
            mk = am;
            for (i, row) in mk.iter_mut().enumerate() {
                row[i] = row[i].add(&c);
            }
        }
    }
    let sign = if size % 2 == 0 { Rat::one() } else { Rat::from_int(-1) };
    c.scale(&sign).mod_lambda(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn w(l: &[u8]) -> Word {
        Word(l.to_vec())
    }

    fn x(i: usize) -> AssocPoly {
        AssocPoly::x(4, i)
    }

    fn br(a: &AssocPoly, b: &AssocPoly) -> AssocPoly {
        a.commutator(b).unwrap()
    }

    #[test]
    fn word_order_is_length_first() {
        assert!(w(&[4]) < w(&[1, 1]));
        assert!(w(&[1, 2]) < w(&[2, 1]));
        assert_eq!(w(&[2, 1, 1]).necklace(), w(&[1, 1, 2]));
    }

    #[test]
    fn products() {
        assert_eq!(x(1).mul(&x(2)).unwrap(), AssocPoly::monomial(4, w(&[1, 2]), Rat::one()));
        let c = br(&x(1), &x(2));
        assert_eq!(c.mul(&AssocPoly::one(4)).unwrap(), c);
        let e = br(&br(&x(1), &x(3)), &x(1));
        let expected = AssocPoly::from_terms(
            4,
            [(w(&[1, 3, 1]), Rat::from_int(2)), (w(&[1, 1, 3]), Rat::from_int(-1)), (w(&[3, 1, 1]), Rat::from_int(-1))],
        )
        .unwrap();
        assert_eq!(e, expected);
        assert!(matches!(x(1).mul(&AssocPoly::x(5, 1)), Err(Error::RankMismatch(4, 5))));
    }

    #[test]
    fn partials_on_words() {
        let p = x(1).mul(&x(2)).unwrap();
        assert_eq!(p.partial(1).unwrap(), x(2));
        assert!(p.partial(2).unwrap().is_zero());
        assert!(AssocPoly::one(4).partial(1).unwrap().is_zero());
        assert!(p.partial(5).is_err());
        assert!(p.partial(0).is_err());
    }

    #[test]
    fn balanced_examples() {
        let c = br(&x(1), &x(2));
        assert!(is_balanced(&c).unwrap());
        assert!(is_balanced_baseline(&c).unwrap());
        let p = x(1).mul(&x(2)).unwrap();
        assert!(!is_balanced_baseline(&p).unwrap());
        assert!(!is_balanced(&p).unwrap());
        let mixed = x(1).add(&p).unwrap();
        assert_eq!(is_balanced(&mixed), Err(Error::NotHomogeneous));
    }

    #[test]
    fn balanced_space_dimensions() {
        // Rank of the rotation-difference span is #words - #necklaces.
        for (n, m, necklaces) in [(2, 3, 4), (3, 2, 6), (4, 3, 24)] {
            let s = balanced_space(n, m);
            assert_eq!(s.rank(), n.pow(m as u32) - necklaces);
        }
    }

    #[test]
    fn fast_path_matches_baseline_exhaustively_on_basis_differences() {
        // Every word, and every difference of two words, up to degree 4 (n = 4)
        // covers each necklace class pairing.
        for m in 1..=4 {
            let words = all_words(4, m);
            for (i, a) in words.iter().enumerate() {
                let p = AssocPoly::monomial(4, a.clone(), Rat::one());
                assert_eq!(is_balanced(&p).unwrap(), is_balanced_baseline(&p).unwrap());
                for b in words.iter().skip(i + 1).step_by(7) {
                    let q = p.sub(&AssocPoly::monomial(4, b.clone(), Rat::one())).unwrap();
                    assert_eq!(is_balanced(&q).unwrap(), is_balanced_baseline(&q).unwrap());
                }
            }
        }
    }

    #[test]
    fn phi_on_generators() {
        assert_eq!(phi(&x(1)).unwrap(), Mat2::identity());
        let z3 = PolyZ::monomial(Rat::one(), 3);
        let m = phi(&x(2).mul(&br(&x(3), &x(4))).unwrap()).unwrap();
        assert_eq!(m, Mat2::new(z3.clone(), z3.clone(), z3.clone(), z3));
        assert!(phi(&AssocPoly::x(3, 1)).is_err());
    }

    #[test]
    fn lambda_truncation() {
        let p = PolyZ::from_coeffs(vec![Rat::zero(), Rat::zero(), Rat::zero(), Rat::one(), Rat::one()]);
        assert_eq!(p.mod_lambda(4), PolyZ::monomial(Rat::one(), 3));
        assert_eq!(Mat2::identity().mod_lambda(1), Mat2::identity());
        let one_z3 = PolyZ::one().add(&PolyZ::monomial(Rat::one(), 3));
        let v = one_z3.mul(&one_z3).sub(&PolyZ::monomial(Rat::one(), 6)).mod_lambda(4);
        assert_eq!(v, PolyZ::from_coeffs(vec![Rat::one(), Rat::zero(), Rat::zero(), Rat::from_int(2)]));
    }

    /// Cofactor expansion along the first row; independent of the kernel.
    fn laplace(a: &[Vec<PolyZ>]) -> PolyZ {
        let n = a.len();
        if n == 0 {
            return PolyZ::one();
        }
        let mut acc = PolyZ::zero();
        for j in 0..n {
            if a[0][j].is_zero() {
                continue;
            }
            let minor: Vec<Vec<PolyZ>> =
                a[1..].iter().map(|r| r.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, e)| e.clone()).collect()).collect();
            let t = a[0][j].mul(&laplace(&minor));
            acc = if j % 2 == 0 { acc.add(&t) } else { acc.sub(&t) };
        }
        acc
    }

    #[test]
    fn block_determinants() {
        let id = |k: usize| -> Vec<Vec<Mat2>> {
            (0..k).map(|i| (0..k).map(|j| if i == j { Mat2::identity() } else { Mat2::zero() }).collect()).collect()
        };
        assert_eq!(block_det_mod(&id(3), 4).unwrap(), PolyZ::one());
        let z3 = PolyZ::monomial(Rat::one(), 3);
        let a = Mat2::new(z3.clone(), z3.clone(), z3.clone(), z3);
        let mut b = id(4);
        b[0][0] = Mat2::identity().add(&a);
        let expected = PolyZ::from_coeffs(vec![Rat::one(), Rat::zero(), Rat::zero(), Rat::from_int(2)]);
        assert_eq!(block_det_mod(&b, 4).unwrap(), expected);
        let mut zrow = id(3);
        zrow[1] = vec![Mat2::zero(); 3];
        assert!(block_det_mod(&zrow, 4).unwrap().is_zero());
    }

    fn poly_z() -> impl Strategy<Value = PolyZ> {
        prop::collection::vec(-2i64..=2, 0..4).prop_map(|v| PolyZ::from_coeffs(v.into_iter().map(Rat::from_int).collect()))
    }

    fn mat2() -> impl Strategy<Value = Mat2> {
        (poly_z(), poly_z(), poly_z(), poly_z()).prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
    }

    pub(crate) fn poly(n: usize, maxdeg: usize) -> impl Strategy<Value = AssocPoly> {
        prop::collection::vec((prop::collection::vec(1..=n as u8, 0..=maxdeg), -3i64..=3), 0..6)
            .prop_map(move |ts| AssocPoly::from_terms(n, ts.into_iter().map(|(l, c)| (Word(l), Rat::from_int(c)))).unwrap())
    }

    fn homogeneous(n: usize, d: usize) -> impl Strategy<Value = AssocPoly> {
        prop::collection::vec((prop::collection::vec(1..=n as u8, d), -3i64..=3), 0..8)
            .prop_map(move |ts| AssocPoly::from_terms(n, ts.into_iter().map(|(l, c)| (Word(l), Rat::from_int(c)))).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 128, rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha, ..ProptestConfig::default() })]

        #[test]
        fn reconstruction(f in (2usize..=5).prop_flat_map(|n| poly(n, 6))) {
            let n = f.rank();
            let mut g = AssocPoly::one(n).scale(&f.epsilon());
            for i in 1..=n {
                g = g.add(&AssocPoly::x(n, i).mul(&f.partial(i).unwrap()).unwrap()).unwrap();
            }
            prop_assert_eq!(g, f);
        }

        #[test]
        fn derivation_laws(f in poly(4, 4), g in poly(4, 4), a in -3i64..=3, b in -3i64..=3, i in 1usize..=4) {
            let (a, b) = (Rat::from_int(a), Rat::from_int(b));
            let lin = f.scale(&a).add(&g.scale(&b)).unwrap();
            prop_assert_eq!(lin.partial(i).unwrap(),
                f.partial(i).unwrap().scale(&a).add(&g.partial(i).unwrap().scale(&b)).unwrap());
            let di_f = f.partial(i).unwrap();
            let di_g = g.partial(i).unwrap();
            let prod = f.mul(&g).unwrap().partial(i).unwrap();
            prop_assert_eq!(prod, di_f.mul(&g).unwrap().add(&di_g.scale(&f.epsilon())).unwrap());
            let comm = f.commutator(&g).unwrap().partial(i).unwrap();
            let rhs = di_f.mul(&g).unwrap()
                .add(&di_g.scale(&f.epsilon())).unwrap()
                .sub(&di_g.mul(&f).unwrap()).unwrap()
                .sub(&di_f.scale(&g.epsilon())).unwrap();
            prop_assert_eq!(comm, rhs);
        }

        #[test]
        fn phi_is_multiplicative(f in poly(4, 5), g in poly(4, 5)) {
            prop_assert_eq!(phi(&f.mul(&g).unwrap()).unwrap(), phi(&f).unwrap().mul(&phi(&g).unwrap()));
        }

        #[test]
        fn balanced_elements_are_traceless(m in 2usize..=6, seed in prop::collection::vec((prop::collection::vec(1u8..=4, 6), -3i64..=3), 1..6)) {
            let mut f = AssocPoly::zero(4);
            for (l, c) in seed {
                let word = Word(l[..m].to_vec());
                let d = AssocPoly::monomial(4, word.clone(), Rat::from_int(c))
                    .sub(&AssocPoly::monomial(4, word.rotate(), Rat::from_int(c))).unwrap();
                f = f.add(&d).unwrap();
            }
            prop_assert!(is_balanced(&f).unwrap());
            prop_assert!(phi(&f).unwrap().trace().is_zero());
        }

        #[test]
        fn fast_path_agrees_in_degree_six(f in homogeneous(4, 6)) {
            prop_assert_eq!(is_balanced(&f).unwrap(), is_balanced_baseline(&f).unwrap());
        }

        #[test]
        fn fast_path_agrees_low_degree(d in 2usize..=5, f in (2usize..=5).prop_flat_map(|d| homogeneous(4, d))) {
            let _ = d;
            prop_assert_eq!(is_balanced(&f).unwrap(), is_balanced_baseline(&f).unwrap());
        }

        #[test]
        fn block_det_matches_laplace(blocks in prop::collection::vec(prop::collection::vec(mat2(), 2), 2), m in 1usize..=6) {
            let size = 4;
            let a: Vec<Vec<PolyZ>> = (0..size).map(|r| (0..size).map(|c| {
                let b = &blocks[r / 2][c / 2];
                match (r % 2, c % 2) { (0, 0) => b.a.clone(), (0, 1) => b.b.clone(), (1, 0) => b.c.clone(), _ => b.d.clone() }
            }).collect()).collect();
            prop_assert_eq!(block_det_mod(&blocks, m).unwrap(), laplace(&a).mod_lambda(m));
        }
    }
}
