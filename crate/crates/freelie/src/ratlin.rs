//! Exact rational scalars and sparse linear algebra over ℚ.
//!
//! [`Rat`] keeps small values as a pair of machine words and promotes to an
//! arbitrary-precision fraction on overflow. [`RowSpace`] maintains a reduced
//! row echelon basis incrementally, so the pivot set and the complement
//! columns are canonical for a given span.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash)]
enum Repr {
    Small(i64, i64),
    Big(Box<BigRational>),
}

/// A rational number in lowest terms with positive denominator.
///
/// Values whose numerator and denominator fit in `i64` are always stored in
/// the small form, so structural equality is value equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Rat(Repr);

fn gcd_u128(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Rat {
    pub fn zero() -> Self {
        Rat(Repr::Small(0, 1))
    }

    pub fn one() -> Self {
        Rat(Repr::Small(1, 1))
    }

    pub fn from_int(n: i64) -> Self {
        Rat(Repr::Small(n, 1))
    }

    /// `n / d`; panics if `d == 0`.
    pub fn new(n: i64, d: i64) -> Self {
        assert!(d != 0, "zero denominator");
        Self::from_i128(n as i128, d as i128)
    }

    fn from_i128(n: i128, d: i128) -> Self {
        let (mut n, mut d) = if d < 0 { (-n, -d) } else { (n, d) };
        if n == 0 {
            return Self::zero();
        }
        let g = gcd_u128(n.unsigned_abs(), d as u128) as i128;
        if g > 1 {
            n /= g;
            d /= g;
        }
        match (i64::try_from(n), i64::try_from(d)) {
            (Ok(a), Ok(b)) => Rat(Repr::Small(a, b)),
            _ => Rat(Repr::Big(Box::new(BigRational::new_raw(
                BigInt::from(n),
                BigInt::from(d),
            )))),
        }
    }

    pub fn from_big(r: BigRational) -> Self {
        // BigRational arithmetic keeps values reduced with positive denominator.
        match (r.numer().to_i64(), r.denom().to_i64()) {
            (Some(a), Some(b)) => Rat(Repr::Small(a, b)),
            _ => Rat(Repr::Big(Box::new(r))),
        }
    }

    pub fn from_bigint(n: BigInt) -> Self {
        Self::from_big(BigRational::from_integer(n))
    }

    pub fn to_big(&self) -> BigRational {
        match &self.0 {
            Repr::Small(a, b) => BigRational::new_raw(BigInt::from(*a), BigInt::from(*b)),
            Repr::Big(r) => (**r).clone(),
        }
    }

    pub fn numer(&self) -> BigInt {
        match &self.0 {
            Repr::Small(a, _) => BigInt::from(*a),
            Repr::Big(r) => r.numer().clone(),
        }
    }

    pub fn denom(&self) -> BigInt {
        match &self.0 {
            Repr::Small(_, b) => BigInt::from(*b),
            Repr::Big(r) => r.denom().clone(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.0, Repr::Small(0, _))
    }

    pub fn is_one(&self) -> bool {
        matches!(self.0, Repr::Small(1, 1))
    }

    pub fn is_integer(&self) -> bool {
        match &self.0 {
            Repr::Small(_, b) => *b == 1,
            Repr::Big(r) => r.is_integer(),
        }
    }

    pub fn is_negative(&self) -> bool {
        match &self.0 {
            Repr::Small(a, _) => *a < 0,
            Repr::Big(r) => r.is_negative(),
        }
    }

    pub fn abs(&self) -> Rat {
        if self.is_negative() {
            -self
        } else {
            self.clone()
        }
    }

    pub fn recip(&self) -> Rat {
        match &self.0 {
            Repr::Small(a, b) => {
                assert!(*a != 0, "reciprocal of zero");
                Self::from_i128(*b as i128, *a as i128)
            }
            Repr::Big(r) => Self::from_big(r.recip()),
        }
    }

    pub fn pow(&self, e: u32) -> Rat {
        let mut acc = Rat::one();
        for _ in 0..e {
            acc = &acc * self;
        }
        acc
    }

    fn binop(
        &self,
        other: &Rat,
        small: impl Fn(i128, i128, i128, i128) -> Option<(i128, i128)>,
        big: impl Fn(BigRational, BigRational) -> BigRational,
    ) -> Rat {
        if let (Repr::Small(a, b), Repr::Small(c, d)) = (&self.0, &other.0) {
            if let Some((n, m)) = small(*a as i128, *b as i128, *c as i128, *d as i128) {
                return Self::from_i128(n, m);
            }
        }
        Self::from_big(big(self.to_big(), other.to_big()))
    }
}

impl Default for Rat {
    fn default() -> Self {
        Rat::zero()
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Self {
        Rat::from_int(n)
    }
}

impl From<i32> for Rat {
    fn from(n: i32) -> Self {
        Rat::from_int(n as i64)
    }
}

impl From<u64> for Rat {
    fn from(n: u64) -> Self {
        Rat::from_i128(n as i128, 1)
    }
}

impl From<BigInt> for Rat {
    fn from(n: BigInt) -> Self {
        Rat::from_bigint(n)
    }
}

impl<'a> Add<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn add(self, o: &Rat) -> Rat {
        if let (Repr::Small(a, 1), Repr::Small(c, 1)) = (&self.0, &o.0) {
            if let Some(s) = a.checked_add(*c) {
                return Rat::from_int(s);
            }
        }
        self.binop(
            o,
            |a, b, c, d| Some((a.checked_mul(d)?.checked_add(c.checked_mul(b)?)?, b.checked_mul(d)?)),
            |x, y| x + y,
        )
    }
}

impl<'a> Sub<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn sub(self, o: &Rat) -> Rat {
        if let (Repr::Small(a, 1), Repr::Small(c, 1)) = (&self.0, &o.0) {
            if let Some(s) = a.checked_sub(*c) {
                return Rat::from_int(s);
            }
        }
        self.binop(
            o,
            |a, b, c, d| Some((a.checked_mul(d)?.checked_sub(c.checked_mul(b)?)?, b.checked_mul(d)?)),
            |x, y| x - y,
        )
    }
}

impl<'a> Mul<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn mul(self, o: &Rat) -> Rat {
        if let (Repr::Small(a, 1), Repr::Small(c, 1)) = (&self.0, &o.0) {
            if let Some(s) = a.checked_mul(*c) {
                return Rat::from_int(s);
            }
        }
        self.binop(o, |a, b, c, d| Some((a.checked_mul(c)?, b.checked_mul(d)?)), |x, y| x * y)
    }
}

impl<'a> Div<&'a Rat> for &'a Rat {
    type Output = Rat;
    fn div(self, o: &Rat) -> Rat {
        assert!(!o.is_zero(), "division by zero");
        self * &o.recip()
    }
}

macro_rules! owned_ops {
    ($($tr:ident $f:ident),*) => {$(
        impl $tr<Rat> for Rat {
            type Output = Rat;
            fn $f(self, o: Rat) -> Rat { (&self).$f(&o) }
        }
        impl<'a> $tr<&'a Rat> for Rat {
            type Output = Rat;
            fn $f(self, o: &Rat) -> Rat { (&self).$f(o) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul, Div div);

impl Neg for &Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        match &self.0 {
            Repr::Small(a, b) => Rat::from_i128(-(*a as i128), *b as i128),
            Repr::Big(r) => Rat::from_big(-(**r).clone()),
        }
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        -&self
    }
}

impl AddAssign<&Rat> for Rat {
    fn add_assign(&mut self, o: &Rat) {
        *self = &*self + o;
    }
}

impl SubAssign<&Rat> for Rat {
    fn sub_assign(&mut self, o: &Rat) {
        *self = &*self - o;
    }
}

impl MulAssign<&Rat> for Rat {
    fn mul_assign(&mut self, o: &Rat) {
        *self = &*self * o;
    }
}

impl Ord for Rat {
    fn cmp(&self, o: &Rat) -> Ordering {
        if let (Repr::Small(a, b), Repr::Small(c, d)) = (&self.0, &o.0) {
            return (*a as i128 * *d as i128).cmp(&(*c as i128 * *b as i128));
        }
        self.to_big().cmp(&o.to_big())
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, o: &Rat) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            Repr::Small(a, 1) => write!(f, "{a}"),
            Repr::Small(a, b) => write!(f, "{a}/{b}"),
            Repr::Big(r) if r.is_integer() => write!(f, "{}", r.numer()),
            Repr::Big(r) => write!(f, "{}/{}", r.numer(), r.denom()),
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Rat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Rat> {
        let s = s.trim();
        let bad = || Error::Parse(format!("invalid rational `{s}`"));
        let (n, d) = match s.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (s, "1"),
        };
        let n: BigInt = n.parse().map_err(|_| bad())?;
        let d: BigInt = d.parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        Ok(Rat::from_big(BigRational::new(n, d)))
    }
}

impl num_traits::Zero for Rat {
    fn zero() -> Self {
        Rat::zero()
    }
    fn is_zero(&self) -> bool {
        Rat::is_zero(self)
    }
}

impl num_traits::One for Rat {
    fn one() -> Self {
        Rat::one()
    }
}

/// Exact binomial coefficient as a rational.
pub fn binomial(n: u64, k: u64) -> Rat {
    if k > n {
        return Rat::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    Rat::from_bigint(acc)
}

/// Sparse vector with strictly increasing indices and no stored zeros.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Default)]
pub struct SparseVec {
    dim: usize,
    entries: Vec<(usize, Rat)>,
}

impl SparseVec {
    pub fn zero(dim: usize) -> Self {
        SparseVec { dim, entries: Vec::new() }
    }

    /// Sums duplicate indices and drops zeros. Panics on an index `>= dim`.
    pub fn from_pairs(dim: usize, pairs: impl IntoIterator<Item = (usize, Rat)>) -> Self {
        let mut v: Vec<(usize, Rat)> = pairs.into_iter().collect();
        v.sort_by_key(|(i, _)| *i);
        let mut entries: Vec<(usize, Rat)> = Vec::with_capacity(v.len());
        for (i, x) in v {
            assert!(i < dim, "index {i} out of range for dimension {dim}");
            match entries.last_mut() {
                Some((j, y)) if *j == i => *y += &x,
                _ => entries.push((i, x)),
            }
        }
        entries.retain(|(_, x)| !x.is_zero());
        SparseVec { dim, entries }
    }

    pub fn from_dense(v: &[Rat]) -> Self {
        Self::from_pairs(v.len(), v.iter().cloned().enumerate())
    }

    pub fn unit(dim: usize, i: usize) -> Self {
        Self::from_pairs(dim, [(i, Rat::one())])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(usize, Rat)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Rat)> {
        self.entries.iter().map(|(i, x)| (*i, x))
    }

    pub fn get(&self, i: usize) -> Rat {
        match self.entries.binary_search_by_key(&i, |(j, _)| *j) {
            Ok(p) => self.entries[p].1.clone(),
            Err(_) => Rat::zero(),
        }
    }

    pub fn leading(&self) -> Option<(usize, &Rat)> {
        self.entries.first().map(|(i, x)| (*i, x))
    }

    pub fn to_dense(&self) -> Vec<Rat> {
        let mut d = vec![Rat::zero(); self.dim];
        for (i, x) in &self.entries {
            d[*i] = x.clone();
        }
        d
    }

    pub fn scale(&self, c: &Rat) -> SparseVec {
        if c.is_zero() {
            return SparseVec::zero(self.dim);
        }
        SparseVec {
            dim: self.dim,
            entries: self.entries.iter().map(|(i, x)| (*i, x * c)).collect(),
        }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, other: &SparseVec, c: &Rat) -> SparseVec {
        debug_assert_eq!(self.dim, other.dim);
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut a, mut b) = (self.entries.iter().peekable(), other.entries.iter().peekable());
        loop {
            match (a.peek(), b.peek()) {
                (Some((i, x)), Some((j, y))) => match i.cmp(j) {
                    Ordering::Less => {
                        out.push((*i, x.clone()));
                        a.next();
                    }
                    Ordering::Greater => {
                        out.push((*j, y * c));
                        b.next();
                    }
                    Ordering::Equal => {
                        let s = x + &(y * c);
                        if !s.is_zero() {
                            out.push((*i, s));
                        }
                        a.next();
                        b.next();
                    }
                },
                (Some((i, x)), None) => {
                    out.push((*i, x.clone()));
                    a.next();
                }
                (None, Some((j, y))) => {
                    out.push((*j, y * c));
                    b.next();
                }
                (None, None) => break,
            }
        }
        out.retain(|(_, x)| !x.is_zero());
        SparseVec { dim: self.dim, entries: out }
    }
}

/// A subspace of ℚ^dim held in reduced row echelon form.
#[derive(Clone, Debug, Default)]
pub struct RowSpace {
    dim: usize,
    rows: Vec<SparseVec>,
    pivots: Vec<usize>,
    /// Row index for each pivot column, `usize::MAX` elsewhere.
    pivot_row: Vec<usize>,
}

impl RowSpace {
    pub fn new(dim: usize) -> Self {
        RowSpace { dim, rows: Vec::new(), pivots: Vec::new(), pivot_row: vec![usize::MAX; dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseVec] {
        &self.rows
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    pub fn is_pivot(&self, col: usize) -> bool {
        self.pivot_row[col] != usize::MAX
    }

    fn check(&self, v: &SparseVec) -> Result<()> {
        if v.dim != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: v.dim });
        }
        Ok(())
    }

    /// Normal form of `v` modulo the span: the result is supported on
    /// non-pivot columns only, and is zero iff `v` lies in the span.
    pub fn reduce(&self, v: &SparseVec) -> Result<SparseVec> {
        self.check(v)?;
        if !v.entries.iter().any(|(i, _)| self.is_pivot(*i)) {
            return Ok(v.clone());
        }
        let mut acc: Vec<Rat> = vec![Rat::zero(); self.dim];
        let mut touched = vec![false; self.dim];
        for (c, x) in &v.entries {
            let r = self.pivot_row[*c];
            if r == usize::MAX {
                acc[*c] += x;
                touched[*c] = true;
            } else {
                for (j, y) in self.rows[r].entries.iter().skip(1) {
                    acc[*j] -= &(x * y);
                    touched[*j] = true;
                }
            }
        }
        let entries = touched
            .iter()
            .enumerate()
            .filter(|(_, t)| **t)
            .filter_map(|(i, _)| {
                let x = std::mem::take(&mut acc[i]);
                (!x.is_zero()).then_some((i, x))
            })
            .collect();
        Ok(SparseVec { dim: self.dim, entries })
    }

    pub fn in_span(&self, v: &SparseVec) -> Result<bool> {
        Ok(self.reduce(v)?.is_zero())
    }

    /// Adds `v` to the span; returns whether the rank increased.
    pub fn rref_insert(&mut self, v: &SparseVec) -> Result<bool> {
        let r = self.reduce(v)?;
        Ok(self.insert_reduced(r))
    }

    /// Inserts a vector already reduced against this space.
    fn insert_reduced(&mut self, r: SparseVec) -> bool {
        let Some((p, lead)) = r.leading() else {
            return false;
        };
        let r = r.scale(&lead.recip());
        for row in self.rows.iter_mut() {
            let c = row.get(p);
            if !c.is_zero() {
                *row = row.add_scaled(&r, &(-c));
            }
        }
        let pos = self.pivots.partition_point(|&q| q < p);
        self.pivots.insert(pos, p);
        self.rows.insert(pos, r);
        for (k, &q) in self.pivots.iter().enumerate().skip(pos) {
            self.pivot_row[q] = k;
        }
        true
    }

    /// Functional form of [`RowSpace::rref_insert`].
    pub fn with(mut self, v: &SparseVec) -> Result<(RowSpace, bool)> {
        let ins = self.rref_insert(v)?;
        Ok((self, ins))
    }

    /// Non-pivot columns in increasing order.
    pub fn complement_basis(&self) -> Vec<usize> {
        (0..self.dim).filter(|&c| !self.is_pivot(c)).collect()
    }

    pub fn contains_space(&self, other: &RowSpace) -> Result<bool> {
        for r in &other.rows {
            if !self.in_span(r)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Row spaces are equal iff their RREF rows coincide.
    pub fn same_span(&self, other: &RowSpace) -> bool {
        self.dim == other.dim && self.rows == other.rows
    }
}
