//! Polynomial `GL_n` modules: partitions, dimensions, Littlewood-Richardson
//! products and dimension checks of module decompositions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// A weakly decreasing list of positive parts.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize)]
pub struct Partition(Vec<u32>);

impl Partition {
    pub fn new(mut parts: Vec<u32>) -> Result<Self> {
        while parts.last() == Some(&0) {
            parts.pop();
        }
        if parts.windows(2).any(|w| w[0] < w[1]) || parts.contains(&0) {
            return Err(Error::Parse(format!("parts must be weakly decreasing and positive: {parts:?}")));
        }
        Ok(Partition(parts))
    }

    /// Builds a partition from possibly negative or zero entries, as produced
    /// by formulas like `[k-4, 1^3]`; zero parts are dropped.
    pub fn from_signed(parts: &[i64]) -> Result<Self> {
        if parts.iter().any(|&p| p < 0) {
            return Err(Error::Precondition(format!("negative part in {parts:?}")));
        }
        Self::new(parts.iter().filter(|&&p| p > 0).map(|&p| p as u32).collect())
    }

    pub fn parts(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn size(&self) -> u32 {
        self.0.iter().sum()
    }

    fn part(&self, i: usize) -> u32 {
        self.0.get(i).copied().unwrap_or(0)
    }
}

/// `3,2^2,1` or `[3,2,2,1]`; the empty string is the empty partition.
impl FromStr for Partition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']').trim();
        let mut parts = Vec::new();
        if s.is_empty() {
            return Ok(Partition::default());
        }
        for tok in s.split(',') {
            let tok = tok.trim();
            let (base, exp) = match tok.split_once('^') {
                Some((b, e)) => (b.trim(), e.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad exponent in {tok:?}")))?),
                None => (tok, 1),
            };
            let b: u32 = base.parse().map_err(|_| Error::Parse(format!("bad part {tok:?}")))?;
            parts.extend(std::iter::repeat(b).take(exp));
        }
        Partition::new(parts)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        let mut i = 0;
        let mut first = true;
        while i < self.0.len() {
            let p = self.0[i];
            let run = self.0[i..].iter().take_while(|&&q| q == p).count();
            if !first {
                write!(f, ",")?;
            }
            first = false;
            if run > 1 {
                write!(f, "{p}^{run}")?;
            } else {
                write!(f, "{p}")?;
            }
            i += run;
        }
        write!(f, "]")
    }
}

/// Dimension of `[lambda]` for `GL_n` by the hook-content formula.
pub fn schur_dim(lambda: &Partition, n: usize) -> u128 {
    if lambda.len() > n {
        return 0;
    }
    let conj = conjugate(lambda);
    let (mut num, mut den) = (1u128, 1u128);
    for (i, &row) in lambda.0.iter().enumerate() {
        for j in 0..row as usize {
            num *= (n as i64 + j as i64 - i as i64) as u128;
            den *= (row as usize - j - 1 + conj[j] as usize - i) as u128;
            let g = gcd(num, den);
            num /= g;
            den /= g;
        }
    }
    num / den
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn conjugate(lambda: &Partition) -> Vec<u32> {
    (0..lambda.part(0)).map(|j| lambda.0.iter().filter(|&&p| p > j).count() as u32).collect()
}

/// `[lambda] (x) [mu]` for `GL_n`, via Littlewood-Richardson tableaux: the
/// rows of `mu` are added as horizontal strips and the reverse reading word
/// must be a lattice word. Shapes with more than `n` rows are dropped.
pub fn lr_tensor(lambda: &Partition, mu: &Partition, n: usize) -> ModuleExpr {
    let mut out = ModuleExpr::zero();
    if lambda.len() > n || mu.len() > n {
        return out;
    }
    // labels[r] = labels added to row r, left to right.
    let start: Vec<Vec<u32>> = vec![Vec::new(); n];
    let shape: Vec<u32> = (0..n).map(|i| lambda.part(i)).collect();
    lr_rec(&shape, &start, mu, 0, n, &mut out);
    out
}

fn lr_rec(shape: &[u32], labels: &[Vec<u32>], mu: &Partition, j: usize, n: usize, out: &mut ModuleExpr) {
    if j == mu.len() {
        if is_lattice(labels, mu.len()) {
            let p = Partition::new(shape.to_vec()).expect("shape stays a partition");
            out.add_term(Term { partition: p, det: 0 }, 1);
        }
        return;
    }
    let mut add = vec![0u32; n];
    strips(shape, mu.part(j), 0, &mut add, &mut |add| {
        let mut s = shape.to_vec();
        let mut l = labels.to_vec();
        for r in 0..n {
            s[r] += add[r];
            l[r].extend(std::iter::repeat(j as u32 + 1).take(add[r] as usize));
        }
        // Prune early: the prefix read so far must already be lattice.
        if is_lattice(&l, j + 1) {
            lr_rec(&s, &l, mu, j + 1, n, out);
        }
    });
}

/// All horizontal strips of `m` boxes on `shape`, starting at row `r`.
fn strips(shape: &[u32], m: u32, r: usize, add: &mut Vec<u32>, f: &mut dyn FnMut(&[u32])) {
    if r == shape.len() {
        if m == 0 {
            f(add);
        }
        return;
    }
    let cap = if r == 0 { m } else { (shape[r - 1] - shape[r]).min(m) };
    for a in 0..=cap {
        add[r] = a;
        strips(shape, m - a, r + 1, add, f);
    }
    add[r] = 0;
}

/// Reading rows top to bottom, right to left, every prefix has at least as
/// many `i` as `i+1`.
fn is_lattice(labels: &[Vec<u32>], k: usize) -> bool {
    let mut count = vec![0usize; k + 2];
    for row in labels {
        for &l in row.iter().rev() {
            let l = l as usize;
            count[l] += 1;
            if l > 1 && count[l] > count[l - 1] {
                return false;
            }
        }
    }
    true
}

/// `det^det (x) [partition]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Term {
    pub partition: Partition,
    pub det: i32,
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.det {
            0 => write!(f, "{}", self.partition),
            d => write!(f, "(det^{d} (x) {})", self.partition),
        }
    }
}

/// A formal sum of twisted Schur modules with positive multiplicities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ModuleExpr {
    terms: BTreeMap<Term, u64>,
}

impl ModuleExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn single(p: Partition) -> Self {
        let mut e = Self::zero();
        e.add_term(Term { partition: p, det: 0 }, 1);
        e
    }

    pub fn add_term(&mut self, t: Term, mult: u64) {
        if mult > 0 {
            *self.terms.entry(t).or_insert(0) += mult;
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Term, u64)> {
        self.terms.iter().map(|(t, &m)| (t, m))
    }

    pub fn sum(&self, o: &ModuleExpr) -> ModuleExpr {
        let mut r = self.clone();
        for (t, m) in o.terms() {
            r.add_term(t.clone(), m);
        }
        r
    }

    pub fn twist(&self, det: i32) -> ModuleExpr {
        let mut r = Self::zero();
        for (t, m) in self.terms() {
            r.add_term(Term { partition: t.partition.clone(), det: t.det + det }, m);
        }
        r
    }

    pub fn dim(&self, n: usize) -> u128 {
        self.terms().map(|(t, m)| m as u128 * schur_dim(&t.partition, n)).sum()
    }

    pub fn max_rows(&self) -> usize {
        self.terms.keys().map(|t| t.partition.len()).max().unwrap_or(0)
    }

    /// `[lambda] (x) self`, term by term; twists are carried along.
    pub fn tensor(&self, lambda: &Partition, n: usize) -> ModuleExpr {
        let mut r = Self::zero();
        for (t, m) in self.terms() {
            for (u, k) in lr_tensor(&t.partition, lambda, n).terms() {
                r.add_term(Term { partition: u.partition.clone(), det: t.det }, m * k);
            }
        }
        r
    }

    /// Rewrites `det^e (x) [nu]` with `e < 0` as `[nu - (-e)^n]` whenever
    /// `nu` has `n` rows of length at least `-e`, so that twisted terms can
    /// be compared with untwisted ones.
    pub fn normalize(&self, n: usize) -> ModuleExpr {
        let mut r = Self::zero();
        for (t, m) in self.terms() {
            let mut t = t.clone();
            while t.det < 0 && t.partition.len() == n {
                t.partition = Partition::new(t.partition.0.iter().map(|p| p - 1).collect()).expect("still decreasing");
                t.det += 1;
            }
            r.add_term(t, m);
        }
        r
    }
}

/// Serialized as a list of `{partition, det, multiplicity}` records.
impl Serialize for ModuleExpr {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            partition: &'a [u32],
            det: i32,
            multiplicity: u64,
        }
        s.collect_seq(self.terms().map(|(t, m)| Entry { partition: t.partition.parts(), det: t.det, multiplicity: m }))
    }
}

impl fmt::Display for ModuleExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (t, m) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if m > 1 {
                write!(f, "{m}")?;
            }
            write!(f, "{t}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub expr: String,
    pub n: usize,
    pub total_dim: u128,
    pub expected_dim: u128,
    pub holds: bool,
}

pub fn verify_decomposition(expr: &ModuleExpr, expected_dim: u128, n: usize) -> DecompositionReport {
    let total = expr.dim(n);
    DecompositionReport { expr: expr.to_string(), n, total_dim: total, expected_dim, holds: total == expected_dim }
}

fn p(parts: &[i64]) -> Partition {
    Partition::from_signed(parts).expect("formula gives a partition")
}

fn ones(m: i64) -> Vec<i64> {
    vec![1; m.max(0) as usize]
}

fn cat(a: &[i64], b: Vec<i64>) -> Vec<i64> {
    a.iter().copied().chain(b).collect()
}

/// Decomposition of the degree-`d` part of `R''`: `[2,1^2]` for `d = 4`, and
/// `[d-2,2] + [d-2,1^2] + [d-3,2,1] + [d-3,1^3]` for `d >= 5`.
pub fn second_derived_decomposition(d: usize) -> Result<ModuleExpr> {
    let d = d as i64;
    let mut e = ModuleExpr::zero();
    match d {
        ..=3 => {}
        4 => e.add_term(Term { partition: p(&[2, 1, 1]), det: 0 }, 1),
        _ => {
            for parts in [vec![d - 2, 2], vec![d - 2, 1, 1], vec![d - 3, 2, 1], vec![d - 3, 1, 1, 1]] {
                e.add_term(Term { partition: p(&parts), det: 0 }, 1);
            }
        }
    }
    Ok(e)
}

/// Which coefficient to use for the `3[., 1^2]` term of the `n, k >= 5` case.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// `3[k-1, 1^2]`, as the formula is usually quoted.
    Printed,
    /// `3[k-3, 1^2]`, matching the `n = 4` case.
    Corrected,
}

/// The stated decomposition of the kernel `Ker theta_k` of the projection
/// onto the metabelian quotient, as a module for `GL_n`. `variant` only
/// matters when `n, k >= 5`. Terms whose formula is not weakly decreasing
/// (`[k-4,2,1]` at `k = 5`) are omitted.
pub fn kernel_decomposition(n: usize, k: usize, variant: Variant) -> Result<ModuleExpr> {
    if n < 4 || k < 4 {
        return Err(Error::Precondition("needs n, k >= 4".into()));
    }
    let (ni, ki) = (n as i64, k as i64);
    let mut e = ModuleExpr::zero();
    let mut add = |parts: Vec<i64>, det: i32, m: u64| {
        if let Ok(partition) = Partition::from_signed(&parts) {
            e.add_term(Term { partition, det }, m);
        }
    };
    if k == 4 {
        add(cat(&[3, 2, 2], ones(ni - 4)), -1, 1);
        add(vec![2, 1], 0, 1);
        add(vec![1, 1, 1], 0, 1);
    } else if n == 4 && k == 5 {
        add(vec![4, 3, 1], -1, 1);
        add(vec![4, 2, 2], -1, 1);
        add(vec![3, 3, 2], -1, 1);
        add(vec![3, 1], 0, 2);
        add(vec![2, 2], 0, 2);
        add(vec![2, 1, 1], 0, 3);
        add(vec![1, 1, 1, 1], 0, 1);
    } else if n == 4 {
        add(vec![ki - 1, 3, 1], -1, 1);
        add(vec![ki - 1, 2, 2], -1, 1);
        add(vec![ki - 2, 3, 2], -1, 1);
        add(vec![ki - 2, 1], 0, 2);
        add(vec![ki - 3, 2], 0, 2);
        add(vec![ki - 3, 1, 1], 0, 3);
        add(vec![ki - 4, 2, 1], 0, 1);
        add(vec![ki - 4, 1, 1, 1], 0, 1);
    } else {
        add(cat(&[ki - 1, 3], ones(ni - 3)), -1, 1);
        add(cat(&[ki - 1, 2, 2], ones(ni - 4)), -1, 1);
        add(cat(&[ki - 2, 3, 2], ones(ni - 4)), -1, 1);
        add(cat(&[ki - 2, 2, 2, 2], ones(ni - 5)), -1, 1);
        add(vec![ki - 2, 1], 0, 2);
        add(vec![ki - 3, 2], 0, 2);
        let lead = if variant == Variant::Printed { ki - 1 } else { ki - 3 };
        add(vec![lead, 1, 1], 0, 3);
        add(vec![ki - 4, 2, 1], 0, 1);
        add(vec![ki - 4, 1, 1, 1], 0, 1);
    }
    Ok(e)
}

/// `det^-1 (x) [1^(n-1)] (x) (R'')^k`, expanded by the LR rule.
pub fn kernel_from_lr(n: usize, k: usize) -> Result<ModuleExpr> {
    let r2 = second_derived_decomposition(k)?;
    let col = Partition::new(vec![1; n - 1])?;
    Ok(r2.tensor(&col, n).twist(-1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn part(s: &str) -> Partition {
        s.parse().unwrap()
    }

    /// Dimension by counting semistandard tableaux with entries in `1..=n`.
    fn ssyt_count(lambda: &Partition, n: usize) -> u128 {
        let cells: Vec<(usize, usize)> = lambda.0.iter().enumerate().flat_map(|(i, &r)| (0..r as usize).map(move |j| (i, j))).collect();
        let mut t = vec![vec![0usize; lambda.part(0) as usize]; lambda.len()];
        fn go(c: usize, cells: &[(usize, usize)], t: &mut Vec<Vec<usize>>, n: usize) -> u128 {
            if c == cells.len() {
                return 1;
            }
            let (i, j) = cells[c];
            let lo = (if j > 0 { t[i][j - 1] } else { 1 }).max(if i > 0 { t[i - 1][j] + 1 } else { 1 });
            let mut s = 0;
            for v in lo..=n {
                t[i][j] = v;
                s += go(c + 1, cells, t, n);
            }
            s
        }
        go(0, &cells, &mut t, n)
    }

    #[test]
    fn parse_and_display() {
        assert_eq!(part("3,2^2,1"), Partition::new(vec![3, 2, 2, 1]).unwrap());
        assert_eq!(part("[3,2,2,1]").to_string(), "[3,2^2,1]");
        assert!("2,3".parse::<Partition>().is_err());
        assert!("2,x".parse::<Partition>().is_err());
        assert!(part("").is_empty());
    }

    #[test]
    fn small_dimensions() {
        for n in 1..7 {
            assert_eq!(schur_dim(&part("1"), n), n as u128);
        }
        assert_eq!(schur_dim(&part("1,1"), 4), 6);
        assert_eq!(schur_dim(&part("2,1,1"), 4), 15);
        assert_eq!(schur_dim(&part("3,2,2"), 4), 36);
        let hand = [("5,1", 140), ("4,2", 126), ("4,1,1", 70), ("3,2,1", 64), ("3,1,1,1", 10), ("5,2", 224), ("5,1,1", 120), ("4,2,1", 140), ("4,1,1,1", 20)];
        for (s, d) in hand {
            assert_eq!(schur_dim(&part(s), 4), d, "{s}");
        }
    }

    #[test]
    fn hook_content_matches_tableau_count() {
        for s in ["1", "2", "1,1", "3,1", "2,2", "2,1,1", "3,2,1", "4,1,1", "2,2,2", "3,3,1,1"] {
            for n in 1..=5 {
                assert_eq!(schur_dim(&part(s), n), ssyt_count(&part(s), n), "{s} n={n}");
            }
        }
    }

    #[test]
    fn lr_examples() {
        let sq = lr_tensor(&part("1"), &part("1"), 4);
        assert_eq!(sq.to_string(), "[1^2] + [2]");
        for d in 5..10 {
            let e = lr_tensor(&Partition::from_signed(&[d - 3, 1]).unwrap(), &part("1,1"), 4);
            assert_eq!(e, second_derived_decomposition(d as usize).unwrap(), "d={d}");
        }
        let e = lr_tensor(&part("2,1"), &part("2,1"), 6);
        let mult: BTreeMap<String, u64> = e.terms().map(|(t, m)| (t.to_string(), m)).collect();
        assert_eq!(mult["[3,2,1]"], 2);
        assert_eq!(mult.len(), 7);
        assert_eq!(e.terms().map(|(_, m)| m).sum::<u64>(), 8);
    }

    #[test]
    fn truncation_drops_long_columns() {
        assert_eq!(lr_tensor(&part("1,1"), &part("1,1"), 2).to_string(), "[2^2]");
        assert!(lr_tensor(&part("1,1,1"), &part("1"), 2).terms().next().is_none());
    }

    #[test]
    fn kernel_dimension_checks() {
        use crate::quotient::second_derived_rank;
        let check = |n: usize, k: usize, v: Variant| {
            let expected = n as u128 * second_derived_rank(n, k) as u128;
            verify_decomposition(&kernel_decomposition(n, k, v).unwrap(), expected, n).holds
        };
        assert!(check(4, 4, Variant::Corrected));
        assert!(check(4, 5, Variant::Corrected));
        assert!(check(4, 6, Variant::Corrected));
        assert!(check(5, 5, Variant::Corrected));
        assert!(!check(5, 5, Variant::Printed));
    }

    #[test]
    fn kernel_matches_lr_expansion() {
        for (n, k) in [(4, 4), (4, 5), (4, 6), (4, 7), (5, 5), (5, 6), (6, 5)] {
            let lr = kernel_from_lr(n, k).unwrap().normalize(n);
            let stated = kernel_decomposition(n, k, Variant::Corrected).unwrap().normalize(n);
            assert_eq!(lr, stated, "n={n} k={k}");
        }
        let printed = kernel_decomposition(5, 6, Variant::Printed).unwrap().normalize(5);
        assert_ne!(kernel_from_lr(5, 6).unwrap().normalize(5), printed);
    }

    fn small_partition(max_len: usize, max_part: u32) -> impl Strategy<Value = Partition> {
        prop::collection::vec(1..=max_part, 0..=max_len).prop_map(|mut v| {
            v.sort_unstable_by(|a, b| b.cmp(a));
            Partition::new(v).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 100, rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha, ..ProptestConfig::default() })]

        #[test]
        fn lr_is_commutative(a in small_partition(3, 3), b in small_partition(3, 3), n in 1usize..5) {
            prop_assert_eq!(lr_tensor(&a, &b, n), lr_tensor(&b, &a, n));
        }

        #[test]
        fn lr_respects_rows(a in small_partition(3, 3), b in small_partition(3, 3), n in 1usize..5) {
            prop_assert!(lr_tensor(&a, &b, n).max_rows() <= n);
        }

        #[test]
        fn lr_dimension_is_multiplicative(a in small_partition(3, 3), b in small_partition(3, 3), n in 1usize..5) {
            prop_assert_eq!(lr_tensor(&a, &b, n).dim(n), schur_dim(&a, n) * schur_dim(&b, n));
        }

        #[test]
        fn dim_positive_iff_fits(a in small_partition(6, 4), n in 1usize..6) {
            prop_assert_eq!(schur_dim(&a, n) > 0, a.len() <= n);
        }
    }
}
