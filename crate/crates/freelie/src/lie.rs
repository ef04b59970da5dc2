//! The free Lie algebra `L_n` in Lyndon-basis coordinates.
//!
//! Each Lyndon word `w` carries its standard bracketing `P_w`; the
//! associative expansion of `P_w` is `w` plus lexicographically larger words,
//! so coordinates are recovered from an expansion by repeatedly peeling off
//! the least word.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, RwLock};

use once_cell::sync::{Lazy, OnceCell};

use crate::assoc::{AssocPoly, Word};
use crate::error::{Error, Result};
use crate::ratlin::Rat;

/// Expansion of a basis element as `(word, coefficient)` pairs, sorted by word.
pub type Expansion = Vec<(Vec<u8>, Rat)>;

/// Lyndon words of one length over one alphabet, with cached expansions.
pub struct BasisTable {
    n: usize,
    d: usize,
    words: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    split: Vec<usize>,
    expansions: Vec<OnceCell<Arc<Expansion>>>,
}

pub fn is_lyndon(w: &[u8]) -> bool {
    !w.is_empty() && (1..w.len()).all(|i| w < &w[i..])
}

/// Length of the left factor in the standard factorization `w = uv`, where
/// `v` is the longest proper Lyndon suffix.
fn standard_split(w: &[u8]) -> usize {
    (1..w.len()).find(|&i| is_lyndon(&w[i..])).expect("Lyndon word of length >= 2")
}

/// All Lyndon words of length exactly `d` over `1..=n`, lexicographic.
pub fn lyndon_words(n: usize, d: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    if n == 0 || d == 0 {
        return out;
    }
    let mut w: Vec<u8> = vec![1];
    loop {
        if w.len() == d {
            out.push(w.clone());
        }
        let m = w.len();
        while w.len() < d {
            w.push(w[w.len() - m]);
        }
        while w.last() == Some(&(n as u8)) {
            w.pop();
        }
        match w.last_mut() {
            Some(l) => *l += 1,
            None => break,
        }
    }
    out
}

impl BasisTable {
    fn build(n: usize, d: usize) -> Self {
        let words = lyndon_words(n, d);
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let split = words.iter().map(|w| if w.len() > 1 { standard_split(w) } else { 0 }).collect();
        let expansions = (0..words.len()).map(|_| OnceCell::new()).collect();
        BasisTable { n, d, words, index, split, expansions }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, i: usize) -> &[u8] {
        &self.words[i]
    }

    pub fn words(&self) -> &[Vec<u8>] {
        &self.words
    }

    pub fn index_of(&self, w: &[u8]) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// Indices of the two factors of the standard bracketing.
    pub fn factors(&self, i: usize) -> Option<((usize, usize), (usize, usize))> {
        let s = self.split[i];
        if s == 0 {
            return None;
        }
        let w = &self.words[i];
        let left = basis_table(self.n, s).index_of(&w[..s]).expect("factor is Lyndon");
        let right = basis_table(self.n, self.d - s).index_of(&w[s..]).expect("factor is Lyndon");
        Some(((s, left), (self.d - s, right)))
    }

    pub fn expansion(&self, i: usize) -> Arc<Expansion> {
        self.expansions[i]
            .get_or_init(|| {
                let Some(((du, iu), (dv, iv))) = self.factors(i) else {
                    return Arc::new(vec![(self.words[i].clone(), Rat::one())]);
                };
                let eu = basis_table(self.n, du).expansion(iu);
                let ev = basis_table(self.n, dv).expansion(iv);
                Arc::new(commutator_words(&eu, &ev))
            })
            .clone()
    }

    /// Letter multiplicities of basis word `i`.
    pub fn content(&self, i: usize) -> Vec<u8> {
        content_of(&self.words[i], self.n)
    }
}

pub fn content_of(w: &[u8], n: usize) -> Vec<u8> {
    let mut c = vec![0u8; n];
    for &l in w {
        c[l as usize - 1] += 1;
    }
    c
}

fn commutator_words(a: &[(Vec<u8>, Rat)], b: &[(Vec<u8>, Rat)]) -> Expansion {
    let mut acc: HashMap<Vec<u8>, Rat> = HashMap::with_capacity(2 * a.len() * b.len());
    for (u, x) in a {
        for (v, y) in b {
            let p = x * y;
            let mut uv = Vec::with_capacity(u.len() + v.len());
            uv.extend_from_slice(u);
            uv.extend_from_slice(v);
            *acc.entry(uv).or_default() += &p;
            let mut vu = Vec::with_capacity(u.len() + v.len());
            vu.extend_from_slice(v);
            vu.extend_from_slice(u);
            *acc.entry(vu).or_default() -= &p;
        }
    }
    let mut out: Expansion = acc.into_iter().filter(|(_, c)| !c.is_zero()).collect();
    out.sort_by(|x, y| x.0.cmp(&y.0));
    out
}

type TableMap = HashMap<(usize, usize), Arc<BasisTable>>;
static TABLES: Lazy<RwLock<TableMap>> = Lazy::new(|| RwLock::new(HashMap::new()));

/// Shared, lazily built basis table for `(n, d)`.
pub fn basis_table(n: usize, d: usize) -> Arc<BasisTable> {
    if let Some(t) = TABLES.read().expect("table lock").get(&(n, d)) {
        return t.clone();
    }
    let t = Arc::new(BasisTable::build(n, d));
    TABLES.write().expect("table lock").entry((n, d)).or_insert(t).clone()
}

/// Binary bracketing of a Lyndon word.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Bracketing {
    Letter(u8),
    Bracket(Box<Bracketing>, Box<Bracketing>),
}

impl Bracketing {
    pub fn of(w: &[u8]) -> Bracketing {
        if w.len() == 1 {
            return Bracketing::Letter(w[0]);
        }
        let s = standard_split(w);
        Bracketing::Bracket(Box::new(Self::of(&w[..s])), Box::new(Self::of(&w[s..])))
    }

    pub fn write(&self, f: &mut impl fmt::Write, var: char) -> fmt::Result {
        match self {
            Bracketing::Letter(l) => write!(f, "{var}{l}"),
            Bracketing::Bracket(a, b) => {
                write!(f, "[")?;
                a.write(f, var)?;
                write!(f, ",")?;
                b.write(f, var)?;
                write!(f, "]")
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LyndonBasisElement {
    pub word: Word,
    pub bracketing: Bracketing,
}

/// The Lyndon basis of the degree-`d` component, lexicographic.
pub fn basis(n: usize, d: usize) -> Vec<LyndonBasisElement> {
    basis_table(n, d)
        .words()
        .iter()
        .map(|w| LyndonBasisElement { word: Word(w.clone()), bracketing: Bracketing::of(w) })
        .collect()
}

struct BracketCache {
    shards: Vec<RwLock<HashMap<[u32; 5], Arc<Vec<(usize, Rat)>>>>>,
}

static BRACKETS: Lazy<BracketCache> =
    Lazy::new(|| BracketCache { shards: (0..64).map(|_| RwLock::new(HashMap::new())).collect() });

/// `[P_a, P_b]` for basis elements `a = (da, ia)`, `b = (db, ib)`.
fn basis_bracket(n: usize, a: (usize, usize), b: (usize, usize)) -> (Arc<Vec<(usize, Rat)>>, bool) {
    if a == b {
        return (Arc::new(Vec::new()), false);
    }
    let (lo, hi, flip) = if a < b { (a, b, false) } else { (b, a, true) };
    let key = [n as u32, lo.0 as u32, lo.1 as u32, hi.0 as u32, hi.1 as u32];
    let mut h = std::collections::hash_map::DefaultHasher::new();
    key.hash(&mut h);
    let shard = &BRACKETS.shards[(h.finish() % 64) as usize];
    if let Some(v) = shard.read().expect("bracket lock").get(&key) {
        return (v.clone(), flip);
    }
    let el = basis_table(n, lo.0).expansion(lo.1);
    let eh = basis_table(n, hi.0).expansion(hi.1);
    let prod = commutator_words(&el, &eh);
    let coords = extract_words(n, lo.0 + hi.0, prod.into_iter()).expect("bracket of Lie elements is Lie");
    let v = Arc::new(coords.into_iter().collect::<Vec<_>>());
    shard.write().expect("bracket lock").insert(key, v.clone());
    (v, flip)
}

/// Lyndon coordinates of a homogeneous Lie polynomial given by its words.
fn extract_words(n: usize, d: usize, words: impl Iterator<Item = (Vec<u8>, Rat)>) -> Result<BTreeMap<usize, Rat>> {
    let table = basis_table(n, d);
    let mut p: BTreeMap<Vec<u8>, Rat> = BTreeMap::new();
    for (w, c) in words {
        if w.len() != d {
            return Err(Error::NotHomogeneous);
        }
        let e = p.entry(w).or_default();
        *e += &c;
    }
    p.retain(|_, c| !c.is_zero());
    let mut out = BTreeMap::new();
    while let Some((w, c)) = p.pop_first() {
        let Some(i) = table.index_of(&w) else {
            return Err(Error::Precondition(format!("not a Lie element: least word {} is not Lyndon", Word(w))));
        };
        for (v, e) in table.expansion(i).iter().skip(1) {
            let t = &c * e;
            match p.get_mut(v) {
                Some(x) => {
                    *x -= &t;
                    if x.is_zero() {
                        p.remove(v);
                    }
                }
                None => {
                    p.insert(v.clone(), -t);
                }
            }
        }
        out.insert(i, c);
    }
    Ok(out)
}

/// Lyndon coordinates of a Lie polynomial in `A_n`; fails if the input is
/// not in the image of the embedding.
pub fn extract(f: &AssocPoly) -> Result<LieElement> {
    let n = f.rank();
    let mut by_deg: BTreeMap<usize, Vec<(Vec<u8>, Rat)>> = BTreeMap::new();
    for (w, c) in f.terms() {
        if w.is_empty() {
            return Err(Error::Precondition("constant term in a Lie element".into()));
        }
        by_deg.entry(w.len()).or_default().push((w.0.clone(), c.clone()));
    }
    let mut u = LieElement::zero(n);
    for (d, ws) in by_deg {
        let c = extract_words(n, d, ws.into_iter())?;
        if !c.is_empty() {
            u.comps.insert(d, c);
        }
    }
    Ok(u)
}

/// A matrix acting on generators by columns: `x_i -> sum_j g[j][i] x_j`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct GLMatrix {
    n: usize,
    m: Vec<Rat>,
}

impl GLMatrix {
    pub fn identity(n: usize) -> Self {
        let mut m = vec![Rat::zero(); n * n];
        for i in 0..n {
            m[i * n + i] = Rat::one();
        }
        GLMatrix { n, m }
    }

    pub fn from_rows(rows: Vec<Vec<Rat>>) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Precondition("matrix must be square".into()));
        }
        Ok(GLMatrix { n, m: rows.into_iter().flatten().collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry at row `r`, column `c`, zero-based.
    pub fn get(&self, r: usize, c: usize) -> &Rat {
        &self.m[r * self.n + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Rat) {
        self.m[r * self.n + c] = v;
    }

    /// Matrix unit `E_{ij}` (1-based) of size `n`.
    pub fn unit(n: usize, i: usize, j: usize) -> Self {
        let mut g = GLMatrix { n, m: vec![Rat::zero(); n * n] };
        g.set(i - 1, j - 1, Rat::one());
        g
    }

    /// `y_i -> y_i + a y_j` (1-based).
    pub fn transvection(n: usize, i: usize, j: usize, a: Rat) -> Self {
        let mut g = Self::identity(n);
        g.set(j - 1, i - 1, a);
        g
    }

    /// Swap of `y_i` and `y_j` (1-based).
    pub fn swap(n: usize, i: usize, j: usize) -> Self {
        let mut rho: Vec<usize> = (1..=n).collect();
        rho.swap(i - 1, j - 1);
        Self::permutation(&rho)
    }

    /// `y_i -> y_{rho(i)}`, with `rho` given 1-based as `rho[i-1]`.
    pub fn permutation(rho: &[usize]) -> Self {
        let n = rho.len();
        let mut g = GLMatrix { n, m: vec![Rat::zero(); n * n] };
        for (i, &r) in rho.iter().enumerate() {
            g.set(r - 1, i, Rat::one());
        }
        g
    }

    pub fn mul(&self, o: &GLMatrix) -> GLMatrix {
        let n = self.n;
        let mut m = vec![Rat::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let b = o.get(k, j);
                    if !b.is_zero() {
                        m[i * n + j] += &(a * b);
                    }
                }
            }
        }
        GLMatrix { n, m }
    }

    pub fn inverse(&self) -> Result<GLMatrix> {
        let n = self.n;
        let mut a: Vec<Vec<Rat>> = (0..n).map(|i| (0..n).map(|j| self.get(i, j).clone()).collect()).collect();
        let mut inv: Vec<Vec<Rat>> = (0..n).map(|i| (0..n).map(|j| if i == j { Rat::one() } else { Rat::zero() }).collect()).collect();
        for c in 0..n {
            let p = (c..n).find(|&r| !a[r][c].is_zero()).ok_or(Error::Singular)?;
            a.swap(c, p);
            inv.swap(c, p);
            let s = a[c][c].recip();
            for j in 0..n {
                a[c][j] *= &s;
                inv[c][j] *= &s;
            }
            for r in 0..n {
                if r != c && !a[r][c].is_zero() {
                    let f = a[r][c].clone();
                    for j in 0..n {
                        let t = &a[c][j] * &f;
                        a[r][j] -= &t;
                        let t = &inv[c][j] * &f;
                        inv[r][j] -= &t;
                    }
                }
            }
        }
        GLMatrix::from_rows(inv)
    }

    /// Nonzero entries `(row, value)` of column `c` (zero-based).
    pub fn column(&self, c: usize) -> Vec<(usize, Rat)> {
        (0..self.n).filter(|&r| !self.get(r, c).is_zero()).map(|r| (r, self.get(r, c).clone())).collect()
    }
}

/// Element of `L_n`: degree -> (Lyndon index -> coefficient).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LieElement {
    n: usize,
    comps: BTreeMap<usize, BTreeMap<usize, Rat>>,
}

impl LieElement {
    pub fn zero(n: usize) -> Self {
        LieElement { n, comps: BTreeMap::new() }
    }

    /// The generator `x_i`, 1-based.
    pub fn generator(n: usize, i: usize) -> Result<Self> {
        if i == 0 || i > n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        Ok(Self::basis_element(n, 1, i - 1))
    }

    pub fn basis_element(n: usize, d: usize, idx: usize) -> Self {
        Self::from_coords(n, d, [(idx, Rat::one())])
    }

    pub fn from_coords(n: usize, d: usize, coords: impl IntoIterator<Item = (usize, Rat)>) -> Self {
        let mut u = Self::zero(n);
        for (i, c) in coords {
            u.add_coord(d, i, &c);
        }
        u
    }

    pub fn from_word(n: usize, w: &[u8]) -> Result<Self> {
        let idx = basis_table(n, w.len())
            .index_of(w)
            .ok_or_else(|| Error::Precondition(format!("{} is not a Lyndon word", Word(w.to_vec()))))?;
        Ok(Self::basis_element(n, w.len(), idx))
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    pub fn components(&self) -> &BTreeMap<usize, BTreeMap<usize, Rat>> {
        &self.comps
    }

    pub fn component(&self, d: usize) -> LieElement {
        let mut u = Self::zero(self.n);
        if let Some(c) = self.comps.get(&d) {
            u.comps.insert(d, c.clone());
        }
        u
    }

    pub fn coords(&self, d: usize) -> Option<&BTreeMap<usize, Rat>> {
        self.comps.get(&d)
    }

    pub fn is_zero(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        self.comps.keys().copied()
    }

    pub fn min_degree(&self) -> Option<usize> {
        self.comps.keys().next().copied()
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.comps.keys().next_back().copied()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.comps.len() <= 1
    }

    pub fn add_coord(&mut self, d: usize, i: usize, c: &Rat) {
        if c.is_zero() {
            return;
        }
        let comp = self.comps.entry(d).or_default();
        let e = comp.entry(i).or_default();
        *e += c;
        if e.is_zero() {
            comp.remove(&i);
            if comp.is_empty() {
                self.comps.remove(&d);
            }
        }
    }

    fn same_rank(&self, o: &LieElement) -> Result<()> {
        if self.n != o.n {
            return Err(Error::RankMismatch(self.n, o.n));
        }
        Ok(())
    }

    /// `self + c * o`; ranks must agree.
    pub fn add_scaled(&self, o: &LieElement, c: &Rat) -> LieElement {
        let mut r = self.clone();
        r.add_scaled_in_place(o, c);
        r
    }

    pub fn add_scaled_in_place(&mut self, o: &LieElement, c: &Rat) {
        debug_assert_eq!(self.n, o.n);
        if c.is_zero() {
            return;
        }
        for (d, comp) in &o.comps {
            for (i, x) in comp {
                self.add_coord(*d, *i, &(x * c));
            }
        }
    }

    pub fn add(&self, o: &LieElement) -> Result<LieElement> {
        self.same_rank(o)?;
        Ok(self.add_scaled(o, &Rat::one()))
    }

    pub fn sub(&self, o: &LieElement) -> Result<LieElement> {
        self.same_rank(o)?;
        Ok(self.add_scaled(o, &Rat::from_int(-1)))
    }

    pub fn scale(&self, c: &Rat) -> LieElement {
        Self::zero(self.n).add_scaled(self, c)
    }

    /// Drops components of degree greater than `maxdeg`.
    pub fn truncate(&self, maxdeg: usize) -> LieElement {
        LieElement { n: self.n, comps: self.comps.range(..=maxdeg).map(|(d, c)| (*d, c.clone())).collect() }
    }

    /// Lie bracket in Lyndon normal form.
    pub fn bracket(&self, o: &LieElement) -> Result<LieElement> {
        self.bracket_trunc(o, usize::MAX)
    }

    /// Lie bracket keeping only components of degree at most `maxdeg`.
    pub fn bracket_trunc(&self, o: &LieElement, maxdeg: usize) -> Result<LieElement> {
        self.same_rank(o)?;
        let mut acc: BTreeMap<usize, BTreeMap<usize, Rat>> = BTreeMap::new();
        for (du, cu) in &self.comps {
            for (dv, cv) in &o.comps {
                if du + dv > maxdeg {
                    continue;
                }
                let target = acc.entry(du + dv).or_default();
                for (iu, a) in cu {
                    for (iv, b) in cv {
                        let (v, flip) = basis_bracket(self.n, (*du, *iu), (*dv, *iv));
                        if v.is_empty() {
                            continue;
                        }
                        let ab = if flip { -(a * b) } else { a * b };
                        for (k, x) in v.iter() {
                            *target.entry(*k).or_default() += &(x * &ab);
                        }
                    }
                }
            }
        }
        let mut comps = BTreeMap::new();
        for (d, mut c) in acc {
            c.retain(|_, x| !x.is_zero());
            if !c.is_empty() {
                comps.insert(d, c);
            }
        }
        Ok(LieElement { n: self.n, comps })
    }

    /// Image in `A_n` under the standard embedding.
    pub fn expand(&self) -> AssocPoly {
        let mut acc: HashMap<Vec<u8>, Rat> = HashMap::new();
        for (d, comp) in &self.comps {
            let t = basis_table(self.n, *d);
            for (i, c) in comp {
                for (w, e) in t.expansion(*i).iter() {
                    *acc.entry(w.clone()).or_default() += &(c * e);
                }
            }
        }
        AssocPoly::from_terms(self.n, acc.into_iter().map(|(w, c)| (Word(w), c))).expect("letters in range")
    }

    /// Expansion of one homogeneous component as raw words.
    fn expand_component(&self, d: usize) -> HashMap<Vec<u8>, Rat> {
        let mut acc: HashMap<Vec<u8>, Rat> = HashMap::new();
        if let Some(comp) = self.comps.get(&d) {
            let t = basis_table(self.n, d);
            for (i, c) in comp {
                for (w, e) in t.expansion(*i).iter() {
                    *acc.entry(w.clone()).or_default() += &(c * e);
                }
            }
        }
        acc
    }

    /// Applies a linear substitution of generators to every word of the
    /// expansion and re-extracts coordinates.
    fn substitute(&self, columns: &[Vec<(u8, Rat)>], derivation: bool) -> Result<LieElement> {
        let mut out = LieElement::zero(self.n);
        for &d in self.comps.keys() {
            let src = self.expand_component(d);
            let mut acc: HashMap<Vec<u8>, Rat> = HashMap::new();
            for (w, c) in src {
                if c.is_zero() {
                    continue;
                }
                if derivation {
                    for (pos, &l) in w.iter().enumerate() {
                        for (j, g) in &columns[l as usize - 1] {
                            let mut v = w.clone();
                            v[pos] = *j;
                            *acc.entry(v).or_default() += &(&c * g);
                        }
                    }
                } else {
                    let mut partial: Vec<(Vec<u8>, Rat)> = vec![(Vec::with_capacity(d), c)];
                    for &l in &w {
                        let col = &columns[l as usize - 1];
                        let mut next = Vec::with_capacity(partial.len() * col.len());
                        for (p, x) in &partial {
                            for (j, g) in col {
                                let mut v = p.clone();
                                v.push(*j);
                                next.push((v, x * g));
                            }
                        }
                        partial = next;
                    }
                    for (v, x) in partial {
                        *acc.entry(v).or_default() += &x;
                    }
                }
            }
            let coords = extract_words(self.n, d, acc.into_iter().filter(|(_, c)| !c.is_zero()))?;
            for (i, c) in coords {
                out.add_coord(d, i, &c);
            }
        }
        Ok(out)
    }

    /// Algebra automorphism induced by `x_i -> sum_j g[j][i] x_j`.
    pub fn gl_act(&self, g: &GLMatrix) -> Result<LieElement> {
        if g.n != self.n {
            return Err(Error::RankMismatch(g.n, self.n));
        }
        let cols: Vec<Vec<(u8, Rat)>> = (0..self.n).map(|c| g.column(c).into_iter().map(|(r, v)| (r as u8 + 1, v)).collect()).collect();
        self.substitute(&cols, false)
    }

    /// Derivation sending `x_j` to `x_i` and the other generators to zero.
    pub fn derivation_act(&self, i: usize, j: usize) -> Result<LieElement> {
        if i == 0 || i > self.n || j == 0 || j > self.n {
            return Err(Error::IndexOutOfRange { index: i.max(j), n: self.n });
        }
        let mut cols: Vec<Vec<(u8, Rat)>> = vec![Vec::new(); self.n];
        cols[j - 1].push((i as u8, Rat::one()));
        self.substitute(&cols, true)
    }

    /// Writes the element as a combination of bracketed basis elements in
    /// the variable `var`.
    pub fn format(&self, var: char) -> String {
        let mut s = String::new();
        let mut first = true;
        for (d, comp) in &self.comps {
            let t = basis_table(self.n, *d);
            for (i, c) in comp {
                let neg = c.is_negative();
                let a = c.abs();
                s.push_str(match (first, neg) {
                    (true, true) => "-",
                    (true, false) => "",
                    (false, true) => " - ",
                    (false, false) => " + ",
                });
                first = false;
                if !a.is_one() {
                    s.push_str(&format!("{a}*"));
                }
                Bracketing::of(t.word(*i)).write(&mut s, var).expect("string write");
            }
        }
        if first {
            s.push('0');
        }
        s
    }
}

impl fmt::Display for LieElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.format('x'))
    }
}

/// `[a, b_1, ..., b_m]`, bracketing from the left.
pub fn left_normed(a: &LieElement, bs: &[LieElement]) -> Result<LieElement> {
    let mut acc = a.clone();
    for b in bs {
        acc = acc.bracket(b)?;
    }
    Ok(acc)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ratlin::binomial;
    use proptest::prelude::*;

    pub fn x(n: usize, i: usize) -> LieElement {
        LieElement::generator(n, i).unwrap()
    }

    fn words(n: usize, d: usize) -> Vec<Vec<u8>> {
        let mut out = vec![vec![]];
        for _ in 0..d {
            out = out.into_iter().flat_map(|w| (1..=n as u8).map(move |l| [w.clone(), vec![l]].concat())).collect();
        }
        out
    }

    /// Lyndon words by brute force: strictly least among their rotations.
    fn brute_lyndon_count(n: usize, d: usize) -> usize {
        words(n, d)
            .into_iter()
            .filter(|w| {
                (1..w.len()).all(|r| {
                    let mut v = w.clone();
                    v.rotate_left(r);
                    *w < v
                })
            })
            .count()
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(basis(4, 1).len(), 4);
        assert_eq!(basis(4, 2).len(), 6);
        assert_eq!(basis(4, 3).len(), 20);
        for n in 2usize..=5 {
            for d in 1..=8 {
                if (n as u64).pow(d as u32) > 400_000 {
                    continue;
                }
                assert_eq!(basis(n, d).len(), brute_lyndon_count(n, d), "n={n} d={d}");
            }
        }
    }

    #[test]
    fn basis_order_and_bracketing() {
        let b = basis(3, 3);
        let ws: Vec<Vec<u8>> = b.iter().map(|e| e.word.0.clone()).collect();
        let mut sorted = ws.clone();
        sorted.sort();
        assert_eq!(ws, sorted);
        let mut s = String::new();
        Bracketing::of(&[1, 1, 2]).write(&mut s, 'x').unwrap();
        assert_eq!(s, "[x1,[x1,x2]]");
    }

    #[test]
    fn expansions_are_unitriangular() {
        for d in 1..=6 {
            let t = basis_table(3, d);
            for i in 0..t.len() {
                let e = t.expansion(i);
                assert_eq!(e[0].0, t.word(i));
                assert!(e[0].1.is_one());
            }
        }
    }

    #[test]
    fn bracket_examples() {
        assert!(x(4, 1).bracket(&x(4, 1)).unwrap().is_zero());
        let b = x(4, 1).bracket(&x(4, 2)).unwrap();
        assert_eq!(b, LieElement::from_word(4, &[1, 2]).unwrap());
        let c = x(4, 2).bracket(&x(4, 1)).unwrap();
        assert_eq!(c, b.scale(&Rat::from_int(-1)));
        assert!(x(4, 1).bracket(&x(5, 1)).is_err());
    }

    #[test]
    fn left_normed_examples() {
        let a = x(4, 1);
        assert_eq!(left_normed(&a, &[]).unwrap(), a);
        assert_eq!(left_normed(&a, &[x(4, 2)]).unwrap(), a.bracket(&x(4, 2)).unwrap());
        let e = left_normed(&a, &[x(4, 3), x(4, 1)]).unwrap().expand();
        let expected = AssocPoly::from_terms(
            4,
            [
                (Word(vec![1, 3, 1]), Rat::from_int(2)),
                (Word(vec![1, 1, 3]), Rat::from_int(-1)),
                (Word(vec![3, 1, 1]), Rat::from_int(-1)),
            ],
        )
        .unwrap();
        assert_eq!(e, expected);
    }

    #[test]
    fn expand_generators() {
        assert_eq!(x(4, 1).expand(), AssocPoly::x(4, 1));
        let e = x(4, 1).bracket(&x(4, 2)).unwrap().expand();
        assert_eq!(e, AssocPoly::x(4, 1).commutator(&AssocPoly::x(4, 2)).unwrap());
    }

    #[test]
    fn nested_commutator_closed_form() {
        for m in 1..=5u64 {
            for j in 2..=4 {
                let bs: Vec<LieElement> = std::iter::once(x(4, j)).chain((0..m).map(|_| x(4, 1))).collect();
                let e = left_normed(&x(4, 1), &bs).unwrap().expand();
                let mut terms = vec![];
                for k in 1..=m + 1 {
                    let mut w = vec![1u8; k as usize];
                    w.push(j as u8);
                    w.extend(std::iter::repeat(1).take((m + 1 - k) as usize));
                    let sign = if k % 2 == 1 { Rat::one() } else { Rat::from_int(-1) };
                    terms.push((Word(w), &sign * &binomial(m + 1, k)));
                }
                let mut w = vec![j as u8];
                w.extend(std::iter::repeat(1).take(m as usize + 1));
                terms.push((Word(w), Rat::from_int(-1)));
                assert_eq!(e, AssocPoly::from_terms(4, terms).unwrap());
            }
        }
    }

    #[test]
    fn gl_examples() {
        let u = x(4, 1).bracket(&x(4, 3)).unwrap().bracket(&x(4, 2)).unwrap();
        assert_eq!(u.gl_act(&GLMatrix::identity(4)).unwrap(), u);
        let rho = [2, 3, 1, 4];
        let g = GLMatrix::permutation(&rho);
        for i in 1..=4 {
            assert_eq!(x(4, i).gl_act(&g).unwrap(), x(4, rho[i - 1]));
        }
        let t = GLMatrix::transvection(4, 1, 2, Rat::from_int(3));
        assert_eq!(x(4, 1).gl_act(&t).unwrap(), x(4, 1).add(&x(4, 2).scale(&Rat::from_int(3))).unwrap());
        assert_eq!(t.inverse().unwrap(), GLMatrix::transvection(4, 1, 2, Rat::from_int(-3)));
    }

    #[test]
    fn extract_rejects_non_lie() {
        assert!(extract(&AssocPoly::x(3, 1).mul(&AssocPoly::x(3, 2)).unwrap()).is_err());
    }

    pub fn homogeneous(n: usize, d: usize) -> impl Strategy<Value = LieElement> {
        let len = basis_table(n, d).len();
        prop::collection::vec((0..len, -3i64..=3), 1..5)
            .prop_map(move |cs| LieElement::from_coords(n, d, cs.into_iter().map(|(i, c)| (i, Rat::from_int(c)))))
    }

    pub fn element(n: usize, maxdeg: usize) -> impl Strategy<Value = LieElement> {
        prop::collection::vec((1..=maxdeg).prop_flat_map(move |d| homogeneous(n, d)), 1..3).prop_map(move |parts| {
            parts.into_iter().fold(LieElement::zero(n), |a, b| a.add(&b).unwrap())
        })
    }

    pub fn gl_matrix(n: usize) -> impl Strategy<Value = GLMatrix> {
        prop::collection::vec(prop::collection::vec(-2i64..=2, n), n)
            .prop_map(|rows| GLMatrix::from_rows(rows.into_iter().map(|r| r.into_iter().map(Rat::from_int).collect()).collect()).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 100, rng_algorithm: proptest::test_runner::RngAlgorithm::ChaCha, ..ProptestConfig::default() })]

        #[test]
        fn jacobi(a in homogeneous(3, 2), b in homogeneous(3, 1), c in homogeneous(3, 2)) {
            let t1 = a.bracket(&b).unwrap().bracket(&c).unwrap();
            let t2 = b.bracket(&c).unwrap().bracket(&a).unwrap();
            let t3 = c.bracket(&a).unwrap().bracket(&b).unwrap();
            prop_assert!(t1.add(&t2).unwrap().add(&t3).unwrap().is_zero());
        }

        #[test]
        fn round_trip(u in (2usize..=5).prop_flat_map(|n| element(n, if n <= 3 { 7 } else { 5 }))) {
            prop_assert_eq!(extract(&u.expand()).unwrap(), u);
        }

        #[test]
        fn expand_is_lie_hom(u in element(4, 3), v in element(4, 3)) {
            let lhs = u.bracket(&v).unwrap().expand();
            prop_assert_eq!(lhs, u.expand().commutator(&v.expand()).unwrap());
        }

        #[test]
        fn gl_commutes_with_bracket(g in gl_matrix(3), u in element(3, 2), v in element(3, 2)) {
            let lhs = u.bracket(&v).unwrap().gl_act(&g).unwrap();
            let rhs = u.gl_act(&g).unwrap().bracket(&v.gl_act(&g).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn gl_action_axiom(g in gl_matrix(3), h in gl_matrix(3), u in element(3, 3)) {
            let lhs = u.gl_act(&g.mul(&h)).unwrap();
            let rhs = u.gl_act(&h).unwrap().gl_act(&g).unwrap();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn derivation_rule(u in element(3, 2), v in element(3, 2), i in 1usize..=3, j in 1usize..=3) {
            let lhs = u.bracket(&v).unwrap().derivation_act(i, j).unwrap();
            let rhs = u.derivation_act(i, j).unwrap().bracket(&v).unwrap()
                .add(&u.bracket(&v.derivation_act(i, j).unwrap()).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
