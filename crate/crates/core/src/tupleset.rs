//! Explicit sets A ⊆ ({0,1}ⁿ)ᵖ with projection, restriction and extension,
//! aux-graph degrees, thickness, and the pruning procedure that turns
//! average-thickness into thickness.
//!
//! A p-tuple is packed into one `u64`: coordinate 0 occupies the most
//! significant `n` bits of the low `n·p`. Coordinates are 0-based in the API.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::gf2::{low_mask, BitVector};
use crate::scalar::{count_cutoff, Scalar};

/// Largest `n·p` for which [`TupleSet::full`] will materialize the cube.
pub const MAX_FULL_BITS: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TupleSetError {
    #[error("n*p = {0} bits does not fit the packed representation")]
    TooWide(usize),
    #[error("coordinate {coord} out of range for p = {p}")]
    Coordinate { coord: usize, p: usize },
    #[error("index set must be nonempty")]
    EmptyIndexSet,
    #[error("operation needs a nonempty set")]
    EmptySet,
    #[error("operation needs p >= 1")]
    NoCoordinates,
    #[error("element {0:#x} has bits beyond n*p")]
    BadElement(u64),
    #[error("not average-thick: coordinate {coord} has average degree {degree}")]
    NotAverageThick { coord: usize, degree: String },
    #[error("delta must lie in (0, 1)")]
    BadDelta,
    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
}

/// A packed p-tuple of n-bit coordinates.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PackedTuple {
    code: u64,
    n: u8,
    p: u8,
}

impl PackedTuple {
    pub fn new(code: u64, n: usize, p: usize) -> Self {
        PackedTuple {
            code,
            n: n as u8,
            p: p as u8,
        }
    }

    pub fn from_coords(coords: &[u64], n: usize) -> Self {
        let code = coords
            .iter()
            .fold(0u64, |acc, &c| shl(acc, n) | (c & low_mask(n)));
        PackedTuple::new(code, n, coords.len())
    }

    pub fn code(&self) -> u64 {
        self.code
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn p(&self) -> usize {
        self.p as usize
    }

    #[inline]
    pub fn coord(&self, i: usize) -> u64 {
        coord_of(self.code, self.n(), self.p(), i)
    }

    pub fn coords(&self) -> Vec<u64> {
        (0..self.p()).map(|i| self.coord(i)).collect()
    }

    pub fn to_bitvectors(&self) -> Vec<BitVector> {
        self.coords()
            .into_iter()
            .map(|c| BitVector::new(c, self.n()).expect("n in 1..=64"))
            .collect()
    }
}

impl fmt::Debug for PackedTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.to_bitvectors().iter().map(|b| b.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[inline]
fn shl(x: u64, by: usize) -> u64 {
    if by >= 64 {
        0
    } else {
        x << by
    }
}

#[inline]
fn shr(x: u64, by: usize) -> u64 {
    if by >= 64 {
        0
    } else {
        x >> by
    }
}

#[inline]
fn shift_of(n: usize, p: usize, i: usize) -> usize {
    (p - 1 - i) * n
}

#[inline]
fn coord_of(code: u64, n: usize, p: usize, i: usize) -> u64 {
    shr(code, shift_of(n, p, i)) & low_mask(n)
}

/// Sorted subset of coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new<I: IntoIterator<Item = usize>>(coords: I) -> Self {
        let set: BTreeSet<usize> = coords.into_iter().collect();
        IndexSet(set.into_iter().collect())
    }

    pub fn all(p: usize) -> Self {
        IndexSet((0..p).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn without(&self, i: usize) -> Self {
        IndexSet(self.0.iter().copied().filter(|&j| j != i).collect())
    }

    pub fn complement(&self, p: usize) -> Self {
        IndexSet((0..p).filter(|&j| !self.contains(j)).collect())
    }
}

/// Explicit set of packed p-tuples, sorted and duplicate-free.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct TupleSet {
    n: usize,
    p: usize,
    elems: Vec<u64>,
}

impl fmt::Debug for TupleSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "TupleSet(n={}, p={}, |A|={})",
            self.n,
            self.p,
            self.elems.len()
        )
    }
}

impl TupleSet {
    fn check_shape(n: usize, p: usize) -> Result<(), TupleSetError> {
        if n == 0 || n > 64 || n * p > 64 {
            return Err(TupleSetError::TooWide(n * p));
        }
        Ok(())
    }

    pub fn empty(n: usize, p: usize) -> Result<Self, TupleSetError> {
        Self::check_shape(n, p)?;
        Ok(TupleSet {
            n,
            p,
            elems: Vec::new(),
        })
    }

    /// The whole cube ({0,1}ⁿ)ᵖ.
    pub fn full(n: usize, p: usize) -> Result<Self, TupleSetError> {
        Self::check_shape(n, p)?;
        if n * p > MAX_FULL_BITS {
            return Err(TupleSetError::TooWide(n * p));
        }
        Ok(TupleSet {
            n,
            p,
            elems: (0..1u64 << (n * p)).collect(),
        })
    }

    pub fn from_codes<I: IntoIterator<Item = u64>>(
        n: usize,
        p: usize,
        codes: I,
    ) -> Result<Self, TupleSetError> {
        Self::check_shape(n, p)?;
        let mask = low_mask(n * p);
        let mut elems: Vec<u64> = codes.into_iter().collect();
        if let Some(&bad) = elems
            .iter()
            .find(|&&c| c & !mask != 0 || (p == 0 && c != 0))
        {
            return Err(TupleSetError::BadElement(bad));
        }
        elems.sort_unstable();
        elems.dedup();
        Ok(TupleSet { n, p, elems })
    }

    pub fn from_tuples(
        n: usize,
        p: usize,
        tuples: &[Vec<BitVector>],
    ) -> Result<Self, TupleSetError> {
        let mut codes = Vec::with_capacity(tuples.len());
        for t in tuples {
            if t.len() != p {
                return Err(TupleSetError::Length {
                    expected: p,
                    got: t.len(),
                });
            }
            if let Some(b) = t.iter().find(|b| b.len() != n) {
                return Err(TupleSetError::Length {
                    expected: n,
                    got: b.len(),
                });
            }
            let coords: Vec<u64> = t.iter().map(|b| b.bits()).collect();
            codes.push(PackedTuple::from_coords(&coords, n).code());
        }
        Self::from_codes(n, p, codes)
    }

    /// p = 1 set of single vectors.
    pub fn from_vectors(n: usize, vectors: &[BitVector]) -> Result<Self, TupleSetError> {
        if let Some(b) = vectors.iter().find(|b| b.len() != n) {
            return Err(TupleSetError::Length {
                expected: n,
                got: b.len(),
            });
        }
        Self::from_codes(n, 1, vectors.iter().map(|b| b.bits()))
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn codes(&self) -> &[u64] {
        &self.elems
    }

    pub fn iter(&self) -> impl Iterator<Item = PackedTuple> + '_ {
        let (n, p) = (self.n, self.p);
        self.elems.iter().map(move |&c| PackedTuple::new(c, n, p))
    }

    #[inline]
    pub fn contains_code(&self, code: u64) -> bool {
        self.elems.binary_search(&code).is_ok()
    }

    #[inline]
    pub fn coord(&self, code: u64, i: usize) -> u64 {
        coord_of(code, self.n, self.p, i)
    }

    /// log₂ of the cube size, n·p.
    pub fn log2_universe(&self) -> usize {
        self.n * self.p
    }

    /// |A| / 2^{np}.
    pub fn density<S: Scalar>(&self) -> S {
        S::from_count(self.len() as u64) / S::pow2(self.log2_universe() as i32)
    }

    fn check_coord(&self, i: usize) -> Result<(), TupleSetError> {
        if i >= self.p {
            return Err(TupleSetError::Coordinate {
                coord: i,
                p: self.p,
            });
        }
        Ok(())
    }

    fn check_index_set(&self, coords: &[usize]) -> Result<(), TupleSetError> {
        coords.iter().try_for_each(|&i| self.check_coord(i))
    }

    /// A_I. Errors on an empty index set.
    pub fn project(&self, index: &IndexSet) -> Result<TupleSet, TupleSetError> {
        if index.is_empty() {
            return Err(TupleSetError::EmptyIndexSet);
        }
        self.check_index_set(index.as_slice())?;
        Ok(self.project_onto(index.as_slice()))
    }

    /// A_I for any (possibly empty) sorted coordinate list; projecting a
    /// nonempty set onto no coordinates yields the one-element set {()}.
    pub(crate) fn project_onto(&self, coords: &[usize]) -> TupleSet {
        if coords.len() == self.p {
            return self.clone();
        }
        let n = self.n;
        let mut elems: Vec<u64> = self
            .elems
            .iter()
            .map(|&c| {
                coords
                    .iter()
                    .fold(0u64, |acc, &i| shl(acc, n) | self.coord(c, i))
            })
            .collect();
        elems.sort_unstable();
        elems.dedup();
        TupleSet {
            n,
            p: coords.len(),
            elems,
        }
    }

    /// Projection code of one element onto the given coordinates.
    #[inline]
    pub(crate) fn project_code(&self, code: u64, coords: &[usize]) -> u64 {
        coords
            .iter()
            .fold(0u64, |acc, &i| shl(acc, self.n) | self.coord(code, i))
    }

    /// A^{i,S} = { a ∈ A : aᵢ ∈ S }.
    pub fn restrict(&self, i: usize, s: &[BitVector]) -> Result<TupleSet, TupleSetError> {
        if let Some(b) = s.iter().find(|b| b.len() != self.n) {
            return Err(TupleSetError::Length {
                expected: self.n,
                got: b.len(),
            });
        }
        let allowed: HashSet<u64> = s.iter().map(|b| b.bits()).collect();
        self.restrict_by(i, |v| allowed.contains(&v))
    }

    /// A^{i,S} with S given as a membership predicate on coordinate words.
    pub fn restrict_by<F: Fn(u64) -> bool>(
        &self,
        i: usize,
        member: F,
    ) -> Result<TupleSet, TupleSetError> {
        self.check_coord(i)?;
        Ok(self.filter(|c| member(self.coord(c, i))))
    }

    pub(crate) fn filter<F: Fn(u64) -> bool>(&self, keep: F) -> TupleSet {
        TupleSet {
            n: self.n,
            p: self.p,
            elems: self.elems.iter().copied().filter(|&c| keep(c)).collect(),
        }
    }

    /// Ext(a′) = { a″ : a′ ×_I a″ ∈ A }, as a set over the complementary
    /// coordinates J = [p] ∖ I (in increasing order).
    pub fn extensions(&self, index: &IndexSet, partial: &[u64]) -> Result<TupleSet, TupleSetError> {
        self.check_index_set(index.as_slice())?;
        if partial.len() != index.len() {
            return Err(TupleSetError::Length {
                expected: index.len(),
                got: partial.len(),
            });
        }
        let target = PackedTuple::from_coords(partial, self.n).code();
        let rest = index.complement(self.p);
        let mut elems: Vec<u64> = self
            .elems
            .iter()
            .filter(|&&c| self.project_code(c, index.as_slice()) == target)
            .map(|&c| self.project_code(c, rest.as_slice()))
            .collect();
        elems.sort_unstable();
        elems.dedup();
        Ok(TupleSet {
            n: self.n,
            p: rest.len(),
            elems,
        })
    }

    /// Code with coordinate `i` zeroed: identifies the right node a_{≠i}
    /// of the aux graph G(A, i), and orders the same way.
    #[inline]
    fn right_node(&self, code: u64, i: usize) -> u64 {
        code & !shl(low_mask(self.n), shift_of(self.n, self.p, i))
    }

    /// Right-degrees of G(A, i), sorted by right node.
    pub fn right_degrees(&self, i: usize) -> Result<Vec<(u64, u64)>, TupleSetError> {
        self.check_coord(i)?;
        let mut keys: Vec<u64> = self.elems.iter().map(|&c| self.right_node(c, i)).collect();
        keys.sort_unstable();
        let mut out: Vec<(u64, u64)> = Vec::new();
        for k in keys {
            match out.last_mut() {
                Some((last, cnt)) if *last == k => *cnt += 1,
                _ => out.push((k, 1)),
            }
        }
        Ok(out)
    }

    /// (|A|, |A_{≠i}|), the exact numerator and denominator of d_avg(A, i).
    pub fn avg_degree_parts(&self, i: usize) -> Result<(u64, u64), TupleSetError> {
        self.check_coord(i)?;
        if self.is_empty() {
            return Err(TupleSetError::EmptySet);
        }
        Ok((self.len() as u64, self.right_degrees(i)?.len() as u64))
    }

    /// d_avg(A, i) = |A| / |A_{≠i}|.
    pub fn avg_degree<S: Scalar>(&self, i: usize) -> Result<S, TupleSetError> {
        let (num, den) = self.avg_degree_parts(i)?;
        Ok(S::from_count(num) / S::from_count(den))
    }

    /// d_min(A, i) = min over right nodes of |Ext(a′)|.
    pub fn min_degree(&self, i: usize) -> Result<u64, TupleSetError> {
        if self.is_empty() {
            return Err(TupleSetError::EmptySet);
        }
        Ok(self
            .right_degrees(i)?
            .iter()
            .map(|&(_, d)| d)
            .min()
            .expect("nonempty"))
    }

    /// τ-thick: every right-degree of every G(A, i) is at least τ·2ⁿ. With
    /// p = 1 this reads |A| ≥ τ·2ⁿ; the empty set (and p = 0) is thick.
    pub fn is_thick<S: Scalar>(&self, tau: &S) -> bool {
        let cutoff = count_cutoff(tau, 1u64 << self.n.min(63));
        self.is_thick_at(cutoff)
    }

    /// Thick with an integer degree cutoff.
    pub fn is_thick_at(&self, min_degree: u64) -> bool {
        if self.is_empty() {
            return true;
        }
        (0..self.p).all(|i| self.min_degree(i).expect("checked") >= min_degree)
    }

    /// φ-average-thick: d_avg(A, i) ≥ φ·2ⁿ for every i. Empty sets count as
    /// average-thick.
    pub fn is_avg_thick<S: Scalar>(&self, phi: &S) -> bool {
        self.first_thin_coord(phi).is_none()
    }

    /// Smallest coordinate whose average degree is below φ·2ⁿ.
    pub fn first_thin_coord<S: Scalar>(&self, phi: &S) -> Option<usize> {
        if self.is_empty() {
            return None;
        }
        let unit = S::pow2(self.n as i32);
        (0..self.p).find(|&i| {
            let (num, den) = self.avg_degree_parts(i).expect("checked");
            S::from_count(num) < phi.clone() * unit.clone() * S::from_count(den)
        })
    }

    /// Repeatedly delete every extension of the lexicographically smallest
    /// right node (i, a′) whose nonzero degree is below `min_degree`, until
    /// none is left. The result is thick at that cutoff.
    pub fn prune_below(&self, min_degree: u64) -> TupleSet {
        if self.is_empty() || self.p == 0 {
            return self.clone();
        }
        let p = self.p;
        let mut live: HashSet<u64> = self.elems.iter().copied().collect();
        let mut degrees: Vec<HashMap<u64, u64>> = vec![HashMap::new(); p];
        for &c in &self.elems {
            for (i, deg) in degrees.iter_mut().enumerate() {
                *deg.entry(self.right_node(c, i)).or_default() += 1;
            }
        }
        let mut violators: Vec<BTreeSet<u64>> = degrees
            .iter()
            .map(|deg| {
                deg.iter()
                    .filter(|&(_, &d)| d > 0 && d < min_degree)
                    .map(|(&k, _)| k)
                    .collect()
            })
            .collect();

        while let Some(i) = violators.iter().position(|v| !v.is_empty()) {
            let node = *violators[i].iter().next().expect("nonempty");
            let shift = shift_of(self.n, p, i);
            for v in 0..(1u64 << self.n) {
                let c = node | shl(v, shift);
                if !live.remove(&c) {
                    continue;
                }
                for j in 0..p {
                    let k = self.right_node(c, j);
                    let d = degrees[j].get_mut(&k).expect("tracked");
                    *d -= 1;
                    if *d == 0 {
                        violators[j].remove(&k);
                    } else if *d < min_degree {
                        violators[j].insert(k);
                    }
                }
            }
            debug_assert!(!violators[i].contains(&node));
        }
        let mut elems: Vec<u64> = live.into_iter().collect();
        elems.sort_unstable();
        TupleSet {
            n: self.n,
            p: self.p,
            elems,
        }
    }

    /// Given φ-average-thick A and δ ∈ (0,1), returns A′ ⊆ A that is
    /// (δφ/p)-thick with |A′| ≥ (1−δ)|A|.
    pub fn make_thick<S: Scalar>(&self, phi: &S, delta: &S) -> Result<TupleSet, TupleSetError> {
        if !(S::zero() < *delta && *delta < S::one()) {
            return Err(TupleSetError::BadDelta);
        }
        if let Some(coord) = self.first_thin_coord(phi) {
            let (num, den) = self.avg_degree_parts(coord).expect("nonempty");
            return Err(TupleSetError::NotAverageThick {
                coord,
                degree: format!("{num}/{den}"),
            });
        }
        if self.p == 0 {
            return Ok(self.clone());
        }
        let factor = delta.clone() * phi.clone() / S::from_count(self.p as u64);
        Ok(self.prune_below(count_cutoff(&factor, 1u64 << self.n)))
    }

    /// Elements whose projection onto `coords` lies in `image`.
    pub(crate) fn preimage(&self, coords: &[usize], image: &TupleSet) -> TupleSet {
        self.filter(|c| image.contains_code(self.project_code(c, coords)))
    }

    /// Split by a predicate: (false-part, true-part).
    pub(crate) fn split<F: Fn(PackedTuple) -> bool>(&self, pred: F) -> (TupleSet, TupleSet) {
        let (mut zero, mut one) = (Vec::new(), Vec::new());
        for &c in &self.elems {
            if pred(PackedTuple::new(c, self.n, self.p)) {
                one.push(c);
            } else {
                zero.push(c);
            }
        }
        (
            TupleSet {
                n: self.n,
                p: self.p,
                elems: zero,
            },
            TupleSet {
                n: self.n,
                p: self.p,
                elems: one,
            },
        )
    }
}

/// Rectangle A × B of Alice and Bob tuple sets over the same p.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rect {
    pub alice: TupleSet,
    pub bob: TupleSet,
}

impl Rect {
    pub fn new(alice: TupleSet, bob: TupleSet) -> Result<Self, TupleSetError> {
        if alice.p() != bob.p() {
            return Err(TupleSetError::Length {
                expected: alice.p(),
                got: bob.p(),
            });
        }
        Ok(Rect { alice, bob })
    }

    pub fn p(&self) -> usize {
        self.alice.p()
    }

    pub fn is_empty(&self) -> bool {
        self.alice.is_empty() || self.bob.is_empty()
    }

    pub fn is_thick<S: Scalar>(&self, tau: &S) -> bool {
        self.alice.is_thick(tau) && self.bob.is_thick(tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Rational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn set(n: usize, p: usize, tuples: &[&[u64]]) -> TupleSet {
        TupleSet::from_codes(
            n,
            p,
            tuples.iter().map(|t| PackedTuple::from_coords(t, n).code()),
        )
        .unwrap()
    }

    fn bvs(n: usize, vs: &[u64]) -> Vec<BitVector> {
        vs.iter().map(|&v| BitVector::new(v, n).unwrap()).collect()
    }

    fn example() -> TupleSet {
        set(1, 2, &[&[0, 0], &[0, 1], &[1, 1]])
    }

    #[test]
    fn project_examples() {
        let a = example();
        assert_eq!(a.project(&IndexSet::all(2)).unwrap(), a);
        assert_eq!(
            a.project(&IndexSet::new([1])).unwrap(),
            set(1, 1, &[&[0], &[1]])
        );
        let full = TupleSet::full(2, 3).unwrap();
        assert_eq!(
            full.project(&IndexSet::new([0, 2])).unwrap(),
            TupleSet::full(2, 2).unwrap()
        );
        assert_eq!(
            a.project(&IndexSet::default()),
            Err(TupleSetError::EmptyIndexSet)
        );
        assert!(a.project(&IndexSet::new([2])).is_err());
    }

    #[test]
    fn restrict_examples() {
        let a = example();
        assert_eq!(a.restrict(0, &bvs(1, &[0, 1])).unwrap(), a);
        assert!(a.restrict(0, &[]).unwrap().is_empty());
        assert_eq!(
            a.restrict(0, &bvs(1, &[0])).unwrap(),
            set(1, 2, &[&[0, 0], &[0, 1]])
        );
    }

    #[test]
    fn extension_examples() {
        let a = example();
        assert_eq!(
            a.extensions(&IndexSet::new([0]), &[0]).unwrap(),
            set(1, 1, &[&[0], &[1]])
        );
        let full = TupleSet::full(2, 2).unwrap();
        assert_eq!(
            full.extensions(&IndexSet::new([1]), &[3]).unwrap(),
            TupleSet::full(2, 1).unwrap()
        );
        let b = set(1, 2, &[&[0, 0]]);
        assert!(b.extensions(&IndexSet::new([0]), &[1]).unwrap().is_empty());
    }

    #[test]
    fn degree_examples() {
        let full = TupleSet::full(2, 2).unwrap();
        assert_eq!(
            full.avg_degree::<Rational>(0).unwrap(),
            Rational::from_integer(4)
        );
        assert_eq!(full.min_degree(1).unwrap(), 4);
        let single = set(2, 2, &[&[1, 2]]);
        assert_eq!(
            single.avg_degree::<Rational>(0).unwrap(),
            Rational::from_integer(1)
        );
        assert_eq!(single.min_degree(0).unwrap(), 1);
        let a = set(1, 2, &[&[0, 0], &[1, 0], &[1, 1]]);
        assert_eq!(a.avg_degree::<Rational>(0).unwrap(), Rational::new(3, 2));
        assert_eq!(a.min_degree(0).unwrap(), 1);
        let empty = TupleSet::empty(1, 2).unwrap();
        assert_eq!(
            empty.avg_degree::<Rational>(0),
            Err(TupleSetError::EmptySet)
        );
        assert_eq!(empty.min_degree(0), Err(TupleSetError::EmptySet));
    }

    #[test]
    fn thickness_examples() {
        assert!(TupleSet::full(3, 2)
            .unwrap()
            .is_thick(&Rational::from_integer(1)));
        assert!(TupleSet::empty(3, 2)
            .unwrap()
            .is_thick(&Rational::from_integer(1)));
        let a = set(1, 2, &[&[0, 0], &[1, 0], &[1, 1]]);
        assert!(!a.is_thick(&Rational::new(3, 4)));
        assert!(a.is_thick(&Rational::new(1, 2)));
        // p = 1: plain size test
        let s = set(2, 1, &[&[0], &[3]]);
        assert!(s.is_thick(&Rational::new(1, 2)));
        assert!(!s.is_thick(&Rational::new(3, 4)));
        assert!(s.is_thick(&0.5f64));
    }

    fn pendant_example() -> TupleSet {
        let mut tuples: Vec<[u64; 2]> = Vec::new();
        for x in 0..4u64 {
            for y in 0..3u64 {
                tuples.push([x, y]);
            }
        }
        tuples.push([3, 3]);
        TupleSet::from_codes(
            2,
            2,
            tuples.iter().map(|t| PackedTuple::from_coords(t, 2).code()),
        )
        .unwrap()
    }

    #[test]
    fn make_thick_pendant_row() {
        let a = pendant_example();
        assert_eq!(a.len(), 13);
        let phi = Rational::new(3, 4);
        let delta = Rational::new(1, 2);
        assert!(a.is_avg_thick(&phi));
        // δφ/p · 2ⁿ = 3/4: the pendant right node (y = 11) has degree 1 and survives
        assert_eq!(a.make_thick(&phi, &delta).unwrap(), a);
        // at cutoff 2 (δφ·2ⁿ = 1.5 without the 1/p) exactly (11,11) goes
        let pruned = a.prune_below(2);
        assert_eq!(pruned.len(), 12);
        assert!(!pruned.contains_code(PackedTuple::from_coords(&[3, 3], 2).code()));
        assert!(pruned.is_thick_at(2));
    }

    #[test]
    fn make_thick_trivial_cases() {
        let full = TupleSet::full(2, 3).unwrap();
        let half = Rational::new(1, 2);
        assert_eq!(full.make_thick(&half, &half).unwrap(), full);
        let thin = set(2, 2, &[&[0, 0]]);
        assert!(matches!(
            thin.make_thick(&half, &half),
            Err(TupleSetError::NotAverageThick { coord: 0, .. })
        ));
        assert_eq!(
            full.make_thick(&half, &Rational::from_integer(1)),
            Err(TupleSetError::BadDelta)
        );
    }

    /// Coordinate-list reference implementation for cross-checking.
    struct Naive {
        tuples: Vec<Vec<u64>>,
    }

    impl Naive {
        fn of(a: &TupleSet) -> Self {
            Naive {
                tuples: a.iter().map(|t| t.coords()).collect(),
            }
        }

        fn project(&self, coords: &[usize]) -> BTreeSet<Vec<u64>> {
            self.tuples
                .iter()
                .map(|t| coords.iter().map(|&i| t[i]).collect())
                .collect()
        }

        fn degrees(&self, i: usize) -> BTreeMap<Vec<u64>, u64> {
            let mut m = BTreeMap::new();
            for t in &self.tuples {
                let mut key = t.clone();
                key.remove(i);
                *m.entry(key).or_insert(0) += 1;
            }
            m
        }
    }

    fn random_set(rng: &mut ChaCha8Rng, n: usize, p: usize, density: f64) -> TupleSet {
        let codes = (0..1u64 << (n * p)).filter(|_| rng.gen_bool(density));
        TupleSet::from_codes(n, p, codes).unwrap()
    }

    #[test]
    fn agrees_with_naive_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(1..=3);
            let p = rng.gen_range(1..=4).min(12 / n);
            let density = rng.gen_range(0.05..0.95);
            let a = random_set(&mut rng, n, p, density);
            if a.is_empty() {
                continue;
            }
            let naive = Naive::of(&a);
            for i in 0..p {
                let degs = naive.degrees(i);
                let (num, den) = a.avg_degree_parts(i).unwrap();
                assert_eq!(num as usize, naive.tuples.len());
                assert_eq!(den as usize, degs.len());
                assert_eq!(a.min_degree(i).unwrap(), *degs.values().min().unwrap());
                let ours: Vec<u64> = a
                    .right_degrees(i)
                    .unwrap()
                    .iter()
                    .map(|&(_, d)| d)
                    .collect();
                let theirs: Vec<u64> = degs.values().copied().collect();
                assert_eq!(ours, theirs, "degree sequence in right-node order");
            }
            let coords: Vec<usize> = (0..p).filter(|_| rng.gen_bool(0.5)).collect();
            if !coords.is_empty() {
                let proj = a.project(&IndexSet::new(coords.clone())).unwrap();
                let expect: BTreeSet<Vec<u64>> = proj.iter().map(|t| t.coords()).collect();
                assert_eq!(expect, naive.project(&coords));
            }
        }
    }

    #[test]
    fn restrict_project_consistency_lemma_3_5() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        while checked < 1000 {
            let n = rng.gen_range(1..=3);
            let p = rng.gen_range(2..=3);
            let density = rng.gen_range(0.3..1.0);
            let a = random_set(&mut rng, n, p, density);
            let tau = Rational::new(rng.gen_range(1..=4), 8);
            let a = a.prune_below(count_cutoff(&tau, 1 << n));
            if a.is_empty() {
                continue;
            }
            assert!(a.is_thick(&tau));
            let i = rng.gen_range(0..p);
            let s: Vec<u64> = (0..1u64 << n).filter(|_| rng.gen_bool(0.4)).collect();
            let restricted = a.restrict_by(i, |v| s.contains(&v)).unwrap();
            let rest = IndexSet::all(p).without(i);
            let proj = restricted.project(&rest).unwrap();
            assert!(proj.is_thick(&tau), "restriction lost thickness");
            let column = a.project(&IndexSet::new([i])).unwrap();
            let meets = column.codes().iter().any(|v| s.contains(v));
            assert_eq!(proj.is_empty(), !meets);
            checked += 1;
        }
    }

    #[test]
    fn make_thick_contract_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        while checked < 300 {
            let n = rng.gen_range(1..=3);
            let p = rng.gen_range(2..=3);
            let density = rng.gen_range(0.2..1.0);
            let a = random_set(&mut rng, n, p, density);
            let phi = Rational::new(rng.gen_range(1..=8), 8);
            if a.is_empty() || !a.is_avg_thick(&phi) {
                continue;
            }
            let delta = Rational::new(1, 2);
            let out = a.make_thick(&phi, &delta).unwrap();
            let target = delta * phi / Rational::from_integer(p as i128);
            assert!(out.is_thick(&target));
            assert!(2 * out.len() >= a.len());
            assert!(out.codes().iter().all(|&c| a.contains_code(c)));
            checked += 1;
        }
    }

    #[test]
    fn p_one_degrees_are_sizes() {
        let s = set(3, 1, &[&[1], &[4], &[6]]);
        assert_eq!(s.min_degree(0).unwrap(), 3);
        assert_eq!(
            s.avg_degree::<Rational>(0).unwrap(),
            Rational::from_integer(3)
        );
        assert_eq!(s.prune_below(4).len(), 0);
        assert_eq!(s.prune_below(3), s);
    }
}
