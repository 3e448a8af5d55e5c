//! Linear algebra over 𝔽₂ on vectors of at most 64 bits.
//!
//! A [`BitVector`] of length `n` is stored in the low `n` bits of a `u64`,
//! leftmost character most significant: `"0010"` is the integer 2. Subspaces
//! are kept in canonical reduced row-echelon form so equal subspaces compare
//! equal.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use thiserror::Error;

/// Largest ambient dimension accepted by [`enumerate_subspaces`].
pub const MAX_ENUM_DIM: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Gf2Error {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("bit length {0} outside 1..=64")]
    BadLength(usize),
    #[error("dimension {d} exceeds ambient dimension {n}")]
    BadDimension { n: usize, d: usize },
    #[error("subspace enumeration limited to n <= {MAX_ENUM_DIM}, got {0}")]
    TooLarge(usize),
    #[error("vector must have odd Hamming weight")]
    EvenWeight,
    #[error("subspace is not contained in the orthogonal complement of the given vector")]
    NotInPerp,
    #[error("invalid bit string {0:?}")]
    Parse(String),
}

#[inline]
pub(crate) fn low_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Element of {0,1}ⁿ, 1 ≤ n ≤ 64.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    bits: u64,
    len: u8,
}

impl BitVector {
    pub fn new(bits: u64, len: usize) -> Result<Self, Gf2Error> {
        if len == 0 || len > 64 {
            return Err(Gf2Error::BadLength(len));
        }
        Ok(BitVector {
            bits: bits & low_mask(len),
            len: len as u8,
        })
    }

    pub fn zero(len: usize) -> Result<Self, Gf2Error> {
        Self::new(0, len)
    }

    /// Builds from bits given left to right.
    pub fn from_bits(bits: &[bool]) -> Result<Self, Gf2Error> {
        let word = bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        Self::new(word, bits.len())
    }

    #[inline]
    pub fn bits(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bit at position `i`, counted from the left starting at 0.
    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(
            i < self.len(),
            "bit index {i} out of range for length {}",
            self.len
        );
        (self.bits >> (self.len() - 1 - i)) & 1 == 1
    }

    #[inline]
    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn complement(&self) -> Self {
        BitVector {
            bits: !self.bits & low_mask(self.len()),
            len: self.len,
        }
    }

    pub fn xor(&self, other: &Self) -> Result<Self, Gf2Error> {
        self.check_len(other)?;
        Ok(BitVector {
            bits: self.bits ^ other.bits,
            len: self.len,
        })
    }

    pub fn distance(&self, other: &Self) -> Result<u32, Gf2Error> {
        self.check_len(other)?;
        Ok((self.bits ^ other.bits).count_ones())
    }

    fn check_len(&self, other: &Self) -> Result<(), Gf2Error> {
        if self.len != other.len {
            return Err(Gf2Error::LengthMismatch(self.len(), other.len()));
        }
        Ok(())
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

impl FromStr for BitVector {
    type Err = Gf2Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Gf2Error::Parse(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_bits(&bits)
    }
}

/// Inner product over 𝔽₂.
pub fn dot(x: &BitVector, y: &BitVector) -> Result<bool, Gf2Error> {
    x.check_len(y)?;
    Ok(parity(x.bits & y.bits))
}

#[inline]
pub(crate) fn parity(word: u64) -> bool {
    word.count_ones() & 1 == 1
}

/// Subspace of 𝔽₂ⁿ in canonical reduced row-echelon form.
///
/// Rows are sorted by leading (most significant) bit, descending, and every
/// pivot column is zero in all other rows.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubspaceBasis {
    n: usize,
    rows: Vec<u64>,
}

impl SubspaceBasis {
    pub fn zero(n: usize) -> Self {
        SubspaceBasis {
            n,
            rows: Vec::new(),
        }
    }

    pub fn full(n: usize) -> Self {
        SubspaceBasis {
            n,
            rows: (0..n).rev().map(|b| 1u64 << b).collect(),
        }
    }

    /// Span of arbitrary words (low `n` bits used).
    pub fn span<I: IntoIterator<Item = u64>>(n: usize, vectors: I) -> Self {
        let mask = low_mask(n);
        let mut rows: Vec<u64> = Vec::new();
        for v in vectors {
            let mut v = v & mask;
            for &r in &rows {
                if v & leading_bit(r) != 0 {
                    v ^= r;
                }
            }
            if v != 0 {
                // v is zero on every existing pivot; clear its pivot from the other rows
                let lead = leading_bit(v);
                for r in rows.iter_mut() {
                    if *r & lead != 0 {
                        *r ^= v;
                    }
                }
                rows.push(v);
            }
        }
        rows.sort_unstable_by(|a, b| b.cmp(a));
        SubspaceBasis { n, rows }
    }

    pub fn from_vectors(n: usize, vectors: &[BitVector]) -> Result<Self, Gf2Error> {
        for v in vectors {
            if v.len() != n {
                return Err(Gf2Error::LengthMismatch(v.len(), n));
            }
        }
        Ok(Self::span(n, vectors.iter().map(|v| v.bits())))
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[u64] {
        &self.rows
    }

    pub fn basis(&self) -> Vec<BitVector> {
        self.rows
            .iter()
            .map(|&r| BitVector {
                bits: r,
                len: self.n as u8,
            })
            .collect()
    }

    /// Clears every pivot bit of `v`; zero iff `v` lies in the span.
    #[inline]
    pub fn reduce(&self, mut v: u64) -> u64 {
        for &r in &self.rows {
            if v & leading_bit(r) != 0 {
                v ^= r;
            }
        }
        v
    }

    #[inline]
    pub fn contains_word(&self, v: u64) -> bool {
        self.reduce(v & low_mask(self.n)) == 0 && v & !low_mask(self.n) == 0
    }

    pub fn contains(&self, v: &BitVector) -> bool {
        v.len() == self.n && self.contains_word(v.bits())
    }

    pub fn is_subspace_of(&self, other: &SubspaceBasis) -> bool {
        self.n == other.n && self.rows.iter().all(|&r| other.contains_word(r))
    }

    pub fn size(&self) -> u128 {
        1u128 << self.dim()
    }

    /// All 2^dim elements, in Gray-code order starting from 0.
    pub fn elements(&self) -> impl Iterator<Item = u64> + '_ {
        gray_span(0, &self.rows)
    }

    /// Image of this subspace under the linear map sending the `k`-th
    /// standard basis vector (bit `k` of the word, counted from the least
    /// significant end) to `images[k]`, canonicalized in 𝔽₂^`target_n`.
    pub fn map(&self, images: &[u64], target_n: usize) -> SubspaceBasis {
        let mapped = self.rows.iter().map(|&r| apply_linear(r, images));
        SubspaceBasis::span(target_n, mapped)
    }

    /// V^⊥ = { u : u·v = 0 for all v ∈ V }.
    pub fn orthogonal_complement(&self) -> SubspaceBasis {
        let pivots: u64 = self
            .rows
            .iter()
            .map(|&r| leading_bit(r))
            .fold(0, |a, b| a | b);
        let mut kernel = Vec::with_capacity(self.n - self.dim());
        for col in (0..self.n).rev() {
            let bit = 1u64 << col;
            if pivots & bit != 0 {
                continue;
            }
            let mut v = bit;
            for &r in &self.rows {
                if r & bit != 0 {
                    v |= leading_bit(r);
                }
            }
            kernel.push(v);
        }
        SubspaceBasis::span(self.n, kernel)
    }
}

impl fmt::Debug for SubspaceBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<String> = self.basis().iter().map(|b| b.to_string()).collect();
        write!(f, "span{{{}}}", rows.join(", "))
    }
}

#[inline]
fn leading_bit(r: u64) -> u64 {
    debug_assert!(r != 0);
    1u64 << (63 - r.leading_zeros())
}

fn apply_linear(v: u64, images: &[u64]) -> u64 {
    let mut out = 0;
    let mut w = v;
    while w != 0 {
        let k = w.trailing_zeros() as usize;
        out ^= images[k];
        w &= w - 1;
    }
    out
}

fn gray_span(offset: u64, rows: &[u64]) -> impl Iterator<Item = u64> + '_ {
    let total: u64 = 1u64 << rows.len();
    let mut current = offset;
    (0..total).map(move |step| {
        if step > 0 {
            current ^= rows[step.trailing_zeros() as usize];
        }
        current
    })
}

/// W' = { v ∈ a^⊥ : v·w = 0 for all w ∈ W }, the orthogonal complement of
/// `w` taken inside `a^⊥`. Requires odd-weight `a` and W ⊆ a^⊥; then
/// dim W + dim W' = n − 1.
pub fn relative_complement(w: &SubspaceBasis, a: &BitVector) -> Result<SubspaceBasis, Gf2Error> {
    if a.len() != w.ambient_dim() {
        return Err(Gf2Error::LengthMismatch(a.len(), w.ambient_dim()));
    }
    if a.weight().is_multiple_of(2) {
        return Err(Gf2Error::EvenWeight);
    }
    if w.rows.iter().any(|&r| parity(r & a.bits())) {
        return Err(Gf2Error::NotInPerp);
    }
    // v ⊥ W and v ⊥ a  ⟺  v ∈ (W + ⟨a⟩)^⊥
    let extended =
        SubspaceBasis::span(w.n, w.rows.iter().copied().chain(std::iter::once(a.bits())));
    Ok(extended.orthogonal_complement())
}

/// a^⊥ for a nonzero `a`.
pub fn perp_of(a: &BitVector) -> SubspaceBasis {
    SubspaceBasis::span(a.len(), [a.bits()]).orthogonal_complement()
}

/// Uniform d-dimensional subspace of 𝔽₂ⁿ: draw a uniformly random d×n
/// matrix, reject until full rank, return its canonical rowspace. Every
/// d-dimensional subspace has the same number of ordered bases, so the
/// result is uniform.
pub fn sample_subspace<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    rng: &mut R,
) -> Result<SubspaceBasis, Gf2Error> {
    if n == 0 || n > 64 {
        return Err(Gf2Error::BadLength(n));
    }
    if d > n {
        return Err(Gf2Error::BadDimension { n, d });
    }
    let mask = low_mask(n);
    loop {
        let rows: Vec<u64> = (0..d).map(|_| rng.gen::<u64>() & mask).collect();
        let basis = SubspaceBasis::span(n, rows);
        if basis.dim() == d {
            return Ok(basis);
        }
    }
}

/// Uniform over odd-weight strings of length `n`, by rejection.
pub fn sample_odd_weight<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<BitVector, Gf2Error> {
    if n == 0 || n > 64 {
        return Err(Gf2Error::BadLength(n));
    }
    loop {
        let v = rng.gen::<u64>() & low_mask(n);
        if v.count_ones() % 2 == 1 {
            return BitVector::new(v, n);
        }
    }
}

/// Every d-dimensional subspace of 𝔽₂ⁿ exactly once, in canonical form.
///
/// Walks the RREF shapes directly: choose the pivot columns, then fill
/// every free entry right of each pivot in all possible ways.
pub fn enumerate_subspaces(n: usize, d: usize) -> Result<Vec<SubspaceBasis>, Gf2Error> {
    if n == 0 {
        return Err(Gf2Error::BadLength(n));
    }
    if n > MAX_ENUM_DIM {
        return Err(Gf2Error::TooLarge(n));
    }
    if d > n {
        return Err(Gf2Error::BadDimension { n, d });
    }
    let mut out = Vec::new();
    for pivot_set in 0u64..(1u64 << n) {
        if pivot_set.count_ones() as usize != d {
            continue;
        }
        // pivot columns as bit positions, highest first
        let pivots: Vec<u32> = (0..n as u32)
            .rev()
            .filter(|&b| pivot_set >> b & 1 == 1)
            .collect();
        // free slots of row k: non-pivot columns below its pivot
        let slots: Vec<Vec<u32>> = pivots
            .iter()
            .map(|&p| (0..p).rev().filter(|&b| pivot_set >> b & 1 == 0).collect())
            .collect();
        let total_free: usize = slots.iter().map(Vec::len).sum();
        for fill in 0u64..(1u64 << total_free) {
            let mut cursor = 0;
            let mut rows = Vec::with_capacity(d);
            for (k, &p) in pivots.iter().enumerate() {
                let mut row = 1u64 << p;
                for &b in &slots[k] {
                    if fill >> cursor & 1 == 1 {
                        row |= 1u64 << b;
                    }
                    cursor += 1;
                }
                rows.push(row);
            }
            out.push(SubspaceBasis { n, rows });
        }
    }
    out.sort();
    Ok(out)
}

/// Gaussian binomial [n choose d]₂: the number of d-dimensional subspaces of 𝔽₂ⁿ.
pub fn gaussian_binomial(n: usize, d: usize) -> u128 {
    if d > n {
        return 0;
    }
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..d {
        num *= (1u128 << (n - i)) - 1;
        den *= (1u128 << (i + 1)) - 1;
    }
    num / den
}

/// Coset `offset + span(basis)` with the offset normalized to the
/// lexicographically smallest member.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AffineCoset {
    offset: u64,
    basis: SubspaceBasis,
}

impl AffineCoset {
    pub fn new(offset: &BitVector, basis: SubspaceBasis) -> Result<Self, Gf2Error> {
        if offset.len() != basis.ambient_dim() {
            return Err(Gf2Error::LengthMismatch(offset.len(), basis.ambient_dim()));
        }
        Ok(Self::from_word(offset.bits(), basis))
    }

    pub fn linear(basis: SubspaceBasis) -> Self {
        AffineCoset { offset: 0, basis }
    }

    pub(crate) fn from_word(offset: u64, basis: SubspaceBasis) -> Self {
        // with all pivot bits cleared the offset is the numerically smallest member
        let offset = basis.reduce(offset & low_mask(basis.ambient_dim()));
        AffineCoset { offset, basis }
    }

    pub fn offset(&self) -> BitVector {
        BitVector {
            bits: self.offset,
            len: self.basis.ambient_dim() as u8,
        }
    }

    pub fn basis(&self) -> &SubspaceBasis {
        &self.basis
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.ambient_dim()
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn size(&self) -> u128 {
        self.basis.size()
    }

    #[inline]
    pub fn contains_word(&self, u: u64) -> bool {
        self.basis.contains_word(u ^ self.offset)
    }

    pub fn contains(&self, u: &BitVector) -> bool {
        u.len() == self.ambient_dim() && self.contains_word(u.bits())
    }

    pub fn elements(&self) -> impl Iterator<Item = u64> + '_ {
        gray_span(self.offset, &self.basis.rows)
    }
}

impl fmt::Debug for AffineCoset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {:?}", self.offset(), self.basis)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeMap, BTreeSet};

    fn bv(s: &str) -> BitVector {
        s.parse().unwrap()
    }

    fn span_of(n: usize, vs: &[&str]) -> SubspaceBasis {
        SubspaceBasis::from_vectors(n, &vs.iter().map(|s| bv(s)).collect::<Vec<_>>()).unwrap()
    }

    /// Every element of a subspace, by brute-force closure under xor.
    fn brute_elements(n: usize, gens: &[u64]) -> BTreeSet<u64> {
        let mut set: BTreeSet<u64> = [0].into();
        for &g in gens {
            let more: Vec<u64> = set.iter().map(|&s| s ^ (g & low_mask(n))).collect();
            set.extend(more);
        }
        set
    }

    #[test]
    fn dot_examples() {
        assert!(dot(&bv("01"), &bv("01")).unwrap());
        assert!(!dot(&bv("1011"), &bv("0000")).unwrap());
        assert!(!dot(&bv("1111"), &bv("1111")).unwrap());
        assert_eq!(
            dot(&bv("01"), &bv("011")),
            Err(Gf2Error::LengthMismatch(2, 3))
        );
    }

    #[test]
    fn bitvector_layout() {
        let v = bv("0010");
        assert_eq!(v.bits(), 2);
        assert!(v.get(2));
        assert!(!v.get(3));
        assert_eq!(v.to_string(), "0010");
        assert_eq!(v.complement().to_string(), "1101");
        assert!(BitVector::new(0, 65).is_err());
    }

    #[test]
    fn complement_examples() {
        assert_eq!(
            SubspaceBasis::zero(4).orthogonal_complement(),
            SubspaceBasis::full(4)
        );
        assert_eq!(
            SubspaceBasis::full(4).orthogonal_complement(),
            SubspaceBasis::zero(4)
        );
        let v = span_of(4, &["1100", "0011"]);
        assert_eq!(v.orthogonal_complement(), v);
    }

    #[test]
    fn relative_complement_examples() {
        let a = bv("111");
        let perp = perp_of(&a);
        assert_eq!(
            relative_complement(&SubspaceBasis::zero(3), &a).unwrap(),
            perp
        );
        assert_eq!(
            relative_complement(&perp, &a).unwrap(),
            SubspaceBasis::zero(3)
        );
        let w = span_of(3, &["110"]);
        // a^⊥ = {000,110,101,011}; only 000 and 110 are orthogonal to 110
        assert_eq!(relative_complement(&w, &a).unwrap(), span_of(3, &["110"]));
        assert_eq!(
            relative_complement(&w, &bv("110")),
            Err(Gf2Error::EvenWeight)
        );
        assert_eq!(
            relative_complement(&span_of(3, &["100"]), &a),
            Err(Gf2Error::NotInPerp)
        );
    }

    #[test]
    fn relative_complement_exhaustive_small() {
        for n in 1..=6usize {
            for a in (0u64..1 << n).filter(|a| a.count_ones() % 2 == 1) {
                let a = BitVector::new(a, n).unwrap();
                let perp = perp_of(&a);
                for d in 0..n {
                    if n > 5 && d != n / 2 {
                        continue;
                    }
                    // subspaces of a^⊥ of dim d, via enumeration in coordinates of a^⊥
                    let images: Vec<u64> = perp.rows().iter().rev().copied().collect();
                    let Ok(subs) = enumerate_subspaces(n - 1, d) else {
                        continue;
                    };
                    for s in subs.iter().take(40) {
                        let w = s.map(&images, n);
                        let w2 = relative_complement(&w, &a).unwrap();
                        assert_eq!(w.dim() + w2.dim(), n - 1);
                        assert!(w2.is_subspace_of(&perp));
                        for x in w.elements() {
                            for y in w2.elements() {
                                assert!(!parity(x & y));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_subspaces(4, 2).unwrap().len(), 35);
        assert_eq!(enumerate_subspaces(5, 0).unwrap().len(), 1);
        assert_eq!(enumerate_subspaces(3, 1).unwrap().len(), 7);
        for n in 1..=MAX_ENUM_DIM {
            for d in 0..=n {
                let subs = enumerate_subspaces(n, d).unwrap();
                assert_eq!(subs.len() as u128, gaussian_binomial(n, d), "n={n} d={d}");
                let distinct: BTreeSet<_> = subs.iter().collect();
                assert_eq!(distinct.len(), subs.len());
                for s in &subs {
                    assert_eq!(
                        &SubspaceBasis::span(n, s.rows().to_vec()),
                        s,
                        "not canonical"
                    );
                }
            }
        }
        assert_eq!(
            enumerate_subspaces(MAX_ENUM_DIM + 1, 1),
            Err(Gf2Error::TooLarge(MAX_ENUM_DIM + 1))
        );
    }

    #[test]
    fn brute_force_two_dim_subspaces_of_f2_4() {
        // independent oracle: close every pair of distinct nonzero vectors
        let mut found = BTreeSet::new();
        for v in 1u64..16 {
            for w in 1u64..16 {
                if v != w {
                    found.insert(brute_elements(4, &[v, w]));
                }
            }
        }
        assert_eq!(found.len(), 35);
        let ours: BTreeSet<BTreeSet<u64>> = enumerate_subspaces(4, 2)
            .unwrap()
            .iter()
            .map(|s| s.elements().collect())
            .collect();
        assert_eq!(ours, found);
    }

    #[test]
    fn sample_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(
            sample_subspace(4, 0, &mut rng).unwrap(),
            SubspaceBasis::zero(4)
        );
        assert_eq!(
            sample_subspace(4, 4, &mut rng).unwrap(),
            SubspaceBasis::full(4)
        );
        assert!(sample_subspace(4, 5, &mut rng).is_err());
    }

    #[test]
    fn sample_subspace_uniform_n4_d2() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let trials = 100_000u64;
        let mut counts: BTreeMap<SubspaceBasis, u64> = BTreeMap::new();
        for _ in 0..trials {
            *counts
                .entry(sample_subspace(4, 2, &mut rng).unwrap())
                .or_default() += 1;
        }
        assert_eq!(counts.len(), 35);
        let p = 1.0 / 35.0;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for (s, &c) in &counts {
            assert!(
                (c as f64 - trials as f64 * p).abs() <= 3.5 * sigma,
                "{s:?}: {c}"
            );
        }
    }

    #[test]
    fn odd_weight_sampler() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(sample_odd_weight(1, &mut rng).unwrap().bits(), 1);
        }
        let ones = (0..10_000)
            .filter(|_| sample_odd_weight(2, &mut rng).unwrap().bits() == 1)
            .count();
        assert!((ones as i64 - 5000).abs() < 300);

        // χ² against C(8,k)/2^7 for odd k
        let trials = 20_000u64;
        let mut hist = [0u64; 9];
        for _ in 0..trials {
            hist[sample_odd_weight(8, &mut rng).unwrap().weight() as usize] += 1;
        }
        let binom = [1u64, 8, 28, 56, 70, 56, 28, 8, 1];
        let mut chi2 = 0.0;
        for k in (1..=7).step_by(2) {
            let expected = trials as f64 * binom[k] as f64 / 128.0;
            chi2 += (hist[k] as f64 - expected).powi(2) / expected;
        }
        assert!(hist.iter().step_by(2).all(|&c| c == 0));
        // 3 degrees of freedom, 0.999 quantile ≈ 16.27
        assert!(chi2 < 16.27, "chi2 = {chi2}");
    }

    #[test]
    fn coset_canonical_offset_is_min() {
        let basis = span_of(4, &["1100", "0110"]);
        for off in 0u64..16 {
            let c = AffineCoset::from_word(off, basis.clone());
            let members: Vec<u64> = c.elements().collect();
            assert_eq!(c.offset().bits(), *members.iter().min().unwrap());
            assert!(members.iter().all(|&m| c.contains_word(m)));
            assert_eq!(members.len(), 4);
            assert_eq!((0u64..16).filter(|&u| c.contains_word(u)).count(), 4);
        }
    }

    #[test]
    fn lemma_5_2_exact_counts() {
        let subs = enumerate_subspaces(4, 2).unwrap();
        let v = 0b0001;
        let w = 0b0010;
        assert_eq!(subs.iter().filter(|s| s.contains_word(v)).count(), 7);
        assert_eq!(
            subs.iter()
                .filter(|s| s.contains_word(v) && s.contains_word(w))
                .count(),
            1
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn complement_is_involution(n in 1usize..=12, d_frac in 0.0f64..=1.0, seed in any::<u64>()) {
                let d = ((n as f64) * d_frac).round() as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let v = sample_subspace(n, d, &mut rng).unwrap();
                prop_assert_eq!(v.dim(), d);
                let perp = v.orthogonal_complement();
                prop_assert_eq!(perp.dim() + d, n);
                prop_assert_eq!(perp.orthogonal_complement(), v.clone());
                for &a in v.rows() {
                    for &b in perp.rows() {
                        prop_assert!(!parity(a & b));
                    }
                }
            }

            #[test]
            fn rref_is_canonical(n in 1usize..=10, gens in proptest::collection::vec(any::<u64>(), 0..8)) {
                let a = SubspaceBasis::span(n, gens.clone());
                let mut shuffled = gens.clone();
                shuffled.reverse();
                // adding a combination of generators must not change the span
                if gens.len() >= 2 {
                    shuffled.push(gens[0] ^ gens[1]);
                }
                let b = SubspaceBasis::span(n, shuffled);
                prop_assert_eq!(&a, &b);
                let brute = brute_elements(n, &gens);
                prop_assert_eq!(a.size(), brute.len() as u128);
                for x in brute {
                    prop_assert!(a.contains_word(x));
                }
            }
        }
    }
}
