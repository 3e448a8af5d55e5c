//! Inner functions (inner product, gap-Hamming, indexing), outer truth
//! tables, and block composition `f ∘ gᵖ`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf2::{self, BitVector};

/// Largest `n` for which [`embed_ip_to_ind`] materializes 2ⁿ-bit strings.
pub const MAX_EMBED_N: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GadgetError {
    #[error("input length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("truth table must have 2^{p} = {expected} entries, got {got}")]
    TableLength {
        p: usize,
        expected: usize,
        got: usize,
    },
    #[error("gap-Hamming needs 0 < k and 2k < n (gamma = k/n), got k={k}, n={n}")]
    BadGap { n: usize, k: usize },
    #[error("gamma*n must be an integer (n={n}, gamma={num}/{den})")]
    NonIntegralGap { n: usize, num: u64, den: u64 },
    #[error("bit length {0} unsupported")]
    BadLength(usize),
    #[error("embedding limited to n <= {MAX_EMBED_N}, got {0}")]
    EmbedTooLarge(usize),
    #[error("invalid truth table: {0}")]
    Json(String),
}

/// Value of a possibly partial gadget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GadgetValue {
    Zero,
    One,
    Undefined,
}

impl GadgetValue {
    pub fn from_bit(b: bool) -> Self {
        if b {
            GadgetValue::One
        } else {
            GadgetValue::Zero
        }
    }

    pub fn bit(self) -> Option<bool> {
        match self {
            GadgetValue::Zero => Some(false),
            GadgetValue::One => Some(true),
            GadgetValue::Undefined => None,
        }
    }

    pub fn is(self, c: bool) -> bool {
        self.bit() == Some(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Gadget {
    /// IPₙ(x, y) = Σ xᵢyᵢ mod 2.
    Ip { n: usize },
    /// GH_{n,γ} with γ = k/n: 1 if d_H ≥ n/2 + k, 0 if d_H ≤ n/2 − k.
    Gh { n: usize, k: usize },
    /// IND_N with N = 2ⁿ: Alice holds an n-bit pointer, Bob an N-bit table.
    Ind { n: usize },
}

impl Gadget {
    pub fn ip(n: usize) -> Result<Self, GadgetError> {
        if n == 0 || n > 64 {
            return Err(GadgetError::BadLength(n));
        }
        Ok(Gadget::Ip { n })
    }

    pub fn gap_hamming(n: usize, k: usize) -> Result<Self, GadgetError> {
        if n == 0 || n > 64 {
            return Err(GadgetError::BadLength(n));
        }
        if k == 0 || 2 * k >= n {
            return Err(GadgetError::BadGap { n, k });
        }
        Ok(Gadget::Gh { n, k })
    }

    /// GH_{n,γ} from γ = num/den; γ·n must be integral.
    pub fn gap_hamming_gamma(n: usize, num: u64, den: u64) -> Result<Self, GadgetError> {
        if den == 0 || !(n as u64 * num).is_multiple_of(den) {
            return Err(GadgetError::NonIntegralGap { n, num, den });
        }
        Self::gap_hamming(n, (n as u64 * num / den) as usize)
    }

    /// Bob's input table of length 2ⁿ must fit in a word for [`Gadget::eval`];
    /// longer tables go through [`index_bit`].
    pub fn indexing(n: usize) -> Result<Self, GadgetError> {
        if n == 0 || n > MAX_EMBED_N {
            return Err(GadgetError::BadLength(n));
        }
        Ok(Gadget::Ind { n })
    }

    pub fn alice_len(&self) -> usize {
        match *self {
            Gadget::Ip { n } | Gadget::Gh { n, .. } | Gadget::Ind { n } => n,
        }
    }

    pub fn bob_len(&self) -> usize {
        match *self {
            Gadget::Ip { n } | Gadget::Gh { n, .. } => n,
            Gadget::Ind { n } => 1 << n,
        }
    }

    pub fn is_partial(&self) -> bool {
        matches!(self, Gadget::Gh { .. })
    }

    pub fn eval(&self, x: &BitVector, y: &BitVector) -> Result<GadgetValue, GadgetError> {
        check_len(self.alice_len(), x.len())?;
        check_len(self.bob_len(), y.len())?;
        Ok(self.eval_words(x.bits(), y.bits()))
    }

    /// Evaluation on raw words; callers guarantee the lengths.
    #[inline]
    pub fn eval_words(&self, x: u64, y: u64) -> GadgetValue {
        match *self {
            Gadget::Ip { .. } => GadgetValue::from_bit(gf2::parity(x & y)),
            Gadget::Gh { n, k } => {
                let d = (x ^ y).count_ones() as usize;
                if 2 * d >= n + 2 * k {
                    GadgetValue::One
                } else if 2 * d + 2 * k <= n {
                    GadgetValue::Zero
                } else {
                    GadgetValue::Undefined
                }
            }
            Gadget::Ind { n } => {
                let len = 1usize << n;
                GadgetValue::from_bit((y >> (len - 1 - x as usize)) & 1 == 1)
            }
        }
    }
}

impl fmt::Display for Gadget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Gadget::Ip { n } => write!(f, "ip{n}"),
            Gadget::Gh { n, k } => write!(f, "gh{n}/{k}"),
            Gadget::Ind { n } => write!(f, "ind{}", 1usize << n),
        }
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), GadgetError> {
    if expected != got {
        return Err(GadgetError::Length { expected, got });
    }
    Ok(())
}

/// Bit string of arbitrary length, index 0 leftmost. Used for Bob's
/// indexing tables that do not fit a word.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    words: Vec<u64>,
    len: usize,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len);
        let bit = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// As a word-sized [`BitVector`] (same left-to-right order), if it fits.
    pub fn to_bitvector(&self) -> Option<BitVector> {
        if self.len == 0 || self.len > 64 {
            return None;
        }
        let bits: Vec<bool> = (0..self.len).map(|i| self.get(i)).collect();
        BitVector::from_bits(&bits).ok()
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

/// IND_N(x, y) for tables of any length: bit of `y` at position int(x),
/// with x read big-endian.
pub fn index_bit(x: &BitVector, y: &BitString) -> Result<bool, GadgetError> {
    let expected = 1usize << x.len();
    check_len(expected, y.len())?;
    Ok(y.get(x.bits() as usize))
}

/// Bob's side of the IP → IND reduction: b′ᵢ[j] = IPₙ(x_j, bᵢ) where x_j is
/// the j-th n-bit string in big-endian order, so IPₙ(a, bᵢ) = IND_{2ⁿ}(a, b′ᵢ).
pub fn embed_ip_to_ind(b: &[BitVector]) -> Result<Vec<BitString>, GadgetError> {
    b.iter()
        .map(|bi| {
            let n = bi.len();
            if n > MAX_EMBED_N {
                return Err(GadgetError::EmbedTooLarge(n));
            }
            let mut out = BitString::zeros(1 << n);
            for j in 0..(1u64 << n) {
                out.set(j as usize, gf2::parity(j & bi.bits()));
            }
            Ok(out)
        })
        .collect()
}

/// Output label of an outer function; JSON accepts integers or strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Int(i64),
    Str(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Int(v) => write!(f, "{v}"),
            Label::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for Label {
    fn from(v: i64) -> Self {
        Label::Int(v)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Label::Str(s.to_string())
    }
}

/// Outer function f : {0,1}ᵖ → 𝒵 as a table of 2ᵖ labels. Entry `k`
/// holds f(z) where z₁ is the most significant bit of `k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TruthTable {
    p: usize,
    table: Vec<Label>,
}

#[derive(Deserialize)]
struct RawTable {
    p: usize,
    table: Vec<Label>,
}

impl<'de> Deserialize<'de> for TruthTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawTable::deserialize(d)?;
        TruthTable::new(raw.p, raw.table).map_err(serde::de::Error::custom)
    }
}

impl TruthTable {
    pub fn new(p: usize, table: Vec<Label>) -> Result<Self, GadgetError> {
        if p >= usize::BITS as usize - 1 || table.len() != 1 << p {
            return Err(GadgetError::TableLength {
                p,
                expected: 1usize.checked_shl(p as u32).unwrap_or(0),
                got: table.len(),
            });
        }
        Ok(TruthTable { p, table })
    }

    pub fn from_fn(p: usize, f: impl Fn(&[bool]) -> Label) -> Self {
        let table = (0..1usize << p).map(|k| f(&index_to_bits(k, p))).collect();
        TruthTable { p, table }
    }

    pub fn constant(p: usize, label: Label) -> Self {
        TruthTable {
            p,
            table: vec![label; 1 << p],
        }
    }

    pub fn and(p: usize) -> Self {
        Self::from_fn(p, |z| Label::Int(z.iter().all(|&b| b) as i64))
    }

    pub fn or(p: usize) -> Self {
        Self::from_fn(p, |z| Label::Int(z.iter().any(|&b| b) as i64))
    }

    pub fn xor(p: usize) -> Self {
        Self::from_fn(p, |z| {
            Label::Int((z.iter().filter(|&&b| b).count() % 2) as i64)
        })
    }

    pub fn majority(p: usize) -> Self {
        Self::from_fn(p, |z| {
            Label::Int((2 * z.iter().filter(|&&b| b).count() > p) as i64)
        })
    }

    pub fn from_json(text: &str) -> Result<Self, GadgetError> {
        serde_json::from_str(text).map_err(|e| GadgetError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("labels serialize")
    }

    pub fn arity(&self) -> usize {
        self.p
    }

    pub fn labels(&self) -> &[Label] {
        &self.table
    }

    pub fn eval(&self, z: &[bool]) -> Result<&Label, GadgetError> {
        if z.len() != self.p {
            return Err(GadgetError::Arity {
                expected: self.p,
                got: z.len(),
            });
        }
        Ok(&self.table[bits_to_index(z)])
    }

    pub fn eval_index(&self, k: usize) -> &Label {
        &self.table[k]
    }

    pub fn is_constant(&self) -> bool {
        self.table.windows(2).all(|w| w[0] == w[1])
    }
}

/// Table index of z (z₁ most significant).
pub fn bits_to_index(z: &[bool]) -> usize {
    z.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub fn index_to_bits(k: usize, p: usize) -> Vec<bool> {
    (0..p).map(|i| (k >> (p - 1 - i)) & 1 == 1).collect()
}

/// (f ∘ gᵖ)(x, y); `None` when some coordinate falls in the gadget's gap.
pub fn eval_composed(
    f: &TruthTable,
    g: &Gadget,
    x: &[BitVector],
    y: &[BitVector],
) -> Result<Option<Label>, GadgetError> {
    if x.len() != f.arity() {
        return Err(GadgetError::Arity {
            expected: f.arity(),
            got: x.len(),
        });
    }
    if y.len() != f.arity() {
        return Err(GadgetError::Arity {
            expected: f.arity(),
            got: y.len(),
        });
    }
    let mut z = Vec::with_capacity(x.len());
    for (xi, yi) in x.iter().zip(y) {
        match g.eval(xi, yi)?.bit() {
            Some(b) => z.push(b),
            None => return Ok(None),
        }
    }
    Ok(Some(f.eval(&z)?.clone()))
}
