//! Hitting monochromatic rectangle-distributions σ₀ / σ₁ for IP and
//! Gap-Hamming, their supports at small n, Monte Carlo hitting estimates,
//! the exact worst case for Gap-Hamming, and witness search inside thick
//! rectangles.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::gadgets::{Gadget, GadgetValue};
use crate::gf2::{
    enumerate_subspaces, low_mask, perp_of, relative_complement, sample_odd_weight,
    sample_subspace, AffineCoset, BitVector, Gf2Error, SubspaceBasis,
};
use crate::tupleset::{IndexSet, PackedTuple, Rect, TupleSet};
use crate::Rational;

/// Largest U×V for which [`MonoRect::verify`] walks every pair.
pub const MAX_VERIFY_PAIRS: u128 = 1 << 28;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HittingError {
    #[error("IP sigma_0 needs even n >= 2, got {0}")]
    IpParity(usize),
    #[error("gap-Hamming rectangles need n divisible by 8, got {0}")]
    GhDivisibility(usize),
    #[error("no hitting distribution for {0}")]
    Unsupported(Gadget),
    #[error("support enumeration limited to IP n <= 6 and GH n <= 8, got {0}")]
    SupportTooLarge(Gadget),
    #[error("side has {0} elements, too many to enumerate")]
    SideTooLarge(u128),
    #[error("empty side")]
    EmptySide,
    #[error("trials must be positive")]
    NoTrials,
    #[error("budget must be positive")]
    NoBudget,
    #[error("mismatched lengths: {0} vs {1}")]
    Length(usize, usize),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

/// One side of a rectangle U × V, stored implicitly where possible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Side {
    Explicit { n: usize, words: Vec<u64> },
    Coset(AffineCoset),
    Ball { center: BitVector, radius: usize },
}

impl Side {
    pub fn ambient_dim(&self) -> usize {
        match self {
            Side::Explicit { n, .. } => *n,
            Side::Coset(c) => c.ambient_dim(),
            Side::Ball { center, .. } => center.len(),
        }
    }

    pub fn size(&self) -> u128 {
        match self {
            Side::Explicit { words, .. } => words.len() as u128,
            Side::Coset(c) => c.size(),
            Side::Ball { center, radius } => ball_size(center.len(), *radius),
        }
    }

    #[inline]
    pub fn contains_word(&self, u: u64) -> bool {
        match self {
            Side::Explicit { words, .. } => words.binary_search(&u).is_ok(),
            Side::Coset(c) => c.contains_word(u),
            Side::Ball { center, radius } => (u ^ center.bits()).count_ones() as usize <= *radius,
        }
    }

    pub fn contains(&self, u: &BitVector) -> bool {
        u.len() == self.ambient_dim() && self.contains_word(u.bits())
    }

    /// Calls `f` on members in a fixed order until it returns true; reports
    /// whether it did.
    pub fn any_word<F: FnMut(u64) -> bool>(&self, mut f: F) -> bool {
        match self {
            Side::Explicit { words, .. } => words.iter().any(|&w| f(w)),
            Side::Coset(c) => c.elements().any(f),
            Side::Ball { center, radius } => {
                let n = center.len();
                (0..=(*radius).min(n)).any(|k| weight_k_words(n, k).any(|m| f(center.bits() ^ m)))
            }
        }
    }

    pub fn words(&self) -> Vec<u64> {
        let mut out = Vec::new();
        self.any_word(|w| {
            out.push(w);
            false
        });
        out
    }
}

/// All n-bit words of weight k in increasing order.
fn weight_k_words(n: usize, k: usize) -> impl Iterator<Item = u64> {
    let limit = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let first = if k == 0 { 0 } else { low_mask(k) };
    let mut next = Some(first);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if k == 0 || cur == limit {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur.wrapping_add(c);
            if r == 0 {
                None
            } else {
                let succ = (((r ^ cur) >> 2) / c) | r;
                (succ <= limit && succ.count_ones() as usize == k).then_some(succ)
            }
        };
        Some(cur)
    })
}

fn ball_size(n: usize, radius: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for k in 0..=radius.min(n) {
        total += binom;
        binom = binom * (n - k) as u128 / (k + 1) as u128;
    }
    total
}

/// A c-monochromatic rectangle U × V of a gadget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonoRect {
    pub value: bool,
    pub u: Side,
    pub v: Side,
    pub gadget: Gadget,
}

impl MonoRect {
    /// Checks every pair; returns the first offending pair if any.
    pub fn verify(&self) -> Result<Option<(u64, u64)>, HittingError> {
        let pairs = self.u.size() * self.v.size();
        if pairs > MAX_VERIFY_PAIRS {
            return Err(HittingError::SideTooLarge(pairs));
        }
        let vs = self.v.words();
        let mut bad = None;
        self.u.any_word(|u| {
            bad = vs
                .iter()
                .find(|&&v| !self.gadget.eval_words(u, v).is(self.value))
                .map(|&v| (u, v));
            bad.is_some()
        });
        Ok(bad)
    }
}

/// Dimension of W in σ₁ for IP: ⌈(n−1)/2⌉.
pub fn sigma1_dim(n: usize) -> usize {
    n / 2
}

fn ip_sigma0(v: SubspaceBasis, gadget: Gadget) -> MonoRect {
    let perp = v.orthogonal_complement();
    MonoRect {
        value: false,
        u: Side::Coset(AffineCoset::linear(v)),
        v: Side::Coset(AffineCoset::linear(perp)),
        gadget,
    }
}

fn ip_sigma1(a: &BitVector, w: SubspaceBasis, gadget: Gadget) -> Result<MonoRect, HittingError> {
    let w_rel = relative_complement(&w, a)?;
    Ok(MonoRect {
        value: true,
        u: Side::Coset(AffineCoset::new(a, w)?),
        v: Side::Coset(AffineCoset::new(a, w_rel)?),
        gadget,
    })
}

/// One draw from σ_c for IPₙ. σ₀ = V × V^⊥ with V uniform of dimension n/2;
/// σ₁ = (a+W) × (a+W′) with a uniform of odd weight, W ⊆ a^⊥ uniform of
/// dimension ⌈(n−1)/2⌉ and W′ its complement inside a^⊥.
pub fn sample_sigma_ip<R: Rng + ?Sized>(
    n: usize,
    c: bool,
    rng: &mut R,
) -> Result<MonoRect, HittingError> {
    let gadget = Gadget::ip(n).map_err(|_| HittingError::IpParity(n))?;
    if !c {
        if !n.is_multiple_of(2) {
            return Err(HittingError::IpParity(n));
        }
        let v = sample_subspace(n, n / 2, rng)?;
        return Ok(ip_sigma0(v, gadget));
    }
    let a = sample_odd_weight(n, rng)?;
    let perp = perp_of(&a);
    let d = sigma1_dim(n);
    let inner = sample_subspace(n - 1, d, rng)?;
    let w = inner.map(&lsb_images(&perp), n);
    ip_sigma1(&a, w, gadget)
}

/// Basis rows of `s` listed so that bit k (from the least significant end)
/// of an (dim s)-bit word maps to row k.
fn lsb_images(s: &SubspaceBasis) -> Vec<u64> {
    s.rows().iter().rev().copied().collect()
}

/// One draw from σ_c for GH_{n,1/4}: x uniform of weight n/2, U = B_{n/8}(x)
/// and V = B_{n/8}(x) for c = 0 or B_{n/8}(x̄) for c = 1.
pub fn sample_sigma_gh<R: Rng + ?Sized>(
    n: usize,
    c: bool,
    rng: &mut R,
) -> Result<MonoRect, HittingError> {
    if n == 0 || !n.is_multiple_of(8) || n > 64 {
        return Err(HittingError::GhDivisibility(n));
    }
    let mut x = 0u64;
    for pos in sample_indices(rng, n, n / 2).into_iter() {
        x |= 1u64 << pos;
    }
    Ok(gh_rect(n, x, c))
}

/// The gadget GH_{n,1/4} that the Gap-Hamming rectangles are monochromatic for.
pub fn gh_quarter(n: usize) -> Result<Gadget, HittingError> {
    if n == 0 || !n.is_multiple_of(8) || n > 64 {
        return Err(HittingError::GhDivisibility(n));
    }
    Gadget::gap_hamming(n, n / 4).map_err(|_| HittingError::GhDivisibility(n))
}

fn gh_rect(n: usize, x: u64, c: bool) -> MonoRect {
    let gadget = Gadget::Gh { n, k: n / 4 };
    let center = BitVector::new(x, n).expect("n checked");
    let other = if c { center.complement() } else { center };
    MonoRect {
        value: c,
        u: Side::Ball {
            center,
            radius: n / 8,
        },
        v: Side::Ball {
            center: other,
            radius: n / 8,
        },
        gadget,
    }
}

/// One draw from σ_c for a gadget with a hitting distribution. For GH the
/// gap parameter is taken from the sampled rectangles (γ = 1/4).
pub fn sample_sigma<R: Rng + ?Sized>(
    g: &Gadget,
    c: bool,
    rng: &mut R,
) -> Result<MonoRect, HittingError> {
    match *g {
        Gadget::Ip { n } => sample_sigma_ip(n, c, rng),
        Gadget::Gh { n, .. } => {
            let mut rect = sample_sigma_gh(n, c, rng)?;
            rect.gadget = *g;
            Ok(rect)
        }
        Gadget::Ind { .. } => Err(HittingError::Unsupported(*g)),
    }
}

/// Every rectangle of σ_c, one per random choice: per V for IP σ₀, per (a, W)
/// for IP σ₁, per weight-n/2 center for GH. σ_c is uniform on this list.
pub fn enumerate_support(g: &Gadget, c: bool) -> Result<Vec<MonoRect>, HittingError> {
    match *g {
        Gadget::Ip { n } => {
            if n > 6 {
                return Err(HittingError::SupportTooLarge(*g));
            }
            if !c {
                if n % 2 != 0 {
                    return Err(HittingError::IpParity(n));
                }
                return Ok(enumerate_subspaces(n, n / 2)?
                    .into_iter()
                    .map(|v| ip_sigma0(v, *g))
                    .collect());
            }
            let mut out = Vec::new();
            for word in (0u64..1 << n).filter(|w| w.count_ones() % 2 == 1) {
                let a = BitVector::new(word, n)?;
                let images = lsb_images(&perp_of(&a));
                for inner in enumerate_subspaces(n - 1, sigma1_dim(n))? {
                    out.push(ip_sigma1(&a, inner.map(&images, n), *g)?);
                }
            }
            Ok(out)
        }
        Gadget::Gh { n, .. } => {
            if n > 8 {
                return Err(HittingError::SupportTooLarge(*g));
            }
            gh_quarter(n)?;
            Ok((0u64..1 << n)
                .filter(|x| x.count_ones() as usize == n / 2)
                .map(|x| MonoRect {
                    gadget: *g,
                    ..gh_rect(n, x, c)
                })
                .collect())
        }
        Gadget::Ind { .. } => Err(HittingError::Unsupported(*g)),
    }
}

/// Test family for hitting experiments over {0,1}ⁿ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VectorSet {
    /// An explicit sorted list.
    Explicit { n: usize, words: Vec<u64> },
    /// Pseudorandom set containing each word independently with probability
    /// 2^{-log2_inv_density}, keyed by `key`.
    Hashed {
        n: usize,
        key: u64,
        log2_inv_density: u32,
    },
    /// Words whose first `len` bits equal `prefix`.
    Subcube { n: usize, len: usize, prefix: u64 },
    /// Hamming ball.
    Ball {
        n: usize,
        center: u64,
        radius: usize,
    },
}

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl VectorSet {
    pub fn explicit(n: usize, words: &[BitVector]) -> Result<Self, HittingError> {
        if let Some(w) = words.iter().find(|w| w.len() != n) {
            return Err(HittingError::Length(w.len(), n));
        }
        let mut words: Vec<u64> = words.iter().map(|w| w.bits()).collect();
        words.sort_unstable();
        words.dedup();
        Ok(VectorSet::Explicit { n, words })
    }

    pub fn from_tupleset(a: &TupleSet) -> Result<Self, HittingError> {
        if a.p() != 1 {
            return Err(HittingError::Length(a.p(), 1));
        }
        Ok(VectorSet::Explicit {
            n: a.n(),
            words: a.codes().to_vec(),
        })
    }

    /// Smallest ball around `center` with at least 2^{n-h} points.
    pub fn ball_of_density(n: usize, center: u64, h: u32) -> Self {
        let target = 1u128 << (n as u32).saturating_sub(h);
        let radius = (0..=n).find(|&r| ball_size(n, r) >= target).unwrap_or(n);
        VectorSet::Ball { n, center, radius }
    }

    pub fn n(&self) -> usize {
        match self {
            VectorSet::Explicit { n, .. }
            | VectorSet::Hashed { n, .. }
            | VectorSet::Subcube { n, .. }
            | VectorSet::Ball { n, .. } => *n,
        }
    }

    #[inline]
    pub fn contains_word(&self, w: u64) -> bool {
        match self {
            VectorSet::Explicit { words, .. } => words.binary_search(&w).is_ok(),
            VectorSet::Hashed {
                key,
                log2_inv_density,
                ..
            } => {
                let h = mix64(w ^ mix64(*key));
                *log2_inv_density == 0 || h >> (64 - *log2_inv_density) == 0
            }
            VectorSet::Subcube { n, len, prefix } => *len == 0 || w >> (n - len) == *prefix,
            VectorSet::Ball { center, radius, .. } => (w ^ center).count_ones() as usize <= *radius,
        }
    }

    /// log₂ of the density, exactly for explicit, subcube and ball sets and
    /// nominally for hashed ones.
    pub fn log2_density(&self) -> f64 {
        match self {
            VectorSet::Explicit { n, words } => (words.len() as f64).log2() - *n as f64,
            VectorSet::Hashed {
                log2_inv_density, ..
            } => -(*log2_inv_density as f64),
            VectorSet::Subcube { len, .. } => -(*len as f64),
            VectorSet::Ball { n, radius, .. } => (ball_size(*n, *radius) as f64).log2() - *n as f64,
        }
    }

    fn explicit_words(&self) -> Option<&[u64]> {
        match self {
            VectorSet::Explicit { words, .. } => Some(words),
            _ => None,
        }
    }

    fn is_empty(&self) -> bool {
        matches!(self, VectorSet::Explicit { words, .. } if words.is_empty())
    }

    /// Whether this set meets `side`, iterating the smaller explicit collection.
    pub fn meets(&self, side: &Side) -> bool {
        match self.explicit_words() {
            Some(words) if (words.len() as u128) < side.size() => {
                words.iter().any(|&w| side.contains_word(w))
            }
            _ => side.any_word(|w| self.contains_word(w)),
        }
    }
}

/// Named test families for hitting experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Random,
    Subcube,
    Ball,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Random => "random",
            Family::Subcube => "subcube",
            Family::Ball => "ball",
        }
    }

    /// A set of density about 2^{-h} in {0,1}ⁿ, determined by `seed`.
    /// Subcubes fix the first `h` bits to a nonzero prefix; balls are centered
    /// at a pseudorandom word.
    pub fn build(self, n: usize, h: u32, seed: u64) -> Result<VectorSet, HittingError> {
        if n == 0 || n > 64 || h as usize > n {
            return Err(HittingError::Length(h as usize, n));
        }
        let key = mix64(seed ^ 0x6a09_e667_f3bc_c909);
        Ok(match self {
            Family::Random => VectorSet::Hashed {
                n,
                key,
                log2_inv_density: h,
            },
            Family::Subcube => {
                let len = h as usize;
                let prefix = if len == 0 {
                    0
                } else {
                    1 + key % crate::gf2::low_mask(len).max(1)
                };
                VectorSet::Subcube {
                    n,
                    len,
                    prefix: prefix & crate::gf2::low_mask(len),
                }
            }
            Family::Ball => VectorSet::ball_of_density(n, key & crate::gf2::low_mask(n), h),
        })
    }
}

impl std::str::FromStr for Family {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "random" => Ok(Family::Random),
            "subcube" => Ok(Family::Subcube),
            "ball" => Ok(Family::Ball),
            _ => Err(format!("unknown family {s:?}")),
        }
    }
}

/// Miss-probability bound the hitting distribution of `g` promises against
/// sides of density 2^{-h}: 2·2^{-εn/4} with ε = ½ − h/n for IP, 2^{-n/100}
/// for gap-Hamming.
pub fn hitting_bound(g: &Gadget, h: u32) -> Result<f64, HittingError> {
    match *g {
        Gadget::Ip { n } => {
            let eps = 0.5 - h as f64 / n as f64;
            Ok(2.0 * (-eps * n as f64 / 4.0).exp2())
        }
        Gadget::Gh { n, .. } => Ok((-(n as f64) / 100.0).exp2()),
        Gadget::Ind { .. } => Err(HittingError::Unsupported(*g)),
    }
}

/// Default density exponent for gap-Hamming experiments: round(n/100), at least 1.
pub fn gh_default_h(n: usize) -> u32 {
    (((n + 50) / 100).max(1)) as u32
}

/// 95% Wilson score interval for `k` successes out of `trials`.
pub fn wilson_interval(k: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub const WILSON_Z: f64 = 1.96;

/// Result of a Monte Carlo hitting experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HittingEstimate {
    pub trials: u64,
    pub misses: u64,
    #[serde(serialize_with = "ser_display")]
    pub miss_rate: Rational,
    pub wilson_lower_95: f64,
    pub wilson_upper_95: f64,
    pub seed_base: u64,
    /// Mean and variance of the per-trial miss indicator.
    pub mean: f64,
    pub variance: f64,
    /// Set when a side is sparser than 2^{-h}, outside the hitting guarantee.
    pub below_density: bool,
}

fn ser_display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

impl HittingEstimate {
    /// Half-width of the Wilson interval.
    pub fn wilson_error(&self) -> f64 {
        (self.wilson_upper_95 - self.wilson_lower_95) / 2.0
    }

    /// miss_rate ≤ bound + 3·(Wilson error).
    pub fn within(&self, bound: f64) -> bool {
        self.misses as f64 / self.trials as f64 <= bound + 3.0 * self.wilson_error()
    }
}

/// Draws `trials` rectangles from σ_c (trial t seeded with seed_base + t) and
/// counts those missing A × B.
pub fn estimate_hitting(
    g: &Gadget,
    c: bool,
    a: &VectorSet,
    b: &VectorSet,
    trials: u64,
    seed_base: u64,
    h: Option<u32>,
) -> Result<HittingEstimate, HittingError> {
    if trials == 0 {
        return Err(HittingError::NoTrials);
    }
    if a.is_empty() || b.is_empty() {
        return Err(HittingError::EmptySide);
    }
    if a.n() != g.alice_len() || b.n() != g.bob_len() {
        return Err(HittingError::Length(a.n(), g.alice_len()));
    }
    let mut misses = 0u64;
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(t));
        let rect = sample_sigma(g, c, &mut rng)?;
        if !(a.meets(&rect.u) && b.meets(&rect.v)) {
            misses += 1;
        }
    }
    let (lo, hi) = wilson_interval(misses, trials, WILSON_Z);
    let mean = misses as f64 / trials as f64;
    let below_density = h.is_some_and(|h| {
        let floor = -(h as f64) - 1e-9;
        a.log2_density() < floor || b.log2_density() < floor
    });
    Ok(HittingEstimate {
        trials,
        misses,
        miss_rate: Rational::new(misses as i128, trials as i128),
        wilson_lower_95: lo,
        wilson_upper_95: hi,
        seed_base,
        mean,
        variance: mean * (1.0 - mean),
        below_density,
    })
}

/// Exact Pr_{R∼σ_c}[R misses A × B] by weighting the enumerated support.
pub fn exact_miss_probability(
    g: &Gadget,
    c: bool,
    a: &VectorSet,
    b: &VectorSet,
) -> Result<Rational, HittingError> {
    let support = enumerate_support(g, c)?;
    let misses = support
        .iter()
        .filter(|r| !(a.meets(&r.u) && b.meets(&r.v)))
        .count();
    Ok(Rational::new(misses as i128, support.len() as i128))
}

/// Exact hitting failure for the Gap-Hamming worst case: A = smallest ball
/// B_r(0) with at least 2^{⌈e·n⌉} points, e = num/den.
#[derive(Debug, Clone, PartialEq)]
pub struct GhWorstCase {
    pub n: usize,
    pub radius: usize,
    /// Σ_{k > r + n/8} C(n, k).
    pub tail_count: BigUint,
    /// tail_count / 2ⁿ.
    pub miss_probability: BigRational,
    /// miss_probability ≤ 2^{-n/100}, decided exactly.
    pub within_bound: bool,
    /// Miss probability when centers are drawn from weight-n/2 strings only:
    /// 1 if n/2 > r + n/8, else 0.
    pub miss_over_half_weight: u8,
}

pub fn binomial_row(n: usize) -> Vec<BigUint> {
    let mut row = Vec::with_capacity(n + 1);
    let mut cur = BigUint::one();
    for k in 0..=n {
        row.push(cur.clone());
        cur = cur * BigUint::from(n - k) / BigUint::from(k + 1);
    }
    row
}

pub fn gh_worst_case(n: usize, num: u64, den: u64) -> Result<GhWorstCase, HittingError> {
    if n == 0 || !n.is_multiple_of(8) {
        return Err(HittingError::GhDivisibility(n));
    }
    if den == 0 {
        return Err(HittingError::NoBudget);
    }
    let exp = (n as u64 * num).div_ceil(den).min(n as u64) as usize;
    let target = BigUint::one() << exp;
    let row = binomial_row(n);
    let mut acc = BigUint::zero();
    let mut radius = n;
    for (r, c) in row.iter().enumerate() {
        acc += c;
        if acc >= target {
            radius = r;
            break;
        }
    }
    let reach = radius + n / 8;
    let tail_count: BigUint = row.iter().skip(reach + 1).sum();
    let miss_probability =
        BigRational::new(tail_count.clone().into(), (BigUint::one() << n).into());
    // T / 2ⁿ ≤ 2^{-n/100}  ⟺  T¹⁰⁰ ≤ 2^{99n}
    let within_bound = tail_count.pow(100) <= BigUint::one() << (99 * n);
    Ok(GhWorstCase {
        n,
        radius,
        tail_count,
        miss_probability,
        within_bound,
        miss_over_half_weight: u8::from(n / 2 > reach),
    })
}

/// Concentration of |B ∩ V| / |V| for random V of dimension d and a hashed
/// set B of density 2^{-log2_inv_density}.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Concentration {
    pub trials: u64,
    pub failures: u64,
    pub tolerance: f64,
    pub mean_ratio: f64,
    pub variance_ratio: f64,
}

/// Counts trials where |B∩V|/|V| leaves β(1 ± tolerance).
pub fn subspace_concentration(
    n: usize,
    d: usize,
    log2_inv_density: u32,
    tolerance: f64,
    trials: u64,
    seed: u64,
) -> Result<Concentration, HittingError> {
    if trials == 0 {
        return Err(HittingError::NoTrials);
    }
    let beta = (-(log2_inv_density as f64)).exp2();
    let set = VectorSet::Hashed {
        n,
        key: mix64(seed ^ 0x5eed),
        log2_inv_density,
    };
    let (mut failures, mut sum, mut sum_sq) = (0u64, 0f64, 0f64);
    for t in 0..trials {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t));
        let v = sample_subspace(n, d, &mut rng)?;
        let hits = v.elements().filter(|&w| set.contains_word(w)).count();
        let ratio = hits as f64 / v.size() as f64;
        if (ratio - beta).abs() > beta * tolerance {
            failures += 1;
        }
        sum += ratio;
        sum_sq += ratio * ratio;
    }
    let mean = sum / trials as f64;
    Ok(Concentration {
        trials,
        failures,
        tolerance,
        mean_ratio: mean,
        variance_ratio: (sum_sq / trials as f64 - mean * mean).max(0.0),
    })
}

/// How [`find_witness`] searches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WitnessMode {
    /// Round by round, up to `budget` sampled rectangles per coordinate.
    Sample,
    /// Round by round, scanning the whole support of σ_{zᵢ}.
    Enumerate,
    /// Depth-first search over Alice values; definitive.
    Exhaustive,
}

/// A pair (a, b) ∈ A × B with g(aᵢ, bᵢ) = zᵢ for every i in `coords`, or
/// `None`. Only exhaustive mode proves nonexistence.
pub fn find_witness(
    rect: &Rect,
    coords: &IndexSet,
    z: &[bool],
    g: &Gadget,
    mode: WitnessMode,
    budget: u64,
    seed: u64,
) -> Result<Option<(PackedTuple, PackedTuple)>, HittingError> {
    if coords.len() != z.len() {
        return Err(HittingError::Length(coords.len(), z.len()));
    }
    if mode != WitnessMode::Exhaustive && budget == 0 {
        return Err(HittingError::NoBudget);
    }
    if rect.is_empty() {
        return Ok(None);
    }
    let (mut a, mut b) = (rect.alice.clone(), rect.bob.clone());
    if mode == WitnessMode::Exhaustive {
        return Ok(exhaustive(&a, &b, coords.as_slice(), z, g));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (&i, &zi) in coords.as_slice().iter().zip(z) {
        let col_a = a.project_onto(&[i]);
        let col_b = b.project_onto(&[i]);
        let meets = |r: &MonoRect| {
            col_a.codes().iter().any(|&u| r.u.contains_word(u))
                && col_b.codes().iter().any(|&v| r.v.contains_word(v))
        };
        let chosen = match mode {
            WitnessMode::Enumerate => enumerate_support(g, zi)?.into_iter().find(|r| meets(r)),
            _ => {
                let mut found = None;
                for _ in 0..budget {
                    let r = sample_sigma(g, zi, &mut rng)?;
                    if meets(&r) {
                        found = Some(r);
                        break;
                    }
                }
                found
            }
        };
        let Some(r) = chosen else { return Ok(None) };
        a = a
            .restrict_by(i, |u| r.u.contains_word(u))
            .expect("coordinate in range");
        b = b
            .restrict_by(i, |v| r.v.contains_word(v))
            .expect("coordinate in range");
    }
    let pair = a.iter().next().zip(b.iter().next());
    Ok(pair)
}

fn exhaustive(
    a: &TupleSet,
    b: &TupleSet,
    coords: &[usize],
    z: &[bool],
    g: &Gadget,
) -> Option<(PackedTuple, PackedTuple)> {
    let Some((&i, rest)) = coords.split_first() else {
        let pair = a.iter().next().zip(b.iter().next());
        return pair;
    };
    let bob_col = b.project_onto(&[i]);
    for &u in a.project_onto(&[i]).codes() {
        let good: Vec<u64> = bob_col
            .codes()
            .iter()
            .copied()
            .filter(|&v| g.eval_words(u, v).is(z[0]))
            .collect();
        if good.is_empty() {
            continue;
        }
        let a2 = a.restrict_by(i, |w| w == u).expect("coordinate in range");
        let b2 = b
            .restrict_by(i, |w| good.binary_search(&w).is_ok())
            .expect("coordinate in range");
        if let Some(pair) = exhaustive(&a2, &b2, rest, &z[1..], g) {
            return Some(pair);
        }
    }
    None
}

/// Whether g is defined and equal to zᵢ on every pair of column i.
pub fn columns_consistent(a: &TupleSet, b: &TupleSet, i: usize, zi: bool, g: &Gadget) -> bool {
    let col_b = b.project_onto(&[i]);
    a.project_onto(&[i]).codes().iter().all(|&u| {
        col_b
            .codes()
            .iter()
            .all(|&v| g.eval_words(u, v) == GadgetValue::from_bit(zi))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::count_cutoff;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn weight_k_enumeration() {
        for n in 1..=8 {
            for k in 0..=n {
                let words: Vec<u64> = weight_k_words(n, k).collect();
                let expect: Vec<u64> = (0u64..1 << n)
                    .filter(|w| w.count_ones() as usize == k)
                    .collect();
                assert_eq!(words, expect, "n={n} k={k}");
            }
        }
        assert_eq!(weight_k_words(64, 64).count(), 1);
        assert_eq!(weight_k_words(64, 1).count(), 64);
    }

    #[test]
    fn ip_sigma_examples() {
        let mut r = rng(1);
        for _ in 0..200 {
            let rect = sample_sigma_ip(4, false, &mut r).unwrap();
            assert_eq!((rect.u.size(), rect.v.size()), (4, 4));
            assert_eq!(rect.verify().unwrap(), None);
            let rect = sample_sigma_ip(5, true, &mut r).unwrap();
            assert_eq!(rect.verify().unwrap(), None);
            let rect = sample_sigma_ip(4, true, &mut r).unwrap();
            assert_eq!((rect.u.size(), rect.v.size()), (4, 2));
            assert_eq!(rect.verify().unwrap(), None);
        }
        assert_eq!(
            sample_sigma_ip(5, false, &mut r),
            Err(HittingError::IpParity(5))
        );
    }

    #[test]
    fn gh_sigma_examples() {
        let mut r = rng(2);
        for c in [false, true] {
            for _ in 0..100 {
                let rect = sample_sigma_gh(8, c, &mut r).unwrap();
                assert_eq!(rect.verify().unwrap(), None);
                let Side::Ball { center, radius } = &rect.u else {
                    panic!()
                };
                assert_eq!((center.weight(), *radius), (4, 1));
            }
        }
        let rect = sample_sigma_gh(16, false, &mut r).unwrap();
        assert_eq!(rect.u.size(), 137);
        assert_eq!(rect.u.words().len(), 137);
        assert_eq!(rect.verify().unwrap(), None);
        assert_eq!(
            sample_sigma_gh(12, false, &mut r),
            Err(HittingError::GhDivisibility(12))
        );
    }

    #[test]
    fn support_counts() {
        let ip4 = Gadget::ip(4).unwrap();
        assert_eq!(enumerate_support(&ip4, false).unwrap().len(), 35);
        assert_eq!(enumerate_support(&ip4, true).unwrap().len(), 56);
        let gh8 = gh_quarter(8).unwrap();
        assert_eq!(enumerate_support(&gh8, false).unwrap().len(), 70);
        for c in [false, true] {
            for r in enumerate_support(&ip4, c).unwrap() {
                assert_eq!(r.verify().unwrap(), None);
            }
            for r in enumerate_support(&Gadget::ip(6).unwrap(), c).unwrap() {
                assert_eq!(r.verify().unwrap(), None);
            }
        }
        assert!(enumerate_support(&Gadget::ip(8).unwrap(), false).is_err());
    }

    #[test]
    fn full_cube_never_missed() {
        let ip = Gadget::ip(6).unwrap();
        let full = VectorSet::Subcube {
            n: 6,
            len: 0,
            prefix: 0,
        };
        let est = estimate_hitting(&ip, true, &full, &full, 500, 0, None).unwrap();
        assert_eq!(est.misses, 0);
        assert_eq!(est.miss_rate, Rational::from_integer(0));
        assert!(estimate_hitting(&ip, true, &full, &full, 0, 0, None).is_err());
    }

    #[test]
    fn monte_carlo_matches_exact_support_weighting() {
        let ip = Gadget::ip(4).unwrap();
        let a = VectorSet::Explicit {
            n: 4,
            words: vec![3, 5, 14],
        };
        let b = VectorSet::Explicit {
            n: 4,
            words: vec![6, 9],
        };
        for c in [false, true] {
            let exact = exact_miss_probability(&ip, c, &a, &b).unwrap();
            let est = estimate_hitting(&ip, c, &a, &b, 20_000, 77, None).unwrap();
            let p = crate::scalar::Scalar::to_f64(&exact);
            let (lo, hi) = (est.wilson_lower_95, est.wilson_upper_95);
            let slack = 2.0 * est.wilson_error();
            assert!(
                lo - slack <= p && p <= hi + slack,
                "c={c}: exact {p} vs [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn sparse_sets_flagged() {
        let ip = Gadget::ip(6).unwrap();
        let a = VectorSet::Explicit {
            n: 6,
            words: vec![1],
        };
        let est = estimate_hitting(&ip, false, &a, &a, 10, 0, Some(2)).unwrap();
        assert!(est.below_density);
        let dense = VectorSet::Subcube {
            n: 6,
            len: 2,
            prefix: 1,
        };
        assert!(
            !estimate_hitting(&ip, false, &dense, &dense, 10, 0, Some(2))
                .unwrap()
                .below_density
        );
    }

    #[test]
    fn wilson_sanity() {
        let (lo, hi) = wilson_interval(0, 10_000, WILSON_Z);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 5e-4);
        let (lo, hi) = wilson_interval(50, 100, WILSON_Z);
        assert!((lo + hi - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gh_worst_case_values() {
        let full = gh_worst_case(64, 1, 1).unwrap();
        assert_eq!(full.radius, 64);
        assert!(full.tail_count.is_zero());
        let small = gh_worst_case(8, 99, 100).unwrap();
        // 2^8 = 256 needs the whole cube: radius 8
        assert_eq!(small.radius, 8);
        let w = gh_worst_case(400, 99, 100).unwrap();
        assert!(w.within_bound);
        let bound = BigRational::new(1.into(), 16.into());
        assert!(w.miss_probability <= bound);
        // independent tail from the complement: 2ⁿ minus the head
        let row = binomial_row(400);
        let head: BigUint = row.iter().take(w.radius + 50 + 1).sum();
        assert_eq!(w.tail_count, (BigUint::one() << 400u32) - head);
    }

    #[test]
    fn witness_examples() {
        let ip2 = Gadget::ip(2).unwrap();
        let full = TupleSet::full(2, 1).unwrap();
        let rect = Rect::new(full.clone(), full).unwrap();
        for mode in [
            WitnessMode::Sample,
            WitnessMode::Enumerate,
            WitnessMode::Exhaustive,
        ] {
            let (a, b) = find_witness(&rect, &IndexSet::all(1), &[true], &ip2, mode, 100, 0)
                .unwrap()
                .unwrap();
            assert!(ip2.eval_words(a.code(), b.code()).is(true));
        }
        let ip3 = Gadget::ip(3).unwrap();
        let alice = TupleSet::from_codes(3, 2, [0, 9]).unwrap();
        let bob = TupleSet::full(3, 2).unwrap();
        let rect = Rect::new(alice, bob).unwrap();
        let (a, _) = find_witness(
            &rect,
            &IndexSet::all(2),
            &[false, false],
            &ip3,
            WitnessMode::Exhaustive,
            0,
            0,
        )
        .unwrap()
        .unwrap();
        assert!(a.code() == 0 || a.code() == 9);
        assert_eq!(
            find_witness(
                &rect,
                &IndexSet::all(2),
                &[true],
                &ip3,
                WitnessMode::Sample,
                0,
                0
            ),
            Err(HittingError::Length(2, 1))
        );
    }

    fn random_thick(r: &mut ChaCha8Rng, n: usize, p: usize, tau: &Rational) -> TupleSet {
        loop {
            let density = r.gen_range(0.3..1.0);
            let codes: Vec<u64> = (0..1u64 << (n * p))
                .filter(|_| r.gen_bool(density))
                .collect();
            let set = TupleSet::from_codes(n, p, codes)
                .unwrap()
                .prune_below(count_cutoff(tau, 1 << n));
            if !set.is_empty() {
                return set;
            }
        }
    }

    #[test]
    fn enumerate_witness_is_sound_and_exhaustive_is_complete() {
        let ip2 = Gadget::ip(2).unwrap();
        let mut r = rng(3);
        let (mut agree, mut total) = (0, 0);
        for tau in [Rational::new(1, 4), Rational::new(3, 4)] {
            for _ in 0..500 {
                let a = random_thick(&mut r, 2, 2, &tau);
                let b = random_thick(&mut r, 2, 2, &tau);
                let rect = Rect::new(a, b).unwrap();
                let z = [r.gen_bool(0.5), r.gen_bool(0.5)];
                let coords = IndexSet::all(2);
                let ex =
                    find_witness(&rect, &coords, &z, &ip2, WitnessMode::Exhaustive, 0, 0).unwrap();
                let en =
                    find_witness(&rect, &coords, &z, &ip2, WitnessMode::Enumerate, 1, 0).unwrap();
                if let Some((a, b)) = en {
                    assert!(rect.alice.contains_code(a.code()) && rect.bob.contains_code(b.code()));
                    for (i, &zi) in z.iter().enumerate() {
                        assert!(ip2.eval_words(a.coord(i), b.coord(i)).is(zi));
                    }
                    assert!(ex.is_some());
                }
                if tau == Rational::new(3, 4) {
                    assert_eq!(
                        en.is_some(),
                        ex.is_some(),
                        "3/4-thick rectangles always admit the round-by-round witness"
                    );
                }
                agree += usize::from(en.is_some() == ex.is_some());
                total += 1;
            }
        }
        assert!(agree * 10 >= total * 9, "agreement {agree}/{total}");
    }

    #[test]
    fn concentration_small() {
        let c = subspace_concentration(12, 6, 3, 0.9, 200, 1).unwrap();
        assert!(c.failures < 20);
        assert!((c.mean_ratio - 0.125).abs() < 0.03);
    }
}
