//! The simulation procedure: runs a protocol for f ∘ gᵖ against a maintained
//! thick rectangle A × B, querying z only when average-thickness fails, and
//! reads f(z) off the protocol leaf. Also extracts the whole decision tree by
//! forking at every query.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::gadgets::{Gadget, Label, TruthTable};
use crate::hitting::{
    columns_consistent, enumerate_support, find_witness, mix64, sample_sigma, HittingError,
    MonoRect, Side, WitnessMode,
};
use crate::protocol::{partition_by_bit, Owner, Protocol, ProtocolError, Transcript};
use crate::scalar::{count_cutoff, Scalar};
use crate::tupleset::{IndexSet, Rect, TupleSet, TupleSetError, MAX_FULL_BITS};
use crate::Rational;

/// How a monochromatic rectangle is picked at a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RectMode {
    /// Draw from σ_{zᵢ} up to `max_attempts` times.
    Sample { max_attempts: u64 },
    /// Scan the full support of σ_{zᵢ} in enumeration order.
    Enumerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig<S: Scalar> {
    pub eps: S,
    pub delta: S,
    pub h: u32,
    pub tau: S,
    pub phi: S,
    pub rect_mode: RectMode,
    pub seed: u64,
    /// When off, a query may take a rectangle that is thick but misses the
    /// density-gain conditions, and a communication step may prune straight
    /// to τ-thickness. Such steps are flagged in the trace.
    pub require_gain: bool,
    pub check_invariants: bool,
    /// Enforce δ < 1/6, εh ≥ 6 and p ≤ 2^{h(1−ε)} instead of warning.
    pub strict: bool,
}

impl<S: Scalar> SimulationConfig<S> {
    /// τ = 2^{−h}, φ = 4·2^{−εh}, enumerate mode, gains required.
    pub fn new(eps: S, delta: S, h: u32) -> Self {
        let tau = S::pow2(-(h as i32));
        let phi = S::from_count(4) * (S::zero() - eps.clone() * S::from_count(h as u64)).exp2();
        SimulationConfig {
            eps,
            delta,
            h,
            tau,
            phi,
            rect_mode: RectMode::Enumerate,
            seed: 0,
            require_gain: true,
            check_invariants: false,
            strict: false,
        }
    }

    /// Checks ranges; returns warnings for the preconditions that only strict
    /// mode enforces.
    pub fn validate(&self, p: usize) -> Result<Vec<String>, EngineError> {
        let (zero, one) = (S::zero(), S::one());
        if !(zero < self.eps && self.eps < one) {
            return Err(EngineError::Config(format!(
                "eps = {} must lie in (0, 1)",
                self.eps
            )));
        }
        if self.h == 0 {
            return Err(EngineError::Config("h must be at least 1".into()));
        }
        if !(zero < self.tau && self.tau <= one) {
            return Err(EngineError::Config(format!(
                "tau = {} must lie in (0, 1]",
                self.tau
            )));
        }
        if !(zero < self.phi && self.phi <= one) {
            return Err(EngineError::Config(format!(
                "phi = {} must lie in (0, 1]",
                self.phi
            )));
        }
        if !(zero < self.delta && self.delta < one) {
            return Err(EngineError::Config(format!(
                "delta = {} must lie in (0, 1)",
                self.delta
            )));
        }
        if let RectMode::Sample { max_attempts: 0 } = self.rect_mode {
            return Err(EngineError::Config("max attempts must be positive".into()));
        }
        let mut warnings = Vec::new();
        if self.delta >= S::from_ratio(1, 6) {
            warnings.push(format!("delta = {} is not below 1/6", self.delta));
        }
        let eh = self.eps.clone() * S::from_count(self.h as u64);
        if eh < S::from_count(6) {
            warnings.push(format!("eps*h = {} is below 6", eh.to_f64()));
        }
        let room = (S::from_count(self.h as u64) * (one - self.eps.clone())).exp2();
        if S::from_count(p as u64) > room {
            warnings.push(format!("p = {p} exceeds 2^(h(1-eps))"));
        }
        if self.strict && !warnings.is_empty() {
            return Err(EngineError::Config(warnings.join("; ")));
        }
        Ok(warnings)
    }

    /// ⌈2C/(εh − 3)⌉ when εh ≥ 6.
    pub fn query_bound(&self, cost: usize) -> Option<u64> {
        let eh = self.eps.clone() * S::from_count(self.h as u64);
        if eh < S::from_count(6) {
            return None;
        }
        let x = S::from_count(2 * cost as u64) / (eh - S::from_count(3));
        let mut k = 0u64;
        while S::from_count(k) < x {
            k += 1;
        }
        Some(k)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stuck: {0}")]
    Stuck(Box<StuckReport>),
    #[error("rectangle became empty at step {0}")]
    Empty(usize),
    #[error("invariant violated at step {step}: {what}")]
    Invariant { step: usize, what: String },
    #[error("no simulation support for gadget {0}")]
    Unsupported(Gadget),
    #[error("n*p = {0} bits exceeds the explicit-set limit")]
    TooLarge(usize),
    #[error("input z has {got} bits, f has arity {expected}")]
    Arity { expected: usize, got: usize },
    #[error(transparent)]
    Hitting(#[from] HittingError),
    #[error(transparent)]
    TupleSet(#[from] TupleSetError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

/// Why no admissible step was found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StuckReport {
    pub step: usize,
    pub transcript: String,
    pub branch: String,
    /// 1-based coordinate for query steps.
    pub coord: Option<usize>,
    pub candidates: u64,
    pub thick_candidates: u64,
    /// Best min(gain ratio) among thick candidates; ≥ 1 means admissible.
    pub best_gain_ratio: Option<f64>,
    pub reason: String,
}

impl std::fmt::Display for StuckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} at step {} (transcript {}): {}",
            self.branch, self.step, self.transcript, self.reason
        )?;
        if let Some(i) = self.coord {
            write!(f, "; coordinate {i}")?;
        }
        write!(
            f,
            "; {} candidates, {} thick",
            self.candidates, self.thick_candidates
        )?;
        if let Some(r) = self.best_gain_ratio {
            write!(f, ", best gain ratio {r:.4}")?;
        }
        Ok(())
    }
}

/// One line of the trace. Densities are exact: |A_I| / 2^{n|I|}.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "lowercase")]
pub enum TraceEvent {
    Comm {
        step: usize,
        owner: String,
        bit: u8,
        alpha_before: String,
        beta_before: String,
        alpha_after: String,
        beta_after: String,
        quarter_ok: bool,
        relaxed: bool,
    },
    Query {
        step: usize,
        index: usize,
        z: u8,
        thin_side: String,
        rect: String,
        candidates: u64,
        alpha_before: String,
        beta_before: String,
        alpha_after: String,
        beta_after: String,
        gain_ok: bool,
        relaxed: bool,
    },
    Leaf {
        step: usize,
        label: Label,
        unqueried: Vec<usize>,
        witness: Option<bool>,
    },
}

/// Simulation state: transcript, full-width A and B, unqueried coordinates I.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub transcript: Transcript,
    pub alice: TupleSet,
    pub bob: TupleSet,
    pub free: IndexSet,
    pub queried: BTreeMap<usize, bool>,
    pub query_count: usize,
    pub steps: usize,
    pub relaxed_steps: usize,
    /// Query answers in order; seeds the per-query RNG.
    path: Vec<bool>,
    pending: Option<(usize, Owner)>,
}

/// What [`Simulator::advance`] did.
#[derive(Debug, Clone, PartialEq)]
pub enum Advance {
    Communicated,
    /// zᵢ is needed (0-based i); answer with [`Simulator::answer`].
    NeedQuery(usize),
    Leaf(Label),
}

/// Result of one run on a known z.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub label: Label,
    pub trace: Vec<TraceEvent>,
    pub query_count: usize,
    pub comm_used: usize,
    pub cost_bound: usize,
    pub query_bound: Option<u64>,
    pub relaxed_steps: usize,
    pub witness: Option<bool>,
    pub warnings: Vec<String>,
}

impl RunOutcome {
    pub fn bound_check(&self) -> &'static str {
        match self.query_bound {
            None => "not_applicable",
            Some(b) if self.query_count as u64 <= b => "pass",
            Some(_) => "fail",
        }
    }

    pub fn summary(&self) -> Value {
        json!({
            "event": "summary",
            "label": self.label,
            "query_count": self.query_count,
            "comm_cost_used": self.comm_used,
            "cost_bound": self.cost_bound,
            "query_bound": self.query_bound,
            "bound_check": self.bound_check(),
            "relaxed_steps": self.relaxed_steps,
            "witness": self.witness,
            "warnings": self.warnings,
        })
    }

    /// Trace events followed by the summary, one JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.trace {
            out.push_str(&serde_json::to_string(e).expect("trace serializes"));
            out.push('\n');
        }
        out.push_str(&self.summary().to_string());
        out.push('\n');
        out
    }
}

/// Decision tree whose branches may end in a stuck simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum PartialTree {
    Leaf(Label),
    Stuck(String),
    Query {
        index: usize,
        zero: Box<PartialTree>,
        one: Box<PartialTree>,
    },
}

impl PartialTree {
    pub fn depth(&self) -> usize {
        match self {
            PartialTree::Leaf(_) | PartialTree::Stuck(_) => 0,
            PartialTree::Query { zero, one, .. } => 1 + zero.depth().max(one.depth()),
        }
    }

    pub fn stuck_leaves(&self) -> usize {
        match self {
            PartialTree::Leaf(_) => 0,
            PartialTree::Stuck(_) => 1,
            PartialTree::Query { zero, one, .. } => zero.stuck_leaves() + one.stuck_leaves(),
        }
    }

    /// The tree, if no branch got stuck.
    pub fn complete(&self) -> Option<crate::protocol::DecisionTree> {
        use crate::protocol::DecisionTree;
        match self {
            PartialTree::Leaf(l) => Some(DecisionTree::Leaf(l.clone())),
            PartialTree::Stuck(_) => None,
            PartialTree::Query { index, zero, one } => Some(DecisionTree::query(
                *index,
                zero.complete()?,
                one.complete()?,
            )),
        }
    }

    /// Decision-tree JSON with `{"stuck": reason}` for stuck branches.
    pub fn to_json_value(&self) -> Value {
        match self {
            PartialTree::Leaf(l) => json!({ "leaf": l }),
            PartialTree::Stuck(r) => json!({ "stuck": r }),
            PartialTree::Query { index, zero, one } => {
                json!({ "query": index + 1, "0": zero.to_json_value(), "1": one.to_json_value() })
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtractOutcome {
    pub tree: PartialTree,
    pub max_queries: usize,
    pub relaxed_steps: usize,
    pub leaves: usize,
}

/// Runs the simulation for a fixed (f, g, protocol, config).
pub struct Simulator<'a, S: Scalar> {
    f: &'a TruthTable,
    g: Gadget,
    protocol: &'a dyn Protocol,
    cfg: &'a SimulationConfig<S>,
    warnings: Vec<String>,
    supports: [OnceLock<Result<Vec<MonoRect>, HittingError>>; 2],
    n: usize,
    p: usize,
    tau_cutoff: u64,
}

fn density(len: usize, bits: usize) -> String {
    Rational::new(len as i128, 1i128 << bits).to_string()
}

/// Per value of coordinate i, the bitmap of projections onto the remaining
/// unqueried coordinates.
struct Groups {
    n: usize,
    k: usize,
    words: usize,
    groups: Vec<(u64, Vec<u64>)>,
}

impl Groups {
    fn build(set: &TupleSet, i: usize, rest: &[usize]) -> Self {
        let (n, k) = (set.n(), rest.len());
        let words = (1usize << (n * k)).div_ceil(64);
        let mut map: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &c in set.codes() {
            let r = set.project_code(c, rest) as usize;
            let bm = map
                .entry(set.coord(c, i))
                .or_insert_with(|| vec![0u64; words]);
            bm[r / 64] |= 1u64 << (r % 64);
        }
        Groups {
            n,
            k,
            words,
            groups: map.into_iter().collect(),
        }
    }

    fn union_for(&self, side: &Side) -> Vec<u64> {
        let mut out = vec![0u64; self.words];
        for (v, bm) in &self.groups {
            if side.contains_word(*v) {
                out.iter_mut().zip(bm).for_each(|(o, b)| *o |= b);
            }
        }
        out
    }

    /// (size, thick at `cutoff`) of a projected set given as a bitmap.
    fn stats(&self, bm: &[u64], cutoff: u64, counts: &mut Vec<u32>) -> (u64, bool) {
        let size: u64 = bm.iter().map(|w| w.count_ones() as u64).sum();
        if size == 0 || self.k == 0 {
            return (size, true);
        }
        let (n, k) = (self.n, self.k);
        for j in 0..k {
            let low_bits = n * (k - 1 - j);
            counts.clear();
            counts.resize(1usize << (n * (k - 1)), 0);
            for (wi, &w) in bm.iter().enumerate() {
                let mut w = w;
                while w != 0 {
                    let r = wi * 64 + w.trailing_zeros() as usize;
                    w &= w - 1;
                    let high = r >> (low_bits + n);
                    let low = r & ((1usize << low_bits) - 1);
                    counts[(high << low_bits) | low] += 1;
                }
            }
            if counts.iter().any(|&c| c > 0 && (c as u64) < cutoff) {
                return (size, false);
            }
        }
        (size, true)
    }
}

struct Choice {
    rect: MonoRect,
    alice_len: u64,
    bob_len: u64,
    gain_ok: bool,
}

impl<'a, S: Scalar> Simulator<'a, S> {
    pub fn new(
        f: &'a TruthTable,
        g: Gadget,
        protocol: &'a dyn Protocol,
        cfg: &'a SimulationConfig<S>,
    ) -> Result<Self, EngineError> {
        let n = g.alice_len();
        let p = f.arity();
        match g {
            Gadget::Ip { .. } => {}
            Gadget::Gh { n, k } if n % 8 == 0 && 4 * k <= n => {}
            _ => return Err(EngineError::Unsupported(g)),
        }
        if n * p > MAX_FULL_BITS {
            return Err(EngineError::TooLarge(n * p));
        }
        let warnings = cfg.validate(p)?;
        let tau_cutoff = count_cutoff(&cfg.tau, 1u64 << n);
        Ok(Simulator {
            f,
            g,
            protocol,
            cfg,
            warnings,
            supports: [OnceLock::new(), OnceLock::new()],
            n,
            p,
            tau_cutoff,
        })
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn initial_state(&self) -> Result<SimulationState, EngineError> {
        Ok(SimulationState {
            transcript: Transcript::default(),
            alice: TupleSet::full(self.n, self.p)?,
            bob: TupleSet::full(self.n, self.p)?,
            free: IndexSet::all(self.p),
            queried: BTreeMap::new(),
            query_count: 0,
            steps: 0,
            relaxed_steps: 0,
            path: Vec::new(),
            pending: None,
        })
    }

    fn support(&self, c: bool) -> Result<&[MonoRect], EngineError> {
        let cell = &self.supports[c as usize];
        match cell.get_or_init(|| enumerate_support(&self.g, c)) {
            Ok(v) => Ok(v),
            Err(e) => Err(e.clone().into()),
        }
    }

    fn stuck(
        &self,
        st: &SimulationState,
        branch: &str,
        coord: Option<usize>,
        reason: String,
    ) -> StuckReport {
        StuckReport {
            step: st.steps,
            transcript: st.transcript.to_string(),
            branch: branch.to_string(),
            coord: coord.map(|i| i + 1),
            candidates: 0,
            thick_candidates: 0,
            best_gain_ratio: None,
            reason,
        }
    }

    /// Takes one step of the loop, stopping before a query is answered.
    pub fn advance(
        &self,
        st: &mut SimulationState,
        trace: &mut Vec<TraceEvent>,
    ) -> Result<Advance, EngineError> {
        if let Some((i, _)) = st.pending {
            return Ok(Advance::NeedQuery(i));
        }
        let owner = self.protocol.owner(&st.transcript);
        if owner == Owner::Leaf {
            let label = self
                .protocol
                .label(&st.transcript)
                .expect("leaf has a label");
            return Ok(Advance::Leaf(label));
        }
        let coords = st.free.as_slice().to_vec();
        let a_proj = st.alice.project_onto(&coords);
        let b_proj = st.bob.project_onto(&coords);
        if let Some(j) = a_proj.first_thin_coord(&self.cfg.phi) {
            st.pending = Some((coords[j], Owner::Alice));
            return Ok(Advance::NeedQuery(coords[j]));
        }
        if let Some(j) = b_proj.first_thin_coord(&self.cfg.phi) {
            st.pending = Some((coords[j], Owner::Bob));
            return Ok(Advance::NeedQuery(coords[j]));
        }
        self.communicate(st, owner, &coords, &a_proj, &b_proj, trace)?;
        Ok(Advance::Communicated)
    }

    fn communicate(
        &self,
        st: &mut SimulationState,
        owner: Owner,
        coords: &[usize],
        a_proj: &TupleSet,
        b_proj: &TupleSet,
        trace: &mut Vec<TraceEvent>,
    ) -> Result<(), EngineError> {
        let bits = self.n * coords.len();
        let side = if owner == Owner::Alice {
            &st.alice
        } else {
            &st.bob
        };
        let side_proj = if owner == Owner::Alice {
            a_proj
        } else {
            b_proj
        };
        let (part0, part1) = partition_by_bit(self.protocol, &st.transcript, owner, side)?;
        let children = [part0.project_onto(coords), part1.project_onto(coords)];
        let first = usize::from(children[1].len() > children[0].len());
        let unit = 1u64 << self.n;
        let thick_cutoff = if coords.is_empty() {
            0
        } else {
            let factor = self.cfg.phi.clone() / S::from_count(4 * coords.len() as u64);
            count_cutoff(&factor, unit)
        };
        let parts = [part0, part1];
        let mut chosen = None;
        let mut relaxed = false;
        let order = if self.cfg.require_gain {
            vec![first]
        } else {
            vec![first, 1 - first]
        };
        for c in order {
            let mut pruned = children[c].prune_below(thick_cutoff);
            if !pruned.is_thick_at(self.tau_cutoff) {
                if self.cfg.require_gain {
                    break;
                }
                pruned = pruned.prune_below(thick_cutoff.max(self.tau_cutoff));
                relaxed = true;
            }
            if pruned.is_empty() {
                continue;
            }
            relaxed |= c != first;
            chosen = Some((c, pruned));
            break;
        }
        let Some((c, pruned)) = chosen else {
            let reason = format!(
                "pruning the larger child of {} to tau-thickness leaves nothing (child sizes {} and {})",
                owner.as_str(),
                children[0].len(),
                children[1].len()
            );
            return Err(EngineError::Stuck(Box::new(self.stuck(
                st,
                "communication",
                None,
                reason,
            ))));
        };
        let updated = if pruned.len() == children[c].len() {
            parts[c].clone()
        } else {
            parts[c].preimage(coords, &pruned)
        };
        let alpha_before = density(a_proj.len(), bits);
        let beta_before = density(b_proj.len(), bits);
        let (a_after, b_after) = match owner {
            Owner::Alice => (pruned.len(), b_proj.len()),
            _ => (a_proj.len(), pruned.len()),
        };
        let quarter_ok = 4 * pruned.len() >= side_proj.len();
        match owner {
            Owner::Alice => st.alice = updated,
            _ => st.bob = updated,
        }
        st.transcript.push(c == 1);
        st.steps += 1;
        st.relaxed_steps += usize::from(relaxed);
        trace.push(TraceEvent::Comm {
            step: st.steps,
            owner: owner.as_str().to_string(),
            bit: c as u8,
            alpha_before,
            beta_before,
            alpha_after: density(a_after, bits),
            beta_after: density(b_after, bits),
            quarter_ok,
            relaxed,
        });
        self.check(st)
    }

    fn query_seed(&self, st: &SimulationState, i: usize) -> u64 {
        let h = st
            .path
            .iter()
            .fold(mix64(self.cfg.seed), |acc, &b| mix64(acc ^ (1 + b as u64)));
        mix64(h ^ (0x100 + i as u64))
    }

    /// Supplies zᵢ for the pending query and restricts A × B to a
    /// zᵢ-monochromatic rectangle in coordinate i.
    pub fn answer(
        &self,
        st: &mut SimulationState,
        zi: bool,
        trace: &mut Vec<TraceEvent>,
    ) -> Result<(), EngineError> {
        let (i, thin) = st.pending.take().expect("a query is pending");
        st.path.push(zi);
        st.queried.insert(i, zi);
        st.query_count += 1;
        st.steps += 1;
        let coords = st.free.as_slice().to_vec();
        let rest: Vec<usize> = coords.iter().copied().filter(|&j| j != i).collect();
        let a_len = st.alice.project_onto(&coords).len() as u64;
        let b_len = st.bob.project_onto(&coords).len() as u64;
        let ga = Groups::build(&st.alice, i, &rest);
        let gb = Groups::build(&st.bob, i, &rest);
        let scale = self.cfg.delta.clone() * S::from_count(3);
        let base = S::one() - scale;
        let boosted = base.clone() / self.cfg.phi.clone();
        let (need_a, need_b) = if thin == Owner::Alice {
            (boosted, base)
        } else {
            (base.clone(), boosted)
        };
        let unit = 1u64 << self.n;
        let mut counts = Vec::new();
        let (mut scanned, mut thick) = (0u64, 0u64);
        let mut best_ratio: Option<f64> = None;
        let mut fallback: Option<Choice> = None;
        let mut chosen: Option<Choice> = None;
        let mut consider = |rect: &MonoRect| -> bool {
            scanned += 1;
            let (al, at) = ga.stats(&ga.union_for(&rect.u), self.tau_cutoff, &mut counts);
            if al == 0 || !at {
                return false;
            }
            let (bl, bt) = gb.stats(&gb.union_for(&rect.v), self.tau_cutoff, &mut counts);
            if bl == 0 || !bt {
                return false;
            }
            thick += 1;
            let lhs_a = S::from_count(al * unit);
            let lhs_b = S::from_count(bl * unit);
            let rhs_a = need_a.clone() * S::from_count(a_len);
            let rhs_b = need_b.clone() * S::from_count(b_len);
            let ratio = |l: &S, r: &S| {
                if *r <= S::zero() {
                    f64::INFINITY
                } else {
                    l.to_f64() / r.to_f64()
                }
            };
            let r = ratio(&lhs_a, &rhs_a).min(ratio(&lhs_b, &rhs_b));
            best_ratio = Some(best_ratio.map_or(r, |b: f64| b.max(r)));
            let gain_ok = lhs_a >= rhs_a && lhs_b >= rhs_b;
            let choice = Choice {
                rect: rect.clone(),
                alice_len: al,
                bob_len: bl,
                gain_ok,
            };
            if gain_ok {
                chosen = Some(choice);
                return true;
            }
            if fallback.is_none() {
                fallback = Some(choice);
            }
            false
        };
        match self.cfg.rect_mode {
            RectMode::Enumerate => {
                for rect in self.support(zi)? {
                    if consider(rect) {
                        break;
                    }
                }
            }
            RectMode::Sample { max_attempts } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.query_seed(st, i));
                for _ in 0..max_attempts {
                    let rect = sample_sigma(&self.g, zi, &mut rng)?;
                    if consider(&rect) {
                        break;
                    }
                }
            }
        }
        let relaxed = chosen.is_none();
        let choice = match (chosen, fallback) {
            (Some(c), _) => c,
            (None, Some(c)) if !self.cfg.require_gain => c,
            (None, _) => {
                let reason = if thick == 0 {
                    "no candidate keeps both sides nonempty and tau-thick".to_string()
                } else {
                    "no thick candidate meets the density-gain conditions".to_string()
                };
                let mut report = self.stuck(st, "query", Some(i), reason);
                report.candidates = scanned;
                report.thick_candidates = thick;
                report.best_gain_ratio = best_ratio;
                return Err(EngineError::Stuck(Box::new(report)));
            }
        };
        let rect = &choice.rect;
        st.alice = st.alice.restrict_by(i, |u| rect.u.contains_word(u))?;
        st.bob = st.bob.restrict_by(i, |v| rect.v.contains_word(v))?;
        st.free = st.free.without(i);
        st.relaxed_steps += usize::from(relaxed);
        if st.alice.is_empty() || st.bob.is_empty() {
            return Err(EngineError::Empty(st.steps));
        }
        let bits = self.n * coords.len();
        trace.push(TraceEvent::Query {
            step: st.steps,
            index: i + 1,
            z: zi as u8,
            thin_side: thin.as_str().to_string(),
            rect: describe(rect),
            candidates: scanned,
            alpha_before: density(a_len as usize, bits),
            beta_before: density(b_len as usize, bits),
            alpha_after: density(choice.alice_len as usize, bits - self.n),
            beta_after: density(choice.bob_len as usize, bits - self.n),
            gain_ok: choice.gain_ok,
            relaxed,
        });
        self.check(st)
    }

    /// Loop invariant: A_I × B_I τ-thick and nonempty, and g(xᵢ, yᵢ) = zᵢ on
    /// all of A × B for every queried i.
    pub fn check_invariants(&self, st: &SimulationState) -> Result<(), String> {
        let coords = st.free.as_slice();
        for (name, side) in [("A", &st.alice), ("B", &st.bob)] {
            if side.is_empty() {
                return Err(format!("{name} is empty"));
            }
            if !side.project_onto(coords).is_thick_at(self.tau_cutoff) {
                return Err(format!("{name}_I is not tau-thick"));
            }
        }
        for (&i, &zi) in &st.queried {
            if !columns_consistent(&st.alice, &st.bob, i, zi, &self.g) {
                return Err(format!(
                    "coordinate {} is not constant {} on A x B",
                    i + 1,
                    zi as u8
                ));
            }
        }
        Ok(())
    }

    fn check(&self, st: &SimulationState) -> Result<(), EngineError> {
        if !self.cfg.check_invariants {
            return Ok(());
        }
        self.check_invariants(st)
            .map_err(|what| EngineError::Invariant {
                step: st.steps,
                what,
            })
    }

    /// Runs to a leaf answering queries from z, then looks for an explicit
    /// witness (x, y) ∈ A × B with gᵖ(x, y) = z.
    pub fn run(&self, z: &[bool]) -> Result<RunOutcome, EngineError> {
        if z.len() != self.p {
            return Err(EngineError::Arity {
                expected: self.p,
                got: z.len(),
            });
        }
        let mut st = self.initial_state()?;
        self.check(&st)?;
        let mut trace = Vec::new();
        let label = loop {
            match self.advance(&mut st, &mut trace)? {
                Advance::Communicated => {}
                Advance::NeedQuery(i) => self.answer(&mut st, z[i], &mut trace)?,
                Advance::Leaf(label) => break label,
            }
        };
        // queried coordinates already agree with z on all of A × B
        let coords = st.free.as_slice();
        let rect = Rect::new(st.alice.project_onto(coords), st.bob.project_onto(coords))?;
        let zi: Vec<bool> = coords.iter().map(|&i| z[i]).collect();
        let witness = find_witness(
            &rect,
            &IndexSet::all(coords.len()),
            &zi,
            &self.g,
            WitnessMode::Exhaustive,
            1,
            0,
        )?
        .is_some();
        trace.push(TraceEvent::Leaf {
            step: st.steps,
            label: label.clone(),
            unqueried: st.free.as_slice().iter().map(|i| i + 1).collect(),
            witness: Some(witness),
        });
        Ok(RunOutcome {
            label,
            trace,
            query_count: st.query_count,
            comm_used: st.transcript.len(),
            cost_bound: self.protocol.cost_bound(),
            query_bound: self.cfg.query_bound(self.protocol.cost_bound()),
            relaxed_steps: st.relaxed_steps,
            witness: Some(witness),
            warnings: self.warnings.clone(),
        })
    }

    /// Forks at every query on both answers; stuck branches become
    /// [`PartialTree::Stuck`] leaves.
    pub fn extract_tree(&self) -> Result<ExtractOutcome, EngineError> {
        let st = self.initial_state()?;
        self.check(&st)?;
        let mut out = ExtractOutcome {
            tree: PartialTree::Stuck(String::new()),
            max_queries: 0,
            relaxed_steps: 0,
            leaves: 0,
        };
        out.tree = self.explore(st, &mut out)?;
        Ok(out)
    }

    fn explore(
        &self,
        mut st: SimulationState,
        out: &mut ExtractOutcome,
    ) -> Result<PartialTree, EngineError> {
        let mut sink = Vec::new();
        loop {
            match self.advance(&mut st, &mut sink) {
                Ok(Advance::Communicated) => {}
                Ok(Advance::NeedQuery(i)) => {
                    let mut children = Vec::with_capacity(2);
                    for zi in [false, true] {
                        let mut fork = st.clone();
                        let child = match self.answer(&mut fork, zi, &mut sink) {
                            Ok(()) => self.explore(fork, out)?,
                            Err(EngineError::Stuck(r)) => PartialTree::Stuck(r.to_string()),
                            Err(e) => return Err(e),
                        };
                        children.push(child);
                    }
                    let one = children.pop().expect("two children");
                    let zero = children.pop().expect("two children");
                    return Ok(PartialTree::Query {
                        index: i,
                        zero: Box::new(zero),
                        one: Box::new(one),
                    });
                }
                Ok(Advance::Leaf(label)) => {
                    out.max_queries = out.max_queries.max(st.query_count);
                    out.relaxed_steps += st.relaxed_steps;
                    out.leaves += 1;
                    return Ok(PartialTree::Leaf(label));
                }
                Err(EngineError::Stuck(r)) => return Ok(PartialTree::Stuck(r.to_string())),
                Err(e) => return Err(e),
            }
        }
    }

    /// Runs every z ∈ {0,1}ᵖ and compares with f.
    pub fn verify_all(&self) -> Result<VerifyReport, EngineError> {
        let mut report = VerifyReport::default();
        for k in 0..1usize << self.p {
            let z = crate::gadgets::index_to_bits(k, self.p);
            report.total += 1;
            match self.run(&z) {
                Ok(o) => {
                    let ok = &o.label == self.f.eval_index(k);
                    report.correct += usize::from(ok);
                    report.max_queries = report.max_queries.max(o.query_count);
                    report.relaxed_steps += o.relaxed_steps;
                    report.witness_failures += usize::from(o.witness == Some(false));
                    report.query_bound = o.query_bound;
                    if !ok {
                        report.failures.push(format!(
                            "z={} label {} expected {}",
                            bits(&z),
                            o.label,
                            self.f.eval_index(k)
                        ));
                    }
                }
                Err(EngineError::Stuck(r)) => {
                    report.stuck += 1;
                    report.failures.push(format!("z={} stuck: {r}", bits(&z)));
                }
                Err(e) => return Err(e),
            }
        }
        Ok(report)
    }
}

fn bits(z: &[bool]) -> String {
    z.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn describe_side(s: &Side) -> String {
    match s {
        Side::Explicit { words, .. } => format!("set of {}", words.len()),
        Side::Coset(c) => {
            let rows: Vec<String> = c.basis().basis().iter().map(|b| b.to_string()).collect();
            format!("{}+span{{{}}}", c.offset(), rows.join(","))
        }
        Side::Ball { center, radius } => format!("ball({center},{radius})"),
    }
}

fn describe(r: &MonoRect) -> String {
    format!("{} x {}", describe_side(&r.u), describe_side(&r.v))
}

/// Outcome of sweeping all 2ᵖ inputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub total: usize,
    pub correct: usize,
    pub stuck: usize,
    pub max_queries: usize,
    pub relaxed_steps: usize,
    pub witness_failures: usize,
    pub query_bound: Option<u64>,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.correct == self.total
    }

    /// "PASS 4/4, max queries 2" or "FAIL 3/4, ...".
    pub fn headline(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        format!(
            "{verdict} {}/{}, max queries {}",
            self.correct, self.total, self.max_queries
        )
    }
}
