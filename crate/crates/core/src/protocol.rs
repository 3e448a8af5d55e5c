//! Deterministic two-party protocols behind a transcript interface, decision
//! trees, the naive protocol that walks a decision tree solving one gadget
//! instance per query, and an exact optimal-depth oracle.

use std::collections::HashMap;
use std::fmt;

use serde_json::{json, Value};
use thiserror::Error;

use crate::gadgets::{index_to_bits, Gadget, GadgetValue, Label, TruthTable};
use crate::tupleset::{PackedTuple, TupleSet};

/// Largest arity accepted by [`dt_depth_opt`].
pub const MAX_OPT_ARITY: usize = 5;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("arity mismatch: expected {expected}, got {got}")]
    Arity { expected: usize, got: usize },
    #[error("arity {0} too large for exact decision-tree depth (max 5)")]
    ArityTooLarge(usize),
    #[error("query index {0} out of range")]
    BadIndex(usize),
    #[error("index {0} queried twice on one path")]
    RepeatedQuery(usize),
    #[error("decision tree disagrees with f at input {0}")]
    WrongTree(String),
    #[error("transcript {0} belongs to {1:?}")]
    OwnerMismatch(Transcript, Owner),
    #[error("malformed decision tree JSON: {0}")]
    Json(String),
}

/// Who speaks next, or that the protocol has ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Owner {
    Alice,
    Bob,
    Leaf,
}

impl Owner {
    pub fn as_str(&self) -> &'static str {
        match self {
            Owner::Alice => "alice",
            Owner::Bob => "bob",
            Owner::Leaf => "leaf",
        }
    }
}

/// Bits exchanged so far.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Transcript(pub Vec<bool>);

impl Transcript {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, bit: bool) {
        self.0.push(bit);
    }

    pub fn extended(&self, bit: bool) -> Transcript {
        let mut t = self.clone();
        t.push(bit);
        t
    }
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        self.0
            .iter()
            .try_for_each(|&b| f.write_str(if b { "1" } else { "0" }))
    }
}

/// A deterministic protocol, queried one transcript at a time.
pub trait Protocol: Send + Sync {
    fn owner(&self, t: &Transcript) -> Owner;

    /// The owner's next bit; `input` is the owner's own p-tuple.
    fn next_bit(&self, t: &Transcript, input: PackedTuple) -> bool;

    /// Output at a leaf transcript.
    fn label(&self, t: &Transcript) -> Option<Label>;

    /// Maximum transcript length.
    fn cost_bound(&self) -> usize;
}

/// Runs the protocol on (x, y); returns the transcript and output.
pub fn execute(protocol: &dyn Protocol, x: PackedTuple, y: PackedTuple) -> (Transcript, Label) {
    let mut t = Transcript::default();
    loop {
        let bit = match protocol.owner(&t) {
            Owner::Alice => protocol.next_bit(&t, x),
            Owner::Bob => protocol.next_bit(&t, y),
            Owner::Leaf => {
                let label = protocol.label(&t).expect("leaf transcript has a label");
                return (t, label);
            }
        };
        t.push(bit);
        assert!(
            t.len() <= protocol.cost_bound(),
            "protocol exceeded its cost bound"
        );
    }
}

/// Splits the owner's side by the bit sent at `t`: (sends 0, sends 1).
pub fn partition_by_bit(
    protocol: &dyn Protocol,
    t: &Transcript,
    side: Owner,
    set: &TupleSet,
) -> Result<(TupleSet, TupleSet), ProtocolError> {
    let owner = protocol.owner(t);
    if owner != side || owner == Owner::Leaf {
        return Err(ProtocolError::OwnerMismatch(t.clone(), owner));
    }
    Ok(set.split(|x| protocol.next_bit(t, x)))
}

/// Decision tree over p input bits; indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DecisionTree {
    Leaf(Label),
    Query {
        index: usize,
        zero: Box<DecisionTree>,
        one: Box<DecisionTree>,
    },
}

impl DecisionTree {
    pub fn query(index: usize, zero: DecisionTree, one: DecisionTree) -> Self {
        DecisionTree::Query {
            index,
            zero: Box::new(zero),
            one: Box::new(one),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 0,
            DecisionTree::Query { zero, one, .. } => 1 + zero.depth().max(one.depth()),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            DecisionTree::Leaf(_) => 1,
            DecisionTree::Query { zero, one, .. } => 1 + zero.size() + one.size(),
        }
    }

    /// Checks indices are below `p` and distinct along every path.
    pub fn validate(&self, p: usize) -> Result<(), ProtocolError> {
        fn walk(t: &DecisionTree, p: usize, seen: &mut Vec<usize>) -> Result<(), ProtocolError> {
            match t {
                DecisionTree::Leaf(_) => Ok(()),
                DecisionTree::Query { index, zero, one } => {
                    if *index >= p {
                        return Err(ProtocolError::BadIndex(*index + 1));
                    }
                    if seen.contains(index) {
                        return Err(ProtocolError::RepeatedQuery(*index + 1));
                    }
                    seen.push(*index);
                    walk(zero, p, seen)?;
                    walk(one, p, seen)?;
                    seen.pop();
                    Ok(())
                }
            }
        }
        walk(self, p, &mut Vec::new())
    }

    /// Whether the tree agrees with `f` on all 2^p inputs.
    pub fn computes(&self, f: &TruthTable) -> Result<bool, ProtocolError> {
        let p = f.arity();
        for k in 0..1usize << p {
            let z = index_to_bits(k, p);
            if dt_eval(self, &z)? != f.eval_index(k) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// JSON form `{"leaf": label}` / `{"query": i, "0": ..., "1": ...}` with
    /// 1-based i.
    pub fn to_json_value(&self) -> Value {
        match self {
            DecisionTree::Leaf(label) => json!({ "leaf": label_value(label) }),
            DecisionTree::Query { index, zero, one } => {
                json!({ "query": index + 1, "0": zero.to_json_value(), "1": one.to_json_value() })
            }
        }
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }

    pub fn from_json_value(v: &Value) -> Result<Self, ProtocolError> {
        let bad = |msg: &str| ProtocolError::Json(msg.to_string());
        let obj = v.as_object().ok_or_else(|| bad("node must be an object"))?;
        if let Some(leaf) = obj.get("leaf") {
            let label: Label =
                serde_json::from_value(leaf.clone()).map_err(|e| bad(&e.to_string()))?;
            return Ok(DecisionTree::Leaf(label));
        }
        let index = obj
            .get("query")
            .and_then(Value::as_u64)
            .ok_or_else(|| bad("expected \"leaf\" or \"query\""))?;
        if index == 0 {
            return Err(bad("query indices are 1-based"));
        }
        let zero = obj.get("0").ok_or_else(|| bad("missing \"0\" child"))?;
        let one = obj.get("1").ok_or_else(|| bad("missing \"1\" child"))?;
        Ok(DecisionTree::query(
            index as usize - 1,
            Self::from_json_value(zero)?,
            Self::from_json_value(one)?,
        ))
    }

    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let v: Value =
            serde_json::from_str(text).map_err(|e| ProtocolError::Json(e.to_string()))?;
        Self::from_json_value(&v)
    }
}

fn label_value(label: &Label) -> Value {
    serde_json::to_value(label).expect("labels serialize")
}

/// Leaf label reached by z.
pub fn dt_eval<'a>(tree: &'a DecisionTree, z: &[bool]) -> Result<&'a Label, ProtocolError> {
    let mut node = tree;
    loop {
        match node {
            DecisionTree::Leaf(label) => return Ok(label),
            DecisionTree::Query { index, zero, one } => {
                let bit = *z.get(*index).ok_or(ProtocolError::Arity {
                    expected: index + 1,
                    got: z.len(),
                })?;
                node = if bit { one } else { zero };
            }
        }
    }
}

/// Exact D^{dt}(f) with an optimal tree. Ties between coordinates go to the
/// smallest index.
pub fn dt_depth_opt(f: &TruthTable) -> Result<(usize, DecisionTree), ProtocolError> {
    let p = f.arity();
    if p > MAX_OPT_ARITY {
        return Err(ProtocolError::ArityTooLarge(p));
    }
    let mut memo = HashMap::new();
    let depth = opt_depth(f, 0, 0, &mut memo);
    Ok((depth, build_tree(f, 0, 0, &memo)))
}

/// Restriction fixes the coordinates in `mask` to the matching bits of `vals`
/// (bit i of both words stands for coordinate i).
fn restricted_labels(f: &TruthTable, mask: u32, vals: u32) -> impl Iterator<Item = &Label> {
    let p = f.arity();
    (0..1usize << p).filter_map(move |k| {
        let agrees = (0..p)
            .all(|i| mask >> i & 1 == 0 || ((k >> (p - 1 - i)) & 1) as u32 == (vals >> i & 1));
        agrees.then(|| f.eval_index(k))
    })
}

fn constant_label(f: &TruthTable, mask: u32, vals: u32) -> Option<Label> {
    let mut it = restricted_labels(f, mask, vals);
    let first = it.next()?.clone();
    it.all(|l| *l == first).then_some(first)
}

fn opt_depth(f: &TruthTable, mask: u32, vals: u32, memo: &mut HashMap<(u32, u32), usize>) -> usize {
    if let Some(&d) = memo.get(&(mask, vals)) {
        return d;
    }
    let d = if constant_label(f, mask, vals).is_some() {
        0
    } else {
        (0..f.arity())
            .filter(|i| mask >> i & 1 == 0)
            .map(|i| {
                let m = mask | 1 << i;
                1 + opt_depth(f, m, vals, memo).max(opt_depth(f, m, vals | 1 << i, memo))
            })
            .min()
            .expect("a nonconstant restriction has a free coordinate")
    };
    memo.insert((mask, vals), d);
    d
}

fn build_tree(
    f: &TruthTable,
    mask: u32,
    vals: u32,
    memo: &HashMap<(u32, u32), usize>,
) -> DecisionTree {
    if let Some(label) = constant_label(f, mask, vals) {
        return DecisionTree::Leaf(label);
    }
    let target = memo[&(mask, vals)];
    let i = (0..f.arity())
        .filter(|i| mask >> i & 1 == 0)
        .find(|&i| {
            let m = mask | 1 << i;
            1 + memo[&(m, vals)].max(memo[&(m, vals | 1 << i)]) == target
        })
        .expect("optimal coordinate recorded");
    let m = mask | 1 << i;
    DecisionTree::query(
        i,
        build_tree(f, m, vals, memo),
        build_tree(f, m, vals | 1 << i, memo),
    )
}

/// The protocol that walks T: for each query i Alice sends xᵢ (n bits, most
/// significant first) and Bob answers g(xᵢ, yᵢ), or 0 in the gap.
#[derive(Debug, Clone)]
pub struct NaiveProtocol {
    gadget: Gadget,
    tree: DecisionTree,
    p: usize,
}

enum Position<'a> {
    Alice { index: usize, pos: usize },
    Bob { index: usize, x: u64 },
    Leaf(&'a Label),
}

impl NaiveProtocol {
    pub fn new(f: &TruthTable, gadget: Gadget, tree: DecisionTree) -> Result<Self, ProtocolError> {
        tree.validate(f.arity())?;
        let p = f.arity();
        for k in 0..1usize << p {
            let z = index_to_bits(k, p);
            if dt_eval(&tree, &z)? != f.eval_index(k) {
                let s: String = z.iter().map(|&b| if b { '1' } else { '0' }).collect();
                return Err(ProtocolError::WrongTree(s));
            }
        }
        Ok(NaiveProtocol { gadget, tree, p })
    }

    /// Naive protocol over an optimal decision tree for f.
    pub fn optimal(f: &TruthTable, gadget: Gadget) -> Result<Self, ProtocolError> {
        let (_, tree) = dt_depth_opt(f)?;
        Self::new(f, gadget, tree)
    }

    pub fn tree(&self) -> &DecisionTree {
        &self.tree
    }

    pub fn gadget(&self) -> &Gadget {
        &self.gadget
    }

    pub fn arity(&self) -> usize {
        self.p
    }

    fn locate(&self, t: &Transcript) -> Position<'_> {
        let n = self.gadget.alice_len();
        let mut node = &self.tree;
        let mut rest = &t.0[..];
        loop {
            match node {
                DecisionTree::Leaf(label) => {
                    assert!(rest.is_empty(), "transcript continues past a leaf");
                    return Position::Leaf(label);
                }
                DecisionTree::Query { index, zero, one } => {
                    let sent = rest[..rest.len().min(n)]
                        .iter()
                        .fold(0u64, |acc, &b| (acc << 1) | b as u64);
                    if rest.len() < n {
                        return Position::Alice {
                            index: *index,
                            pos: rest.len(),
                        };
                    }
                    if rest.len() == n {
                        return Position::Bob {
                            index: *index,
                            x: sent,
                        };
                    }
                    node = if rest[n] { one } else { zero };
                    rest = &rest[n + 1..];
                }
            }
        }
    }
}

impl Protocol for NaiveProtocol {
    fn owner(&self, t: &Transcript) -> Owner {
        match self.locate(t) {
            Position::Alice { .. } => Owner::Alice,
            Position::Bob { .. } => Owner::Bob,
            Position::Leaf(_) => Owner::Leaf,
        }
    }

    fn next_bit(&self, t: &Transcript, input: PackedTuple) -> bool {
        let n = self.gadget.alice_len();
        match self.locate(t) {
            Position::Alice { index, pos } => (input.coord(index) >> (n - 1 - pos)) & 1 == 1,
            Position::Bob { index, x } => {
                self.gadget.eval_words(x, input.coord(index)) == GadgetValue::One
            }
            Position::Leaf(_) => panic!("no bit at a leaf"),
        }
    }

    fn label(&self, t: &Transcript) -> Option<Label> {
        match self.locate(t) {
            Position::Leaf(label) => Some(label.clone()),
            _ => None,
        }
    }

    fn cost_bound(&self) -> usize {
        self.tree.depth() * (self.gadget.alice_len() + 1)
    }
}
