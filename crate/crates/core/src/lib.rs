//! Lifting theorems for communication complexity, made executable.
//!
//! F₂ linear algebra, the IP / Gap-Hamming / Indexing gadgets, explicit tuple
//! sets with thickness and pruning, hitting rectangle-distributions, protocols
//! and decision trees, and the procedure that turns a protocol for a composed
//! function into a decision tree.

pub mod engine;
pub mod gadgets;
pub mod gf2;
pub mod hitting;
pub mod protocol;
pub mod scalar;
pub mod tupleset;

pub use gadgets::{Gadget, GadgetValue, Label, TruthTable};
pub use gf2::{AffineCoset, BitVector, SubspaceBasis};
pub use scalar::{count_cutoff, parse_scalar, Scalar};
pub use tupleset::{IndexSet, PackedTuple, Rect, TupleSet};

/// Exact rational used for thresholds when comparisons must be exact.
pub type Rational = num_rational::Ratio<i128>;
/// Simulation configuration with exact rational thresholds.
pub type ExactConfig = engine::SimulationConfig<Rational>;
/// Simulation configuration with `f64` thresholds.
pub type FloatConfig = engine::SimulationConfig<f64>;
