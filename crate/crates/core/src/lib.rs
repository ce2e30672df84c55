//! Query-log mining for hyponymy relations: sessionization, noise
//! filtering, specialization pattern detection, a C4.5 classifier cascade,
//! weighted relation extraction and an evaluation harness.

pub mod classifier;
mod error;
pub mod eval;
pub mod extract;
pub mod features;
pub mod filter;
pub mod index;
pub mod ingest;
pub mod pattern;
pub mod pipeline;
pub mod record;
pub mod session;
pub mod synth;
pub mod text;
pub mod tree;

pub use classifier::{CascadeOutcome, PairLabel};
pub use error::{Error, Result};
pub use extract::{HyponymyCandidate, HyponymyRelation};
pub use features::PairFeatures;
pub use index::Indices;
pub use pattern::{PatternKind, ReformulationPattern};
pub use record::QueryRecord;
pub use session::{GeometricParams, Session};
pub use tree::DecisionTree;
