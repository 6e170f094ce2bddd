//! Sequences, synthetic generation, training-pair strategies and fold plans.

mod folds;
mod ingest;
mod pairs;
mod sequence;
mod synth;

pub use folds::{stratified_folds, FoldPlan, Rotation};
pub use ingest::{load_directory, DatasetSpec, SequenceInfo, SyntheticSpec};
pub use pairs::{enumerate_pairs, PairStrategy};
pub use sequence::{parse_class, Anchors, Frames, Sequence, CLASS_NAMES, NUM_CLASSES};
pub use synth::{canonical_anchors, synth_sequence, template_flow, SynthParams, SynthSample};
