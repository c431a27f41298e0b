//! Mining and applying protein-word / fragment pairing rules.
//!
//! The pipeline runs in stages that exchange plain files:
//!
//! 1. [`fragment`]: cut ligands into building blocks and build a frequency
//!    filtered fragment library.
//! 2. [`words`]: segment proteins into "words" by community detection on a
//!    residue attention graph and pool residue embeddings per word.
//! 3. [`dataset`]: deduplicate affinity records, binarize activity and
//!    label each (protein, fragment) pair as privileged / not / unknown.
//! 4. [`model`]: a small transformer encoder that predicts privileged
//!    fragments from a protein's word embeddings.
//! 5. [`attribution`]: integrated gradients over word embeddings turn
//!    predictions into (word, fragment) rules.
//! 6. [`rulebase`]: accuracy filtering and rule lookup for new proteins.
//! 7. [`screening`]: rule-based molecule scoring, score fusion and
//!    enrichment metrics.
//! 8. [`structval`]: geometric checks of rules on solved complexes.

pub mod attribution;
pub mod chem;
pub mod dataset;
pub mod error;
pub mod fragment;
pub mod io;
pub mod kv;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod rulebase;
pub mod screening;
pub mod structval;
pub mod synth;
pub mod words;

pub use error::{Error, Result};
