//! Zero-shot referring image segmentation engine.
//!
//! Consumes exported cross-attention stacks, candidate masks and contrastive
//! embeddings (all as RDTF tensor files referenced by JSON manifests) and
//! selects the mask that best matches a referring expression. Model
//! inference lives outside this crate; see the README for the file formats.
//!
//! The stages, in pipeline order:
//!
//! - [`refexpr`]: tokens, root token, direction clues
//! - [`attnmap`]: head averaging, min-max normalization, bilinear resize
//! - [`proposals`]: weight-free thresholding or external masks, sanitized
//! - [`scoring`]: generative/discriminative scores, fusion, argmax
//! - [`evaluation`]: IoU, mIoU, oIoU over a dataset

pub mod attnmap;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod fixtures;
pub mod grid;
pub mod manifest;
pub mod overlay;
pub mod pipeline;
pub mod proposals;
pub mod refexpr;
pub mod scoring;
pub mod tensor;

pub use attnmap::{correlation_matrix, AttentionStack, CorrelationMap};
pub use config::{BiasProfile, Mode, RunConfig, ThresholdMode};
pub use error::{Error, Result};
pub use evaluation::{emit_report, evaluate_dataset, iou, EvalReport};
pub use grid::{Grid, Map, Mask};
pub use manifest::{load_manifest, Dataset, SampleManifest};
pub use pipeline::{segment, SegmentOutcome};
pub use proposals::{ProposalSet, ProposalSource};
pub use scoring::{PositionalBias, ScoredSelection};
pub use tensor::{load_tensor, save_tensor, Tensor};
