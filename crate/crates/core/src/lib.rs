//! Identification of double-compressed (and possibly down-resized) JPEG
//! images from quantized luminance DC coefficients.
//!
//! The pipeline mirrors what an SNS/cloud photo provider does to uploads:
//! the original JPEG is decoded, optionally resized to a smaller size, and
//! re-encoded with different parameters. A client that enrolls a compact
//! per-block feature at upload time can later decide whether a downloaded
//! query image came from the same original, without ever reconstructing
//! pixels on the query path.
//!
//! Crate layout:
//!
//! * [`jpeg_parse`] — baseline JPEG bitstream parser that extracts the
//!   quantized luminance DC plane losslessly from the entropy stream.
//! * [`jpeg_sim`] — self-contained baseline encoder/decoder and area
//!   resizer used to synthesize upload → recompress (→ resize) pipelines.
//! * [`dc_feature`] — the per-block integer feature and the calibration
//!   procedures for its `th`/`delta` parameters.
//! * [`resize_map`] — maps an enrolled feature onto the block grid of a
//!   smaller query via exact block-overlap weights.
//! * [`matcher`] — early-exit sign test between enrolled and query
//!   features, plus corpus-level precision/recall evaluation.
//! * [`feature_store`] — durable on-disk collection of enrolled features.
//! * [`experiment`] — synthetic corpora and the desk-scale experiment
//!   drivers shared by the CLI and the acceptance suite.

pub mod dc_feature;
pub mod error;
pub mod experiment;
pub mod feature_store;
mod jpeg;
pub mod jpeg_parse;
pub mod jpeg_sim;
pub mod matcher;
pub mod num;
pub mod resize_map;

pub use error::{Error, Result};
