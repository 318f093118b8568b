//! Synthetic fancy QR codes: byte-mode encoder, styled renderer and corpus builder.

pub mod corpus;
pub mod encode;
pub mod render;

pub use corpus::{make_corpus, make_specimen, reference_payload, synthetic_urls, CorpusItem, LabeledUrl, QrSpecimen, StyleAssignment, SynthError};
pub use encode::{encode, EncodeError, Encoded};
pub use render::{render, EyeShape, ModuleShape, StyleSpec};
