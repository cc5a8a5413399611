//! Multimodal fusion laboratory core.
//!
//! Implements cross-modal / self-attention encoders, the forest-shaped
//! multimodal transformer (MulT), its interlaced-masked single-tree
//! counterpart (GsiT), a loop-based graph-attention oracle, block-sparse
//! ("decomposed") execution with FLOP and attention-map memory meters, and
//! closed-form complexity evaluators.
//!
//! The crate is `no_std` and only needs `alloc`. All arithmetic is `f64`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod attn;
pub mod blockexec;
pub mod complexity;
mod error;
pub mod graphoracle;
pub mod maskgen;
pub mod models;
pub mod numkit;

pub use error::{Error, Result};
pub use maskgen::{BlockPattern, Modality, SegmentLayout, StructureName};
pub use numkit::{Rng, Tensor2};
