//! Secure networked visual-servo laboratory.
//!
//! The crate covers the full pipeline of a camera-in-the-loop cart-pendulum
//! whose frames travel over an untrusted network:
//!
//! * [`chaos`]: the Bülban map and its diagnostics, the keystream source.
//! * [`cipher`]: scaled-selective permutation/diffusion image cipher.
//! * [`attacks`]: seeded shearing, salt-and-pepper and Gaussian injectors.
//! * [`metrics`]: NPCR, UACI, adjacency correlation, entropy, PSNR.
//! * [`vision`]: synthetic frame renderer and Hough-based state extractor.
//! * [`plant`]: uncertain multi-delay closed-loop simulation.
//! * [`certify`]: LMI assembly/verification for delay-robust state feedback.
//! * [`experiment`]: end-to-end pipelines and table reproductions.

// `!(x > 0.0)` rejects NaN along with nonpositive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attacks;
pub mod certify;
pub mod chaos;
pub mod cipher;
mod error;
pub mod experiment;
pub mod image;
pub mod linalg;
pub mod metrics;
pub mod plant;
pub mod seed;
pub mod vision;

pub use error::{Error, Result};
pub use image::GrayImage;
