//! Patch classification for C codebases: commit preprocessing, a hierarchical
//! convolutional classifier, training and evaluation.
//!
//! The `getinfo` and `patchnet` binaries wrap [`corpus::getinfo`],
//! [`train::train`], [`train::predict`] and [`eval::kfold_cv`].

pub mod cli;
pub mod corpus;
pub mod encode;
pub mod error;
pub mod eval;
pub mod model;
pub mod nn;
pub mod synthetic;
pub mod train;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/preprocessing.md")]
    mod preprocessing {}
    #[doc = include_str!("../../../book/src/patch-data.md")]
    mod patch_data {}
    #[doc = include_str!("../../../book/src/encoding.md")]
    mod encoding {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
