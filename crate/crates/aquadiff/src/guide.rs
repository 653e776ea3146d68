//! The book, embedded chapter by chapter.
//!
//! Each submodule's documentation *is* one chapter of the guide under
//! `book/`, included verbatim. Because rustdoc compiles and runs the code
//! blocks as doc-tests, `cargo test` keeps every snippet in the guide in
//! sync with the crate — the book cannot silently rot.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/problem.md")]
pub mod problem {}

#[doc = include_str!("../../../book/src/compensation.md")]
pub mod compensation {}

#[doc = include_str!("../../../book/src/degradation.md")]
pub mod degradation {}

#[doc = include_str!("../../../book/src/diffusion.md")]
pub mod diffusion {}

#[doc = include_str!("../../../book/src/autodiff.md")]
pub mod autodiff {}

#[doc = include_str!("../../../book/src/denoiser.md")]
pub mod denoiser {}

#[doc = include_str!("../../../book/src/loss.md")]
pub mod loss {}

#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
