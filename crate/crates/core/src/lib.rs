//! Statevector simulation and variational training of quantum autoencoders,
//! with the feature-enhanced variant whose rotation angles depend linearly
//! on per-input classical data.

pub mod ansatz;
pub mod cost;
pub mod dataset;
pub mod digits;
pub mod error;
pub mod experiment;
pub mod gradient;
pub mod ising;
pub mod linalg;
pub mod optimize;
pub mod statevector;
pub mod training;

pub use error::{QaeError, Result};

// The guide's code blocks run as doctests so the book cannot drift from
// the API.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/statevector.md")]
    mod statevector {}
    #[doc = include_str!("../../../book/src/ansatz.md")]
    mod ansatz {}
    #[doc = include_str!("../../../book/src/cost.md")]
    mod cost {}
    #[doc = include_str!("../../../book/src/optimizer.md")]
    mod optimizer {}
    #[doc = include_str!("../../../book/src/models.md")]
    mod models {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
