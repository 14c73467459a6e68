//! Co-operational bivariant theories over finite sites.
//!
//! A [`site::Site`] is a finite category of finite sets with canonical fiber
//! products. A [`functor::FunctorInstance`] assigns rig-valued functions to
//! its objects. Bivariant elements ([`bivariant::Element`]) are rules giving,
//! for every base change of their support, a map between functor values; the
//! product, pushforward and pullback operations and the axioms relating them
//! are checked exhaustively on finite probe sets.

pub mod bivariant;
pub mod derived;
pub mod error;
pub mod functor;
pub mod operations;
pub mod report;
pub mod site;
pub mod transform;

pub use error::{Error, Result};
