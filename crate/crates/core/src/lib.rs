//! Integral points on elliptic curves.
//!
//! Exact curve arithmetic, canonical heights split into local pieces,
//! lattice and modular-function numerics on the real-j fundamental set,
//! large-sieve certified point counts, and a degree-1 del Pezzo harness.

pub mod arith;
pub mod bounds_lab;
pub mod curve_models;
pub mod delpezzo;
pub mod error;
pub mod heights;
pub mod lattice_modular;
pub mod point_enum;
pub mod serde_big;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/curves.md")]
    mod curves {}
    #[doc = include_str!("../../../book/src/modular.md")]
    mod modular {}
    #[doc = include_str!("../../../book/src/heights.md")]
    mod heights {}
    #[doc = include_str!("../../../book/src/counting.md")]
    mod counting {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
    #[doc = include_str!("../../../book/src/delpezzo.md")]
    mod delpezzo {}
}
