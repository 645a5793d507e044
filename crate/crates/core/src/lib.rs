//! Explicit trigonometric polynomials whose partial sums over nearly square
//! rhombi and nearly centred balls grow like `√m` on large sets, together
//! with seeded numerical checks of every inequality used in their
//! construction.

pub mod builder;
pub mod checks;
pub mod error;
pub mod exact_eval;
pub mod mixing;
pub mod regions;
pub mod tree;

pub use error::{Error, Result};
