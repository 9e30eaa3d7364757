//! Sliding virtual array measurement (SVAM) beam alignment.

pub mod adaptive;
pub mod array;
pub mod channel;
pub mod crb;
pub mod error;
pub mod filter;
pub mod harness;
pub mod inference;
mod remez;
pub mod svam;
