//! Redactable blockchain built on RSA-style trapdoor links.
//!
//! Every block carries a permanent prefix `P`, arbitrary content `C` and a
//! redactable suffix `X`. The next block's prefix is
//! `X^(d^2 + 1) mod n`, where `d` is derived from `H(P, C)`. Anyone can
//! append and verify. Whoever knows the factorization of `n` can replace
//! `C` and solve for a new suffix that emits the same next prefix, leaving
//! every other block untouched.
//!
//! This is a protocol demonstrator. The arithmetic is not constant time and
//! must not be used to protect real secrets.

pub mod attack;
pub mod cli;
mod error;
pub mod keys;
pub mod ledger;
pub mod linkage;
pub mod modmath;
pub mod store;

pub use error::{Error, Result};
pub use keys::{keygen, pad_exponent, redaction_exponent, HashAlg, PaddedExponent, PrivateKey, PublicParams};
pub use ledger::{Block, BlockKind, ChainGraph, RedactionRecord, VerificationReport};
pub use linkage::{LinkInput, Suffix};
pub use modmath::RngSeed;
