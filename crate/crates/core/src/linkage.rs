//! The public side of the scheme: block encoding, hash-to-exponent, the link
//! function `F(h, X) = X^(d^2 + 1) mod n`, suffix sampling and single-link
//! verification.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::keys::{apply_offset, link_exponent, PublicParams, MAX_PAD_OFFSET};
use crate::modmath::{self, RngSeed};
use crate::{Error, Result};

/// The hashed part of a block: its prefix and content.
#[derive(Clone, Copy, Debug)]
pub struct LinkInput<'a> {
    pub prefix: &'a BigUint,
    pub content: &'a [u8],
}

impl<'a> LinkInput<'a> {
    pub fn new(prefix: &'a BigUint, content: &'a [u8]) -> Self {
        LinkInput { prefix, content }
    }
}

/// The redactable part of a block.
///
/// A `Suffix` obtained from [`Suffix::new`] or [`sample_suffix`] is valid for
/// the modulus it was checked against. [`Suffix::from_raw`] skips the checks
/// so that stored (possibly tampered) data can be represented and then
/// reported by the verifier.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Suffix(BigUint);

impl Suffix {
    pub fn new(x: BigUint, n: &BigUint) -> Result<Self> {
        let s = Suffix(x);
        if s.is_valid_for(n) {
            Ok(s)
        } else {
            Err(Error::InvalidSuffix)
        }
    }

    pub fn from_raw(x: BigUint) -> Self {
        Suffix(x)
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    /// `1 <= x < n`, `x^2 != 1 (mod n)` and `gcd(x, n) = 1`.
    pub fn is_valid_for(&self, n: &BigUint) -> bool {
        let x = &self.0;
        !x.is_zero() && x < n && !((x * x) % n).is_one() && x.gcd(n).is_one()
    }
}

/// `len(P) || P || len(C) || C`, lengths as 4-byte big-endian, `P` as minimal
/// big-endian bytes (zero is the single byte `00`).
pub fn encode_link_input(li: &LinkInput<'_>) -> Result<Vec<u8>> {
    let content_len = u32::try_from(li.content.len()).map_err(|_| Error::Oversize(li.content.len()))?;
    let prefix = li.prefix.to_bytes_be();
    let prefix_len = u32::try_from(prefix.len()).map_err(|_| Error::Oversize(prefix.len()))?;
    let mut out = Vec::with_capacity(8 + prefix.len() + li.content.len());
    out.extend_from_slice(&prefix_len.to_be_bytes());
    out.extend_from_slice(&prefix);
    out.extend_from_slice(&content_len.to_be_bytes());
    out.extend_from_slice(li.content);
    Ok(out)
}

/// Big-endian digest of the encoded input, reduced mod `n`.
pub fn hash_to_exponent(li: &LinkInput<'_>, pp: &PublicParams) -> Result<BigUint> {
    let digest = pp.hash_alg().digest(&encode_link_input(li)?);
    Ok(BigUint::from_bytes_be(&digest) % pp.modulus())
}

/// `x^(d^2 + 1) mod n`.
pub fn link(x: &Suffix, d: &BigUint, pp: &PublicParams) -> Result<BigUint> {
    if !x.is_valid_for(pp.modulus()) {
        return Err(Error::InvalidSuffix);
    }
    modmath::mod_exp(x.value(), &link_exponent(d), pp.modulus())
}

/// Rejection-samples a valid suffix from `[1, n-1]`.
pub fn sample_suffix_with<R: Rng + ?Sized>(pp: &PublicParams, rng: &mut R) -> Result<Suffix> {
    let n = pp.modulus();
    if *n < BigUint::from(6u8) {
        return Err(Error::InvalidModulus);
    }
    let one = BigUint::one();
    loop {
        let s = Suffix(rng.gen_biguint_range(&one, n));
        if s.is_valid_for(n) {
            return Ok(s);
        }
    }
}

pub fn sample_suffix(pp: &PublicParams, seed: &RngSeed) -> Result<Suffix> {
    sample_suffix_with(pp, &mut seed.rng())
}

/// Whether `x` links `li` (with padding `offset`) to `expected_next_prefix`.
/// Malformed input yields `false`.
pub fn verify_link(
    li: &LinkInput<'_>,
    offset: i64,
    x: &Suffix,
    expected_next_prefix: &BigUint,
    pp: &PublicParams,
) -> bool {
    if offset.abs() > MAX_PAD_OFFSET {
        return false;
    }
    let Ok(raw) = hash_to_exponent(li, pp) else {
        return false;
    };
    let Some(d) = apply_offset(&raw, offset) else {
        return false;
    };
    match link(x, &d, pp) {
        Ok(next) => next == *expected_next_prefix,
        Err(_) => false,
    }
}
