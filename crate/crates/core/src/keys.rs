//! Key material: public parameters, the factorization trapdoor, exponent
//! padding and the redaction exponent.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use sha2::{Digest, Sha256, Sha384, Sha512};

use crate::modmath::{self, RngSeed, DEFAULT_MR_ROUNDS};
use crate::{Error, Result};

/// Largest padding offset tried before giving up.
pub const MAX_PAD_OFFSET: i64 = 64;

/// Hash functions usable for `H(P, C)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum HashAlg {
    #[default]
    Sha256,
    Sha384,
    Sha512,
}

impl HashAlg {
    pub fn digest(&self, data: &[u8]) -> Vec<u8> {
        match self {
            HashAlg::Sha256 => Sha256::digest(data).to_vec(),
            HashAlg::Sha384 => Sha384::digest(data).to_vec(),
            HashAlg::Sha512 => Sha512::digest(data).to_vec(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HashAlg::Sha256 => "sha256",
            HashAlg::Sha384 => "sha384",
            HashAlg::Sha512 => "sha512",
        }
    }
}

impl fmt::Display for HashAlg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HashAlg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sha256" => Ok(HashAlg::Sha256),
            "sha384" => Ok(HashAlg::Sha384),
            "sha512" => Ok(HashAlg::Sha512),
            other => Err(Error::Parse(format!("unknown hash algorithm {other:?}"))),
        }
    }
}

/// Everything a verifier needs: the modulus, the hash and the prefix of the
/// root block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublicParams {
    modulus: BigUint,
    hash_alg: HashAlg,
    genesis_prefix: BigUint,
}

impl PublicParams {
    /// Parameters with the genesis prefix derived from the empty chain id.
    pub fn new(modulus: BigUint, hash_alg: HashAlg) -> Result<Self> {
        Self::for_chain(modulus, hash_alg, "")
    }

    /// Parameters whose genesis prefix is derived from `chain_id`: the
    /// digest of the id reduced mod `n`, bumped until it is a unit.
    pub fn for_chain(modulus: BigUint, hash_alg: HashAlg, chain_id: &str) -> Result<Self> {
        check_modulus(&modulus)?;
        let genesis_prefix = derive_genesis_prefix(&modulus, hash_alg, chain_id);
        Ok(PublicParams { modulus, hash_alg, genesis_prefix })
    }

    /// Parameters with an explicit genesis prefix, as read from a chain file.
    pub fn with_genesis(modulus: BigUint, hash_alg: HashAlg, genesis_prefix: BigUint) -> Result<Self> {
        check_modulus(&modulus)?;
        if genesis_prefix.is_zero() || genesis_prefix >= modulus || !genesis_prefix.gcd(&modulus).is_one() {
            return Err(Error::InvalidKey("genesis prefix must be a unit in [1, n-1]".into()));
        }
        Ok(PublicParams { modulus, hash_alg, genesis_prefix })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn hash_alg(&self) -> HashAlg {
        self.hash_alg
    }

    pub fn genesis_prefix(&self) -> &BigUint {
        &self.genesis_prefix
    }
}

fn check_modulus(n: &BigUint) -> Result<()> {
    if *n < BigUint::from(2u8) || n.is_even() {
        return Err(Error::InvalidKey("modulus must be odd and at least 3".into()));
    }
    Ok(())
}

pub(crate) fn derive_genesis_prefix(n: &BigUint, alg: HashAlg, chain_id: &str) -> BigUint {
    let mut g = BigUint::from_bytes_be(&alg.digest(chain_id.as_bytes())) % n;
    while g.is_zero() || !g.gcd(n).is_one() {
        g = (g + 1u8) % n;
    }
    g
}

/// The redaction trapdoor: the safe-prime factorization of `n`.
#[derive(Clone, PartialEq, Eq)]
pub struct PrivateKey {
    p: BigUint,
    q: BigUint,
    phi: BigUint,
}

impl fmt::Debug for PrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PrivateKey").field("bits", &self.modulus().bits()).finish_non_exhaustive()
    }
}

impl PrivateKey {
    /// Builds a key from two distinct safe primes.
    pub fn from_primes(p: BigUint, q: BigUint) -> Result<Self> {
        if p == q {
            return Err(Error::InvalidKey("p and q must differ".into()));
        }
        for (name, v) in [("p", &p), ("q", &q)] {
            if !modmath::is_safe_prime(v, DEFAULT_MR_ROUNDS) {
                return Err(Error::InvalidKey(format!("{name} is not a safe prime")));
            }
        }
        let phi = (&p - 1u8) * (&q - 1u8);
        Ok(PrivateKey { p, q, phi })
    }

    pub fn p(&self) -> &BigUint {
        &self.p
    }

    pub fn q(&self) -> &BigUint {
        &self.q
    }

    pub fn phi(&self) -> &BigUint {
        &self.phi
    }

    pub fn modulus(&self) -> BigUint {
        &self.p * &self.q
    }

    pub fn matches(&self, pp: &PublicParams) -> bool {
        self.modulus() == *pp.modulus()
    }
}

/// Generates a key pair with two distinct `bits_per_prime`-bit safe primes.
///
/// Six bits is the smallest size with more than one safe prime (47, 59).
pub fn keygen(bits_per_prime: u64, seed: &RngSeed) -> Result<(PublicParams, PrivateKey)> {
    if bits_per_prime < 6 {
        return Err(Error::InvalidBitLength(bits_per_prime));
    }
    let p = modmath::gen_safe_prime(bits_per_prime, &seed.derive(b"p"))?;
    let mut attempt = 0u32;
    let q = loop {
        let q = modmath::gen_safe_prime(bits_per_prime, &seed.derive(format!("q{attempt}").as_bytes()))?;
        if q != p {
            break q;
        }
        attempt += 1;
    };
    let sk = PrivateKey::from_primes(p, q)?;
    let pp = PublicParams::new(sk.modulus(), HashAlg::default())?;
    Ok((pp, sk))
}

/// A link exponent `d = raw + offset`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaddedExponent {
    raw: BigUint,
    offset: i64,
    d: BigUint,
}

impl PaddedExponent {
    /// Applies `offset` to `raw`. `None` if the result would be below 2.
    pub fn new(raw: BigUint, offset: i64) -> Option<Self> {
        let d = apply_offset(&raw, offset)?;
        Some(PaddedExponent { raw, offset, d })
    }

    pub fn raw(&self) -> &BigUint {
        &self.raw
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    pub fn d(&self) -> &BigUint {
        &self.d
    }

    /// The link exponent `d^2 + 1`.
    pub fn link_exponent(&self) -> BigUint {
        link_exponent(&self.d)
    }
}

/// `raw + offset`, or `None` if that is below 2.
pub fn apply_offset(raw: &BigUint, offset: i64) -> Option<BigUint> {
    let magnitude = BigUint::from(offset.unsigned_abs());
    let d = if offset >= 0 {
        raw + magnitude
    } else if *raw >= magnitude {
        raw - magnitude
    } else {
        return None;
    };
    (d >= BigUint::from(2u8)).then_some(d)
}

pub fn link_exponent(d: &BigUint) -> BigUint {
    d * d + 1u8
}

/// Offsets in search order: 0, +1, -1, +2, -2, ...
fn offset_sequence() -> impl Iterator<Item = i64> {
    std::iter::once(0).chain((1..=MAX_PAD_OFFSET).flat_map(|k| [k, -k]))
}

/// Smallest-magnitude offset (positive first on ties) making `d >= 2` and
/// `gcd(d^2 + 1, phi) = 1`.
pub fn pad_exponent(d_raw: &BigUint, sk: &PrivateKey) -> Result<PaddedExponent> {
    offset_sequence()
        .filter_map(|off| PaddedExponent::new(d_raw.clone(), off))
        .find(|pe| pe.link_exponent().gcd(&sk.phi).is_one())
        .ok_or(Error::PaddingExhausted(MAX_PAD_OFFSET))
}

/// `e'` with `e' * (d^2 + 1) = 1 (mod phi)`.
pub fn redaction_exponent(pe: &PaddedExponent, sk: &PrivateKey) -> Result<BigUint> {
    modmath::mod_inverse(&pe.link_exponent(), &sk.phi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: u64) -> BigUint {
        BigUint::from(v)
    }

    fn toy() -> PrivateKey {
        PrivateKey::from_primes(n(7), n(11)).unwrap()
    }

    fn gcd_u64(a: u64, b: u64) -> u64 {
        if b == 0 { a } else { gcd_u64(b, a % b) }
    }

    #[test]
    fn toy_key_invariants() {
        let sk = toy();
        assert_eq!(sk.modulus(), n(77));
        assert_eq!(*sk.phi(), n(60));
        // phi = 4 * r1 * r2
        assert_eq!(4 * 3 * 5, 60);
        assert!(PrivateKey::from_primes(n(7), n(7)).is_err());
        assert!(PrivateKey::from_primes(n(7), n(13)).is_err());
    }

    #[test]
    fn pad_exponent_examples() {
        let sk = toy();
        // gcd scan oracle
        let oracle = |raw: i64| {
            [0i64, 1, -1, 2, -2, 3, -3, 4, -4]
                .into_iter()
                .find(|off| raw + off >= 2 && gcd_u64(((raw + off) * (raw + off) + 1) as u64, 60) == 1)
                .unwrap()
        };
        assert_eq!(oracle(4), 0);
        assert_eq!(oracle(3), 1);
        assert_eq!(oracle(2), 2);

        let pe = pad_exponent(&n(4), &sk).unwrap();
        assert_eq!((pe.d().clone(), pe.offset()), (n(4), 0));
        let pe = pad_exponent(&n(3), &sk).unwrap();
        assert_eq!((pe.d().clone(), pe.offset()), (n(4), 1));
        let pe = pad_exponent(&n(2), &sk).unwrap();
        assert_eq!((pe.d().clone(), pe.offset()), (n(4), 2));
        let pe = pad_exponent(&n(0), &sk).unwrap();
        assert_eq!((pe.d().clone(), pe.offset()), (n(4), 4));

        for raw in 0..200u64 {
            let pe = pad_exponent(&n(raw), &sk).unwrap();
            assert_eq!(pe.offset(), oracle(raw as i64), "raw {raw}");
        }
    }

    #[test]
    fn redaction_exponent_examples() {
        let sk = toy();
        let brute = (1..60u64).find(|e| e * 17 % 60 == 1).unwrap();
        assert_eq!(brute, 53);
        let pe = PaddedExponent::new(n(4), 0).unwrap();
        assert_eq!(redaction_exponent(&pe, &sk).unwrap(), n(53));
        let bad = PaddedExponent::new(n(3), 0).unwrap();
        assert!(matches!(redaction_exponent(&bad, &sk), Err(Error::NotInvertible)));
    }

    #[test]
    fn apply_offset_bounds() {
        assert_eq!(apply_offset(&n(5), -3), Some(n(2)));
        assert_eq!(apply_offset(&n(5), -4), None);
        assert_eq!(apply_offset(&n(0), 1), None);
        assert_eq!(apply_offset(&n(0), 2), Some(n(2)));
    }

    #[test]
    fn keygen_is_deterministic_and_consistent() {
        let seed = RngSeed([3; 32]);
        let (pp, sk) = keygen(24, &seed).unwrap();
        let (pp2, sk2) = keygen(24, &seed).unwrap();
        assert_eq!(pp, pp2);
        assert_eq!(sk, sk2);
        assert_eq!(sk.modulus(), *pp.modulus());
        assert_ne!(sk.p(), sk.q());
        assert_eq!(sk.p().bits(), 24);
        assert!(sk.matches(&pp));
        assert!(matches!(keygen(5, &seed), Err(Error::InvalidBitLength(5))));
        let (_, tiny) = keygen(6, &seed).unwrap();
        assert_eq!(tiny.modulus(), n(47 * 59));
    }

    #[test]
    fn genesis_prefix_is_unit() {
        let pp = PublicParams::for_chain(n(77), HashAlg::Sha256, "t").unwrap();
        let g = pp.genesis_prefix().clone();
        assert!(g > n(0) && g < n(77));
        assert!(g.gcd(&n(77)).is_one());
        assert!(PublicParams::new(n(76), HashAlg::Sha256).is_err());
        assert!(PublicParams::with_genesis(n(77), HashAlg::Sha256, n(7)).is_err());
        assert!(PublicParams::with_genesis(n(77), HashAlg::Sha256, n(0)).is_err());
    }

    #[test]
    fn hash_alg_names_round_trip() {
        for alg in [HashAlg::Sha256, HashAlg::Sha384, HashAlg::Sha512] {
            assert_eq!(alg.name().parse::<HashAlg>().unwrap(), alg);
        }
        assert!("md5".parse::<HashAlg>().is_err());
        assert_eq!(HashAlg::Sha512.digest(b"").len(), 64);
    }
}
