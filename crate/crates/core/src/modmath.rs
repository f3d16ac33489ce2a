//! Arbitrary-precision modular arithmetic, primality testing and safe-prime
//! generation.
//!
//! Nothing in here is constant time.

use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, RandBigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// Default number of Miller-Rabin rounds (error probability <= 4^-64).
pub const DEFAULT_MR_ROUNDS: u32 = 64;

/// Number of odd primes used for trial division and sieving.
const SMALL_PRIME_COUNT: usize = 2048;

/// Candidates tried from one random starting point before resampling.
const SEARCH_WINDOW: usize = 1 << 14;

/// Seed for the deterministic random stream used by every randomized
/// operation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RngSeed(pub [u8; 32]);

impl RngSeed {
    pub fn from_entropy() -> Self {
        let mut bytes = [0u8; 32];
        rand::RngCore::fill_bytes(&mut rand::rngs::OsRng, &mut bytes);
        RngSeed(bytes)
    }

    /// Expands a small integer into a seed. Handy for seeded test loops.
    pub fn from_u64(v: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&v.to_be_bytes());
        RngSeed(bytes)
    }

    pub fn from_hex(s: &str) -> Result<Self> {
        let raw = hex::decode(s).map_err(|e| Error::Parse(format!("seed: {e}")))?;
        let bytes: [u8; 32] = raw
            .try_into()
            .map_err(|_| Error::Parse("seed: expected 32 bytes (64 hex digits)".into()))?;
        Ok(RngSeed(bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Independent child seed for a labelled sub-task.
    pub fn derive(&self, label: &[u8]) -> RngSeed {
        let mut h = Sha256::new();
        h.update(self.0);
        h.update(label);
        RngSeed(h.finalize().into())
    }

    pub fn rng(&self) -> ChaCha20Rng {
        ChaCha20Rng::from_seed(self.0)
    }
}

pub fn mod_exp(base: &BigUint, exponent: &BigUint, modulus: &BigUint) -> Result<BigUint> {
    if *modulus < BigUint::from(2u8) {
        return Err(Error::InvalidModulus);
    }
    Ok(base.modpow(exponent, modulus))
}

/// Extended Euclid: returns `(g, x, y)` with `a*x + b*y = g = gcd(a, b)`.
pub fn ext_gcd(a: &BigUint, b: &BigUint) -> Result<(BigUint, BigInt, BigInt)> {
    if a.is_zero() && b.is_zero() {
        return Err(Error::UndefinedGcd);
    }
    let mut old_r = BigInt::from(a.clone());
    let mut r = BigInt::from(b.clone());
    let (mut old_s, mut s) = (BigInt::one(), BigInt::zero());
    let (mut old_t, mut t) = (BigInt::zero(), BigInt::one());
    while !r.is_zero() {
        let q = &old_r / &r;
        let next_r = &old_r - &q * &r;
        old_r = std::mem::replace(&mut r, next_r);
        let next_s = &old_s - &q * &s;
        old_s = std::mem::replace(&mut s, next_s);
        let next_t = &old_t - &q * &t;
        old_t = std::mem::replace(&mut t, next_t);
    }
    // old_r is non-negative here because both inputs are.
    Ok((old_r.to_biguint().expect("gcd is non-negative"), old_s, old_t))
}

/// Returns `e` in `(0, m)` with `a*e = 1 (mod m)`.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Result<BigUint> {
    if *m < BigUint::from(2u8) {
        return Err(Error::InvalidModulus);
    }
    let (g, x, _) = ext_gcd(&(a % m), m)?;
    if !g.is_one() {
        return Err(Error::NotInvertible);
    }
    Ok(reduce_signed(&x, m))
}

/// Canonical representative of a signed value modulo `m`.
pub fn reduce_signed(v: &BigInt, m: &BigUint) -> BigUint {
    let m = BigInt::from(m.clone());
    v.mod_floor(&m).to_biguint().expect("mod_floor of positive modulus is non-negative")
}

/// `base^exponent mod n` for a signed exponent. Negative exponents raise the
/// modular inverse of `base`, so `base` must be a unit when `exponent < 0`.
pub fn mod_exp_signed(base: &BigUint, exponent: &BigInt, modulus: &BigUint) -> Result<BigUint> {
    let magnitude = exponent.abs().to_biguint().expect("abs is non-negative");
    if exponent.sign() == Sign::Minus {
        mod_exp(&mod_inverse(base, modulus)?, &magnitude, modulus)
    } else {
        mod_exp(base, &magnitude, modulus)
    }
}

fn small_primes() -> &'static [u32] {
    static PRIMES: OnceLock<Vec<u32>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        // Sieve of Eratosthenes large enough for SMALL_PRIME_COUNT odd primes.
        let limit = 20_000usize;
        let mut composite = vec![false; limit];
        let mut out = Vec::with_capacity(SMALL_PRIME_COUNT);
        for i in 2..limit {
            if composite[i] {
                continue;
            }
            if i > 2 {
                out.push(i as u32);
                if out.len() == SMALL_PRIME_COUNT {
                    break;
                }
            }
            let mut j = i * i;
            while j < limit {
                composite[j] = true;
                j += i;
            }
        }
        out
    })
}

/// Miller-Rabin with bases drawn from a stream seeded by the candidate
/// itself, so the answer is a pure function of `(candidate, rounds)`.
///
/// `false` means composite with certainty.
pub fn is_probable_prime(candidate: &BigUint, rounds: u32) -> bool {
    let two = BigUint::from(2u8);
    if *candidate < two {
        return false;
    }
    if *candidate == two {
        return true;
    }
    if candidate.is_even() {
        return false;
    }
    let primes = small_primes();
    if let Some(small) = candidate.to_u64() {
        if small <= u64::from(*primes.last().unwrap()) {
            return primes.binary_search(&(small as u32)).is_ok();
        }
    }
    for &p in primes.iter().take(256) {
        if (candidate % p).is_zero() {
            return false;
        }
    }
    // Anything below the square of the largest trial divisor is now proven prime.
    let bound = u64::from(primes[255]);
    if *candidate < BigUint::from(bound * bound) {
        return true;
    }

    let one = BigUint::one();
    let n_minus_1 = candidate - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    let mut rng = RngSeed(Sha256::digest(candidate.to_bytes_be()).into()).rng();
    'rounds: for _ in 0..rounds.max(1) {
        let a = rng.gen_biguint_range(&two, &n_minus_1);
        let mut x = a.modpow(&d, candidate);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % candidate;
            if x == n_minus_1 {
                continue 'rounds;
            }
            if x == one {
                return false;
            }
        }
        return false;
    }
    true
}

/// `candidate` and `(candidate - 1) / 2` are both probable primes.
pub fn is_safe_prime(candidate: &BigUint, rounds: u32) -> bool {
    if *candidate < BigUint::from(5u8) || candidate.is_even() {
        return false;
    }
    let r: BigUint = candidate >> 1;
    is_probable_prime(&r, rounds) && is_probable_prime(candidate, rounds)
}

/// Random safe prime of exactly `bits` bits, deterministic in `seed`.
///
/// Candidates start at a random odd value with the top bit set and walk
/// upwards in steps of 4 (every safe prime above 5 is 3 mod 4). Both the
/// candidate and its half are sieved by small primes before any modular
/// exponentiation. The walk resamples after [`SEARCH_WINDOW`] steps or when
/// it leaves the bit range.
pub fn gen_safe_prime(bits: u64, seed: &RngSeed) -> Result<BigUint> {
    if bits < 4 {
        return Err(Error::InvalidBitLength(bits));
    }
    let mut rng = seed.rng();
    let primes = small_primes();
    // Sieving only rejects true safe primes when the candidate or its half
    // could itself be a sieve prime.
    let use_sieve = bits > 16;
    let two = BigUint::from(2u8);
    let one = BigUint::one();

    loop {
        let mut c = rng.gen_biguint(bits);
        c.set_bit(bits - 1, true);
        c.set_bit(0, true);
        c.set_bit(1, true);
        let mut residues: Vec<u32> = if use_sieve {
            primes.iter().map(|&p| (&c % p).to_u32().unwrap()).collect()
        } else {
            Vec::new()
        };

        for _ in 0..SEARCH_WINDOW {
            if c.bits() != bits {
                break;
            }
            let survives = residues.iter().all(|&r| r != 0 && r != 1);
            if survives {
                let half: BigUint = &c >> 1;
                // Cheap Fermat screens, half first, then the full test.
                let half_ok = !use_sieve || two.modpow(&(&half - &one), &half).is_one();
                if half_ok
                    && (!use_sieve || two.modpow(&(&c - &one), &c).is_one())
                    && is_safe_prime(&c, DEFAULT_MR_ROUNDS)
                {
                    return Ok(c);
                }
            }
            c += 4u8;
            for (r, &p) in residues.iter_mut().zip(primes) {
                *r = (*r + 4) % p;
            }
        }
    }
}
