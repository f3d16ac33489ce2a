//! The two-step corruption attack against the weakened link `X^d mod n`,
//! and the check that the same forgery fails against `X^(d^2 + 1) mod n`.
//!
//! Given one collision `x^d = x'^d' (mod n)` with `gcd(d, d') = 1`, Bezout
//! coefficients `d*a + d'*b = 1` yield `x'' = x'^a * x^b` and `d'' = d*d'`
//! with `x''^d'' = x^d`. Nothing but public values is needed.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::One;

use crate::keys::{link_exponent, PrivateKey, PublicParams};
use crate::modmath::{self, RngSeed};
use crate::{Error, Result};

/// A known collision `x^d = x_alt^d_alt (mod n)` in the weak scheme.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeakCollision {
    pub x: BigUint,
    pub d: BigUint,
    pub x_alt: BigUint,
    pub d_alt: BigUint,
    pub n: BigUint,
}

/// Builds a collision fixture with the trapdoor: a random unit `y` is
/// rooted twice, `x = y^(1/d)` and `x_alt = y^(1/d_alt)`.
pub fn make_weak_collision(sk: &PrivateKey, pp: &PublicParams, seed: &RngSeed) -> Result<WeakCollision> {
    if !sk.matches(pp) {
        return Err(Error::KeyMismatch);
    }
    let n = pp.modulus();
    let phi = sk.phi();
    let two = BigUint::from(2u8);
    let mut rng = seed.rng();

    let y = loop {
        let y = rng.gen_biguint_range(&two, n);
        if y.gcd(n).is_one() {
            break y;
        }
    };
    let mut exponent = |other: Option<&BigUint>| loop {
        let d = rng.gen_biguint_range(&two, n);
        if d.gcd(phi).is_one() && other.is_none_or(|o| d.gcd(o).is_one()) {
            break d;
        }
    };
    let d = exponent(None);
    let d_alt = exponent(Some(&d));

    let x = modmath::mod_exp(&y, &modmath::mod_inverse(&d, phi)?, n)?;
    let x_alt = modmath::mod_exp(&y, &modmath::mod_inverse(&d_alt, phi)?, n)?;
    Ok(WeakCollision { x, d, x_alt, d_alt, n: n.clone() })
}

/// Forges a fresh weak-scheme pair `(x'', d'')` from a collision.
pub fn two_step_forge(wc: &WeakCollision) -> Result<(BigUint, BigUint)> {
    let (g, a, b) = modmath::ext_gcd(&wc.d, &wc.d_alt)?;
    if !g.is_one() {
        return Err(Error::NotCoprime);
    }
    let left = modmath::mod_exp_signed(&wc.x_alt, &a, &wc.n)?;
    let right = modmath::mod_exp_signed(&wc.x, &b, &wc.n)?;
    Ok(((left * right) % &wc.n, &wc.d * &wc.d_alt))
}

/// `true` when the forgery fails the real check, i.e.
/// `x''^(d''^2 + 1) != x^(d^2 + 1) (mod n)`.
pub fn strong_scheme_resists(wc: &WeakCollision) -> Result<bool> {
    let (xf, df) = two_step_forge(wc)?;
    let forged = modmath::mod_exp(&xf, &link_exponent(&df), &wc.n)?;
    let honest = modmath::mod_exp(&wc.x, &link_exponent(&wc.d), &wc.n)?;
    Ok(forged != honest)
}

/// Weak-scheme check `x''^d'' = x^d (mod n)` for a forged pair.
pub fn weak_scheme_accepts(wc: &WeakCollision, forged: &(BigUint, BigUint)) -> Result<bool> {
    let lhs = modmath::mod_exp(&forged.0, &forged.1, &wc.n)?;
    Ok(lhs == modmath::mod_exp(&wc.x, &wc.d, &wc.n)?)
}

/// Outcome of [`run_trials`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialSummary {
    pub trials: usize,
    pub weak_forgeries: usize,
    pub strong_survivals: usize,
}

/// Runs `trials` seeded collisions through the forgery and both checks.
pub fn run_trials(sk: &PrivateKey, pp: &PublicParams, seed: &RngSeed, trials: usize) -> Result<TrialSummary> {
    let mut summary = TrialSummary { trials, weak_forgeries: 0, strong_survivals: 0 };
    for t in 0..trials {
        let wc = make_weak_collision(sk, pp, &seed.derive(&(t as u64).to_be_bytes()))?;
        let forged = two_step_forge(&wc)?;
        if weak_scheme_accepts(&wc, &forged)? {
            summary.weak_forgeries += 1;
        }
        if strong_scheme_resists(&wc)? {
            summary.strong_survivals += 1;
        }
    }
    Ok(summary)
}
