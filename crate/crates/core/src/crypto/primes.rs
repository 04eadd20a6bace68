//! Primality testing and prime generation for key setup.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;
use std::sync::OnceLock;

/// Deterministic Miller-Rabin for u64 (the listed bases are a proven
/// deterministic witness set below 3.3e24).
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let d = (n - 1) >> (n - 1).trailing_zeros();
    let s = (n - 1).trailing_zeros();
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 0..s - 1 {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod_u64(acc, base, m);
        }
        base = mul_mod_u64(base, base, m);
        exp >>= 1;
    }
    acc
}

fn small_primes() -> &'static [u64] {
    static SIEVE: OnceLock<Vec<u64>> = OnceLock::new();
    SIEVE.get_or_init(|| {
        let bound = 2000usize;
        let mut is_comp = vec![false; bound];
        let mut out = Vec::new();
        for i in 2..bound {
            if !is_comp[i] {
                out.push(i as u64);
                let mut j = i * i;
                while j < bound {
                    is_comp[j] = true;
                    j += i;
                }
            }
        }
        out
    })
}

fn miller_rabin<R: Rng>(n: &BigUint, rounds: usize, rng: &mut R) -> bool {
    let one = BigUint::one();
    let two = BigUint::from(2u32);
    let n_minus_one = n - &one;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    'round: for i in 0..rounds {
        // Base 2 first: it kills almost every composite candidate cheaply.
        let a = if i == 0 {
            two.clone()
        } else {
            rng.gen_biguint_range(&two, &n_minus_one)
        };
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 0..s.saturating_sub(1) {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'round;
            }
        }
        return false;
    }
    true
}

/// Random prime of exactly `bits` bits with the top two bits set, so the
/// product of two such primes has exactly `2*bits` bits.
pub fn gen_prime<R: Rng>(bits: u64, rng: &mut R) -> BigUint {
    assert!(bits >= 16);
    loop {
        let mut cand = rng.gen_biguint(bits);
        cand.set_bit(bits - 1, true);
        cand.set_bit(bits - 2, true);
        cand.set_bit(0, true);
        if small_primes()
            .iter()
            .any(|&p| (&cand % p).is_zero() && cand != BigUint::from(p))
        {
            continue;
        }
        if miller_rabin(&cand, 40, rng) {
            return cand;
        }
    }
}

/// Modular inverse via extended Euclid; `None` when gcd(a, m) != 1.
pub fn mod_inverse(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    use num_bigint::BigInt;
    let a = BigInt::from(a % m);
    let m_int = BigInt::from(m.clone());
    let ext = a.extended_gcd(&m_int);
    if !ext.gcd.is_one() {
        return None;
    }
    let mut x = ext.x % &m_int;
    if x < BigInt::zero() {
        x += &m_int;
    }
    Some(x.to_biguint().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn u64_primality() {
        assert!(is_prime_u64((1 << 61) - 1));
        assert!(is_prime_u64(2));
        assert!(is_prime_u64(3));
        assert!(!is_prime_u64(1));
        assert!(!is_prime_u64((1 << 61) - 3));
        assert!(!is_prime_u64(6_700_417u64 * 97));
    }

    #[test]
    fn generated_primes_are_distinct_and_sized() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let p = gen_prime(128, &mut rng);
        let q = gen_prime(128, &mut rng);
        assert_eq!(p.bits(), 128);
        assert_eq!(q.bits(), 128);
        assert_ne!(p, q);
    }

    #[test]
    fn inverse_round_trips() {
        let m = BigUint::from(1019u32 * 1021);
        let a = BigUint::from(12345u32);
        let inv = mod_inverse(&a, &m).unwrap();
        assert!(((a * inv) % &m).is_one());
        assert!(mod_inverse(&BigUint::from(1019u32), &m).is_none());
    }
}
