//! Additively homomorphic encryption from composite residuosity, with
//! `g = 1 + n` so that `Enc(m) = (1 + m*n) * h^s mod n^2`, where `h` is a
//! public n-th residue and `s` a short random exponent. Decryption and the
//! secret-side encryption path run under the CRT over `p^2` and `q^2`.

use super::{primes, CipherValue, Payload};
use crate::error::{Error, Result};
use crate::wire::Reader;
use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::One;
use rand::Rng;

/// Bit length of the randomizer exponent `s`.
const RAND_EXP_BITS: u64 = 384;

#[derive(Debug, Clone)]
pub struct PaillierPublic {
    n: BigUint,
    n_sq: BigUint,
    h: BigUint,
    payload_len: usize,
}

#[derive(Debug, Clone)]
pub struct PaillierSecret {
    public: PaillierPublic,
    p: BigUint,
    q: BigUint,
    p_sq: BigUint,
    q_sq: BigUint,
    /// (L_p((1+n)^(p-1) mod p^2))^-1 mod p, i.e. (-q)^-1 mod p.
    hp: BigUint,
    hq: BigUint,
    p_inv_q: BigUint,
    p_sq_inv_q_sq: BigUint,
    h_mod_p_sq: BigUint,
    h_mod_q_sq: BigUint,
}

impl PaillierPublic {
    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn modulus_sq(&self) -> &BigUint {
        &self.n_sq
    }

    pub fn payload_len(&self) -> usize {
        self.payload_len
    }

    pub fn encrypt<R: Rng>(&self, m: &BigUint, rng: &mut R) -> CipherValue {
        let m = m % &self.n;
        let s = rng.gen_biguint(RAND_EXP_BITS);
        let r = self.h.modpow(&s, &self.n_sq);
        let g_m = (BigUint::one() + m * &self.n) % &self.n_sq;
        CipherValue(Payload::Paillier((g_m * r) % &self.n_sq))
    }

    pub fn add(&self, a: &BigUint, b: &BigUint) -> CipherValue {
        CipherValue(Payload::Paillier((a * b) % &self.n_sq))
    }

    pub fn scalar_mul(&self, k: &BigUint, c: &BigUint) -> CipherValue {
        CipherValue(Payload::Paillier(c.modpow(&(k % &self.n), &self.n_sq)))
    }

    pub fn neg(&self, c: &BigUint) -> Result<CipherValue> {
        let inv = primes::mod_inverse(c, &self.n_sq).ok_or(Error::NonInvertible)?;
        Ok(CipherValue(Payload::Paillier(inv)))
    }

    /// A uniform element of the ciphertext group. The map
    /// `(m, r) -> (1+n)^m r^n` is a bijection onto the units mod `n^2`, so
    /// this is an encryption of a uniform plaintext under uniform
    /// randomness, at the cost of a single sample.
    pub fn random_cipher<R: Rng>(&self, rng: &mut R) -> CipherValue {
        loop {
            let c = rng.gen_biguint_below(&self.n_sq);
            if !c.is_multiple_of(&self.n) {
                return CipherValue(Payload::Paillier(c));
            }
        }
    }

    pub(super) fn write(&self, out: &mut Vec<u8>) {
        crate::wire::put_bytes(out, &self.n.to_bytes_be());
        crate::wire::put_bytes(out, &self.h.to_bytes_be());
    }

    pub(super) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let n = BigUint::from_bytes_be(r.bytes()?);
        let h = BigUint::from_bytes_be(r.bytes()?);
        if n.bits() < 32 {
            return Err(Error::Wire("residuosity modulus too small".into()));
        }
        Ok(Self::from_parts(n, h))
    }

    fn from_parts(n: BigUint, h: BigUint) -> Self {
        let n_sq = &n * &n;
        let payload_len = ((n_sq.bits() + 7) / 8) as usize;
        PaillierPublic {
            n,
            n_sq,
            h,
            payload_len,
        }
    }
}

fn crt_combine(a: &BigUint, b: &BigUint, m_a: &BigUint, m_b: &BigUint, m_a_inv: &BigUint) -> BigUint {
    // x = a (mod m_a), x = b (mod m_b); m_a_inv = m_a^-1 mod m_b.
    let diff = ((b + m_b) - (a % m_b)) % m_b;
    a + m_a * ((diff * m_a_inv) % m_b)
}

impl PaillierSecret {
    pub fn generate<R: Rng>(kappa: u32, rng: &mut R) -> Self {
        let half = kappa as u64 / 2;
        let (p, q, n) = loop {
            let p = primes::gen_prime(half, rng);
            let q = primes::gen_prime(half, rng);
            if p == q {
                continue;
            }
            let n = &p * &q;
            if n.bits() == kappa as u64 {
                break (p, q, n);
            }
        };
        let n_sq = &n * &n;
        let h = loop {
            let x = rng.gen_biguint_below(&n_sq);
            if x.gcd(&n).is_one() {
                break x.modpow(&n, &n_sq);
            }
        };
        let public = PaillierPublic::from_parts(n.clone(), h.clone());

        let p_sq = &p * &p;
        let q_sq = &q * &q;
        // (1+n)^(p-1) = 1 + (p-1)n mod p^2, so L_p of it is (p-1)q = -q mod p.
        let hp = primes::mod_inverse(&(&p - (&q % &p)), &p).expect("p prime, q != p");
        let hq = primes::mod_inverse(&(&q - (&p % &q)), &q).expect("q prime, p != q");
        let p_inv_q = primes::mod_inverse(&(&p % &q), &q).expect("distinct primes");
        let p_sq_inv_q_sq = primes::mod_inverse(&(&p_sq % &q_sq), &q_sq).expect("coprime squares");
        let h_mod_p_sq = &h % &p_sq;
        let h_mod_q_sq = &h % &q_sq;
        PaillierSecret {
            public,
            p,
            q,
            p_sq,
            q_sq,
            hp,
            hq,
            p_inv_q,
            p_sq_inv_q_sq,
            h_mod_p_sq,
            h_mod_q_sq,
        }
    }

    pub fn public(&self) -> &PaillierPublic {
        &self.public
    }

    /// Encryption with the randomizer power computed under the CRT.
    pub fn encrypt_crt<R: Rng>(&self, m: &BigUint, rng: &mut R) -> CipherValue {
        let n = &self.public.n;
        let n_sq = &self.public.n_sq;
        let m = m % n;
        let s = rng.gen_biguint(RAND_EXP_BITS);
        let a_p = self.h_mod_p_sq.modpow(&s, &self.p_sq);
        let a_q = self.h_mod_q_sq.modpow(&s, &self.q_sq);
        let r = crt_combine(&a_p, &a_q, &self.p_sq, &self.q_sq, &self.p_sq_inv_q_sq);
        let g_m = (BigUint::one() + m * n) % n_sq;
        CipherValue(Payload::Paillier((g_m * r) % n_sq))
    }

    pub fn decrypt(&self, c: &BigUint) -> Result<BigUint> {
        let m_p = self.half_decrypt(c, &self.p, &self.p_sq, &self.hp)?;
        let m_q = self.half_decrypt(c, &self.q, &self.q_sq, &self.hq)?;
        let diff = ((&m_q + &self.q) - (&m_p % &self.q)) % &self.q;
        Ok(&m_p + &self.p * ((diff * &self.p_inv_q) % &self.q))
    }

    fn half_decrypt(
        &self,
        c: &BigUint,
        prime: &BigUint,
        prime_sq: &BigUint,
        helper: &BigUint,
    ) -> Result<BigUint> {
        use num_traits::Zero;
        let x = (c % prime_sq).modpow(&(prime - BigUint::one()), prime_sq);
        // L(x) = (x-1)/prime must be exact; it fails only when gcd(c, n) != 1.
        let t = (&x + prime_sq - BigUint::one()) % prime_sq;
        let (quot, rem) = t.div_rem(prime);
        if !rem.is_zero() {
            return Err(Error::NonInvertible);
        }
        Ok((quot * helper) % prime)
    }
}
