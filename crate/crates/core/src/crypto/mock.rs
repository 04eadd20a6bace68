//! Correctness-only FHE stand-in. The ciphertext is the plaintext under a
//! keyed additive mask plus a fresh nonce, so every homomorphic operation is
//! evaluated exactly on the tracked plaintext. This is NOT an encryption
//! scheme in any security sense; it exists to run the protocol variants that
//! need ciphertext-ciphertext products.

use super::{CipherValue, Payload};
use crate::error::{Error, Result};
use crate::wire::Reader;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::Rng;

fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockKey {
    modulus: u64,
    mask_key: u64,
}

impl MockKey {
    pub fn generate<R: Rng>(modulus: u64, rng: &mut R) -> Self {
        MockKey {
            modulus,
            mask_key: rng.gen(),
        }
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    fn prf(&self, nonce: u64) -> u64 {
        mix64(self.mask_key ^ mix64(nonce)) % self.modulus
    }

    fn wrap(&self, m: u64, nonce: u64) -> CipherValue {
        let masked = (m + self.prf(nonce)) % self.modulus;
        CipherValue(Payload::Mock { masked, nonce })
    }

    fn unwrap_plain(&self, c: &CipherValue) -> (u64, u64) {
        match c.0 {
            Payload::Mock { masked, nonce } => {
                let mask = self.prf(nonce);
                ((masked + self.modulus - mask) % self.modulus, nonce)
            }
            _ => unreachable!("scheme checked by caller"),
        }
    }

    fn reduce(&self, m: &BigUint) -> u64 {
        (m % BigUint::from(self.modulus)).to_u64().unwrap()
    }

    pub fn encrypt<R: Rng>(&self, m: &BigUint, rng: &mut R) -> CipherValue {
        self.wrap(self.reduce(m), rng.gen())
    }

    pub fn decrypt(&self, c: &CipherValue) -> BigUint {
        BigUint::from(self.unwrap_plain(c).0)
    }

    pub fn add(&self, a: &CipherValue, b: &CipherValue) -> CipherValue {
        let (ma, na) = self.unwrap_plain(a);
        let (mb, nb) = self.unwrap_plain(b);
        self.wrap((ma + mb) % self.modulus, mix64(na ^ nb.rotate_left(17)))
    }

    pub fn scalar_mul(&self, k: &BigUint, c: &CipherValue) -> CipherValue {
        let (m, nonce) = self.unwrap_plain(c);
        let k = self.reduce(k);
        let prod = ((k as u128 * m as u128) % self.modulus as u128) as u64;
        self.wrap(prod, mix64(nonce ^ k.rotate_left(29) ^ 0x5ca1))
    }

    pub fn mul(&self, a: &CipherValue, b: &CipherValue) -> CipherValue {
        let (ma, na) = self.unwrap_plain(a);
        let (mb, nb) = self.unwrap_plain(b);
        let prod = ((ma as u128 * mb as u128) % self.modulus as u128) as u64;
        self.wrap(prod, mix64(na.rotate_left(7) ^ nb ^ 0x9d3c))
    }

    pub fn neg(&self, c: &CipherValue) -> CipherValue {
        let (m, nonce) = self.unwrap_plain(c);
        self.wrap((self.modulus - m) % self.modulus, mix64(nonce ^ 0x4e47))
    }

    pub fn random_cipher<R: Rng>(&self, rng: &mut R) -> CipherValue {
        self.wrap(rng.gen_range(0..self.modulus), rng.gen())
    }

    pub(super) fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.modulus.to_be_bytes());
        out.extend_from_slice(&self.mask_key.to_be_bytes());
    }

    pub(super) fn read(r: &mut Reader<'_>) -> Result<Self> {
        let modulus = r.u64()?;
        let mask_key = r.u64()?;
        if modulus < 3 {
            return Err(Error::Wire("mock modulus too small".into()));
        }
        Ok(MockKey { modulus, mask_key })
    }
}
