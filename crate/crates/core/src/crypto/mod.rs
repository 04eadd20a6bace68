//! Homomorphic encryption layer.
//!
//! Two instantiations sit behind one contract:
//!
//! * `lhe-residuosity` — a real additively homomorphic scheme based on
//!   composite residuosity (Paillier). Supports ciphertext addition and
//!   cleartext-ciphertext products; ciphertext-ciphertext products are
//!   rejected.
//! * `mock-fhe` — a correctness-only stand-in for a fully homomorphic
//!   scheme: the plaintext is tracked exactly under a keyed additive mask,
//!   so unbounded homomorphic multiplication is available. It provides **no
//!   security whatsoever** and exists so the multiplicative protocol
//!   variants can be exercised and verified without an RLWE stack.
//!
//! Ciphertexts serialize as a 1-byte scheme tag followed by a fixed-width
//! big-endian payload; the width is determined by the scheme.

mod mock;
mod paillier;
pub mod primes;

use crate::error::{Error, Result};
use num_bigint::BigUint;
use rand::Rng;

pub use mock::MockKey;
pub use paillier::{PaillierPublic, PaillierSecret};

/// Default plaintext modulus for the mock scheme: the Mersenne prime 2^61-1.
pub const MOCK_DEFAULT_MODULUS: u64 = (1u64 << 61) - 1;

/// Toy security parameter accepted by the mock scheme.
pub const KAPPA_TOY: u32 = 64;

/// Minimum modulus size, in bits, for the residuosity scheme.
pub const KAPPA_MIN_RESIDUOSITY: u32 = 2048;

const TAG_MOCK: u8 = 0x01;
const TAG_PAILLIER: u8 = 0x02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    LheResiduosity,
    MockFhe,
}

impl SchemeKind {
    pub fn tag(self) -> u8 {
        match self {
            SchemeKind::MockFhe => TAG_MOCK,
            SchemeKind::LheResiduosity => TAG_PAILLIER,
        }
    }

    pub fn supports_mul(self) -> bool {
        matches!(self, SchemeKind::MockFhe)
    }
}

/// What to instantiate and at which size. For the residuosity scheme the
/// plaintext modulus is the composite produced at setup, so it is not part
/// of the descriptor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeDescriptor {
    pub kind: SchemeKind,
    pub plaintext_modulus: Option<u64>,
    pub kappa: u32,
}

impl SchemeDescriptor {
    pub fn mock_fhe() -> Self {
        SchemeDescriptor {
            kind: SchemeKind::MockFhe,
            plaintext_modulus: Some(MOCK_DEFAULT_MODULUS),
            kappa: KAPPA_TOY,
        }
    }

    pub fn mock_fhe_with_modulus(modulus: u64) -> Self {
        SchemeDescriptor {
            plaintext_modulus: Some(modulus),
            ..Self::mock_fhe()
        }
    }

    pub fn lhe_residuosity(kappa: u32) -> Self {
        SchemeDescriptor {
            kind: SchemeKind::LheResiduosity,
            plaintext_modulus: None,
            kappa,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SchemeKind::MockFhe => {
                let p = self.plaintext_modulus.ok_or_else(|| {
                    Error::UnsupportedScheme("mock-fhe requires a plaintext modulus".into())
                })?;
                if p < 3 || !primes::is_prime_u64(p) {
                    return Err(Error::UnsupportedScheme(format!(
                        "mock-fhe plaintext modulus {p} is not an odd prime"
                    )));
                }
                Ok(())
            }
            SchemeKind::LheResiduosity => {
                if self.kappa < KAPPA_MIN_RESIDUOSITY {
                    return Err(Error::UnsupportedScheme(format!(
                        "residuosity scheme needs kappa >= {KAPPA_MIN_RESIDUOSITY} bits, got {}",
                        self.kappa
                    )));
                }
                if self.kappa % 2 != 0 {
                    return Err(Error::UnsupportedScheme(
                        "residuosity kappa must be even".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Opaque ciphertext. Every value that travels between the parties is one
/// of these.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherValue(pub(crate) Payload);

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Payload {
    Mock { masked: u64, nonce: u64 },
    Paillier(BigUint),
}

impl CipherValue {
    pub fn kind(&self) -> SchemeKind {
        match self.0 {
            Payload::Mock { .. } => SchemeKind::MockFhe,
            Payload::Paillier(_) => SchemeKind::LheResiduosity,
        }
    }
}

#[derive(Debug, Clone)]
pub enum PublicKey {
    Mock(MockKey),
    Paillier(PaillierPublic),
}

#[derive(Debug, Clone)]
pub enum SecretKey {
    Mock(MockKey),
    Paillier(PaillierSecret),
}

#[derive(Debug, Clone)]
pub struct KeyPair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

/// `E.SETUP`: builds a key pair for the requested scheme.
pub fn e_setup<R: Rng>(descriptor: &SchemeDescriptor, rng: &mut R) -> Result<KeyPair> {
    descriptor.validate()?;
    match descriptor.kind {
        SchemeKind::MockFhe => {
            let key = MockKey::generate(descriptor.plaintext_modulus.unwrap(), rng);
            Ok(KeyPair {
                public: PublicKey::Mock(key.clone()),
                secret: SecretKey::Mock(key),
            })
        }
        SchemeKind::LheResiduosity => {
            let secret = PaillierSecret::generate(descriptor.kappa, rng);
            Ok(KeyPair {
                public: PublicKey::Paillier(secret.public().clone()),
                secret: SecretKey::Paillier(secret),
            })
        }
    }
}

impl PublicKey {
    pub fn kind(&self) -> SchemeKind {
        match self {
            PublicKey::Mock(_) => SchemeKind::MockFhe,
            PublicKey::Paillier(_) => SchemeKind::LheResiduosity,
        }
    }

    pub fn plaintext_modulus(&self) -> BigUint {
        match self {
            PublicKey::Mock(k) => BigUint::from(k.modulus()),
            PublicKey::Paillier(pk) => pk.modulus().clone(),
        }
    }

    pub fn encrypt<R: Rng>(&self, m: &BigUint, rng: &mut R) -> CipherValue {
        match self {
            PublicKey::Mock(k) => k.encrypt(m, rng),
            PublicKey::Paillier(pk) => pk.encrypt(m, rng),
        }
    }

    /// Homomorphic addition: decrypts to the sum of the two plaintexts.
    pub fn add_ct(&self, a: &CipherValue, b: &CipherValue) -> Result<CipherValue> {
        match (self, &a.0, &b.0) {
            (PublicKey::Mock(k), Payload::Mock { .. }, Payload::Mock { .. }) => Ok(k.add(a, b)),
            (PublicKey::Paillier(pk), Payload::Paillier(ca), Payload::Paillier(cb)) => {
                Ok(pk.add(ca, cb))
            }
            _ => Err(Error::SchemeMismatch),
        }
    }

    /// Cleartext-ciphertext product: decrypts to `m * Dec(c)`.
    pub fn scalar_mul(&self, m: &BigUint, c: &CipherValue) -> Result<CipherValue> {
        match (self, &c.0) {
            (PublicKey::Mock(k), Payload::Mock { .. }) => Ok(k.scalar_mul(m, c)),
            (PublicKey::Paillier(pk), Payload::Paillier(cc)) => Ok(pk.scalar_mul(m, cc)),
            _ => Err(Error::SchemeMismatch),
        }
    }

    /// Homomorphic product. Only the mock FHE supports this.
    pub fn mul_ct(&self, a: &CipherValue, b: &CipherValue) -> Result<CipherValue> {
        match (self, &a.0, &b.0) {
            (PublicKey::Mock(k), Payload::Mock { .. }, Payload::Mock { .. }) => Ok(k.mul(a, b)),
            (PublicKey::Paillier(_), Payload::Paillier(_), Payload::Paillier(_)) => {
                Err(Error::UnsupportedOperation(
                    "ciphertext-ciphertext product needs the FHE contract",
                ))
            }
            _ => Err(Error::SchemeMismatch),
        }
    }

    /// Ciphertext negation, derived from the scalar product by modulus-1.
    /// For the residuosity scheme this is modular inversion of the
    /// ciphertext, which is much cheaper than the generic exponentiation.
    pub fn neg(&self, c: &CipherValue) -> Result<CipherValue> {
        match (self, &c.0) {
            (PublicKey::Mock(k), Payload::Mock { .. }) => Ok(k.neg(c)),
            (PublicKey::Paillier(pk), Payload::Paillier(cc)) => pk.neg(cc),
            _ => Err(Error::SchemeMismatch),
        }
    }

    /// `Dec(a) - Dec(b)` under encryption.
    pub fn sub_ct(&self, a: &CipherValue, b: &CipherValue) -> Result<CipherValue> {
        let nb = self.neg(b)?;
        self.add_ct(a, &nb)
    }

    /// Ciphertext of a plaintext drawn uniformly from the plaintext space.
    pub fn random_cipher<R: Rng>(&self, rng: &mut R) -> CipherValue {
        match self {
            PublicKey::Mock(k) => k.random_cipher(rng),
            PublicKey::Paillier(pk) => pk.random_cipher(rng),
        }
    }

    /// Serialized ciphertext width in bytes, tag included.
    pub fn cipher_len(&self) -> usize {
        match self {
            PublicKey::Mock(_) => 1 + 16,
            PublicKey::Paillier(pk) => 1 + pk.payload_len(),
        }
    }

    pub fn cipher_to_bytes(&self, c: &CipherValue) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(self.cipher_len());
        match (self, &c.0) {
            (PublicKey::Mock(_), Payload::Mock { masked, nonce }) => {
                out.push(TAG_MOCK);
                out.extend_from_slice(&masked.to_be_bytes());
                out.extend_from_slice(&nonce.to_be_bytes());
            }
            (PublicKey::Paillier(pk), Payload::Paillier(v)) => {
                out.push(TAG_PAILLIER);
                let bytes = v.to_bytes_be();
                let pad = pk.payload_len() - bytes.len();
                out.extend(std::iter::repeat(0u8).take(pad));
                out.extend_from_slice(&bytes);
            }
            _ => return Err(Error::SchemeMismatch),
        }
        Ok(out)
    }

    pub fn cipher_from_bytes(&self, bytes: &[u8]) -> Result<CipherValue> {
        if bytes.len() != self.cipher_len() {
            return Err(Error::Wire(format!(
                "ciphertext length {} != expected {}",
                bytes.len(),
                self.cipher_len()
            )));
        }
        match (self, bytes[0]) {
            (PublicKey::Mock(_), TAG_MOCK) => Ok(CipherValue(Payload::Mock {
                masked: u64::from_be_bytes(bytes[1..9].try_into().unwrap()),
                nonce: u64::from_be_bytes(bytes[9..17].try_into().unwrap()),
            })),
            (PublicKey::Paillier(_), TAG_PAILLIER) => Ok(CipherValue(Payload::Paillier(
                BigUint::from_bytes_be(&bytes[1..]),
            ))),
            _ => Err(Error::SchemeMismatch),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            PublicKey::Mock(k) => {
                out.push(TAG_MOCK);
                k.write(&mut out);
            }
            PublicKey::Paillier(pk) => {
                out.push(TAG_PAILLIER);
                pk.write(&mut out);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<PublicKey> {
        let mut r = crate::wire::Reader::new(bytes);
        let pk = match r.u8()? {
            TAG_MOCK => PublicKey::Mock(MockKey::read(&mut r)?),
            TAG_PAILLIER => PublicKey::Paillier(PaillierPublic::read(&mut r)?),
            t => return Err(Error::Wire(format!("unknown scheme tag {t:#x}"))),
        };
        r.finish()?;
        Ok(pk)
    }
}

impl SecretKey {
    pub fn kind(&self) -> SchemeKind {
        match self {
            SecretKey::Mock(_) => SchemeKind::MockFhe,
            SecretKey::Paillier(_) => SchemeKind::LheResiduosity,
        }
    }

    pub fn decrypt(&self, c: &CipherValue) -> Result<BigUint> {
        match (self, &c.0) {
            (SecretKey::Mock(k), Payload::Mock { .. }) => Ok(k.decrypt(c)),
            (SecretKey::Paillier(sk), Payload::Paillier(cc)) => sk.decrypt(cc),
            _ => Err(Error::SchemeMismatch),
        }
    }
}

impl KeyPair {
    /// Encryption using the secret material where that is faster (CRT path
    /// for the residuosity scheme). Output distribution matches
    /// [`PublicKey::encrypt`].
    pub fn encrypt<R: Rng>(&self, m: &BigUint, rng: &mut R) -> CipherValue {
        match (&self.public, &self.secret) {
            (PublicKey::Mock(k), _) => k.encrypt(m, rng),
            (_, SecretKey::Paillier(sk)) => sk.encrypt_crt(m, rng),
            _ => self.public.encrypt(m, rng),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests;
