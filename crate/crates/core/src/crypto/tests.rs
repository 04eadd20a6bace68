use super::*;
use crate::seed::derive_rng;
use num_traits::{One, Zero};
use std::sync::OnceLock;

fn mock_pair() -> KeyPair {
    let mut rng = derive_rng(11, "crypto-test-mock");
    e_setup(&SchemeDescriptor::mock_fhe(), &mut rng).unwrap()
}

/// Residuosity keygen is slow; every test in this binary shares one pair.
pub(crate) fn paillier_pair() -> &'static KeyPair {
    static PAIR: OnceLock<KeyPair> = OnceLock::new();
    PAIR.get_or_init(|| {
        let mut rng = derive_rng(12, "crypto-test-paillier");
        e_setup(&SchemeDescriptor::lhe_residuosity(2048), &mut rng).unwrap()
    })
}

fn big(v: u64) -> BigUint {
    BigUint::from(v)
}

#[test]
fn mock_setup_roundtrip_identity() {
    let kp = mock_pair();
    let mut rng = derive_rng(1, "t");
    for v in [0u64, 1, 7, MOCK_DEFAULT_MODULUS - 1] {
        let c = kp.public.encrypt(&big(v), &mut rng);
        assert_eq!(kp.secret.decrypt(&c).unwrap(), big(v));
    }
}

#[test]
fn residuosity_setup_has_composite_modulus_of_requested_size() {
    let kp = paillier_pair();
    let n = kp.public.plaintext_modulus();
    assert_eq!(n.bits(), 2048);
    let c = kp.public.encrypt(&BigUint::zero(), &mut derive_rng(2, "t"));
    assert!(kp.secret.decrypt(&c).unwrap().is_zero());
}

#[test]
fn setup_rejects_bad_parameters() {
    let mut rng = derive_rng(3, "t");
    assert!(e_setup(&SchemeDescriptor::lhe_residuosity(1024), &mut rng).is_err());
    assert!(e_setup(&SchemeDescriptor::mock_fhe_with_modulus(1 << 20), &mut rng).is_err());
}

#[test]
fn additive_law() {
    for kp in [&mock_pair(), paillier_pair()] {
        let mut rng = derive_rng(4, "t");
        let c3 = kp.public.encrypt(&big(3), &mut rng);
        let c4 = kp.public.encrypt(&big(4), &mut rng);
        let sum = kp.public.add_ct(&c3, &c4).unwrap();
        assert_eq!(kp.secret.decrypt(&sum).unwrap(), big(7));

        let v = kp.public.encrypt(&big(981), &mut rng);
        let z = kp.public.encrypt(&BigUint::zero(), &mut rng);
        let id = kp.public.add_ct(&v, &z).unwrap();
        assert_eq!(kp.secret.decrypt(&id).unwrap(), big(981));
    }
}

#[test]
fn zero_sum_shares_cancel() {
    for kp in [&mock_pair(), paillier_pair()] {
        let modulus = kp.public.plaintext_modulus();
        let mut rng = derive_rng(5, "t");
        let r1 = big(123456789);
        let r2 = big(987654321);
        let r3 = (&modulus - &r1 + &modulus - &r2) % &modulus;
        let cs: Vec<_> = [&r1, &r2, &r3]
            .iter()
            .map(|r| kp.public.encrypt(r, &mut rng))
            .collect();
        let sum = cs[1..]
            .iter()
            .fold(cs[0].clone(), |acc, c| kp.public.add_ct(&acc, c).unwrap());
        assert!(kp.secret.decrypt(&sum).unwrap().is_zero());
    }
}

#[test]
fn scalar_product_law() {
    for kp in [&mock_pair(), paillier_pair()] {
        let mut rng = derive_rng(6, "t");
        let c7 = kp.public.encrypt(&big(7), &mut rng);
        for (k, want) in [(1u64, 7u64), (0, 0), (5, 35)] {
            let out = kp.public.scalar_mul(&big(k), &c7).unwrap();
            assert_eq!(kp.secret.decrypt(&out).unwrap(), big(want));
        }
    }
}

#[test]
fn ciphertext_product_mock_only() {
    let kp = mock_pair();
    let mut rng = derive_rng(7, "t");
    let c2 = kp.public.encrypt(&big(2), &mut rng);
    let c3 = kp.public.encrypt(&big(3), &mut rng);
    let prod = kp.public.mul_ct(&c2, &c3).unwrap();
    assert_eq!(kp.secret.decrypt(&prod).unwrap(), big(6));

    let c0 = kp.public.encrypt(&BigUint::zero(), &mut rng);
    let ann = kp.public.mul_ct(&c2, &c0).unwrap();
    assert!(kp.secret.decrypt(&ann).unwrap().is_zero());

    // chi = 3 nonzero factors over a prime modulus stay nonzero
    let factors: Vec<_> = [5u64, 11, 400]
        .iter()
        .map(|&v| kp.public.encrypt(&big(v), &mut rng))
        .collect();
    let prod = factors[1..]
        .iter()
        .fold(factors[0].clone(), |acc, c| kp.public.mul_ct(&acc, c).unwrap());
    assert!(!kp.secret.decrypt(&prod).unwrap().is_zero());

    let pkp = paillier_pair();
    let a = pkp.public.encrypt(&big(2), &mut rng);
    let b = pkp.public.encrypt(&big(3), &mut rng);
    assert!(matches!(
        pkp.public.mul_ct(&a, &b),
        Err(Error::UnsupportedOperation(_))
    ));
}

#[test]
fn random_ciphers_are_fresh_and_in_space() {
    for kp in [&mock_pair(), paillier_pair()] {
        let mut rng = derive_rng(8, "t");
        let a = kp.public.random_cipher(&mut rng);
        let b = kp.public.random_cipher(&mut rng);
        assert_ne!(
            kp.public.cipher_to_bytes(&a).unwrap(),
            kp.public.cipher_to_bytes(&b).unwrap()
        );
        let modulus = kp.public.plaintext_modulus();
        assert!(kp.secret.decrypt(&a).unwrap() < modulus);
    }
}

#[test]
fn random_cipher_never_hits_a_fixed_40_bit_target() {
    // Birthday estimate: 1e4 draws against one 40-bit target miss in practice.
    let kp = mock_pair();
    let mut rng = derive_rng(9, "t");
    let target = big(0xA5A5_5A5A_55u64); // fixed 40-bit value
    let mask = (BigUint::one() << 40) - BigUint::one();
    for _ in 0..10_000 {
        let c = kp.public.random_cipher(&mut rng);
        assert_ne!(kp.secret.decrypt(&c).unwrap() & &mask, target);
    }
}

#[test]
fn homomorphism_laws_hold_on_random_samples() {
    use num_bigint::RandBigInt;
    for (kp, samples) in [(&mock_pair(), 1000usize), (paillier_pair(), 1000)] {
        let modulus = kp.public.plaintext_modulus();
        let mut rng = derive_rng(10, "t");
        for _ in 0..samples {
            let m1 = rng.gen_biguint_below(&modulus);
            let m2 = rng.gen_biguint_below(&modulus);
            let c1 = kp.encrypt(&m1, &mut rng);
            let c2 = kp.encrypt(&m2, &mut rng);
            let sum = kp.public.add_ct(&c1, &c2).unwrap();
            assert_eq!(kp.secret.decrypt(&sum).unwrap(), (&m1 + &m2) % &modulus);
            let prod = kp.public.scalar_mul(&m1, &c2).unwrap();
            assert_eq!(kp.secret.decrypt(&prod).unwrap(), (&m1 * &m2) % &modulus);
            let negated = kp.public.neg(&c1).unwrap();
            assert_eq!(
                kp.secret.decrypt(&negated).unwrap(),
                (&modulus - &m1) % &modulus
            );
        }
    }
}

#[test]
fn mock_product_law_on_random_samples() {
    use num_bigint::RandBigInt;
    let kp = mock_pair();
    let modulus = kp.public.plaintext_modulus();
    let mut rng = derive_rng(13, "t");
    for _ in 0..1000 {
        let m1 = rng.gen_biguint_below(&modulus);
        let m2 = rng.gen_biguint_below(&modulus);
        let c1 = kp.encrypt(&m1, &mut rng);
        let c2 = kp.encrypt(&m2, &mut rng);
        let prod = kp.public.mul_ct(&c1, &c2).unwrap();
        assert_eq!(kp.secret.decrypt(&prod).unwrap(), (&m1 * &m2) % &modulus);
    }
}

#[test]
fn encryption_is_randomized() {
    for kp in [&mock_pair(), paillier_pair()] {
        let mut rng = derive_rng(14, "t");
        let mut seen = std::collections::HashSet::new();
        let trials = match kp.public.kind() {
            SchemeKind::MockFhe => 1000,
            SchemeKind::LheResiduosity => 100,
        };
        for _ in 0..trials {
            let c = kp.encrypt(&big(42), &mut rng);
            assert!(seen.insert(kp.public.cipher_to_bytes(&c).unwrap()));
        }
    }
}

#[test]
fn serialization_is_a_bijection_on_payloads() {
    for kp in [&mock_pair(), paillier_pair()] {
        let mut rng = derive_rng(15, "t");
        for _ in 0..64 {
            let c = kp.public.random_cipher(&mut rng);
            let bytes = kp.public.cipher_to_bytes(&c).unwrap();
            assert_eq!(bytes.len(), kp.public.cipher_len());
            let back = kp.public.cipher_from_bytes(&bytes).unwrap();
            assert_eq!(back, c);
            assert_eq!(kp.public.cipher_to_bytes(&back).unwrap(), bytes);
        }
    }
}

#[test]
fn crt_encrypt_matches_public_encrypt_semantics() {
    let kp = paillier_pair();
    let mut rng = derive_rng(16, "t");
    let m = big(0xdead_beef);
    let via_pk = kp.public.encrypt(&m, &mut rng);
    let via_sk = kp.encrypt(&m, &mut rng);
    assert_ne!(via_pk, via_sk);
    assert_eq!(kp.secret.decrypt(&via_pk).unwrap(), m);
    assert_eq!(kp.secret.decrypt(&via_sk).unwrap(), m);
}

#[test]
fn scheme_mismatch_is_rejected() {
    let mk = mock_pair();
    let pk = paillier_pair();
    let mut rng = derive_rng(17, "t");
    let cm = mk.public.encrypt(&big(1), &mut rng);
    let cp = pk.public.encrypt(&big(1), &mut rng);
    assert!(matches!(
        mk.public.add_ct(&cm, &cp),
        Err(Error::SchemeMismatch)
    ));
    assert!(matches!(pk.secret.decrypt(&cm), Err(Error::SchemeMismatch)));
}

#[test]
fn public_key_serialization_roundtrips() {
    for kp in [&mock_pair(), paillier_pair()] {
        let bytes = kp.public.to_bytes();
        let back = PublicKey::from_bytes(&bytes).unwrap();
        let mut rng = derive_rng(18, "t");
        let c = back.encrypt(&big(321), &mut rng);
        assert_eq!(kp.secret.decrypt(&c).unwrap(), big(321));
    }
}
