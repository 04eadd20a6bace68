//! The fuzzy private set union protocol family.
//!
//! All five variants share one shape: the receiver expands each center into
//! per-dimension key-value pairs whose values are additive shares summing to
//! zero across a matching group, one retrieval store per dimension answers
//! the sender's per-coordinate keys, and the sender combines the retrieved
//! ciphertexts into `t̂_i` (zero exactly when `y_i` lies in some ball) plus
//! `û_i = y_i ⋉ t̂_i`, from which the receiver recovers the outside points
//! as `u/t`. The variants differ in how keys are disambiguated:
//!
//! * `ng` — axis-disjoint balls (null induced graph); bare coordinates.
//! * `nf` — exact unique first coordinate; keys prefixed by the identifier.
//! * `lay` — any dataset; DSATUR layers prefix the keys, and membership is
//!   the product over layers of per-layer sums (needs the FHE contract; the
//!   layer count is revealed).
//! * `exc` — an axis `a` whose edges are pure: keys carry `(a, hit value)`
//!   prefixes, the `a` store is filled with well-formed randoms, and the
//!   sender probes every candidate axis, multiplying the candidate sums.
//! * `str` — dataset stripable into per-axis exclusive parts; per-strip
//!   `exc` stores merged by dimension.
//!
//! Key material is serialized with fixed-width big-endian fields behind a
//! one-byte domain tag, so concatenated fields can never collide.

pub mod blueprint;

pub use blueprint::{
    exc_build_kv, lay_build_kv, nf_build_kv, ng_build_kv, str_build_kv, DimStore, KeyBlueprint,
};

use crate::crypto::{
    CipherValue, PublicKey, SchemeDescriptor, SchemeKind, SecretKey,
};
use crate::error::{Error, Result};
use crate::geometry::{FuzzyDataset, Point};
use crate::pir::PirBackend;
use num_bigint::BigUint;
use num_traits::Zero;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Ng,
    Nf,
    Lay,
    Exc,
    Str,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Ng,
        Variant::Nf,
        Variant::Lay,
        Variant::Exc,
        Variant::Str,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Ng => "ng",
            Variant::Nf => "nf",
            Variant::Lay => "lay",
            Variant::Exc => "exc",
            Variant::Str => "str",
        }
    }

    /// Multiplicative combination needs ciphertext products.
    pub fn needs_fhe(self) -> bool {
        matches!(self, Variant::Lay | Variant::Exc | Variant::Str)
    }

    /// Per-dimension store capacity for an n-center dataset.
    pub fn store_capacity(self, n: usize, delta: u64) -> usize {
        let span = 2 * delta as usize + 1;
        match self {
            Variant::Ng | Variant::Nf | Variant::Lay => span * n,
            Variant::Exc | Variant::Str => span * span * n,
        }
    }

    /// Which axes carry a store (the non-fuzzy variant skips the exact ID
    /// axis).
    pub fn store_axes(self, d: usize) -> Vec<usize> {
        match self {
            Variant::Nf => (2..=d).collect(),
            _ => (1..=d).collect(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ng" => Ok(Variant::Ng),
            "nf" => Ok(Variant::Nf),
            "lay" => Ok(Variant::Lay),
            "exc" => Ok(Variant::Exc),
            "str" => Ok(Variant::Str),
            other => Err(Error::InvalidParameter(format!(
                "unknown variant {other:?} (expected ng|nf|lay|exc|str)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FpsuConfig {
    pub variant: Variant,
    pub scheme: SchemeDescriptor,
    pub kappa: u32,
    pub lambda: u32,
    pub dim: usize,
    pub delta: u64,
    pub width_bits: u32,
    /// The exclusive axis for `exc`; ignored elsewhere.
    pub exc_axis: usize,
    pub pir_backend: PirBackend,
}

impl FpsuConfig {
    pub fn new(variant: Variant, scheme: SchemeDescriptor) -> Self {
        FpsuConfig {
            variant,
            scheme,
            kappa: crate::crypto::KAPPA_TOY,
            lambda: 40,
            dim: 2,
            delta: 1,
            width_bits: 16,
            exc_axis: 1,
            pir_backend: PirBackend::ReferenceLhe,
        }
    }

    /// The statistical parameter handed down to the per-dimension
    /// retrievals: λ + ⌈log2 d⌉, so the d parallel executions keep the
    /// overall 2^-λ budget.
    pub fn effective_lambda(&self) -> u32 {
        let d = self.dim.max(1);
        let log_d = (usize::BITS - (d - 1).leading_zeros()) as u32;
        self.lambda + log_d
    }

    pub fn store_capacity(&self, n: usize) -> usize {
        self.variant.store_capacity(n, self.delta)
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.dim < 2 {
            return Err(Error::InvalidParameter(
                "protocols need at least two dimensions (zero-sum shares need two summands; \
                 one-dimensional fuzzy union is plain interval membership)"
                    .into(),
            ));
        }
        if self.variant.needs_fhe() && self.scheme.kind != SchemeKind::MockFhe {
            return Err(Error::UnsupportedOperation(
                "this variant multiplies ciphertexts and needs the FHE contract",
            ));
        }
        if self.variant == Variant::Exc && !(1..=self.dim).contains(&self.exc_axis) {
            return Err(Error::InvalidParameter(format!(
                "exclusive axis {} outside 1..={}",
                self.exc_axis, self.dim
            )));
        }
        // shares and scaled coordinates must fit: modulus > 2^w · 2^(λ+log d)
        if let Some(p) = self.scheme.plaintext_modulus {
            let need = self.width_bits + self.effective_lambda();
            if need >= 63 || p <= 1u64 << need {
                return Err(Error::InvalidParameter(format!(
                    "plaintext modulus {p} too small for width {} at lambda {}",
                    self.width_bits, self.lambda
                )));
            }
        }
        Ok(())
    }
}

// --- key serialization ----------------------------------------------------

const KEY_TAG_NG: u8 = 0x01;
const KEY_TAG_NF: u8 = 0x02;
const KEY_TAG_LAY: u8 = 0x03;
const KEY_TAG_EXC: u8 = 0x04;

pub(crate) fn ng_key(coord: u64) -> Vec<u8> {
    let mut k = Vec::with_capacity(9);
    k.push(KEY_TAG_NG);
    k.extend_from_slice(&coord.to_be_bytes());
    k
}

pub(crate) fn nf_key(id: u64, coord: u64) -> Vec<u8> {
    let mut k = Vec::with_capacity(17);
    k.push(KEY_TAG_NF);
    k.extend_from_slice(&id.to_be_bytes());
    k.extend_from_slice(&coord.to_be_bytes());
    k
}

pub(crate) fn lay_key(layer: u32, coord: u64) -> Vec<u8> {
    let mut k = Vec::with_capacity(13);
    k.push(KEY_TAG_LAY);
    k.extend_from_slice(&layer.to_be_bytes());
    k.extend_from_slice(&coord.to_be_bytes());
    k
}

pub(crate) fn exc_key(axis: usize, hit: u64, coord: u64) -> Vec<u8> {
    let mut k = Vec::with_capacity(18);
    k.push(KEY_TAG_EXC);
    k.push(axis as u8);
    k.extend_from_slice(&hit.to_be_bytes());
    k.extend_from_slice(&coord.to_be_bytes());
    k
}

// --- sender side ----------------------------------------------------------

/// Per-dimension key batches, aligned with the store axes. The in-batch
/// order is fixed so the combiner can address retrieved values positionally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub batches: Vec<QueryBatch>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryBatch {
    pub axis: usize,
    pub keys: Vec<Vec<u8>>,
}

/// Builds the sender's per-dimension keys. `chi` is required for `lay`
/// (learned from the layer-count message).
pub fn fpsu_query_keys(
    variant: Variant,
    d: usize,
    chi: Option<u32>,
    ys: &[Point],
) -> Result<QueryPlan> {
    for y in ys {
        if y.dim() != d {
            return Err(Error::DimensionMismatch(y.dim(), d));
        }
    }
    let batches = match variant {
        Variant::Ng => (1..=d)
            .map(|j| QueryBatch {
                axis: j,
                keys: ys.iter().map(|y| ng_key(y.coords[j - 1])).collect(),
            })
            .collect(),
        Variant::Nf => (2..=d)
            .map(|j| QueryBatch {
                axis: j,
                keys: ys
                    .iter()
                    .map(|y| nf_key(y.coords[0], y.coords[j - 1]))
                    .collect(),
            })
            .collect(),
        Variant::Lay => {
            let chi = chi.ok_or_else(|| {
                Error::InvalidParameter("layer count required before querying".into())
            })?;
            (1..=d)
                .map(|j| QueryBatch {
                    axis: j,
                    keys: ys
                        .iter()
                        .flat_map(|y| (1..=chi).map(move |l| lay_key(l, y.coords[j - 1])))
                        .collect(),
                })
                .collect()
        }
        Variant::Exc | Variant::Str => (1..=d)
            .map(|j| QueryBatch {
                axis: j,
                keys: ys
                    .iter()
                    .flat_map(|y| {
                        (1..=d)
                            .filter(move |&a| a != j)
                            .map(move |a| exc_key(a, y.coords[a - 1], y.coords[j - 1]))
                    })
                    .collect(),
            })
            .collect(),
    };
    Ok(QueryPlan { batches })
}

/// What the sender returns to the receiver: per point, the membership
/// ciphertext and its coordinate-scaled copies.
#[derive(Debug, Clone)]
pub struct FpsuResponse {
    pub t_hat: Vec<CipherValue>,
    pub u_hat: Vec<Vec<CipherValue>>,
}

/// Combines the per-dimension retrieved ciphertexts into `(t̂_i, û_i)`.
/// `retrieved` is aligned with the query plan's batches.
pub fn fpsu_combine(
    variant: Variant,
    pk: &PublicKey,
    retrieved: &[Vec<CipherValue>],
    ys: &[Point],
    chi: Option<u32>,
) -> Result<FpsuResponse> {
    let m = ys.len();
    let d = ys.first().map_or(0, |y| y.dim());
    let sum = |acc: Option<CipherValue>, c: &CipherValue| -> Result<Option<CipherValue>> {
        Ok(Some(match acc {
            None => c.clone(),
            Some(a) => pk.add_ct(&a, c)?,
        }))
    };

    let mut t_hat = Vec::with_capacity(m);
    for i in 0..m {
        let t = match variant {
            Variant::Ng | Variant::Nf => {
                let mut acc = None;
                for batch in retrieved {
                    acc = sum(acc, &batch[i])?;
                }
                acc.expect("at least one dimension")
            }
            Variant::Lay => {
                let chi = chi.ok_or_else(|| {
                    Error::InvalidParameter("layer count required to combine".into())
                })? as usize;
                let mut product: Option<CipherValue> = None;
                for l in 0..chi {
                    let mut acc = None;
                    for batch in retrieved {
                        acc = sum(acc, &batch[i * chi + l])?;
                    }
                    let factor = acc.expect("at least one dimension");
                    product = Some(match product {
                        None => factor,
                        Some(p) => pk.mul_ct(&p, &factor)?,
                    });
                }
                product.expect("chi >= 1")
            }
            Variant::Exc | Variant::Str => {
                // one factor per candidate axis: the sum of the retrievals
                // whose keys carried that candidate prefix
                let mut product: Option<CipherValue> = None;
                for cand in 1..=d {
                    let mut acc = None;
                    for j in (1..=d).filter(|&j| j != cand) {
                        // position of `cand` in batch j's per-point key list
                        let slot = if cand < j { cand - 1 } else { cand - 2 };
                        acc = sum(acc, &retrieved[j - 1][i * (d - 1) + slot])?;
                    }
                    let factor = acc.expect("d >= 2");
                    product = Some(match product {
                        None => factor,
                        Some(p) => pk.mul_ct(&p, &factor)?,
                    });
                }
                product.expect("d >= 2")
            }
        };
        t_hat.push(t);
    }

    let u_hat = ys
        .iter()
        .zip(&t_hat)
        .map(|(y, t)| {
            y.coords
                .iter()
                .map(|&c| pk.scalar_mul(&BigUint::from(c), t))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FpsuResponse { t_hat, u_hat })
}

#[derive(Debug, Clone)]
pub struct UnionOutcome {
    pub union: BTreeSet<Point>,
    /// |{i : t_i = 0}| — by the leakage contract this equals the number of
    /// sender points inside the union of balls.
    pub zero_count: usize,
}

/// Receiver finalization: decrypt, keep `u/t` for every nonzero `t`.
pub fn fpsu_union(
    x: &FuzzyDataset,
    resp: &FpsuResponse,
    sk: &SecretKey,
    pk: &PublicKey,
) -> Result<UnionOutcome> {
    let modulus = pk.plaintext_modulus();
    let coord_bound = BigUint::from(1u64) << x.width_bits();
    let mut union: BTreeSet<Point> = x.points().iter().cloned().collect();
    let mut zero_count = 0usize;
    for (t_hat, u_hat) in resp.t_hat.iter().zip(&resp.u_hat) {
        let t = sk.decrypt(t_hat)?;
        if t.is_zero() {
            zero_count += 1;
            continue;
        }
        let t_inv =
            crate::crypto::primes::mod_inverse(&t, &modulus).ok_or(Error::NonInvertible)?;
        let mut coords = Vec::with_capacity(u_hat.len());
        for u in u_hat {
            let y = (sk.decrypt(u)? * &t_inv) % &modulus;
            if y >= coord_bound {
                return Err(Error::CoordinateIntegrity);
            }
            coords.push(u64::try_from(y).expect("bounded by 2^w"));
        }
        union.insert(Point::new(coords));
    }
    Ok(UnionOutcome { union, zero_count })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_parsing_and_capacity() {
        assert_eq!("ng".parse::<Variant>().unwrap(), Variant::Ng);
        assert!("bogus".parse::<Variant>().is_err());
        assert_eq!(Variant::Ng.store_capacity(4, 2), 20);
        assert_eq!(Variant::Exc.store_capacity(4, 2), 100);
        assert_eq!(Variant::Nf.store_axes(3), vec![2, 3]);
        assert_eq!(Variant::Str.store_axes(3), vec![1, 2, 3]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = FpsuConfig::new(Variant::Lay, SchemeDescriptor::lhe_residuosity(2048));
        cfg.dim = 3;
        assert!(matches!(
            cfg.validate(),
            Err(Error::UnsupportedOperation(_))
        ));

        let mut cfg = FpsuConfig::new(Variant::Ng, SchemeDescriptor::mock_fhe());
        cfg.dim = 1;
        assert!(cfg.validate().is_err());

        let mut cfg = FpsuConfig::new(Variant::Ng, SchemeDescriptor::mock_fhe());
        cfg.dim = 4;
        cfg.lambda = 44;
        cfg.width_bits = 16;
        assert!(cfg.validate().is_err()); // 16 + 44 + 2 = 62 bits > 2^61-1

        cfg.lambda = 40;
        assert!(cfg.validate().is_ok());
        assert_eq!(cfg.effective_lambda(), 42);
    }

    #[test]
    fn key_fields_cannot_alias() {
        // fixed widths: (1||23) and (12||3) serialize differently
        assert_ne!(nf_key(1, 23), nf_key(12, 3));
        assert_ne!(exc_key(1, 2, 3), exc_key(1, 3, 2));
        assert_eq!(ng_key(7).len(), 9);
        assert_eq!(nf_key(1, 2).len(), 17);
        assert_eq!(lay_key(1, 2).len(), 13);
        assert_eq!(exc_key(1, 2, 3).len(), 18);
    }

    #[test]
    fn query_plan_shapes() {
        let ys = vec![Point::new(vec![5, 6, 7])];
        let ng = fpsu_query_keys(Variant::Ng, 3, None, &ys).unwrap();
        assert_eq!(ng.batches.len(), 3);
        assert!(ng.batches.iter().all(|b| b.keys.len() == 1));

        let lay = fpsu_query_keys(Variant::Lay, 3, Some(2), &ys).unwrap();
        assert!(lay.batches.iter().all(|b| b.keys.len() == 2));
        let total: usize = lay.batches.iter().map(|b| b.keys.len()).sum();
        assert_eq!(total, 6); // chi * d * m

        let exc = fpsu_query_keys(Variant::Exc, 3, None, &ys).unwrap();
        let total: usize = exc.batches.iter().map(|b| b.keys.len()).sum();
        assert_eq!(total, 6); // d * (d-1) * m

        let nf = fpsu_query_keys(Variant::Nf, 3, None, &ys).unwrap();
        assert_eq!(nf.batches.len(), 2);

        assert!(fpsu_query_keys(Variant::Lay, 3, None, &ys).is_err());
    }
}
