//! Receiver-side key-value construction for each variant. A blueprint is
//! the plaintext picture of the per-dimension stores: the keys, the share
//! values, and the zero-sum groups they belong to. Encryption happens later,
//! inside the per-dimension retrieval response.

use super::{exc_key, lay_key, nf_key, ng_key, Variant};
use crate::error::{Error, Result};
use crate::geometry::FuzzyDataset;
use crate::graph::{self, Partition};
use num_bigint::{BigUint, RandBigInt};
use num_traits::Zero;
use rand::Rng;
use std::collections::{BTreeSet, HashSet};

#[derive(Debug, Clone)]
pub struct DimStore {
    /// 1-based axis this store answers.
    pub axis: usize,
    pub pairs: Vec<(Vec<u8>, BigUint)>,
}

#[derive(Debug, Clone)]
pub struct KeyBlueprint {
    pub variant: Variant,
    pub stores: Vec<DimStore>,
    /// Every share group; each must sum to zero mod the plaintext modulus.
    pub groups: Vec<Vec<BigUint>>,
}

impl KeyBlueprint {
    /// Well-formedness: keys pairwise distinct within every store.
    pub fn check_well_formed(&self) -> Result<()> {
        for store in &self.stores {
            let mut seen = HashSet::with_capacity(store.pairs.len());
            for (k, _) in &store.pairs {
                if !seen.insert(k.as_slice()) {
                    return Err(Error::DuplicateKeys);
                }
            }
        }
        Ok(())
    }

    pub fn zero_sum_holds(&self, modulus: &BigUint) -> bool {
        self.groups.iter().all(|g| {
            let mut acc = BigUint::zero();
            for share in g {
                acc = (acc + share) % modulus;
            }
            acc.is_zero()
        })
    }

    pub fn store_sizes(&self) -> Vec<usize> {
        self.stores.iter().map(|s| s.pairs.len()).collect()
    }
}

/// Draws a zero-sum share vector of the given length: all but the last are
/// uniform, the last is the negated sum.
fn zero_sum_shares<R: Rng>(len: usize, modulus: &BigUint, rng: &mut R) -> Vec<BigUint> {
    let mut shares = Vec::with_capacity(len);
    let mut acc = BigUint::zero();
    for _ in 0..len.saturating_sub(1) {
        let r = rng.gen_biguint_below(modulus);
        acc = (acc + &r) % modulus;
        shares.push(r);
    }
    if len > 0 {
        shares.push((modulus - acc) % modulus);
    }
    shares
}

fn shifted_coords(center: u64, delta: u64) -> impl Iterator<Item = u64> {
    (center - delta)..=(center + delta)
}

/// Null-graph construction: per dimension, the shifted coordinates keyed
/// directly; per center, shares summing to zero across its d entries.
pub fn ng_build_kv<R: Rng>(
    x: &FuzzyDataset,
    modulus: &BigUint,
    rng: &mut R,
) -> Result<KeyBlueprint> {
    let d = x.dim();
    require_multi_dim(d)?;
    let g = graph::build_induced_graph(x);
    if let Some((&(i, j), &mask)) = g.edges().iter().next() {
        let axis = mask.trailing_zeros() as usize + 1;
        return Err(Error::NotNullGraph { i, j, axis });
    }

    let mut stores: Vec<DimStore> = (1..=d)
        .map(|axis| DimStore {
            axis,
            pairs: Vec::with_capacity(x.len() * (2 * x.delta() as usize + 1)),
        })
        .collect();
    let mut groups = Vec::with_capacity(x.len());
    for center in x.points() {
        let shares = zero_sum_shares(d, modulus, rng);
        for (j, share) in shares.iter().enumerate() {
            for coord in shifted_coords(center.coords[j], x.delta()) {
                stores[j].pairs.push((ng_key(coord), share.clone()));
            }
        }
        groups.push(shares);
    }
    let bp = KeyBlueprint {
        variant: Variant::Ng,
        stores,
        groups,
    };
    bp.check_well_formed()?;
    Ok(bp)
}

/// First coordinate is an exact unique identifier: keys are ID-prefixed, so
/// only the remaining d-1 axes carry stores and shares.
pub fn nf_build_kv<R: Rng>(
    x: &FuzzyDataset,
    modulus: &BigUint,
    rng: &mut R,
) -> Result<KeyBlueprint> {
    let d = x.dim();
    require_multi_dim(d)?;
    let mut ids = HashSet::with_capacity(x.len());
    for p in x.points() {
        if !ids.insert(p.coords[0]) {
            return Err(Error::DuplicateId);
        }
    }

    let mut stores: Vec<DimStore> = (2..=d)
        .map(|axis| DimStore {
            axis,
            pairs: Vec::new(),
        })
        .collect();
    let mut groups = Vec::with_capacity(x.len());
    for center in x.points() {
        let id = center.coords[0];
        let shares = zero_sum_shares(d - 1, modulus, rng);
        for (idx, share) in shares.iter().enumerate() {
            let axis = idx + 2;
            for coord in shifted_coords(center.coords[axis - 1], x.delta()) {
                stores[idx].pairs.push((nf_key(id, coord), share.clone()));
            }
        }
        groups.push(shares);
    }
    let bp = KeyBlueprint {
        variant: Variant::Nf,
        stores,
        groups,
    };
    bp.check_well_formed()?;
    Ok(bp)
}

/// Layered construction: DSATUR partitions the centers into independent
/// layers, the layer index prefixes every key, and shares are zero-sum per
/// (center, layer). Returns the layer count, which the protocol must reveal
/// to the sender.
pub fn lay_build_kv<R: Rng>(
    x: &FuzzyDataset,
    modulus: &BigUint,
    rng: &mut R,
) -> Result<(u32, KeyBlueprint)> {
    let d = x.dim();
    require_multi_dim(d)?;
    let partition = graph::dsatur(x, None);
    let chi = partition.part_count() as u32;

    let mut stores: Vec<DimStore> = (1..=d)
        .map(|axis| DimStore {
            axis,
            pairs: Vec::new(),
        })
        .collect();
    let mut groups = Vec::new();
    for (part_idx, part) in partition.parts.iter().enumerate() {
        let layer = part_idx as u32 + 1;
        for &i in part {
            let center = &x.points()[i];
            let shares = zero_sum_shares(d, modulus, rng);
            for (j, share) in shares.iter().enumerate() {
                for coord in shifted_coords(center.coords[j], x.delta()) {
                    stores[j].pairs.push((lay_key(layer, coord), share.clone()));
                }
            }
            groups.push(shares);
        }
    }
    let bp = KeyBlueprint {
        variant: Variant::Lay,
        stores,
        groups,
    };
    bp.check_well_formed()?;
    Ok((chi, bp))
}

struct ExcAccumulator {
    stores: Vec<Vec<(Vec<u8>, BigUint)>>,
    groups: Vec<Vec<BigUint>>,
    taken: HashSet<Vec<u8>>,
    dummy_quota: Vec<usize>,
}

impl ExcAccumulator {
    fn new(d: usize) -> Self {
        ExcAccumulator {
            stores: vec![Vec::new(); d],
            groups: Vec::new(),
            taken: HashSet::new(),
            dummy_quota: vec![0; d],
        }
    }

    /// Real entries for one a-exclusive subset; the axis-a store's quota of
    /// well-formed random fill grows by (2δ+1)²·|subset|.
    fn add_part<R: Rng>(
        &mut self,
        x: &FuzzyDataset,
        a: usize,
        modulus: &BigUint,
        rng: &mut R,
    ) -> Result<()> {
        let d = x.dim();
        let g = graph::build_induced_graph(x);
        if !graph::is_a_exclusive(&g, a) {
            return Err(Error::NotExclusive { axis: a });
        }
        let span = 2 * x.delta() as usize + 1;
        self.dummy_quota[a - 1] += span * span * x.len();

        // every value hit by some a-interval, and the centers hitting it
        let mut hits: BTreeSet<u64> = BTreeSet::new();
        for center in x.points() {
            hits.extend(shifted_coords(center.coords[a - 1], x.delta()));
        }
        let fuzzy_axes: Vec<usize> = (1..=d).filter(|&j| j != a).collect();
        for &v in &hits {
            for center in x.points() {
                let proj = center.coords[a - 1];
                if v < proj - x.delta() || v > proj + x.delta() {
                    continue;
                }
                let shares = zero_sum_shares(fuzzy_axes.len(), modulus, rng);
                for (&axis, share) in fuzzy_axes.iter().zip(&shares) {
                    for coord in shifted_coords(center.coords[axis - 1], x.delta()) {
                        let key = exc_key(a, v, coord);
                        self.taken.insert(key.clone());
                        self.stores[axis - 1].push((key, share.clone()));
                    }
                }
                self.groups.push(shares);
            }
        }
        Ok(())
    }

    /// Fill each axis' dummy quota with well-formed randoms that collide
    /// with nothing real.
    fn fill_dummies<R: Rng>(&mut self, modulus: &BigUint, rng: &mut R) {
        for axis in 1..=self.stores.len() {
            for _ in 0..self.dummy_quota[axis - 1] {
                let key = loop {
                    let key = exc_key(axis, rng.gen(), rng.gen());
                    if self.taken.insert(key.clone()) {
                        break key;
                    }
                };
                self.stores[axis - 1].push((key, rng.gen_biguint_below(modulus)));
            }
        }
    }

    fn finish(self, variant: Variant) -> Result<KeyBlueprint> {
        let bp = KeyBlueprint {
            variant,
            stores: self
                .stores
                .into_iter()
                .enumerate()
                .map(|(idx, pairs)| DimStore {
                    axis: idx + 1,
                    pairs,
                })
                .collect(),
            groups: self.groups,
        };
        bp.check_well_formed()?;
        Ok(bp)
    }
}

/// a-exclusive construction: keys carry the (axis, hit value) prefix; the
/// axis-a store itself holds (2δ+1)²·n well-formed randoms so candidate
/// axes are indistinguishable by store shape.
pub fn exc_build_kv<R: Rng>(
    x: &FuzzyDataset,
    a: usize,
    modulus: &BigUint,
    rng: &mut R,
) -> Result<KeyBlueprint> {
    let d = x.dim();
    require_multi_dim(d)?;
    if !(1..=d).contains(&a) {
        return Err(Error::InvalidParameter(format!(
            "exclusive axis {a} outside 1..={d}"
        )));
    }
    let mut acc = ExcAccumulator::new(d);
    acc.add_part(x, a, modulus, rng)?;
    acc.fill_dummies(modulus, rng);
    acc.finish(Variant::Exc)
}

/// Stripable construction: per-strip exclusive stores merged by dimension.
/// The strip prefixes keep parts from colliding; per-dimension totals land
/// on exactly (2δ+1)²·n entries including the dummy fill.
pub fn str_build_kv<R: Rng>(
    x: &FuzzyDataset,
    partition: &Partition,
    modulus: &BigUint,
    rng: &mut R,
) -> Result<KeyBlueprint> {
    let d = x.dim();
    require_multi_dim(d)?;
    let g = graph::build_induced_graph(x);
    graph::verify_exclusive_partition(&g, partition)?;
    let tags = partition.axis_tags.as_ref().ok_or(Error::InvalidPartition)?;

    let mut acc = ExcAccumulator::new(d);
    for (part, &a) in partition.parts.iter().zip(tags) {
        if part.is_empty() {
            continue;
        }
        let points = part.iter().map(|&i| x.points()[i].clone()).collect();
        let sub = FuzzyDataset::new(points, x.delta(), d, x.width_bits())?;
        acc.add_part(&sub, a, modulus, rng)?;
    }
    acc.fill_dummies(modulus, rng);
    acc.finish(Variant::Str)
}

fn require_multi_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::InvalidParameter(
            "construction needs at least two dimensions".into(),
        ))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::seed::derive_rng;

    fn modulus() -> BigUint {
        BigUint::from(crate::crypto::MOCK_DEFAULT_MODULUS)
    }

    fn dataset(points: &[&[u64]], delta: u64) -> FuzzyDataset {
        let d = points[0].len();
        FuzzyDataset::new(
            points.iter().map(|p| Point::new(p.to_vec())).collect(),
            delta,
            d,
            16,
        )
        .unwrap()
    }

    #[test]
    fn ng_single_center_layout() {
        let x = dataset(&[&[5, 9]], 1);
        let mut rng = derive_rng(1, "bp");
        let bp = ng_build_kv(&x, &modulus(), &mut rng).unwrap();
        let keys1: Vec<_> = bp.stores[0].pairs.iter().map(|(k, _)| k.clone()).collect();
        assert_eq!(keys1, vec![ng_key(4), ng_key(5), ng_key(6)]);
        let keys2: Vec<_> = bp.stores[1].pairs.iter().map(|(k, _)| k.clone()).collect();
        assert_eq!(keys2, vec![ng_key(8), ng_key(9), ng_key(10)]);
        // values are (r, -r)
        let r = &bp.stores[0].pairs[0].1;
        let neg = &bp.stores[1].pairs[0].1;
        assert!(((r + neg) % modulus()).is_zero());
        assert!(bp.zero_sum_holds(&modulus()));
    }

    #[test]
    fn ng_rejects_touching_balls_with_edge_report() {
        let x = dataset(&[&[10, 10], &[12, 100]], 2);
        let mut rng = derive_rng(2, "bp");
        match ng_build_kv(&x, &modulus(), &mut rng) {
            Err(Error::NotNullGraph { i: 0, j: 1, axis: 1 }) => {}
            other => panic!("expected null-graph violation, got {other:?}"),
        }
    }

    #[test]
    fn ng_store_sizes_follow_span_times_n() {
        let x = dataset(&[&[10, 10], &[100, 100], &[200, 200]], 2);
        let mut rng = derive_rng(3, "bp");
        let bp = ng_build_kv(&x, &modulus(), &mut rng).unwrap();
        assert_eq!(bp.store_sizes(), vec![15, 15]);
    }

    #[test]
    fn nf_prefix_separates_equal_fuzzy_coordinates() {
        // same fuzzy coordinates, different IDs
        let x = dataset(&[&[1000, 50, 50], &[2000, 50, 50]], 2);
        let mut rng = derive_rng(4, "bp");
        let bp = nf_build_kv(&x, &modulus(), &mut rng).unwrap();
        assert_eq!(bp.stores.len(), 2);
        assert_eq!(bp.stores[0].axis, 2);
        assert_eq!(bp.store_sizes(), vec![10, 10]);
        assert!(bp.zero_sum_holds(&modulus()));
    }

    #[test]
    fn nf_duplicate_id_rejected() {
        let x = dataset(&[&[1000, 50], &[1000, 200]], 2);
        let mut rng = derive_rng(5, "bp");
        assert!(matches!(
            nf_build_kv(&x, &modulus(), &mut rng),
            Err(Error::DuplicateId)
        ));
    }

    #[test]
    fn nf_two_dims_uses_zero_share() {
        let x = dataset(&[&[1000, 50]], 2);
        let mut rng = derive_rng(6, "bp");
        let bp = nf_build_kv(&x, &modulus(), &mut rng).unwrap();
        assert!(bp.stores[0].pairs.iter().all(|(_, v)| v.is_zero()));
    }

    #[test]
    fn lay_layer_counts() {
        let null = dataset(&[&[10, 10], &[100, 100]], 2);
        let mut rng = derive_rng(7, "bp");
        let (chi, bp) = lay_build_kv(&null, &modulus(), &mut rng).unwrap();
        assert_eq!(chi, 1);
        assert_eq!(bp.store_sizes(), vec![10, 10]);

        let triangle = dataset(&[&[10, 10], &[11, 11], &[12, 12]], 2);
        let (chi, bp) = lay_build_kv(&triangle, &modulus(), &mut rng).unwrap();
        assert_eq!(chi, 3);
        assert_eq!(bp.store_sizes(), vec![15, 15]);
        assert!(bp.zero_sum_holds(&modulus()));
    }

    #[test]
    fn exc_single_ball_counts() {
        let x = dataset(&[&[50, 50]], 2);
        let mut rng = derive_rng(8, "bp");
        let bp = exc_build_kv(&x, 1, &modulus(), &mut rng).unwrap();
        // each store (real axis 2 and dummy axis 1) carries (2δ+1)² entries
        assert_eq!(bp.store_sizes(), vec![25, 25]);
        assert!(bp.zero_sum_holds(&modulus()));
    }

    #[test]
    fn exc_overlap_only_on_a_keeps_keys_distinct() {
        // axis-1 intervals share values; axis 2 far apart
        let x = dataset(&[&[50, 50], &[51, 200]], 2);
        let mut rng = derive_rng(9, "bp");
        let bp = exc_build_kv(&x, 1, &modulus(), &mut rng).unwrap();
        bp.check_well_formed().unwrap();
        assert_eq!(bp.store_sizes(), vec![50, 50]);
    }

    #[test]
    fn exc_requires_exclusivity() {
        let x = dataset(&[&[50, 50], &[51, 51]], 2);
        let mut rng = derive_rng(10, "bp");
        assert!(matches!(
            exc_build_kv(&x, 1, &modulus(), &mut rng),
            Err(Error::NotExclusive { axis: 1 })
        ));
    }

    #[test]
    fn str_single_part_matches_exc_shape() {
        let x = dataset(&[&[50, 50], &[51, 200]], 2);
        let mut rng = derive_rng(11, "bp");
        let partition = Partition {
            parts: vec![vec![0, 1], vec![]],
            axis_tags: Some(vec![1, 2]),
        };
        let bp = str_build_kv(&x, &partition, &modulus(), &mut rng).unwrap();
        assert_eq!(bp.store_sizes(), vec![50, 50]);
    }

    #[test]
    fn str_padded_to_capacity() {
        // two singleton strips: per-dimension totals must still be (2δ+1)²·n
        let x = dataset(&[&[50, 50], &[200, 200]], 2);
        let mut rng = derive_rng(12, "bp");
        let partition = Partition {
            parts: vec![vec![0], vec![1]],
            axis_tags: Some(vec![1, 2]),
        };
        let bp = str_build_kv(&x, &partition, &modulus(), &mut rng).unwrap();
        assert_eq!(bp.store_sizes(), vec![50, 50]);
        assert!(bp.zero_sum_holds(&modulus()));
    }

    #[test]
    fn str_rejects_bad_partition() {
        let x = dataset(&[&[50, 50], &[51, 51]], 2);
        let mut rng = derive_rng(13, "bp");
        let partition = Partition {
            parts: vec![vec![0, 1], vec![]],
            axis_tags: Some(vec![1, 2]),
        };
        assert!(str_build_kv(&x, &partition, &modulus(), &mut rng).is_err());
    }
}
