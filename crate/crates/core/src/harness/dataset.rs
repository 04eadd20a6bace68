//! Seeded dataset generators, one per structure class. Every generated
//! instance is verified against the graph predicates of its class, and the
//! sender set carries an exact, oracle-checked number of in-ball points.

use crate::error::{Error, Result};
use crate::fpsu::Variant;
use crate::geometry::{FuzzyDataset, Point};
use crate::graph;
use crate::seed::derive_rng;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureClass {
    NullGraph,
    NonFuzzyId,
    AExclusive { axis: usize },
    DStripable,
    Random,
}

impl StructureClass {
    pub fn for_variant(variant: Variant, exc_axis: usize) -> Self {
        match variant {
            Variant::Ng => StructureClass::NullGraph,
            Variant::Nf => StructureClass::NonFuzzyId,
            Variant::Lay => StructureClass::Random,
            Variant::Exc => StructureClass::AExclusive { axis: exc_axis },
            Variant::Str => StructureClass::DStripable,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StructureClass::NullGraph => "null-graph",
            StructureClass::NonFuzzyId => "non-fuzzy-id",
            StructureClass::AExclusive { .. } => "a-exclusive",
            StructureClass::DStripable => "d-stripable",
            StructureClass::Random => "random",
        }
    }

    /// Membership uses the exact-first-axis rule for the identifier class.
    pub fn is_member(self, x: &FuzzyDataset, y: &Point) -> bool {
        match self {
            StructureClass::NonFuzzyId => {
                x.is_member_with_thresholds(y, &x.exact_first_axis_thresholds())
            }
            _ => x.is_member(y),
        }
    }
}

impl fmt::Display for StructureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "null-graph" => Ok(StructureClass::NullGraph),
            "non-fuzzy-id" => Ok(StructureClass::NonFuzzyId),
            "a-exclusive" => Ok(StructureClass::AExclusive { axis: 1 }),
            "d-stripable" => Ok(StructureClass::DStripable),
            "random" => Ok(StructureClass::Random),
            other => Err(Error::InvalidParameter(format!(
                "unknown structure class {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub class: StructureClass,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub delta: u64,
    pub width_bits: u32,
    /// Exactly this many sender points fall inside the union of balls.
    pub inside_count: usize,
    pub seed: u64,
}

struct Domain {
    lo: u64,
    hi: u64,
}

impl Domain {
    fn of(delta: u64, width_bits: u32) -> Result<Self> {
        let max = (1u64 << width_bits) - 1;
        if 2 * delta >= max {
            return Err(Error::InfeasibleSpacing(format!(
                "radius {delta} fills the whole [0, 2^{width_bits}) domain"
            )));
        }
        Ok(Domain {
            lo: delta,
            hi: max - delta,
        })
    }
}

/// `count` values pairwise more than `2δ` apart, drawn from a grid of step
/// `2δ+2` and shuffled.
fn spaced_values(
    count: usize,
    delta: u64,
    dom: &Domain,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<u64>> {
    let step = 2 * delta + 2;
    let slots = ((dom.hi - dom.lo) / step + 1) as usize;
    if count > slots {
        return Err(Error::InfeasibleSpacing(format!(
            "need {count} separated values, domain offers {slots}"
        )));
    }
    let mut picked = BTreeSet::new();
    while picked.len() < count {
        picked.insert(rng.gen_range(0..slots as u64));
    }
    let mut vals: Vec<u64> = picked.into_iter().map(|i| dom.lo + i * step).collect();
    vals.shuffle(rng);
    Ok(vals)
}

fn distinct_values(count: usize, dom: &Domain, rng: &mut ChaCha20Rng) -> Result<Vec<u64>> {
    let room = (dom.hi - dom.lo + 1) as usize;
    if count > room {
        return Err(Error::InfeasibleSpacing(format!(
            "need {count} distinct values in a domain of {room}"
        )));
    }
    let mut picked = BTreeSet::new();
    while picked.len() < count {
        picked.insert(rng.gen_range(dom.lo..=dom.hi));
    }
    let mut vals: Vec<u64> = picked.into_iter().collect();
    vals.shuffle(rng);
    Ok(vals)
}

/// Values with deliberate pairwise overlaps: consecutive pairs are at most
/// `2δ` apart on this axis.
fn overlapping_values(
    count: usize,
    delta: u64,
    dom: &Domain,
    rng: &mut ChaCha20Rng,
) -> Vec<u64> {
    let mut vals = Vec::with_capacity(count);
    let mut i = 0;
    while i < count {
        let anchor = rng.gen_range(dom.lo..=dom.hi.saturating_sub(2 * delta).max(dom.lo));
        vals.push(anchor);
        if i + 1 < count {
            vals.push(anchor + rng.gen_range(0..=(2 * delta).min(dom.hi - anchor)));
        }
        i += 2;
    }
    vals
}

fn build_centers(spec: &DatasetSpec, rng: &mut ChaCha20Rng) -> Result<Vec<Point>> {
    let dom = Domain::of(spec.delta, spec.width_bits)?;
    let n = spec.n;
    let d = spec.d;
    let mut coords: Vec<Vec<u64>> = vec![vec![0; d]; n];

    match spec.class {
        StructureClass::NullGraph => {
            for j in 0..d {
                let vals = spaced_values(n, spec.delta, &dom, rng)?;
                for i in 0..n {
                    coords[i][j] = vals[i];
                }
            }
        }
        StructureClass::NonFuzzyId => {
            let ids = distinct_values(n, &dom, rng)?;
            for i in 0..n {
                coords[i][0] = ids[i];
                for j in 1..d {
                    coords[i][j] = rng.gen_range(dom.lo..=dom.hi);
                }
            }
        }
        StructureClass::AExclusive { axis } => {
            if !(1..=d).contains(&axis) {
                return Err(Error::InvalidParameter(format!(
                    "exclusive axis {axis} outside 1..={d}"
                )));
            }
            for j in 0..d {
                if j + 1 == axis {
                    let vals = overlapping_values(n, spec.delta, &dom, rng);
                    for i in 0..n {
                        coords[i][j] = vals[i];
                    }
                } else {
                    let vals = spaced_values(n, spec.delta, &dom, rng)?;
                    for i in 0..n {
                        coords[i][j] = vals[i];
                    }
                }
            }
        }
        StructureClass::DStripable => {
            // one band of the domain per strip, separated by more than 2δ on
            // every axis, so all edges stay inside strips
            let bands = d as u64;
            let band_width = (dom.hi - dom.lo + 1) / bands;
            let gap = 2 * spec.delta + 2;
            if band_width <= gap {
                return Err(Error::InfeasibleSpacing(
                    "domain too narrow for per-strip bands".into(),
                ));
            }
            let strip_of: Vec<usize> = (0..n).map(|i| i % d).collect();
            for a in 0..d {
                let members: Vec<usize> =
                    (0..n).filter(|&i| strip_of[i] == a).collect();
                if members.is_empty() {
                    continue;
                }
                let band = Domain {
                    lo: dom.lo + a as u64 * band_width,
                    hi: dom.lo + (a as u64 + 1) * band_width - gap,
                };
                for j in 0..d {
                    if j == a {
                        let vals = overlapping_values(members.len(), spec.delta, &band, rng);
                        for (idx, &i) in members.iter().enumerate() {
                            coords[i][j] = vals[idx];
                        }
                    } else {
                        let vals = spaced_values(members.len(), spec.delta, &band, rng)?;
                        for (idx, &i) in members.iter().enumerate() {
                            coords[i][j] = vals[idx];
                        }
                    }
                }
            }
        }
        StructureClass::Random => {
            let mut seen = BTreeSet::new();
            for point in coords.iter_mut() {
                loop {
                    for slot in point.iter_mut() {
                        *slot = rng.gen_range(dom.lo..=dom.hi);
                    }
                    if seen.insert(point.clone()) {
                        break;
                    }
                }
            }
        }
    }

    Ok(coords.into_iter().map(Point::new).collect())
}

fn verify_class(spec: &DatasetSpec, x: &FuzzyDataset) -> bool {
    match spec.class {
        StructureClass::NullGraph => graph::build_induced_graph(x).is_null(),
        StructureClass::NonFuzzyId => {
            let mut ids = BTreeSet::new();
            x.points().iter().all(|p| ids.insert(p.coords[0]))
        }
        StructureClass::AExclusive { axis } => {
            graph::is_a_exclusive(&graph::build_induced_graph(x), axis)
        }
        StructureClass::DStripable => graph::strips(x).is_ok(),
        StructureClass::Random => true,
    }
}

fn build_queries(
    spec: &DatasetSpec,
    x: &FuzzyDataset,
    rng: &mut ChaCha20Rng,
) -> Result<Vec<Point>> {
    if spec.inside_count > spec.m {
        return Err(Error::InvalidParameter(format!(
            "inside_count {} exceeds m {}",
            spec.inside_count, spec.m
        )));
    }
    if spec.inside_count > 0 && x.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot place members around an empty center set".into(),
        ));
    }
    let max = (1u64 << spec.width_bits) - 1;
    let mut used: BTreeSet<Point> = BTreeSet::new();
    let mut ys = Vec::with_capacity(spec.m);

    for k in 0..spec.inside_count {
        for _ in 0..10_000 {
            let center = &x.points()[(k + rng.gen_range(0..x.len())) % x.len()];
            let mut coords = Vec::with_capacity(spec.d);
            for (j, &c) in center.coords.iter().enumerate() {
                let exact_axis = matches!(spec.class, StructureClass::NonFuzzyId) && j == 0;
                if exact_axis {
                    coords.push(c);
                } else {
                    coords.push(rng.gen_range(c - x.delta()..=c + x.delta()));
                }
            }
            let y = Point::new(coords);
            debug_assert!(spec.class.is_member(x, &y));
            if used.insert(y.clone()) {
                ys.push(y);
                break;
            }
        }
    }
    if ys.len() != spec.inside_count {
        return Err(Error::InfeasibleSpacing(
            "could not place the requested number of in-ball points".into(),
        ));
    }

    while ys.len() < spec.m {
        let mut placed = false;
        for _ in 0..10_000 {
            let y = Point::new((0..spec.d).map(|_| rng.gen_range(0..=max)).collect());
            if !spec.class.is_member(x, &y) && used.insert(y.clone()) {
                ys.push(y);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::InfeasibleSpacing(
                "could not place an out-of-ball point".into(),
            ));
        }
    }

    ys.shuffle(rng);
    Ok(ys)
}

/// Generates `(X, Y)` for the spec, retrying with salted sub-seeds until the
/// class verification passes. Deterministic in `spec.seed`.
pub fn gen_dataset(spec: &DatasetSpec) -> Result<(FuzzyDataset, Vec<Point>)> {
    if spec.n == 0 {
        return Err(Error::InvalidParameter("empty receiver set".into()));
    }
    let mut last_err = None;
    for attempt in 0..16u32 {
        let mut rng = derive_rng(spec.seed, &format!("dataset/{attempt}"));
        let centers = match build_centers(spec, &mut rng) {
            Ok(c) => c,
            Err(e @ Error::InfeasibleSpacing(_)) => return Err(e),
            Err(e) => return Err(e),
        };
        let x = match FuzzyDataset::new(centers, spec.delta, spec.d, spec.width_bits) {
            Ok(x) => x,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        if !verify_class(spec, &x) {
            last_err = Some(Error::InvalidParameter(format!(
                "generated set failed {} verification",
                spec.class
            )));
            continue;
        }
        let ys = build_queries(spec, &x, &mut rng)?;
        let thresholds = match spec.class {
            StructureClass::NonFuzzyId => x.exact_first_axis_thresholds(),
            _ => x.uniform_thresholds(),
        };
        let members = x.fuzzy_membership_count_with_thresholds(&ys, &thresholds)?;
        if members != spec.inside_count {
            last_err = Some(Error::InvalidParameter(
                "membership count drifted during generation".into(),
            ));
            continue;
        }
        return Ok((x, ys));
    }
    Err(last_err.unwrap_or_else(|| Error::InfeasibleSpacing("generation exhausted".into())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(class: StructureClass, n: usize, m: usize, d: usize, inside: usize) -> DatasetSpec {
        DatasetSpec {
            class,
            n,
            m,
            d,
            delta: 2,
            width_bits: 8,
            inside_count: inside,
            seed: 99,
        }
    }

    #[test]
    fn null_graph_class_verified() {
        let (x, ys) = gen_dataset(&spec(StructureClass::NullGraph, 4, 5, 2, 2)).unwrap();
        assert!(graph::build_induced_graph(&x).is_null());
        assert_eq!(x.fuzzy_membership_count(&ys).unwrap(), 2);
    }

    #[test]
    fn exclusive_class_has_edges_but_stays_exclusive() {
        let (x, _) = gen_dataset(&spec(
            StructureClass::AExclusive { axis: 1 },
            6,
            2,
            2,
            0,
        ))
        .unwrap();
        let g = graph::build_induced_graph(&x);
        assert!(graph::is_a_exclusive(&g, 1));
        assert!(!g.is_null());
    }

    #[test]
    fn stripable_class_strips() {
        let (x, _) = gen_dataset(&spec(StructureClass::DStripable, 9, 2, 3, 0)).unwrap();
        let p = graph::strips(&x).unwrap();
        p.validate_cover(x.len()).unwrap();
    }

    #[test]
    fn id_class_membership_uses_exact_first_axis() {
        let s = spec(StructureClass::NonFuzzyId, 4, 6, 3, 3);
        let (x, ys) = gen_dataset(&s).unwrap();
        let members = x
            .fuzzy_membership_count_with_thresholds(&ys, &x.exact_first_axis_thresholds())
            .unwrap();
        assert_eq!(members, 3);
    }

    #[test]
    fn generation_is_deterministic() {
        let s = spec(StructureClass::Random, 8, 4, 3, 1);
        assert_eq!(gen_dataset(&s).unwrap(), gen_dataset(&s).unwrap());
    }

    #[test]
    fn infeasible_spacing_reported() {
        let s = DatasetSpec {
            class: StructureClass::NullGraph,
            n: 64,
            m: 1,
            d: 2,
            delta: 16,
            width_bits: 8,
            inside_count: 0,
            seed: 1,
        };
        assert!(matches!(
            gen_dataset(&s),
            Err(Error::InfeasibleSpacing(_))
        ));
    }
}
