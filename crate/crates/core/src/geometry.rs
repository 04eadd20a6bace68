//! Points, L∞ balls and the brute-force fuzzy-union oracle. Everything the
//! protocols claim is checked against these plain double loops.

use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Point {
    pub coords: Vec<u64>,
}

impl Point {
    pub fn new(coords: Vec<u64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords.iter().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(" "))
    }
}

/// max_j |p_j - q_j|
pub fn linf_dist(p: &Point, q: &Point) -> Result<u64> {
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(p.dim(), q.dim()));
    }
    Ok(p.coords
        .iter()
        .zip(&q.coords)
        .map(|(&a, &b)| a.abs_diff(b))
        .max()
        .unwrap_or(0))
}

/// The receiver's geometric input: `n` distinct points in `[0, 2^w)^d` and a
/// radius `δ`, constrained so that the shifted keys `x ± δ` never leave the
/// coordinate domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FuzzyDataset {
    points: Vec<Point>,
    delta: u64,
    dim: usize,
    width_bits: u32,
}

impl FuzzyDataset {
    pub fn new(points: Vec<Point>, delta: u64, dim: usize, width_bits: u32) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if width_bits == 0 || width_bits > 32 {
            return Err(Error::InvalidParameter(format!(
                "coordinate width {width_bits} out of supported range 1..=32"
            )));
        }
        let max = (1u64 << width_bits) - 1;
        if delta > max / 2 {
            return Err(Error::InvalidParameter(format!(
                "radius {delta} too large for width {width_bits}"
            )));
        }
        for p in &points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch(p.dim(), dim));
            }
            for &c in &p.coords {
                if c < delta || c > max - delta {
                    return Err(Error::InvalidParameter(format!(
                        "coordinate {c} leaves room for no {delta}-ball in [0, 2^{width_bits})"
                    )));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for p in &points {
            if !seen.insert(p.clone()) {
                return Err(Error::InvalidParameter(format!("duplicate point {p}")));
            }
        }
        Ok(FuzzyDataset {
            points,
            delta,
            dim,
            width_bits,
        })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn delta(&self) -> u64 {
        self.delta
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn width_bits(&self) -> u32 {
        self.width_bits
    }

    /// Per-axis thresholds all equal to δ.
    pub fn uniform_thresholds(&self) -> Vec<u64> {
        vec![self.delta; self.dim]
    }

    /// Thresholds for the variant with one exact (non-fuzzy) leading axis.
    pub fn exact_first_axis_thresholds(&self) -> Vec<u64> {
        let mut t = vec![self.delta; self.dim];
        t[0] = 0;
        t
    }

    fn check_queries(&self, ys: &[Point]) -> Result<()> {
        for y in ys {
            if y.dim() != self.dim {
                return Err(Error::DimensionMismatch(y.dim(), self.dim));
            }
        }
        Ok(())
    }

    /// True when some center is within the per-axis thresholds of `y`.
    pub fn is_member_with_thresholds(&self, y: &Point, thresholds: &[u64]) -> bool {
        self.points.iter().any(|x| {
            x.coords
                .iter()
                .zip(&y.coords)
                .zip(thresholds)
                .all(|((&a, &b), &t)| a.abs_diff(b) <= t)
        })
    }

    pub fn is_member(&self, y: &Point) -> bool {
        self.is_member_with_thresholds(y, &self.uniform_thresholds())
    }

    /// `X ⊔ {y ∈ Y : min_i dist(x_i, y) > δ}`, duplicates in `Y` collapsed.
    pub fn fuzzy_union_oracle(&self, ys: &[Point]) -> Result<BTreeSet<Point>> {
        self.fuzzy_union_oracle_with_thresholds(ys, &self.uniform_thresholds())
    }

    pub fn fuzzy_union_oracle_with_thresholds(
        &self,
        ys: &[Point],
        thresholds: &[u64],
    ) -> Result<BTreeSet<Point>> {
        self.check_queries(ys)?;
        let mut out: BTreeSet<Point> = self.points.iter().cloned().collect();
        for y in ys {
            if !self.is_member_with_thresholds(y, thresholds) {
                out.insert(y.clone());
            }
        }
        Ok(out)
    }

    /// Number of distinct `Y` points inside the union of balls.
    pub fn fuzzy_membership_count(&self, ys: &[Point]) -> Result<usize> {
        self.fuzzy_membership_count_with_thresholds(ys, &self.uniform_thresholds())
    }

    pub fn fuzzy_membership_count_with_thresholds(
        &self,
        ys: &[Point],
        thresholds: &[u64],
    ) -> Result<usize> {
        self.check_queries(ys)?;
        let dedup: BTreeSet<&Point> = ys.iter().collect();
        Ok(dedup
            .iter()
            .filter(|y| self.is_member_with_thresholds(y, thresholds))
            .count())
    }
}

/// Text format: first line `d n m delta w`, then the `n` receiver points and
/// the `m` sender points, one per line, coordinates as decimals.
pub fn write_dataset_text(x: &FuzzyDataset, ys: &[Point]) -> String {
    let mut out = format!(
        "{} {} {} {} {}\n",
        x.dim(),
        x.len(),
        ys.len(),
        x.delta(),
        x.width_bits()
    );
    for p in x.points() {
        out.push_str(&p.to_string());
        out.push('\n');
    }
    for p in ys {
        out.push_str(&p.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_dataset_text(text: &str) -> Result<(FuzzyDataset, Vec<Point>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Wire("empty dataset file".into()))?;
    let fields: Vec<u64> = header
        .split_whitespace()
        .map(|f| {
            f.parse::<u64>()
                .map_err(|_| Error::Wire(format!("bad header field {f:?}")))
        })
        .collect::<Result<_>>()?;
    let [d, n, m, delta, w] = fields[..] else {
        return Err(Error::Wire("header must be 'd n m delta w'".into()));
    };
    let mut read_point = |what: &str| -> Result<Point> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Wire(format!("missing {what} point line")))?;
        let coords: Vec<u64> = line
            .split_whitespace()
            .map(|f| {
                f.parse::<u64>()
                    .map_err(|_| Error::Wire(format!("bad coordinate {f:?}")))
            })
            .collect::<Result<_>>()?;
        if coords.len() != d as usize {
            return Err(Error::DimensionMismatch(coords.len(), d as usize));
        }
        Ok(Point::new(coords))
    };
    let xs: Vec<Point> = (0..n).map(|_| read_point("receiver")).collect::<Result<_>>()?;
    let ys: Vec<Point> = (0..m).map(|_| read_point("sender")).collect::<Result<_>>()?;
    let dataset = FuzzyDataset::new(xs, delta, d as usize, w as u32)?;
    Ok((dataset, ys))
}
