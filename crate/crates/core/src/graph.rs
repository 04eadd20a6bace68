//! The induced edge-labeled graph of a ball set. Vertices are ball centers;
//! edge `(i,j)` carries axis label `l` exactly when the two δ-intervals on
//! axis `l` intersect, i.e. `|x_il - x_jl| <= 2δ`. Axis exclusivity of this
//! graph decides which protocol variant applies, DSATUR supplies layer
//! partitions, and the stripping procedures split a set into per-axis
//! exclusive parts.

use crate::error::{Error, Result};
use crate::geometry::FuzzyDataset;
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Labels are stored as d-bit masks; bit `l-1` stands for axis `l`.
pub type LabelMask = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    n: usize,
    dim: usize,
    edges: BTreeMap<(usize, usize), LabelMask>,
}

impl LabeledGraph {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Undirected: the map holds each pair once with i < j.
    pub fn edges(&self) -> &BTreeMap<(usize, usize), LabelMask> {
        &self.edges
    }

    pub fn label(&self, i: usize, j: usize) -> LabelMask {
        let key = if i < j { (i, j) } else { (j, i) };
        self.edges.get(&key).copied().unwrap_or(0)
    }

    pub fn is_null(&self) -> bool {
        self.edges.is_empty()
    }

    /// deg(i) = sum over incident edges of the label-set cardinality.
    pub fn labeled_degree(&self, i: usize) -> usize {
        self.edges
            .iter()
            .filter(|((a, b), _)| *a == i || *b == i)
            .map(|(_, m)| m.count_ones() as usize)
            .sum()
    }

    pub fn max_labeled_degree(&self) -> usize {
        (0..self.n).map(|i| self.labeled_degree(i)).max().unwrap_or(0)
    }

    /// Degree in the underlying simple graph (multiplicities dropped).
    pub fn simple_degree(&self, i: usize) -> usize {
        self.edges
            .keys()
            .filter(|(a, b)| *a == i || *b == i)
            .count()
    }

    /// Debug dump: one line per edge, "i j label-mask-hex".
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for ((i, j), mask) in &self.edges {
            let _ = writeln!(out, "{i} {j} {mask:x}");
        }
        out
    }
}

pub fn build_induced_graph(x: &FuzzyDataset) -> LabeledGraph {
    let n = x.len();
    let d = x.dim();
    let two_delta = 2 * x.delta();
    let mut edges = BTreeMap::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut mask: LabelMask = 0;
            for l in 0..d {
                if x.points()[i].coords[l].abs_diff(x.points()[j].coords[l]) <= two_delta {
                    mask |= 1 << l;
                }
            }
            if mask != 0 {
                edges.insert((i, j), mask);
            }
        }
    }
    LabeledGraph { n, dim: d, edges }
}

/// Every edge that carries axis `a` carries only `a`. Axes are 1-based.
pub fn is_a_exclusive(g: &LabeledGraph, a: usize) -> bool {
    debug_assert!(a >= 1 && a <= g.dim);
    let bit = 1 << (a - 1);
    g.edges
        .values()
        .all(|&mask| mask & bit == 0 || mask == bit)
}

/// The same test restricted to edges incident to `v`.
pub fn vertex_a_exclusive(g: &LabeledGraph, v: usize, a: usize) -> bool {
    let bit = 1 << (a - 1);
    g.edges
        .iter()
        .filter(|((i, j), _)| *i == v || *j == v)
        .all(|(_, &mask)| mask & bit == 0 || mask == bit)
}

fn vertex_a_exclusive_in(g: &LabeledGraph, active: &[bool], v: usize, a: usize) -> bool {
    let bit = 1 << (a - 1);
    g.edges
        .iter()
        .filter(|((i, j), _)| (*i == v && active[*j]) || (*j == v && active[*i]))
        .all(|(_, &mask)| mask & bit == 0 || mask == bit)
}

/// Disjoint vertex subsets covering `[n]`, optionally tagged with the axis
/// each part is exclusive for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub parts: Vec<Vec<usize>>,
    pub axis_tags: Option<Vec<usize>>,
}

impl Partition {
    pub fn validate_cover(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for part in &self.parts {
            for &v in part {
                if v >= n || seen[v] {
                    return Err(Error::InvalidPartition);
                }
                seen[v] = true;
            }
        }
        if seen.iter().all(|&s| s) {
            Ok(())
        } else {
            Err(Error::InvalidPartition)
        }
    }

    pub fn part_count(&self) -> usize {
        self.parts.len()
    }
}

/// Adjacency restricted either to the simple graph or to a-edges only.
fn adjacency(g: &LabeledGraph, axis: Option<usize>) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); g.n];
    for (&(i, j), &mask) in &g.edges {
        let relevant = match axis {
            None => true,
            Some(a) => mask & (1 << (a - 1)) != 0,
        };
        if relevant {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    adj
}

fn dsatur_on(adj: &[Vec<usize>], vertices: &[usize]) -> Vec<Vec<usize>> {
    let n_total = adj.len();
    let mut in_scope = vec![false; n_total];
    for &v in vertices {
        in_scope[v] = true;
    }
    let degree: Vec<usize> = (0..n_total)
        .map(|v| adj[v].iter().filter(|&&u| in_scope[u]).count())
        .collect();
    let mut color: Vec<Option<usize>> = vec![None; n_total];
    let mut neighbor_colors: Vec<std::collections::BTreeSet<usize>> =
        vec![Default::default(); n_total];

    for _ in 0..vertices.len() {
        // Most saturated first; ties by degree, then lowest index.
        let pick = vertices
            .iter()
            .copied()
            .filter(|&v| color[v].is_none())
            .max_by(|&a, &b| {
                (neighbor_colors[a].len(), degree[a], std::cmp::Reverse(a)).cmp(&(
                    neighbor_colors[b].len(),
                    degree[b],
                    std::cmp::Reverse(b),
                ))
            })
            .expect("uncolored vertex remains");
        let mut c = 0;
        while neighbor_colors[pick].contains(&c) {
            c += 1;
        }
        color[pick] = Some(c);
        for &u in &adj[pick] {
            if in_scope[u] {
                neighbor_colors[u].insert(c);
            }
        }
    }

    let classes = vertices
        .iter()
        .filter_map(|&v| color[v])
        .max()
        .map_or(0, |m| m + 1);
    let mut parts = vec![Vec::new(); classes];
    for &v in vertices {
        parts[color[v].unwrap()].push(v);
    }
    parts
}

/// DSATUR coloring of the simple graph underlying `G_X` (no `axis`), or of
/// the spanning subgraph restricted to a-edges (with `axis`). Each part
/// induces no (relevant) edges.
pub fn dsatur(x: &FuzzyDataset, axis: Option<usize>) -> Partition {
    let g = build_induced_graph(x);
    let adj = adjacency(&g, axis);
    let all: Vec<usize> = (0..g.n).collect();
    Partition {
        parts: dsatur_on(&adj, &all),
        axis_tags: None,
    }
}

/// Assigns every vertex that is a-exclusive within the still-unassigned
/// subgraph, rescanning after each assignment. Shared by the stripping
/// heuristic and the constructive bounded-degree procedure.
fn assign_exclusive_vertices(
    g: &LabeledGraph,
    active: &mut [bool],
    parts: &mut [Vec<usize>],
) {
    let d = g.dim;
    loop {
        let mut changed = false;
        'scan: for v in 0..g.n {
            if !active[v] {
                continue;
            }
            for a in 1..=d {
                if vertex_a_exclusive_in(g, active, v, a) {
                    parts[a - 1].push(v);
                    active[v] = false;
                    changed = true;
                    break 'scan;
                }
            }
        }
        if !changed {
            return;
        }
    }
}

/// Sum over a vertex's incident active edges of the label count of
/// multi-labeled edges; the heuristic prefers the color class carrying the
/// most of this multiplicity.
fn multiplicity_weight(g: &LabeledGraph, active: &[bool], v: usize) -> usize {
    g.edges
        .iter()
        .filter(|((i, j), _)| (*i == v && active[*j]) || (*j == v && active[*i]))
        .map(|(_, &mask)| {
            let c = mask.count_ones() as usize;
            if c >= 2 {
                c
            } else {
                0
            }
        })
        .sum()
}

/// Stripping heuristic: repeatedly assign per-axis exclusive vertices, then
/// for each axis run DSATUR on the remaining a-edges and keep the class with
/// the largest multiplicity weight. Fails when vertices remain.
pub fn strips(x: &FuzzyDataset) -> Result<Partition> {
    let g = build_induced_graph(x);
    let d = g.dim;
    let mut active = vec![true; g.n];
    let mut parts = vec![Vec::new(); d];

    assign_exclusive_vertices(&g, &mut active, &mut parts);

    for a in 1..=d {
        let remaining: Vec<usize> = (0..g.n).filter(|&v| active[v]).collect();
        if remaining.is_empty() {
            break;
        }
        let adj = adjacency(&g, Some(a));
        let classes = dsatur_on(&adj, &remaining);
        let best = classes
            .iter()
            .enumerate()
            .max_by_key(|(idx, class)| {
                let weight: usize = class
                    .iter()
                    .map(|&v| multiplicity_weight(&g, &active, v))
                    .sum();
                (weight, std::cmp::Reverse(*idx))
            })
            .map(|(idx, _)| idx);
        if let Some(idx) = best {
            for &v in &classes[idx] {
                parts[a - 1].push(v);
                active[v] = false;
            }
        }
    }

    if active.iter().any(|&a| a) {
        return Err(Error::StripsFailed);
    }
    let partition = Partition {
        axis_tags: Some((1..=d).collect()),
        parts,
    };
    verify_exclusive_partition(&g, &partition)?;
    Ok(partition)
}

/// Constructive partition for labeled degree at most ceil(3d/2) - 1: assign
/// exclusivity-safe vertices, then color the residual simple graph (its
/// degree is at most d-1) into at most d independent classes.
pub fn strip_by_theorem(x: &FuzzyDataset) -> Result<Partition> {
    let g = build_induced_graph(x);
    let d = g.dim;
    let bound = (3 * d).div_ceil(2) - 1;
    let measured = g.max_labeled_degree();
    if measured > bound {
        return Err(Error::DegreeBound { measured, bound });
    }

    let mut active = vec![true; g.n];
    let mut parts = vec![Vec::new(); d];
    assign_exclusive_vertices(&g, &mut active, &mut parts);

    let residual: Vec<usize> = (0..g.n).filter(|&v| active[v]).collect();
    if !residual.is_empty() {
        let adj = adjacency(&g, None);
        let classes = dsatur_on(&adj, &residual);
        if classes.len() > d {
            // The counting argument guarantees residual degree <= d-1, so
            // DSATUR needs at most d classes.
            return Err(Error::InvalidPartition);
        }
        for (k, class) in classes.into_iter().enumerate() {
            parts[k].extend(class);
        }
    }

    let partition = Partition {
        axis_tags: Some((1..=d).collect()),
        parts,
    };
    verify_exclusive_partition(&g, &partition)?;
    Ok(partition)
}

/// Residual degree claim used by the constructive procedure; exposed so the
/// tests can re-measure it on crafted instances.
pub fn exclusivity_residual(x: &FuzzyDataset) -> (LabeledGraph, Vec<usize>) {
    let g = build_induced_graph(x);
    let mut active = vec![true; g.n];
    let mut parts = vec![Vec::new(); g.dim];
    assign_exclusive_vertices(&g, &mut active, &mut parts);
    let residual = (0..g.n).filter(|&v| active[v]).collect();
    (g, residual)
}

/// Checks each tagged part induces an a-exclusive subgraph.
pub fn verify_exclusive_partition(g: &LabeledGraph, partition: &Partition) -> Result<()> {
    partition.validate_cover(g.n)?;
    let tags = partition
        .axis_tags
        .as_ref()
        .ok_or(Error::InvalidPartition)?;
    if tags.len() != partition.parts.len() {
        return Err(Error::InvalidPartition);
    }
    for (part, &a) in partition.parts.iter().zip(tags) {
        let in_part: std::collections::BTreeSet<usize> = part.iter().copied().collect();
        let bit = 1 << (a - 1);
        for (&(i, j), &mask) in &g.edges {
            if in_part.contains(&i) && in_part.contains(&j) && mask & bit != 0 && mask != bit {
                return Err(Error::NotExclusive { axis: a });
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

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
    fn far_points_induce_null_graph() {
        let x = dataset(&[&[100, 100], &[200, 200]], 2);
        let g = build_induced_graph(&x);
        assert!(g.is_null());
        for a in 1..=2 {
            assert!(is_a_exclusive(&g, a)); // paper's disjoint-balls case
        }
    }

    #[test]
    fn single_axis_overlap_labels_one_edge() {
        let x = dataset(&[&[10, 10], &[11, 110]], 2);
        let g = build_induced_graph(&x);
        assert_eq!(g.edges().len(), 1);
        assert_eq!(g.label(0, 1), 0b01);
        assert!(is_a_exclusive(&g, 1));
        assert!(is_a_exclusive(&g, 2));
        assert_eq!(g.dump(), "0 1 1\n");
    }

    #[test]
    fn mixed_edge_breaks_exclusivity() {
        let x = dataset(&[&[10, 10], &[11, 11]], 2);
        let g = build_induced_graph(&x);
        assert_eq!(g.label(0, 1), 0b11);
        assert!(!is_a_exclusive(&g, 1));
        assert!(!is_a_exclusive(&g, 2));
        assert!(!vertex_a_exclusive(&g, 0, 1));
    }

    #[test]
    fn vertex_exclusivity() {
        // 0-1 share only axis 1; 2 is isolated
        let x = dataset(&[&[10, 10], &[12, 100], &[200, 200]], 2);
        let g = build_induced_graph(&x);
        assert!(vertex_a_exclusive(&g, 2, 1));
        assert!(vertex_a_exclusive(&g, 2, 2));
        assert!(vertex_a_exclusive(&g, 0, 1));
        assert!(vertex_a_exclusive(&g, 0, 2)); // no 2-edges at all
    }

    #[test]
    fn labels_match_bruteforce_interval_checks() {
        let mut rng = crate::seed::derive_rng(5, "graph-brute");
        use rand::Rng;
        for _ in 0..100 {
            let n = rng.gen_range(2..=10usize);
            let d = rng.gen_range(1..=4usize);
            let delta = rng.gen_range(0..=4u64);
            let mut pts = std::collections::BTreeSet::new();
            while pts.len() < n {
                pts.insert(Point::new(
                    (0..d).map(|_| rng.gen_range(delta..=255 - delta)).collect(),
                ));
            }
            let pts: Vec<Point> = pts.into_iter().collect();
            let x = FuzzyDataset::new(pts.clone(), delta, d, 8).unwrap();
            let g = build_induced_graph(&x);
            for i in 0..n {
                for j in i + 1..n {
                    for l in 0..d {
                        let (a, b) = (pts[i].coords[l], pts[j].coords[l]);
                        // interval intersection on axis l
                        let lo = a.max(b).saturating_sub(delta);
                        let hi = a.min(b) + delta;
                        let intersects = lo <= hi;
                        assert_eq!(
                            g.label(i, j) & (1 << l) != 0,
                            intersects,
                            "edge ({i},{j}) axis {}",
                            l + 1
                        );
                    }
                }
            }
            // degree definition
            for i in 0..n {
                let want: usize = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| g.label(i, j).count_ones() as usize)
                    .sum();
                assert_eq!(g.labeled_degree(i), want);
            }
        }
    }

    #[test]
    fn dsatur_edgeless_is_one_part() {
        let x = dataset(&[&[10, 10], &[100, 100], &[200, 200]], 2);
        let p = dsatur(&x, None);
        assert_eq!(p.part_count(), 1);
        assert_eq!(p.parts[0].len(), 3);
    }

    #[test]
    fn dsatur_triangle_needs_three_parts() {
        let x = dataset(&[&[10, 10], &[11, 11], &[12, 12]], 2);
        let p = dsatur(&x, None);
        assert_eq!(p.part_count(), 3);
    }

    #[test]
    fn dsatur_parts_are_edge_free() {
        let mut rng = crate::seed::derive_rng(6, "graph-dsatur");
        use rand::Rng;
        for _ in 0..50 {
            let n = rng.gen_range(2..=12usize);
            let mut pts = std::collections::BTreeSet::new();
            while pts.len() < n {
                pts.insert(Point::new(vec![
                    rng.gen_range(4..60u64),
                    rng.gen_range(4..60u64),
                ]));
            }
            let x = FuzzyDataset::new(pts.into_iter().collect(), 4, 2, 8).unwrap();
            let g = build_induced_graph(&x);
            let p = dsatur(&x, None);
            p.validate_cover(n).unwrap();
            let mut simple_deg = 0;
            for v in 0..n {
                simple_deg = simple_deg.max(g.simple_degree(v));
            }
            assert!(p.part_count() <= simple_deg + 1);
            for part in &p.parts {
                for (ai, &a) in part.iter().enumerate() {
                    for &b in &part[ai + 1..] {
                        assert_eq!(g.label(a, b), 0, "edge inside a color class");
                    }
                }
            }
        }
    }

    #[test]
    fn dsatur_with_axis_only_separates_a_edges() {
        // axis-1 projections all overlap; axis 2 far apart
        let x = dataset(&[&[10, 10], &[11, 100], &[12, 200]], 2);
        let p = dsatur(&x, Some(2));
        assert_eq!(p.part_count(), 1); // no 2-edges anywhere
        let p1 = dsatur(&x, Some(1));
        let g = build_induced_graph(&x);
        for part in &p1.parts {
            for (ai, &a) in part.iter().enumerate() {
                for &b in &part[ai + 1..] {
                    assert_eq!(g.label(a, b) & 1, 0);
                }
            }
        }
    }

    #[test]
    fn strips_on_null_graph_uses_first_axis() {
        let x = dataset(&[&[10, 10], &[100, 100]], 2);
        let p = strips(&x).unwrap();
        assert_eq!(p.parts[0], vec![0, 1]);
    }

    #[test]
    fn strips_on_one_exclusive_graph() {
        // only axis-1 overlaps: every vertex is 1-exclusive
        let x = dataset(&[&[10, 10], &[11, 100], &[12, 200]], 2);
        let p = strips(&x).unwrap();
        assert_eq!(p.parts[0].len(), 3);
        let g = build_induced_graph(&x);
        verify_exclusive_partition(&g, &p).unwrap();
    }

    #[test]
    fn strip_by_theorem_rejects_high_degree() {
        // a 4-clique with both labels everywhere has degree 6 > ceil(3)-1=2
        let x = dataset(&[&[10, 10], &[11, 11], &[12, 12], &[13, 13]], 4);
        match strip_by_theorem(&x) {
            Err(Error::DegreeBound { measured, bound }) => {
                assert!(measured > bound);
            }
            other => panic!("expected degree bound rejection, got {other:?}"),
        }
    }

    #[test]
    fn strip_by_theorem_null_graph_all_case_one() {
        let x = dataset(&[&[10, 10], &[100, 100], &[200, 200]], 2);
        let p = strip_by_theorem(&x).unwrap();
        assert_eq!(p.parts[0].len(), 3);
    }
}
