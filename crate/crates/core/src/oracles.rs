//! Slow reference implementations for cross-checking. Nothing here shares
//! adjacency or labeling code with the main modules.

use std::collections::{BTreeMap, VecDeque};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::point_process::PointCloud;

pub const NAIVE_GRAPH_MAX_POINTS: usize = 5000;
pub const ENUMERATION_MAX_SITES: usize = 20;

/// All pairs `i < j` with `‖x_i − x_j‖ ≤ r`, ascending.
pub fn naive_graph(cloud: &PointCloud, r: f64) -> Result<Vec<(usize, usize)>> {
    let n = cloud.len();
    if n > NAIVE_GRAPH_MAX_POINTS {
        return Err(Error::param(
            "cloud",
            format!("naive graph limited to {NAIVE_GRAPH_MAX_POINTS} points, got {n}"),
        ));
    }
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut sq = 0.0;
            for k in 0..cloud.dim() {
                let diff = cloud.point(i)[k] - cloud.point(j)[k];
                sq += diff * diff;
            }
            if sq <= r * r {
                edges.push((i, j));
            }
        }
    }
    Ok(edges)
}

/// Breadth-first components; each part ascending, parts ordered by smallest member.
pub fn bfs_components(vertices: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); vertices];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; vertices];
    let mut parts = Vec::new();
    for start in 0..vertices {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut part = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    part.push(w);
                    queue.push_back(w);
                }
            }
        }
        part.sort_unstable();
        parts.push(part);
    }
    parts
}

/// l∞ diameter by comparing every pair.
pub fn naive_extent(cloud: &PointCloud, members: &[usize]) -> f64 {
    let mut best = 0.0f64;
    for &a in members {
        for &b in members {
            let d = cloud
                .point(a)
                .iter()
                .zip(cloud.point(b))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            best = best.max(d);
        }
    }
    best
}

fn lattice_neighbors(dim: usize, side: usize, site: usize) -> Vec<usize> {
    let mut coords = Vec::with_capacity(dim);
    let mut rest = site;
    for _ in 0..dim {
        coords.push(rest % side);
        rest /= side;
    }
    // coords[k] is the digit of weight side^k
    let mut out = Vec::new();
    let mut weight = 1;
    for &c in &coords {
        if c > 0 {
            out.push(site - weight);
        }
        if c + 1 < side {
            out.push(site + weight);
        }
        weight *= side;
    }
    out
}

/// Open clusters of a site configuration by breadth-first search; parts as in
/// [`bfs_components`].
pub fn bfs_lattice_clusters(dim: usize, side: usize, open: &[bool]) -> Vec<Vec<usize>> {
    let mut seen = vec![false; open.len()];
    let mut parts = Vec::new();
    for start in 0..open.len() {
        if !open[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut part = vec![start];
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            for w in lattice_neighbors(dim, side, v) {
                if open[w] && !seen[w] {
                    seen[w] = true;
                    part.push(w);
                    queue.push_back(w);
                }
            }
        }
        part.sort_unstable();
        parts.push(part);
    }
    parts
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LatticeStatistic {
    /// Order of the largest open cluster.
    Largest,
    /// Number of open clusters.
    Count,
}

/// Exact expectation over all `2^{n^d}` configurations with weight
/// `p^{open} (1−p)^{closed}`.
pub fn exact_lattice_expectation(
    dim: usize,
    side: usize,
    p: &BigRational,
    statistic: LatticeStatistic,
) -> Result<BigRational> {
    let sites = side
        .checked_pow(dim as u32)
        .filter(|&v| v <= ENUMERATION_MAX_SITES)
        .ok_or_else(|| {
            Error::param("side", format!("enumeration limited to {ENUMERATION_MAX_SITES} sites"))
        })?;
    if *p < BigRational::zero() || *p > BigRational::one() {
        return Err(Error::param("p", "need 0 <= p <= 1"));
    }
    // tally[(open sites, statistic)] = number of configurations
    let mut tally: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut open = vec![false; sites];
    for mask in 0u64..1u64 << sites {
        for (k, o) in open.iter_mut().enumerate() {
            *o = mask >> k & 1 == 1;
        }
        let parts = bfs_lattice_clusters(dim, side, &open);
        let value = match statistic {
            LatticeStatistic::Largest => parts.iter().map(Vec::len).max().unwrap_or(0),
            LatticeStatistic::Count => parts.len(),
        };
        *tally.entry((mask.count_ones() as usize, value)).or_default() += 1;
    }
    let q = BigRational::one() - p;
    let mut total = BigRational::zero();
    for ((k, value), configs) in tally {
        let weight = num_traits::pow(p.clone(), k) * num_traits::pow(q.clone(), sites - k);
        total += weight * BigRational::from_integer(BigInt::from(configs * value as u64));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::BoxSpec;

    fn half() -> BigRational {
        BigRational::new(1.into(), 2.into())
    }

    #[test]
    fn naive_graph_small_cases() {
        let b = BoxSpec::new(2, 3.0).unwrap();
        let c = PointCloud::from_points(b.clone(), &[[0.0, 0.0], [0.5, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(naive_graph(&c, 1.0).unwrap(), vec![(0, 1)]);
        let c = PointCloud::from_points(b, &[[0.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(naive_graph(&c, 1.0).unwrap(), vec![(0, 1)]);
    }

    #[test]
    fn bfs_small_cases() {
        assert_eq!(bfs_components(3, &[(0, 1), (1, 2), (0, 2)]), vec![vec![0, 1, 2]]);
        assert_eq!(
            bfs_components(4, &[]),
            vec![vec![0], vec![1], vec![2], vec![3]]
        );
    }

    #[test]
    fn two_by_two_expectations() {
        let h = exact_lattice_expectation(2, 2, &half(), LatticeStatistic::Largest).unwrap();
        assert_eq!(h, BigRational::new(30.into(), 16.into()));
        let c = exact_lattice_expectation(2, 2, &half(), LatticeStatistic::Count).unwrap();
        assert_eq!(c, BigRational::new(17.into(), 16.into()));
    }

    #[test]
    fn full_occupation_counts_one() {
        for &(d, n) in &[(2usize, 2usize), (2, 3), (2, 4), (3, 2)] {
            let c = exact_lattice_expectation(d, n, &BigRational::one(), LatticeStatistic::Count)
                .unwrap();
            assert_eq!(c, BigRational::one());
        }
    }

    #[test]
    fn enumeration_size_guard() {
        assert!(exact_lattice_expectation(2, 5, &half(), LatticeStatistic::Count).is_err());
        assert!(exact_lattice_expectation(3, 3, &half(), LatticeStatistic::Count).is_err());
    }
}
