//! Site percolation on the box `{0, …, n−1}^d` of the nearest-neighbour lattice.
//!
//! Sites are stored row-major with the first coordinate most significant, so
//! flat index order is the lexicographic order on `Z^d`.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedSub, One, Zero};

use crate::error::{Error, Result};
use crate::estimation::{replicate, summarize, MonteCarloSummary};
use crate::point_process::{derive_substream, stream_label, RngSubstream};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeConfig {
    dim: usize,
    side: usize,
    open: Vec<bool>,
}

fn checked_volume(dim: usize, side: usize) -> Result<usize> {
    if dim < 2 {
        return Err(Error::param("dim", format!("need dim >= 2, got {dim}")));
    }
    if side == 0 {
        return Err(Error::param("side", "need at least one site per axis"));
    }
    side.checked_pow(dim as u32)
        .filter(|&v| v <= u32::MAX as usize)
        .ok_or_else(|| Error::param("side", format!("{side}^{dim} sites is too many")))
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("p", format!("need 0 <= p <= 1, got {p}")));
    }
    Ok(())
}

impl LatticeConfig {
    pub fn new(dim: usize, side: usize, open: Vec<bool>) -> Result<Self> {
        let volume = checked_volume(dim, side)?;
        if open.len() != volume {
            return Err(Error::param(
                "open",
                format!("expected {volume} sites, got {}", open.len()),
            ));
        }
        Ok(LatticeConfig { dim, side, open })
    }

    /// Site `i` is open iff `uniforms[i] < p`. Sharing the uniform field across
    /// several `p` gives the standard monotone coupling.
    pub fn from_uniforms(dim: usize, side: usize, p: f64, uniforms: &[f64]) -> Result<Self> {
        check_probability(p)?;
        Self::new(dim, side, uniforms.iter().map(|&u| u < p).collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn volume(&self) -> usize {
        self.open.len()
    }

    pub fn is_open(&self, i: usize) -> bool {
        self.open[i]
    }

    pub fn open_sites(&self) -> &[bool] {
        &self.open
    }

    pub fn open_count(&self) -> usize {
        self.open.iter().filter(|&&b| b).count()
    }

    pub fn index(&self, x: &[usize]) -> Option<usize> {
        if x.len() != self.dim || x.iter().any(|&c| c >= self.side) {
            return None;
        }
        Some(x.iter().fold(0, |acc, &c| acc * self.side + c))
    }

    pub fn coords(&self, mut i: usize) -> Vec<usize> {
        let mut x = vec![0; self.dim];
        for c in x.iter_mut().rev() {
            *c = i % self.side;
            i /= self.side;
        }
        x
    }

    /// Whether site `i` lies in the shell `L(n−1) = B(n−1) \ [1, n−2]^d`.
    pub fn in_shell(&self, i: usize) -> bool {
        self.coords(i).iter().any(|&c| c == 0 || c + 1 == self.side)
    }

    /// Calls `f(i, j)` for each nearest-neighbour pair of open sites, `i < j`.
    fn for_each_open_pair(&self, mut f: impl FnMut(usize, usize)) {
        let n = self.side;
        let mut stride = 1;
        for _axis in 0..self.dim {
            // site i has a +1 neighbour along this axis unless its coordinate is n−1
            for i in 0..self.volume() {
                if (i / stride) % n + 1 < n && self.open[i] && self.open[i + stride] {
                    f(i, i + stride);
                }
            }
            stride *= n;
        }
    }
}

pub fn sample_lattice(rng: &mut RngSubstream, dim: usize, side: usize, p: f64) -> Result<LatticeConfig> {
    check_probability(p)?;
    let volume = checked_volume(dim, side)?;
    let open = (0..volume).map(|_| rng.uniform() < p).collect();
    LatticeConfig::new(dim, side, open)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeLabeling {
    /// Cluster id per site; `None` for closed sites. Ids follow the smallest
    /// (lexicographic) member.
    labels: Vec<Option<u32>>,
    sizes: Vec<usize>,
}

impl LatticeLabeling {
    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i].map(|l| l as usize)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Id of the largest cluster, ties to the smallest member.
    pub fn largest(&self) -> Option<usize> {
        (0..self.sizes.len()).min_by(|&a, &b| self.sizes[b].cmp(&self.sizes[a]).then(a.cmp(&b)))
    }

    pub fn cluster_size_of(&self, i: usize) -> Option<usize> {
        self.label(i).map(|l| self.sizes[l])
    }

    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.count()];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                parts[*l as usize].push(i);
            }
        }
        parts
    }
}

/// Union-find sweep over nearest-neighbour open pairs.
pub fn label_clusters(config: &LatticeConfig) -> LatticeLabeling {
    let mut uf = UnionFind::new(config.volume());
    config.for_each_open_pair(|i, j| {
        uf.union(i, j);
    });
    let (labels, sizes) = uf.dense_labels(|i| config.is_open(i));
    LatticeLabeling { labels, sizes }
}

/// `H`: order of the largest open cluster, 0 if none.
pub fn largest_cluster_order(labeling: &LatticeLabeling) -> usize {
    labeling.sizes.iter().copied().max().unwrap_or(0)
}

/// Number of open clusters, and `count − Σ_{open x} 1/|C_x|` in exact
/// rational arithmetic. The residual is always zero.
pub fn cluster_count(labeling: &LatticeLabeling) -> Result<(usize, Ratio<i64>)> {
    // open sites grouped by the size of their cluster: m_k sites contribute m_k / k
    let mut by_size: BTreeMap<usize, i64> = BTreeMap::new();
    for l in labeling.labels.iter().flatten() {
        *by_size.entry(labeling.sizes[*l as usize]).or_default() += 1;
    }
    let mut sum = Ratio::<i64>::zero();
    for (k, m) in by_size {
        sum = sum
            .checked_add(&Ratio::new(m, k as i64))
            .ok_or(Error::RationalOverflow)?;
    }
    let count = labeling.count();
    let residual = Ratio::from_integer(count as i64)
        .checked_sub(&sum)
        .ok_or(Error::RationalOverflow)?;
    if !residual.is_zero() {
        return Err(Error::Invariant(format!(
            "cluster counting identity residual {residual} != 0"
        )));
    }
    Ok((count, residual))
}

pub fn sample_largest_cluster(rng: &mut RngSubstream, dim: usize, side: usize, p: f64) -> Result<usize> {
    Ok(largest_cluster_order(&label_clusters(&sample_lattice(rng, dim, side, p)?)))
}

pub fn sample_cluster_count(rng: &mut RngSubstream, dim: usize, side: usize, p: f64) -> Result<usize> {
    Ok(cluster_count(&label_clusters(&sample_lattice(rng, dim, side, p)?))?.0)
}

fn embed_side(side: usize, embed_factor: usize) -> Result<usize> {
    if embed_factor == 0 {
        return Err(Error::param("embed_factor", "need embed_factor >= 1"));
    }
    side.checked_mul(embed_factor)
        .ok_or_else(|| Error::param("embed_factor", "embedding side overflows"))
}

/// 1 if the centre site of a box of side `embed_factor·n` is open and in
/// that box's largest cluster, else 0.
pub fn sample_theta_indicator(
    rng: &mut RngSubstream,
    dim: usize,
    side: usize,
    embed_factor: usize,
    p: f64,
) -> Result<bool> {
    let m = embed_side(side, embed_factor)?;
    let config = sample_lattice(rng, dim, m, p)?;
    let labeling = label_clusters(&config);
    let centre = config.index(&vec![m / 2; dim]).expect("centre in range");
    Ok(labeling.label(centre).is_some() && labeling.label(centre) == labeling.largest())
}

/// Finite-volume proxy for `θ(p)`.
pub fn estimate_theta(
    p: f64,
    dim: usize,
    side: usize,
    embed_factor: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<MonteCarloSummary> {
    check_probability(p)?;
    let label = stream_label("theta", dim, p, side as f64);
    let hits = replicate(replicas, |r| {
        let mut rng = derive_substream(master_seed, label.as_bytes(), r);
        sample_theta_indicator(&mut rng, dim, side, embed_factor, p).map(|b| if b { 1.0 } else { 0.0 })
    })?;
    summarize(&hits)
}

/// Clusters per site in one sampled box.
pub fn sample_kappa(rng: &mut RngSubstream, dim: usize, side: usize, p: f64) -> Result<f64> {
    let count = sample_cluster_count(rng, dim, side, p)?;
    Ok(count as f64 / checked_volume(dim, side)? as f64)
}

/// `cluster_count / n^d` averaged over replicas, a finite-volume estimator of `κ(p)`.
pub fn estimate_kappa(
    p: f64,
    dim: usize,
    side: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<MonteCarloSummary> {
    check_probability(p)?;
    let label = stream_label("kappa", dim, p, side as f64);
    let values = replicate(replicas, |r| {
        let mut rng = derive_substream(master_seed, label.as_bytes(), r);
        sample_kappa(&mut rng, dim, side, p)
    })?;
    summarize(&values)
}

/// A box `B(n−1)` centred in a larger sampled box that stands in for `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatticeEmbedding {
    outer: LatticeConfig,
    inner_side: usize,
    offset: usize,
}

impl LatticeEmbedding {
    pub fn new(outer: LatticeConfig, inner_side: usize) -> Result<Self> {
        if inner_side == 0 || inner_side > outer.side {
            return Err(Error::param(
                "inner_side",
                format!("need 1 <= n <= {}, got {inner_side}", outer.side),
            ));
        }
        let offset = (outer.side - inner_side) / 2;
        Ok(LatticeEmbedding {
            outer,
            inner_side,
            offset,
        })
    }

    pub fn sample(
        rng: &mut RngSubstream,
        dim: usize,
        side: usize,
        embed_factor: usize,
        p: f64,
    ) -> Result<Self> {
        let m = embed_side(side, embed_factor)?;
        Self::new(sample_lattice(rng, dim, m, p)?, side)
    }

    pub fn outer(&self) -> &LatticeConfig {
        &self.outer
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Outer index of inner site `x`.
    pub fn outer_index(&self, x: &[usize]) -> Option<usize> {
        let shifted: Vec<usize> = x.iter().map(|c| c + self.offset).collect();
        if x.iter().any(|&c| c >= self.inner_side) {
            return None;
        }
        self.outer.index(&shifted)
    }

    pub fn inner(&self) -> LatticeConfig {
        let n = self.inner_side;
        let d = self.outer.dim;
        let volume = n.pow(d as u32);
        let scratch = LatticeConfig {
            dim: d,
            side: n,
            open: Vec::new(),
        };
        let open = (0..volume)
            .map(|i| {
                let oi = self.outer_index(&scratch.coords(i)).expect("inner site");
                self.outer.open[oi]
            })
            .collect();
        LatticeConfig { dim: d, side: n, open }
    }
}

/// Clusters of `B(n−1)` alongside their embedding clusters, with each inner
/// cluster's indicated vertex.
#[derive(Debug, Clone)]
pub struct LatticeBoundary {
    inner: LatticeConfig,
    inner_labels: LatticeLabeling,
    /// Size of the embedding cluster of each inner site (0 when closed).
    embed_size: Vec<usize>,
    /// Indicated vertex (inner index) per inner cluster, if it meets the shell.
    indicated: Vec<Option<usize>>,
}

impl LatticeBoundary {
    pub fn new(embedding: &LatticeEmbedding) -> Self {
        let inner = embedding.inner();
        let inner_labels = label_clusters(&inner);
        let outer_labels = label_clusters(&embedding.outer);
        let embed_size = (0..inner.volume())
            .map(|i| {
                let oi = embedding.outer_index(&inner.coords(i)).expect("inner site");
                outer_labels.cluster_size_of(oi).unwrap_or(0)
            })
            .collect();
        let mut indicated = vec![None; inner_labels.count()];
        for i in 0..inner.volume() {
            if let Some(l) = inner_labels.label(i) {
                if indicated[l].is_none() && inner.in_shell(i) {
                    indicated[l] = Some(i);
                }
            }
        }
        LatticeBoundary {
            inner,
            inner_labels,
            embed_size,
            indicated,
        }
    }

    pub fn inner(&self) -> &LatticeConfig {
        &self.inner
    }

    pub fn inner_labels(&self) -> &LatticeLabeling {
        &self.inner_labels
    }

    /// `ξ(x, B(n−1)) = 1 − |C_x(B(n−1))| / |C_x|` at the indicated vertex of
    /// `C_x(B(n−1))`, 0 elsewhere in the shell.
    pub fn xi(&self, x: &[usize]) -> Result<Ratio<i64>> {
        let i = self
            .inner
            .index(x)
            .filter(|&i| self.inner.in_shell(i))
            .ok_or_else(|| Error::SiteOutsideShell(x.to_vec()))?;
        Ok(self.xi_at(i))
    }

    fn xi_at(&self, i: usize) -> Ratio<i64> {
        match self.inner_labels.label(i) {
            Some(l) if self.indicated[l] == Some(i) => {
                let local = self.inner_labels.sizes()[l] as i64;
                Ratio::one() - Ratio::new(local, self.embed_size[i] as i64)
            }
            _ => Ratio::zero(),
        }
    }

    /// Both sides of the cluster-count decomposition:
    /// `(Σ_{x∈B} 1/|C_x(B)|, Σ_{x∈B} 1/|C_x|, Σ_{x∈L} ξ(x, B))`, with
    /// closed sites contributing 0.
    pub fn count_decomposition(&self) -> (BigRational, BigRational, BigRational) {
        let reciprocal_sum = |sizes: &mut dyn Iterator<Item = usize>| -> BigRational {
            let mut by_size: BTreeMap<usize, i64> = BTreeMap::new();
            for k in sizes {
                *by_size.entry(k).or_default() += 1;
            }
            by_size
                .into_iter()
                .map(|(k, m)| BigRational::new(BigInt::from(m), BigInt::from(k)))
                .fold(BigRational::zero(), |a, b| a + b)
        };
        let volume = self.inner.volume();
        let local = reciprocal_sum(&mut (0..volume).filter_map(|i| self.inner_labels.cluster_size_of(i)));
        let bulk = reciprocal_sum(&mut (0..volume).filter(|&i| self.inner.is_open(i)).map(|i| self.embed_size[i]));
        let shell = (0..volume)
            .filter(|&i| self.inner.in_shell(i))
            .map(|i| {
                let r = self.xi_at(i);
                BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
            })
            .fold(BigRational::zero(), |a, b| a + b);
        (local, bulk, shell)
    }
}

/// `ξ(x, B(n−1))` for one shell site.
pub fn lattice_boundary_xi(x: &[usize], embedding: &LatticeEmbedding) -> Result<Ratio<i64>> {
    LatticeBoundary::new(embedding).xi(x)
}
