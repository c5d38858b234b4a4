//! Largest-component statistics of the Poisson Boolean model `G(H_{λ,s}; 1)`
//! and the boundary decomposition of the infinite cluster inside a box.
//!
//! The infinite cluster is approximated by the largest component of a
//! larger box `B(S)` with the inner box `B(s)` centred in it. Restricting that
//! giant to the inner box splits it into pieces `C_1, C_2, …, C_M` (largest
//! first). Every piece other than `C_1` reaches the rest of the giant only
//! through edges leaving the inner box, so it owns at least one shell point
//! with a direct outside edge; the one closest to `∂B(s)` is its out-connect
//! point. `ξ(R)` sums `|C_i|`, `i ≥ 2`, over pieces whose out-connect point
//! lies in `R`, and `D(R)` is the largest l∞ diameter among those pieces.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{replicate, summarize, MonteCarloSummary};
use crate::geometric_graph::{build_graph, component_orders, components, extent_of};
use crate::point_process::{
    derive_substream, sample_binomial_cube, sample_poisson_box, stream_label, BoxSpec,
    PointCloud, RngSubstream,
};
use crate::union_find::UnionFind;

/// Connection radius of the Boolean model.
const RADIUS: f64 = 1.0;
/// Width of the shell `L(s) = B(s) \ [1, s−1]^d`.
pub const SHELL_WIDTH: f64 = 1.0;
/// Giant fraction of all embedding points below which a run is flagged subcritical.
pub const SUBCRITICAL_GIANT_FRACTION: f64 = 0.1;

/// Inner box `B(s)` centred in an embedding box `B(S)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingPlan {
    pub dim: usize,
    pub inner_side: f64,
    pub embed_side: f64,
}

impl EmbeddingPlan {
    pub fn new(dim: usize, inner_side: f64, embed_side: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::param("dim", format!("need dim >= 2, got {dim}")));
        }
        if !(inner_side > 0.0) || !inner_side.is_finite() {
            return Err(Error::param("inner_side", format!("need s > 0, got {inner_side}")));
        }
        if !(embed_side > inner_side) || !embed_side.is_finite() {
            return Err(Error::param(
                "embed_side",
                format!("need S > s = {inner_side}, got {embed_side}"),
            ));
        }
        Ok(EmbeddingPlan {
            dim,
            inner_side,
            embed_side,
        })
    }

    /// `S = 2s + 8`.
    pub fn standard(dim: usize, inner_side: f64) -> Result<Self> {
        Self::with_factor(dim, inner_side, 2.0)
    }

    /// `S = factor·s + 8`; `factor >= 2` keeps a margin of at least
    /// `max(4, s/2)` on every side.
    pub fn with_factor(dim: usize, inner_side: f64, factor: f64) -> Result<Self> {
        if !(factor >= 1.0) {
            return Err(Error::param("embed_factor", format!("need factor >= 1, got {factor}")));
        }
        Self::new(dim, inner_side, factor * inner_side + 8.0)
    }

    pub fn margin(&self) -> f64 {
        0.5 * (self.embed_side - self.inner_side)
    }

    pub fn embed_box(&self) -> BoxSpec {
        BoxSpec::new(self.dim, self.embed_side).expect("validated plan")
    }

    pub fn inner_box(&self) -> BoxSpec {
        BoxSpec::with_origin(vec![self.margin(); self.dim], self.inner_side).expect("validated plan")
    }
}

/// Closed axis-aligned box in inner-box coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl RegionSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::param("region", "lo and hi must have the same nonzero length"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::param("region", "need lo <= hi on every axis"));
        }
        Ok(RegionSpec { lo, hi })
    }

    /// The whole inner box `[0, s]^d`.
    pub fn whole(dim: usize, side: f64) -> Self {
        RegionSpec {
            lo: vec![0.0; dim],
            hi: vec![side; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&x, (&lo, &hi))| x >= lo && x <= hi)
    }

    fn within(&self, side: f64) -> bool {
        self.lo.iter().all(|&x| x >= 0.0) && self.hi.iter().all(|&x| x <= side)
    }
}

/// Unit box centred on the face `x_1 = 0`: `[0,1] × [s/2 − 1/2, s/2 + 1/2]^{d−1}`.
pub fn shell_unit_box(dim: usize, side: f64) -> RegionSpec {
    let mut lo = vec![0.5 * side - 0.5; dim];
    let mut hi = vec![0.5 * side + 0.5; dim];
    lo[0] = 0.0;
    hi[0] = SHELL_WIDTH;
    RegionSpec { lo, hi }
}

/// `R_i = [0,1] × [0,s/2]^{d−1−i} × [1,s/2]^i`.
pub fn corner_region(dim: usize, side: f64, i: usize) -> RegionSpec {
    assert!(i < dim);
    let half = 0.5 * side;
    let mut lo = vec![0.0; dim];
    let mut hi = vec![half; dim];
    hi[0] = SHELL_WIDTH;
    for v in &mut lo[dim - i..] {
        *v = SHELL_WIDTH;
    }
    RegionSpec { lo, hi }
}

/// The `2^d` half-side boxes tiling `[0, s]^d`.
pub fn half_side_cells(dim: usize, side: f64) -> Vec<RegionSpec> {
    let half = 0.5 * side;
    (0..1usize << dim)
        .map(|mask| {
            let lo: Vec<f64> = (0..dim)
                .map(|j| if mask >> j & 1 == 1 { half } else { 0.0 })
                .collect();
            let hi = lo.iter().map(|x| x + half).collect();
            RegionSpec { lo, hi }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutConnect {
    /// Index into the embedding cloud.
    pub point: usize,
    /// Position in inner-box coordinates.
    pub position: Vec<f64>,
}

/// One component `C_i` of the giant restricted to the inner box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestrictedComponent {
    /// Embedding-cloud indices, ascending.
    pub members: Vec<usize>,
    /// l∞ diameter.
    pub extent: f64,
    /// Present for every component except `C_1`.
    pub out_connect: Option<OutConnect>,
}

impl RestrictedComponent {
    pub fn order(&self) -> usize {
        self.members.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryDecomposition {
    pub plan: EmbeddingPlan,
    /// Embedding-cloud indices of the giant, ascending.
    pub giant: Vec<usize>,
    /// `C_1, …, C_M` by decreasing order, ties by smallest member.
    pub restricted: Vec<RestrictedComponent>,
}

impl BoundaryDecomposition {
    /// `|giant ∩ B(s)|`.
    pub fn restricted_mass(&self) -> usize {
        self.restricted.iter().map(RestrictedComponent::order).sum()
    }

    /// `|C_1|`, 0 when the giant misses the inner box.
    pub fn c1_order(&self) -> usize {
        self.restricted.first().map_or(0, RestrictedComponent::order)
    }

    /// `C_2, …, C_M`.
    pub fn defects(&self) -> &[RestrictedComponent] {
        self.restricted.get(1..).unwrap_or(&[])
    }
}

/// Everything derived from one sampled embedding configuration.
#[derive(Debug, Clone)]
pub struct EmbeddedReplica {
    pub decomposition: BoundaryDecomposition,
    pub total_points: usize,
    pub inner_points: usize,
    /// `L_1` of the graph on the inner-box points alone.
    pub inner_l1: usize,
}

impl EmbeddedReplica {
    pub fn giant_fraction(&self) -> f64 {
        if self.total_points == 0 {
            0.0
        } else {
            self.decomposition.giant.len() as f64 / self.total_points as f64
        }
    }
}

fn distance_to_boundary(p: &[f64], side: f64) -> f64 {
    p.iter().fold(f64::INFINITY, |m, &x| m.min(x).min(side - x))
}

/// Decompose a given embedding configuration. `cloud` must live in
/// `plan.embed_box()`.
pub fn analyze_embedded(cloud: PointCloud, plan: &EmbeddingPlan) -> Result<EmbeddedReplica> {
    if cloud.bbox() != &plan.embed_box() {
        return Err(Error::param("cloud", "cloud box does not match the embedding plan"));
    }
    let n = cloud.len();
    let graph = build_graph(cloud, RADIUS)?;
    let labeling = components(&graph);
    let giant_id = labeling.largest();
    let is_giant = |i: usize| giant_id == Some(labeling.label(i));

    let inner_box = plan.inner_box();
    let inner: Vec<bool> = graph.cloud().iter().map(|p| inner_box.contains(p)).collect();

    // Inner-graph components; those made of giant points are exactly the
    // restricted pieces, since any neighbour of a giant point is giant.
    let mut inner_uf = UnionFind::new(n);
    let mut outside_edge = vec![false; n];
    graph.for_each_edge(|i, j| match (inner[i], inner[j]) {
        (true, true) => {
            inner_uf.union(i, j);
        }
        (true, false) => outside_edge[i] = true,
        (false, true) => outside_edge[j] = true,
        (false, false) => {}
    });

    let (_, inner_orders) = inner_uf.dense_labels(|i| inner[i]);
    let inner_l1 = inner_orders.iter().copied().max().unwrap_or(0);
    let inner_points = inner.iter().filter(|&&b| b).count();

    let (piece_labels, piece_orders) = inner_uf.dense_labels(|i| inner[i] && is_giant(i));
    let mut pieces: Vec<Vec<usize>> = piece_orders.iter().map(|&k| Vec::with_capacity(k)).collect();
    for (i, l) in piece_labels.iter().enumerate() {
        if let Some(l) = l {
            pieces[*l as usize].push(i);
        }
    }
    // labels follow smallest member, so a stable sort by order breaks ties by it
    pieces.sort_by_key(|p| std::cmp::Reverse(p.len()));

    let s = plan.inner_side;
    let offset = plan.margin();
    let to_inner = |i: usize| -> Vec<f64> { graph.cloud().point(i).iter().map(|x| x - offset).collect() };

    let mut restricted = Vec::with_capacity(pieces.len());
    for (rank, members) in pieces.into_iter().enumerate() {
        let extent = extent_of(graph.cloud(), members.iter().copied());
        let out_connect = if rank == 0 {
            None
        } else {
            let best = members
                .iter()
                .copied()
                .filter(|&i| outside_edge[i])
                .map(|i| {
                    let pos = to_inner(i);
                    (distance_to_boundary(&pos, s), pos, i)
                })
                .min_by(|a, b| {
                    a.0.total_cmp(&b.0).then_with(|| {
                        a.1.iter()
                            .zip(&b.1)
                            .map(|(x, y)| x.total_cmp(y))
                            .find(|o| o.is_ne())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    })
                });
            let Some((dist, position, point)) = best else {
                return Err(Error::Invariant(format!(
                    "restricted component C_{} of order {} has no edge leaving the inner box",
                    rank + 1,
                    members.len()
                )));
            };
            if dist > SHELL_WIDTH {
                return Err(Error::Invariant(format!(
                    "out-connect point of C_{} lies at depth {dist} outside the shell",
                    rank + 1
                )));
            }
            Some(OutConnect { point, position })
        };
        restricted.push(RestrictedComponent {
            members,
            extent,
            out_connect,
        });
    }

    let giant = match giant_id {
        Some(g) => (0..n).filter(|&i| labeling.label(i) == g).collect(),
        None => Vec::new(),
    };

    Ok(EmbeddedReplica {
        decomposition: BoundaryDecomposition {
            plan: *plan,
            giant,
            restricted,
        },
        total_points: n,
        inner_points,
        inner_l1,
    })
}

/// Sample `H_λ ∩ B(S)` and decompose it.
pub fn sample_embedded(
    intensity: f64,
    plan: &EmbeddingPlan,
    rng: &mut RngSubstream,
) -> Result<EmbeddedReplica> {
    let cloud = sample_poisson_box(rng, intensity, &plan.embed_box())?;
    analyze_embedded(cloud, plan)
}

pub fn decompose_boundary(
    intensity: f64,
    plan: &EmbeddingPlan,
    rng: &mut RngSubstream,
) -> Result<BoundaryDecomposition> {
    Ok(sample_embedded(intensity, plan, rng)?.decomposition)
}

fn check_region(decomp: &BoundaryDecomposition, region: &RegionSpec) -> Result<()> {
    let s = decomp.plan.inner_side;
    if region.dim() != decomp.plan.dim || !region.within(s) {
        return Err(Error::RegionOutsideBox { side: s });
    }
    Ok(())
}

fn defects_in<'a>(
    decomp: &'a BoundaryDecomposition,
    region: &'a RegionSpec,
) -> impl Iterator<Item = &'a RestrictedComponent> + 'a {
    decomp.defects().iter().filter(move |c| {
        c.out_connect
            .as_ref()
            .is_some_and(|oc| region.contains(&oc.position))
    })
}

/// `ξ(R)`: total order of the pieces `C_i`, `i ≥ 2`, whose out-connect point lies in `R`.
pub fn xi(decomp: &BoundaryDecomposition, region: &RegionSpec) -> Result<usize> {
    check_region(decomp, region)?;
    Ok(defects_in(decomp, region).map(RestrictedComponent::order).sum())
}

/// `D(R)`: largest l∞ diameter among the pieces counted by `ξ(R)`, 0 if none.
pub fn defect_diameter(decomp: &BoundaryDecomposition, region: &RegionSpec) -> Result<f64> {
    check_region(decomp, region)?;
    Ok(defects_in(decomp, region).map(|c| c.extent).fold(0.0, f64::max))
}

/// One draw of `L_1(G(H_{λ,s}; 1))`.
pub fn sample_l1(intensity: f64, side: f64, dim: usize, rng: &mut RngSubstream) -> Result<usize> {
    let cloud = sample_poisson_box(rng, intensity, &BoxSpec::new(dim, side)?)?;
    let graph = build_graph(cloud, RADIUS)?;
    Ok(component_orders(&components(&graph), 1))
}

/// Radius `(n/λ)^{−1/d}` of the binomial model.
pub fn binomial_radius(n: usize, intensity: f64, dim: usize) -> f64 {
    (n as f64 / intensity).powf(-1.0 / dim as f64)
}

/// One draw of `L_1(G(X_n; (n/λ)^{−1/d}))` on the unit cube.
pub fn sample_l1_binomial(
    n: usize,
    intensity: f64,
    dim: usize,
    rng: &mut RngSubstream,
) -> Result<usize> {
    if !(intensity > 0.0) {
        return Err(Error::param("intensity", format!("need intensity > 0, got {intensity}")));
    }
    let cloud = sample_binomial_cube(rng, n, dim)?;
    let graph = build_graph(cloud, binomial_radius(n, intensity, dim))?;
    Ok(component_orders(&components(&graph), 1))
}

/// Binomial point count matched to the Poisson mean `λ s^d`.
pub fn matched_binomial_count(intensity: f64, side: f64, dim: usize) -> usize {
    (intensity * side.powi(dim as i32)).ceil() as usize
}

pub fn l1_samples(
    intensity: f64,
    side: f64,
    dim: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let label = stream_label("l1-poisson", dim, intensity, side);
    replicate(replicas, |r| {
        let mut rng = derive_substream(master_seed, label.as_bytes(), r);
        sample_l1(intensity, side, dim, &mut rng).map(|v| v as f64)
    })
}

/// Binomial draws at `n = ⌈λ s^d⌉`, labelled by the matching side.
pub fn l1_binomial_samples(
    intensity: f64,
    side: f64,
    dim: usize,
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let n = matched_binomial_count(intensity, side, dim);
    let label = stream_label("l1-binomial", dim, intensity, side);
    replicate(replicas, |r| {
        let mut rng = derive_substream(master_seed, label.as_bytes(), r);
        sample_l1_binomial(n, intensity, dim, &mut rng).map(|v| v as f64)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PInfinityEstimate {
    /// Mean ratio clamped to `[0, 1]`.
    pub estimate: f64,
    pub summary: MonteCarloSummary,
    pub mean_giant_fraction: f64,
    pub subcritical: bool,
}

/// `|giant ∩ B(s)| / (λ s^d)` for one replica.
pub fn p_infinity_ratio(replica: &EmbeddedReplica, intensity: f64) -> f64 {
    let plan = &replica.decomposition.plan;
    replica.decomposition.restricted_mass() as f64
        / (intensity * plan.inner_side.powi(plan.dim as i32))
}

/// Palm-identity estimator of `p∞(λ)` from the embedded giant.
pub fn estimate_p_infinity(
    intensity: f64,
    plan: &EmbeddingPlan,
    replicas: usize,
    master_seed: u64,
) -> Result<PInfinityEstimate> {
    let label = stream_label("p-infinity", plan.dim, intensity, plan.inner_side);
    let draws = replicate(replicas, |r| {
        let mut rng = derive_substream(master_seed, label.as_bytes(), r);
        let rep = sample_embedded(intensity, plan, &mut rng)?;
        Ok((p_infinity_ratio(&rep, intensity), rep.giant_fraction()))
    })?;
    let ratios: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let summary = summarize(&ratios)?;
    let mean_giant_fraction = draws.iter().map(|d| d.1).sum::<f64>() / draws.len() as f64;
    let subcritical = mean_giant_fraction < SUBCRITICAL_GIANT_FRACTION;
    if subcritical {
        warn!(
            "embedding giant holds {:.1}% of points at lambda={intensity}; p_infinity estimate is unreliable",
            100.0 * mean_giant_fraction
        );
    }
    Ok(PInfinityEstimate {
        estimate: summary.mean.clamp(0.0, 1.0),
        summary,
        mean_giant_fraction,
        subcritical,
    })
}

/// Per-replica values of the corner-region identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiCorners {
    /// `ξ(B(s))`.
    pub total: usize,
    /// `2^d Σ_i ξ(R_i)`.
    pub corner_sum: usize,
    /// `Σ` of `ξ` over the `2^d` half-side cells.
    pub cell_sum: usize,
}

pub fn xi_corners(decomp: &BoundaryDecomposition) -> Result<XiCorners> {
    let (d, s) = (decomp.plan.dim, decomp.plan.inner_side);
    if !(2..=3).contains(&d) {
        return Err(Error::UnsupportedDimension(d));
    }
    let total = xi(decomp, &RegionSpec::whole(d, s))?;
    let mut corner_sum = 0;
    for i in 0..d {
        corner_sum += xi(decomp, &corner_region(d, s, i))?;
    }
    let mut cell_sum = 0;
    for cell in half_side_cells(d, s) {
        cell_sum += xi(decomp, &cell)?;
    }
    Ok(XiCorners {
        total,
        corner_sum: corner_sum << d,
        cell_sum,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiSymmetryReport {
    pub xi_total: MonteCarloSummary,
    pub corner_sum: MonteCarloSummary,
    /// `2^d Σ ξ(R_i) − ξ(B(s))` per replica.
    pub difference: MonteCarloSummary,
    /// Replicas where `ξ(B(s))` differs from the sum over half-side cells.
    pub additivity_failures: usize,
    pub replicas: usize,
}

pub fn xi_symmetry_decomposition(
    intensity: f64,
    plan: &EmbeddingPlan,
    replicas: usize,
    master_seed: u64,
) -> Result<XiSymmetryReport> {
    if !(2..=3).contains(&plan.dim) {
        return Err(Error::UnsupportedDimension(plan.dim));
    }
    let label = stream_label("xi-symmetry", plan.dim, intensity, plan.inner_side);
    let rows = replicate(replicas, |r| {
        let mut rng = derive_substream(master_seed, label.as_bytes(), r);
        xi_corners(&decompose_boundary(intensity, plan, &mut rng)?)
    })?;
    let col = |f: fn(&XiCorners) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
    Ok(XiSymmetryReport {
        xi_total: summarize(&col(|x| x.total as f64))?,
        corner_sum: summarize(&col(|x| x.corner_sum as f64))?,
        difference: summarize(&col(|x| x.corner_sum as f64 - x.total as f64))?,
        additivity_failures: rows.iter().filter(|x| x.total != x.cell_sum).count(),
        replicas,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Paired `L_1 − |C_1|`.
    pub gap: MonteCarloSummary,
    pub l1: MonteCarloSummary,
    pub c1: MonteCarloSummary,
    /// Replicas with `L_1 < |C_1|`; always 0.
    pub violations: usize,
}

/// Paired `(L_1 of the inner graph, |C_1|)` on one configuration.
pub fn gap_pair(replica: &EmbeddedReplica) -> (usize, usize) {
    (replica.inner_l1, replica.decomposition.c1_order())
}

pub fn gap_l1_vs_c1(
    intensity: f64,
    plan: &EmbeddingPlan,
    replicas: usize,
    master_seed: u64,
) -> Result<GapReport> {
    let label = stream_label("gap-l1-c1", plan.dim, intensity, plan.inner_side);
    let pairs = replicate(replicas, |r| {
        let mut rng = derive_substream(master_seed, label.as_bytes(), r);
        Ok(gap_pair(&sample_embedded(intensity, plan, &mut rng)?))
    })?;
    let l1: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
    let c1: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
    let gap: Vec<f64> = pairs.iter().map(|p| p.0 as f64 - p.1 as f64).collect();
    Ok(GapReport {
        gap: summarize(&gap)?,
        l1: summarize(&l1)?,
        c1: summarize(&c1)?,
        violations: pairs.iter().filter(|p| p.0 < p.1).count(),
    })
}

/// `D(R)` across replicas.
pub fn defect_diameter_samples(
    intensity: f64,
    plan: &EmbeddingPlan,
    region: &RegionSpec,
    replicas: usize,
    master_seed: u64,
) -> Result<Vec<f64>> {
    let label = stream_label("tail", plan.dim, intensity, plan.inner_side);
    replicate(replicas, |r| {
        let mut rng = derive_substream(master_seed, label.as_bytes(), r);
        defect_diameter(&decompose_boundary(intensity, plan, &mut rng)?, region)
    })
}

/// l∞ diameter of the component `V_x` of the centre point `x` in
/// `G(H_{λ,s} ∪ {x}; 1)`.
pub fn sample_center_extent(
    intensity: f64,
    side: f64,
    dim: usize,
    rng: &mut RngSubstream,
) -> Result<f64> {
    let mut cloud = sample_poisson_box(rng, intensity, &BoxSpec::new(dim, side)?)?;
    cloud.push(&vec![0.5 * side; dim])?;
    let x = cloud.len() - 1;
    let graph = build_graph(cloud, RADIUS)?;
    let labeling = components(&graph);
    Ok(extent_of(graph.cloud(), labeling.members(labeling.label(x))))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Chain across the embedding box at height 10 plus a 3-point branch that
    /// reaches the chain only through points left of the inner box.
    fn branch_fixture() -> (EmbeddingPlan, PointCloud) {
        let plan = EmbeddingPlan::new(2, 12.0, 20.0).unwrap(); // inner [4, 16]^2
        let mut pts: Vec<[f64; 2]> = (0..=40).map(|k| [0.5 * k as f64, 10.0]).collect();
        pts.push([3.5, 9.1]); // 41: outside, on the chain
        pts.push([3.7, 8.5]); // 42: outside, bridges to the branch
        pts.push([4.2, 8.3]); // 43: branch, depth 0.2
        pts.push([4.4, 7.4]); // 44
        pts.push([4.6, 6.5]); // 45
        (plan, PointCloud::from_points(plan.embed_box(), &pts).unwrap())
    }

    #[test]
    fn plan_geometry() {
        let p = EmbeddingPlan::standard(2, 20.0).unwrap();
        assert_eq!(p.embed_side, 48.0);
        assert_eq!(p.margin(), 14.0);
        assert!(EmbeddingPlan::new(2, 10.0, 10.0).is_err());
        assert!(EmbeddingPlan::new(1, 10.0, 20.0).is_err());
        assert!(RegionSpec::new(vec![1.0, 0.0], vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn branch_attached_outside_is_a_defect() {
        let (plan, cloud) = branch_fixture();
        let rep = analyze_embedded(cloud, &plan).unwrap();
        let dec = &rep.decomposition;
        assert_eq!(dec.giant.len(), 46);
        // inner chain points: x in [4, 16] -> k = 8..=32
        assert_eq!(dec.restricted[0].order(), 25);
        assert_eq!(dec.restricted.len(), 2);
        let branch = &dec.restricted[1];
        assert_eq!(branch.order(), 3);
        let oc = branch.out_connect.as_ref().unwrap();
        assert_eq!(oc.point, 43);
        assert!((oc.position[0] - 0.2).abs() < 1e-12);
        assert!((branch.extent - 1.8).abs() < 1e-12);

        let whole = RegionSpec::whole(2, 12.0);
        assert_eq!(xi(dec, &whole).unwrap(), 3);
        assert!((defect_diameter(dec, &whole).unwrap() - 1.8).abs() < 1e-12);
        let interior = RegionSpec::new(vec![1.0, 1.0], vec![11.0, 11.0]).unwrap();
        assert_eq!(xi(dec, &interior).unwrap(), 0);
        assert_eq!(defect_diameter(dec, &interior).unwrap(), 0.0);
        let outside = RegionSpec::new(vec![0.0, 0.0], vec![13.0, 1.0]).unwrap();
        assert!(matches!(xi(dec, &outside), Err(Error::RegionOutsideBox { .. })));
        assert_eq!(rep.inner_l1, 25);
        assert_eq!(gap_pair(&rep), (25, 25));
    }

    #[test]
    fn out_connect_prefers_point_nearest_boundary() {
        // Branch with two outside contacts; the one nearer ∂B(s) wins.
        let plan = EmbeddingPlan::new(2, 12.0, 20.0).unwrap();
        let mut pts: Vec<[f64; 2]> = (0..=40).map(|k| [0.5 * k as f64, 10.0]).collect();
        pts.push([3.6, 9.2]); // 41: outside, on the chain
        pts.push([4.4, 8.7]); // 42: depth 0.4, touches 41
        pts.push([4.2, 7.9]); // 43: depth 0.2, touches 44
        pts.push([3.5, 7.6]); // 44: outside, giant only through 43
        let cloud = PointCloud::from_points(plan.embed_box(), &pts).unwrap();
        let rep = analyze_embedded(cloud, &plan).unwrap();
        let dec = rep.decomposition;
        let branch = &dec.restricted[1];
        assert_eq!(branch.members, vec![42, 43]);
        assert_eq!(branch.out_connect.as_ref().unwrap().point, 43);
    }

    #[test]
    fn connected_restriction_has_no_defects() {
        let plan = EmbeddingPlan::new(2, 12.0, 20.0).unwrap();
        let pts: Vec<[f64; 2]> = (0..=40).map(|k| [0.5 * k as f64, 10.0]).collect();
        let cloud = PointCloud::from_points(plan.embed_box(), &pts).unwrap();
        let dec = analyze_embedded(cloud, &plan).unwrap().decomposition;
        assert_eq!(dec.restricted.len(), 1);
        assert!(dec.restricted[0].out_connect.is_none());
        assert_eq!(xi(&dec, &RegionSpec::whole(2, 12.0)).unwrap(), 0);
    }

    #[test]
    fn empty_embedding() {
        let plan = EmbeddingPlan::new(2, 4.0, 12.0).unwrap();
        let rep = analyze_embedded(PointCloud::empty(plan.embed_box()), &plan).unwrap();
        assert!(rep.decomposition.restricted.is_empty());
        assert_eq!(rep.inner_l1, 0);
        assert_eq!(rep.giant_fraction(), 0.0);
    }

    #[test]
    fn corner_regions_match_definition() {
        let r0 = corner_region(3, 20.0, 0);
        assert_eq!(r0.lo, vec![0.0, 0.0, 0.0]);
        assert_eq!(r0.hi, vec![1.0, 10.0, 10.0]);
        let r2 = corner_region(3, 20.0, 2);
        assert_eq!(r2.lo, vec![0.0, 1.0, 1.0]);
        assert_eq!(r2.hi, vec![1.0, 10.0, 10.0]);
        assert_eq!(half_side_cells(2, 20.0).len(), 4);
    }

    #[test]
    fn tiny_box_l1_at_most_one() {
        // λ s^2 = 0.01
        let side = 0.1;
        let mut big = 0;
        for r in 0..2000 {
            let mut rng = derive_substream(5, b"tiny", r);
            if sample_l1(1.0, side, 2, &mut rng).unwrap() > 1 {
                big += 1;
            }
        }
        assert!(big <= 20);
    }

    #[test]
    fn binomial_single_point() {
        let mut rng = derive_substream(5, b"one", 0);
        assert_eq!(sample_l1_binomial(1, 3.0, 2, &mut rng).unwrap(), 1);
        assert_eq!(matched_binomial_count(2.0, 40.0, 2), 3200);
    }
}
