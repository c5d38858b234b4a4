//! The geometric graph `G(X; r)`: points joined when their Euclidean distance
//! is at most `r`, realised through a cell list rather than an edge list.

use crate::error::{Error, Result};
use crate::point_process::PointCloud;
use crate::union_find::UnionFind;

/// Upper bound on grid cells relative to the point count. Beyond it cells are
/// enlarged (never shrunk below `r`), which keeps the 3^d stencil correct.
const MAX_CELLS_PER_POINT: usize = 8;
const MIN_CELL_BUDGET: usize = 1 << 12;

/// Dense cell list over the cloud's bounding box in CSR layout.
#[derive(Debug, Clone)]
pub struct CellGrid {
    cell_side: f64,
    per_axis: usize,
    strides: Vec<usize>,
    start: Vec<u32>,
    members: Vec<u32>,
    stencil: Vec<Vec<isize>>,
}

impl CellGrid {
    fn build(cloud: &PointCloud, radius: f64) -> Self {
        let d = cloud.dim();
        let side = cloud.bbox().side();
        let budget = (cloud.len() * MAX_CELLS_PER_POINT).max(MIN_CELL_BUDGET);

        let mut per_axis = ((side / radius).ceil() as usize).max(1);
        let mut cell_side = radius;
        if per_axis.checked_pow(d as u32).is_none_or(|c| c > budget) {
            per_axis = ((budget as f64).powf(1.0 / d as f64).floor() as usize).max(1);
            cell_side = (side / per_axis as f64).max(radius);
        }

        let mut strides = vec![1usize; d];
        for j in (0..d.saturating_sub(1)).rev() {
            strides[j] = strides[j + 1] * per_axis;
        }
        let n_cells = strides[0] * per_axis;

        let origin = cloud.bbox().origin();
        let cell_of = |p: &[f64]| -> usize {
            p.iter()
                .zip(origin)
                .zip(&strides)
                .map(|((&x, &o), &stride)| {
                    let k = (((x - o) / cell_side).floor().max(0.0) as usize).min(per_axis - 1);
                    k * stride
                })
                .sum()
        };

        let cells: Vec<usize> = cloud.iter().map(cell_of).collect();
        let mut start = vec![0u32; n_cells + 1];
        for &c in &cells {
            start[c + 1] += 1;
        }
        for c in 0..n_cells {
            start[c + 1] += start[c];
        }
        let mut fill = start.clone();
        let mut members = vec![0u32; cells.len()];
        for (i, &c) in cells.iter().enumerate() {
            members[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }

        let mut stencil = vec![Vec::new()];
        for _ in 0..d {
            stencil = stencil
                .into_iter()
                .flat_map(|v: Vec<isize>| {
                    (-1..=1).map(move |o| {
                        let mut w = v.clone();
                        w.push(o);
                        w
                    })
                })
                .collect();
        }

        CellGrid {
            cell_side,
            per_axis,
            strides,
            start,
            members,
            stencil,
        }
    }

    pub fn cell_side(&self) -> f64 {
        self.cell_side
    }

    pub fn cells_per_axis(&self) -> usize {
        self.per_axis
    }

    fn cell_members(&self, c: usize) -> &[u32] {
        &self.members[self.start[c] as usize..self.start[c + 1] as usize]
    }

    fn multi_index(&self, mut c: usize) -> Vec<usize> {
        self.strides
            .iter()
            .map(|&s| {
                let k = c / s;
                c %= s;
                k
            })
            .collect()
    }

    /// Flat indices of the in-range cells around `c` (including `c`).
    fn neighbor_cells(&self, c: usize, out: &mut Vec<usize>) {
        out.clear();
        let m = self.multi_index(c);
        'stencil: for off in &self.stencil {
            let mut flat = 0usize;
            for ((&k, &o), &s) in m.iter().zip(off).zip(&self.strides) {
                let k = k as isize + o;
                if k < 0 || k >= self.per_axis as isize {
                    continue 'stencil;
                }
                flat += k as usize * s;
            }
            out.push(flat);
        }
    }

    fn n_cells(&self) -> usize {
        self.start.len() - 1
    }
}

/// `G(X; r)` with adjacency answered by the cell grid.
#[derive(Debug, Clone)]
pub struct GeometricGraph {
    cloud: PointCloud,
    radius: f64,
    radius_sq: f64,
    grid: CellGrid,
}

/// Build `G(cloud; radius)`. Pairs at distance exactly `radius` are edges.
pub fn build_graph(cloud: PointCloud, radius: f64) -> Result<GeometricGraph> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::param("radius", format!("need radius > 0, got {radius}")));
    }
    let grid = CellGrid::build(&cloud, radius);
    Ok(GeometricGraph {
        cloud,
        radius,
        radius_sq: radius * radius,
        grid,
    })
}

impl GeometricGraph {
    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn grid(&self) -> &CellGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    #[inline]
    fn adjacent(&self, i: usize, j: usize) -> bool {
        let (a, b) = (self.cloud.point(i), self.cloud.point(j));
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        d2 <= self.radius_sq
    }

    /// Calls `f(i, j)` once per edge with `i < j`.
    pub fn for_each_edge(&self, mut f: impl FnMut(usize, usize)) {
        let mut around = Vec::with_capacity(self.grid.stencil.len());
        for c in 0..self.grid.n_cells() {
            let here = self.grid.cell_members(c);
            if here.is_empty() {
                continue;
            }
            self.grid.neighbor_cells(c, &mut around);
            for &nc in &around {
                if nc < c {
                    continue;
                }
                let there = self.grid.cell_members(nc);
                for (a, &i) in here.iter().enumerate() {
                    let others = if nc == c { &there[a + 1..] } else { there };
                    for &j in others {
                        let (i, j) = (i as usize, j as usize);
                        if self.adjacent(i, j) {
                            f(i.min(j), i.max(j));
                        }
                    }
                }
            }
        }
    }

    /// Sorted edge list. Intended for small graphs and tests.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e = Vec::new();
        self.for_each_edge(|i, j| e.push((i, j)));
        e.sort_unstable();
        e
    }

    /// Indices adjacent to `i`, ascending.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        let p = self.cloud.point(i);
        let bbox = self.cloud.bbox();
        let c: usize = p
            .iter()
            .zip(bbox.origin())
            .zip(&self.grid.strides)
            .map(|((&x, &o), &s)| {
                let k = (((x - o) / self.grid.cell_side).floor().max(0.0) as usize)
                    .min(self.grid.per_axis - 1);
                k * s
            })
            .sum();
        let mut around = Vec::new();
        self.grid.neighbor_cells(c, &mut around);
        let mut out: Vec<usize> = around
            .iter()
            .flat_map(|&nc| self.grid.cell_members(nc).iter().map(|&j| j as usize))
            .filter(|&j| j != i && self.adjacent(i, j))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Connected components of a graph, ranked by decreasing order.
///
/// Component ids are assigned in order of each component's smallest member
/// index, so ranking ties are broken by smallest member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    label: Vec<u32>,
    orders: Vec<usize>,
    ranking: Vec<usize>,
}

impl ComponentLabeling {
    pub(crate) fn from_union_find(uf: &mut UnionFind) -> Self {
        let (labels, orders) = uf.dense_labels(|_| true);
        let label = labels.into_iter().map(|l| l.expect("all kept")).collect();
        let mut ranking: Vec<usize> = (0..orders.len()).collect();
        ranking.sort_by(|&a, &b| orders[b].cmp(&orders[a]).then(a.cmp(&b)));
        ComponentLabeling {
            label,
            orders,
            ranking,
        }
    }

    pub fn label(&self, point: usize) -> usize {
        self.label[point] as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.label
    }

    pub fn count(&self) -> usize {
        self.orders.len()
    }

    pub fn order(&self, id: usize) -> usize {
        self.orders[id]
    }

    pub fn orders(&self) -> &[usize] {
        &self.orders
    }

    /// Component ids by decreasing order.
    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    /// Id of the largest component, if any.
    pub fn largest(&self) -> Option<usize> {
        self.ranking.first().copied()
    }

    pub fn members(&self, id: usize) -> Vec<usize> {
        self.label
            .iter()
            .enumerate()
            .filter(|(_, &l)| l as usize == id)
            .map(|(i, _)| i)
            .collect()
    }

    /// Partition as sorted member lists, sorted by smallest member.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut parts = vec![Vec::new(); self.count()];
        for (i, &l) in self.label.iter().enumerate() {
            parts[l as usize].push(i);
        }
        parts
    }
}

/// Union-find labeling over all edges of the graph.
pub fn components(graph: &GeometricGraph) -> ComponentLabeling {
    let mut uf = UnionFind::new(graph.len());
    graph.for_each_edge(|i, j| {
        uf.union(i, j);
    });
    ComponentLabeling::from_union_find(&mut uf)
}

/// `L_j`: order of the `j`th-largest component, 0 if there are fewer than `j`.
pub fn component_orders(labeling: &ComponentLabeling, j: usize) -> usize {
    if j == 0 {
        return 0;
    }
    labeling
        .ranking
        .get(j - 1)
        .map_or(0, |&id| labeling.orders[id])
}

/// l∞ diameter of a point subset: the largest per-axis coordinate range.
pub fn extent_of(cloud: &PointCloud, indices: impl IntoIterator<Item = usize>) -> f64 {
    let d = cloud.dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    let mut any = false;
    for i in indices {
        any = true;
        for (j, &x) in cloud.point(i).iter().enumerate() {
            lo[j] = lo[j].min(x);
            hi[j] = hi[j].max(x);
        }
    }
    if !any {
        return 0.0;
    }
    lo.iter()
        .zip(&hi)
        .map(|(a, b)| b - a)
        .fold(0.0, f64::max)
}

/// l∞ diameter of component `id`.
pub fn component_extent(
    labeling: &ComponentLabeling,
    graph: &GeometricGraph,
    id: usize,
) -> Result<f64> {
    if id >= labeling.count() {
        return Err(Error::InvalidComponent {
            id,
            count: labeling.count(),
        });
    }
    Ok(extent_of(graph.cloud(), labeling.members(id)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::point_process::BoxSpec;

    fn cloud2(points: &[[f64; 2]], side: f64) -> PointCloud {
        PointCloud::from_points(BoxSpec::new(2, side).unwrap(), points).unwrap()
    }

    #[test]
    fn three_point_example() {
        let g = build_graph(cloud2(&[[0.0, 0.0], [0.5, 0.0], [2.0, 0.0]], 3.0), 1.0).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        let lab = components(&g);
        assert_eq!(lab.partition(), vec![vec![0, 1], vec![2]]);
        assert_eq!(component_orders(&lab, 1), 2);
        assert_eq!(component_orders(&lab, 2), 1);
        assert_eq!(component_orders(&lab, 3), 0);
        assert_eq!(component_extent(&lab, &g, 0).unwrap(), 0.5);
        assert_eq!(component_extent(&lab, &g, 1).unwrap(), 0.0);
        assert!(component_extent(&lab, &g, 2).is_err());
        assert_eq!(g.neighbors(0), vec![1]);
        assert!(g.neighbors(2).is_empty());
    }

    #[test]
    fn distance_exactly_r_is_an_edge() {
        let g = build_graph(cloud2(&[[0.0, 0.0], [1.0, 0.0]], 2.0), 1.0).unwrap();
        assert_eq!(g.edges(), vec![(0, 1)]);
        let g = build_graph(cloud2(&[[0.0, 0.0], [1.0 + 1e-12, 0.0]], 2.0), 1.0).unwrap();
        assert!(g.edges().is_empty());
    }

    #[test]
    fn empty_cloud() {
        let g = build_graph(PointCloud::empty(BoxSpec::new(3, 4.0).unwrap()), 1.0).unwrap();
        let lab = components(&g);
        assert_eq!(lab.count(), 0);
        assert_eq!(component_orders(&lab, 1), 0);
        assert_eq!(lab.largest(), None);
    }

    #[test]
    fn rejects_bad_radius() {
        let c = cloud2(&[[0.0, 0.0]], 1.0);
        assert!(build_graph(c.clone(), 0.0).is_err());
        assert!(build_graph(c, -1.0).is_err());
    }

    #[test]
    fn ranking_ties_by_smallest_member() {
        let g = build_graph(
            cloud2(&[[5.0, 5.0], [0.0, 0.0], [0.5, 0.0], [5.5, 5.0]], 6.0),
            1.0,
        )
        .unwrap();
        let lab = components(&g);
        // {0,3} and {1,2} both have order 2; {0,3} holds the smaller index
        assert_eq!(lab.ranking(), &[0, 1]);
        assert_eq!(lab.members(lab.largest().unwrap()), vec![0, 3]);
    }

    #[test]
    fn tiny_radius_caps_grid() {
        let pts: Vec<[f64; 2]> = (0..50).map(|i| [i as f64 * 0.01, 0.5]).collect();
        let g = build_graph(cloud2(&pts, 1.0), 1e-6).unwrap();
        assert!(g.grid().cells_per_axis().pow(2) <= MIN_CELL_BUDGET);
        assert!(g.grid().cell_side() >= 1e-6);
        assert!(g.edges().is_empty());
    }
}
