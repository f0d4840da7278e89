//! Edge-weight schemes over the hierarchy tree, closed-form and shortest-path
//! distances, Hausdorff machinery on sampled cells, truncation and diameter
//! bound checks, and the finite-window complexity planner.

use crate::error::{Error, Result};
use crate::hierarchy::{Address, CellComplex, CellSample, Hierarchy};
use crate::kdtree::KdTree;
use crate::linalg::dist_p;
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Norm-comparison ratio κ_{p,2}(d) = d^{max(1/p − 1/2, 0)}.
pub fn kappa_p2(d: usize, p: f64) -> f64 {
    let expo = (1.0 / p - 0.5).max(0.0);
    (d as f64).powf(expo)
}

/// Closed-form tree metric: (2s^{c+1} − s^{m+1} − s^{n+1})/(1−s) with c the
/// longest-common-prefix length.
pub fn tree_distance(alpha: &Address, beta: &Address, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tree metric needs s in (0,1), got {s}"
        )));
    }
    let c = alpha.lcp_len(beta) as i32;
    let m = alpha.level() as i32;
    let n = beta.level() as i32;
    Ok((2.0 * s.powi(c + 1) - s.powi(m + 1) - s.powi(n + 1)) / (1.0 - s))
}

/// Closed-form diameter of the depth-L tree: 2s(1−s^L)/(1−s).
pub fn tree_diameter(s: f64, depth: usize) -> f64 {
    2.0 * s * (1.0 - s.powi(depth as i32)) / (1.0 - s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Tree,
    Pt,
    Cell,
}

/// Weighted view of the truncation tree. `weights[l][i]` is the weight of the
/// edge from its parent into node i of level l (l >= 1; `weights[0]` empty).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricView {
    pub scheme: WeightScheme,
    pub k: usize,
    pub s: f64,
    pub weights: Vec<Vec<f64>>,
    /// Per-edge sampling slack (2·covering radius of the child cell); zeros
    /// for the tree and pt schemes and for substituted edges.
    pub slacks: Vec<Vec<f64>>,
    /// Edges whose cell weight was replaced by the certified bound because
    /// the child cell received no samples.
    pub substituted_edges: Vec<Address>,
}

impl MetricView {
    pub fn depth(&self) -> usize {
        self.weights.len() - 1
    }

    pub fn tree<S: Scalar>(h: &Hierarchy<S>) -> Result<Self> {
        if !(h.s > 0.0 && h.s < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tree scheme needs s in (0,1), got {}",
                h.s
            )));
        }
        let weights = (0..=h.depth())
            .map(|l| vec![h.s.powi(l as i32); if l == 0 { 0 } else { h.levels[l].len() }])
            .collect();
        Ok(MetricView {
            scheme: WeightScheme::Tree,
            k: h.k,
            s: h.s,
            weights: reshape_zero_level(weights),
            slacks: Vec::new(),
            substituted_edges: Vec::new(),
        })
    }

    /// Base-point weights s^l‖r(x_α)_k‖_p, read off as ‖x_child − x_parent‖_p.
    pub fn pt<S: Scalar>(h: &Hierarchy<S>, p: f64) -> Self {
        let mut weights = vec![Vec::new()];
        for l in 1..=h.depth() {
            let level: Vec<f64> = h.levels[l]
                .iter()
                .enumerate()
                .map(|(i, child)| dist_p(child, &h.levels[l - 1][i / h.k], p).f64())
                .collect();
            weights.push(level);
        }
        MetricView {
            scheme: WeightScheme::Pt,
            k: h.k,
            s: h.s,
            weights,
            slacks: Vec::new(),
            substituted_edges: Vec::new(),
        }
    }

    /// Scale-sensitive cell weights s^{|α|}·λ_max·d_{H,p}(C_α, C_{αk}) from a
    /// sampled cell complex.
    pub fn cell<S: Scalar>(
        h: &Hierarchy<S>,
        cells: &CellComplex<S>,
        lambda_max: f64,
    ) -> Result<Self> {
        let p = cells.p;
        let mut weights = vec![Vec::new()];
        let mut slacks = vec![Vec::new()];
        let mut substituted = Vec::new();
        for l in 1..=h.depth() {
            let scale_factor = h.s.powi(l as i32 - 1);
            let per_edge: Vec<(f64, f64, bool)> = cells.levels[l]
                .par_iter()
                .enumerate()
                .map(|(i, child_cell)| {
                    let parent_cell = &cells.levels[l - 1][i / h.k];
                    if child_cell.members.is_empty() || parent_cell.members.is_empty() {
                        // certified per-edge bound, no sampling slack
                        return (2.0 * scale_factor * lambda_max * lambda_max, 0.0, true);
                    }
                    let child_pts: Vec<Vec<S>> =
                        cells.member_points(child_cell).map(|q| q.to_vec()).collect();
                    let parent_pts: Vec<Vec<S>> =
                        cells.member_points(parent_cell).map(|q| q.to_vec()).collect();
                    // the child sample is a subset of the parent's, so the
                    // child→parent direction is zero and d_H is the
                    // parent→child sup
                    let dh = directed_hausdorff(&parent_pts, &child_pts, p);
                    (
                        scale_factor * lambda_max * dh,
                        2.0 * covering_radius(&child_pts, p),
                        false,
                    )
                })
                .collect();
            let mut level_w = Vec::with_capacity(per_edge.len());
            let mut level_s = Vec::with_capacity(per_edge.len());
            for (i, (w, sl, sub)) in per_edge.into_iter().enumerate() {
                level_w.push(w);
                level_s.push(sl);
                if sub {
                    substituted.push(cells.levels[l][i].address.clone());
                }
            }
            weights.push(level_w);
            slacks.push(level_s);
        }
        Ok(MetricView {
            scheme: WeightScheme::Cell,
            k: h.k,
            s: h.s,
            weights,
            slacks,
            substituted_edges: substituted,
        })
    }

    pub fn edge_weight(&self, child: &Address) -> f64 {
        self.weights[child.level()][child.flat_index(self.k)]
    }

    fn check_range(&self, a: &Address) -> Result<()> {
        if a.level() > self.depth() {
            return Err(Error::InvalidArgument(format!(
                "address {a} is beyond truncation depth {}",
                self.depth()
            )));
        }
        Ok(())
    }

    /// Unique-path distance on the tree: sum of edge weights up to the
    /// longest common prefix from both endpoints.
    pub fn path_distance(&self, u: &Address, v: &Address) -> Result<f64> {
        self.check_range(u)?;
        self.check_range(v)?;
        let c = u.lcp_len(v);
        let mut total = 0.0;
        for a in [u, v] {
            for l in (c + 1)..=a.level() {
                total += self.edge_weight(&a.prefix(l));
            }
        }
        Ok(total)
    }

    /// Dijkstra over the explicit undirected weighted tree; oracle companion
    /// of `path_distance` and of the closed form for the tree scheme.
    pub fn dijkstra_distance(&self, u: &Address, v: &Address) -> Result<f64> {
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;
        self.check_range(u)?;
        self.check_range(v)?;
        // global node ids: offset[l] + flat index
        let mut offsets = vec![0usize];
        let mut total_nodes = 0usize;
        for l in 0..=self.depth() {
            total_nodes += self.k.pow(l as u32);
            offsets.push(total_nodes);
        }
        let id = |a: &Address| offsets[a.level()] + a.flat_index(self.k);
        let (src, dst) = (id(u), id(v));
        let mut dist = vec![f64::INFINITY; total_nodes];
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
        let key = |d: f64| (d * 1e18) as u64; // monotone; ties resolved by re-relaxation
        dist[src] = 0.0;
        heap.push(Reverse((0, src)));
        while let Some(Reverse((_, node))) = heap.pop() {
            if node == dst {
                break;
            }
            // recover (level, idx)
            let level = offsets.partition_point(|&o| o <= node) - 1;
            let idx = node - offsets[level];
            let d0 = dist[node];
            let relax = |nb: usize, w: f64, dist: &mut Vec<f64>, heap: &mut BinaryHeap<Reverse<(u64, usize)>>| {
                let nd = d0 + w;
                if nd < dist[nb] {
                    dist[nb] = nd;
                    heap.push(Reverse((key(nd), nb)));
                }
            };
            if level > 0 {
                let w = self.weights[level][idx];
                relax(offsets[level - 1] + idx / self.k, w, &mut dist, &mut heap);
            }
            if level < self.depth() {
                for c in 0..self.k {
                    let child = idx * self.k + c;
                    let w = self.weights[level + 1][child];
                    relax(offsets[level + 1] + child, w, &mut dist, &mut heap);
                }
            }
        }
        Ok(dist[dst])
    }

    /// Exact diameter of the view (trees: max pairwise unique-path length).
    /// Guarded to truncations of at most 1500 nodes.
    pub fn diameter(&self) -> Result<f64> {
        let total: usize = (0..=self.depth()).map(|l| self.k.pow(l as u32)).sum();
        if total > 1500 {
            return Err(Error::InvalidArgument(format!(
                "all-pairs diameter limited to 1500 nodes, truncation has {total}"
            )));
        }
        let nodes: Vec<Address> = (0..=self.depth())
            .flat_map(|l| (0..self.k.pow(l as u32)).map(move |i| Address::from_flat(l, i, self.k)))
            .collect();
        let mut best = 0.0f64;
        for i in 0..nodes.len() {
            for j in (i + 1)..nodes.len() {
                best = best.max(self.path_distance(&nodes[i], &nodes[j])?);
            }
        }
        Ok(best)
    }

    /// CSV dump: level, address, scheme, weight.
    pub fn edge_weights_csv(&self) -> String {
        let scheme = match self.scheme {
            WeightScheme::Tree => "tree",
            WeightScheme::Pt => "pt",
            WeightScheme::Cell => "cell",
        };
        let mut out = String::from("level,address,scheme,weight\n");
        for l in 1..=self.depth() {
            for (i, w) in self.weights[l].iter().enumerate() {
                let addr = Address::from_flat(l, i, self.k);
                out.push_str(&format!("{l},{addr},{scheme},{w}\n"));
            }
        }
        out
    }
}

fn reshape_zero_level(mut w: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    if let Some(first) = w.first_mut() {
        first.clear();
    }
    w
}

const BRUTE_FORCE_LIMIT: usize = 64;

/// Directed Hausdorff sup-inf distance from A to B on point samples.
pub fn directed_hausdorff<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>], p: f64) -> f64 {
    assert!(!a.is_empty() && !b.is_empty());
    if b.len() <= BRUTE_FORCE_LIMIT {
        let mut worst = 0.0f64;
        for q in a {
            let mut best = f64::INFINITY;
            for r in b {
                best = best.min(dist_p(q, r, p).f64());
            }
            worst = worst.max(best);
        }
        worst
    } else {
        // running-max scan: most points cannot raise the sup and are
        // dismissed by a single bounded probe
        let tree = KdTree::build(b);
        let mut worst = 0.0f64;
        for q in a {
            if !tree.any_within_where(q, p, S::of(worst), |_| true) {
                worst = worst.max(tree.nearest(q, p).1.f64());
            }
        }
        worst
    }
}

/// Symmetric Hausdorff distance between two sampled cells.
pub fn hausdorff_distance<S: Scalar>(
    complex: &CellComplex<S>,
    a: &CellSample,
    b: &CellSample,
    p: f64,
) -> Result<f64> {
    if a.members.is_empty() {
        return Err(Error::EmptyCell(a.address.to_string()));
    }
    if b.members.is_empty() {
        return Err(Error::EmptyCell(b.address.to_string()));
    }
    let pa: Vec<Vec<S>> = complex.member_points(a).map(|q| q.to_vec()).collect();
    let pb: Vec<Vec<S>> = complex.member_points(b).map(|q| q.to_vec()).collect();
    Ok(directed_hausdorff(&pa, &pb, p).max(directed_hausdorff(&pb, &pa, p)))
}

/// Sample covering radius proxy: the largest nearest-neighbour distance
/// within the sample.
pub fn covering_radius<S: Scalar>(pts: &[Vec<S>], p: f64) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    if pts.len() <= BRUTE_FORCE_LIMIT {
        let mut worst = 0.0f64;
        for (i, q) in pts.iter().enumerate() {
            let mut best = f64::INFINITY;
            for (j, r) in pts.iter().enumerate() {
                if i != j {
                    best = best.min(dist_p(q, r, p).f64());
                }
            }
            worst = worst.max(best);
        }
        worst
    } else {
        let tree = KdTree::build(pts);
        let mut worst = 0.0f64;
        for i in 0..pts.len() {
            if !tree.any_within_where(&pts[i], p, S::of(worst), |j| j != i) {
                worst = worst.max(tree.nearest_where(&pts[i], p, |j| j != i).unwrap().1.f64());
            }
        }
        worst
    }
}

/// Weight of one cell edge: s^{|α|}·λ_max·d_{H,p}(C_α, C_{αk}).
pub fn cell_edge_weight<S: Scalar>(
    complex: &CellComplex<S>,
    parent: &CellSample,
    child: &CellSample,
    parent_level: usize,
    s: f64,
    lambda_max: f64,
) -> Result<f64> {
    let dh = hausdorff_distance(complex, parent, child, complex.p)?;
    Ok(s.powi(parent_level as i32) * lambda_max * dh)
}

/// Minimum pairwise distance at one level: brute force for small levels, a
/// kd-tree nearest-neighbour sweep beyond.
pub fn intra_level_separation<S: Scalar>(h: &Hierarchy<S>, level: usize) -> Result<f64> {
    let pts = &h.levels[level];
    if pts.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "level {level} has fewer than 2 nodes"
        )));
    }
    if pts.len() <= 10_000 {
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                best = best.min(dist_p(&pts[i], &pts[j], 2.0).f64());
            }
        }
        Ok(best)
    } else {
        let tree = KdTree::build(pts);
        Ok((0..pts.len())
            .map(|i| tree.nearest_where(&pts[i], 2.0, |j| j != i).unwrap().1.f64())
            .fold(f64::INFINITY, f64::min))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationGapReport {
    pub truncation_level: usize,
    pub reference_depth: usize,
    /// Sup over deeper nodes of the cell-weight path length to the level-L
    /// ancestor.
    pub gap: f64,
    /// 2λ_max²s^L/(1−s).
    pub bound: f64,
    /// Accumulated sampling slack along the worst chains.
    pub slack: f64,
    pub substituted_edges: usize,
    pub ok: bool,
}

/// Measure the Hausdorff gap between the depth-L truncation and a deeper
/// reference rollout under the scale-sensitive cell metric.
pub fn truncation_gap<S: Scalar>(
    h_deep: &Hierarchy<S>,
    cell_view: &MetricView,
    truncation_level: usize,
    s: f64,
    lambda_max: f64,
) -> Result<TruncationGapReport> {
    let depth = h_deep.depth();
    if truncation_level >= depth && truncation_level != depth {
        return Err(Error::InvalidArgument(format!(
            "truncation level {truncation_level} >= reference depth {depth}"
        )));
    }
    if truncation_level > depth {
        return Err(Error::InvalidArgument(
            "truncation level beyond reference depth".into(),
        ));
    }
    let bound = 2.0 * lambda_max * lambda_max * s.powi(truncation_level as i32) / (1.0 - s);
    if truncation_level == depth {
        return Ok(TruncationGapReport {
            truncation_level,
            reference_depth: depth,
            gap: 0.0,
            bound,
            slack: 0.0,
            substituted_edges: 0,
            ok: true,
        });
    }
    // cumulative distance from each node down-level to its level-L ancestor
    let mut gap = 0.0f64;
    let mut slack = 0.0f64;
    let mut cum: Vec<f64> = vec![0.0; h_deep.levels[truncation_level].len()];
    let mut cum_slack: Vec<f64> = vec![0.0; cum.len()];
    for l in (truncation_level + 1)..=depth {
        let n = h_deep.levels[l].len();
        let mut next = vec![0.0f64; n];
        let mut next_slack = vec![0.0f64; n];
        for i in 0..n {
            next[i] = cum[i / h_deep.k] + cell_view.weights[l][i];
            next_slack[i] = cum_slack[i / h_deep.k]
                + cell_view.slacks.get(l).map_or(0.0, |row| row[i]);
            if next[i] > gap {
                gap = next[i];
                slack = next_slack[i];
            }
        }
        cum = next;
        cum_slack = next_slack;
    }
    Ok(TruncationGapReport {
        truncation_level,
        reference_depth: depth,
        gap,
        bound,
        slack,
        substituted_edges: cell_view.substituted_edges.len(),
        ok: gap <= bound + slack + 1e-12,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiameterReport {
    pub depth: usize,
    pub diam_tree: f64,
    pub diam_tree_closed_form: f64,
    pub diam_pt: f64,
    pub diam_cell: f64,
    pub pt_bound: f64,
    pub cell_bound: f64,
    /// ½|diam(X) − diam(Y)| lower bounds on the Gromov–Hausdorff distance.
    pub gh_lower_tree_pt: f64,
    pub gh_lower_tree_cell: f64,
    pub gh_lower_pt_cell: f64,
    pub ok: bool,
}

/// Verify the closed-form tree diameter and the pt/cell diameter inequalities.
pub fn diameter_bounds_check<S: Scalar>(
    h: &Hierarchy<S>,
    cells: &CellComplex<S>,
    lambda_max: f64,
    p: f64,
) -> Result<DiameterReport> {
    let tree = MetricView::tree(h)?;
    let pt = MetricView::pt(h, p);
    let cell = MetricView::cell(h, cells, lambda_max)?;
    let diam_tree = tree.diameter()?;
    let diam_pt = pt.diameter()?;
    let diam_cell = cell.diameter()?;
    let closed = tree_diameter(h.s, h.depth());
    let pt_bound = kappa_p2(h.d, p) * lambda_max * diam_tree;
    let cell_bound = 2.0 * lambda_max * lambda_max / h.s * diam_tree;
    let ok = (diam_tree - closed).abs() < 1e-12
        && diam_pt <= pt_bound + 1e-12
        && diam_cell <= cell_bound + 1e-12;
    Ok(DiameterReport {
        depth: h.depth(),
        diam_tree,
        diam_tree_closed_form: closed,
        diam_pt,
        diam_cell,
        pt_bound,
        cell_bound,
        gh_lower_tree_pt: 0.5 * (diam_tree - diam_pt).abs(),
        gh_lower_tree_cell: 0.5 * (diam_tree - diam_cell).abs(),
        gh_lower_pt_cell: 0.5 * (diam_pt - diam_cell).abs(),
        ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DominationReport {
    pub pairs_checked: usize,
    pub cell_violations: usize,
    pub pt_violations: usize,
    pub max_cell_ratio: f64,
    pub max_pt_ratio: f64,
    pub ok: bool,
}

/// Verify d_cell ≤ (2λ_max²/s)·d_tree and d_pt ≤ κ_{p,2}(d)·λ_max·d_tree on
/// sampled address pairs.
pub fn domination_check<S: Scalar>(
    h: &Hierarchy<S>,
    cells: &CellComplex<S>,
    lambda_max: f64,
    p: f64,
    pairs: usize,
    rng: &mut crate::rng::SeedStream,
) -> Result<DominationReport> {
    let tree = MetricView::tree(h)?;
    let pt = MetricView::pt(h, p);
    let cell = MetricView::cell(h, cells, lambda_max)?;
    domination_check_views(h, &tree, &pt, &cell, lambda_max, p, pairs, rng)
}

/// Same check against prebuilt views (lets tests inject corrupted weights).
#[allow(clippy::too_many_arguments)]
pub fn domination_check_views<S: Scalar>(
    h: &Hierarchy<S>,
    tree: &MetricView,
    pt: &MetricView,
    cell: &MetricView,
    lambda_max: f64,
    p: f64,
    pairs: usize,
    rng: &mut crate::rng::SeedStream,
) -> Result<DominationReport> {
    let cell_factor = 2.0 * lambda_max * lambda_max / h.s;
    let pt_factor = kappa_p2(h.d, p) * lambda_max;
    let mut report = DominationReport {
        pairs_checked: 0,
        cell_violations: 0,
        pt_violations: 0,
        max_cell_ratio: 0.0,
        max_pt_ratio: 0.0,
        ok: true,
    };
    let rand_addr = |rng: &mut crate::rng::SeedStream| {
        let level = (rng.next_u64() % (h.depth() as u64 + 1)) as usize;
        let idx = (rng.next_u64() % h.levels[level].len() as u64) as usize;
        Address::from_flat(level, idx, h.k)
    };
    for _ in 0..pairs {
        let u = rand_addr(rng);
        let v = rand_addr(rng);
        if u == v {
            continue;
        }
        let dt = tree.path_distance(&u, &v)?;
        let dc = cell.path_distance(&u, &v)?;
        let dp = pt.path_distance(&u, &v)?;
        report.pairs_checked += 1;
        report.max_cell_ratio = report.max_cell_ratio.max(dc / (cell_factor * dt));
        report.max_pt_ratio = report.max_pt_ratio.max(dp / (pt_factor * dt));
        if dc > cell_factor * dt + 1e-12 {
            report.cell_violations += 1;
        }
        if dp > pt_factor * dt + 1e-12 {
            report.pt_violations += 1;
        }
    }
    report.ok = report.cell_violations == 0 && report.pt_violations == 0;
    Ok(report)
}

/// Inputs of the finite-window complexity planner.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerInputs {
    pub eps: f64,
    pub s: f64,
    pub lambda_max: f64,
    pub k: usize,
    pub l_minus: usize,
    pub l_plus: usize,
    /// Inter-level separation δ of the window.
    pub delta: f64,
    /// Generator regularity constants for the single-level feasibility flags.
    pub l_r: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub lambda_plus: f64,
    /// Template separation ε of the packing.
    pub pack_eps: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlannerReport {
    /// Depth at which the rollout coincides with the true truncation to ε.
    pub l_eps: usize,
    /// Growth exponent γ = log K / (−log s).
    pub gamma: f64,
    /// Window node count M = Σ_{l=L−}^{L+−1} K^l.
    pub m: u128,
    /// Window aspect bound B = 2λ_max·s(1−s^{L+−1})/((1−s)δ).
    pub b: f64,
    pub c_sep: f64,
    pub positivity_ok: bool,
    pub separation_ok: bool,
}

pub fn plan_truncation(inp: &PlannerInputs) -> Result<PlannerReport> {
    if !(inp.s > 0.0 && inp.s < 1.0) {
        return Err(Error::InvalidArgument(format!("s must be in (0,1), got {}", inp.s)));
    }
    if !(inp.eps > 0.0 && inp.eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be in (0,1), got {}",
            inp.eps
        )));
    }
    if inp.k <= 1 {
        return Err(Error::InvalidArgument("K must exceed 1".into()));
    }
    let inner = 2.0 * inp.lambda_max * inp.lambda_max / ((1.0 - inp.s) * inp.eps);
    let l_eps = (inner.ln() / (-inp.s.ln())).ceil().max(2.0) as usize;
    let gamma = (inp.k as f64).ln() / (-inp.s.ln());
    let mut m: u128 = 0;
    for l in inp.l_minus..inp.l_plus {
        m += (inp.k as u128).pow(l as u32);
    }
    let b = 2.0 * inp.lambda_max * inp.s * (1.0 - inp.s.powi(inp.l_plus as i32 - 1))
        / ((1.0 - inp.s) * inp.delta);
    let denom = 1.0 - inp.s - inp.s * inp.s * inp.l_r;
    let c_bd = inp.sigma_max * inp.lambda_plus;
    let c_sep = 2.0 * c_bd * inp.s / denom;
    Ok(PlannerReport {
        l_eps,
        gamma,
        m,
        b,
        c_sep,
        positivity_ok: denom > 0.0,
        separation_ok: denom > 0.0 && c_sep <= inp.sigma_min * inp.pack_eps,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparationRecursionReport {
    /// Measured minimum intra-level separations δ_l for l = 1..=max_level.
    pub measured: Vec<f64>,
    /// Recursion lower bounds computed from the certified constants and the
    /// previous measured value.
    pub bounds: Vec<f64>,
    pub ok: bool,
}

/// Check δ_1 ≥ s·s_sep and
/// δ_{l+1} ≥ max{0, min{s^{l+1}·s_sep, (1−s^{l+1}L_r)·δ_l − 2s^{l+1}λ_max}}.
pub fn separation_recursion_check<S: Scalar>(
    h: &Hierarchy<S>,
    s_sep: f64,
    lambda_max: f64,
    l_r: f64,
    max_level: usize,
) -> Result<SeparationRecursionReport> {
    let s = h.s;
    let mut measured = Vec::new();
    let mut bounds = Vec::new();
    let mut ok = true;
    for l in 1..=max_level.min(h.depth()) {
        let delta = intra_level_separation(h, l)?;
        let bound = if l == 1 {
            s * s_sep
        } else {
            let sl = s.powi(l as i32);
            let prev = measured[l - 2];
            (sl * s_sep).min((1.0 - sl * l_r) * prev - 2.0 * sl * lambda_max).max(0.0)
        };
        if delta < bound - 1e-12 {
            ok = false;
        }
        measured.push(delta);
        bounds.push(bound);
    }
    Ok(SeparationRecursionReport {
        measured,
        bounds,
        ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::Generator;
    use crate::hierarchy::{rollout, voronoi_cells};
    use crate::linalg::Mat;
    use crate::rng::SeedStream;

    fn const_gen(cols: &[Vec<f64>]) -> Generator<f64> {
        Generator::Constant {
            columns: Mat::from_cols(cols),
            tag: "constant".into(),
        }
    }

    fn small_hierarchy(depth: usize) -> Hierarchy<f64> {
        let g = const_gen(&[vec![0.7, 0.0], vec![-0.35, 0.6], vec![-0.35, -0.6]]);
        rollout(&g, &[0.0, 0.0], 0.5, depth, false).unwrap()
    }

    #[test]
    fn tree_distance_examples() {
        let a = Address { word: vec![0] };
        let b = Address { word: vec![1] };
        assert_eq!(tree_distance(&a, &a, 0.5).unwrap(), 0.0);
        let root = Address::root();
        assert!((tree_distance(&root, &a, 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!((tree_distance(&a, &b, 0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!(tree_distance(&a, &b, 1.0).is_err());
    }

    #[test]
    fn tree_diameter_closed_form() {
        assert!((tree_diameter(0.5, 2) - 1.5).abs() < 1e-15);
        let h = small_hierarchy(4);
        let view = MetricView::tree(&h).unwrap();
        assert!((view.diameter().unwrap() - tree_diameter(0.5, 4)).abs() < 1e-12);
    }

    #[test]
    fn kappa_values() {
        assert_eq!(kappa_p2(2, 2.0), 1.0);
        assert!((kappa_p2(2, 1.0) - 2.0f64.sqrt()).abs() < 1e-15);
        assert_eq!(kappa_p2(5, f64::INFINITY), 1.0);
    }

    #[test]
    fn dijkstra_matches_closed_form() {
        let h = small_hierarchy(5);
        let view = MetricView::tree(&h).unwrap();
        let mut rng = SeedStream::new(13);
        for _ in 0..200 {
            let la = (rng.next_u64() % 6) as usize;
            let lb = (rng.next_u64() % 6) as usize;
            let a = Address::from_flat(la, (rng.next_u64() % 3u64.pow(la as u32)) as usize, 3);
            let b = Address::from_flat(lb, (rng.next_u64() % 3u64.pow(lb as u32)) as usize, 3);
            let closed = tree_distance(&a, &b, 0.5).unwrap();
            assert!((view.dijkstra_distance(&a, &b).unwrap() - closed).abs() < 1e-12);
            assert!((view.path_distance(&a, &b).unwrap() - closed).abs() < 1e-12);
        }
    }

    #[test]
    fn pt_scheme_sibling_distance() {
        // constant generator: sibling path runs through the root,
        // d = s(‖c_k‖_p + ‖c_j‖_p)
        let cols = vec![vec![0.7, 0.0], vec![-0.35, 0.6]];
        let g = const_gen(&cols);
        let h = rollout(&g, &[0.0, 0.0], 0.5, 1, false).unwrap();
        for &p in &[1.0, 2.0, f64::INFINITY] {
            let view = MetricView::pt(&h, p);
            let a = Address { word: vec![0] };
            let b = Address { word: vec![1] };
            let expect = 0.5
                * (crate::linalg::norm_p(&cols[0], p) + crate::linalg::norm_p(&cols[1], p));
            assert!((view.path_distance(&a, &b).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn hausdorff_examples() {
        let a = vec![vec![0.0f64, 0.0]];
        let b = vec![vec![0.0f64, 0.0], vec![1.0, 0.0]];
        assert_eq!(directed_hausdorff(&a, &a, 2.0), 0.0);
        assert_eq!(directed_hausdorff(&a, &b, 2.0), 0.0);
        assert_eq!(directed_hausdorff(&b, &a, 2.0), 1.0);
    }

    #[test]
    fn hausdorff_kd_path_matches_brute() {
        let mut rng = SeedStream::new(3);
        let a: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)])
            .collect();
        let b: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)])
            .collect();
        let mut brute = 0.0f64;
        for q in &a {
            let mut best = f64::INFINITY;
            for r in &b {
                best = best.min(dist_p(q, r, 2.0).f64());
            }
            brute = brute.max(best);
        }
        assert!((directed_hausdorff(&a, &b, 2.0) - brute).abs() < 1e-12);
    }

    #[test]
    fn sibling_cells_hausdorff_lower_bound() {
        let h = small_hierarchy(2);
        let mut rng = SeedStream::new(40);
        let cells = voronoi_cells(&h, 2.0, 20_000, 1.0, &mut rng).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                let a = &cells.levels[1][i];
                let b = &cells.levels[1][j];
                let dh = hausdorff_distance(&cells, a, b, 2.0).unwrap();
                let centre_gap = dist_p(&h.levels[1][i], &h.levels[1][j], 2.0);
                let tau = covering_radius(
                    &cells.member_points(b).map(|q| q.to_vec()).collect::<Vec<_>>(),
                    2.0,
                );
                assert!(dh >= 0.5 * centre_gap - tau, "dh {dh} too small");
            }
        }
    }

    #[test]
    fn cell_weights_respect_edge_bound() {
        let h = small_hierarchy(3);
        let mut rng = SeedStream::new(41);
        let cells = voronoi_cells(&h, 2.0, 20_000, 1.0, &mut rng).unwrap();
        let view = MetricView::cell(&h, &cells, 1.0).unwrap();
        for l in 1..=3usize {
            for (i, w) in view.weights[l].iter().enumerate() {
                let bound = 2.0 * 0.5f64.powi(l as i32 - 1);
                let slack = view.slacks[l][i];
                assert!(*w <= bound + slack + 1e-12, "level {l} edge {i}: {w} > {bound}");
            }
        }
    }

    #[test]
    fn intra_level_separation_basics() {
        let h = Hierarchy {
            d: 2,
            k: 2,
            s: 0.5,
            root: vec![0.0, 0.0],
            levels: vec![
                vec![vec![0.0, 0.0]],
                vec![vec![0.0, 0.0], vec![1.0, 0.0]],
            ],
            generator_tag: "manual".into(),
        };
        assert!((intra_level_separation(&h, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!(intra_level_separation(&h, 0).is_err());
    }

    #[test]
    fn separation_kd_matches_brute() {
        let mut rng = SeedStream::new(4);
        let pts: Vec<Vec<f64>> = (0..2000)
            .map(|_| vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)])
            .collect();
        let mut brute = f64::INFINITY;
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                brute = brute.min(dist_p(&pts[i], &pts[j], 2.0));
            }
        }
        let tree = KdTree::build(&pts);
        let kd = (0..pts.len())
            .map(|i| tree.nearest_where(&pts[i], 2.0, |j| j != i).unwrap().1)
            .fold(f64::INFINITY, f64::min);
        assert!((brute - kd).abs() < 1e-15);
    }

    #[test]
    fn truncation_gap_small_case() {
        let h = small_hierarchy(4);
        let mut rng = SeedStream::new(42);
        let cells = voronoi_cells(&h, 2.0, 30_000, 1.0, &mut rng).unwrap();
        let view = MetricView::cell(&h, &cells, 1.0).unwrap();
        let report = truncation_gap(&h, &view, 2, 0.5, 1.0).unwrap();
        assert!((report.bound - 1.0).abs() < 1e-15); // 2·0.25/0.5
        assert!(report.ok, "gap {} bound {} slack {}", report.gap, report.bound, report.slack);
        // L equal to reference depth: zero gap
        let trivial = truncation_gap(&h, &view, 4, 0.5, 1.0).unwrap();
        assert_eq!(trivial.gap, 0.0);
        assert!(truncation_gap(&h, &view, 9, 0.5, 1.0).is_err());
    }

    #[test]
    fn diameter_bounds_hold() {
        let h = small_hierarchy(3);
        let mut rng = SeedStream::new(43);
        let cells = voronoi_cells(&h, 2.0, 20_000, 1.0, &mut rng).unwrap();
        let report = diameter_bounds_check(&h, &cells, 1.0, 2.0).unwrap();
        assert!(report.ok, "{report:?}");
        assert!((report.diam_tree - tree_diameter(0.5, 3)).abs() < 1e-12);
        assert!(report.gh_lower_tree_cell >= 0.0);
    }

    #[test]
    fn domination_holds_and_corruption_is_caught() {
        let h = small_hierarchy(3);
        let mut rng = SeedStream::new(44);
        let cells = voronoi_cells(&h, 2.0, 20_000, 1.0, &mut rng).unwrap();
        let report = domination_check(&h, &cells, 1.0, 2.0, 300, &mut rng).unwrap();
        assert!(report.ok, "{report:?}");
        // corrupt one cell weight and re-check
        let tree = MetricView::tree(&h).unwrap();
        let pt = MetricView::pt(&h, 2.0);
        let mut cell = MetricView::cell(&h, &cells, 1.0).unwrap();
        cell.weights[1][0] = 100.0;
        let bad =
            domination_check_views(&h, &tree, &pt, &cell, 1.0, 2.0, 300, &mut rng).unwrap();
        assert!(!bad.ok);
        assert!(bad.cell_violations > 0);
    }

    #[test]
    fn planner_examples() {
        let inp = PlannerInputs {
            eps: 0.1,
            s: 0.5,
            lambda_max: 1.0,
            k: 3,
            l_minus: 0,
            l_plus: 3,
            delta: 0.1,
            l_r: 0.5,
            sigma_min: 0.1,
            sigma_max: 1.0,
            lambda_plus: 1.0,
            pack_eps: 0.5,
        };
        let rep = plan_truncation(&inp).unwrap();
        assert_eq!(rep.l_eps, 6); // ceil(log2(40))
        assert!((rep.gamma - 3f64.ln() / 2f64.ln()).abs() < 1e-12);
        assert_eq!(rep.m, 1 + 3 + 9);
        // the max-with-2 clamp
        let clamped = plan_truncation(&PlannerInputs {
            eps: 0.99,
            lambda_max: 0.1,
            ..inp.clone()
        })
        .unwrap();
        assert_eq!(clamped.l_eps, 2);
        assert!(plan_truncation(&PlannerInputs { s: 1.2, ..inp.clone() }).is_err());
        assert!(plan_truncation(&PlannerInputs { eps: 0.0, ..inp }).is_err());
    }

    #[test]
    fn planner_feasibility_flips_across_s() {
        // 1 − s − s²L_r crosses zero between the two settings
        let base = PlannerInputs {
            eps: 0.1,
            s: 0.2,
            lambda_max: 1.0,
            k: 3,
            l_minus: 0,
            l_plus: 3,
            delta: 0.1,
            l_r: 2.0,
            sigma_min: 0.5,
            sigma_max: 1.0,
            lambda_plus: 1.0,
            pack_eps: 1.0,
        };
        let lo = plan_truncation(&base).unwrap();
        assert!(lo.positivity_ok);
        let hi = plan_truncation(&PlannerInputs { s: 0.7, ..base }).unwrap();
        assert!(!hi.positivity_ok);
    }

    #[test]
    fn separation_recursion_on_constant_generator() {
        // constant rule: L_r = 0, s_sep = min pairwise column distance
        let cols = vec![vec![0.7, 0.0], vec![-0.35, 0.6], vec![-0.35, -0.6]];
        let g = const_gen(&cols);
        let h = rollout(&g, &[0.0, 0.0], 0.5, 4, false).unwrap();
        let mut s_sep = f64::INFINITY;
        let mut lmax = 0.0f64;
        for i in 0..3 {
            lmax = lmax.max(crate::linalg::norm2(&cols[i]));
            for j in (i + 1)..3 {
                s_sep = s_sep.min(dist_p(&cols[i], &cols[j], 2.0));
            }
        }
        let report = separation_recursion_check(&h, s_sep, lmax, 0.0, 4).unwrap();
        assert!(report.ok, "{report:?}");
    }

    #[test]
    fn edge_csv_shape() {
        let h = small_hierarchy(2);
        let view = MetricView::tree(&h).unwrap();
        let csv = view.edge_weights_csv();
        // header + 3 + 9 edges
        assert_eq!(csv.lines().count(), 13);
        assert!(csv.lines().nth(1).unwrap().ends_with("0.5"));
    }
}
