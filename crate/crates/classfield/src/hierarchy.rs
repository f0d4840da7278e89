//! Addresses, recursive rollout of centres, Monte-Carlo Voronoi cells, and
//! the on-disk hierarchy format.

use crate::error::{Error, Result};
use crate::generators::Generator;
use crate::linalg::{add, dist_p, scale};
use crate::rng::SeedStream;
use crate::scalar::Scalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Genealogy word over child slots 0..K-1; the empty word is the root.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Address {
    pub word: Vec<u8>,
}

impl Address {
    pub fn root() -> Self {
        Address { word: Vec::new() }
    }

    pub fn level(&self) -> usize {
        self.word.len()
    }

    pub fn child(&self, slot: u8) -> Self {
        let mut w = self.word.clone();
        w.push(slot);
        Address { word: w }
    }

    pub fn parent(&self) -> Option<Self> {
        if self.word.is_empty() {
            None
        } else {
            Some(Address {
                word: self.word[..self.word.len() - 1].to_vec(),
            })
        }
    }

    pub fn prefix(&self, j: usize) -> Self {
        Address {
            word: self.word[..j].to_vec(),
        }
    }

    /// Length of the longest common prefix with `other`.
    pub fn lcp_len(&self, other: &Address) -> usize {
        self.word
            .iter()
            .zip(&other.word)
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// Flat index within the level: digits of the word in base K.
    pub fn flat_index(&self, k: usize) -> usize {
        self.word.iter().fold(0, |acc, &d| acc * k + d as usize)
    }

    pub fn from_flat(level: usize, mut idx: usize, k: usize) -> Self {
        let mut word = vec![0u8; level];
        for pos in (0..level).rev() {
            word[pos] = (idx % k) as u8;
            idx /= k;
        }
        Address { word }
    }
}

impl std::fmt::Display for Address {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.word.is_empty() {
            return write!(f, "root");
        }
        let parts: Vec<String> = self.word.iter().map(|d| d.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// Finite depth-L truncation: levelled arrays of centres in parent-major,
/// child-slot order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchy<S> {
    pub d: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub s: f64,
    pub root: Vec<S>,
    pub levels: Vec<Vec<Vec<S>>>,
    pub generator_tag: String,
}

impl<S: Scalar> Hierarchy<S> {
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn centre(&self, addr: &Address) -> &[S] {
        &self.levels[addr.level()][addr.flat_index(self.k)]
    }

    pub fn centre_flat(&self, level: usize, idx: usize) -> &[S] {
        &self.levels[level][idx]
    }

    pub fn node_count(&self) -> usize {
        self.levels.iter().map(|l| l.len()).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::Validation("hierarchy has no levels".into()));
        }
        if self.levels[0].len() != 1 || self.levels[0][0] != self.root {
            return Err(Error::Validation("level 0 must be exactly the root".into()));
        }
        let mut expect = 1usize;
        for (l, level) in self.levels.iter().enumerate() {
            if level.len() != expect {
                return Err(Error::Validation(format!(
                    "level {l} has {} nodes, expected {expect}",
                    level.len()
                )));
            }
            for (i, pt) in level.iter().enumerate() {
                if pt.len() != self.d {
                    return Err(Error::Validation(format!(
                        "node {i} of level {l} has dimension {}, expected {}",
                        pt.len(),
                        self.d
                    )));
                }
            }
            expect = expect.saturating_mul(self.k);
        }
        Ok(())
    }

    /// Exact-coordinate duplicates within a level; generically empty, reported
    /// as a diagnostic for the quotient view.
    pub fn duplicate_report(&self) -> Vec<(usize, usize, usize)> {
        let mut dups = Vec::new();
        for (l, level) in self.levels.iter().enumerate() {
            for i in 0..level.len() {
                for j in (i + 1)..level.len() {
                    if level[i] == level[j] {
                        dups.push((l, i, j));
                    }
                }
            }
        }
        dups
    }
}

/// Refuse rollouts whose leaf level alone would exceed this many nodes.
pub const DEPTH_GUARD_NODES: f64 = 1e7;

/// Recursively generate all centres up to depth L from the root only:
/// child (p, k) at level l+1 is x_p + s^{l+1}·r(x_p)_k.
pub fn rollout<S: Scalar>(
    g: &Generator<S>,
    x0: &[S],
    s: f64,
    depth: usize,
    override_depth_guard: bool,
) -> Result<Hierarchy<S>> {
    if !(s > 0.0 && s <= 1.0) {
        return Err(Error::InvalidArgument(format!("s must be in (0,1], got {s}")));
    }
    if g.d() != x0.len() {
        return Err(Error::InvalidArgument(format!(
            "generator dimension {} does not match root dimension {}",
            g.d(),
            x0.len()
        )));
    }
    let k = g.k();
    if !override_depth_guard && (k as f64).powi(depth as i32) > DEPTH_GUARD_NODES {
        return Err(Error::InvalidArgument(format!(
            "K^L = {k}^{depth} exceeds the depth guard; pass the override to proceed"
        )));
    }
    let lambda_chk = match g {
        Generator::PackedNeural(n) => Some(n.lambda_chk.f64()),
        _ => None,
    };
    let mut levels: Vec<Vec<Vec<S>>> = vec![vec![x0.to_vec()]];
    for l in 0..depth {
        let step = S::of(s.powi(l as i32 + 1));
        let parents = &levels[l];
        let residuals: Vec<_> = parents.par_iter().map(|x| g.residuals(x)).collect();
        if let Some(limit) = lambda_chk {
            for r in &residuals {
                for c in 0..k {
                    let n = crate::linalg::norm2(&r.col(c)).f64();
                    if n > limit {
                        return Err(Error::AdmissibilityViolation {
                            norm: n,
                            limit,
                            level: l + 1,
                        });
                    }
                }
            }
        }
        let mut next = Vec::with_capacity(parents.len() * k);
        for (x, r) in parents.iter().zip(&residuals) {
            for c in 0..k {
                next.push(add(x, &scale(&r.col(c), step)));
            }
        }
        levels.push(next);
    }
    Ok(Hierarchy {
        d: x0.len(),
        k,
        s,
        root: x0.to_vec(),
        levels,
        generator_tag: g.kind_tag(),
    })
}

/// Monte-Carlo sample of one Voronoi cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSample {
    pub address: Address,
    /// Indices into the shared point buffer of the owning complex.
    pub members: Vec<usize>,
}

/// All cells of a truncation, sharing one sampled point cloud of the root
/// ball B_p(x0, λ_max).
#[derive(Debug, Clone)]
pub struct CellComplex<S> {
    pub points: Vec<Vec<S>>,
    /// levels[l][flat index] in the same order as the hierarchy.
    pub levels: Vec<Vec<CellSample>>,
    pub p: f64,
    pub lambda_max: f64,
    pub empty_cells: Vec<Address>,
}

impl<S: Scalar> CellComplex<S> {
    pub fn cell(&self, addr: &Address, k: usize) -> &CellSample {
        &self.levels[addr.level()][addr.flat_index(k)]
    }

    pub fn member_points<'a>(&'a self, cell: &'a CellSample) -> impl Iterator<Item = &'a [S]> {
        cell.members.iter().map(|&i| self.points[i].as_slice())
    }
}

/// Uniform points in B_p(x0, λ_max) (rejection from the bounding cube),
/// assigned recursively: at each level a point goes to the child of its
/// current cell with the ℓᵖ-nearest centre, ties to the lowest slot.
pub fn voronoi_cells<S: Scalar>(
    h: &Hierarchy<S>,
    p: f64,
    n_samples: usize,
    lambda_max: f64,
    rng: &mut SeedStream,
) -> Result<CellComplex<S>> {
    if n_samples < 1000 {
        return Err(Error::InvalidArgument(format!(
            "n_samples must be >= 1000, got {n_samples}"
        )));
    }
    let d = h.d;
    let mut points: Vec<Vec<S>> = Vec::with_capacity(n_samples);
    while points.len() < n_samples {
        let cand: Vec<S> = (0..d)
            .map(|i| h.root[i] + S::of(rng.uniform_in(-lambda_max, lambda_max)))
            .collect();
        if dist_p(&cand, &h.root, p).f64() <= lambda_max {
            points.push(cand);
        }
    }

    let mut levels: Vec<Vec<CellSample>> = Vec::with_capacity(h.depth() + 1);
    levels.push(vec![CellSample {
        address: Address::root(),
        members: (0..n_samples).collect(),
    }]);
    let mut empty_cells = Vec::new();
    for l in 0..h.depth() {
        let child_centres = &h.levels[l + 1];
        let parents = &levels[l];
        let mut next: Vec<CellSample> = (0..child_centres.len())
            .map(|i| CellSample {
                address: Address::from_flat(l + 1, i, h.k),
                members: Vec::new(),
            })
            .collect();
        // assignment of each parent's members to its nearest child
        let assigned: Vec<Vec<(usize, usize)>> = parents
            .par_iter()
            .enumerate()
            .map(|(pi, cell)| {
                cell.members
                    .iter()
                    .map(|&m| {
                        let pt = &points[m];
                        let mut best_slot = 0usize;
                        let mut best_dist = S::infinity();
                        for slot in 0..h.k {
                            let c = &child_centres[pi * h.k + slot];
                            let dd = dist_p(pt, c, p);
                            if dd < best_dist {
                                best_dist = dd;
                                best_slot = slot;
                            }
                        }
                        (pi * h.k + best_slot, m)
                    })
                    .collect()
            })
            .collect();
        for pairs in assigned {
            for (ci, m) in pairs {
                next[ci].members.push(m);
            }
        }
        for cell in &next {
            if cell.members.is_empty() {
                empty_cells.push(cell.address.clone());
            }
        }
        levels.push(next);
    }
    Ok(CellComplex {
        points,
        levels,
        p,
        lambda_max,
        empty_cells,
    })
}

pub fn save_hierarchy<S: Scalar>(h: &Hierarchy<S>, path: &std::path::Path) -> Result<()> {
    h.validate()?;
    let json = serde_json::to_string(h)?;
    crate::util::write_atomic(path, json.as_bytes())
}

pub fn load_hierarchy<S: Scalar>(path: &std::path::Path) -> Result<Hierarchy<S>> {
    let text = std::fs::read_to_string(path)?;
    let h: Hierarchy<S> = serde_json::from_str(&text)?;
    h.validate()?;
    Ok(h)
}

/// One row per node of a level: flat index then coordinates.
pub fn level_csv<S: Scalar>(h: &Hierarchy<S>, level: usize) -> String {
    let mut out = String::from("index");
    for i in 0..h.d {
        out.push_str(&format!(",x{i}"));
    }
    out.push('\n');
    for (i, pt) in h.levels[level].iter().enumerate() {
        out.push_str(&i.to_string());
        for c in pt {
            out.push_str(&format!(",{}", c.f64()));
        }
        out.push('\n');
    }
    out
}
