//! Proximity graph and consensus on the per-defender shape estimates.

use serde::{Deserialize, Serialize};

use crate::formation::{ShapeBounds, ShapeParams, SHAPE_DIM};
use crate::vec2::Vec2;

/// Undirected communication graph. Edges are stored once as `(i, j)` with
/// `i < j`, in lexicographic order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(skip)]
    adjacency: Vec<Vec<usize>>,
}

impl Topology {
    pub fn from_edges(n: usize, mut edges: Vec<(usize, usize)>) -> Self {
        for e in edges.iter_mut() {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.retain(|&(i, j)| i != j && j < n);
        edges.sort_unstable();
        edges.dedup();
        let mut adjacency = vec![Vec::new(); n];
        for &(i, j) in &edges {
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for a in adjacency.iter_mut() {
            a.sort_unstable();
        }
        Self { n, edges, adjacency }
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Connected-component label per vertex, labels assigned in order of
    /// first appearance.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.n];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..self.n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &self.adjacency[v] {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        stack.push(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }
}

/// Edge `(i, j)` iff `|p_i - p_j| < r_com` (strict).
pub fn build_topology(positions: &[Vec2], r_com: f64) -> Topology {
    let n = positions.len();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if positions[i].distance(positions[j]) < r_com {
                edges.push((i, j));
            }
        }
    }
    Topology::from_edges(n, edges)
}

/// `pi_out + c_neg * sum_j (theta_j - theta_i)`, componentwise.
pub fn negotiate_update(
    theta_i: &ShapeParams,
    pi_out: &[f64; SHAPE_DIM],
    neighbor_thetas: &[ShapeParams],
    c_neg: f64,
) -> [f64; SHAPE_DIM] {
    let own = theta_i.to_array();
    let mut out = *pi_out;
    for nb in neighbor_thetas {
        let t = nb.to_array();
        for k in 0..SHAPE_DIM {
            out[k] += c_neg * (t[k] - own[k]);
        }
    }
    out
}

/// Largest pairwise Euclidean distance between estimates.
pub fn consensus_error(estimates: &[ShapeParams]) -> f64 {
    let arrays: Vec<[f64; SHAPE_DIM]> = estimates.iter().map(ShapeParams::to_array).collect();
    let mut worst = 0.0f64;
    for i in 0..arrays.len() {
        for j in i + 1..arrays.len() {
            let d2: f64 = arrays[i].iter().zip(&arrays[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            worst = worst.max(d2.sqrt());
        }
    }
    worst
}

/// One synchronous Euler step of the negotiation for every agent. Returns
/// the negotiated rates used and the clamped new estimates.
pub fn negotiation_step(
    thetas: &[ShapeParams],
    policy_out: &[[f64; SHAPE_DIM]],
    topology: &Topology,
    c_neg: f64,
    dt: f64,
    bounds: &ShapeBounds,
) -> (Vec<[f64; SHAPE_DIM]>, Vec<ShapeParams>) {
    let mut rates = Vec::with_capacity(thetas.len());
    let mut next = Vec::with_capacity(thetas.len());
    let mut nbuf = Vec::new();
    for (i, theta) in thetas.iter().enumerate() {
        nbuf.clear();
        nbuf.extend(topology.neighbors(i).iter().map(|&j| thetas[j]));
        let rate = negotiate_update(theta, &policy_out[i], &nbuf, c_neg);
        next.push(bounds.clamp(theta.advanced(&rate, dt)));
        rates.push(rate);
    }
    (rates, next)
}
