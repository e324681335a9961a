//! Private prefix sums over a stream of vectors via a dyadic tree.
//!
//! Leaves are 1-indexed. The node at level `ℓ` (root = 0) with index `i`
//! covers leaves `i·2^k + 1 ..= (i+1)·2^k`, `k = depth − ℓ`, and is labelled by
//! `i` written in binary with `ℓ` digits (the root's label is empty). Each
//! node receives its Gaussian noise once, when its last leaf arrives, and the
//! prefix `[1..t]` is answered from one node per set bit of `t`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::privacy::gaussian;

/// `σ² = (R²/ε)·(log₂T)²·ln(log₂T/δ)` with `log₂T` the tree depth `⌈log₂T⌉`.
pub fn tree_sigma(bound: f64, eps: f64, delta: f64, horizon: usize) -> Result<f64> {
    if horizon < 4 {
        return Err(Error::InvalidParameter(format!("horizon must be >= 4, got {horizon}")));
    }
    if !(bound > 0.0 && bound.is_finite()) {
        return Err(Error::InvalidParameter(format!("norm bound must be positive, got {bound}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    let depth = depth_for(horizon) as f64;
    Ok((bound * bound / eps * depth * depth * (depth / delta).ln()).sqrt())
}

fn depth_for(horizon: usize) -> u32 {
    horizon.next_power_of_two().trailing_zeros()
}

/// Number of nodes answering the prefix `[1..t]`.
pub fn popcount(t: usize) -> usize {
    t.count_ones() as usize
}

/// Row-major flattening of a square matrix.
pub fn flatten(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidParameter(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    let d = m.nrows();
    Ok(DVector::from_fn(d * d, |k, _| m[(k / d, k % d)]))
}

/// Inverse of [`flatten`].
pub fn reshape(v: &DVector<f64>, d: usize) -> Result<DMatrix<f64>> {
    check_dim(d * d, v.len())?;
    Ok(DMatrix::from_fn(d, d, |i, j| v[i * d + j]))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Which populated nodes a tree keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retention {
    /// Every populated node, for inspection and dumps.
    Full,
    /// Only nodes that can still answer a future prefix.
    Frontier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId {
    pub level: u32,
    pub index: usize,
}

impl NodeId {
    pub fn label(&self) -> String {
        (0..self.level).rev().map(|b| if self.index >> b & 1 == 1 { '1' } else { '0' }).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub exact: DVector<f64>,
    pub noisy: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrefixSum {
    pub value: DVector<f64>,
    pub nodes: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct SumTree {
    capacity: usize,
    depth: u32,
    dim: usize,
    sigma: f64,
    bound: f64,
    t: usize,
    retention: Retention,
    nodes: BTreeMap<NodeId, Node>,
}

impl SumTree {
    pub fn new(horizon: usize, dim: usize, sigma: f64, bound: f64, retention: Retention) -> Result<Self> {
        if horizon == 0 || dim == 0 {
            return Err(Error::InvalidParameter("horizon and dimension must be positive".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        if !(bound > 0.0) {
            return Err(Error::InvalidParameter(format!("norm bound must be positive, got {bound}")));
        }
        Ok(Self {
            capacity: horizon.next_power_of_two(),
            depth: depth_for(horizon),
            dim,
            sigma,
            bound,
            t: 0,
            retention,
            nodes: BTreeMap::new(),
        })
    }

    /// Tree whose noise is calibrated for `(eps, delta)` over `horizon` items
    /// of norm at most `bound`.
    pub fn private(horizon: usize, dim: usize, bound: f64, eps: f64, delta: f64, retention: Retention) -> Result<Self> {
        let sigma = tree_sigma(bound, eps, delta, horizon)?;
        Self::new(horizon, dim, sigma, bound, retention)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    /// Adds `w_t`, populating the leaf and every ancestor it completes, and
    /// returns the noisy prefix sum `Ŵ_t`.
    pub fn insert<R: Rng + ?Sized>(&mut self, w: &DVector<f64>, rng: &mut R) -> Result<PrefixSum> {
        check_dim(self.dim, w.len())?;
        if self.t >= self.capacity {
            return Err(Error::CapacityExceeded { capacity: self.capacity });
        }
        let norm = w.norm();
        if !(norm <= self.bound * (1.0 + 1e-12)) {
            return Err(Error::NormBound { norm, bound: self.bound });
        }
        self.t += 1;
        let t = self.t;
        let mut id = NodeId { level: self.depth, index: t - 1 };
        let mut exact = w.clone();
        loop {
            let noisy = &exact + gaussian(self.dim, self.sigma, rng);
            self.nodes.insert(id, Node { exact: exact.clone(), noisy });
            // A node completes its parent when it is a right child.
            if id.level == 0 || id.index & 1 == 0 {
                break;
            }
            let left = NodeId { level: id.level, index: id.index - 1 };
            let parent = NodeId { level: id.level - 1, index: id.index >> 1 };
            exact += &self.nodes[&left].exact;
            if self.retention == Retention::Frontier {
                self.nodes.remove(&left);
                self.nodes.remove(&id);
            }
            id = parent;
        }
        Ok(self.query())
    }

    /// Noisy prefix over everything inserted so far. Repeated calls return
    /// identical values because noise lives on the nodes.
    pub fn query(&self) -> PrefixSum {
        let ids = self.decomposition(self.t);
        let mut value = DVector::zeros(self.dim);
        for id in &ids {
            value += &self.nodes[id].noisy;
        }
        PrefixSum { value, nodes: ids }
    }

    /// Exact prefix over the same nodes, for diagnostics only.
    pub fn exact_prefix(&self) -> DVector<f64> {
        let mut value = DVector::zeros(self.dim);
        for id in self.decomposition(self.t) {
            value += &self.nodes[&id].exact;
        }
        value
    }

    /// Nodes covering `[1..t]`, largest block first.
    pub fn decomposition(&self, t: usize) -> Vec<NodeId> {
        (0..=self.depth)
            .rev()
            .filter(|k| t >> k & 1 == 1)
            .map(|k| NodeId { level: self.depth - k, index: (t >> k) - 1 })
            .collect()
    }

    /// Retained nodes in breadth-first label order.
    pub fn nodes(&self) -> impl Iterator<Item = (&NodeId, &Node)> {
        self.nodes.iter()
    }

    /// One line per retained node: `label,exact...,noisy...`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, node) in &self.nodes {
            out.push_str(&id.label());
            for x in node.exact.iter().chain(node.noisy.iter()) {
                let _ = write!(out, ",{x:.16e}");
            }
            out.push('\n');
        }
        out
    }
}
