//! Earth mover's distance between group distributions.
//!
//! Under the 0-1 ground cost the optimal transport cost is the total
//! variation distance, which is what production code evaluates. The general
//! transport LP is solved as a min-cost flow and kept as a test oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::Scheme;
use crate::scalar::Real;

/// Probability vector over the groups of a scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution<T = f64> {
    pub scheme: Scheme,
    pub p: Vec<T>,
}

impl<T: Real> Distribution<T> {
    pub fn new(scheme: Scheme, p: Vec<T>) -> Result<Self> {
        if p.len() != scheme.m() {
            return Err(Error::NotSimplex(format!(
                "{} entries for {} scheme with {} groups",
                p.len(),
                scheme,
                scheme.m()
            )));
        }
        check_simplex(&p)?;
        Ok(Self { scheme, p })
    }

    /// Normalizes nonnegative weights; `None` when they sum to zero.
    pub fn from_weights(scheme: Scheme, weights: &[T]) -> Option<Self> {
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() {
            return None;
        }
        Some(Self {
            scheme,
            p: weights.iter().map(|&w| w / total).collect(),
        })
    }

    pub fn get(&self, group: usize) -> T {
        self.p[group]
    }
}

pub fn check_simplex<T: Real>(p: &[T]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::NotSimplex("empty vector".into()));
    }
    if p.iter().any(|&x| !(x >= T::zero() && x <= T::one())) {
        return Err(Error::NotSimplex(format!("entry outside [0,1]: {p:?}")));
    }
    let sum: T = p.iter().copied().sum();
    if (sum - T::one()).abs() > T::simplex_tol() {
        return Err(Error::NotSimplex(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// Total variation distance `½ Σ |p_i − q_i|`.
pub fn total_variation<T: Real>(p: &[T], q: &[T]) -> T {
    let s: T = p.iter().zip(q).map(|(&a, &b)| (a - b).abs()).sum();
    s / T::lit(2.0)
}

/// Wasserstein distance under the 0-1 ground cost.
pub fn wasserstein_01<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    if p.scheme != q.scheme {
        return Err(Error::SchemeMismatch(p.scheme.to_string(), q.scheme.to_string()));
    }
    Ok(total_variation(&p.p, &q.p))
}

/// The 0-1 ground cost matrix for `m` groups.
pub fn zero_one_cost<T: Real>(m: usize) -> Vec<Vec<T>> {
    (0..m)
        .map(|i| (0..m).map(|j| if i == j { T::zero() } else { T::one() }).collect())
        .collect()
}

struct Edge<T> {
    to: usize,
    cap: T,
    cost: T,
}

/// Exact optimum of the transport LP
/// `min Σ λ_ij c_ij  s.t.  Σ_j λ_ij = p_i,  Σ_i λ_ij = q_j,  λ ≥ 0`
/// by successive shortest paths on the bipartite supply/demand graph.
pub fn emd_lp<T: Real>(p: &[T], q: &[T], cost: &[Vec<T>]) -> Result<T> {
    let m = p.len();
    if q.len() != m || cost.len() != m || cost.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidArgument("dimension mismatch in transport problem".into()));
    }
    check_simplex(p)?;
    check_simplex(q)?;
    if cost.iter().flatten().any(|&c| !(c >= T::zero())) {
        return Err(Error::InvalidArgument("negative ground cost".into()));
    }

    // nodes: 0 = source, 1..=m supplies, m+1..=2m demands, 2m+1 = sink
    let n = 2 * m + 2;
    let sink = n - 1;
    let mut edges: Vec<Edge<T>> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    let add = |edges: &mut Vec<Edge<T>>, adj: &mut Vec<Vec<usize>>, a: usize, b: usize, cap: T, cost: T| {
        adj[a].push(edges.len());
        edges.push(Edge { to: b, cap, cost });
        adj[b].push(edges.len());
        edges.push(Edge {
            to: a,
            cap: T::zero(),
            cost: -cost,
        });
    };
    let unbounded = T::lit(2.0);
    for i in 0..m {
        add(&mut edges, &mut adj, 0, 1 + i, p[i], T::zero());
        add(&mut edges, &mut adj, 1 + m + i, sink, q[i], T::zero());
        for j in 0..m {
            add(&mut edges, &mut adj, 1 + i, 1 + m + j, unbounded, cost[i][j]);
        }
    }

    let eps = T::epsilon() * T::lit(64.0);
    let mut total = T::zero();
    let mut remaining: T = p.iter().copied().sum();
    // Each augmentation saturates a source or sink arc.
    for _ in 0..(2 * m + 2) {
        if remaining <= eps {
            break;
        }
        // Bellman-Ford over the residual graph.
        let mut dist = vec![T::infinity(); n];
        let mut via: Vec<Option<usize>> = vec![None; n];
        dist[0] = T::zero();
        for _ in 0..n {
            let mut changed = false;
            for u in 0..n {
                if dist[u] == T::infinity() {
                    continue;
                }
                for &e in &adj[u] {
                    let edge = &edges[e];
                    if edge.cap > eps && dist[u] + edge.cost < dist[edge.to] - eps {
                        dist[edge.to] = dist[u] + edge.cost;
                        via[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink] == T::infinity() {
            break;
        }
        let mut bottleneck = T::infinity();
        let mut v = sink;
        while let Some(e) = via[v] {
            bottleneck = bottleneck.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while let Some(e) = via[v] {
            edges[e].cap = edges[e].cap - bottleneck;
            edges[e ^ 1].cap = edges[e ^ 1].cap + bottleneck;
            total = total + bottleneck * edges[e].cost;
            v = edges[e ^ 1].to;
        }
        remaining = remaining - bottleneck;
    }
    Ok(total)
}

/// Transport LP on two distributions of the same scheme.
pub fn emd_lp_oracle<T: Real>(p: &Distribution<T>, q: &Distribution<T>, cost: &[Vec<T>]) -> Result<T> {
    if p.scheme != q.scheme {
        return Err(Error::SchemeMismatch(p.scheme.to_string(), q.scheme.to_string()));
    }
    emd_lp(&p.p, &q.p, cost)
}
