//! Most-reliable-path routing.
//!
//! Maximizing a product of independent link probabilities is the same as
//! minimizing the sum of `-ln p`, so routes come from Dijkstra on the complete
//! graph with those weights. Ties are broken on `(weight, hop count, first
//! hop id)`; weights within a relative `1e-12` count as equal.

use crate::radio::NodeId;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

/// Dense symmetric graph of `-ln p` weights. `+inf` marks an absent edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityGraph<T> {
    n: usize,
    weights: Vec<T>,
}

impl<T: Real> ReliabilityGraph<T> {
    /// Builds from a probability lookup over unordered pairs `i < j`.
    pub fn from_fn(n: usize, mut p_hat: impl FnMut(NodeId, NodeId) -> T) -> Self {
        let mut weights = vec![T::infinity(); n * n];
        for i in 0..n {
            weights[i * n + i] = T::zero();
            for j in (i + 1)..n {
                let w = link_weight(p_hat(i, j));
                weights[i * n + j] = w;
                weights[j * n + i] = w;
            }
        }
        Self { n, weights }
    }

    /// From a full `n x n` row-major probability matrix (upper triangle used).
    pub fn from_matrix(n: usize, p: &[T]) -> Self {
        assert_eq!(p.len(), n * n);
        Self::from_fn(n, |i, j| p[i * n + j])
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn weight(&self, i: NodeId, j: NodeId) -> T {
        self.weights[i * self.n + j]
    }
}

/// `-ln p`, with `p <= 0` mapped to an absent edge.
pub fn link_weight<T: Real>(p: T) -> T {
    if !(p > T::zero()) {
        T::infinity()
    } else {
        (-p.min(T::one()).ln()).max(T::zero())
    }
}

pub fn build_graph<T: Real>(n: usize, p_hat: impl FnMut(NodeId, NodeId) -> T) -> ReliabilityGraph<T> {
    ReliabilityGraph::from_fn(n, p_hat)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Route<T> {
    pub next_hop: NodeId,
    pub hops: usize,
    pub weight: T,
    /// `exp(-weight)`: product of link probabilities along the path.
    pub reliability: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTable<T> {
    pub source: NodeId,
    routes: Vec<Option<Route<T>>>,
    parent: Vec<Option<NodeId>>,
}

impl<T: Real> RoutingTable<T> {
    pub fn route(&self, dst: NodeId) -> Option<&Route<T>> {
        self.routes.get(dst).and_then(Option::as_ref)
    }

    pub fn next_hop(&self, dst: NodeId) -> Option<NodeId> {
        self.route(dst).map(|r| r.next_hop)
    }

    pub fn is_reachable(&self, dst: NodeId) -> bool {
        self.route(dst).is_some()
    }

    /// Full node sequence `source .. dst`.
    pub fn path(&self, dst: NodeId) -> Option<Vec<NodeId>> {
        self.route(dst)?;
        let mut path = vec![dst];
        let mut v = dst;
        while let Some(p) = self.parent[v] {
            path.push(p);
            v = p;
        }
        path.reverse();
        Some(path)
    }
}

#[derive(Clone, Copy)]
struct Label<T> {
    weight: T,
    hops: usize,
    first_hop: NodeId,
}

fn tie_tolerance<T: Real>(a: T, b: T) -> T {
    let scale = T::one().max(a.abs()).max(b.abs());
    T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) * scale
}

/// Strict lexicographic "better than".
fn better<T: Real>(a: &Label<T>, b: &Label<T>) -> bool {
    if b.weight.is_infinite() && a.weight.is_finite() {
        return true;
    }
    let tol = tie_tolerance(a.weight, b.weight);
    if a.weight < b.weight - tol {
        return true;
    }
    if a.weight > b.weight + tol {
        return false;
    }
    (a.hops, a.first_hop) < (b.hops, b.first_hop)
}

/// Shortest-path tree from `source` under `-ln p` weights (dense Dijkstra).
pub fn most_reliable_paths<T: Real>(graph: &ReliabilityGraph<T>, source: NodeId) -> RoutingTable<T> {
    let n = graph.n;
    let mut label: Vec<Option<Label<T>>> = vec![None; n];
    let mut parent = vec![None; n];
    let mut done = vec![false; n];
    label[source] = Some(Label { weight: T::zero(), hops: 0, first_hop: source });

    for _ in 0..n {
        let mut pick: Option<NodeId> = None;
        for v in 0..n {
            if done[v] {
                continue;
            }
            if let Some(lv) = &label[v] {
                match pick {
                    Some(u) if !better(lv, label[u].as_ref().expect("picked")) => {}
                    _ => pick = Some(v),
                }
            }
        }
        let Some(u) = pick else { break };
        done[u] = true;
        let lu = label[u].expect("picked");
        for v in 0..n {
            if done[v] {
                continue;
            }
            let w = graph.weight(u, v);
            if w.is_infinite() {
                continue;
            }
            let cand = Label {
                weight: lu.weight + w,
                hops: lu.hops + 1,
                first_hop: if u == source { v } else { lu.first_hop },
            };
            if label[v].as_ref().is_none_or(|cur| better(&cand, cur)) {
                label[v] = Some(cand);
                parent[v] = Some(u);
            }
        }
    }

    let routes = (0..n)
        .map(|v| {
            if v == source {
                return None;
            }
            label[v].map(|l| Route {
                next_hop: l.first_hop,
                hops: l.hops,
                weight: l.weight,
                reliability: (-l.weight).exp(),
            })
        })
        .collect();
    RoutingTable { source, routes, parent }
}
