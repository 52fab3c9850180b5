//! Minimum-cost flow by successive shortest paths with Johnson potentials.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Capacity used for arcs without a bound.
pub const UNBOUNDED: i64 = i64::MAX / 4;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Arc {
    to: usize,
    cap: i64,
    cost: f64,
}

/// A directed network with non-negative arc costs.
#[derive(Debug, Clone, Default)]
pub struct FlowNetwork {
    n: usize,
    /// Forward arcs at even indices, their residual twins at odd ones.
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSolution {
    /// Flow on every arc, in insertion order.
    pub flow: Vec<i64>,
    pub cost: f64,
}

#[derive(PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl FlowNetwork {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            arcs: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.n
    }

    /// Adds an arc and returns its index.
    pub fn add_arc(&mut self, from: usize, to: usize, cap: i64, cost: f64) -> usize {
        assert!(cost >= 0.0, "arc costs must be non-negative");
        let id = self.arcs.len() / 2;
        self.adj[from].push(self.arcs.len());
        self.arcs.push(Arc { to, cap, cost });
        self.adj[to].push(self.arcs.len());
        self.arcs.push(Arc {
            to: from,
            cap: 0,
            cost: -cost,
        });
        id
    }

    /// Routes `supply[v]` units out of every node (negative = demand) at
    /// minimum cost. Supplies must sum to zero.
    pub fn min_cost_flow(&self, supply: &[i64]) -> Result<FlowSolution> {
        if supply.len() != self.n {
            return Err(Error::DimensionMismatch("supply length differs from node count".into()));
        }
        if supply.iter().sum::<i64>() != 0 {
            return Err(Error::Validation("supplies do not balance".into()));
        }
        let original_arcs = self.arcs.len() / 2;
        let mut net = self.clone();
        let s = net.n;
        let t = net.n + 1;
        net.n += 2;
        net.adj.push(Vec::new());
        net.adj.push(Vec::new());
        let mut need = 0i64;
        for (v, &b) in supply.iter().enumerate() {
            if b > 0 {
                net.add_arc(s, v, b, 0.0);
                need += b;
            } else if b < 0 {
                net.add_arc(v, t, -b, 0.0);
            }
        }
        let mut pot = vec![0.0; net.n];
        let mut dist = vec![f64::INFINITY; net.n];
        let mut prev = vec![usize::MAX; net.n];
        while need > 0 {
            dist.iter_mut().for_each(|d| *d = f64::INFINITY);
            prev.iter_mut().for_each(|p| *p = usize::MAX);
            dist[s] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(Item(0.0, s));
            while let Some(Item(d, u)) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &a in &net.adj[u] {
                    let arc = net.arcs[a];
                    if arc.cap <= 0 {
                        continue;
                    }
                    let rc = (arc.cost + pot[u] - pot[arc.to]).max(0.0);
                    let nd = d + rc;
                    if nd < dist[arc.to] {
                        dist[arc.to] = nd;
                        prev[arc.to] = a;
                        heap.push(Item(nd, arc.to));
                    }
                }
            }
            if !dist[t].is_finite() {
                return Err(Error::Validation("demand cannot be routed".into()));
            }
            for v in 0..net.n {
                if dist[v].is_finite() {
                    pot[v] += dist[v];
                }
            }
            let mut push = need;
            let mut v = t;
            while v != s {
                let a = prev[v];
                push = push.min(net.arcs[a].cap);
                v = net.arcs[a ^ 1].to;
            }
            let mut v = t;
            while v != s {
                let a = prev[v];
                net.arcs[a].cap -= push;
                net.arcs[a ^ 1].cap += push;
                v = net.arcs[a ^ 1].to;
            }
            need -= push;
        }
        let flow: Vec<i64> = (0..original_arcs).map(|i| net.arcs[2 * i + 1].cap).collect();
        let cost = flow
            .iter()
            .enumerate()
            .map(|(i, &f)| f as f64 * self.arcs[2 * i].cost)
            .sum();
        Ok(FlowSolution { flow, cost })
    }
}
