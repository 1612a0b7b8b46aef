//! Primal network simplex for balanced transportation problems.
//!
//! Sources `0..m`, sinks `m..m+k`, and an artificial root joined to every
//! node by a high-cost arc that forms the initial spanning tree. Costs are
//! integers; flows are reals. Node potentials satisfy
//! `cost + π[source] − π[target] = 0` on every tree arc.

use std::collections::VecDeque;

use crate::error::{Error, Result};

pub(crate) struct Solution {
    /// Row-major `m × k` flows.
    pub flow: Vec<f64>,
    /// Potentials of the sources followed by the sinks.
    pub potentials: Vec<i64>,
}

struct Network<'a> {
    m: usize,
    k: usize,
    cost: &'a [i64],
    art_cost: i64,
    flow: Vec<f64>,
    pi: Vec<i64>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    depth: Vec<usize>,
    adjacent: Vec<Vec<usize>>,
    in_tree: Vec<bool>,
}

impl Network<'_> {
    fn real_arcs(&self) -> usize {
        self.m * self.k
    }

    fn root(&self) -> usize {
        self.m + self.k
    }

    fn ends(&self, arc: usize) -> (usize, usize) {
        let real = self.real_arcs();
        if arc < real {
            (arc / self.k, self.m + arc % self.k)
        } else {
            let u = arc - real;
            if u < self.m {
                (u, self.root())
            } else {
                (self.root(), u)
            }
        }
    }

    fn arc_cost(&self, arc: usize) -> i64 {
        if arc < self.real_arcs() {
            self.cost[arc]
        } else {
            self.art_cost
        }
    }

    fn reduced_cost(&self, arc: usize) -> i64 {
        let (s, t) = self.ends(arc);
        self.cost[arc] + self.pi[s] - self.pi[t]
    }

    fn detach(&mut self, u: usize, arc: usize) {
        let list = &mut self.adjacent[u];
        let pos = list.iter().position(|&a| a == arc).expect("tree arc in adjacency");
        list.swap_remove(pos);
    }

    /// Hangs the subtree containing `root` below `parent` via `arc`,
    /// recomputing parents, depths and potentials inside it.
    fn reroot(&mut self, root: usize, parent: usize, arc: usize) {
        let mut queue = VecDeque::new();
        self.attach(root, parent, arc);
        queue.push_back(root);
        while let Some(v) = queue.pop_front() {
            for idx in 0..self.adjacent[v].len() {
                let a = self.adjacent[v][idx];
                if a == self.pred[v] {
                    continue;
                }
                let (s, t) = self.ends(a);
                let w = if s == v { t } else { s };
                self.attach(w, v, a);
                queue.push_back(w);
            }
        }
        self.adjacent[root].push(arc);
        self.adjacent[parent].push(arc);
    }

    fn attach(&mut self, v: usize, parent: usize, arc: usize) {
        self.parent[v] = parent;
        self.pred[v] = arc;
        self.depth[v] = self.depth[parent] + 1;
        let c = self.arc_cost(arc);
        let (s, _) = self.ends(arc);
        self.pi[v] = if s == parent { self.pi[parent] + c } else { self.pi[parent] - c };
    }
}

/// Solves `min Σ cost·flow` subject to row sums `supply` and column sums
/// `demand`. Both must be positive and have (nearly) equal totals.
pub(crate) fn solve(supply: &[f64], demand: &[f64], cost: &[i64]) -> Result<Solution> {
    let (m, k) = (supply.len(), demand.len());
    debug_assert_eq!(cost.len(), m * k);
    let nodes = m + k + 1;
    let root = m + k;
    let max_cost = cost.iter().copied().max().unwrap_or(0).max(0);
    let art_cost = (max_cost + 1).saturating_mul(nodes as i64 + 1);
    let real = m * k;

    let mut net = Network {
        m,
        k,
        cost,
        art_cost,
        flow: vec![0.0; real + m + k],
        pi: vec![0; nodes],
        parent: vec![root; nodes],
        pred: vec![usize::MAX; nodes],
        depth: vec![0; nodes],
        adjacent: vec![Vec::new(); nodes],
        in_tree: vec![false; real + m + k],
    };
    for u in 0..m + k {
        let arc = real + u;
        net.flow[arc] = if u < m { supply[u] } else { demand[u - m] };
        net.pred[u] = arc;
        net.depth[u] = 1;
        net.pi[u] = if u < m { -art_cost } else { art_cost };
        net.in_tree[arc] = true;
        net.adjacent[u].push(arc);
        net.adjacent[root].push(arc);
    }

    let block = ((real as f64).sqrt().ceil() as usize).max(10).min(real.max(1));
    let mut next = 0usize;
    let max_pivots = 50 * (real + nodes) + 1000;
    let mut pivots = 0;

    loop {
        // Block search pricing over real arcs.
        let mut entering = None;
        let mut best = 0i64;
        let mut scanned = 0;
        let mut in_block = 0;
        while scanned < real {
            let a = next;
            next += 1;
            if next == real {
                next = 0;
            }
            scanned += 1;
            in_block += 1;
            if !net.in_tree[a] {
                let rc = net.reduced_cost(a);
                if rc < best {
                    best = rc;
                    entering = Some(a);
                }
            }
            if in_block == block {
                if entering.is_some() {
                    break;
                }
                in_block = 0;
            }
        }
        let Some(enter) = entering else { break };
        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::Solver(format!("no optimum after {max_pivots} pivots")));
        }

        let (first, second) = net.ends(enter);
        // Join: lowest common ancestor of the entering arc's ends.
        let (mut a, mut b) = (first, second);
        while a != b {
            if net.depth[a] >= net.depth[b] {
                a = net.parent[a];
            } else {
                b = net.parent[b];
            }
        }
        let join = a;

        // Leaving arc: flow decreases on up-arcs of the first path and on
        // down-arcs of the second path.
        let mut delta = f64::INFINITY;
        let mut leave_node = usize::MAX;
        let mut leave_on_first = true;
        let mut u = first;
        while u != join {
            let e = net.pred[u];
            if net.ends(e).0 == u && net.flow[e] < delta {
                delta = net.flow[e];
                leave_node = u;
            }
            u = net.parent[u];
        }
        let mut u = second;
        while u != join {
            let e = net.pred[u];
            if net.ends(e).1 == u && net.flow[e] <= delta {
                delta = net.flow[e];
                leave_node = u;
                leave_on_first = false;
            }
            u = net.parent[u];
        }
        if leave_node == usize::MAX {
            return Err(Error::Solver("unbounded pivot".into()));
        }
        let delta = delta.max(0.0);

        // Augment around the cycle.
        if delta > 0.0 {
            net.flow[enter] += delta;
            let mut u = first;
            while u != join {
                let e = net.pred[u];
                if net.ends(e).0 == u {
                    net.flow[e] = (net.flow[e] - delta).max(0.0);
                } else {
                    net.flow[e] += delta;
                }
                u = net.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = net.pred[u];
                if net.ends(e).1 == u {
                    net.flow[e] = (net.flow[e] - delta).max(0.0);
                } else {
                    net.flow[e] += delta;
                }
                u = net.parent[u];
            }
        }
        let leave = net.pred[leave_node];
        net.flow[leave] = 0.0;

        // Swap the arcs and re-hang the cut subtree.
        let cut_parent = net.parent[leave_node];
        net.detach(leave_node, leave);
        net.detach(cut_parent, leave);
        net.in_tree[leave] = false;
        net.in_tree[enter] = true;
        if leave_on_first {
            net.reroot(first, second, enter);
        } else {
            net.reroot(second, first, enter);
        }
    }

    let residual: f64 = net.flow[real..].iter().sum();
    if residual > 1e-9 {
        return Err(Error::Solver(format!("infeasible: {residual:e} left on artificial arcs")));
    }
    net.flow.truncate(real);
    net.pi.truncate(m + k);
    Ok(Solution {
        flow: net.flow,
        potentials: net.pi,
    })
}
