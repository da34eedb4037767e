//! Primal network simplex for the balanced transportation problem.
//!
//! Sources `0..m` ship to sinks `m..m+n` over a complete bipartite graph; an
//! artificial root is joined to every node by an artificial arc carrying the
//! initial flow. Artificial arcs cost one unit of a symbolic big constant, so
//! node potentials are kept as `(multiple of big constant, real part)` pairs
//! and compared lexicographically. The spanning tree is kept strongly
//! feasible (zero-flow arcs point away from the root), which rules out
//! cycling under degenerate pivots.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
struct Lex {
    big: i64,
    real: f64,
}

impl Lex {
    const ZERO: Lex = Lex { big: 0, real: 0.0 };
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SimplexStats {
    pub pivots: usize,
    pub degenerate_pivots: usize,
    pub basis_size: usize,
}

#[derive(Debug, Clone)]
pub struct TransportSolution {
    /// `(source, sink, flow)` for every positive flow.
    pub flows: Vec<(usize, usize, f64)>,
    pub cost: f64,
    /// Dual variables with `u[i] + v[j] <= cost[i][j]`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub stats: SimplexStats,
}

struct Network<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    flow: Vec<f64>,
    in_tree: Vec<bool>,
    adj: Vec<Vec<usize>>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    up: Vec<bool>,
    depth: Vec<usize>,
    pi: Vec<Lex>,
}

impl Network<'_> {
    fn root(&self) -> usize {
        self.m + self.n
    }

    fn real_arcs(&self) -> usize {
        self.m * self.n
    }

    fn endpoints(&self, arc: usize) -> (usize, usize) {
        let real = self.real_arcs();
        if arc < real {
            (arc / self.n, self.m + arc % self.n)
        } else {
            let k = arc - real;
            if k < self.m {
                (k, self.root())
            } else {
                (self.root(), k)
            }
        }
    }

    fn arc_cost(&self, arc: usize) -> Lex {
        if arc < self.real_arcs() {
            Lex {
                big: 0,
                real: self.cost[arc],
            }
        } else {
            Lex { big: 1, real: 0.0 }
        }
    }

    fn reduced_cost(&self, arc: usize) -> Lex {
        let (s, t) = self.endpoints(arc);
        let c = self.arc_cost(arc);
        Lex {
            big: c.big + self.pi[s].big - self.pi[t].big,
            real: c.real + self.pi[s].real - self.pi[t].real,
        }
    }

    /// Recomputes parents, depths and potentials from the tree arcs.
    fn rebuild(&mut self) {
        let root = self.root();
        self.parent.iter_mut().for_each(|p| *p = NONE);
        self.parent[root] = root;
        self.depth[root] = 0;
        self.pi[root] = Lex::ZERO;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for idx in 0..self.adj[u].len() {
                let e = self.adj[u][idx];
                let (s, t) = self.endpoints(e);
                let other = if s == u { t } else { s };
                if self.parent[other] != NONE {
                    continue;
                }
                let c = self.arc_cost(e);
                self.parent[other] = u;
                self.pred[other] = e;
                self.depth[other] = self.depth[u] + 1;
                self.up[other] = s == other;
                self.pi[other] = if s == other {
                    Lex {
                        big: self.pi[u].big - c.big,
                        real: self.pi[u].real - c.real,
                    }
                } else {
                    Lex {
                        big: self.pi[u].big + c.big,
                        real: self.pi[u].real + c.real,
                    }
                };
                queue.push_back(other);
            }
        }
    }

    fn join(&self, mut a: usize, mut b: usize) -> usize {
        while a != b {
            if self.depth[a] >= self.depth[b] {
                a = self.parent[a];
            } else {
                b = self.parent[b];
            }
        }
        a
    }

    /// Pivots `entering` into the tree. Returns the step length.
    fn pivot(&mut self, entering: usize) -> Result<f64> {
        let (first, second) = self.endpoints(entering);
        let join = self.join(first, second);
        let mut delta = f64::INFINITY;
        let mut leaving_node = NONE;
        // The strict / non-strict split selects the last blocking arc met
        // when walking the cycle from the join node in its orientation.
        let mut u = first;
        while u != join {
            if self.up[u] && self.flow[self.pred[u]] < delta {
                delta = self.flow[self.pred[u]];
                leaving_node = u;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != join {
            if !self.up[u] && self.flow[self.pred[u]] <= delta {
                delta = self.flow[self.pred[u]];
                leaving_node = u;
            }
            u = self.parent[u];
        }
        if leaving_node == NONE {
            return Err(Error::Solver("unbounded pivot cycle".into()));
        }
        let leaving = self.pred[leaving_node];

        if delta > 0.0 {
            self.flow[entering] += delta;
            let mut u = first;
            while u != join {
                let e = self.pred[u];
                if self.up[u] {
                    self.flow[e] -= delta;
                } else {
                    self.flow[e] += delta;
                }
                u = self.parent[u];
            }
            let mut u = second;
            while u != join {
                let e = self.pred[u];
                if self.up[u] {
                    self.flow[e] += delta;
                } else {
                    self.flow[e] -= delta;
                }
                u = self.parent[u];
            }
        }
        self.flow[leaving] = 0.0;

        let (ls, lt) = self.endpoints(leaving);
        for node in [ls, lt] {
            let pos = self.adj[node]
                .iter()
                .position(|&e| e == leaving)
                .expect("leaving arc is in the tree");
            self.adj[node].swap_remove(pos);
        }
        self.in_tree[leaving] = false;
        self.adj[first].push(entering);
        self.adj[second].push(entering);
        self.in_tree[entering] = true;
        self.rebuild();
        Ok(delta)
    }
}

/// Solves `min sum cost[i*n+j] x_ij` over `x >= 0` with row sums `supply`
/// and column sums `demand`. Entries must be strictly positive and the two
/// totals equal up to rounding.
pub fn solve_transport(supply: &[f64], demand: &[f64], cost: &[f64]) -> Result<TransportSolution> {
    let m = supply.len();
    let n = demand.len();
    if m == 0 || n == 0 {
        return Err(Error::Solver("empty transport problem".into()));
    }
    if cost.len() != m * n {
        return Err(Error::Solver("cost matrix has wrong size".into()));
    }
    if supply.iter().chain(demand).any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(Error::Solver("supplies and demands must be positive".into()));
    }
    let nodes = m + n + 1;
    let arcs = m * n + m + n;
    let mut net = Network {
        m,
        n,
        cost,
        flow: vec![0.0; arcs],
        in_tree: vec![false; arcs],
        adj: vec![Vec::new(); nodes],
        parent: vec![NONE; nodes],
        pred: vec![NONE; nodes],
        up: vec![false; nodes],
        depth: vec![0; nodes],
        pi: vec![Lex::ZERO; nodes],
    };
    for k in 0..m + n {
        let arc = m * n + k;
        net.flow[arc] = if k < m { supply[k] } else { demand[k - m] };
        net.in_tree[arc] = true;
        net.adj[k].push(arc);
        net.adj[m + n].push(arc);
    }
    net.rebuild();

    let cmax = cost.iter().fold(0.0f64, |a, &c| a.max(c.abs()));
    let eps = 1e-12 * cmax.max(f64::MIN_POSITIVE);
    let block = ((arcs as f64).sqrt().ceil() as usize).max(16);
    let max_pivots = 100 * arcs + 1000;
    let mut stats = SimplexStats::default();
    let mut cursor = 0;

    loop {
        // Block search: best candidate within each block of arcs.
        let mut best: Option<(usize, Lex)> = None;
        let mut scanned = 0;
        let mut e = cursor;
        while scanned < arcs {
            if !net.in_tree[e] {
                let rc = net.reduced_cost(e);
                let improving = rc.big < 0 || (rc.big == 0 && rc.real < -eps);
                if improving && best.is_none_or(|(_, b)| rc < b) {
                    best = Some((e, rc));
                }
            }
            scanned += 1;
            e = if e + 1 == arcs { 0 } else { e + 1 };
            if best.is_some() && (scanned % block == 0 || scanned == arcs) {
                break;
            }
        }
        let Some((entering, _)) = best else { break };
        cursor = e;
        if stats.pivots >= max_pivots {
            return Err(Error::Solver(format!("pivot cap {max_pivots} reached")));
        }
        let delta = net.pivot(entering)?;
        stats.pivots += 1;
        if delta == 0.0 {
            stats.degenerate_pivots += 1;
        }
    }

    let total: f64 = supply.iter().sum();
    let residual: f64 = net.flow[m * n..].iter().sum();
    if residual > 1e-9 * total {
        return Err(Error::Solver(format!(
            "artificial flow {residual:e} left at optimum"
        )));
    }

    let mut flows = Vec::new();
    let mut objective = 0.0;
    for i in 0..m {
        for j in 0..n {
            let f = net.flow[i * n + j];
            if f > 0.0 {
                flows.push((i, j, f));
                objective += f * cost[i * n + j];
            }
        }
    }
    stats.basis_size = net.in_tree.iter().filter(|&&t| t).count();
    Ok(TransportSolution {
        flows,
        cost: objective,
        u: (0..m).map(|i| -net.pi[i].real).collect(),
        v: (0..n).map(|j| net.pi[m + j].real).collect(),
        stats,
    })
}
