//! Exact solver for the discrete transportation problem.
//!
//! Min-cost flow by successive shortest augmenting paths with Johnson
//! potentials on the bipartite supply/demand graph. Costs are nonnegative,
//! so plain Dijkstra applies from the start; each augmentation saturates at
//! least one supply or demand node, so there are at most `k1 + k2`
//! augmentations.

#[derive(Clone, Copy)]
struct Edge {
    to: usize,
    cap: f64,
    cost: f64,
    rev: usize,
}

struct Graph {
    adj: Vec<Vec<Edge>>,
}

impl Graph {
    fn new(n: usize) -> Self {
        Self { adj: vec![Vec::new(); n] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64, cost: f64) {
        let rev_from = self.adj[to].len();
        let rev_to = self.adj[from].len();
        self.adj[from].push(Edge { to, cap, cost, rev: rev_from });
        self.adj[to].push(Edge { to: from, cap: 0.0, cost: -cost, rev: rev_to });
    }
}

const MASS_EPS: f64 = 1e-15;

/// Minimal total cost of moving `supply` onto `demand` where moving one
/// unit from supply atom `i` to demand atom `j` costs `cost(i, j) >= 0`.
/// Both sides must carry (approximately) equal total mass.
pub(crate) fn min_cost_transport<C>(supply: &[f64], demand: &[f64], cost: C) -> f64
where
    C: Fn(usize, usize) -> f64,
{
    let k1 = supply.len();
    let k2 = demand.len();
    let n = k1 + k2 + 2;
    let source = 0;
    let sink = n - 1;

    let mut g = Graph::new(n);
    for (i, &w) in supply.iter().enumerate() {
        if w > MASS_EPS {
            g.add_edge(source, 1 + i, w, 0.0);
        }
    }
    for (j, &w) in demand.iter().enumerate() {
        if w > MASS_EPS {
            g.add_edge(1 + k1 + j, sink, w, 0.0);
        }
    }
    for i in 0..k1 {
        if supply[i] <= MASS_EPS {
            continue;
        }
        for j in 0..k2 {
            if demand[j] <= MASS_EPS {
                continue;
            }
            g.add_edge(1 + i, 1 + k1 + j, f64::INFINITY, cost(i, j));
        }
    }

    let mut remaining: f64 = supply.iter().filter(|&&w| w > MASS_EPS).sum();
    let mut potential = vec![0.0f64; n];
    let mut dist = vec![0.0f64; n];
    let mut prev = vec![(usize::MAX, usize::MAX); n];

    while remaining > 1e-12 {
        // Dijkstra over reduced costs
        use std::cmp::Reverse;
        use std::collections::BinaryHeap;

        dist.fill(f64::INFINITY);
        prev.fill((usize::MAX, usize::MAX));
        dist[source] = 0.0;
        let mut heap: BinaryHeap<(Reverse<OrderedF64>, usize)> = BinaryHeap::new();
        heap.push((Reverse(OrderedF64(0.0)), source));
        while let Some((Reverse(du), u)) = heap.pop() {
            if du.0 > dist[u] {
                continue;
            }
            for (ei, e) in g.adj[u].iter().enumerate() {
                if e.cap <= MASS_EPS {
                    continue;
                }
                // float rounding can push reduced costs epsilon-negative
                let reduced = (e.cost + potential[u] - potential[e.to]).max(0.0);
                let nd = dist[u] + reduced;
                if nd < dist[e.to] {
                    dist[e.to] = nd;
                    prev[e.to] = (u, ei);
                    heap.push((Reverse(OrderedF64(nd)), e.to));
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        for v in 0..n {
            if dist[v].is_finite() {
                potential[v] += dist[v];
            }
        }

        let mut bottleneck = remaining;
        let mut v = sink;
        while v != source {
            let (u, ei) = prev[v];
            bottleneck = bottleneck.min(g.adj[u][ei].cap);
            v = u;
        }
        let mut v = sink;
        while v != source {
            let (u, ei) = prev[v];
            let rev = g.adj[u][ei].rev;
            g.adj[u][ei].cap -= bottleneck;
            g.adj[v][rev].cap += bottleneck;
            v = u;
        }
        remaining -= bottleneck;
    }

    // total cost read off the reverse-edge flows
    let mut total = 0.0;
    for i in 0..k1 {
        for e in &g.adj[1 + i] {
            if e.to >= 1 + k1 && e.to < 1 + k1 + k2 && e.cost >= 0.0 {
                let flow = g.adj[e.to][e.rev].cap;
                if flow > 0.0 {
                    total += flow * e.cost;
                }
            }
        }
    }
    total
}

#[derive(PartialEq, PartialOrd)]
struct OrderedF64(f64);

impl Eq for OrderedF64 {}

#[allow(clippy::derive_ord_xor_partial_ord)]
impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).unwrap_or(std::cmp::Ordering::Equal)
    }
}
