use petgraph::algo::{connected_components, dijkstra};
use petgraph::graph::{NodeIndex, UnGraph};
use serde::Serialize;

use crate::{Result, WarpError};

/// Undirected graph with non-negative edge weights on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedGraph {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            edges: Vec::new(),
        }
    }

    pub fn add_edge(&mut self, i: usize, j: usize, w: f64) {
        self.edges.push((i, j, w));
    }

    /// Same graph with every weight multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            nodes: self.nodes,
            edges: self.edges.iter().map(|&(i, j, w)| (i, j, w * factor)).collect(),
        }
    }

    fn to_petgraph(&self) -> UnGraph<(), f64> {
        let mut g = UnGraph::with_capacity(self.nodes, self.edges.len());
        for _ in 0..self.nodes {
            g.add_node(());
        }
        for &(i, j, w) in &self.edges {
            g.add_edge(NodeIndex::new(i), NodeIndex::new(j), w);
        }
        g
    }

    /// Shortest-path distances from `src`; unreachable nodes get `+∞`.
    pub fn distances_from(&self, src: usize) -> Vec<f64> {
        let g = self.to_petgraph();
        distances_in(&g, src, self.nodes)
    }

    /// All-pairs shortest paths by repeated Dijkstra, made exactly symmetric.
    pub fn all_pairs(&self) -> Vec<Vec<f64>> {
        let g = self.to_petgraph();
        let mut d: Vec<Vec<f64>> = (0..self.nodes).map(|s| distances_in(&g, s, self.nodes)).collect();
        // A path and its reversal can sum to values one ulp apart.
        for i in 0..self.nodes {
            for j in 0..i {
                let m = d[i][j].min(d[j][i]);
                d[i][j] = m;
                d[j][i] = m;
            }
        }
        d
    }

    pub fn is_connected(&self) -> bool {
        self.nodes <= 1 || connected_components(&self.to_petgraph()) == 1
    }

    /// Largest finite shortest-path distance.
    pub fn diameter(&self) -> f64 {
        self.all_pairs()
            .iter()
            .flatten()
            .copied()
            .filter(|d| d.is_finite())
            .fold(0.0, f64::max)
    }

    /// Combinatorial Laplacian `D - A` of the weighted adjacency, as a dense row-major matrix.
    pub fn laplacian(&self) -> Vec<Vec<f64>> {
        let n = self.nodes;
        let mut l = vec![vec![0.0; n]; n];
        for &(i, j, w) in &self.edges {
            if i == j {
                continue;
            }
            l[i][j] -= w;
            l[j][i] -= w;
            l[i][i] += w;
            l[j][j] += w;
        }
        l
    }
}

pub(crate) fn distances_in(g: &UnGraph<(), f64>, src: usize, n: usize) -> Vec<f64> {
    let found = dijkstra(g, NodeIndex::new(src), None, |e| *e.weight());
    let mut out = vec![f64::INFINITY; n];
    for (node, d) in found {
        out[node.index()] = d;
    }
    out
}

/// Cayley graph of `ℤ/2^depth` with generators `±1`, unit weights.
///
/// For `depth = 1` the two generators coincide and a single edge is kept.
pub fn box_space_graph(depth: u32) -> Result<WeightedGraph> {
    if depth == 0 || depth > 24 {
        return Err(WarpError::Precondition(format!(
            "box space depth must lie in 1..=24, got {depth}"
        )));
    }
    let n = 1usize << depth;
    let mut g = WeightedGraph::new(n);
    if n == 2 {
        g.add_edge(0, 1, 1.0);
    } else {
        for i in 0..n {
            g.add_edge(i, (i + 1) % n, 1.0);
        }
    }
    Ok(g)
}

/// Quasi-isometry constants `(L, C)` of a correspondence between two graphs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Distortion {
    pub l: f64,
    pub c: f64,
    /// Pairs compared (both distances finite).
    pub pairs: usize,
}

/// Smallest `C ≥ 0` making `d_A/L - C ≤ d_B ≤ L·d_A + C` hold on all pairs.
fn additive_constant(pairs: &[(f64, f64)], l: f64) -> f64 {
    pairs
        .iter()
        .map(|&(a, b)| (b - l * a).max(a / l - b))
        .fold(0.0, f64::max)
}

/// Quasi-isometry constants of `correspondence: A → B` over all node pairs of `A`.
///
/// `L ≥ 1` minimizes `L + C(L)`, where `C(L)` is the least additive constant
/// for that `L`; the objective is convex in `L`.
pub fn distortion(
    a: &WeightedGraph,
    b: &WeightedGraph,
    correspondence: &[usize],
) -> Result<Distortion> {
    if correspondence.is_empty() || correspondence.len() != a.nodes {
        return Err(WarpError::Domain(format!(
            "correspondence must map all {} nodes of the first graph",
            a.nodes
        )));
    }
    if let Some(&bad) = correspondence.iter().find(|&&j| j >= b.nodes) {
        return Err(WarpError::Domain(format!(
            "correspondence target {bad} is not a node of the second graph"
        )));
    }
    let da = a.all_pairs();
    let gb = b.to_petgraph();
    let mut pairs = Vec::new();
    for i in 0..a.nodes {
        let db = distances_in(&gb, correspondence[i], b.nodes);
        for j in 0..i {
            let (x, y) = (da[i][j], db[correspondence[j]]);
            if x.is_finite() && y.is_finite() {
                pairs.push((x, y));
            }
        }
    }

    let objective = |l: f64| l + additive_constant(&pairs, l);
    let mut candidates = vec![1.0];
    for &(x, y) in &pairs {
        if x > 0.0 && y > 0.0 {
            candidates.push((y / x).max(x / y));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let hi = *candidates.last().unwrap_or(&1.0);
    if candidates.len() > 2000 {
        let step = candidates.len() / 2000;
        candidates = candidates.into_iter().step_by(step).collect();
    }
    // Golden-section search covers minima between ratio breakpoints.
    let (mut lo, mut up) = (1.0, hi.max(1.0));
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = up - g * (up - lo);
        let m2 = lo + g * (up - lo);
        if objective(m1) <= objective(m2) {
            up = m2;
        } else {
            lo = m1;
        }
    }
    candidates.push(0.5 * (lo + up));

    // Near-ties go to the smaller additive constant, then to the smaller L.
    let mut best = (1.0, objective(1.0), additive_constant(&pairs, 1.0));
    for &l in &candidates {
        let (v, c) = (objective(l), additive_constant(&pairs, l));
        let tie = (v - best.1).abs() <= 1e-12;
        if v < best.1 - 1e-12 || (tie && (c < best.2 || (c == best.2 && l < best.0))) {
            best = (l, v, c);
        }
    }
    Ok(Distortion {
        l: best.0,
        c: best.2,
        pairs: pairs.len(),
    })
}
