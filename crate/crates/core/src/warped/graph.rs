use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::quasi::{box_space_graph, distortion, Distortion, WeightedGraph};
use crate::actions::{max_free_radius, ActionSpec};
use crate::spaces::{build_eps_net, group_mul, raw_distance, EpsNet, ModelSpace, NeighborIndex, NetConstruction, Point};
use crate::{Result, WarpError};

/// Samples used when the graph computes the admissible radius of its action.
const FREE_RADIUS_SAMPLES: usize = 1000;

/// Where a generator image `s·p_i` sits when it is used as a ball center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SnapMode {
    /// Replace `s·p_i` by its nearest net point.
    #[default]
    Snap,
    /// Keep the exact image off the net.
    ExactOffnet,
}

impl fmt::Display for SnapMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SnapMode::Snap => "snap",
            SnapMode::ExactOffnet => "exact-offnet",
        })
    }
}

impl FromStr for SnapMode {
    type Err = WarpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "snap" => Ok(SnapMode::Snap),
            "exact-offnet" => Ok(SnapMode::ExactOffnet),
            other => Err(WarpError::Unknown {
                kind: "snap mode",
                name: other.into(),
                known: "snap, exact-offnet".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricEdge {
    pub i: usize,
    pub j: usize,
    /// `t·d(p_i, p_j)`.
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorEdge {
    pub i: usize,
    /// Net point nearest `s·p_i`.
    pub j: usize,
    /// Generator index into the action's set.
    pub s: usize,
    pub weight: f64,
}

/// Net at level `t` with metric and generator edges.
#[derive(Debug, Clone)]
pub struct WarpedGraph {
    pub net: EpsNet,
    pub action: ActionSpec,
    /// Metric edges join points at scaled distance at most `cutoff`.
    pub cutoff: f64,
    pub snap_mode: SnapMode,
    /// Admissible radius of the action in the unscaled metric.
    pub free_radius: f64,
    /// Metric edges with `i < j`.
    pub metric_edges: Vec<MetricEdge>,
    /// One edge per node and generator, identity included.
    pub generator_edges: Vec<GeneratorEdge>,
    /// `snap[s][i]` is the net point nearest `s·p_i`.
    pub snap: Vec<Vec<usize>>,
    /// `images[s][i] = s·p_i`.
    pub images: Vec<Vec<Point>>,
    /// Largest scaled distance between an image and its snapped point.
    pub max_snap_error: f64,
    /// Whether metric plus generator edges connect the net; a disconnected build is flagged, not rejected.
    pub connected: bool,
    weighted: WeightedGraph,
}

impl WarpedGraph {
    pub fn len(&self) -> usize {
        self.net.len()
    }

    pub fn is_empty(&self) -> bool {
        self.net.is_empty()
    }

    pub fn t(&self) -> f64 {
        self.net.t
    }

    /// Largest scaled `r` for which the balls `s·B_r` stay disjoint: `r̂·t`.
    pub fn admissible_radius(&self) -> f64 {
        self.free_radius * self.net.t
    }

    /// The metric and generator edges as a plain weighted graph.
    pub fn weighted(&self) -> &WeightedGraph {
        &self.weighted
    }

    /// Warped distances from node `i` to every node.
    pub fn distances_from(&self, i: usize) -> Vec<f64> {
        self.weighted.distances_from(i)
    }

    /// Center of the ball for generator `s` at node `i` under the graph's snap mode.
    pub fn center(&self, s: usize, i: usize) -> &Point {
        match self.snap_mode {
            SnapMode::Snap => &self.net.points[self.snap[s][i]],
            SnapMode::ExactOffnet => &self.images[s][i],
        }
    }

    /// Sections `(E_r)_x` for every node at once, each sorted by `(s, y)`.
    pub fn controlled_sets(&self, r: f64) -> Result<Vec<Vec<(usize, usize)>>> {
        self.check_radius(r)?;
        if self.snap_mode == SnapMode::Snap {
            let balls = self.net.balls(r);
            return Ok((0..self.len())
                .map(|i| {
                    (0..self.action.size())
                        .flat_map(|s| balls[self.snap[s][i]].iter().map(move |&y| (y, s)))
                        .collect()
                })
                .collect());
        }
        let rho = r / self.net.t;
        let index = self.net.index(r);
        Ok((0..self.len())
            .map(|i| {
                (0..self.action.size())
                    .flat_map(|s| {
                        index
                            .within(self.center(s, i), rho)
                            .into_iter()
                            .map(move |(y, _)| (y, s))
                    })
                    .collect()
            })
            .collect())
    }

    fn check_radius(&self, r: f64) -> Result<()> {
        if !(r > 0.0) {
            return Err(WarpError::Precondition(format!("r must be positive, got {r}")));
        }
        let limit = self.admissible_radius();
        if r > limit * (1.0 + 1e-12) {
            return Err(WarpError::Precondition(format!(
                "r = {r} exceeds the admissible radius {limit} of {} at t = {}; \
                 above it the translated balls s·B_r(x) need not be disjoint, so the action is not free at that scale",
                self.action.name, self.net.t
            )));
        }
        Ok(())
    }
}

/// Builds the warped graph of `net` under `action`.
///
/// `cutoff` defaults to `3·epsilon`.  Nets of a finite space snap exactly.
pub fn build_warped_graph(
    net: &EpsNet,
    action: &ActionSpec,
    cutoff: Option<f64>,
    snap_mode: SnapMode,
) -> Result<WarpedGraph> {
    if net.space != action.space {
        return Err(WarpError::Domain(format!(
            "net lives on {} but the action acts on {}",
            net.space, action.space
        )));
    }
    let t = net.t;
    let cutoff = cutoff.unwrap_or(3.0 * net.epsilon);
    if !(cutoff >= 0.0) {
        return Err(WarpError::Precondition(format!("cutoff must be non-negative, got {cutoff}")));
    }
    let free_radius = max_free_radius(action, FREE_RADIUS_SAMPLES, net.seed)?;
    let n = net.len();
    let mut weighted = WeightedGraph::new(n);

    let mut metric_edges = Vec::new();
    let rho = cutoff / t * (1.0 + 1e-9);
    let index = NeighborIndex::from_points(&net.space, rho, &net.points);
    for (i, p) in net.points.iter().enumerate() {
        for (j, d) in index.within(p, rho) {
            let weight = t * d;
            if j > i && weight <= cutoff {
                metric_edges.push(MetricEdge { i, j, weight });
                weighted.add_edge(i, j, weight);
            }
        }
    }

    let snap_index = net.index(net.epsilon);
    let finite = matches!(net.construction, NetConstruction::Finite);
    let mut snap = Vec::with_capacity(action.size());
    let mut images = Vec::with_capacity(action.size());
    let mut generator_edges = Vec::with_capacity(n * action.size());
    let mut max_snap_error = 0.0f64;
    for (s, g) in action.generators.elements().iter().enumerate() {
        let mut targets = Vec::with_capacity(n);
        let mut imgs = Vec::with_capacity(n);
        for (i, p) in net.points.iter().enumerate() {
            let image = group_mul(&net.space, g, p);
            let j = match (&image, finite) {
                (Point::Cantor(bits), true) => *bits as usize,
                _ => snap_index.nearest(&image).expect("non-empty net").0,
            };
            max_snap_error = max_snap_error.max(t * raw_distance(&image, &net.points[j]));
            generator_edges.push(GeneratorEdge { i, j, s, weight: 1.0 });
            if i != j {
                weighted.add_edge(i, j, 1.0);
            }
            targets.push(j);
            imgs.push(image);
        }
        snap.push(targets);
        images.push(imgs);
    }
    let connected = weighted.is_connected();
    Ok(WarpedGraph {
        net: net.clone(),
        action: action.clone(),
        cutoff,
        snap_mode,
        free_radius,
        metric_edges,
        generator_edges,
        snap,
        images,
        max_snap_error,
        connected,
        weighted,
    })
}

/// Shortest-path distance over metric and generator edges; `+∞` across components.
pub fn warped_distance(graph: &WarpedGraph, i: usize, j: usize) -> Result<f64> {
    let n = graph.len();
    if i >= n || j >= n {
        return Err(WarpError::Domain(format!("nodes ({i}, {j}) outside a graph of {n} nodes")));
    }
    if i == j {
        return Ok(0.0);
    }
    Ok(graph.distances_from(i)[j])
}

/// Net points `y` with `t·d(s·p_i, y) < r`, tagged by `s`, sorted by `(s, y)`.
///
/// In snap mode `s·p_i` is replaced by its snapped net point.  `r` must not
/// exceed [`WarpedGraph::admissible_radius`].
pub fn controlled_neighbors(graph: &WarpedGraph, i: usize, r: f64) -> Result<Vec<(usize, usize)>> {
    graph.check_radius(r)?;
    if i >= graph.len() {
        return Err(WarpError::Domain(format!("node {i} outside a graph of {} nodes", graph.len())));
    }
    if graph.snap_mode == SnapMode::Snap {
        return Ok(graph.controlled_sets(r)?.swap_remove(i));
    }
    let rho = r / graph.t();
    let mut out = Vec::new();
    for s in 0..graph.action.size() {
        let center = graph.center(s, i);
        for (y, p) in graph.net.points.iter().enumerate() {
            if raw_distance(center, p) < rho {
                out.push((y, s));
            }
        }
    }
    Ok(out)
}

/// Level at which the depth-`n` Cantor warped graph is isometric to the cycle `ℤ/2^n`: `2^(2n−1)`.
pub fn matched_box_level(depth: u32) -> f64 {
    2f64.powi(2 * depth as i32 - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxComparison {
    pub depth: u32,
    pub t: f64,
    pub points: usize,
    pub distortion: Distortion,
}

/// Distortion between an odometer warped graph at level `t`, with every metric edge present, and the cycle box space.
///
/// Points correspond through their binary value.
pub fn box_comparison(action: &ActionSpec, t: f64) -> Result<BoxComparison> {
    let depth = match action.space {
        ModelSpace::CantorLevel { depth } => depth,
        ref other => {
            return Err(WarpError::Domain(format!(
                "box spaces compare Cantor levels, not {other}"
            )))
        }
    };
    let net = build_eps_net(&action.space, t, 1.0, 0)?;
    let graph = build_warped_graph(&net, action, Some(f64::INFINITY), SnapMode::Snap)?;
    let correspondence = net
        .points
        .iter()
        .map(|p| match p {
            Point::Cantor(bits) => Ok(*bits as usize),
            _ => Err(WarpError::Domain("non-Cantor point on a Cantor level".into())),
        })
        .collect::<Result<Vec<_>>>()?;
    let distortion = distortion(graph.weighted(), &box_space_graph(depth)?, &correspondence)?;
    Ok(BoxComparison {
        depth,
        t,
        points: net.len(),
        distortion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{ActionCatalog, ActionParams};
    use crate::spaces::arithmetic_net;

    fn catalog(name: &str, params: ActionParams) -> ActionSpec {
        ActionCatalog::builtin().build(name, &params).unwrap()
    }

    fn odometer(depth: u32) -> ActionSpec {
        catalog(
            "odometer",
            ActionParams {
                depth: Some(depth),
                ..Default::default()
            },
        )
    }

    #[test]
    fn odometer_generator_edges_form_a_cycle() {
        let a = odometer(3);
        let net = build_eps_net(&a.space, 4.0, 0.5, 0).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        let plus = a.generators.index_of("+1").unwrap();
        let mut succ: Vec<usize> = g.snap[plus].clone();
        for (i, j) in succ.iter().enumerate() {
            assert_eq!(*j, (i + 1) % 8);
        }
        succ.sort_unstable();
        assert_eq!(succ, (0..8).collect::<Vec<_>>());
        assert_eq!(g.max_snap_error, 0.0);
    }

    #[test]
    fn circle_graph_degrees() {
        let a = catalog("circle-rotation", ActionParams::default());
        let net = build_eps_net(&a.space, 10.0, 1.0, 3).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        assert!(g.connected);
        let mut metric_degree = vec![0; net.len()];
        for e in &g.metric_edges {
            metric_degree[e.i] += 1;
            metric_degree[e.j] += 1;
            assert!((e.weight - net.scaled_distance(e.i, e.j)).abs() <= 1e-12);
        }
        assert!(metric_degree.iter().all(|&d| d >= 2));
        let e = a.generators.identity_index();
        for i in 0..net.len() {
            let moving = g
                .generator_edges
                .iter()
                .filter(|edge| edge.i == i && edge.s != e)
                .count();
            assert_eq!(moving, 2);
        }
        assert!(g.generator_edges.iter().all(|edge| edge.weight == 1.0));
        assert!(g.max_snap_error < net.epsilon);
    }

    #[test]
    fn trivial_action_gives_metric_distance() {
        let a = catalog("trivial", ActionParams::default());
        let net = arithmetic_net(&a.space, 10.0, 40).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        assert!(g.generator_edges.iter().all(|e| e.i == e.j));
        // Lattice neighbors are 0.25 apart, so path length equals the scaled circle distance.
        let d = warped_distance(&g, 0, 13).unwrap();
        assert!((d - net.scaled_distance(0, 13)).abs() < 1e-12);
    }

    #[test]
    fn warped_distance_basics() {
        let a = catalog("circle-rotation", ActionParams::default());
        let net = build_eps_net(&a.space, 20.0, 0.5, 1).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        let s = a.generators.index_of("g").unwrap();
        assert_eq!(warped_distance(&g, 4, 4).unwrap(), 0.0);
        assert!(warped_distance(&g, 4, g.snap[s][4]).unwrap() <= 1.0 + net.epsilon);
        // Generator edges only shorten the metric-only path.
        let mut metric_only = WeightedGraph::new(net.len());
        for e in &g.metric_edges {
            metric_only.add_edge(e.i, e.j, e.weight);
        }
        let dm = metric_only.distances_from(7);
        let dw = g.distances_from(7);
        for j in 0..net.len() {
            assert!(dw[j] <= dm[j] + 1e-12);
            assert!(dw[j] <= net.scaled_distance(7, j) + 3.0 * net.epsilon);
        }
        assert!(warped_distance(&g, 0, net.len()).is_err());
    }

    #[test]
    fn larger_cutoff_never_increases_distances() {
        let a = catalog("circle-rotation", ActionParams::default());
        let net = build_eps_net(&a.space, 15.0, 0.5, 2).unwrap();
        let small = build_warped_graph(&net, &a, Some(1.5), SnapMode::Snap).unwrap();
        let large = build_warped_graph(&net, &a, Some(4.0), SnapMode::Snap).unwrap();
        let (ds, dl) = (small.distances_from(0), large.distances_from(0));
        assert!(ds.iter().zip(&dl).all(|(s, l)| l <= s));
    }

    #[test]
    fn warped_distance_is_a_pseudometric() {
        let a = catalog("so3-rational-rotations", ActionParams::default());
        let net = build_eps_net(&a.space, 3.0, 1.0, 4).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        let all = g.weighted().all_pairs();
        let n = net.len().min(40);
        for i in 0..n {
            for j in 0..n {
                assert_eq!(all[i][j], all[j][i]);
                for k in 0..n {
                    assert!(all[i][k] <= all[i][j] + all[j][k] + 1e-12);
                }
            }
        }
    }

    #[test]
    fn controlled_neighbors_small_radius() {
        let a = catalog("trivial", ActionParams::default());
        let net = build_eps_net(&a.space, 10.0, 1.0, 5).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        assert_eq!(controlled_neighbors(&g, 3, 0.4).unwrap(), vec![(3, 0)]);

        let a = odometer(5);
        let net = build_eps_net(&a.space, 32.0, 1.0, 0).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        // Below the finest scaled distance t·2^-depth = 1 every ball is a singleton.
        let mut ys: Vec<usize> = controlled_neighbors(&g, 0, 0.9)
            .unwrap()
            .into_iter()
            .map(|(y, _)| y)
            .collect();
        ys.sort_unstable();
        assert_eq!(ys, vec![0, 1, 31]);
    }

    #[test]
    fn controlled_sets_are_disjoint_across_generators() {
        let a = catalog("circle-rotation", ActionParams::default());
        let net = build_eps_net(&a.space, 10.0, 0.1, 6).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        let r = 0.08 * net.t;
        assert!(r <= g.admissible_radius());
        for i in 0..net.len() {
            let nb = controlled_neighbors(&g, i, r).unwrap();
            let mut ys: Vec<usize> = nb.iter().map(|&(y, _)| y).collect();
            ys.sort_unstable();
            let before = ys.len();
            ys.dedup();
            assert_eq!(ys.len(), before, "node {i}");
        }
    }

    #[test]
    fn inadmissible_radius_is_rejected() {
        let a = catalog("circle-rotation", ActionParams::default());
        let net = build_eps_net(&a.space, 10.0, 0.5, 6).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        let err = controlled_neighbors(&g, 0, 2.0).unwrap_err();
        assert!(err.to_string().contains("not free"), "{err}");
    }

    #[test]
    fn controlled_sets_are_symmetric_on_lattice_nets() {
        let a = catalog("circle-rotation", ActionParams::default());
        let net = arithmetic_net(&a.space, 10.0, 203).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        let sets = g.controlled_sets(0.8).unwrap();
        for (i, row) in sets.iter().enumerate() {
            assert_eq!(row, &controlled_neighbors(&g, i, 0.8).unwrap());
            for &(j, s) in row {
                let back = a.generators.inverse_of(s);
                assert!(sets[j].contains(&(i, back)), "({i}, {j}, {s})");
            }
        }
    }

    #[test]
    fn exact_offnet_mode_keeps_images() {
        let a = catalog("circle-rotation", ActionParams::default());
        let net = build_eps_net(&a.space, 10.0, 0.2, 7).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::ExactOffnet).unwrap();
        let s = a.generators.index_of("g").unwrap();
        assert_eq!(g.center(s, 0), &g.images[s][0]);
        assert!(g.controlled_sets(0.5).is_ok());
    }

    #[test]
    fn mismatched_spaces_are_rejected() {
        let a = catalog("circle-rotation", ActionParams::default());
        let net = build_eps_net(&ModelSpace::SO3, 2.0, 1.0, 0).unwrap();
        assert!(build_warped_graph(&net, &a, None, SnapMode::Snap).is_err());
    }

    #[test]
    fn cantor_levels_match_box_spaces_at_matched_scale() {
        // With t = 2^(2n-1) every metric edge is at least as long as the cycle distance it spans.
        for depth in 3..=6u32 {
            let a = odometer(depth);
            let t = 2f64.powi(2 * depth as i32 - 1);
            assert_eq!(matched_box_level(depth), t);
            let net = build_eps_net(&a.space, t, 1.0, 0).unwrap();
            let g = build_warped_graph(&net, &a, Some(f64::INFINITY), SnapMode::Snap).unwrap();
            let cycle = box_space_graph(depth).unwrap();
            let id: Vec<usize> = (0..net.len()).collect();
            let d = distortion(g.weighted(), &cycle, &id).unwrap();
            assert_eq!((d.l, d.c), (1.0, 0.0), "depth {depth}");
            assert_eq!(box_comparison(&a, t).unwrap().distortion, d);
        }
        let circle = catalog("circle-rotation", ActionParams::default());
        assert!(box_comparison(&circle, 4.0).is_err());
    }

    #[test]
    fn cantor_distortion_grows_at_dyadic_scale() {
        // At t = 2^n the pair (0, 2^(n-1)) is one metric unit apart but half a cycle apart.
        let mut constants = Vec::new();
        for depth in [4u32, 6, 8] {
            let a = odometer(depth);
            let t = 2f64.powi(depth as i32);
            let net = build_eps_net(&a.space, t, 1.0, 0).unwrap();
            let g = build_warped_graph(&net, &a, Some(f64::INFINITY), SnapMode::Snap).unwrap();
            let half = 1usize << (depth - 1);
            assert_eq!(warped_distance(&g, 0, half).unwrap(), 1.0);
            let id: Vec<usize> = (0..net.len()).collect();
            let d = distortion(g.weighted(), &box_space_graph(depth).unwrap(), &id).unwrap();
            constants.push(d.l + d.c);
        }
        assert!(constants[2] > 2.0 * constants[0], "{constants:?}");
    }
}
