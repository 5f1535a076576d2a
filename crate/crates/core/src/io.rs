//! Export formats for nets, graphs and operators.
//!
//! Floats are written in the shortest form that parses back to the same
//! `f64` (never more than 17 significant digits), so every writer here is
//! byte-deterministic and every reader round-trips exactly.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::operators::SymmetricOperator;
use crate::spaces::{EpsNet, ModelSpace, NetConstruction, Point};
use crate::warped::{SnapMode, WarpedGraph};
use crate::{Result, WarpError};

/// On-disk form of an [`EpsNet`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetFile {
    pub space: ModelSpace,
    pub t: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Missing in hand-written files; read back as greedy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<NetConstruction>,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl NetFile {
    pub fn from_net(net: &EpsNet) -> Self {
        Self {
            space: net.space,
            t: net.t,
            epsilon: net.epsilon,
            seed: net.seed,
            construction: Some(net.construction),
            points: net.points.iter().map(|p| p.coordinates(&net.space)).collect(),
            weights: net.weights.clone(),
        }
    }

    pub fn into_net(self) -> Result<EpsNet> {
        if self.points.len() != self.weights.len() {
            return Err(WarpError::Parse(format!(
                "{} points but {} weights",
                self.points.len(),
                self.weights.len()
            )));
        }
        if !(self.t > 0.0) || !(self.epsilon > 0.0) {
            return Err(WarpError::Parse(format!(
                "t and epsilon must be positive, got {} and {}",
                self.t, self.epsilon
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return Err(WarpError::Parse(format!("non-positive weight {w}")));
        }
        let points = self
            .points
            .iter()
            .map(|c| Point::from_coordinates(&self.space, c))
            .collect::<Result<Vec<_>>>()?;
        Ok(EpsNet {
            space: self.space,
            t: self.t,
            epsilon: self.epsilon,
            seed: self.seed,
            points,
            weights: self.weights,
            construction: self.construction.unwrap_or(NetConstruction::Greedy),
        })
    }
}

pub fn net_to_json(net: &EpsNet) -> String {
    to_pretty(&NetFile::from_net(net))
}

pub fn net_from_json(text: &str) -> Result<EpsNet> {
    let file: NetFile = serde_json::from_str(text).map_err(|e| WarpError::Parse(e.to_string()))?;
    file.into_net()
}

/// One line per edge: `i j w label`, metric edges first, then generator edges by `(s, i)`.
///
/// Labels are `metric` or `generator:<name>`; identity edges are included.
pub fn edge_list(graph: &WarpedGraph) -> String {
    let mut out = String::new();
    for e in &graph.metric_edges {
        out.push_str(&format!("{} {} {} metric\n", e.i, e.j, e.weight));
    }
    let labels = graph.action.generators.labels();
    let mut gens: Vec<_> = graph.generator_edges.iter().collect();
    gens.sort_by_key(|e| (e.s, e.i));
    for e in gens {
        out.push_str(&format!("{} {} {} generator:{}\n", e.i, e.j, e.weight, labels[e.s]));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub w: f64,
    pub label: String,
}

pub fn parse_edge_list(text: &str) -> Result<Vec<EdgeRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            let bad = |what: &str| WarpError::Parse(format!("edge line {}: {what}: '{line}'", n + 1));
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(bad("expected 4 fields"));
            }
            let label = fields[3];
            if label != "metric" && !label.starts_with("generator:") {
                return Err(bad("unknown label"));
            }
            Ok(EdgeRecord {
                i: fields[0].parse().map_err(|_| bad("bad index"))?,
                j: fields[1].parse().map_err(|_| bad("bad index"))?,
                w: fields[2].parse().map_err(|_| bad("bad weight"))?,
                label: label.to_string(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub action: String,
    pub generators: Vec<String>,
    pub cutoff: f64,
    pub snap_mode: SnapMode,
    pub free_radius: f64,
    pub max_snap_error: f64,
    pub connected: bool,
    pub net: NetFile,
    pub edges: Vec<EdgeRecord>,
}

impl GraphFile {
    pub fn from_graph(graph: &WarpedGraph) -> Result<Self> {
        Ok(Self {
            action: graph.action.name.clone(),
            generators: graph.action.generators.labels().to_vec(),
            cutoff: graph.cutoff,
            snap_mode: graph.snap_mode,
            free_radius: graph.free_radius,
            max_snap_error: graph.max_snap_error,
            connected: graph.connected,
            net: NetFile::from_net(&graph.net),
            edges: parse_edge_list(&edge_list(graph))?,
        })
    }
}

pub fn graph_to_json(graph: &WarpedGraph) -> Result<String> {
    Ok(to_pretty(&GraphFile::from_graph(graph)?))
}

/// First line of an operator export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorHeader {
    pub dim: usize,
    pub t: f64,
    pub epsilon: f64,
    pub r: f64,
    pub action: String,
    pub mode: String,
}

/// Header line followed by `i j value` for every stored entry of the form `W·T`, row-major.
pub fn operator_export(op: &SymmetricOperator, header: &OperatorHeader) -> Result<String> {
    if header.dim != op.dim() {
        return Err(WarpError::Domain(format!(
            "header dim {} but operator has dimension {}",
            header.dim,
            op.dim()
        )));
    }
    let mut out = serde_json::to_string(header).map_err(|e| WarpError::Parse(e.to_string()))?;
    out.push('\n');
    for (i, j, v) in op.form.triplet_iter() {
        out.push_str(&format!("{i} {j} {v}\n"));
    }
    Ok(out)
}

pub fn parse_operator(text: &str) -> Result<(OperatorHeader, Vec<(usize, usize, f64)>)> {
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| WarpError::Parse("empty operator file".into()))?;
    let header: OperatorHeader = serde_json::from_str(head).map_err(|e| WarpError::Parse(e.to_string()))?;
    let mut entries = Vec::new();
    for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || WarpError::Parse(format!("operator line {}: '{line}'", n + 2));
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(bad());
        }
        let i: usize = f[0].parse().map_err(|_| bad())?;
        let j: usize = f[1].parse().map_err(|_| bad())?;
        if i >= header.dim || j >= header.dim {
            return Err(bad());
        }
        entries.push((i, j, f[2].parse().map_err(|_| bad())?));
    }
    Ok((header, entries))
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| WarpError::Domain(format!("'{}' has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

fn to_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{ActionCatalog, ActionParams};
    use crate::operators::assemble_local;
    use crate::spaces::{arithmetic_net, build_eps_net};
    use crate::warped::build_warped_graph;

    #[test]
    fn net_round_trips_exactly() {
        for space in [ModelSpace::Circle, ModelSpace::FlatTorus { dim: 2 }, ModelSpace::SO3] {
            let net = build_eps_net(&space, 3.0, 1.0, 7).unwrap();
            let back = net_from_json(&net_to_json(&net)).unwrap();
            assert_eq!(back, net, "{space}");
        }
        let cantor = build_eps_net(&ModelSpace::CantorLevel { depth: 5 }, 32.0, 1.0, 0).unwrap();
        assert_eq!(net_from_json(&net_to_json(&cantor)).unwrap(), cantor);
    }

    #[test]
    fn net_json_has_the_documented_fields() {
        let net = build_eps_net(&ModelSpace::SO3, 2.0, 1.0, 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&net_to_json(&net)).unwrap();
        for key in ["space", "t", "epsilon", "seed", "points", "weights"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["points"].as_array().unwrap().iter().all(|p| p.as_array().unwrap().len() == 4));
    }

    #[test]
    fn malformed_nets_are_rejected() {
        let net = arithmetic_net(&ModelSpace::Circle, 5.0, 10).unwrap();
        let mut file = NetFile::from_net(&net);
        file.weights.pop();
        assert!(matches!(file.into_net(), Err(WarpError::Parse(_))));
        assert!(net_from_json("{\"space\": 3}").is_err());
        let mut file = NetFile::from_net(&net);
        file.points[0] = vec![0.1, 0.2];
        assert!(file.into_net().is_err());
    }

    fn small_graph() -> WarpedGraph {
        let catalog = ActionCatalog::builtin();
        let params = ActionParams {
            alpha: Some(0.5f64.sqrt()),
            ..Default::default()
        };
        let action = catalog.build("circle-rotation", &params).unwrap();
        let net = arithmetic_net(&ModelSpace::Circle, 4.0, 20).unwrap();
        build_warped_graph(&net, &action, None, SnapMode::Snap).unwrap()
    }

    #[test]
    fn edge_list_round_trips_and_is_deterministic() {
        let g = small_graph();
        let text = edge_list(&g);
        assert_eq!(text, edge_list(&g));
        let edges = parse_edge_list(&text).unwrap();
        assert_eq!(edges.len(), g.metric_edges.len() + g.generator_edges.len());
        let metric = edges.iter().filter(|e| e.label == "metric").count();
        assert_eq!(metric, g.metric_edges.len());
        assert!(edges.iter().any(|e| e.label == "generator:g^-1"));
        for (e, m) in edges.iter().zip(&g.metric_edges) {
            assert_eq!((e.i, e.j, e.w), (m.i, m.j, m.weight));
        }
        assert!(parse_edge_list("0 1 2.0 bogus\n").is_err());
        assert!(parse_edge_list("0 1 metric\n").is_err());
    }

    #[test]
    fn graph_json_embeds_the_net() {
        let g = small_graph();
        let text = graph_to_json(&g).unwrap();
        let file: GraphFile = serde_json::from_str(&text).unwrap();
        assert_eq!(file.net.clone().into_net().unwrap(), g.net);
        assert_eq!(file.generators, g.action.generators.labels());
    }

    #[test]
    fn operator_export_round_trips() {
        let net = arithmetic_net(&ModelSpace::Circle, 5.0, 30).unwrap();
        let op = assemble_local(&net, 1.0).unwrap();
        let header = OperatorHeader {
            dim: op.dim(),
            t: 5.0,
            epsilon: net.epsilon,
            r: 1.0,
            action: "none".into(),
            mode: "local".into(),
        };
        let text = operator_export(&op, &header).unwrap();
        let (h, entries) = parse_operator(&text).unwrap();
        assert_eq!(h, header);
        assert_eq!(entries.len(), op.form.nnz());
        let stored: Vec<_> = op.form.triplet_iter().map(|(i, j, v)| (i, j, *v)).collect();
        assert_eq!(entries, stored);
        let wrong = OperatorHeader { dim: 3, ..header };
        assert!(operator_export(&op, &wrong).is_err());
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = std::env::temp_dir().join(format!("warpcone-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.txt");
        write_atomic(&path, b"first").unwrap();
        write_atomic(&path, b"second").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 1);
        assert!(write_atomic(&dir.join("missing").join("x"), b"").is_err());
        fs::remove_dir_all(&dir).unwrap();
    }
}
