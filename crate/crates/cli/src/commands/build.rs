use anyhow::Result;
use serde::Serialize;
use warpcone::io::{edge_list, graph_to_json, net_to_json};
use warpcone::spaces::{build_net, EpsNet};

use super::{Command, Context};
use crate::config::RunConfig;
use crate::report::Run;

const DEFAULT_EPSILON: f64 = 1.0;

#[derive(Serialize)]
struct NetSummary {
    space: String,
    t: f64,
    epsilon: f64,
    points: usize,
    min_separation: f64,
    total_weight: f64,
    scaled_mass: f64,
}

fn net_checks(net: &EpsNet, run: &mut Run) -> NetSummary {
    let min_separation = net.min_separation();
    let total_weight: f64 = net.weights.iter().sum();
    let scaled_mass = net.space.scaled_mass(net.t);
    run.check(
        "separation: scaled distance between distinct net points ≥ ε",
        min_separation >= net.epsilon * (1.0 - 1e-12),
        format!("min separation {min_separation} vs ε = {}", net.epsilon),
    );
    let mass_error = (total_weight - scaled_mass).abs() / scaled_mass;
    run.check(
        "quadrature: weights sum to the scaled measure t^m·μ(M)",
        mass_error <= 1e-9,
        format!("Σw = {total_weight}, t^m·μ(M) = {scaled_mass}, relative error {mass_error:e}"),
    );
    NetSummary {
        space: net.space.to_string(),
        t: net.t,
        epsilon: net.epsilon,
        points: net.len(),
        min_separation,
        total_weight,
        scaled_mass,
    }
}

pub struct NetCommand;

impl Command for NetCommand {
    fn name(&self) -> &'static str {
        "net"
    }

    fn about(&self) -> &'static str {
        "build an ε-net of a level set and write net.json"
    }

    fn run(&self, ctx: &Context, config: &RunConfig, run: &mut Run) -> Result<()> {
        let t = config.single_level()?;
        let space = match &config.action {
            Some(name) => {
                let mut params = config.action_params();
                params.level = Some(t);
                ctx.actions.build(name, &params)?.space
            }
            None => config.model_space()?,
        };
        let net = build_net(
            &space,
            t,
            config.epsilon_or(DEFAULT_EPSILON),
            config.seed(),
            config.net.unwrap_or_default(),
        )?;
        run.text("net.json", net_to_json(&net));
        let summary = net_checks(&net, run);
        run.results(&summary)
    }
}

#[derive(Serialize)]
struct GraphSummary {
    net: NetSummary,
    action: String,
    cutoff: f64,
    metric_edges: usize,
    generator_edges: usize,
    max_snap_error: f64,
    admissible_radius: f64,
    connected: bool,
}

pub struct GraphCommand;

impl Command for GraphCommand {
    fn name(&self) -> &'static str {
        "graph"
    }

    fn about(&self) -> &'static str {
        "build the warped graph at one level; write graph.json and edges.txt"
    }

    fn run(&self, ctx: &Context, config: &RunConfig, run: &mut Run) -> Result<()> {
        let t = config.single_level()?;
        let graph = ctx.graph(config, t, DEFAULT_EPSILON)?;
        run.text("graph.json", graph_to_json(&graph)?);
        run.text("edges.txt", edge_list(&graph));
        let net = net_checks(&graph.net, run);
        run.check(
            "connectivity: metric and generator edges connect the net",
            graph.connected,
            format!("{} points, connected = {}", graph.len(), graph.connected),
        );
        run.results(&GraphSummary {
            net,
            action: graph.action.name.clone(),
            cutoff: graph.cutoff,
            metric_edges: graph.metric_edges.len(),
            generator_edges: graph.generator_edges.len(),
            max_snap_error: graph.max_snap_error,
            admissible_radius: graph.admissible_radius(),
            connected: graph.connected,
        })
    }
}
