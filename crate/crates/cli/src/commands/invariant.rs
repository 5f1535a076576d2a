use anyhow::Result;
use serde::Serialize;
use warpcone::actions::ActionParams;
use warpcone::invariant::{intertwining_with, joint_spectrum, random_section, IntertwiningReport, JointSpectrumReport};
use warpcone::operators::assemble_local;
use warpcone::spaces::NetConstruction;
use warpcone::warped::{box_comparison, matched_box_level, BoxComparison};

use super::{radius, worst, Command, Context};
use crate::config::RunConfig;
use crate::report::Run;

const DEFAULT_EPSILON: f64 = 1.0;
/// Tolerance on lattice nets, where the section map is exact.
const EXACT_TOL: f64 = 1e-10;
/// Tolerance on greedy nets, where `y⁻¹x` is snapped to the net.
const SNAPPED_TOL: f64 = 1e-2;
const JOINT_TOL: f64 = 2e-3;

#[derive(Serialize)]
struct JointRow {
    mode: usize,
    lambda1: f64,
    lambda2: f64,
    f_value: f64,
}

#[derive(Serialize)]
struct InvariantSummary {
    r: f64,
    points: usize,
    sections: Vec<IntertwiningReport>,
    max_residual: f64,
    max_isometry_defect: f64,
    joint: Option<JointSpectrumReport>,
    joint_skipped: Option<String>,
}

pub struct InvariantCommand;

impl Command for InvariantCommand {
    fn name(&self) -> &'static str {
        "invariant"
    }

    fn about(&self) -> &'static str {
        "intertwining and isometry of the section map W on random sections, plus the joint spectrum; write joint.csv"
    }

    fn run(&self, ctx: &Context, config: &RunConfig, run: &mut Run) -> Result<()> {
        let t = config.single_level()?;
        let graph = ctx.graph(config, t, DEFAULT_EPSILON)?;
        let net = &graph.net;
        let r = radius(config, &[&graph])?;
        let local = assemble_local(net, r)?;
        let sections = config.sections.unwrap_or(20);
        let reports = (0..sections as u64)
            .map(|i| intertwining_with(net, &local, &random_section(net.len(), config.seed() + i)))
            .collect::<warpcone::Result<Vec<_>>>()?;
        let exact = matches!(net.construction, NetConstruction::Arithmetic { .. } | NetConstruction::Finite);
        let tolerance = config.tolerance.unwrap_or(if exact { EXACT_TOL } else { SNAPPED_TOL });
        let max_residual = reports.iter().map(|r| r.residual).fold(0.0, f64::max);
        let max_isometry_defect = reports.iter().map(|r| r.isometry_defect).fold(0.0, f64::max);
        if let Some((i, res)) = worst(reports.iter().map(|r| r.residual)) {
            run.check(
                format!("intertwining: ‖L∘Wf − W(Lf)‖/‖Wf‖ ≤ {tolerance:e}"),
                res <= tolerance,
                format!("worst section seed {}: residual {res:e}", config.seed() + i as u64),
            );
        }
        if let Some((i, d)) = worst(reports.iter().map(|r| r.isometry_defect)) {
            run.check(
                format!("isometry: |‖Wf‖ − √μ_t(M)·‖f‖| relative ≤ {tolerance:e}"),
                d <= tolerance,
                format!("worst section seed {}: defect {d:e}", config.seed() + i as u64),
            );
        }
        let (joint, joint_skipped) = match joint_spectrum(&graph, r, config.bottom.unwrap_or(50), config.delta.unwrap_or(0.1)) {
            Ok(j) => (Some(j), None),
            Err(warpcone::WarpError::Domain(why)) => (None, Some(why)),
            Err(e) => return Err(e.into()),
        };
        if let Some(j) = &joint {
            run.check(
                format!("joint spectrum: bottom of Δ_E matches {{f(λ₁, λ₂)}} within {JOINT_TOL:e}"),
                j.max_mismatch <= JOINT_TOL,
                format!("max mismatch {:e} over {} eigenvalues", j.max_mismatch, j.bottom.len()),
            );
            run.check(
                format!("joint region: f ≥ δφ on (δ, 2|S| − δ) × [0, 2φ], δ = {}", j.delta),
                j.region_margin >= 0.0,
                format!("smallest f − δφ = {:e}", j.region_margin),
            );
            let rows: Vec<JointRow> = j
                .samples
                .iter()
                .map(|s| JointRow {
                    mode: s.mode,
                    lambda1: s.lambda1,
                    lambda2: s.lambda2,
                    f_value: s.f_value,
                })
                .collect();
            run.csv("joint.csv", &rows)?;
        }
        run.results(&InvariantSummary {
            r,
            points: net.len(),
            sections: reports,
            max_residual,
            max_isometry_defect,
            joint,
            joint_skipped,
        })
    }
}

#[derive(Serialize)]
struct BoxRow {
    depth: u32,
    t: f64,
    points: usize,
    l: f64,
    c: f64,
    pairs: usize,
}

pub struct BoxCompareCommand;

impl Command for BoxCompareCommand {
    fn name(&self) -> &'static str {
        "boxcompare"
    }

    fn about(&self) -> &'static str {
        "quasi-isometry constants between Cantor warped graphs and cycle box spaces; write boxcompare.csv"
    }

    fn run(&self, ctx: &Context, config: &RunConfig, run: &mut Run) -> Result<()> {
        let depths = config.depths.clone().unwrap_or_else(|| (3..=8).collect());
        let bound = config.tolerance.unwrap_or(2.0);
        let mut results: Vec<BoxComparison> = Vec::new();
        for &depth in &depths {
            let params = ActionParams {
                depth: Some(depth),
                ..Default::default()
            };
            let action = ctx.actions.build("odometer", &params)?;
            results.push(box_comparison(&action, matched_box_level(depth))?);
        }
        if let Some((i, v)) = worst(results.iter().map(|b| b.distortion.l.max(b.distortion.c))) {
            let d = &results[i];
            run.check(
                format!("box-space comparison: L ≤ {bound} and C ≤ {bound} at every depth"),
                v <= bound,
                format!("worst depth {}: L = {}, C = {}", d.depth, d.distortion.l, d.distortion.c),
            );
        }
        let rows: Vec<BoxRow> = results
            .iter()
            .map(|b| BoxRow {
                depth: b.depth,
                t: b.t,
                points: b.points,
                l: b.distortion.l,
                c: b.distortion.c,
                pairs: b.distortion.pairs,
            })
            .collect();
        run.csv("boxcompare.csv", &rows)?;
        run.results(&results)
    }
}
