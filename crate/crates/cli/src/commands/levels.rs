use anyhow::{bail, Result};
use serde::Serialize;
use warpcone::actions::GapSignature;
use warpcone::io::{operator_export, OperatorHeader};
use warpcone::operators::{assemble_bundle, assemble_group, assemble_local, SymmetricOperator};
use warpcone::spectra::{bottom_spectrum_with, gap_across_levels, SpectrumMeta, SweepSpec, KERNEL_TOL, RESIDUAL_TOL};

use super::{radius, worst, Command, Context};
use crate::config::{Radius, RunConfig};
use crate::report::Run;

const DEFAULT_EPSILON: f64 = 1.0;
const DEFAULT_K: usize = 10;
/// Normalized-gap floor of `so3-rational-rotations` at ε = 1.5, seed 0, levels 4, 6, 8.
pub const SO3_GAMMA0: f64 = 0.8061;
const DECAY_RATIO: f64 = 0.25;

#[derive(Serialize)]
struct SpectrumRow {
    level: f64,
    index: usize,
    eigenvalue: f64,
    residual: f64,
}

pub struct SpectrumCommand;

impl Command for SpectrumCommand {
    fn name(&self) -> &'static str {
        "spectrum"
    }

    fn about(&self) -> &'static str {
        "bottom eigenpairs of the coarse, local or group Laplacian at each level; write spectrum.csv"
    }

    fn run(&self, ctx: &Context, config: &RunConfig, run: &mut Run) -> Result<()> {
        let operator = config.operator.as_deref().unwrap_or("coarse");
        if !matches!(operator, "coarse" | "local" | "group") {
            bail!("unknown operator '{operator}' (known: coarse, local, group)");
        }
        let solver = ctx.solver(config)?;
        let k = config.k.unwrap_or(DEFAULT_K);
        let graphs = config
            .level_list()?
            .into_iter()
            .map(|t| ctx.graph(config, t, DEFAULT_EPSILON))
            .collect::<Result<Vec<_>>>()?;
        let r = radius(config, &graphs.iter().collect::<Vec<_>>())?;
        let mut rows = Vec::new();
        let mut reports = Vec::new();
        for g in &graphs {
            let (op, mode): (SymmetricOperator, String) = match operator {
                "local" => (assemble_local(&g.net, r)?, "local".into()),
                "group" => (assemble_group(g)?, "group".into()),
                _ => {
                    let bundle = assemble_bundle(g, r, config.mode)?;
                    (bundle.coarse, format!("coarse-{}", bundle.mode))
                }
            };
            let meta = SpectrumMeta {
                operator: mode.clone(),
                action: Some(g.action.name.clone()),
                t: Some(g.t()),
                epsilon: Some(g.net.epsilon),
                r: Some(r),
                seed: Some(config.seed()),
            };
            let report = bottom_spectrum_with(&op, k.min(g.len()), meta, solver)?;
            for (i, (l, res)) in report.eigenvalues.iter().zip(&report.residuals).enumerate() {
                rows.push(SpectrumRow {
                    level: g.t(),
                    index: i,
                    eigenvalue: *l,
                    residual: *res,
                });
            }
            let violations = report.violations(true);
            run.check(
                format!("spectrum at t = {}: ascending, residual ≤ {RESIDUAL_TOL:e}·‖A‖, λ₁ ≈ 0", g.t()),
                violations.is_empty(),
                if violations.is_empty() {
                    format!("{} pairs by {}", report.eigenvalues.len(), report.solver)
                } else {
                    violations.join("; ")
                },
            );
            let lowest = report.eigenvalues.first().copied().unwrap_or(0.0);
            run.check(
                format!("positivity at t = {}: smallest Ritz value ≥ −{KERNEL_TOL:e}", g.t()),
                lowest >= -KERNEL_TOL,
                format!("smallest Ritz value {lowest:e}"),
            );
            if config.export_operator.unwrap_or(false) {
                let header = OperatorHeader {
                    dim: op.dim(),
                    t: g.t(),
                    epsilon: g.net.epsilon,
                    r,
                    action: g.action.name.clone(),
                    mode,
                };
                run.text(&format!("operator-t{}.txt", g.t()), operator_export(&op, &header)?);
            }
            reports.push(report);
        }
        run.csv("spectrum.csv", &rows)?;
        run.results(&reports)
    }
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    signature: GapSignature,
    r: f64,
    min_normalized: f64,
    ratio: f64,
    raw_ratio: f64,
    rows: &'a [warpcone::spectra::GapRow],
}

pub struct SweepCommand;

impl Command for SweepCommand {
    fn name(&self) -> &'static str {
        "sweep"
    }

    fn about(&self) -> &'static str {
        "normalized spectral gap of the coarse Laplacian across levels; write gap.csv"
    }

    fn run(&self, ctx: &Context, config: &RunConfig, run: &mut Run) -> Result<()> {
        let action = config.action_name()?;
        let signature = ctx.actions.get(action)?.signature();
        let spec = SweepSpec {
            action: action.to_string(),
            params: config.action_params(),
            levels: config.level_list()?,
            epsilon: config.epsilon_or(DEFAULT_EPSILON),
            r: match config.r {
                Some(Radius::Value(r)) => Some(r),
                _ => None,
            },
            seed: config.seed(),
            mode: config.mode,
            net: config.net.unwrap_or_default(),
        };
        let sweep = gap_across_levels(&ctx.actions, ctx.solver(config)?, &spec)?;
        let limits: Vec<f64> = sweep.rows.iter().map(|r| RESIDUAL_TOL * r.norm_bound).collect();
        let excess = worst(sweep.rows.iter().zip(&limits).map(|(r, l)| r.residual / l));
        if let Some((i, e)) = excess {
            run.check(
                format!("residuals ≤ {RESIDUAL_TOL:e}·‖A‖"),
                e <= 1.0,
                format!("worst at t = {}: residual {:e}", sweep.rows[i].t, sweep.rows[i].residual),
            );
        }
        let first = &sweep.rows[0];
        let last = &sweep.rows[sweep.rows.len() - 1];
        match signature {
            GapSignature::Decaying if sweep.rows.len() > 1 => {
                run.check(
                    format!("gap decay: normalized gap ratio (last/first level) < {DECAY_RATIO}"),
                    sweep.ratio < DECAY_RATIO,
                    format!("ratio {} (t = {} vs t = {})", sweep.ratio, last.t, first.t),
                );
                run.check(
                    format!("gap decay: λ₂(last level) < λ₂(first level)·{DECAY_RATIO}"),
                    sweep.raw_ratio < DECAY_RATIO,
                    format!("λ₂ = {} at t = {}, {} at t = {}", last.lambda2, last.t, first.lambda2, first.t),
                );
            }
            GapSignature::Expander => {
                let gamma0 = config.gamma0.unwrap_or(SO3_GAMMA0);
                let (i, _) = worst(sweep.rows.iter().map(|r| -r.normalized)).expect("at least one level");
                run.check(
                    format!("expander signature: normalized gap ≥ γ₀ = {gamma0} at every level"),
                    sweep.min_normalized >= gamma0,
                    format!("minimum {} at t = {}", sweep.min_normalized, sweep.rows[i].t),
                );
            }
            _ => {}
        }
        run.csv("gap.csv", &sweep.rows)?;
        run.results(&SweepSummary {
            signature,
            r: sweep.r,
            min_normalized: sweep.min_normalized,
            ratio: sweep.ratio,
            raw_ratio: sweep.raw_ratio,
            rows: &sweep.rows,
        })
    }
}
