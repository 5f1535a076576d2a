use anyhow::{bail, Result};
use serde::Serialize;
use warpcone::spaces::ModelSpace;
use warpcone::spectra::{accumulation_scan, sandwich_check, weyl_counting, SandwichSide, SandwichSpec};

use super::{Command, Context};
use crate::config::{Radius, RunConfig};
use crate::report::Run;

#[derive(Serialize)]
struct SandwichCsvRow {
    side: SandwichSide,
    t: f64,
    k: String,
    lhs: f64,
    rhs: f64,
    margin: f64,
}

pub struct SandwichCommand;

impl Command for SandwichCommand {
    fn name(&self) -> &'static str {
        "sandwich"
    }

    fn about(&self) -> &'static str {
        "mode-by-mode check of 0 ≤ L_r ≤ C(1 − e^{−Δ/t²}) ≤ D·L_R + ε on a flat space; write sandwich.csv"
    }

    fn run(&self, _ctx: &Context, config: &RunConfig, run: &mut Run) -> Result<()> {
        let space = match config.space {
            Some(_) => config.model_space()?,
            None => ModelSpace::Circle,
        };
        let r = match config.r {
            Some(Radius::Value(r)) => r,
            Some(Radius::Auto) => bail!("sandwich needs an explicit r"),
            None => 1.0,
        };
        let defaults = SandwichSpec::circle(Vec::new(), r, 0.01);
        let spec = SandwichSpec {
            space,
            ts: config.level_list()?,
            r,
            epsilon_target: config.epsilon_target.unwrap_or(defaults.epsilon_target),
            kmax: config.kmax.unwrap_or(defaults.kmax),
            r_step: defaults.r_step,
            r_cap: defaults.r_cap,
        };
        let report = sandwich_check(&spec)?;
        let worst = report.worst.clone().unwrap_or_else(|| "none".into());
        run.check(
            "lower sandwich: 0 ≤ L_r ≤ C·σ for every mode at every level from t₀ on",
            report.t0.is_some(),
            format!(
                "C = {}, t₀ = {:?}, largest violation below t₀ {:e}, worst {worst}",
                report.c, report.t0, report.lower_violation
            ),
        );
        run.check(
            format!("upper sandwich: σ ≤ D·L_R + ε with some R ≤ {}", spec.r_cap),
            report.big_r.is_some() && report.upper_violation <= 0.0,
            format!(
                "D = {}, R = {:?}, largest violation {:e}, worst {worst}",
                report.d, report.big_r, report.upper_violation
            ),
        );
        let rows: Vec<SandwichCsvRow> = report
            .rows
            .iter()
            .map(|row| SandwichCsvRow {
                side: row.side,
                t: row.t,
                k: row.k.iter().map(i64::to_string).collect::<Vec<_>>().join(" "),
                lhs: row.lhs,
                rhs: row.rhs,
                margin: row.margin,
            })
            .collect();
        run.csv("sandwich.csv", &rows)?;
        run.results(&report)
    }
}

#[derive(Serialize)]
struct WeylRow {
    #[serde(rename = "R")]
    big_r: f64,
    #[serde(rename = "N")]
    count: u64,
    fit: f64,
}

pub struct WeylCommand;

impl Command for WeylCommand {
    fn name(&self) -> &'static str {
        "weyl"
    }

    fn about(&self) -> &'static str {
        "exact eigenvalue counts N(R) on a flat space and the fitted Weyl constant; write weyl.csv"
    }

    fn run(&self, _ctx: &Context, config: &RunConfig, run: &mut Run) -> Result<()> {
        let space = config.model_space()?;
        let r_max = config.rmax.unwrap_or(1e7);
        let report = weyl_counting(&space, r_max, config.points.unwrap_or(40))?;
        let tolerance = config
            .tolerance
            .unwrap_or(if space.dimension() == 1 { 0.02 } else { 0.05 });
        run.check(
            format!("Weyl law: fitted C within {tolerance} (relative) of ω_m/(2π)^m"),
            report.relative_error <= tolerance,
            format!("fit {} vs {}, relative error {:e}", report.fit, report.expected, report.relative_error),
        );
        let rows: Vec<WeylRow> = report
            .grid
            .iter()
            .zip(&report.counts)
            .map(|(&r, &n)| WeylRow {
                big_r: r,
                count: n,
                fit: report.fit * r.powf(report.exponent),
            })
            .collect();
        run.csv("weyl.csv", &rows)?;
        run.results(&report)
    }
}

#[derive(Serialize)]
struct AccumulationRow {
    t: f64,
    count: u64,
}

pub struct AccumulateCommand;

impl Command for AccumulateCommand {
    fn name(&self) -> &'static str {
        "accumulate"
    }

    fn about(&self) -> &'static str {
        "count rescaled Laplace eigenvalues in [ε, factor·ε] per level; write accumulation.csv"
    }

    fn run(&self, _ctx: &Context, config: &RunConfig, run: &mut Run) -> Result<()> {
        let space = config.model_space()?;
        let levels = match (&config.levels, config.t) {
            (None, None) => (1..=200).map(f64::from).collect(),
            _ => config.level_list()?,
        };
        let report = accumulation_scan(&space, &levels, config.epsilon_or(0.5), config.factor.unwrap_or(2.0))?;
        let empty_after = |from: f64| {
            levels
                .iter()
                .zip(&report.counts)
                .filter(|&(&t, &c)| t >= from && c == 0)
                .map(|(&t, _)| t)
                .fold(None, |_, t| Some(t))
        };
        match report.derived_threshold {
            Some(derived) => {
                let last_empty = empty_after(derived);
                run.check(
                    "accumulation: window non-empty at every tested level beyond 2π/(√(factor·ε) − √ε)",
                    last_empty.is_none(),
                    match last_empty {
                        None => format!("derived threshold {derived}, observed t₀ = {:?}", report.threshold),
                        Some(t) => format!("empty window at t = {t} beyond derived threshold {derived}"),
                    },
                );
            }
            None => {
                run.check(
                    "accumulation: window non-empty from some tested level on",
                    report.threshold.is_some(),
                    format!("observed t₀ = {:?}", report.threshold),
                );
            }
        }
        let rows: Vec<AccumulationRow> = levels
            .iter()
            .zip(&report.counts)
            .map(|(&t, &count)| AccumulationRow { t, count })
            .collect();
        run.csv("accumulation.csv", &rows)?;
        run.results(&report)
    }
}
