//! Bottom spectra of the assembled Laplacians and the closed-form spectral
//! experiments on flat models: Weyl counting, accumulation windows and the
//! heat-kernel sandwich.

mod counting;
mod heat;
mod solver;

pub use counting::{
    accumulation_scan, eigenvalue_count, lattice_count, weyl_constant, weyl_counting, AccumulationReport, WeylReport,
};
pub use heat::{
    bessel_j, heat_gaussian_ratio, heat_sigma, local_symbol, sandwich_check, HeatMode, HeatOperator, SandwichReport,
    SandwichRow, SandwichSide, SandwichSpec,
};
pub use solver::{
    residual, solve, AutoSolver, DenseSolver, EigenSolver, Eigenpairs, LanczosSolver, SolverRegistry, DENSE_LIMIT,
};

use serde::{Deserialize, Serialize};

use crate::actions::{ActionCatalog, ActionParams};
use crate::operators::{assemble_bundle, CoarseMode, SymmetricOperator};
use crate::spaces::{build_net, NetStrategy};
use crate::warped::{build_warped_graph, SnapMode, WarpedGraph};
use crate::{Result, WarpError};

/// Residuals above this multiple of `‖A‖` fail a report.
pub const RESIDUAL_TOL: f64 = 1e-8;
/// Laplacians must have `|λ₁|` below this.
pub const KERNEL_TOL: f64 = 1e-9;

/// Where a spectrum came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub operator: String,
    pub action: Option<String>,
    pub t: Option<f64>,
    pub epsilon: Option<f64>,
    pub r: Option<f64>,
    pub seed: Option<u64>,
}

impl SpectrumMeta {
    pub fn named(operator: impl Into<String>) -> Self {
        Self {
            operator: operator.into(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    #[serde(flatten)]
    pub meta: SpectrumMeta,
    pub solver: String,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    /// `λ₂`, the bottom of the spectrum off the constants (when two or more values were asked for).
    pub gap: Option<f64>,
    pub norm_bound: f64,
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
}

impl SpectrumReport {
    /// Invariant violations: ordering, residual size and (for Laplacians) `λ₁ ≈ 0`.
    pub fn violations(&self, laplacian: bool) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(i) = self.eigenvalues.windows(2).position(|w| w[0] > w[1]) {
            out.push(format!("eigenvalues not ascending at index {i}"));
        }
        let limit = RESIDUAL_TOL * self.norm_bound.max(f64::MIN_POSITIVE);
        if let Some((i, r)) = self
            .residuals
            .iter()
            .enumerate()
            .filter(|(_, r)| **r > limit)
            .max_by(|a, b| a.1.total_cmp(b.1))
        {
            out.push(format!("residual {r:e} of pair {i} exceeds {limit:e}"));
        }
        if laplacian && self.eigenvalues.first().is_some_and(|l| l.abs() > KERNEL_TOL) {
            out.push(format!("lowest eigenvalue {:e} is not zero", self.eigenvalues[0]));
        }
        out
    }
}

/// The `k` smallest pairs of `A ξ = λ W ξ` with the `auto` solver.
pub fn bottom_spectrum(op: &SymmetricOperator, k: usize, meta: SpectrumMeta) -> Result<SpectrumReport> {
    bottom_spectrum_with(op, k, meta, &AutoSolver::default())
}

pub fn bottom_spectrum_with(
    op: &SymmetricOperator,
    k: usize,
    meta: SpectrumMeta,
    solver: &dyn EigenSolver,
) -> Result<SpectrumReport> {
    let pairs = solve(op, k, solver)?;
    Ok(SpectrumReport {
        meta,
        solver: pairs.solver.to_string(),
        gap: pairs.values.get(1).copied(),
        eigenvalues: pairs.values,
        residuals: pairs.residuals,
        norm_bound: pairs.norm,
        vectors: pairs.vectors,
    })
}

/// One action swept over increasing levels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub action: String,
    #[serde(default)]
    pub params: ActionParams,
    pub levels: Vec<f64>,
    pub epsilon: f64,
    /// Fixed scaled radius; `None` takes the smallest admissible radius over the levels.
    pub r: Option<f64>,
    pub seed: u64,
    pub mode: Option<CoarseMode>,
    #[serde(default)]
    pub net: NetStrategy,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapRow {
    pub t: f64,
    pub points: usize,
    pub lambda2: f64,
    /// Mean discrete ball mass `φ_d`.
    pub phi: f64,
    /// `λ₂/φ`.
    pub normalized: f64,
    pub residual: f64,
    pub norm_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GapSweep {
    pub spec: SweepSpec,
    pub r: f64,
    pub rows: Vec<GapRow>,
    pub min_normalized: f64,
    /// Normalized gap at the last level over the first.
    pub ratio: f64,
    /// `λ₂` at the last level over the first.
    pub raw_ratio: f64,
}

/// Warped graph of `action` at level `t`, with the level passed to the family.
pub fn level_graph(
    catalog: &ActionCatalog,
    action: &str,
    params: &ActionParams,
    t: f64,
    epsilon: f64,
    seed: u64,
    net: NetStrategy,
) -> Result<WarpedGraph> {
    let mut params = params.clone();
    params.level = Some(t);
    let action = catalog.build(action, &params)?;
    let net = build_net(&action.space, t, epsilon, seed, net)?;
    build_warped_graph(&net, &action, None, SnapMode::Snap)
}

/// Normalized gap `λ₂(Δ_{E_r})/φ` of the coarse Laplacian at each level.
pub fn gap_across_levels(catalog: &ActionCatalog, solver: &dyn EigenSolver, spec: &SweepSpec) -> Result<GapSweep> {
    if spec.levels.is_empty() {
        return Err(WarpError::Precondition("no levels given".into()));
    }
    if spec.levels.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(WarpError::Precondition(format!(
            "levels must be strictly increasing, got {:?}",
            spec.levels
        )));
    }
    let graphs = spec
        .levels
        .iter()
        .map(|&t| level_graph(catalog, &spec.action, &spec.params, t, spec.epsilon, spec.seed, spec.net))
        .collect::<Result<Vec<_>>>()?;
    let r = match spec.r {
        Some(r) => r,
        None => graphs.iter().map(|g| g.admissible_radius()).fold(f64::INFINITY, f64::min),
    };
    let mut rows = Vec::with_capacity(graphs.len());
    for g in &graphs {
        let bundle = assemble_bundle(g, r, spec.mode)?;
        let report = bottom_spectrum_with(&bundle.coarse, 2.min(g.len()), SpectrumMeta::named("coarse"), solver)?;
        let lambda2 = report.gap.unwrap_or(0.0);
        let phi = bundle.phi.iter().sum::<f64>() / bundle.phi.len() as f64;
        rows.push(GapRow {
            t: g.t(),
            points: g.len(),
            lambda2,
            phi,
            normalized: lambda2 / phi,
            residual: report.residuals.iter().cloned().fold(0.0, f64::max),
            norm_bound: report.norm_bound,
        });
    }
    let first = &rows[0];
    let last = &rows[rows.len() - 1];
    Ok(GapSweep {
        spec: spec.clone(),
        r,
        min_normalized: rows.iter().map(|r| r.normalized).fold(f64::INFINITY, f64::min),
        ratio: last.normalized / first.normalized,
        raw_ratio: last.lambda2 / first.lambda2,
        rows,
    })
}
