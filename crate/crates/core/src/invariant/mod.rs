//! The G-invariant kernel sector on group spaces.
//!
//! A kernel with `k(gx, gy) = k(x, y)` is determined by its section
//! `f = k(·, e)` through `k(x, y) = f(y⁻¹x)`.  The map `W f = √μ_t(M)·k`
//! is an isometry onto the invariant sector and intertwines the local
//! Laplacian acting on the first variable with the local Laplacian on `f`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::operators::{assemble_bundle, assemble_local, CoarseMode, SymmetricOperator};
use crate::spaces::{group_inv, group_mul, rng_for, EpsNet, NetConstruction};
use crate::spectra::{bottom_spectrum_with, DenseSolver, SpectrumMeta};
use crate::warped::WarpedGraph;
use crate::{Result, WarpError};

/// Kernel `K[x][y] = f(snap(y⁻¹x))` on a net.
#[derive(Debug, Clone)]
pub struct LiftedKernel {
    pub matrix: DMatrix<f64>,
    /// Largest scaled distance between `y⁻¹x` and the net point it snapped to.
    pub max_snap_error: f64,
    pub warning: Option<String>,
}

/// Index of the net point standing in for `y⁻¹x`, with the scaled snap error.
fn quotient_index(net: &EpsNet, x: usize, y: usize, index: &crate::spaces::NeighborIndex) -> (usize, f64) {
    if let NetConstruction::Arithmetic { per_axis } = net.construction {
        // Lattice points j/N: the quotient is exact index arithmetic per axis.
        let dim = net.space.dimension();
        let (mut rx, mut ry, mut idx, mut stride) = (x, y, 0, 1);
        for _ in 0..dim {
            idx += ((rx % per_axis) + per_axis - (ry % per_axis)) % per_axis * stride;
            rx /= per_axis;
            ry /= per_axis;
            stride *= per_axis;
        }
        return (idx, 0.0);
    }
    let space = &net.space;
    let q = group_mul(space, &group_inv(space, &net.points[y]), &net.points[x]);
    let (id, d) = index.nearest(&q).expect("non-empty net");
    (id, d * net.t)
}

fn check_group_net(net: &EpsNet, len: usize) -> Result<()> {
    if !net.space.is_group() || net.is_empty() {
        return Err(WarpError::Domain(format!("{} is not a non-empty group net", net.space)));
    }
    if len != net.len() {
        return Err(WarpError::Domain(format!(
            "section has {len} values for {} net points",
            net.len()
        )));
    }
    Ok(())
}

/// Index of the net point nearest the identity.
pub fn identity_index(net: &EpsNet) -> usize {
    net.index(net.epsilon)
        .nearest(&net.space.identity())
        .map(|(id, _)| id)
        .unwrap_or(0)
}

/// Lifts a section `f` to the invariant kernel `K[x][y] = f(snap(y⁻¹x))`.
///
/// Snap errors above `epsilon` are reported as a warning, not rejected.
pub fn lift_kernel(net: &EpsNet, f: &[f64]) -> Result<LiftedKernel> {
    check_group_net(net, f.len())?;
    let n = net.len();
    let index = net.index(net.epsilon);
    let mut max_snap_error = 0.0f64;
    let mut matrix = DMatrix::zeros(n, n);
    for y in 0..n {
        for x in 0..n {
            let (id, err) = quotient_index(net, x, y, &index);
            max_snap_error = max_snap_error.max(err);
            matrix[(x, y)] = f[id];
        }
    }
    let warning = (max_snap_error > net.epsilon).then(|| {
        format!(
            "snap error {max_snap_error} exceeds the net separation {}",
            net.epsilon
        )
    });
    Ok(LiftedKernel {
        matrix,
        max_snap_error,
        warning,
    })
}

/// `Σ_{x,y} |K(x, y)|² w_x w_y`.
pub fn weighted_hs_norm(k: &DMatrix<f64>, weights: &[f64]) -> f64 {
    let n = weights.len();
    let mut s = 0.0;
    for y in 0..n {
        for x in 0..n {
            s += k[(x, y)].powi(2) * weights[x] * weights[y];
        }
    }
    s.sqrt()
}

/// `T` applied to every column of `K` (the first kernel variable).
fn apply_first_variable(op: &SymmetricOperator, k: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let mut out = DMatrix::zeros(n, n);
    for y in 0..n {
        let col: Vec<f64> = k.column(y).iter().copied().collect();
        for (x, v) in op.apply(&col).into_iter().enumerate() {
            out[(x, y)] = v;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct IntertwiningReport {
    /// `‖L∘Wf − W(Lf)‖_HS / ‖Wf‖_HS`.
    pub residual: f64,
    /// `|‖K‖_HS − √μ_t(M)·‖f‖| / (√μ_t(M)·‖f‖)`.
    pub isometry_defect: f64,
    pub hs_norm: f64,
    pub expected_norm: f64,
    pub max_snap_error: f64,
    pub warning: Option<String>,
}

/// Compares the local Laplacian acting on the lifted kernel with the lift of
/// the local Laplacian of the section, and checks that the lift is isometric.
pub fn w_unitary_residual(net: &EpsNet, r: f64, f: &[f64]) -> Result<IntertwiningReport> {
    let local = assemble_local(net, r)?;
    intertwining_with(net, &local, f)
}

/// As [`w_unitary_residual`] with an already assembled local Laplacian.
pub fn intertwining_with(net: &EpsNet, local: &SymmetricOperator, f: &[f64]) -> Result<IntertwiningReport> {
    let lifted = lift_kernel(net, f)?;
    let w = &net.weights;
    let f_norm = f.iter().zip(w).map(|(v, wx)| v * v * wx).sum::<f64>().sqrt();
    let expected_norm = net.scaled_mass().sqrt() * f_norm;
    let hs_norm = weighted_hs_norm(&lifted.matrix, w);
    let acted = apply_first_variable(local, &lifted.matrix);
    let relifted = lift_kernel(net, &local.apply(f))?;
    let diff = weighted_hs_norm(&(acted - &relifted.matrix), w);
    let (residual, isometry_defect) = if expected_norm == 0.0 {
        (diff, hs_norm)
    } else {
        (diff / hs_norm.max(f64::MIN_POSITIVE), (hs_norm - expected_norm).abs() / expected_norm)
    };
    Ok(IntertwiningReport {
        residual,
        isometry_defect,
        hs_norm,
        expected_norm,
        max_snap_error: lifted.max_snap_error,
        warning: lifted.warning,
    })
}

/// Section with independent entries uniform on `[-1, 1)`, reproducible from `seed`.
pub fn random_section(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, 7);
    (0..n).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect()
}

/// `f(λ₁, λ₂) = φ|S| − (|S| − λ₁)(φ − λ₂)`.
pub fn joint_f(phi: f64, s_size: usize, lambda1: f64, lambda2: f64) -> f64 {
    let s = s_size as f64;
    phi * s - (s - lambda1) * (phi - lambda2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointSpectrumSample {
    pub mode: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub f_value: f64,
    pub phi: f64,
    pub s_size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct JointSpectrumReport {
    pub t: f64,
    pub r: f64,
    pub points: usize,
    pub phi: f64,
    pub s_size: usize,
    pub samples: Vec<JointSpectrumSample>,
    /// Bottom of the composed coarse spectrum.
    pub bottom: Vec<f64>,
    /// The same number of smallest `f` values.
    pub predicted: Vec<f64>,
    pub max_mismatch: f64,
    pub delta: f64,
    /// Smallest `f − δφ` over `(δ, 2|S| − δ) × [0, 2φ]`, on the samples and a uniform grid.
    pub region_margin: f64,
}

/// Joint Fourier diagonalization of the group and local Laplacians on a
/// lattice circle net, compared with the bottom of the composed coarse spectrum.
pub fn joint_spectrum(graph: &WarpedGraph, r: f64, bottom: usize, delta: f64) -> Result<JointSpectrumReport> {
    let net = &graph.net;
    let n = match (net.space, net.construction) {
        (crate::spaces::ModelSpace::Circle, NetConstruction::Arithmetic { per_axis }) => per_axis,
        _ => {
            return Err(WarpError::Domain(
                "the joint spectrum needs commuting circulants: a circle rotation on a lattice net {j/N}".into(),
            ))
        }
    };
    let bundle = assemble_bundle(graph, r, Some(CoarseMode::Composed))?;
    let w = net.weights[0];
    let phi = bundle.phi[0];
    let shifts: Vec<usize> = graph.snap.iter().map(|targets| targets[0]).collect();
    let ball = &net.balls(r)[0];
    let tau = std::f64::consts::TAU;
    let samples: Vec<JointSpectrumSample> = (0..n)
        .map(|k| {
            let angle = |j: usize| tau * ((k * j) % n) as f64 / n as f64;
            let lambda1 = shifts.iter().map(|&m| 1.0 - angle(m).cos()).sum();
            let lambda2 = ball.iter().map(|&y| w * (1.0 - angle(y).cos())).sum();
            JointSpectrumSample {
                mode: k,
                lambda1,
                lambda2,
                f_value: joint_f(phi, graph.action.size(), lambda1, lambda2),
                phi,
                s_size: graph.action.size(),
            }
        })
        .collect();
    let bottom = bottom.min(n);
    let report = bottom_spectrum_with(&bundle.coarse, bottom, SpectrumMeta::named("coarse"), &DenseSolver)?;
    let mut predicted: Vec<f64> = samples.iter().map(|s| s.f_value).collect();
    predicted.sort_by(f64::total_cmp);
    predicted.truncate(bottom);
    let max_mismatch = report
        .eigenvalues
        .iter()
        .zip(&predicted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let s = graph.action.size() as f64;
    let in_region = |l1: f64, l2: f64| l1 > delta && l1 < 2.0 * s - delta && (0.0..=2.0 * phi).contains(&l2);
    let mut region_margin = f64::INFINITY;
    for smp in &samples {
        if in_region(smp.lambda1, smp.lambda2) {
            region_margin = region_margin.min(smp.f_value - delta * phi);
        }
    }
    let steps = 100;
    for i in 1..steps {
        let l1 = delta + (2.0 * s - 2.0 * delta) * i as f64 / steps as f64;
        for j in 0..=steps {
            let l2 = 2.0 * phi * j as f64 / steps as f64;
            region_margin = region_margin.min(joint_f(phi, graph.action.size(), l1, l2) - delta * phi);
        }
    }
    Ok(JointSpectrumReport {
        t: net.t,
        r,
        points: n,
        phi,
        s_size: graph.action.size(),
        samples,
        bottom: report.eigenvalues,
        predicted,
        max_mismatch,
        delta,
        region_margin,
    })
}
