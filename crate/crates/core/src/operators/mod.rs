//! Coarse, local and group Laplacians on a weighted net.
//!
//! Functions on the net carry the inner product `⟨ξ, η⟩ = Σ w_x ξ_x η_x`.
//! With `B(x, y) = 1[t·d(x, y) < r]`, `φ_d(x) = Σ_y B(x, y) w_y` and
//! `σ_s` the snapped generator maps:
//!
//! * local: `(L ξ)(x) = Σ_y B(x, y) w_y (ξ_x − ξ_y)`
//! * group: `(Δ_G ξ)(x) = Σ_s (ξ_x − ξ_{σ_s x})`
//! * coarse (direct): `(Δ_E ξ)(x) = Σ_y K(x, y) w_y (ξ_x − ξ_y)` with
//!   `K(x, y) = #{s : t·d(σ_s x, y) < r}`
//! * coarse (composed): `|S|Φ − (|S| − Δ_G)(Φ − L)` with `Φ = diag(φ_d)`.
//!
//! The two coarse assemblies agree exactly when `σ_s` permutes the net and
//! `φ_d` is constant (lattice and finite nets).  On other nets they differ by
//! the diagonal `Σ_s φ_d(σ_s x) − |S| φ_d(x)`.

mod sparse;

pub use sparse::{asymmetry, csr_matvec, max_abs, CouplingBuilder, SymmetricOperator};

use std::fmt;
use std::str::FromStr;

use nalgebra_sparse::CsrMatrix;
use serde::{Deserialize, Serialize};

use crate::spaces::{EpsNet, PhiEstimate};
use crate::warped::{SnapMode, WarpedGraph};
use crate::{Result, WarpError};

/// How the coarse Laplacian is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoarseMode {
    /// Quadrature of the controlled-set sums row by row.
    Direct,
    /// `|S|Φ − (|S| − Δ_G)(Φ − L)` from the assembled parts.
    Composed,
}

impl fmt::Display for CoarseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CoarseMode::Direct => "direct",
            CoarseMode::Composed => "composed",
        })
    }
}

impl FromStr for CoarseMode {
    type Err = WarpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(CoarseMode::Direct),
            "composed" => Ok(CoarseMode::Composed),
            other => Err(WarpError::Unknown {
                kind: "coarse mode",
                name: other.into(),
                known: "direct, composed".into(),
            }),
        }
    }
}

/// Indices `y` with `t·d(p_x, p_y) < r`, for every `x`.
pub fn ball_lists(net: &EpsNet, r: f64) -> Vec<Vec<usize>> {
    net.balls(r)
}

/// Discrete ball masses `φ_d(x) = Σ_{t·d(x,y) < r} w_y`.
pub fn ball_masses(net: &EpsNet, r: f64) -> Vec<f64> {
    ball_lists(net, r)
        .iter()
        .map(|ball| ball.iter().map(|&y| net.weights[y]).sum())
        .collect()
}

fn check_r(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(WarpError::Precondition(format!("r must be positive and finite, got {r}")))
    }
}

/// Local Laplacian `L_r` on the weighted net.
///
/// When every ball is a singleton the result is the zero operator with a note.
pub fn assemble_local(net: &EpsNet, r: f64) -> Result<SymmetricOperator> {
    check_r(r)?;
    let balls = ball_lists(net, r);
    let mut b = CouplingBuilder::new(net.len());
    for (x, ball) in balls.iter().enumerate() {
        for &y in ball {
            b.add(x, y, net.weights[x] * net.weights[y]);
        }
    }
    let (form, defect) = b.finish();
    let mut op = SymmetricOperator::from_symmetric(form, net.weights.clone(), defect);
    if balls.iter().all(|ball| ball.len() <= 1) {
        op.notes
            .push(format!("every ball of radius {r} is a singleton; local Laplacian is zero"));
    }
    Ok(op)
}

/// Group Laplacian `Δ_G = |S| − Σ_s P_s` of the snapped generator maps.
///
/// Coinciding snaps add up as multiplicities.  The form uses the symmetric
/// couplings `½(w_x n(x→y) + w_y n(y→x))`; on nets closed under the action
/// this is exactly `W Δ_G`.
pub fn assemble_group(graph: &WarpedGraph) -> Result<SymmetricOperator> {
    if graph.snap_mode != SnapMode::Snap {
        return Err(WarpError::Precondition(
            "the group Laplacian needs a snap-mode graph".into(),
        ));
    }
    let w = &graph.net.weights;
    let mut b = CouplingBuilder::new(graph.len());
    for targets in &graph.snap {
        for (x, &y) in targets.iter().enumerate() {
            b.add(x, y, w[x]);
        }
    }
    let (form, defect) = b.finish();
    Ok(SymmetricOperator::from_symmetric(form, w.clone(), defect))
}

/// Coarse Laplacian `Δ_{E_r}` in the requested mode.
///
/// `r` must not exceed the graph's admissible radius.
pub fn assemble_coarse(graph: &WarpedGraph, r: f64, mode: CoarseMode) -> Result<SymmetricOperator> {
    check_r(r)?;
    match mode {
        CoarseMode::Direct => {
            let sets = graph.controlled_sets(r)?;
            let w = &graph.net.weights;
            let mut b = CouplingBuilder::new(graph.len());
            for (x, set) in sets.iter().enumerate() {
                for &(y, _) in set {
                    b.add(x, y, w[x] * w[y]);
                }
            }
            let (form, defect) = b.finish();
            Ok(SymmetricOperator::from_symmetric(form, w.clone(), defect))
        }
        CoarseMode::Composed => {
            if r > graph.admissible_radius() * (1.0 + 1e-12) {
                // Same precondition and message as the direct path.
                graph.controlled_sets(r)?;
            }
            let local = assemble_local(&graph.net, r)?;
            let group = assemble_group(graph)?;
            let phi = ball_masses(&graph.net, r);
            compose(&local, &group, &phi, graph.action.size())
        }
    }
}

/// `|S|Φ − (|S| − T_G)(Φ − T_L)` as a symmetric operator.
pub fn compose(
    local: &SymmetricOperator,
    group: &SymmetricOperator,
    phi: &[f64],
    s_size: usize,
) -> Result<SymmetricOperator> {
    let s = s_size as f64;
    let n = local.dim();
    let phi_m = sparse::diagonal(phi);
    let m1 = &sparse::diagonal(&vec![s; n]) - &group.operator_matrix();
    let m2 = &phi_m - &local.operator_matrix();
    let t_c = &(&phi_m * s) - &(&m1 * &m2);
    let form = sparse::scale_rows(&t_c, &local.weights);
    SymmetricOperator::from_form(form, local.weights.clone())
}

/// Largest entry of `T_a − T_b` for the operator matrices `T = W⁻¹A`.
pub fn decomposition_residual(a: &SymmetricOperator, b: &SymmetricOperator) -> f64 {
    let diff = &a.operator_matrix() - &b.operator_matrix();
    max_abs(&diff)
}

fn check_kernel(alpha: &CsrMatrix<f64>, n: usize) -> Result<()> {
    if alpha.nrows() != n || alpha.ncols() != n {
        return Err(WarpError::Domain(format!(
            "kernel is {}x{} for {n} net points",
            alpha.nrows(),
            alpha.ncols()
        )));
    }
    if alpha.values().iter().any(|v| !(*v >= 0.0)) {
        return Err(WarpError::Domain("kernel entries must be non-negative".into()));
    }
    let defect = asymmetry(alpha);
    if defect > 0.0 {
        return Err(WarpError::Domain(format!("kernel is not symmetric (defect {defect:e})")));
    }
    Ok(())
}

/// `½ Σ_{x,y} α(x, y) |ξ_x − ξ_y|² w_x w_y` for a symmetric non-negative kernel.
pub fn kernel_form(alpha: &CsrMatrix<f64>, xi: &[f64], weights: &[f64]) -> Result<f64> {
    check_kernel(alpha, weights.len())?;
    if xi.len() != weights.len() {
        return Err(WarpError::Domain("vector and weights differ in length".into()));
    }
    Ok(0.5
        * alpha
            .triplet_iter()
            .map(|(x, y, a)| a * (xi[x] - xi[y]).powi(2) * weights[x] * weights[y])
            .sum::<f64>())
}

/// Kernel Laplacian `(T ξ)(x) = Σ_y α(x, y) w_y (ξ_x − ξ_y)` of a symmetric kernel.
pub fn kernel_laplacian(alpha: &CsrMatrix<f64>, weights: &[f64]) -> Result<SymmetricOperator> {
    check_kernel(alpha, weights.len())?;
    let mut b = CouplingBuilder::new(weights.len());
    for (x, y, a) in alpha.triplet_iter() {
        b.add(x, y, a * weights[x] * weights[y]);
    }
    let (form, defect) = b.finish();
    Ok(SymmetricOperator::from_symmetric(form, weights.to_vec(), defect))
}

/// The three Laplacians of one level together with `φ`.
#[derive(Debug, Clone)]
pub struct OperatorBundle {
    pub coarse: SymmetricOperator,
    pub local: SymmetricOperator,
    pub group: SymmetricOperator,
    /// Discrete ball masses `φ_d` at the net points.
    pub phi: Vec<f64>,
    /// Continuum `φ` at the first net point.
    pub phi_continuum: PhiEstimate,
    pub r: f64,
    pub mode: CoarseMode,
    pub t: f64,
    pub epsilon: f64,
    pub action: String,
    pub s_size: usize,
}

/// Assembles all three Laplacians on `graph`.
///
/// Without an explicit mode, nets closed under the action use the composed
/// coarse Laplacian and other nets the direct one (which keeps constants in
/// the kernel).
pub fn assemble_bundle(graph: &WarpedGraph, r: f64, mode: Option<CoarseMode>) -> Result<OperatorBundle> {
    let mode = mode.unwrap_or(if graph.net.is_group_closed() {
        CoarseMode::Composed
    } else {
        CoarseMode::Direct
    });
    let local = assemble_local(&graph.net, r)?;
    let group = assemble_group(graph)?;
    let phi = ball_masses(&graph.net, r);
    let coarse = match mode {
        CoarseMode::Composed => {
            graph.controlled_sets(r).map(|_| ())?;
            compose(&local, &group, &phi, graph.action.size())?
        }
        CoarseMode::Direct => assemble_coarse(graph, r, CoarseMode::Direct)?,
    };
    let net = &graph.net;
    let phi_continuum = crate::spaces::phi_value(&net.space, net, r, &net.points[0])?;
    Ok(OperatorBundle {
        coarse,
        local,
        group,
        phi,
        phi_continuum,
        r,
        mode,
        t: net.t,
        epsilon: net.epsilon,
        action: graph.action.name.clone(),
        s_size: graph.action.size(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actions::{ActionCatalog, ActionParams, ActionSpec};
    use crate::spaces::{arithmetic_net, build_eps_net, rng_for, ModelSpace};
    use crate::warped::build_warped_graph;
    use nalgebra_sparse::CooMatrix;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn action(name: &str) -> ActionSpec {
        ActionCatalog::builtin().build(name, &ActionParams::default()).unwrap()
    }

    fn odometer(depth: u32) -> ActionSpec {
        let p = ActionParams {
            depth: Some(depth),
            ..Default::default()
        };
        ActionCatalog::builtin().build("odometer", &p).unwrap()
    }

    fn circle_graph(n: usize, t: f64) -> WarpedGraph {
        let a = action("circle-rotation");
        let net = arithmetic_net(&a.space, t, n).unwrap();
        build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap()
    }

    fn mode(n: usize, k: usize) -> Vec<f64> {
        (0..n).map(|j| (2.0 * PI * (k * j) as f64 / n as f64).cos()).collect()
    }

    #[test]
    fn laplacians_annihilate_constants() {
        let g = circle_graph(500, 10.0);
        let ones = vec![1.0; g.len()];
        for op in [
            assemble_local(&g.net, 1.0).unwrap(),
            assemble_group(&g).unwrap(),
            assemble_coarse(&g, 0.8, CoarseMode::Direct).unwrap(),
        ] {
            // Rows sum to zero up to the rounding of a few hundred additions.
            assert!(op.constant_defect() <= 1e-13 * op.norm_bound());
            assert!(op.quadratic(&ones).abs() < 1e-12);
        }
        let composed = assemble_coarse(&g, 0.8, CoarseMode::Composed).unwrap();
        assert!(composed.constant_defect() < 1e-12);
    }

    #[test]
    fn local_fourier_modes_match_the_interval_kernel() {
        // Continuum symbol of the ball kernel on a length-t circle.
        let (t, r, n) = (10.0, 1.0, 4105);
        let g = circle_graph(n, t);
        let l = assemble_local(&g.net, r).unwrap();
        for k in 1..=10 {
            let oracle = 2.0 * r - t / (PI * k as f64) * (2.0 * PI * k as f64 * r / t).sin();
            let got = l.rayleigh(&mode(n, k));
            assert!((got - oracle).abs() < 1e-3, "k = {k}: {got} vs {oracle}");
        }
        let k1 = 2.0 - 10.0 / PI * (0.2 * PI).sin();
        assert!((k1 - 0.129_021_432).abs() < 1e-9);
    }

    #[test]
    fn group_fourier_modes_match_the_snapped_rotation() {
        let n = 1000;
        let g = circle_graph(n, 10.0);
        let op = assemble_group(&g).unwrap();
        let alpha_hat = (((2f64.sqrt() - 1.0) * n as f64).round()) / n as f64;
        for k in 0..=10 {
            let oracle = 2.0 - 2.0 * (2.0 * PI * k as f64 * alpha_hat).cos();
            let got = if k == 0 { 0.0 } else { op.rayleigh(&mode(n, k)) };
            assert!((got - oracle).abs() < 1e-9, "k = {k}");
        }
    }

    #[test]
    fn trivial_group_laplacian_is_zero() {
        let a = action("trivial");
        let net = build_eps_net(&a.space, 10.0, 0.5, 1).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        assert_eq!(max_abs(&assemble_group(&g).unwrap().form), 0.0);
    }

    #[test]
    fn small_radius_gives_zero_local_operator() {
        let net = arithmetic_net(&ModelSpace::Circle, 10.0, 100).unwrap();
        let l = assemble_local(&net, 0.05).unwrap();
        assert_eq!(max_abs(&l.form), 0.0);
        assert_eq!(l.notes.len(), 1);
    }

    #[test]
    fn decomposition_is_exact_on_lattice_and_finite_nets() {
        for (n, t) in [(512, 5.0), (1030, 10.0), (2050, 20.0)] {
            let g = circle_graph(n, t);
            let r = 0.9 * g.admissible_radius().min(1.0);
            let d = assemble_coarse(&g, r, CoarseMode::Direct).unwrap();
            let c = assemble_coarse(&g, r, CoarseMode::Composed).unwrap();
            assert!(decomposition_residual(&d, &c) <= 1e-10, "t = {t}");
        }
        let a = odometer(7);
        let net = build_eps_net(&a.space, 128.0, 1.0, 0).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        let d = assemble_coarse(&g, 10.0, CoarseMode::Direct).unwrap();
        let c = assemble_coarse(&g, 10.0, CoarseMode::Composed).unwrap();
        assert!(decomposition_residual(&d, &c) <= 1e-10);
    }

    #[test]
    fn decomposition_residual_on_random_nets_is_the_phi_drift() {
        // Off lattice nets the difference is the diagonal Σ_s φ_d(σ_s x) − |S|φ_d(x).
        let a = action("circle-rotation");
        let net = build_eps_net(&a.space, 10.0, 0.1, 2).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        let r = 0.5;
        let d = assemble_coarse(&g, r, CoarseMode::Direct).unwrap();
        let c = assemble_coarse(&g, r, CoarseMode::Composed).unwrap();
        let phi = ball_masses(&net, r);
        let drift = (0..net.len())
            .map(|x| {
                let moved: f64 = g.snap.iter().map(|sig| phi[sig[x]]).sum();
                (moved - 3.0 * phi[x]).abs()
            })
            .fold(0.0, f64::max);
        let residual = decomposition_residual(&d, &c);
        assert!(residual > 0.0);
        assert!(residual <= drift + 1e-9 + c.symmetry_defect / net.weights.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn local_laplacian_commutes_with_lattice_rotation() {
        // rN/t = 30 puts lattice points exactly on the ball boundary.
        let n = 300;
        let g = circle_graph(n, 10.0);
        let l = assemble_local(&g.net, 1.0).unwrap();
        let dense = l.to_dense_form();
        let s = g.action.generators.index_of("g").unwrap();
        let sigma = &g.snap[s];
        for x in 0..n {
            for y in 0..n {
                assert_eq!(dense[(sigma[x], sigma[y])], dense[(x, y)]);
            }
        }
    }

    #[test]
    fn inadmissible_radius_is_rejected_in_both_modes() {
        let g = circle_graph(200, 10.0);
        for m in [CoarseMode::Direct, CoarseMode::Composed] {
            assert!(matches!(assemble_coarse(&g, 5.0, m), Err(WarpError::Precondition(_))));
        }
    }

    #[test]
    fn operators_are_positive_on_random_vectors() {
        let mut rng = rng_for(17, 9);
        let a = action("so3-rational-rotations");
        let net = build_eps_net(&a.space, 3.0, 0.7, 5).unwrap();
        let g = build_warped_graph(&net, &a, None, SnapMode::Snap).unwrap();
        let bundle = assemble_bundle(&g, 0.4, None).unwrap();
        assert_eq!(bundle.mode, CoarseMode::Direct);
        for op in [&bundle.coarse, &bundle.local, &bundle.group] {
            for _ in 0..200 {
                let xi: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm: f64 = xi.iter().map(|v| v * v).sum();
                assert!(op.quadratic(&xi) >= -1e-9 * norm);
            }
        }
    }

    #[test]
    fn kernel_form_matches_the_local_quadratic_form() {
        let net = build_eps_net(&ModelSpace::Circle, 10.0, 0.3, 8).unwrap();
        let r = 1.0;
        let n = net.len();
        let mut coo = CooMatrix::new(n, n);
        for (x, ball) in ball_lists(&net, r).iter().enumerate() {
            for &y in ball {
                coo.push(x, y, 1.0);
            }
        }
        let alpha = CsrMatrix::from(&coo);
        let l = assemble_local(&net, r).unwrap();
        let mut rng = rng_for(3, 9);
        for _ in 0..20 {
            let xi: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let a = kernel_form(&alpha, &xi, &net.weights).unwrap();
            assert!((a - l.quadratic(&xi)).abs() <= 1e-10 * a.abs().max(1.0));
        }
        assert_eq!(kernel_form(&alpha, &vec![2.5; n], &net.weights).unwrap(), 0.0);
        let t = kernel_laplacian(&alpha, &net.weights).unwrap();
        assert!(crate::operators::max_abs(&(&t.form - &l.form)) < 1e-15);
    }

    #[test]
    fn asymmetric_kernel_is_rejected() {
        let mut coo = CooMatrix::new(2, 2);
        coo.push(0, 1, 1.0);
        let alpha = CsrMatrix::from(&coo);
        assert!(kernel_form(&alpha, &[0.0, 1.0], &[1.0, 1.0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn kernel_form_is_non_negative(
            entries in proptest::collection::vec((0usize..6, 0usize..6, 0.0f64..3.0), 0..20),
            xi in proptest::collection::vec(-5.0f64..5.0, 6),
            w in proptest::collection::vec(0.01f64..2.0, 6),
        ) {
            let mut coo = CooMatrix::new(6, 6);
            for (x, y, a) in entries {
                coo.push(x, y, a);
                coo.push(y, x, a);
            }
            let alpha = CsrMatrix::from(&coo);
            let v = kernel_form(&alpha, &xi, &w).unwrap();
            prop_assert!(v >= 0.0);
            let q = kernel_laplacian(&alpha, &w).unwrap().quadratic(&xi);
            prop_assert!((v - q).abs() <= 1e-10 * v.max(1.0));
        }
    }
}
