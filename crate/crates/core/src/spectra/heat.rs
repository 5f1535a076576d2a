use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::Serialize;

use crate::spaces::ModelSpace;
use crate::{Result, WarpError};

/// Flat dimension of a space with a closed-form Laplace spectrum.
pub(crate) fn flat_dimension(space: &ModelSpace) -> Result<usize> {
    match space {
        ModelSpace::Circle => Ok(1),
        ModelSpace::FlatTorus { dim } => Ok(*dim),
        other => Err(WarpError::Domain(format!(
            "closed-form Laplace spectra are available on the circle and flat tori, not {other}"
        ))),
    }
}

/// `1 − exp(−λ/t²)` without cancellation for small arguments.
pub fn heat_sigma(lambda: f64, t: f64) -> f64 {
    -(-lambda / (t * t)).exp_m1()
}

/// One eigenvalue `4π²|k|²` of the flat Laplacian with the frequencies sharing it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatMode {
    /// Representative frequency: non-negative, non-increasing coordinates.
    pub k: Vec<i64>,
    pub norm_sq: u64,
    pub lambda: f64,
    pub multiplicity: usize,
    /// `1 − exp(−λ/t²)`.
    pub sigma: f64,
}

/// `1 − exp(−Δ_M/t²)` on a flat model, diagonal in the Fourier basis.
#[derive(Debug, Clone, Serialize)]
pub struct HeatOperator {
    pub space: ModelSpace,
    pub t: f64,
    /// Ascending in `λ`; frequencies with `max |k_i| ≤ kmax`.
    pub modes: Vec<HeatMode>,
}

impl HeatOperator {
    pub fn new(space: &ModelSpace, t: f64, kmax: u64) -> Result<Self> {
        let m = flat_dimension(space)?;
        if !(t > 0.0) {
            return Err(WarpError::Precondition(format!("t must be positive, got {t}")));
        }
        let kmax = kmax as i64;
        let total = (2 * kmax + 1).checked_pow(m as u32).filter(|&c| c <= 50_000_000);
        let total = total.ok_or_else(|| {
            WarpError::Precondition(format!("kmax = {kmax} gives too many modes in dimension {m}"))
        })?;
        let mut groups: BTreeMap<u64, (Vec<i64>, usize)> = BTreeMap::new();
        let mut k = vec![-kmax; m];
        for _ in 0..total {
            let norm_sq = k.iter().map(|c| (c * c) as u64).sum::<u64>();
            let entry = groups.entry(norm_sq).or_insert_with(|| (Vec::new(), 0));
            if entry.0.is_empty() {
                let mut rep: Vec<i64> = k.iter().map(|c| c.abs()).collect();
                rep.sort_unstable_by(|a, b| b.cmp(a));
                entry.0 = rep;
            }
            entry.1 += 1;
            for c in k.iter_mut() {
                if *c < kmax {
                    *c += 1;
                    break;
                }
                *c = -kmax;
            }
        }
        let modes = groups
            .into_iter()
            .map(|(norm_sq, (k, multiplicity))| {
                let lambda = 4.0 * PI * PI * norm_sq as f64;
                HeatMode {
                    k,
                    norm_sq,
                    lambda,
                    multiplicity,
                    sigma: heat_sigma(lambda, t),
                }
            })
            .collect();
        Ok(Self {
            space: *space,
            t,
            modes,
        })
    }
}

/// Bessel `J_n(x)` from the periodic integral `(1/2π)∫₀^{2π} cos(nτ − x sin τ) dτ`.
///
/// The trapezoid rule is spectrally accurate for periodic integrands once the
/// node count exceeds `|x| + n` comfortably.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    let nodes = 2 * (x.abs().ceil() as usize + n as usize) + 64;
    let h = 2.0 * PI / nodes as f64;
    (0..nodes)
        .map(|i| {
            let tau = i as f64 * h;
            (n as f64 * tau - x * tau.sin()).cos()
        })
        .sum::<f64>()
        / nodes as f64
}

/// Eigenvalue of the continuum local Laplacian
/// `(L_r ξ)(x) = t^m ∫_{B_{r/t}(x)} (ξ(x) − ξ(y)) dμ(y)` on the mode `e^{2πik·x}`.
///
/// On the circle balls of radius at least `½` are the whole circle.  On the
/// two-torus the ball must embed (`r/t ≤ ½`).
pub fn local_symbol(space: &ModelSpace, t: f64, r: f64, norm_sq: u64) -> Result<f64> {
    let m = flat_dimension(space)?;
    if norm_sq == 0 {
        return Ok(0.0);
    }
    let kn = (norm_sq as f64).sqrt();
    match m {
        1 => {
            let rho = (r / t).min(0.5);
            Ok(t * (2.0 * rho - (2.0 * PI * kn * rho).sin() / (PI * kn)))
        }
        2 => {
            let rho = r / t;
            if rho > 0.5 {
                return Err(WarpError::Precondition(format!(
                    "the ball of scaled radius {r} at t = {t} wraps around the torus"
                )));
            }
            Ok(t * t * (PI * rho * rho - rho * bessel_j(1, 2.0 * PI * kn * rho) / kn))
        }
        _ => Err(WarpError::Domain(format!(
            "local symbols are implemented for dimensions 1 and 2, not {m}"
        ))),
    }
}

/// Largest ratio of the periodized heat kernel to the Euclidean Gaussian,
/// `sup k_s/p_s`, at `s = 1/t²`.
///
/// On `T^m` both factor over the axes, so the supremum is the one-dimensional
/// one to the power `m`; it is attained at antipodal points, where two
/// Gaussian images tie.
pub fn heat_gaussian_ratio(m: usize, t: f64) -> f64 {
    let s = 1.0 / (t * t);
    let one_dim = (0..=1000)
        .map(|i| {
            let d = 0.5 * i as f64 / 1000.0;
            (-8..=8)
                .map(|j| {
                    let y = d + j as f64;
                    (-(y * y - d * d) / (4.0 * s)).exp()
                })
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    one_dim.powi(m as i32)
}

/// Which half of the sandwich a row tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SandwichSide {
    /// `0 ≤ L_r ≤ C·σ`.
    Lower,
    /// `σ ≤ D·L_R + ε`.
    Upper,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichRow {
    pub side: SandwichSide,
    pub t: f64,
    pub k: Vec<i64>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`; negative means a violation.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichSpec {
    pub space: ModelSpace,
    pub ts: Vec<f64>,
    pub r: f64,
    pub epsilon_target: f64,
    /// Frequencies up to this size in every coordinate are checked.
    pub kmax: u64,
    pub r_step: f64,
    pub r_cap: f64,
}

impl SandwichSpec {
    pub fn circle(ts: Vec<f64>, r: f64, epsilon_target: f64) -> Self {
        Self {
            space: ModelSpace::Circle,
            ts,
            r,
            epsilon_target,
            kmax: 500,
            r_step: 0.25,
            r_cap: 50.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SandwichReport {
    pub spec: SandwichSpec,
    /// `3(4π)^{m/2} exp(r²/4)`.
    pub c: f64,
    /// `sup k_s/p_s` over the tested levels.
    pub d_heat: f64,
    /// `D = d_heat/(4π)^{m/2}`, the constant in `σ ≤ D·L_R + ε`.
    pub d: f64,
    /// Smallest `R` on the search grid satisfying the upper inequality.
    pub big_r: Option<f64>,
    /// Least tested `t` from which the lower inequality holds at every larger tested level.
    pub t0: Option<f64>,
    /// Largest violation of `0 ≤ L_r ≤ C·σ` over all modes and levels.
    pub lower_violation: f64,
    /// Largest violation of `σ ≤ D·L_R + ε` at the reported (or capped) `R`.
    pub upper_violation: f64,
    /// Worst offending mode when an inequality fails.
    pub worst: Option<String>,
    pub pass: bool,
    #[serde(skip)]
    pub rows: Vec<SandwichRow>,
}

/// Checks both halves of `0 ≤ L_r ≤ C(1 − e^{−Δ/t²}) ≤ D·L_R + ε` mode by mode.
pub fn sandwich_check(spec: &SandwichSpec) -> Result<SandwichReport> {
    let m = flat_dimension(&spec.space)?;
    if spec.ts.is_empty() || spec.ts.iter().any(|t| !(*t > 0.0)) {
        return Err(WarpError::Precondition("levels must be positive and non-empty".into()));
    }
    if !(spec.r > 0.0 && spec.epsilon_target > 0.0 && spec.r_step > 0.0) {
        return Err(WarpError::Precondition("r, epsilon and the R step must be positive".into()));
    }
    let mf = m as f64;
    let c = 3.0 * (4.0 * PI).powf(mf / 2.0) * (spec.r * spec.r / 4.0).exp();
    let t_min = spec.ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let d_heat = heat_gaussian_ratio(m, t_min);
    let d = d_heat / (4.0 * PI).powf(mf / 2.0);
    let heats: Vec<HeatOperator> = spec
        .ts
        .iter()
        .map(|&t| HeatOperator::new(&spec.space, t, spec.kmax))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut lower_violation = 0.0f64;
    let mut worst = None;
    let mut failing_levels = Vec::new();
    for heat in &heats {
        let mut level_ok = true;
        for mode in &heat.modes {
            let lhs = local_symbol(&spec.space, heat.t, spec.r, mode.norm_sq)?;
            let rhs = c * mode.sigma;
            let slack = 1e-12 * rhs.abs().max(1.0);
            let violation = (lhs - rhs).max(-lhs) - slack;
            if violation > 0.0 {
                level_ok = false;
                if violation > lower_violation {
                    lower_violation = violation;
                    worst = Some(format!("lower inequality at t = {}, k = {:?}", heat.t, mode.k));
                }
            }
            rows.push(SandwichRow {
                side: SandwichSide::Lower,
                t: heat.t,
                k: mode.k.clone(),
                lhs,
                rhs,
                margin: rhs - lhs,
            });
        }
        if !level_ok {
            failing_levels.push(heat.t);
        }
    }
    let t0 = spec
        .ts
        .iter()
        .copied()
        .filter(|&t| failing_levels.iter().all(|&f| f < t))
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));

    let upper_at = |big_r: f64| -> Result<(f64, Option<String>)> {
        let mut worst_violation = 0.0f64;
        let mut worst_mode = None;
        for heat in &heats {
            for mode in &heat.modes {
                let lhs = mode.sigma;
                let rhs = d * local_symbol(&spec.space, heat.t, big_r, mode.norm_sq)? + spec.epsilon_target;
                if lhs - rhs > worst_violation {
                    worst_violation = lhs - rhs;
                    worst_mode = Some(format!("upper inequality at t = {}, k = {:?}, R = {big_r}", heat.t, mode.k));
                }
            }
        }
        Ok((worst_violation, worst_mode))
    };
    let mut big_r = None;
    let mut upper_violation = f64::INFINITY;
    let mut upper_worst = None;
    let steps = (spec.r_cap / spec.r_step).floor() as usize;
    for i in 1..=steps {
        let candidate = i as f64 * spec.r_step;
        let (violation, mode) = match upper_at(candidate) {
            Ok(v) => v,
            Err(_) => break,
        };
        upper_violation = violation;
        upper_worst = mode;
        if violation == 0.0 {
            big_r = Some(candidate);
            break;
        }
    }
    if let Some(big_r) = big_r {
        for heat in &heats {
            for mode in &heat.modes {
                let lhs = mode.sigma;
                let rhs = d * local_symbol(&spec.space, heat.t, big_r, mode.norm_sq)? + spec.epsilon_target;
                rows.push(SandwichRow {
                    side: SandwichSide::Upper,
                    t: heat.t,
                    k: mode.k.clone(),
                    lhs,
                    rhs,
                    margin: rhs - lhs,
                });
            }
        }
    } else if worst.is_none() {
        worst = upper_worst;
    }
    let pass = t0.is_some() && big_r.is_some();
    Ok(SandwichReport {
        spec: spec.clone(),
        c,
        d_heat,
        d,
        big_r,
        t0,
        lower_violation,
        upper_violation,
        worst,
        pass,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_operator_structure() {
        let h = HeatOperator::new(&ModelSpace::Circle, 10.0, 20).unwrap();
        assert_eq!(h.modes.len(), 21);
        assert_eq!(h.modes[0].sigma, 0.0);
        assert_eq!(h.modes[0].multiplicity, 1);
        assert!(h.modes[1..].iter().all(|m| m.multiplicity == 2));
        assert!(h.modes.windows(2).all(|w| w[0].sigma <= w[1].sigma));
        assert!(h.modes.iter().all(|m| (0.0..=1.0).contains(&m.sigma)));
        assert!(h.modes[..10].iter().all(|m| m.sigma < 1.0));
        let coarse = HeatOperator::new(&ModelSpace::Circle, 5.0, 20).unwrap();
        assert!(h.modes.iter().zip(&coarse.modes).all(|(a, b)| a.sigma <= b.sigma));

        let t2 = HeatOperator::new(&ModelSpace::FlatTorus { dim: 2 }, 10.0, 3).unwrap();
        let total: usize = t2.modes.iter().map(|m| m.multiplicity).sum();
        assert_eq!(total, 49);
        let five = t2.modes.iter().find(|m| m.norm_sq == 5).unwrap();
        assert_eq!((five.k.clone(), five.multiplicity), (vec![2, 1], 8));
        assert!(HeatOperator::new(&ModelSpace::SO3, 10.0, 3).is_err());
    }

    #[test]
    fn bessel_matches_series() {
        // Power series, fine for small arguments.
        let series = |x: f64| {
            let mut term = x / 2.0;
            let mut sum = term;
            for j in 1..40 {
                term *= -(x * x / 4.0) / (j as f64 * (j + 1) as f64);
                sum += term;
            }
            sum
        };
        for x in [0.0, 0.3, 1.0, 2.5, 7.0] {
            assert!((bessel_j(1, x) - series(x)).abs() < 1e-13, "x = {x}");
        }
        // First zero of J_1.
        assert!(bessel_j(1, 3.831_705_970_207_512).abs() < 1e-12);
        assert!(bessel_j(1, 600.0).abs() < 0.04);
    }

    #[test]
    fn circle_local_symbol_matches_quadrature() {
        let (t, r) = (10.0, 1.0);
        for k in [1u64, 3, 17] {
            let n = 20_000;
            let rho = r / t;
            let h = 2.0 * rho / n as f64;
            let quad: f64 = (0..n)
                .map(|i| {
                    let y = -rho + (i as f64 + 0.5) * h;
                    1.0 - (2.0 * PI * k as f64 * y).cos()
                })
                .sum::<f64>()
                * h
                * t;
            let exact = local_symbol(&ModelSpace::Circle, t, r, k * k).unwrap();
            assert!((quad - exact).abs() < 1e-8, "k = {k}: {quad} vs {exact}");
        }
        // Low-mode Taylor value (4π²k²/t²)·r³/3.
        let low = local_symbol(&ModelSpace::Circle, 20.0, 1.0, 1).unwrap();
        let taylor = 4.0 * PI * PI / 400.0 / 3.0;
        assert!((low - taylor).abs() < 1e-2 * taylor);
        assert_eq!(local_symbol(&ModelSpace::Circle, 10.0, 7.0, 4).unwrap(), 10.0);
    }

    #[test]
    fn torus_local_symbol_matches_quadrature() {
        let (t, r) = (10.0, 2.0);
        let rho = r / t;
        let n = 800;
        let h = 2.0 * rho / n as f64;
        for k in [(1i64, 0i64), (2, 1), (3, 3)] {
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let y = (-rho + (i as f64 + 0.5) * h, -rho + (j as f64 + 0.5) * h);
                    if y.0 * y.0 + y.1 * y.1 < rho * rho {
                        quad += 1.0 - (2.0 * PI * (k.0 as f64 * y.0 + k.1 as f64 * y.1)).cos();
                    }
                }
            }
            quad *= h * h * t * t;
            let norm_sq = (k.0 * k.0 + k.1 * k.1) as u64;
            let exact = local_symbol(&ModelSpace::FlatTorus { dim: 2 }, t, r, norm_sq).unwrap();
            assert!((quad - exact).abs() < 2e-3 * exact, "{k:?}: {quad} vs {exact}");
        }
        assert!(local_symbol(&ModelSpace::FlatTorus { dim: 2 }, 2.0, 1.5, 1).is_err());
    }

    #[test]
    fn antipodal_heat_ratio_is_two() {
        assert!((heat_gaussian_ratio(1, 10.0) - 2.0).abs() < 1e-9);
        assert!((heat_gaussian_ratio(2, 10.0) - 4.0).abs() < 1e-8);
    }

    #[test]
    fn circle_sandwich_passes_with_frozen_constants() {
        let report = sandwich_check(&SandwichSpec::circle(vec![10.0, 20.0, 40.0], 1.0, 0.01)).unwrap();
        assert!(report.pass, "{:?}", report.worst);
        assert!((report.c - 3.0 * (4.0 * PI).sqrt() * 0.25f64.exp()).abs() < 1e-12);
        assert!((report.c - 13.655).abs() < 1e-3);
        assert_eq!(report.t0, Some(10.0));
        assert_eq!(report.big_r, Some(1.75));
        assert!((report.d - 1.0 / PI.sqrt()).abs() < 1e-9);
        let k0 = report.rows.iter().find(|r| r.k == vec![0]).unwrap();
        assert_eq!((k0.lhs, k0.rhs), (0.0, 0.0));
    }
}
