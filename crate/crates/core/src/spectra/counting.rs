use std::f64::consts::PI;

use serde::Serialize;

use super::heat::flat_dimension;
use crate::spaces::ModelSpace;
use crate::{Result, WarpError};

/// `#{k ∈ ℤ^m : |k|² ≤ q}` (or `< q` when `strict`).
pub fn lattice_count(m: usize, q: f64, strict: bool) -> u64 {
    if q < 0.0 || (strict && q == 0.0) {
        return 0;
    }
    if m == 0 {
        return 1;
    }
    let mut kmax = q.sqrt().floor() as i64;
    if strict && (kmax * kmax) as f64 >= q {
        kmax -= 1;
    }
    if m == 1 {
        return (2 * kmax + 1) as u64;
    }
    let mut total = lattice_count(m - 1, q, strict);
    for k in 1..=kmax {
        total += 2 * lattice_count(m - 1, q - (k * k) as f64, strict);
    }
    total
}

/// Eigenvalues `4π²|k|²` of the flat Laplacian at most `big_r`, with multiplicity.
pub fn eigenvalue_count(space: &ModelSpace, big_r: f64) -> Result<u64> {
    let m = flat_dimension(space)?;
    Ok(lattice_count(m, big_r / (4.0 * PI * PI), false))
}

/// Weyl constant `ω_m/(2π)^m` for unit volume.
pub fn weyl_constant(m: usize) -> f64 {
    crate::spaces::unit_ball_volume(m) / (2.0 * PI).powi(m as i32)
}

#[derive(Debug, Clone, Serialize)]
pub struct WeylReport {
    pub space: ModelSpace,
    pub grid: Vec<f64>,
    pub counts: Vec<u64>,
    /// Least-squares `C` in `N(R) ≈ C·R^{m/2}` over the upper half of the grid.
    pub fit: f64,
    pub exponent: f64,
    /// Closed-form Weyl constant.
    pub expected: f64,
    pub relative_error: f64,
}

/// Exact counts on a geometric grid of `points` values from `4π²` to `r_max`.
pub fn weyl_counting(space: &ModelSpace, r_max: f64, points: usize) -> Result<WeylReport> {
    let m = flat_dimension(space)?;
    let r_min = 4.0 * PI * PI;
    if !(r_max > r_min) || points < 2 {
        return Err(WarpError::Precondition(format!(
            "need r_max > 4π² and at least two grid points, got {r_max} and {points}"
        )));
    }
    let ratio = (r_max / r_min).powf(1.0 / (points - 1) as f64);
    let grid: Vec<f64> = (0..points)
        .map(|i| if i + 1 == points { r_max } else { r_min * ratio.powi(i as i32) })
        .collect();
    let counts = grid
        .iter()
        .map(|&r| eigenvalue_count(space, r))
        .collect::<Result<Vec<_>>>()?;
    let exponent = m as f64 / 2.0;
    let (num, den) = grid[points / 2..]
        .iter()
        .zip(&counts[points / 2..])
        .fold((0.0, 0.0), |(a, b), (&r, &n)| {
            let x = r.powf(exponent);
            (a + n as f64 * x, b + x * x)
        });
    let fit = num / den;
    let expected = weyl_constant(m);
    Ok(WeylReport {
        space: *space,
        grid,
        counts,
        fit,
        exponent,
        expected,
        relative_error: (fit - expected).abs() / expected,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AccumulationReport {
    pub space: ModelSpace,
    pub epsilon: f64,
    /// Upper end of the window `[ε, factor·ε]`.
    pub upper: f64,
    pub levels: Vec<f64>,
    /// `#{j : λ_j/t² ∈ [ε, factor·ε]}` per level, with multiplicity.
    pub counts: Vec<u64>,
    /// Least tested `t` with a non-empty window at it and every larger tested level.
    pub threshold: Option<f64>,
    /// On the circle, `2π/(√(factor·ε) − √ε)`: beyond it the window holds a whole frequency interval of length one.
    pub derived_threshold: Option<f64>,
}

/// Counts rescaled Laplace eigenvalues in `[ε, factor·ε]` at each level.
pub fn accumulation_scan(space: &ModelSpace, levels: &[f64], epsilon: f64, factor: f64) -> Result<AccumulationReport> {
    let m = flat_dimension(space)?;
    if !(epsilon > 0.0) {
        return Err(WarpError::Precondition(format!(
            "the window [ε, {factor}ε] must stay away from 0, got ε = {epsilon}"
        )));
    }
    if !(factor > 1.0) {
        return Err(WarpError::Precondition(format!("window factor must exceed 1, got {factor}")));
    }
    if levels.iter().any(|t| !(*t > 0.0)) {
        return Err(WarpError::Precondition("levels must be positive".into()));
    }
    let upper = factor * epsilon;
    let scale = 4.0 * PI * PI;
    let counts: Vec<u64> = levels
        .iter()
        .map(|&t| {
            let t2 = t * t;
            lattice_count(m, upper * t2 / scale, false) - lattice_count(m, epsilon * t2 / scale, true)
        })
        .collect();
    let threshold = levels
        .iter()
        .zip(&counts)
        .filter(|&(&t, _)| levels.iter().zip(&counts).all(|(&s, &c)| s < t || c > 0))
        .map(|(&t, _)| t)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.min(t))));
    let derived_threshold = (m == 1).then(|| 2.0 * PI / (upper.sqrt() - epsilon.sqrt()));
    Ok(AccumulationReport {
        space: *space,
        epsilon,
        upper,
        levels: levels.to_vec(),
        counts,
        threshold,
        derived_threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force count of `λ = 4π²|k|² ≤ R` over a box of frequencies.
    fn enumerate(m: usize, big_r: f64) -> u64 {
        let kmax = (big_r.sqrt() / (2.0 * PI)).ceil() as i64 + 1;
        let side = (2 * kmax + 1) as usize;
        (0..side.pow(m as u32))
            .filter(|&idx| {
                let mut rest = idx;
                let mut norm = 0i64;
                for _ in 0..m {
                    let c = (rest % side) as i64 - kmax;
                    rest /= side;
                    norm += c * c;
                }
                4.0 * PI * PI * norm as f64 <= big_r
            })
            .count() as u64
    }

    #[test]
    fn counts_match_enumeration() {
        for big_r in [1.0, 39.0, 40.0, 500.0, 12_345.0] {
            assert_eq!(eigenvalue_count(&ModelSpace::Circle, big_r).unwrap(), enumerate(1, big_r));
            let torus = ModelSpace::FlatTorus { dim: 2 };
            assert_eq!(eigenvalue_count(&torus, big_r).unwrap(), enumerate(2, big_r));
        }
        let big_r: f64 = 1e6;
        let circle = 1 + 2 * (big_r.sqrt() / (2.0 * PI)).floor() as u64;
        assert_eq!(eigenvalue_count(&ModelSpace::Circle, big_r).unwrap(), circle);
        assert_eq!(eigenvalue_count(&ModelSpace::Circle, 30.0).unwrap(), 1);
    }

    #[test]
    fn weyl_fits() {
        let circle = weyl_counting(&ModelSpace::Circle, (1000.0 * PI).powi(2), 40).unwrap();
        assert!((circle.fit - 1.0 / PI).abs() < 0.02 / PI);
        assert_eq!(circle.expected, 1.0 / PI);
        let torus = weyl_counting(&ModelSpace::FlatTorus { dim: 2 }, 1e6, 40).unwrap();
        assert!((torus.fit - 1.0 / (4.0 * PI)).abs() < 0.05 / (4.0 * PI));
        assert!((weyl_constant(3) - 1.0 / (6.0 * PI * PI)).abs() < 1e-15);
    }

    #[test]
    fn circle_accumulation_threshold() {
        let levels: Vec<f64> = (5..=200).map(f64::from).collect();
        let report = accumulation_scan(&ModelSpace::Circle, &levels, 0.5, 2.0).unwrap();
        let derived = report.derived_threshold.unwrap();
        assert!((derived - 21.45).abs() < 0.01);
        assert!(report.threshold.unwrap() <= 22.0);
        for (t, c) in levels.iter().zip(&report.counts) {
            if *t >= 22.0 {
                assert!(*c >= 1, "t = {t}");
            }
        }
        assert_eq!(report.counts[5], 0, "t = 10 has an empty window");
        // Independent enumeration of j with λ_j/t² in [ε, 2ε].
        for (&t, &c) in levels.iter().zip(&report.counts) {
            let direct = (-100i64..=100)
                .filter(|j| {
                    let v = 4.0 * PI * PI * (j * j) as f64 / (t * t);
                    (0.5..=1.0).contains(&v)
                })
                .count() as u64;
            assert_eq!(c, direct, "t = {t}");
        }
        assert!(accumulation_scan(&ModelSpace::Circle, &levels, 0.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn wider_window_never_raises_threshold(eps in 0.05f64..2.0, lo in 1u32..40) {
            let levels: Vec<f64> = (lo..lo + 150).map(f64::from).collect();
            let narrow = accumulation_scan(&ModelSpace::Circle, &levels, eps, 2.0).unwrap();
            let wide = accumulation_scan(&ModelSpace::Circle, &levels, eps, 3.0).unwrap();
            if let Some(n) = narrow.threshold {
                prop_assert!(wide.threshold.unwrap() <= n);
            }
            prop_assert!(wide.counts.iter().zip(&narrow.counts).all(|(w, n)| w >= n));
        }
    }
}
