use serde::{Deserialize, Serialize};

use super::net::unit_ball_volume;
use super::{raw_distance, rng_for, sample_point, stream, EpsNet, ModelSpace, Point};
use crate::{Result, WarpError};

const MC_SAMPLES: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiMethod {
    Exact,
    MonteCarlo,
}

/// Scaled ball mass `t^m · μ(B_{r/t}(x))` with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiEstimate {
    pub value: f64,
    /// Zero for exact values.
    pub std_error: f64,
    pub method: PhiMethod,
    /// Set when a closed form exists but the radius is past the injectivity guard.
    pub fallback: bool,
}

impl PhiEstimate {
    fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            method: PhiMethod::Exact,
            fallback: false,
        }
    }
}

/// `φ(x) = t^m · μ(B_{r/t}(x; d))` at the level of `net`.
///
/// Closed forms are used on the circle and flat tori while `r/t < 1/2` and on
/// Cantor levels; everything else is a Monte Carlo estimate over
/// `2·10^5` Haar samples drawn from the net's seed.
pub fn phi_value(space: &ModelSpace, net: &EpsNet, r: f64, x: &Point) -> Result<PhiEstimate> {
    if *space != net.space {
        return Err(WarpError::Domain(format!(
            "net lives on {} but phi was requested on {space}",
            net.space
        )));
    }
    if !(r > 0.0) {
        return Err(WarpError::Precondition(format!("r must be positive, got {r}")));
    }
    let t = net.t;
    let rho = r / t;
    match space {
        ModelSpace::Circle if rho < 0.5 => return Ok(PhiEstimate::exact(2.0 * r)),
        ModelSpace::FlatTorus { dim } if rho < 0.5 => {
            return Ok(PhiEstimate::exact(unit_ball_volume(*dim) * r.powi(*dim as i32)))
        }
        ModelSpace::CantorLevel { depth } => {
            return Ok(PhiEstimate::exact(cantor_ball_mass(*depth, rho)))
        }
        _ => {}
    }
    let fallback = matches!(space, ModelSpace::Circle | ModelSpace::FlatTorus { .. });
    let mut rng = rng_for(net.seed, stream::PHI);
    let hits = (0..MC_SAMPLES)
        .filter(|_| raw_distance(x, &sample_point(space, &mut rng)) < rho)
        .count();
    let p = hits as f64 / MC_SAMPLES as f64;
    let scale = space.scaled_mass(t);
    Ok(PhiEstimate {
        value: scale * p,
        std_error: scale * (p * (1.0 - p) / MC_SAMPLES as f64).sqrt(),
        method: PhiMethod::MonteCarlo,
        fallback,
    })
}

/// Haar mass of the open ultrametric ball of radius `rho` in a depth-`depth` level.
fn cantor_ball_mass(depth: u32, rho: f64) -> f64 {
    // Strings whose first difference is at index k sit at distance 2^-k; there are 2^(depth-k) of them.
    let mut count = 1u64;
    for k in 1..=depth {
        if 0.5f64.powi(k as i32) < rho {
            count += 1u64 << (depth - k);
        }
    }
    count as f64 / (1u64 << depth) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{build_eps_net, haar_sample};

    /// `t^3 · μ(ball of angle θ)` from the Haar angle density `(1 - cos ω)/π` by Simpson's rule.
    fn so3_ball_oracle(t: f64, theta: f64) -> f64 {
        let n = 2000;
        let h = theta / n as f64;
        let f = |w: f64| (1.0 - w.cos()) / std::f64::consts::PI;
        let mut s = f(0.0) + f(theta);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        t.powi(3) * s * h / 3.0
    }

    #[test]
    fn circle_phi_is_interval_length_everywhere() {
        let net = build_eps_net(&ModelSpace::Circle, 10.0, 1.0, 0).unwrap();
        for x in haar_sample(&ModelSpace::Circle, 1, 5) {
            let phi = phi_value(&ModelSpace::Circle, &net, 1.0, &x).unwrap();
            assert_eq!(phi.value, 2.0);
            assert_eq!(phi.method, PhiMethod::Exact);
        }
    }

    #[test]
    fn torus_phi_is_disc_area() {
        let s = ModelSpace::FlatTorus { dim: 2 };
        let net = build_eps_net(&s, 10.0, 2.0, 0).unwrap();
        let phi = phi_value(&s, &net, 1.0, &s.identity()).unwrap();
        assert!((phi.value - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn large_radius_falls_back_and_flags() {
        let net = build_eps_net(&ModelSpace::Circle, 1.0, 0.5, 0).unwrap();
        let phi = phi_value(&ModelSpace::Circle, &net, 0.8, &Point::Circle(0.3)).unwrap();
        assert!(phi.fallback);
        assert_eq!(phi.method, PhiMethod::MonteCarlo);
        assert!((phi.value - 1.0).abs() < 1e-12, "whole circle inside the ball");
    }

    #[test]
    fn so3_phi_matches_quadrature_oracle() {
        let (t, r) = (8.0, 1.0);
        let net = build_eps_net(&ModelSpace::SO3, t, 2.0, 3).unwrap();
        let oracle = so3_ball_oracle(t, r / t);
        // Closed form of the same integral.
        let theta = r / t;
        let closed = t.powi(3) * (theta - theta.sin()) / std::f64::consts::PI;
        assert!((oracle - closed).abs() < 1e-10);
        for x in haar_sample(&ModelSpace::SO3, 8, 3) {
            let phi = phi_value(&ModelSpace::SO3, &net, r, &x).unwrap();
            assert!(
                (phi.value - oracle).abs() <= 3.0 * phi.std_error,
                "{} vs {oracle} (se {})",
                phi.value,
                phi.std_error
            );
        }
    }

    #[test]
    fn cantor_ball_masses() {
        let s = ModelSpace::CantorLevel { depth: 4 };
        let net = build_eps_net(&s, 1.0, 0.1, 0).unwrap();
        let at = |r: f64| phi_value(&s, &net, r, &Point::Cantor(5)).unwrap().value;
        assert_eq!(at(0.01), 1.0 / 16.0);
        assert_eq!(at(0.1), 2.0 / 16.0);
        assert_eq!(at(0.3), 8.0 / 16.0);
        assert_eq!(at(0.6), 1.0);
    }

    #[test]
    fn bad_inputs() {
        let net = build_eps_net(&ModelSpace::Circle, 10.0, 1.0, 0).unwrap();
        assert!(phi_value(&ModelSpace::Circle, &net, 0.0, &Point::Circle(0.0)).is_err());
        assert!(phi_value(&ModelSpace::SO3, &net, 1.0, &Point::Circle(0.0)).is_err());
    }
}
