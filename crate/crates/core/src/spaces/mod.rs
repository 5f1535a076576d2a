//! Compact model spaces with their normalized invariant measures.
//!
//! Every space carries total mass 1.  The circle has circumference 1, the flat
//! torus is `[0,1)^m` with the quotient Euclidean metric, `SO(3)` uses the
//! rotation angle of `a⁻¹b` (diameter π), and a Cantor level of depth `n` is the
//! set of binary strings of length `n` with the ultrametric
//! `d(a, b) = 2^-(first differing index)` (indices start at 1).

mod index;
mod net;
mod phi;
mod quaternion;

pub use index::NeighborIndex;
pub(crate) use net::unit_ball_volume;
pub use net::{arithmetic_net, build_eps_net, build_net, EpsNet, NetConstruction, NetStrategy};
pub use phi::{phi_value, PhiEstimate, PhiMethod};
pub use quaternion::Quaternion;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Result, WarpError};

/// Random streams used for the independent sampling tasks of one seed.
pub(crate) mod stream {
    pub const POOL: u64 = 0;
    pub const PROBES: u64 = 1;
    pub const PHI: u64 = 2;
    pub const FREE_RADIUS: u64 = 3;
}

/// Deterministic generator for `(seed, stream)`.
pub(crate) fn rng_for(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpace {
    Circle,
    FlatTorus { dim: usize },
    #[serde(rename = "so3")]
    SO3,
    CantorLevel { depth: u32 },
}

impl ModelSpace {
    pub fn dimension(&self) -> usize {
        match self {
            ModelSpace::Circle => 1,
            ModelSpace::FlatTorus { dim } => *dim,
            ModelSpace::SO3 => 3,
            ModelSpace::CantorLevel { .. } => 0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        1.0
    }

    /// Mass of the level set at scale `t`: `t^m · μ(M)`.
    pub fn scaled_mass(&self, t: f64) -> f64 {
        t.powi(self.dimension() as i32) * self.total_mass()
    }

    pub fn diameter(&self) -> f64 {
        match self {
            ModelSpace::Circle => 0.5,
            ModelSpace::FlatTorus { dim } => 0.5 * (*dim as f64).sqrt(),
            ModelSpace::SO3 => std::f64::consts::PI,
            ModelSpace::CantorLevel { depth } => {
                if *depth == 0 {
                    0.0
                } else {
                    0.5
                }
            }
        }
    }

    /// True for spaces that are themselves groups acting on themselves by left translation.
    pub fn is_group(&self) -> bool {
        true
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpace::FlatTorus { dim } if *dim == 0 => {
                Err(WarpError::Domain("flat torus needs dim >= 1".into()))
            }
            ModelSpace::CantorLevel { depth } if *depth == 0 || *depth > 62 => Err(
                WarpError::Domain(format!("cantor depth must lie in 1..=62, got {depth}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn identity(&self) -> Point {
        match self {
            ModelSpace::Circle => Point::Circle(0.0),
            ModelSpace::FlatTorus { dim } => Point::Torus(vec![0.0; *dim]),
            ModelSpace::SO3 => Point::Rotation(Quaternion::IDENTITY),
            ModelSpace::CantorLevel { .. } => Point::Cantor(0),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        match (self, p) {
            (ModelSpace::Circle, Point::Circle(x)) => (0.0..1.0).contains(x),
            (ModelSpace::FlatTorus { dim }, Point::Torus(v)) => {
                v.len() == *dim && v.iter().all(|x| (0.0..1.0).contains(x))
            }
            (ModelSpace::SO3, Point::Rotation(q)) => (q.norm() - 1.0).abs() <= 1e-12,
            (ModelSpace::CantorLevel { depth }, Point::Cantor(bits)) => {
                *depth >= 64 || bits >> depth == 0
            }
            _ => false,
        }
    }

    /// All points of a finite space, in index order.
    pub fn finite_points(&self) -> Option<Vec<Point>> {
        match self {
            ModelSpace::CantorLevel { depth } => {
                Some((0..(1u64 << depth)).map(Point::Cantor).collect())
            }
            _ => None,
        }
    }
}

impl fmt::Display for ModelSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpace::Circle => write!(f, "circle"),
            ModelSpace::FlatTorus { dim } => write!(f, "torus{dim}"),
            ModelSpace::SO3 => write!(f, "so3"),
            ModelSpace::CantorLevel { depth } => write!(f, "cantor{depth}"),
        }
    }
}

impl FromStr for ModelSpace {
    type Err = WarpError;

    /// Parses `circle`, `torus<m>`, `so3`, `cantor<depth>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let space = if s == "circle" {
            ModelSpace::Circle
        } else if s == "so3" {
            ModelSpace::SO3
        } else if let Some(rest) = s.strip_prefix("torus") {
            let dim = if rest.is_empty() { 2 } else { parse_suffix(rest, &s)? as usize };
            ModelSpace::FlatTorus { dim }
        } else if let Some(rest) = s.strip_prefix("cantor") {
            ModelSpace::CantorLevel {
                depth: parse_suffix(rest, &s)? as u32,
            }
        } else {
            return Err(WarpError::Unknown {
                kind: "space",
                name: s,
                known: "circle, torus<m>, so3, cantor<depth>".into(),
            });
        };
        space.validate()?;
        Ok(space)
    }
}

fn parse_suffix(rest: &str, whole: &str) -> Result<u64> {
    rest.trim_start_matches(['(', '-', '_'])
        .trim_end_matches(')')
        .parse()
        .map_err(|_| WarpError::Parse(format!("bad space name '{whole}'")))
}

/// A point of one of the model spaces.
///
/// Cantor strings are packed little-endian: bit `i` holds the digit at index `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Point {
    Circle(f64),
    Torus(Vec<f64>),
    Rotation(Quaternion),
    Cantor(u64),
}

impl Point {
    /// Digits of a Cantor point as a `0`/`1` string of the given length.
    pub fn cantor_string(bits: u64, depth: u32) -> String {
        (0..depth)
            .map(|i| if bits >> i & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    pub fn parse_cantor(s: &str) -> Result<Point> {
        let mut bits = 0u64;
        for (i, c) in s.chars().enumerate() {
            match c {
                '0' => {}
                '1' => bits |= 1 << i,
                _ => return Err(WarpError::Parse(format!("not a binary string: '{s}'"))),
            }
        }
        Ok(Point::Cantor(bits))
    }

    /// Coordinates written to net files (quaternions as 4-vectors, Cantor strings as digit lists).
    pub fn coordinates(&self, space: &ModelSpace) -> Vec<f64> {
        match (self, space) {
            (Point::Circle(x), _) => vec![*x],
            (Point::Torus(v), _) => v.clone(),
            (Point::Rotation(q), _) => q.as_array().to_vec(),
            (Point::Cantor(bits), ModelSpace::CantorLevel { depth }) => {
                (0..*depth).map(|i| (bits >> i & 1) as f64).collect()
            }
            (Point::Cantor(bits), _) => vec![*bits as f64],
        }
    }

    pub fn from_coordinates(space: &ModelSpace, c: &[f64]) -> Result<Point> {
        let bad = || WarpError::Parse(format!("{} coordinates do not fit {space}", c.len()));
        let p = match space {
            ModelSpace::Circle if c.len() == 1 => Point::Circle(c[0]),
            ModelSpace::FlatTorus { dim } if c.len() == *dim => Point::Torus(c.to_vec()),
            ModelSpace::SO3 if c.len() == 4 => {
                Point::Rotation(Quaternion::new(c[0], c[1], c[2], c[3]))
            }
            ModelSpace::CantorLevel { depth } if c.len() == *depth as usize => {
                let mut bits = 0u64;
                for (i, d) in c.iter().enumerate() {
                    if *d == 1.0 {
                        bits |= 1 << i;
                    } else if *d != 0.0 {
                        return Err(bad());
                    }
                }
                Point::Cantor(bits)
            }
            _ => return Err(bad()),
        };
        Ok(p)
    }
}

/// Reduce a real number into `[0, 1)`.
pub(crate) fn wrap_unit(x: f64) -> f64 {
    let r = x.rem_euclid(1.0);
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Geodesic distance on `space`.
pub fn distance(space: &ModelSpace, a: &Point, b: &Point) -> Result<f64> {
    if !matches_space(space, a) || !matches_space(space, b) {
        return Err(WarpError::Domain(format!(
            "points {a:?} and {b:?} are not both in {space}"
        )));
    }
    Ok(raw_distance(a, b))
}

pub(crate) fn matches_space(space: &ModelSpace, p: &Point) -> bool {
    match (space, p) {
        (ModelSpace::Circle, Point::Circle(_))
        | (ModelSpace::SO3, Point::Rotation(_))
        | (ModelSpace::CantorLevel { .. }, Point::Cantor(_)) => true,
        (ModelSpace::FlatTorus { dim }, Point::Torus(v)) => v.len() == *dim,
        _ => false,
    }
}

#[inline]
fn circle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).abs();
    d.min(1.0 - d)
}

/// Distance without the space check; mismatched variants give NaN.
#[inline]
pub(crate) fn raw_distance(a: &Point, b: &Point) -> f64 {
    match (a, b) {
        (Point::Circle(x), Point::Circle(y)) => circle_gap(*x, *y),
        (Point::Torus(x), Point::Torus(y)) if x.len() == y.len() => x
            .iter()
            .zip(y)
            .map(|(u, v)| {
                let g = circle_gap(*u, *v);
                g * g
            })
            .sum::<f64>()
            .sqrt(),
        (Point::Rotation(p), Point::Rotation(q)) => p.angle_to(q),
        (Point::Cantor(x), Point::Cantor(y)) => {
            let diff = x ^ y;
            if diff == 0 {
                0.0
            } else {
                0.5f64.powi(diff.trailing_zeros() as i32 + 1)
            }
        }
        _ => f64::NAN,
    }
}

pub(crate) fn sample_point<R: Rng>(space: &ModelSpace, rng: &mut R) -> Point {
    match space {
        ModelSpace::Circle => Point::Circle(rng.gen::<f64>()),
        ModelSpace::FlatTorus { dim } => Point::Torus((0..*dim).map(|_| rng.gen::<f64>()).collect()),
        ModelSpace::SO3 => {
            // Shoemake's subgroup algorithm.
            let (u1, u2, u3): (f64, f64, f64) = (rng.gen(), rng.gen(), rng.gen());
            let tau = std::f64::consts::TAU;
            let (a, b) = ((1.0 - u1).sqrt(), u1.sqrt());
            let q = Quaternion::new(
                b * (tau * u3).cos(),
                a * (tau * u2).sin(),
                a * (tau * u2).cos(),
                b * (tau * u3).sin(),
            );
            Point::Rotation(q.canonical())
        }
        ModelSpace::CantorLevel { depth } => {
            let mask = if *depth >= 64 { u64::MAX } else { (1u64 << depth) - 1 };
            Point::Cantor(rng.gen::<u64>() & mask)
        }
    }
}

pub(crate) fn sample_with<R: Rng>(space: &ModelSpace, rng: &mut R, n: usize) -> Vec<Point> {
    (0..n).map(|_| sample_point(space, rng)).collect()
}

/// `n` i.i.d. samples of the normalized invariant measure, deterministic in `seed`.
pub fn haar_sample(space: &ModelSpace, seed: u64, n: usize) -> Vec<Point> {
    sample_with(space, &mut rng_for(seed, stream::POOL), n)
}

/// Left translation `g·x` of group-valued points.
pub(crate) fn group_mul(space: &ModelSpace, g: &Point, x: &Point) -> Point {
    match (g, x) {
        (Point::Circle(a), Point::Circle(b)) => Point::Circle(wrap_unit(a + b)),
        (Point::Torus(a), Point::Torus(b)) => {
            Point::Torus(a.iter().zip(b).map(|(u, v)| wrap_unit(u + v)).collect())
        }
        (Point::Rotation(p), Point::Rotation(q)) => Point::Rotation(p.mul(q).normalize().canonical()),
        (Point::Cantor(a), Point::Cantor(b)) => {
            let depth = match space {
                ModelSpace::CantorLevel { depth } => *depth,
                _ => 64,
            };
            let mask = if depth >= 64 { u64::MAX } else { (1u64 << depth) - 1 };
            // Digits are little-endian, so group addition is integer addition mod 2^depth.
            Point::Cantor(a.wrapping_add(*b) & mask)
        }
        _ => panic!("group_mul on mismatched points"),
    }
}

pub(crate) fn group_inv(space: &ModelSpace, g: &Point) -> Point {
    match g {
        Point::Circle(a) => Point::Circle(wrap_unit(-a)),
        Point::Torus(a) => Point::Torus(a.iter().map(|u| wrap_unit(-u)).collect()),
        Point::Rotation(q) => Point::Rotation(q.conjugate().canonical()),
        Point::Cantor(a) => {
            let depth = match space {
                ModelSpace::CantorLevel { depth } => *depth,
                _ => 64,
            };
            let mask = if depth >= 64 { u64::MAX } else { (1u64 << depth) - 1 };
            Point::Cantor(a.wrapping_neg() & mask)
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_spaces() -> Vec<ModelSpace> {
        vec![
            ModelSpace::Circle,
            ModelSpace::FlatTorus { dim: 2 },
            ModelSpace::FlatTorus { dim: 3 },
            ModelSpace::SO3,
            ModelSpace::CantorLevel { depth: 6 },
        ]
    }

    #[test]
    fn circle_distance_wraps() {
        let d = distance(&ModelSpace::Circle, &Point::Circle(0.1), &Point::Circle(0.9)).unwrap();
        assert!((d - 0.2).abs() < 1e-15);
    }

    #[test]
    fn distance_vanishes_on_diagonal() {
        for space in all_spaces() {
            for p in haar_sample(&space, 3, 20) {
                assert_eq!(distance(&space, &p, &p).unwrap(), 0.0, "{space}");
            }
        }
    }

    #[test]
    fn so3_distance_is_rotation_angle() {
        let theta = (3.0f64 / 5.0).acos();
        let b = Point::Rotation(Quaternion::from_axis_angle([0.0, 0.0, 1.0], theta));
        let d = distance(&ModelSpace::SO3, &ModelSpace::SO3.identity(), &b).unwrap();
        assert!((d - 0.927_295_218_001_612_2).abs() < 1e-12);
        // Independent route: trace of the rotation matrix.
        let Point::Rotation(q) = b else { unreachable!() };
        let m = q.rotation_matrix();
        let trace_angle = ((m[0][0] + m[1][1] + m[2][2] - 1.0) / 2.0).acos();
        assert!((d - trace_angle).abs() < 1e-12);
    }

    #[test]
    fn cantor_distance_uses_first_differing_index() {
        let s = ModelSpace::CantorLevel { depth: 4 };
        let a = Point::parse_cantor("0110").unwrap();
        let b = Point::parse_cantor("0100").unwrap();
        assert_eq!(distance(&s, &a, &b).unwrap(), 0.125);
        let c = Point::parse_cantor("1110").unwrap();
        assert_eq!(distance(&s, &a, &c).unwrap(), 0.5);
    }

    #[test]
    fn mismatched_points_are_a_domain_error() {
        let err = distance(&ModelSpace::Circle, &Point::Circle(0.1), &Point::Cantor(1));
        assert!(matches!(err, Err(WarpError::Domain(_))));
        let err = distance(
            &ModelSpace::FlatTorus { dim: 2 },
            &Point::Torus(vec![0.1]),
            &Point::Torus(vec![0.2]),
        );
        assert!(err.is_err());
    }

    #[test]
    fn metric_axioms_on_random_triples() {
        for space in all_spaces() {
            let pts = haar_sample(&space, 11, 3000);
            for tri in pts.chunks(3) {
                let (a, b, c) = (&tri[0], &tri[1], &tri[2]);
                let ab = distance(&space, a, b).unwrap();
                let ba = distance(&space, b, a).unwrap();
                let bc = distance(&space, b, c).unwrap();
                let ac = distance(&space, a, c).unwrap();
                assert_eq!(ab, ba, "{space}");
                assert!(ab + bc - ac >= -1e-12, "{space}: triangle {ab} {bc} {ac}");
                assert!(ab <= space.diameter() + 1e-12);
            }
        }
    }

    #[test]
    fn circle_haar_mean() {
        let pts = haar_sample(&ModelSpace::Circle, 5, 100_000);
        let mean: f64 = pts
            .iter()
            .map(|p| match p {
                Point::Circle(x) => *x,
                _ => unreachable!(),
            })
            .sum::<f64>()
            / pts.len() as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn so3_haar_trace_mean_vanishes() {
        // The character of the standard representation integrates to zero.
        let pts = haar_sample(&ModelSpace::SO3, 5, 100_000);
        let mean: f64 = pts
            .iter()
            .map(|p| match p {
                Point::Rotation(q) => {
                    let m = q.rotation_matrix();
                    m[0][0] + m[1][1] + m[2][2]
                }
                _ => unreachable!(),
            })
            .sum::<f64>()
            / pts.len() as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn cantor_haar_is_uniform() {
        let pts = haar_sample(&ModelSpace::CantorLevel { depth: 3 }, 9, 8000);
        let mut counts = [0usize; 8];
        for p in &pts {
            if let Point::Cantor(b) = p {
                counts[*b as usize] += 1;
            }
        }
        for c in counts {
            assert!((c as f64 / 8000.0 - 0.125).abs() < 0.02);
        }
    }

    #[test]
    fn so3_haar_is_left_invariant_in_distribution() {
        // Two-sample comparison of angle-to-identity before and after translation.
        let space = ModelSpace::SO3;
        let g = Point::Rotation(Quaternion::from_axis_angle([1.0, 0.0, 0.0], 0.9273));
        let e = space.identity();
        let mut a: Vec<f64> = haar_sample(&space, 21, 10_000)
            .iter()
            .map(|p| raw_distance(&e, p))
            .collect();
        let mut b: Vec<f64> = haar_sample(&space, 22, 10_000)
            .iter()
            .map(|p| raw_distance(&e, &group_mul(&space, &g, p)))
            .collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        let ks = ks_statistic(&a, &b);
        // 1% critical value for n = m = 10^4.
        assert!(ks < 1.63 * (2.0f64 / 10_000.0).sqrt(), "{ks}");
    }

    pub(crate) fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
        let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
        while i < a.len() && j < b.len() {
            // Step past every copy of the next value so ties do not open spurious gaps.
            let v = a[i].min(b[j]);
            while i < a.len() && a[i] <= v {
                i += 1;
            }
            while j < b.len() && b[j] <= v {
                j += 1;
            }
            worst = worst.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
        }
        worst
    }

    #[test]
    fn space_names_round_trip() {
        for space in all_spaces() {
            assert_eq!(space.to_string().parse::<ModelSpace>().unwrap(), space);
        }
        assert!("klein".parse::<ModelSpace>().is_err());
    }

    proptest! {
        #[test]
        fn torus_distance_symmetric_and_translation_invariant(
            a in proptest::collection::vec(0.0f64..1.0, 2),
            b in proptest::collection::vec(0.0f64..1.0, 2),
            g in proptest::collection::vec(0.0f64..1.0, 2),
        ) {
            let s = ModelSpace::FlatTorus { dim: 2 };
            let (pa, pb, pg) = (Point::Torus(a), Point::Torus(b), Point::Torus(g));
            let d = raw_distance(&pa, &pb);
            prop_assert_eq!(d, raw_distance(&pb, &pa));
            let moved = raw_distance(&group_mul(&s, &pg, &pa), &group_mul(&s, &pg, &pb));
            prop_assert!((moved - d).abs() < 1e-12);
        }
    }
}
