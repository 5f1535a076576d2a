//! Finite symmetric generating sets acting isometrically on the model spaces.
//!
//! Every model space is itself a compact group and all catalog actions are
//! left translations by a finite symmetric set `S ∋ e`.  On Cantor levels the
//! group is `ℤ/2^depth` acting by the odometer (adding with carry).

mod catalog;

pub use catalog::{ActionCatalog, ActionFamily, ActionParams, GapSignature};

use serde::Serialize;

use crate::spaces::{group_inv, group_mul, matches_space, raw_distance, rng_for, sample_point, stream, ModelSpace, Point};
use crate::{Result, WarpError};

/// Tolerance for recognizing the identity and inverse pairs among generators.
const SAME_POINT: f64 = 1e-12;
/// Below this distance two generator images count as coincident.
const FREENESS_FLOOR: f64 = 1e-10;

/// Ordered symmetric generating set with the identity and an inverse map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorSet {
    elements: Vec<Point>,
    labels: Vec<String>,
    inverse: Vec<usize>,
    identity: usize,
}

impl GeneratorSet {
    /// Checks that `elements` contains the identity and is closed under inversion.
    pub fn new(space: &ModelSpace, elements: Vec<Point>, labels: Vec<String>) -> Result<Self> {
        if elements.is_empty() || elements.len() != labels.len() {
            return Err(WarpError::Domain(
                "generator set needs matching, non-empty element and label lists".into(),
            ));
        }
        let find = |target: &Point| {
            elements
                .iter()
                .position(|g| raw_distance(g, target) <= SAME_POINT)
        };
        let identity = find(&space.identity())
            .ok_or_else(|| WarpError::Domain("generator set must contain the identity".into()))?;
        let inverse = elements
            .iter()
            .zip(&labels)
            .map(|(g, label)| {
                find(&group_inv(space, g)).ok_or_else(|| {
                    WarpError::Domain(format!("generator '{label}' has no inverse in the set"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            elements,
            labels,
            inverse,
            identity,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[Point] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, s: usize) -> &str {
        &self.labels[s]
    }

    pub fn identity_index(&self) -> usize {
        self.identity
    }

    pub fn contains_identity(&self) -> bool {
        true
    }

    /// Index of `s⁻¹`.
    pub fn inverse_of(&self, s: usize) -> usize {
        self.inverse[s]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| WarpError::Unknown {
            kind: "generator",
            name: label.into(),
            known: self.labels.join(", "),
        })
    }
}

/// A named isometric action of a finite symmetric set on a model space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionSpec {
    pub name: String,
    pub space: ModelSpace,
    pub generators: GeneratorSet,
}

impl ActionSpec {
    /// `|S|`, counting the identity.
    pub fn size(&self) -> usize {
        self.generators.len()
    }

    pub fn generator(&self, s: usize) -> Result<&Point> {
        self.generators.elements.get(s).ok_or_else(|| {
            WarpError::Domain(format!(
                "generator index {s} is not in S (|S| = {})",
                self.generators.len()
            ))
        })
    }
}

/// Image `s·x` of `x` under generator index `s`.
pub fn apply(action: &ActionSpec, s: usize, x: &Point) -> Result<Point> {
    let g = action.generator(s)?;
    if !matches_space(&action.space, x) {
        return Err(WarpError::Domain(format!("{x:?} is not a point of {}", action.space)));
    }
    Ok(group_mul(&action.space, g, x))
}

/// Like [`apply`] but addressing the generator by label.
pub fn apply_label(action: &ActionSpec, label: &str, x: &Point) -> Result<Point> {
    apply(action, action.generators.index_of(label)?, x)
}

/// Number of non-identity letters in a word over `S`.
pub fn word_length(action: &ActionSpec, word: &[usize]) -> Result<usize> {
    let mut n = 0;
    for &s in word {
        action.generator(s)?;
        if s != action.generators.identity {
            n += 1;
        }
    }
    Ok(n)
}

/// Admissible radius `r̂ = 0.99 · ½ · min d(s·x, s'·x)` over sampled `x` and distinct `s, s'`.
///
/// The radius is in units of the unscaled metric; at level `t` the scaled
/// radius `r` is admissible when `r/t ≤ r̂`.  Returns `+∞` when `S = {e}`.
pub fn max_free_radius(action: &ActionSpec, samples: usize, seed: u64) -> Result<f64> {
    let n = action.size();
    if n <= 1 {
        return Ok(f64::INFINITY);
    }
    let space = &action.space;
    let mut rng = rng_for(seed, stream::FREE_RADIUS);
    let gens = action.generators.elements();
    let mut best = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let x = sample_point(space, &mut rng);
        let images: Vec<Point> = gens.iter().map(|g| group_mul(space, g, &x)).collect();
        for i in 0..n {
            for j in 0..i {
                let d = raw_distance(&images[i], &images[j]);
                if d < FREENESS_FLOOR {
                    return Err(WarpError::NotFree {
                        first: action.generators.label(i).into(),
                        second: action.generators.label(j).into(),
                        distance: d,
                    });
                }
                best = best.min(d);
            }
        }
    }
    Ok(0.99 * 0.5 * best)
}
