use serde::{Deserialize, Serialize};

use super::{ActionSpec, GeneratorSet};
use crate::spaces::{wrap_unit, ModelSpace, Point, Quaternion};
use crate::{Result, WarpError};

/// Parameters shared by the catalog families; each family reads the ones it needs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActionParams {
    /// Rotation number for `circle-rotation`.
    pub alpha: Option<f64>,
    /// Translation vector for `torus-translation`.
    pub vector: Option<Vec<f64>>,
    /// Torus dimension for `torus-translation` when no vector is given.
    pub dim: Option<usize>,
    /// Rotation angle for `so3-rational-rotations`.
    pub angle: Option<f64>,
    /// Cantor depth for `odometer`.
    pub depth: Option<u32>,
    /// Space for `trivial`.
    pub space: Option<String>,
    /// Level hint; the odometer uses depth `log2(level)` when no depth is given.
    pub level: Option<f64>,
}

/// Spectral behaviour a family is expected to show across levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapSignature {
    /// Normalized gap bounded away from zero.
    Expander,
    /// Gap decays as the level grows.
    Decaying,
    /// No group motion at all.
    Degenerate,
}

/// A named, parameterized family of actions.
pub trait ActionFamily: Send + Sync {
    fn name(&self) -> &'static str;
    fn summary(&self) -> &'static str;
    fn signature(&self) -> GapSignature;
    fn build(&self, params: &ActionParams) -> Result<ActionSpec>;
}

/// Registry of action families addressed by name.
pub struct ActionCatalog {
    families: Vec<Box<dyn ActionFamily>>,
}

impl ActionCatalog {
    pub fn empty() -> Self {
        Self { families: Vec::new() }
    }

    /// The built-in families: `circle-rotation`, `torus-translation`,
    /// `so3-rational-rotations`, `odometer` and `trivial`.
    pub fn builtin() -> Self {
        let mut c = Self::empty();
        c.register(Box::new(CircleRotation));
        c.register(Box::new(TorusTranslation));
        c.register(Box::new(So3RationalRotations));
        c.register(Box::new(Odometer));
        c.register(Box::new(Trivial));
        c
    }

    /// Adds a family, replacing any family of the same name.
    pub fn register(&mut self, family: Box<dyn ActionFamily>) {
        self.families.retain(|f| f.name() != family.name());
        self.families.push(family);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.families.iter().map(|f| f.name()).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn ActionFamily> {
        self.families
            .iter()
            .find(|f| f.name() == name)
            .map(|f| f.as_ref())
            .ok_or_else(|| WarpError::Unknown {
                kind: "action",
                name: name.into(),
                known: self.names().join(", "),
            })
    }

    pub fn build(&self, name: &str, params: &ActionParams) -> Result<ActionSpec> {
        self.get(name)?.build(params)
    }
}

impl Default for ActionCatalog {
    fn default() -> Self {
        Self::builtin()
    }
}

fn labelled(pairs: Vec<(&str, Point)>) -> (Vec<Point>, Vec<String>) {
    pairs.into_iter().map(|(l, p)| (p, l.to_string())).unzip()
}

struct CircleRotation;

impl ActionFamily for CircleRotation {
    fn name(&self) -> &'static str {
        "circle-rotation"
    }

    fn summary(&self) -> &'static str {
        "rotation of the circle by alpha (default sqrt(2) - 1), S = {e, g, g^-1}"
    }

    fn signature(&self) -> GapSignature {
        GapSignature::Decaying
    }

    fn build(&self, params: &ActionParams) -> Result<ActionSpec> {
        let alpha = params.alpha.unwrap_or(2f64.sqrt() - 1.0);
        if !alpha.is_finite() {
            return Err(WarpError::Domain(format!("alpha must be finite, got {alpha}")));
        }
        let space = ModelSpace::Circle;
        let (elements, labels) = labelled(vec![
            ("e", Point::Circle(0.0)),
            ("g", Point::Circle(wrap_unit(alpha))),
            ("g^-1", Point::Circle(wrap_unit(-alpha))),
        ]);
        Ok(ActionSpec {
            name: format!("circle-rotation({alpha})"),
            space,
            generators: GeneratorSet::new(&space, elements, labels)?,
        })
    }
}

struct TorusTranslation;

const PRIMES: [f64; 8] = [2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0];

impl ActionFamily for TorusTranslation {
    fn name(&self) -> &'static str {
        "torus-translation"
    }

    fn summary(&self) -> &'static str {
        "translation of the flat torus by a vector (default fractional parts of sqrt(p) for primes p), S = {e, g, g^-1}"
    }

    fn signature(&self) -> GapSignature {
        GapSignature::Decaying
    }

    fn build(&self, params: &ActionParams) -> Result<ActionSpec> {
        let v = match (&params.vector, params.dim) {
            (Some(v), _) => v.clone(),
            (None, dim) => {
                let dim = dim.unwrap_or(2);
                if dim == 0 || dim > PRIMES.len() {
                    return Err(WarpError::Domain(format!(
                        "default torus translation exists for dimensions 1..={}",
                        PRIMES.len()
                    )));
                }
                PRIMES[..dim].iter().map(|p| p.sqrt().fract()).collect()
            }
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(WarpError::Domain("translation vector must be non-empty and finite".into()));
        }
        let space = ModelSpace::FlatTorus { dim: v.len() };
        let fwd = Point::Torus(v.iter().map(|x| wrap_unit(*x)).collect());
        let back = Point::Torus(v.iter().map(|x| wrap_unit(-x)).collect());
        let (elements, labels) = labelled(vec![
            ("e", space.identity()),
            ("g", fwd),
            ("g^-1", back),
        ]);
        Ok(ActionSpec {
            name: format!("torus-translation({v:?})"),
            space,
            generators: GeneratorSet::new(&space, elements, labels)?,
        })
    }
}

struct So3RationalRotations;

impl ActionFamily for So3RationalRotations {
    fn name(&self) -> &'static str {
        "so3-rational-rotations"
    }

    fn summary(&self) -> &'static str {
        "rotations of SO(3) by arccos(3/5) about the x and z axes, with inverses and e"
    }

    fn signature(&self) -> GapSignature {
        GapSignature::Expander
    }

    fn build(&self, params: &ActionParams) -> Result<ActionSpec> {
        let theta = params.angle.unwrap_or((3.0f64 / 5.0).acos());
        let space = ModelSpace::SO3;
        let rot = |axis: [f64; 3], a: f64| Point::Rotation(Quaternion::from_axis_angle(axis, a).canonical());
        let (elements, labels) = labelled(vec![
            ("e", space.identity()),
            ("a", rot([1.0, 0.0, 0.0], theta)),
            ("a^-1", rot([1.0, 0.0, 0.0], -theta)),
            ("b", rot([0.0, 0.0, 1.0], theta)),
            ("b^-1", rot([0.0, 0.0, 1.0], -theta)),
        ]);
        Ok(ActionSpec {
            name: "so3-rational-rotations".into(),
            space,
            generators: GeneratorSet::new(&space, elements, labels)?,
        })
    }
}

struct Odometer;

impl ActionFamily for Odometer {
    fn name(&self) -> &'static str {
        "odometer"
    }

    fn summary(&self) -> &'static str {
        "adding machine x -> x + 1 with carry on binary strings of length depth"
    }

    fn signature(&self) -> GapSignature {
        GapSignature::Decaying
    }

    fn build(&self, params: &ActionParams) -> Result<ActionSpec> {
        let depth = match (params.depth, params.level) {
            (Some(d), _) => d,
            (None, Some(t)) if t >= 2.0 => t.log2().round() as u32,
            _ => {
                return Err(WarpError::Domain(
                    "odometer needs a depth or a level t >= 2".into(),
                ))
            }
        };
        let space = ModelSpace::CantorLevel { depth };
        space.validate()?;
        let mask = (1u64 << depth) - 1;
        let (elements, labels) = labelled(vec![
            ("e", Point::Cantor(0)),
            ("+1", Point::Cantor(1 & mask)),
            ("-1", Point::Cantor(mask)),
        ]);
        Ok(ActionSpec {
            name: format!("odometer({depth})"),
            space,
            generators: GeneratorSet::new(&space, elements, labels)?,
        })
    }
}

struct Trivial;

impl ActionFamily for Trivial {
    fn name(&self) -> &'static str {
        "trivial"
    }

    fn summary(&self) -> &'static str {
        "S = {e} on any space (default circle)"
    }

    fn signature(&self) -> GapSignature {
        GapSignature::Degenerate
    }

    fn build(&self, params: &ActionParams) -> Result<ActionSpec> {
        let space: ModelSpace = match &params.space {
            Some(s) => s.parse()?,
            None => ModelSpace::Circle,
        };
        Ok(ActionSpec {
            name: format!("trivial({space})"),
            space,
            generators: GeneratorSet::new(&space, vec![space.identity()], vec!["e".into()])?,
        })
    }
}
