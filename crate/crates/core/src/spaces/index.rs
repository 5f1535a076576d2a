use std::collections::HashMap;

use super::{raw_distance, ModelSpace, Point};

type CellKey = [i32; 4];

#[derive(Debug, Clone)]
enum Grid {
    /// Periodic unit cube with `cells` cells per axis (circle, low-dimensional tori).
    Periodic { axes: usize, cells: i32 },
    /// Canonical unit quaternions bucketed in `[-1, 1]^4` by chordal distance.
    Chordal { side: f64 },
    /// No bucketing; every query scans all points.
    Flat,
}

/// Bucketed point set answering fixed-radius and nearest-point queries.
///
/// Queries with radius at most the build radius only visit neighboring cells;
/// anything larger falls back to a full scan.
#[derive(Debug, Clone)]
pub struct NeighborIndex {
    points: Vec<Point>,
    radius: f64,
    grid: Grid,
    buckets: HashMap<CellKey, Vec<u32>>,
}

impl NeighborIndex {
    /// Empty index tuned for queries of (unscaled) radius `radius`.
    pub fn new(space: &ModelSpace, radius: f64) -> Self {
        let grid = match space {
            ModelSpace::Circle => periodic(1, radius),
            ModelSpace::FlatTorus { dim } if *dim <= 4 => periodic(*dim, radius),
            ModelSpace::SO3 => {
                // |q - q'| = 2 sin(ω/4) for the closer sign choice.
                let side = (2.0 * (radius.min(std::f64::consts::PI) / 4.0).sin()).max(1e-4);
                if side >= 0.5 {
                    Grid::Flat
                } else {
                    Grid::Chordal {
                        side: side * (1.0 + 1e-9),
                    }
                }
            }
            _ => Grid::Flat,
        };
        Self {
            points: Vec::new(),
            radius,
            grid,
            buckets: HashMap::new(),
        }
    }

    pub fn from_points(space: &ModelSpace, radius: f64, points: &[Point]) -> Self {
        let mut index = Self::new(space, radius);
        for p in points {
            index.insert(p.clone());
        }
        index
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn insert(&mut self, p: Point) -> usize {
        let id = self.points.len();
        if let Some(key) = self.key(&p) {
            self.buckets.entry(key).or_default().push(id as u32);
        }
        self.points.push(p);
        id
    }

    fn key(&self, p: &Point) -> Option<CellKey> {
        match (&self.grid, p) {
            (Grid::Periodic { cells, .. }, Point::Circle(x)) => Some([cell(*x, *cells), 0, 0, 0]),
            (Grid::Periodic { cells, .. }, Point::Torus(v)) => {
                let mut k = [0; 4];
                for (slot, x) in k.iter_mut().zip(v) {
                    *slot = cell(*x, *cells);
                }
                Some(k)
            }
            (Grid::Chordal { side }, Point::Rotation(q)) => Some(chordal_key(&q.as_array(), *side)),
            _ => None,
        }
    }

    /// Calls `f` on every stored id that could lie within the build radius of `p`.
    fn for_each_candidate(&self, p: &Point, mut f: impl FnMut(usize)) {
        match (&self.grid, p) {
            (Grid::Periodic { axes, cells }, _) => {
                let home = self.key(p).expect("periodic key");
                let offsets: Vec<i32> = if *cells >= 3 {
                    vec![-1, 0, 1]
                } else {
                    (0..*cells).collect()
                };
                let combos = offsets.len().pow(*axes as u32);
                for c in 0..combos {
                    let mut key = [0; 4];
                    let mut rem = c;
                    for (axis, slot) in key.iter_mut().enumerate().take(*axes) {
                        let o = offsets[rem % offsets.len()];
                        rem /= offsets.len();
                        *slot = if *cells >= 3 {
                            (home[axis] + o).rem_euclid(*cells)
                        } else {
                            o
                        };
                    }
                    if let Some(ids) = self.buckets.get(&key) {
                        ids.iter().for_each(|&id| f(id as usize));
                    }
                }
            }
            (Grid::Chordal { side }, Point::Rotation(q)) => {
                let q = q.as_array();
                let neg = [-q[0], -q[1], -q[2], -q[3]];
                let mut visit = |v: &[f64; 4]| {
                    let home = chordal_key(v, *side);
                    for c in 0..81 {
                        let mut key = home;
                        let mut rem = c;
                        for slot in key.iter_mut() {
                            *slot += (rem % 3) - 1;
                            rem /= 3;
                        }
                        if let Some(ids) = self.buckets.get(&key) {
                            ids.iter().for_each(|&id| f(id as usize));
                        }
                    }
                };
                visit(&q);
                // Stored points are canonical; the antipode only matters near the w = 0 wall.
                if q[0] < *side {
                    visit(&neg);
                }
            }
            _ => (0..self.points.len()).for_each(f),
        }
    }

    /// Whether some stored point lies at distance `< rho` from `p`.
    pub fn any_within(&self, p: &Point, rho: f64) -> bool {
        if rho > self.radius {
            return self.points.iter().any(|q| raw_distance(p, q) < rho);
        }
        let mut found = false;
        self.for_each_candidate(p, |id| {
            if !found && raw_distance(p, &self.points[id]) < rho {
                found = true;
            }
        });
        found
    }

    /// Ids and distances of stored points at distance `< rho` from `p`, sorted by id.
    pub fn within(&self, p: &Point, rho: f64) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if rho > self.radius {
            for (id, q) in self.points.iter().enumerate() {
                let d = raw_distance(p, q);
                if d < rho {
                    out.push((id, d));
                }
            }
            return out;
        }
        self.for_each_candidate(p, |id| {
            let d = raw_distance(p, &self.points[id]);
            if d < rho {
                out.push((id, d));
            }
        });
        out.sort_unstable_by_key(|&(id, _)| id);
        out.dedup_by_key(|&mut (id, _)| id);
        out
    }

    /// Nearest stored point (smallest id on ties) and its distance.
    pub fn nearest(&self, p: &Point) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut consider = |id: usize, d: f64| match best {
            Some((bid, bd)) if d > bd || (d == bd && id >= bid) => {}
            _ => best = Some((id, d)),
        };
        self.for_each_candidate(p, |id| consider(id, raw_distance(p, &self.points[id])));
        match best {
            Some((_, d)) if d <= self.radius => best,
            _ => {
                let mut best: Option<(usize, f64)> = None;
                for (id, q) in self.points.iter().enumerate() {
                    let d = raw_distance(p, q);
                    if best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((id, d));
                    }
                }
                best
            }
        }
    }
}

fn periodic(axes: usize, radius: f64) -> Grid {
    let cells = if radius <= 0.0 {
        1 << 16
    } else {
        (1.0 / radius).floor().clamp(1.0, (1 << 16) as f64) as i32
    };
    // Keep the total cell count bounded in higher dimensions.
    let cap = match axes {
        1 => 1 << 16,
        2 => 1 << 10,
        3 => 1 << 7,
        _ => 1 << 5,
    };
    Grid::Periodic {
        axes,
        cells: cells.min(cap),
    }
}

fn cell(x: f64, cells: i32) -> i32 {
    ((x * cells as f64) as i32).clamp(0, cells - 1)
}

fn chordal_key(q: &[f64; 4], side: f64) -> CellKey {
    let mut k = [0; 4];
    for (slot, c) in k.iter_mut().zip(q) {
        *slot = ((c + 1.0) / side).floor() as i32;
    }
    k
}
