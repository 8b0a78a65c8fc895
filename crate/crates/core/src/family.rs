//! Finite families of cubes (and optionally balls) over which every
//! supremum in the toolkit is taken.
//!
//! Constants computed over a family are family-relative: the descriptor is
//! carried into every report so two runs with the same family are
//! comparable.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::{dilate_cube, dyadic_cells, Cube, DyadicCell, GridSpec, Point, Region};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum Shape {
    Cube(Cube),
    Ball { center: Point, radius: f64 },
}

impl Shape {
    pub fn center(&self) -> Point {
        match self {
            Shape::Cube(c) => c.center,
            Shape::Ball { center, .. } => *center,
        }
    }

    /// Cube side, or ball diameter.
    pub fn size(&self) -> f64 {
        match self {
            Shape::Cube(c) => c.side,
            Shape::Ball { radius, .. } => 2.0 * radius,
        }
    }

    pub fn as_cube(&self) -> Option<&Cube> {
        match self {
            Shape::Cube(c) => Some(c),
            Shape::Ball { .. } => None,
        }
    }

    pub fn region(&self, spec: &GridSpec, periodic: bool) -> Region {
        match self {
            Shape::Cube(c) => c.region(spec, periodic),
            Shape::Ball { center, radius } => Region::ball(*spec, *center, *radius, periodic),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Cube(c) => write!(f, "{c}"),
            Shape::Ball { center, radius } => write!(f, "B({},{}; {})", center[0], center[1], radius),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Member {
    pub shape: Shape,
    region: Region,
}

impl Member {
    pub fn region(&self) -> &Region {
        &self.region
    }
}

#[derive(Debug, Clone)]
pub struct CubeFamily {
    spec: GridSpec,
    periodic: bool,
    members: Vec<Member>,
    descriptor: String,
}

impl CubeFamily {
    /// All dyadic cubes of levels `0..=max_level`.
    pub fn dyadic(spec: GridSpec, max_level: u32) -> Result<Self> {
        let cells = dyadic_cells(&spec, max_level)?;
        let members = cells
            .into_iter()
            .map(|c| Member {
                shape: Shape::Cube(c.cube(&spec)),
                region: Region::dyadic(spec, c),
            })
            .collect();
        Ok(Self {
            spec,
            periodic: true,
            members,
            descriptor: format!("dyadic(0..={max_level})"),
        })
    }

    /// Every dyadic sub-cube of `root` (including `root`) down to `max_level`.
    pub fn dyadic_within(spec: GridSpec, root: DyadicCell, max_level: u32) -> Result<Self> {
        if max_level > spec.max_dyadic_level() || max_level < root.level {
            return Err(Error::InvalidArgument(format!(
                "level range {}..={max_level} is not valid for N = {}",
                root.level,
                spec.res()
            )));
        }
        let mut members = Vec::new();
        let mut frontier = vec![root];
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for c in &frontier {
                members.push(Member {
                    shape: Shape::Cube(c.cube(&spec)),
                    region: Region::dyadic(spec, *c),
                });
                if c.level < max_level {
                    next.extend(c.children(spec.dim()));
                }
            }
            frontier = next;
        }
        Ok(Self {
            spec,
            periodic: true,
            members,
            descriptor: format!(
                "dyadic-within(level={} pos={},{} to={max_level})",
                root.level, root.pos[0], root.pos[1]
            ),
        })
    }

    pub fn from_cubes(spec: GridSpec, cubes: &[Cube], periodic: bool, descriptor: &str) -> Self {
        let members = cubes
            .iter()
            .map(|c| Member {
                shape: Shape::Cube(*c),
                region: c.region(&spec, periodic),
            })
            .filter(|m| !m.region.is_empty())
            .collect();
        Self {
            spec,
            periodic,
            members,
            descriptor: descriptor.to_string(),
        }
    }

    /// `count` balls with uniformly random centers and log-uniform radii.
    pub fn random_balls(
        spec: GridSpec,
        count: usize,
        seed: u64,
        radius_range: (f64, f64),
    ) -> Result<Self> {
        let (r_lo, r_hi) = radius_range;
        if !(r_lo > 0.0 && r_hi >= r_lo) {
            return Err(Error::InvalidArgument(format!(
                "bad ball radius range ({r_lo}, {r_hi})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut members = Vec::with_capacity(count);
        while members.len() < count {
            let center = match spec.dim() {
                1 => [rng.random_range(0.0..spec.side()), 0.0],
                _ => [
                    rng.random_range(0.0..spec.side()),
                    rng.random_range(0.0..spec.side()),
                ],
            };
            let radius = if r_hi > r_lo {
                (rng.random_range(r_lo.ln()..r_hi.ln())).exp()
            } else {
                r_lo
            };
            let shape = Shape::Ball { center, radius };
            let region = shape.region(&spec, true);
            if !region.is_empty() {
                members.push(Member { shape, region });
            }
        }
        Ok(Self {
            spec,
            periodic: true,
            members,
            descriptor: format!("balls(count={count} seed={seed})"),
        })
    }

    /// Adds `tQ` for every cube member whose dilate still fits in the box.
    pub fn with_dilates(mut self, t: f64) -> Result<Self> {
        let mut extra = Vec::new();
        for m in &self.members {
            if let Shape::Cube(c) = &m.shape {
                if c.side * t <= self.spec.side() * (1.0 + 1e-12) {
                    let d = dilate_cube(c, t)?;
                    extra.push(Member {
                        shape: Shape::Cube(d),
                        region: d.region(&self.spec, self.periodic),
                    });
                }
            }
        }
        self.members.extend(extra);
        self.descriptor = format!("{}+dilates({t})", self.descriptor);
        Ok(self)
    }

    pub fn union(&self, other: &CubeFamily) -> Result<Self> {
        if !self.spec.same_grid(&other.spec) {
            return Err(Error::RegionMismatch);
        }
        let mut members = self.members.clone();
        members.extend(other.members.iter().cloned());
        Ok(Self {
            spec: self.spec,
            periodic: self.periodic,
            members,
            descriptor: format!("{}|{}", self.descriptor, other.descriptor),
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn members(&self) -> &[Member] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    pub(crate) fn check(&self, spec: &GridSpec) -> Result<()> {
        if !self.spec.same_grid(spec) {
            return Err(Error::RegionMismatch);
        }
        if self.members.is_empty() {
            return Err(Error::InvalidArgument("cube family is empty".into()));
        }
        Ok(())
    }
}
