//! Sampled functions on a uniform box, dyadic cubes and the discrete measure
//! theory everything else is built on.
//!
//! The box is `[0, L)^n` with `N` samples per axis at the left endpoints
//! `x_i = i h`, `h = L / N`. Every region is a set of sample indices and its
//! Lebesgue measure is `count * h^n`. Two-dimensional samples are stored row
//! major: index `i0 * N + i1`, axis 0 being the slow axis.

use std::fmt;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// A point of the box. For `n = 1` only the first coordinate is meaningful.
pub type Point = [f64; 2];

/// Geometry of a uniform grid: dimension, box side and samples per axis.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GridSpec {
    dim: usize,
    side: f64,
    res: usize,
}

impl GridSpec {
    pub fn new(dim: usize, side: f64, res: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!("box side must be positive, got {side}")));
        }
        if res == 0 || !res.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "resolution must be a power of two, got {res}"
            )));
        }
        Ok(Self { dim, side, res })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn res(&self) -> usize {
        self.res
    }

    /// Grid spacing `h = L / N`.
    pub fn spacing(&self) -> f64 {
        self.side / self.res as f64
    }

    /// Volume `h^n` of one sample cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total number of samples `N^n`.
    pub fn len(&self) -> usize {
        self.res.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Deepest dyadic level whose cubes still contain at least one sample.
    pub fn max_dyadic_level(&self) -> u32 {
        self.res.trailing_zeros()
    }

    pub fn index(&self, axes: [usize; 2]) -> usize {
        match self.dim {
            1 => axes[0],
            _ => axes[0] * self.res + axes[1],
        }
    }

    pub fn axes(&self, index: usize) -> [usize; 2] {
        match self.dim {
            1 => [index, 0],
            _ => [index / self.res, index % self.res],
        }
    }

    pub fn point(&self, index: usize) -> Point {
        let h = self.spacing();
        let a = self.axes(index);
        match self.dim {
            1 => [a[0] as f64 * h, 0.0],
            _ => [a[0] as f64 * h, a[1] as f64 * h],
        }
    }

    /// Displacement `a - b` with each component wrapped into `[-L/2, L/2)`.
    pub fn periodic_displacement(&self, a: Point, b: Point) -> Point {
        let l = self.side;
        let wrap = |d: f64| d - l * (d / l + 0.5).floor();
        match self.dim {
            1 => [wrap(a[0] - b[0]), 0.0],
            _ => [wrap(a[0] - b[0]), wrap(a[1] - b[1])],
        }
    }

    pub fn periodic_distance(&self, a: Point, b: Point) -> f64 {
        let d = self.periodic_displacement(a, b);
        (d[0] * d[0] + d[1] * d[1]).sqrt()
    }

    /// Periodic distance between two samples given by index offsets per axis.
    pub(crate) fn offset_distance(&self, offset: [usize; 2]) -> f64 {
        let h = self.spacing();
        let wrap = |o: usize| {
            let o = o % self.res;
            o.min(self.res - o) as f64 * h
        };
        match self.dim {
            1 => wrap(offset[0]),
            _ => {
                let (a, b) = (wrap(offset[0]), wrap(offset[1]));
                (a * a + b * b).sqrt()
            }
        }
    }

    pub(crate) fn same_grid(&self, other: &GridSpec) -> bool {
        self.dim == other.dim && self.res == other.res && self.side.to_bits() == other.side.to_bits()
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} L={} N={}", self.dim, self.side, self.res)
    }
}

/// A real function sampled on a [`GridSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    spec: GridSpec,
    values: Vec<f64>,
    periodic: bool,
}

impl GridFunction {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::InvalidGrid(format!(
                "expected {} values for {spec}, got {}",
                spec.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("value at index {i} is not finite")));
        }
        Ok(Self {
            spec,
            values,
            periodic: true,
        })
    }

    pub fn from_fn(spec: GridSpec, f: impl Fn(Point) -> f64) -> Result<Self> {
        let values = (0..spec.len()).map(|i| f(spec.point(i))).collect();
        Self::new(spec, values)
    }

    pub fn constant(spec: GridSpec, c: f64) -> Result<Self> {
        Self::new(spec, vec![c; spec.len()])
    }

    /// Marks the grid as non-periodic: regions are clipped at the box edge
    /// instead of wrapping.
    pub fn with_periodic(mut self, periodic: bool) -> Self {
        self.periodic = periodic;
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = self.values.iter().map(|&v| f(v)).collect();
        Ok(Self::new(self.spec, values)?.with_periodic(self.periodic))
    }

    pub fn zip_map(&self, other: &GridFunction, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !self.spec.same_grid(&other.spec) {
            return Err(Error::RegionMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Self::new(self.spec, values)?.with_periodic(self.periodic))
    }

    /// Integral `sum f h^n` over the whole box.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    /// Writes the CSV serialization: a `# n=.. L=.. N=..` header, any extra
    /// `#` header lines, then one value per line in row-major order.
    pub fn write_csv<W: Write>(&self, mut out: W, extra_headers: &[String]) -> Result<()> {
        writeln!(out, "# {}", self.spec)?;
        for line in extra_headers {
            writeln!(out, "# {line}")?;
        }
        for v in &self.values {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    /// Parses the CSV serialization. Returns the function and the extra
    /// header lines (without the leading `#`).
    pub fn read_csv<R: BufRead>(input: R) -> Result<(Self, Vec<String>)> {
        let mut spec = None;
        let mut extra = Vec::new();
        let mut values = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                let header = header.trim();
                if spec.is_none() && header.starts_with("n=") {
                    spec = Some(parse_spec_header(header)?);
                } else {
                    extra.push(header.to_string());
                }
                continue;
            }
            let v: f64 = line
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad value `{line}`", lineno + 1)))?;
            values.push(v);
        }
        let spec = spec.ok_or_else(|| Error::Parse("missing `# n=.. L=.. N=..` header".into()))?;
        Ok((Self::new(spec, values)?, extra))
    }
}

fn parse_spec_header(header: &str) -> Result<GridSpec> {
    let mut dim = None;
    let mut side = None;
    let mut res = None;
    for tok in header.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("bad header token `{tok}`")))?;
        let bad = || Error::Parse(format!("bad header value `{tok}`"));
        match k {
            "n" => dim = Some(v.parse::<usize>().map_err(|_| bad())?),
            "L" => side = Some(v.parse::<f64>().map_err(|_| bad())?),
            "N" => res = Some(v.parse::<usize>().map_err(|_| bad())?),
            _ => return Err(Error::Parse(format!("unknown header key `{k}`"))),
        }
    }
    match (dim, side, res) {
        (Some(d), Some(l), Some(n)) => GridSpec::new(d, l, n),
        _ => Err(Error::Parse(format!("incomplete grid header `{header}`"))),
    }
}

/// Dyadic cell address: level `k` and per-axis position `j` in `0..2^k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct DyadicCell {
    pub level: u32,
    pub pos: [usize; 2],
}

impl DyadicCell {
    pub fn root() -> Self {
        Self { level: 0, pos: [0, 0] }
    }

    /// Children in row-major order (axis 0 slow).
    pub fn children(&self, dim: usize) -> Vec<DyadicCell> {
        let level = self.level + 1;
        let [a, b] = [self.pos[0] * 2, self.pos[1] * 2];
        match dim {
            1 => vec![
                DyadicCell { level, pos: [a, 0] },
                DyadicCell { level, pos: [a + 1, 0] },
            ],
            _ => vec![
                DyadicCell { level, pos: [a, b] },
                DyadicCell { level, pos: [a, b + 1] },
                DyadicCell { level, pos: [a + 1, b] },
                DyadicCell { level, pos: [a + 1, b + 1] },
            ],
        }
    }

    pub fn parent(&self) -> Option<DyadicCell> {
        (self.level > 0).then(|| DyadicCell {
            level: self.level - 1,
            pos: [self.pos[0] / 2, self.pos[1] / 2],
        })
    }

    /// Whether `self` is contained in `other`.
    pub fn is_within(&self, other: &DyadicCell) -> bool {
        if self.level < other.level {
            return false;
        }
        let shift = self.level - other.level;
        self.pos[0] >> shift == other.pos[0] && self.pos[1] >> shift == other.pos[1]
    }

    /// Samples per axis covered by the cell.
    pub fn samples_per_axis(&self, spec: &GridSpec) -> usize {
        spec.res() >> self.level
    }

    pub fn cube(&self, spec: &GridSpec) -> Cube {
        let side = spec.side() / (1u64 << self.level) as f64;
        let c = |j: usize| (j as f64 + 0.5) * side;
        let center = match spec.dim() {
            1 => [c(self.pos[0]), 0.0],
            _ => [c(self.pos[0]), c(self.pos[1])],
        };
        Cube {
            dim: spec.dim(),
            center,
            side,
            level: Some(self.level),
        }
    }

    /// Sample indices in row-major order.
    pub fn indices(&self, spec: &GridSpec) -> Vec<usize> {
        let m = self.samples_per_axis(spec);
        let (a0, a1) = (self.pos[0] * m, self.pos[1] * m);
        match spec.dim() {
            1 => (a0..a0 + m).collect(),
            _ => {
                let mut out = Vec::with_capacity(m * m);
                for i in a0..a0 + m {
                    for j in a1..a1 + m {
                        out.push(i * spec.res() + j);
                    }
                }
                out
            }
        }
    }
}

/// Axis-parallel cube `Q(x0, r)`: center and side length, plus the dyadic
/// level when the cube is dyadic.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Cube {
    pub dim: usize,
    pub center: Point,
    pub side: f64,
    pub level: Option<u32>,
}

impl Cube {
    pub fn new(dim: usize, center: Point, side: f64) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidArgument(format!("cube side must be positive, got {side}")));
        }
        Ok(Self {
            dim,
            center,
            side,
            level: None,
        })
    }

    /// Recovers the dyadic cell of a dyadic cube.
    pub fn dyadic_cell(&self, spec: &GridSpec) -> Option<DyadicCell> {
        let level = self.level?;
        let side = spec.side() / (1u64 << level) as f64;
        let j = |c: f64| ((c / side) - 0.5).round() as usize;
        Some(DyadicCell {
            level,
            pos: match self.dim {
                1 => [j(self.center[0]), 0],
                _ => [j(self.center[0]), j(self.center[1])],
            },
        })
    }

    /// Sample indices of the cube, wrapping (periodic) or clipping at the box.
    pub fn region(&self, spec: &GridSpec, periodic: bool) -> Region {
        if self.dim != spec.dim() {
            return Region::empty(*spec);
        }
        let axis = |c: f64| axis_range(spec, c - self.side / 2.0, c + self.side / 2.0, periodic);
        let r0 = axis(self.center[0]);
        let indices = match spec.dim() {
            1 => r0,
            _ => {
                let r1 = axis(self.center[1]);
                let mut out = Vec::with_capacity(r0.len() * r1.len());
                for &i in &r0 {
                    for &j in &r1 {
                        out.push(i * spec.res() + j);
                    }
                }
                out
            }
        };
        Region {
            spec: *spec,
            indices,
        }
    }
}

impl fmt::Display for Cube {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.dim {
            1 => write!(f, "Q({}; {})", self.center[0], self.side),
            _ => write!(f, "Q({},{}; {})", self.center[0], self.center[1], self.side),
        }
    }
}

/// Sample indices `i` with `lo <= i h < hi` along one axis.
fn axis_range(spec: &GridSpec, lo: f64, hi: f64, periodic: bool) -> Vec<usize> {
    const SNAP: f64 = 1e-9;
    let h = spec.spacing();
    let n = spec.res() as i64;
    let start = (lo / h - SNAP).ceil() as i64;
    let end = (hi / h - SNAP).ceil() as i64;
    if end <= start {
        return Vec::new();
    }
    if periodic {
        let count = (end - start).min(n);
        (start..start + count).map(|i| i.rem_euclid(n) as usize).collect()
    } else {
        (start.max(0)..end.min(n)).map(|i| i as usize).collect()
    }
}

/// All dyadic cubes of levels `0..=max_level`, level by level, row-major
/// inside each level.
pub fn dyadic_cubes(spec: &GridSpec, max_level: u32) -> Result<Vec<Cube>> {
    Ok(dyadic_cells(spec, max_level)?
        .iter()
        .map(|c| c.cube(spec))
        .collect())
}

pub fn dyadic_cells(spec: &GridSpec, max_level: u32) -> Result<Vec<DyadicCell>> {
    if max_level > spec.max_dyadic_level() {
        return Err(Error::InvalidArgument(format!(
            "dyadic level {max_level} is deeper than the grid allows (N = {})",
            spec.res()
        )));
    }
    let mut out = Vec::new();
    for level in 0..=max_level {
        let per_axis = 1usize << level;
        let rows = if spec.dim() == 1 { 1 } else { per_axis };
        for a in 0..per_axis {
            for b in 0..rows {
                let pos = if spec.dim() == 1 { [a, 0] } else { [a, b] };
                out.push(DyadicCell { level, pos });
            }
        }
    }
    Ok(out)
}

/// `tQ`: same center, side multiplied by `t`. The result is not dyadic.
pub fn dilate_cube(q: &Cube, t: f64) -> Result<Cube> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidArgument(format!("dilation factor must be positive, got {t}")));
    }
    if t == 1.0 {
        return Ok(*q);
    }
    Ok(Cube {
        side: q.side * t,
        level: None,
        ..*q
    })
}

/// A set of sample indices of one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    spec: GridSpec,
    indices: Vec<usize>,
}

impl Region {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            spec,
            indices: Vec::new(),
        }
    }

    pub fn full(spec: GridSpec) -> Self {
        Self {
            spec,
            indices: (0..spec.len()).collect(),
        }
    }

    /// Builds a region from arbitrary indices; duplicates are removed.
    pub fn from_indices(spec: GridSpec, mut indices: Vec<usize>) -> Result<Self> {
        if indices.iter().any(|&i| i >= spec.len()) {
            return Err(Error::InvalidArgument("region index out of range".into()));
        }
        indices.sort_unstable();
        indices.dedup();
        Ok(Self { spec, indices })
    }

    pub fn dyadic(spec: GridSpec, cell: DyadicCell) -> Self {
        Self {
            spec,
            indices: cell.indices(&spec),
        }
    }

    /// Samples within Euclidean distance `< radius` of `center`.
    pub fn ball(spec: GridSpec, center: Point, radius: f64, periodic: bool) -> Self {
        let indices = (0..spec.len())
            .filter(|&i| {
                let p = spec.point(i);
                let d = if periodic {
                    spec.periodic_distance(p, center)
                } else {
                    let (a, b) = (p[0] - center[0], p[1] - center[1]);
                    (a * a + b * b).sqrt()
                };
                d < radius
            })
            .collect();
        Self { spec, indices }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.indices.contains(&index)
    }

    pub fn union(&self, other: &Region) -> Result<Region> {
        if !self.spec.same_grid(&other.spec) {
            return Err(Error::RegionMismatch);
        }
        let mut all = self.indices.clone();
        all.extend_from_slice(&other.indices);
        Region::from_indices(self.spec, all)
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        let mut mark = vec![false; self.spec.len()];
        for &i in &self.indices {
            mark[i] = true;
        }
        other.indices.iter().all(|&i| !mark[i])
    }

    pub(crate) fn check(&self, f: &GridFunction) -> Result<()> {
        if self.spec.same_grid(f.spec()) {
            Ok(())
        } else {
            Err(Error::RegionMismatch)
        }
    }
}

/// Lebesgue measure `count * h^n` of a region.
pub fn measure(region: &Region) -> f64 {
    region.len() as f64 * region.spec.cell_volume()
}

/// Mean of the samples in a nonempty region.
pub fn mean_value(f: &GridFunction, region: &Region) -> Result<f64> {
    region.check(f)?;
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let v = f.values();
    let sum: f64 = region.indices.iter().map(|&i| v[i]).sum();
    Ok(sum / region.len() as f64)
}

/// Sample minimum over a region; the grid model of the essential infimum.
pub fn ess_inf(f: &GridFunction, region: &Region) -> Result<f64> {
    region.check(f)?;
    let v = f.values();
    region
        .indices
        .iter()
        .map(|&i| v[i])
        .reduce(f64::min)
        .ok_or(Error::EmptyRegion)
}

/// Sample maximum over a region; the grid model of the essential supremum.
pub fn ess_sup(f: &GridFunction, region: &Region) -> Result<f64> {
    region.check(f)?;
    let v = f.values();
    region
        .indices
        .iter()
        .map(|&i| v[i])
        .reduce(f64::max)
        .ok_or(Error::EmptyRegion)
}
