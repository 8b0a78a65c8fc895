//! Muckenhoupt weight functionals over a declared cube family.

use log::warn;

use crate::error::{Error, Result};
use crate::family::{CubeFamily, Shape};
use crate::grid::{dilate_cube, Cube, DyadicCell, GridFunction, GridSpec, Point, Region};

pub const DEFAULT_FLOOR: f64 = 1e-12;

/// A strictly positive grid function with cached dyadic cube masses.
#[derive(Debug, Clone)]
pub struct Weight {
    base: GridFunction,
    level_sums: Vec<Vec<f64>>,
}

impl Weight {
    pub fn new(base: GridFunction) -> Self {
        Self::with_floor(base, DEFAULT_FLOOR)
    }

    /// Values below `floor` are raised to it, with a warning.
    pub fn with_floor(base: GridFunction, floor: f64) -> Self {
        let floored = base.values().iter().filter(|&&v| v < floor).count();
        let base = if floored > 0 {
            warn!("weight: {floored} sample(s) floored at {floor:e}");
            base.map(|v| v.max(floor)).expect("flooring keeps values finite")
        } else {
            base
        };
        let level_sums = build_level_sums(&base);
        Self { base, level_sums }
    }

    pub fn constant(spec: GridSpec, c: f64) -> Result<Self> {
        Ok(Self::new(GridFunction::constant(spec, c)?))
    }

    /// `max(|x - x0|, h)^(-alpha)` under the periodic metric.
    pub fn power_regularized(spec: GridSpec, center: Point, alpha: f64) -> Result<Self> {
        let h = spec.spacing();
        let base = GridFunction::from_fn(spec, |p| {
            spec.periodic_distance(p, center).max(h).powf(-alpha)
        })?;
        Ok(Self::new(base))
    }

    pub fn base(&self) -> &GridFunction {
        &self.base
    }

    pub fn values(&self) -> &[f64] {
        self.base.values()
    }

    pub fn spec(&self) -> &GridSpec {
        self.base.spec()
    }

    /// Cached `omega(Q)` of a dyadic cell.
    pub fn dyadic_mass(&self, cell: DyadicCell) -> f64 {
        let per_axis = 1usize << cell.level;
        let idx = match self.spec().dim() {
            1 => cell.pos[0],
            _ => cell.pos[0] * per_axis + cell.pos[1],
        };
        self.level_sums[cell.level as usize][idx]
    }
}

fn build_level_sums(base: &GridFunction) -> Vec<Vec<f64>> {
    let spec = base.spec();
    let dim = spec.dim();
    let top = spec.max_dyadic_level() as usize;
    let vol = spec.cell_volume();
    let mut levels = vec![Vec::new(); top + 1];
    levels[top] = base.values().iter().map(|v| v * vol).collect();
    for k in (0..top).rev() {
        let per_axis = 1usize << k;
        let fine = &levels[k + 1];
        let sums = match dim {
            1 => (0..per_axis).map(|j| fine[2 * j] + fine[2 * j + 1]).collect(),
            _ => {
                let fw = per_axis * 2;
                let mut out = Vec::with_capacity(per_axis * per_axis);
                for a in 0..per_axis {
                    for b in 0..per_axis {
                        let (r, c) = (2 * a, 2 * b);
                        out.push(
                            fine[r * fw + c]
                                + fine[r * fw + c + 1]
                                + fine[(r + 1) * fw + c]
                                + fine[(r + 1) * fw + c + 1],
                        );
                    }
                }
                out
            }
        };
        levels[k] = sums;
    }
    levels
}

/// `omega(E) = sum_{E} omega h^n`.
pub fn weighted_measure(w: &Weight, region: &Region) -> f64 {
    let v = w.values();
    region.indices().iter().map(|&i| v[i]).sum::<f64>() * w.spec().cell_volume()
}

fn region_mean_min(values: &[f64], region: &Region) -> (f64, f64) {
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    for &i in region.indices() {
        sum += values[i];
        min = min.min(values[i]);
    }
    (sum / region.len() as f64, min)
}

/// A family-relative constant together with the member that realises it.
#[derive(Debug, Clone)]
pub struct WitnessedConstant {
    pub value: f64,
    pub argmax: Shape,
    pub family: String,
}

/// `max_Q (avg_Q omega) / (min_Q omega)` over the family; always `>= 1`.
pub fn a1_constant(w: &Weight, family: &CubeFamily) -> Result<f64> {
    Ok(a1_witness(w, family)?.value)
}

pub fn a1_witness(w: &Weight, family: &CubeFamily) -> Result<WitnessedConstant> {
    family.check(w.spec())?;
    let v = w.values();
    witnessed(family, |r| {
        let (mean, min) = region_mean_min(v, r);
        mean / min
    })
}

/// `max_Q (avg omega) (avg omega^(1-p'))^(p-1)`, `p' = p/(p-1)`.
pub fn ap_constant(w: &Weight, p: f64, family: &CubeFamily) -> Result<f64> {
    Ok(ap_witness(w, p, family)?.value)
}

pub fn ap_witness(w: &Weight, p: f64, family: &CubeFamily) -> Result<WitnessedConstant> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "A_p needs p > 1 (got {p}); use a1_constant"
        )));
    }
    family.check(w.spec())?;
    let dual = 1.0 - p / (p - 1.0);
    let v = w.values();
    witnessed(family, |r| {
        let n = r.len() as f64;
        let (mut s, mut sd) = (0.0, 0.0);
        for &i in r.indices() {
            s += v[i];
            sd += v[i].powf(dual);
        }
        (s / n) * (sd / n).powf(p - 1.0)
    })
}

fn witnessed(family: &CubeFamily, f: impl Fn(&Region) -> f64) -> Result<WitnessedConstant> {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (k, m) in family.members().iter().enumerate() {
        let val = f(m.region());
        if val > best {
            best = val;
            arg = k;
        }
    }
    Ok(WitnessedConstant {
        value: best,
        argmax: family.members()[arg].shape,
        family: family.descriptor().to_string(),
    })
}

/// Pointwise `omega^s`.
pub fn power_weight(w: &Weight, s: f64) -> Weight {
    let base = w.base.map(|v| v.powf(s)).expect("powers of positive finite values are finite");
    Weight::new(base)
}

#[derive(Debug, Clone)]
pub struct DoublingEntry {
    pub cube: Cube,
    /// `omega(tQ) / omega(Q)`
    pub ratio: f64,
    pub bound: f64,
}

impl DoublingEntry {
    pub fn margin(&self) -> f64 {
        self.bound / self.ratio
    }

    pub fn violated(&self) -> bool {
        self.ratio > self.bound
    }
}

#[derive(Debug, Clone)]
pub struct DoublingReport {
    pub factor: f64,
    pub constant: f64,
    pub entries: Vec<DoublingEntry>,
}

impl DoublingReport {
    pub fn violations(&self) -> usize {
        self.entries.iter().filter(|e| e.violated()).count()
    }

    pub fn min_margin(&self) -> f64 {
        self.entries
            .iter()
            .map(DoublingEntry::margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// `omega(2Q)/omega(Q)` for every cube whose double fits in the box,
/// checked against `2^n [omega]_{A_1}`.
pub fn doubling_report(w: &Weight, cubes: &[Cube], a1: f64) -> Result<DoublingReport> {
    let n = w.spec().dim() as i32;
    dilation_report_with_bound(w, cubes, 2.0, 2f64.powi(n) * a1, a1)
}

/// `omega(tQ)/omega(Q)` checked against `t^(2n) [omega]_{A_2}`.
pub fn dilation_report(w: &Weight, cubes: &[Cube], t: f64, a2: f64) -> Result<DoublingReport> {
    let n = w.spec().dim() as i32;
    dilation_report_with_bound(w, cubes, t, t.powi(2 * n) * a2, a2)
}

fn dilation_report_with_bound(
    w: &Weight,
    cubes: &[Cube],
    t: f64,
    bound: f64,
    constant: f64,
) -> Result<DoublingReport> {
    let spec = *w.spec();
    let mut entries = Vec::new();
    for q in cubes {
        if q.side * t > spec.side() * (1.0 + 1e-12) {
            continue;
        }
        let big = dilate_cube(q, t)?;
        let small = weighted_measure(w, &q.region(&spec, true));
        let large = weighted_measure(w, &big.region(&spec, true));
        entries.push(DoublingEntry {
            cube: *q,
            ratio: large / small,
            bound,
        });
    }
    Ok(DoublingReport {
        factor: t,
        constant,
        entries,
    })
}

#[derive(Debug, Clone)]
pub struct ReverseHolderCheck {
    pub shape: Shape,
    /// `(avg nu^(1+eps))^(1/(1+eps))`
    pub lhs: f64,
    /// `C* avg nu`
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct ReverseHolder {
    pub epsilon: f64,
    pub cstar: f64,
    /// Comparison exponent `eps / (1 + eps)`.
    pub delta: f64,
    /// The A_p constant of `nu` the exponent was built from.
    pub ap: f64,
    pub checks: Vec<ReverseHolderCheck>,
}

impl ReverseHolder {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(|c| c.lhs <= c.rhs)
    }
}

/// Sharp reverse Hölder exponent for an A_p weight:
/// `eps = 1 / (2^(2p+1+n) [nu]_{A_p})`, `C* = 2`, checked on every member.
pub fn reverse_holder(nu: &Weight, p: f64, family: &CubeFamily) -> Result<ReverseHolder> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("reverse Hölder needs p >= 1, got {p}")));
    }
    let ap = if p == 1.0 {
        a1_constant(nu, family)?
    } else {
        ap_constant(nu, p, family)?
    };
    let n = nu.spec().dim() as f64;
    let epsilon = 1.0 / (2f64.powf(2.0 * p + 1.0 + n) * ap);
    let cstar = 2.0;
    let v = nu.values();
    let checks = family
        .members()
        .iter()
        .map(|m| {
            let r = m.region();
            let len = r.len() as f64;
            let (mut s, mut sp) = (0.0, 0.0);
            for &i in r.indices() {
                s += v[i];
                sp += v[i].powf(1.0 + epsilon);
            }
            ReverseHolderCheck {
                shape: m.shape,
                lhs: (sp / len).powf(1.0 / (1.0 + epsilon)),
                rhs: cstar * s / len,
            }
        })
        .collect();
    Ok(ReverseHolder {
        epsilon,
        cstar,
        delta: epsilon / (1.0 + epsilon),
        ap,
        checks,
    })
}

/// Both sides of `nu(E)/nu(Q) <= C* (m(E)/m(Q))^delta` for `E` inside `Q`.
pub fn comparison_check(
    nu: &Weight,
    q: &Region,
    e: &Region,
    cstar: f64,
    delta: f64,
) -> Result<(f64, f64)> {
    if e.is_empty() || q.is_empty() {
        return Err(Error::EmptyRegion);
    }
    if !e.indices().iter().all(|i| q.contains(*i)) {
        return Err(Error::InvalidArgument("E must be a subset of Q".into()));
    }
    let lhs = weighted_measure(nu, e) / weighted_measure(nu, q);
    let rhs = cstar * (e.len() as f64 / q.len() as f64).powf(delta);
    Ok((lhs, rhs))
}
