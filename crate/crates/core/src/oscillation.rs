//! Weighted oscillation functionals BMO(ω), BLO(ω), their `p`-variants and
//! the weighted L^∞ norm, each a maximum over a declared cube family.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::family::{CubeFamily, Shape};
use crate::grid::{dilate_cube, Cube, GridFunction, Region};
use crate::weights::{weighted_measure, Weight};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Functional {
    Bmo,
    Blo,
    BmoP,
    BloP,
    LinfW,
}

impl Functional {
    pub fn tag(&self) -> &'static str {
        match self {
            Functional::Bmo => "bmo",
            Functional::Blo => "blo",
            Functional::BmoP => "bmo_p",
            Functional::BloP => "blo_p",
            Functional::LinfW => "linf_w",
        }
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone)]
pub struct OscillationReport {
    pub kind: Functional,
    pub p: f64,
    pub value: f64,
    pub argmax: Shape,
    pub family: String,
}

impl OscillationReport {
    pub const CSV_HEADER: [&'static str; 7] =
        ["kind", "p", "value", "center_x", "center_y", "size", "family"];

    pub fn csv_row(&self) -> [String; 7] {
        let c = self.argmax.center();
        [
            self.kind.tag().to_string(),
            self.p.to_string(),
            self.value.to_string(),
            c[0].to_string(),
            c[1].to_string(),
            self.argmax.size().to_string(),
            self.family.clone(),
        ]
    }
}

/// The functional's value on a single region.
pub fn cube_value(kind: Functional, p: f64, f: &GridFunction, w: &Weight, region: &Region) -> Result<f64> {
    region.check(f)?;
    if region.is_empty() {
        return Err(Error::EmptyRegion);
    }
    Ok(single(kind, p, f.values(), w, region))
}

fn single(kind: Functional, p: f64, f: &[f64], w: &Weight, region: &Region) -> f64 {
    let idx = region.indices();
    let wv = w.values();
    let vol = region.spec().cell_volume();
    let mass = || weighted_measure(w, region);
    match kind {
        Functional::Bmo => {
            let mean = idx.iter().map(|&i| f[i]).sum::<f64>() / idx.len() as f64;
            idx.iter().map(|&i| (f[i] - mean).abs()).sum::<f64>() * vol / mass()
        }
        Functional::Blo => {
            let min = idx.iter().map(|&i| f[i]).fold(f64::INFINITY, f64::min);
            idx.iter().map(|&i| f[i] - min).sum::<f64>() * vol / mass()
        }
        Functional::BmoP | Functional::BloP => {
            let center = if kind == Functional::BmoP {
                idx.iter().map(|&i| f[i]).sum::<f64>() / idx.len() as f64
            } else {
                idx.iter().map(|&i| f[i]).fold(f64::INFINITY, f64::min)
            };
            let s: f64 = idx
                .iter()
                .map(|&i| (f[i] - center).abs().powf(p) * wv[i].powf(1.0 - p))
                .sum();
            (s * vol / mass()).powf(1.0 / p)
        }
        Functional::LinfW => {
            let wmin = idx.iter().map(|&i| wv[i]).fold(f64::INFINITY, f64::min);
            let fmax = idx.iter().map(|&i| f[i].abs()).fold(0.0, f64::max);
            fmax / wmin
        }
    }
}

fn sup(kind: Functional, p: f64, f: &GridFunction, w: &Weight, family: &CubeFamily) -> Result<OscillationReport> {
    family.check(f.spec())?;
    family.check(w.spec())?;
    let vals = f.values();
    let (value, k) = family
        .members()
        .par_iter()
        .enumerate()
        .map(|(k, m)| (single(kind, p, vals, w, m.region()), k))
        .reduce(
            || (f64::NEG_INFINITY, usize::MAX),
            |a, b| {
                // Ties go to the earliest member so the report is deterministic.
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(OscillationReport {
        kind,
        p,
        value,
        argmax: family.members()[k].shape,
        family: family.descriptor().to_string(),
    })
}

/// `max_Q ω(Q)^{-1} Σ_Q |f − f_Q| h^n`.
pub fn bmo_norm(f: &GridFunction, w: &Weight, family: &CubeFamily) -> Result<OscillationReport> {
    sup(Functional::Bmo, 1.0, f, w, family)
}

/// `max_Q ω(Q)^{-1} Σ_Q (f − min_Q f) h^n`.
pub fn blo_constant(f: &GridFunction, w: &Weight, family: &CubeFamily) -> Result<OscillationReport> {
    sup(Functional::Blo, 1.0, f, w, family)
}

fn check_p(p: f64) -> Result<()> {
    if p >= 1.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("p must be at least 1, got {p}")))
    }
}

pub fn bmo_p_norm(f: &GridFunction, w: &Weight, p: f64, family: &CubeFamily) -> Result<OscillationReport> {
    check_p(p)?;
    if p == 1.0 {
        return bmo_norm(f, w, family);
    }
    sup(Functional::BmoP, p, f, w, family)
}

pub fn blo_p_norm(f: &GridFunction, w: &Weight, p: f64, family: &CubeFamily) -> Result<OscillationReport> {
    check_p(p)?;
    if p == 1.0 {
        return blo_constant(f, w, family);
    }
    sup(Functional::BloP, p, f, w, family)
}

/// `max_Q (min_Q ω)^{-1} max_Q |f|`.
pub fn linf_weighted_norm(f: &GridFunction, w: &Weight, family: &CubeFamily) -> Result<OscillationReport> {
    sup(Functional::LinfW, 1.0, f, w, family)
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaRow {
    pub k: u32,
    /// `m(2^k Q)^{-1} Σ_{2^k Q} |f − f_Q| h^n`
    pub measured: f64,
    /// `max(k, 1) [ω]_{A1} min_Q ω ‖f‖_{BMO(ω)}`
    pub scale: f64,
}

impl LemmaRow {
    pub fn ratio(&self) -> f64 {
        if self.scale > 0.0 {
            self.measured / self.scale
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaReport {
    pub rows: Vec<LemmaRow>,
}

impl LemmaReport {
    /// Smallest `C` with `measured <= C k [ω]_{A1} min_Q ω ‖f‖` for all `k >= 1`.
    pub fn feasible_constant(&self) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.k >= 1)
            .map(LemmaRow::ratio)
            .fold(0.0, f64::max)
    }

    /// The `k = 0` ratio, bounded by 1.
    pub fn base_ratio(&self) -> Option<f64> {
        self.rows.iter().find(|r| r.k == 0).map(LemmaRow::ratio)
    }
}

/// Mean oscillation of `f` about `f_Q` over the dilates `2^k Q`, `k <= k_max`,
/// compared with `k [ω]_{A1} min_Q ω ‖f‖_{BMO(ω)}`. Dilates that no longer fit
/// in the box end the sweep.
pub fn bmo_lemma_bounds(
    f: &GridFunction,
    w: &Weight,
    base: &Cube,
    k_max: u32,
    a1: f64,
    bmo: f64,
) -> Result<LemmaReport> {
    let spec = *f.spec();
    let v = f.values();
    let q = base.region(&spec, true);
    if q.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let fq = q.indices().iter().map(|&i| v[i]).sum::<f64>() / q.len() as f64;
    let wmin = q.indices().iter().map(|&i| w.values()[i]).fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    for k in 0..=k_max {
        let t = 2f64.powi(k as i32);
        if base.side * t > spec.side() * (1.0 + 1e-12) {
            break;
        }
        let big = dilate_cube(base, t)?.region(&spec, true);
        let measured = big.indices().iter().map(|&i| (v[i] - fq).abs()).sum::<f64>() / big.len() as f64;
        rows.push(LemmaRow {
            k,
            measured,
            scale: (k.max(1) as f64) * a1 * wmin * bmo,
        });
    }
    Ok(LemmaReport { rows })
}
