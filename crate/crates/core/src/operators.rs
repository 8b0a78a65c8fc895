//! Square operators 𝒢, 𝒮, 𝒢*_λ and S_{2^ℓ} as quadratures over a
//! logarithmic scale grid, with their low/high scale splits.

use std::fmt;
use std::sync::Arc;

use log::warn;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{GridFunction, GridSpec};
use crate::kernels::{Dilated, Kernel};
use crate::quadrature::composite_unit;

/// Grids with at least this many samples convolve through the FFT.
pub const FFT_THRESHOLD: usize = 256;

/// Log-midpoint nodes `t_j = t_min exp((j + 1/2) Δ)` with weights `Δ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleGrid {
    t_min: f64,
    t_max: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ScaleGrid {
    pub fn log(t_min: f64, t_max: f64, count: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) || count == 0 {
            return Err(Error::InvalidArgument(format!(
                "scale grid needs 0 < t_min < t_max and M > 0 (got {t_min}, {t_max}, {count})"
            )));
        }
        let step = (t_max / t_min).ln() / count as f64;
        let nodes = (0..count)
            .map(|j| t_min * ((j as f64 + 0.5) * step).exp())
            .collect();
        Ok(Self {
            t_min,
            t_max,
            nodes,
            weights: vec![step; count],
        })
    }

    /// `t_min = 2h`, `t_max = L/4`.
    pub fn default_for(spec: &GridSpec, count: usize) -> Result<Self> {
        Self::log(2.0 * spec.spacing(), spec.side() / 4.0, count)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

impl fmt::Display for ScaleGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tmin={} tmax={} M={}", self.t_min, self.t_max, self.len())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OpKind {
    G,
    S,
    GStar { lambda: f64 },
    DilatedS { ell: u32 },
}

impl OpKind {
    pub fn tag(&self) -> &'static str {
        match self {
            OpKind::G => "g",
            OpKind::S => "s",
            OpKind::GStar { .. } => "gstar",
            OpKind::DilatedS { .. } => "s_dilated",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpKind::G => write!(f, "G"),
            OpKind::S => write!(f, "S"),
            OpKind::GStar { lambda } => write!(f, "G*[lambda={lambda}]"),
            OpKind::DilatedS { ell } => write!(f, "S[2^{ell}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Band {
    Full,
    /// Scales `t < r`.
    Low,
    /// Scales `t >= r`.
    High,
}

#[derive(Debug, Clone)]
pub struct SquareFunctionResult {
    pub values: GridFunction,
    pub op: OpKind,
    pub kernel: String,
    pub scales: ScaleGrid,
    pub band: Band,
    pub split_radius: Option<f64>,
}

impl SquareFunctionResult {
    /// Metadata lines for the CSV serialization.
    pub fn header_lines(&self) -> Vec<String> {
        let lambda = match self.op {
            OpKind::GStar { lambda } => lambda.to_string(),
            _ => "-".into(),
        };
        let mut first = format!("op={} lambda={lambda} {}", self.op.tag(), self.scales);
        if let OpKind::DilatedS { ell } = self.op {
            first.push_str(&format!(" ell={ell}"));
        }
        let mut lines = vec![first, format!("kernel={}", self.kernel)];
        if let Some(r) = self.split_radius {
            lines.push(format!("band={:?} r={r}", self.band).to_lowercase());
        }
        lines
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        self.values.write_csv(out, &self.header_lines())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvPath {
    Auto,
    Fft,
    Direct,
}

/// Forward/inverse FFT plans for an `n`-dimensional periodic grid.
struct Fourier {
    spec: GridSpec,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl Fourier {
    fn new(spec: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            spec,
            fwd: planner.plan_fft_forward(spec.res()),
            inv: planner.plan_fft_inverse(spec.res()),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let n = self.spec.res();
        plan.process(data);
        if self.spec.dim() == 2 {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for c in 0..n {
                for r in 0..n {
                    col[r] = data[r * n + c];
                }
                plan.process(&mut col);
                for r in 0..n {
                    data[r * n + c] = col[r];
                }
            }
        }
        if inverse {
            let scale = 1.0 / self.spec.len() as f64;
            for z in data.iter_mut() {
                *z *= scale;
            }
        }
    }

    fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.run(&mut data, false);
        data
    }

    fn inverse_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        self.run(&mut data, true);
        data.into_iter().map(|z| z.re).collect()
    }
}

fn signed(k: usize, n: usize) -> f64 {
    if k <= n / 2 {
        k as f64
    } else {
        k as f64 - n as f64
    }
}

/// `|k|/L` for every DFT index in row-major order.
fn frequency_magnitudes(spec: &GridSpec) -> Vec<f64> {
    let n = spec.res();
    let l = spec.side();
    (0..spec.len())
        .map(|i| {
            let a = spec.axes(i);
            match spec.dim() {
                1 => signed(a[0], n).abs() / l,
                _ => signed(a[0], n).hypot(signed(a[1], n)) / l,
            }
        })
        .collect()
}

/// Periodic convolution `ψ_t * f` with `f` extended periodically.
///
/// The kernel acts through its Fourier multiplier `ψ̂(t k / L)`, so the
/// periodisation `Σ_m ψ_t(x + mL)` is exact up to the grid's band limit.
pub fn convolve(psi_t: &Dilated<'_>, f: &GridFunction) -> GridFunction {
    convolve_path(psi_t, f, ConvPath::Auto)
}

pub fn convolve_path(psi_t: &Dilated<'_>, f: &GridFunction, path: ConvPath) -> GridFunction {
    let spec = *f.spec();
    let rho = frequency_magnitudes(&spec);
    let mult: Vec<f64> = rho.iter().map(|&r| psi_t.fourier(r)).collect();
    let values = match resolve(path, &spec) {
        ConvPath::Direct => direct_convolve(&spec, f.values(), &mult),
        _ => {
            let fourier = Fourier::new(spec);
            apply_multiplier(&fourier, &fourier.forward_real(f.values()), &mult)
        }
    };
    GridFunction::new(spec, values)
        .expect("convolution of finite data is finite")
        .with_periodic(true)
}

fn resolve(path: ConvPath, spec: &GridSpec) -> ConvPath {
    match path {
        ConvPath::Auto if spec.len() >= FFT_THRESHOLD => ConvPath::Fft,
        ConvPath::Auto => ConvPath::Direct,
        p => p,
    }
}

fn apply_multiplier(fourier: &Fourier, spectrum: &[Complex64], mult: &[f64]) -> Vec<f64> {
    let prod = spectrum.iter().zip(mult).map(|(z, m)| z * m).collect();
    fourier.inverse_real(prod)
}

/// Circular sum against the kernel's spatial samples, recovered from the
/// multiplier by an explicit inverse DFT.
fn direct_convolve(spec: &GridSpec, f: &[f64], mult: &[f64]) -> Vec<f64> {
    let n = spec.res();
    let len = spec.len();
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    let kappa: Vec<f64> = (0..len)
        .map(|d| {
            let da = spec.axes(d);
            let s: f64 = (0..len)
                .map(|k| {
                    let ka = spec.axes(k);
                    let phase = tau * ((ka[0] * da[0] + ka[1] * da[1]) % n) as f64;
                    mult[k] * phase.cos()
                })
                .sum();
            s / len as f64
        })
        .collect();
    circular(spec, f, &kappa)
}

fn circular(spec: &GridSpec, f: &[f64], kappa: &[f64]) -> Vec<f64> {
    let n = spec.res();
    (0..spec.len())
        .map(|x| {
            let xa = spec.axes(x);
            (0..spec.len())
                .map(|y| {
                    let ya = spec.axes(y);
                    let d = spec.index([(xa[0] + n - ya[0]) % n, (xa[1] + n - ya[1]) % n]);
                    kappa[d] * f[y]
                })
                .sum()
        })
        .collect()
}

/// The convolution fields `u_j = ψ_{t_j} * f` shared by all operators.
pub struct ScaleFields<'k> {
    kernel: &'k Kernel,
    spec: GridSpec,
    scales: ScaleGrid,
    fields: Vec<Vec<f64>>,
    path: ConvPath,
}

impl<'k> ScaleFields<'k> {
    pub fn compute(kernel: &'k Kernel, f: &GridFunction, scales: &ScaleGrid) -> Result<Self> {
        Self::compute_path(kernel, f, scales, ConvPath::Auto)
    }

    pub fn compute_path(
        kernel: &'k Kernel,
        f: &GridFunction,
        scales: &ScaleGrid,
        path: ConvPath,
    ) -> Result<Self> {
        kernel.require_certified()?;
        let spec = *f.spec();
        if kernel.dim() != spec.dim() {
            return Err(Error::InvalidArgument(format!(
                "kernel is {}-dimensional but the grid is {}-dimensional",
                kernel.dim(),
                spec.dim()
            )));
        }
        let path = resolve(path, &spec);
        let rho = frequency_magnitudes(&spec);
        let fields = match path {
            ConvPath::Direct => scales
                .nodes()
                .par_iter()
                .map(|&t| {
                    let mult: Vec<f64> = rho.iter().map(|&r| kernel.fourier(t * r)).collect();
                    direct_convolve(&spec, f.values(), &mult)
                })
                .collect(),
            _ => {
                let fourier = Fourier::new(spec);
                let spectrum = fourier.forward_real(f.values());
                scales
                    .nodes()
                    .par_iter()
                    .map(|&t| {
                        let mult: Vec<f64> = rho.iter().map(|&r| kernel.fourier(t * r)).collect();
                        apply_multiplier(&fourier, &spectrum, &mult)
                    })
                    .collect()
            }
        };
        Ok(Self {
            kernel,
            spec,
            scales: scales.clone(),
            fields,
            path,
        })
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn scales(&self) -> &ScaleGrid {
        &self.scales
    }

    fn selected(&self, band: Band, r: f64) -> Vec<usize> {
        (0..self.scales.len())
            .filter(|&j| {
                let t = self.scales.nodes()[j];
                match band {
                    Band::Full => true,
                    Band::Low => t < r,
                    Band::High => t >= r,
                }
            })
            .collect()
    }

    fn result(&self, op: OpKind, band: Band, r: Option<f64>, squared: Vec<f64>) -> SquareFunctionResult {
        let values = squared.into_iter().map(|v| v.max(0.0).sqrt()).collect();
        SquareFunctionResult {
            values: GridFunction::new(self.spec, values)
                .expect("square function values are finite")
                .with_periodic(true),
            op,
            kernel: self.kernel.name().to_string(),
            scales: self.scales.clone(),
            band,
            split_radius: r,
        }
    }

    pub fn evaluate(&self, op: OpKind) -> Result<SquareFunctionResult> {
        self.evaluate_band(op, Band::Full, f64::NAN)
    }

    fn evaluate_band(&self, op: OpKind, band: Band, r: f64) -> Result<SquareFunctionResult> {
        let js = self.selected(band, r);
        let radius = (band != Band::Full).then_some(r);
        let squared = match op {
            OpKind::G => {
                let mut acc = vec![0.0; self.spec.len()];
                for &j in &js {
                    let w = self.scales.weights()[j];
                    for (a, u) in acc.iter_mut().zip(&self.fields[j]) {
                        *a += w * u * u;
                    }
                }
                acc
            }
            OpKind::S => self.window_sum(&js, Window::Cone { aperture: 1.0 }),
            OpKind::DilatedS { ell } => {
                if ell < 1 {
                    return Err(Error::InvalidArgument("aperture exponent must be >= 1".into()));
                }
                self.window_sum(&js, Window::Cone { aperture: 2f64.powi(ell as i32) })
            }
            OpKind::GStar { lambda } => {
                check_lambda(self.kernel, lambda)?;
                let power = lambda * self.spec.dim() as f64;
                self.window_sum(&js, Window::Decay { power })
            }
        };
        Ok(self.result(op, band, radius, squared))
    }

    /// `Σ_j w_j t_j^{-n} Σ_y W(|x - y|, t_j) |u_j(y)|² h^n` for every `x`.
    fn window_sum(&self, js: &[usize], window: Window) -> Vec<f64> {
        let spec = self.spec;
        let len = spec.len();
        let h_n = spec.cell_volume();
        let dist: Vec<f64> = (0..len).map(|d| spec.offset_distance(spec.axes(d))).collect();
        let kernel_for = |t: f64, w: f64| -> Vec<f64> {
            let c = w * h_n / t.powi(spec.dim() as i32);
            dist.iter().map(|&d| c * window.eval(d, t)).collect()
        };
        if js.is_empty() {
            return vec![0.0; len];
        }
        match self.path {
            ConvPath::Direct => {
                let mut acc = vec![0.0; len];
                for &j in js {
                    let kap = kernel_for(self.scales.nodes()[j], self.scales.weights()[j]);
                    let sq: Vec<f64> = self.fields[j].iter().map(|u| u * u).collect();
                    for (a, v) in acc.iter_mut().zip(circular(&spec, &sq, &kap)) {
                        *a += v;
                    }
                }
                acc
            }
            _ => {
                let fourier = Fourier::new(spec);
                let mut total = vec![Complex64::new(0.0, 0.0); len];
                for chunk in js.chunks(16) {
                    let parts: Vec<Vec<Complex64>> = chunk
                        .par_iter()
                        .map(|&j| {
                            let kap = kernel_for(self.scales.nodes()[j], self.scales.weights()[j]);
                            let kh = fourier.forward_real(&kap);
                            let sq: Vec<f64> = self.fields[j].iter().map(|u| u * u).collect();
                            let sh = fourier.forward_real(&sq);
                            kh.iter().zip(&sh).map(|(a, b)| a * b).collect()
                        })
                        .collect();
                    for part in parts {
                        for (x, y) in total.iter_mut().zip(part) {
                            *x += y;
                        }
                    }
                }
                fourier.inverse_real(total)
            }
        }
    }

    /// Low (`t < r`) and high (`t >= r`) parts of an operator.
    pub fn split(&self, op: OpKind, r: f64) -> Result<(SquareFunctionResult, SquareFunctionResult)> {
        if !(r > self.scales.t_min() && r <= self.scales.t_max()) {
            return Err(Error::InvalidArgument(format!(
                "split radius {r} outside the scale range ({}, {}]",
                self.scales.t_min(),
                self.scales.t_max()
            )));
        }
        Ok((
            self.evaluate_band(op, Band::Low, r)?,
            self.evaluate_band(op, Band::High, r)?,
        ))
    }
}

#[derive(Debug, Clone, Copy)]
enum Window {
    /// `|x - y| < aperture * t`
    Cone { aperture: f64 },
    /// `(t / (t + |x - y|))^power`
    Decay { power: f64 },
}

impl Window {
    fn eval(&self, d: f64, t: f64) -> f64 {
        match *self {
            Window::Cone { aperture } => {
                if d < aperture * t {
                    1.0
                } else {
                    0.0
                }
            }
            Window::Decay { power } => (t / (t + d)).powf(power),
        }
    }
}

/// The λ above which the BLO bound for 𝒢*_λ is asserted.
pub fn g_star_threshold(kernel: &Kernel) -> f64 {
    3.0 + (2.0 * kernel.delta() + 2.0 * kernel.gamma()) / kernel.dim() as f64
}

fn check_lambda(kernel: &Kernel, lambda: f64) -> Result<()> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    if lambda <= g_star_threshold(kernel) {
        warn!(
            "G*: lambda = {lambda} is at or below {} where the BLO bound is not guaranteed",
            g_star_threshold(kernel)
        );
    }
    Ok(())
}

pub fn g_function(kernel: &Kernel, f: &GridFunction, scales: &ScaleGrid) -> Result<SquareFunctionResult> {
    ScaleFields::compute(kernel, f, scales)?.evaluate(OpKind::G)
}

pub fn area_integral(kernel: &Kernel, f: &GridFunction, scales: &ScaleGrid) -> Result<SquareFunctionResult> {
    ScaleFields::compute(kernel, f, scales)?.evaluate(OpKind::S)
}

pub fn g_star(
    kernel: &Kernel,
    f: &GridFunction,
    lambda: f64,
    scales: &ScaleGrid,
) -> Result<SquareFunctionResult> {
    check_lambda(kernel, lambda)?;
    ScaleFields::compute(kernel, f, scales)?.evaluate(OpKind::GStar { lambda })
}

pub fn dilated_area_integral(
    kernel: &Kernel,
    f: &GridFunction,
    ell: u32,
    scales: &ScaleGrid,
) -> Result<SquareFunctionResult> {
    ScaleFields::compute(kernel, f, scales)?.evaluate(OpKind::DilatedS { ell })
}

pub fn split_at_scale(
    op: OpKind,
    kernel: &Kernel,
    f: &GridFunction,
    r: f64,
    scales: &ScaleGrid,
) -> Result<(SquareFunctionResult, SquareFunctionResult)> {
    ScaleFields::compute(kernel, f, scales)?.split(op, r)
}

/// `∫_a^b |ψ̂(s)|² ds/s`, with `b = ∞` allowed.
pub fn scale_energy(kernel: &Kernel, a: f64, b: f64) -> f64 {
    let lo = if a > 0.0 { a.ln() } else { -60.0 };
    let hi = if b.is_finite() { b.ln() } else { 8.0 };
    if hi <= lo {
        return 0.0;
    }
    let (u, w) = composite_unit(16, 64);
    u.iter()
        .zip(&w)
        .map(|(&u, &w)| {
            let s = (lo + u * (hi - lo)).exp();
            let v = kernel.fourier(s);
            w * v * v
        })
        .sum::<f64>()
        * (hi - lo)
}

/// L² bookkeeping of the g-function's scale truncation, frequency by
/// frequency via Parseval.
#[derive(Debug, Clone, Serialize)]
pub struct TruncationReport {
    /// `‖𝒢f‖₂²` of the exact (untruncated) continuous-scale operator.
    pub exact_energy: f64,
    /// Energy computed by the discrete scale grid.
    pub grid_energy: f64,
    /// Energy on scales below `t_min`.
    pub below: f64,
    /// Energy on scales above `t_max`.
    pub above: f64,
    /// `|grid − exact| / exact`.
    pub relative_error: f64,
}

pub fn truncation_report(kernel: &Kernel, f: &GridFunction, scales: &ScaleGrid) -> Result<TruncationReport> {
    let spec = *f.spec();
    let fourier = Fourier::new(spec);
    let spectrum = fourier.forward_real(f.values());
    let rho = frequency_magnitudes(&spec);
    // Parseval for the DFT: Σ|f|² h^n = (h^n / N^n) Σ|F_k|².
    let norm = spec.cell_volume() / spec.len() as f64;
    let mut cache: std::collections::BTreeMap<u64, (f64, f64, f64, f64)> = Default::default();
    let (mut exact, mut grid, mut below, mut above) = (0.0, 0.0, 0.0, 0.0);
    for (z, &r) in spectrum.iter().zip(&rho) {
        let e = z.norm_sqr() * norm;
        if e == 0.0 || r == 0.0 {
            continue;
        }
        let &mut (ex, gr, lo, hi) = cache.entry(r.to_bits()).or_insert_with(|| {
            let ex = scale_energy(kernel, 0.0, f64::INFINITY);
            let gr: f64 = scales
                .nodes()
                .iter()
                .zip(scales.weights())
                .map(|(&t, &w)| w * kernel.fourier(t * r).powi(2))
                .sum();
            let lo = scale_energy(kernel, 0.0, scales.t_min() * r);
            let hi = scale_energy(kernel, scales.t_max() * r, f64::INFINITY);
            (ex, gr, lo, hi)
        });
        exact += e * ex;
        grid += e * gr;
        below += e * lo;
        above += e * hi;
    }
    let relative_error = if exact > 0.0 { (grid - exact).abs() / exact } else { 0.0 };
    Ok(TruncationReport {
        exact_energy: exact,
        grid_energy: grid,
        below,
        above,
        relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::CertifyOptions;
    use std::f64::consts::PI;

    fn kernel(dim: usize) -> Kernel {
        Kernel::by_name("poisson-derivative", dim)
            .unwrap()
            .certified(&CertifyOptions {
                probe_budget: 1000,
                quad_res: Some(1 << 10),
                ..CertifyOptions::default()
            })
            .unwrap()
    }

    fn sine(n: usize) -> GridFunction {
        let s = GridSpec::new(1, 1.0, n).unwrap();
        GridFunction::from_fn(s, |p| (2.0 * PI * p[0]).sin()).unwrap()
    }

    fn l2(v: &[f64], h: f64) -> f64 {
        (v.iter().map(|x| x * x).sum::<f64>() * h).sqrt()
    }

    #[test]
    fn scale_grid_invariants() {
        let g = ScaleGrid::log(0.01, 0.25, 40).unwrap();
        assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        assert!(g.weights().iter().all(|&w| w > 0.0));
        assert!((g.total_weight() - (0.25f64 / 0.01).ln()).abs() < 1e-12);
        assert!(g.nodes()[0] > 0.01 && *g.nodes().last().unwrap() < 0.25);
        assert!(ScaleGrid::log(0.2, 0.1, 4).is_err());
        assert!(ScaleGrid::log(0.1, 0.2, 0).is_err());
    }

    #[test]
    fn convolution_paths_agree() {
        let k = kernel(1);
        for n in [16, 64, 256] {
            let s = GridSpec::new(1, 1.0, n).unwrap();
            let f = GridFunction::from_fn(s, |p| (p[0] * 7.3).sin() + (p[0] * p[0] * 3.0).cos()).unwrap();
            let d = k.dilate(0.05).unwrap();
            let a = convolve_path(&d, &f, ConvPath::Fft);
            let b = convolve_path(&d, &f, ConvPath::Direct);
            for (x, y) in a.values().iter().zip(b.values()) {
                assert!((x - y).abs() < 1e-10);
            }
        }
        let k2 = kernel(2);
        let s = GridSpec::new(2, 1.0, 8).unwrap();
        let f = GridFunction::from_fn(s, |p| (p[0] * 5.0).sin() * p[1]).unwrap();
        let d = k2.dilate(0.3).unwrap();
        let a = convolve_path(&d, &f, ConvPath::Fft);
        let b = convolve_path(&d, &f, ConvPath::Direct);
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn convolution_of_constants_and_spikes() {
        let k = kernel(1);
        let s = GridSpec::new(1, 8.0, 512).unwrap();
        let d = k.dilate(0.4).unwrap();
        let zero = convolve(&d, &GridFunction::constant(s, 0.0).unwrap());
        assert!(zero.values().iter().all(|&v| v == 0.0));
        let one = convolve(&d, &GridFunction::constant(s, 1.0).unwrap());
        assert!(one.values().iter().all(|v| v.abs() < 1e-6));

        let h = s.spacing();
        let x0 = 256;
        let mut spike = vec![0.0; 512];
        spike[x0] = 1.0 / h;
        let out = convolve(&d, &GridFunction::new(s, spike).unwrap());
        for i in [x0, x0 + 3, x0 + 20, x0 - 50] {
            let x = (i as f64 - x0 as f64) * h;
            // Periodised ψ_t; the images decay like t/(π m² L²).
            let want: f64 = (-40_000..=40_000).map(|m| d.eval([x + m as f64 * 8.0, 0.0])).sum();
            assert!((out.values()[i] - want).abs() < 1e-6, "{i}: {} vs {want}", out.values()[i]);
        }
    }

    #[test]
    fn g_function_of_sine_matches_parseval() {
        // ‖𝒢f‖₂ = ½‖f‖₂ for the Poisson derivative and mean-zero f.
        let k = kernel(1);
        assert!((scale_energy(&k, 0.0, f64::INFINITY) - 0.25).abs() < 1e-12);
        let f = sine(1024);
        let h = f.spec().spacing();
        let scales = ScaleGrid::log(1e-5, 1e3, 400).unwrap();
        let g = g_function(&k, &f, &scales).unwrap();
        let ratio = l2(g.values.values(), h) / l2(f.values(), h);
        assert!((ratio - 0.5).abs() < 1e-6, "{ratio}");
        let rep = truncation_report(&k, &f, &scales).unwrap();
        assert!(rep.relative_error < 1e-5);
        assert!((rep.exact_energy - 0.25 * 0.5).abs() < 1e-9);
    }

    #[test]
    fn g_function_converges_in_m() {
        let k = kernel(1);
        let f = sine(512);
        let h = f.spec().spacing();
        let mut ratios = Vec::new();
        for m in [32, 64, 128] {
            let sc = ScaleGrid::default_for(f.spec(), m).unwrap();
            let g = g_function(&k, &f, &sc).unwrap();
            ratios.push(l2(g.values.values(), h) / l2(f.values(), h));
        }
        assert!((ratios[1] / ratios[0] - 1.0).abs() < 0.02);
        assert!((ratios[2] / ratios[1] - 1.0).abs() < 0.02);
    }

    #[test]
    fn operator_relations() {
        let k = kernel(1);
        let s = GridSpec::new(1, 1.0, 256).unwrap();
        let f = GridFunction::from_fn(s, |p| if p[0] < 0.3 { 1.0 } else { (9.0 * p[0]).cos() }).unwrap();
        let sc = ScaleGrid::default_for(&s, 32).unwrap();
        let fields = ScaleFields::compute(&k, &f, &sc).unwrap();
        let area = fields.evaluate(OpKind::S).unwrap();
        let lam = 8.0;
        let gs = fields.evaluate(OpKind::GStar { lambda: lam }).unwrap();
        let gs2 = fields.evaluate(OpKind::GStar { lambda: 10.0 }).unwrap();
        let c = 2f64.powf(lam / 2.0);
        for i in 0..s.len() {
            let (a, b, b2) = (area.values.values()[i], gs.values.values()[i], gs2.values.values()[i]);
            assert!(a >= 0.0 && b >= 0.0);
            assert!(a <= c * b * (1.0 + 1e-9) + 1e-12);
            assert!(b2 <= b * (1.0 + 1e-9) + 1e-12);
        }
        let mut prev = area.values.values().to_vec();
        for ell in 1..=4 {
            let d = fields.evaluate(OpKind::DilatedS { ell }).unwrap();
            for (x, p) in d.values.values().iter().zip(&prev) {
                assert!(*x >= p * (1.0 - 1e-9) - 1e-12);
            }
            prev = d.values.values().to_vec();
        }
        // 2^7 t_min = 1 > L/2: every cone covers the whole torus.
        let sat = fields.evaluate(OpKind::DilatedS { ell: 7 }).unwrap();
        let h = s.spacing();
        let flat: f64 = fields
            .fields()
            .iter()
            .zip(sc.nodes().iter().zip(sc.weights()))
            .map(|(u, (&t, &w))| w / t * u.iter().map(|v| v * v).sum::<f64>() * h)
            .sum();
        for v in sat.values.values() {
            assert!((v * v - flat).abs() <= 1e-10 * flat);
        }
    }

    #[test]
    fn splits_sandwich() {
        let k = kernel(1);
        let f = sine(256);
        let sc = ScaleGrid::default_for(f.spec(), 32).unwrap();
        let fields = ScaleFields::compute(&k, &f, &sc).unwrap();
        for op in [OpKind::G, OpKind::S] {
            let full = fields.evaluate(op).unwrap();
            let (lo, hi) = fields.split(op, 0.05).unwrap();
            for i in 0..256 {
                let (a, b, c) = (lo.values.values()[i], hi.values.values()[i], full.values.values()[i]);
                assert!(a <= c + 1e-12 && b <= c + 1e-12 && c <= a + b + 1e-12);
            }
            let (lo, hi) = fields.split(op, sc.t_max()).unwrap();
            assert!(hi.values.values().iter().all(|&v| v == 0.0));
            assert_eq!(lo.values.values(), full.values.values());
        }
        assert!(fields.split(OpKind::G, sc.t_min() / 2.0).is_err());
        assert!(fields.split(OpKind::G, 1.0).is_err());
    }

    #[test]
    fn uncertified_and_bad_lambda_rejected() {
        let raw = Kernel::by_name("poisson-derivative", 1).unwrap();
        let f = sine(64);
        let sc = ScaleGrid::default_for(f.spec(), 8).unwrap();
        assert!(matches!(g_function(&raw, &f, &sc), Err(Error::Uncertified(_))));
        let k = kernel(1);
        assert!(g_star(&k, &f, 0.0, &sc).is_err());
        assert!(g_star(&k, &f, 2.5, &sc).is_ok());
    }

    #[test]
    fn headers() {
        let k = kernel(1);
        let f = sine(64);
        let sc = ScaleGrid::log(0.05, 0.25, 8).unwrap();
        let r = g_star(&k, &f, 8.0, &sc).unwrap();
        assert_eq!(r.header_lines()[0], "op=gstar lambda=8 tmin=0.05 tmax=0.25 M=8");
    }
}
