//! Radial kernels ψ, their dilates ψ_t, and numerical certification of the
//! vanishing, size and smoothness conditions.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::Point;
use crate::quadrature::composite_unit;

/// Closed-form radial profiles. Each carries both its spatial formula and
/// its Fourier transform `ψ̂(ξ) = ∫ ψ(x) e^{-2πi x·ξ} dx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// `∂_t P_t |_{t=1}` for the Poisson kernel `P_t`.
    PoissonDerivative,
    /// `(|x|² − n) e^{−|x|²/2}`, the Laplacian of the Gaussian.
    GaussDerivative,
    /// `(1 − |x|²) e^{−|x|²/2}`.
    MexicanHat,
    /// `e^{−|x|²/2}`; has nonzero mass.
    Gaussian,
    Zero,
}

pub const KERNEL_NAMES: [&str; 5] = [
    "poisson-derivative",
    "gauss-derivative",
    "mexican-hat",
    "gaussian",
    "zero",
];

impl Profile {
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "poisson-derivative" => Profile::PoissonDerivative,
            "gauss-derivative" => Profile::GaussDerivative,
            "mexican-hat" => Profile::MexicanHat,
            "gaussian" => Profile::Gaussian,
            "zero" => Profile::Zero,
            _ => {
                return Err(Error::Unknown {
                    kind: "kernel",
                    name: name.to_string(),
                    valid: KERNEL_NAMES.join(", "),
                })
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Profile::PoissonDerivative => "poisson-derivative",
            Profile::GaussDerivative => "gauss-derivative",
            Profile::MexicanHat => "mexican-hat",
            Profile::Gaussian => "gaussian",
            Profile::Zero => "zero",
        }
    }

    fn spatial(&self, dim: usize, cn: f64, r2: f64) -> f64 {
        let n = dim as f64;
        match self {
            Profile::PoissonDerivative => {
                let s = 1.0 + r2;
                cn * (s.powf(-(n + 1.0) / 2.0) - (n + 1.0) * s.powf(-(n + 3.0) / 2.0))
            }
            Profile::GaussDerivative => (r2 - n) * (-r2 / 2.0).exp(),
            Profile::MexicanHat => (1.0 - r2) * (-r2 / 2.0).exp(),
            Profile::Gaussian => (-r2 / 2.0).exp(),
            Profile::Zero => 0.0,
        }
    }

    fn fourier(&self, dim: usize, rho: f64) -> f64 {
        let n = dim as f64;
        let g = (2.0 * PI).powf(n / 2.0) * (-2.0 * PI * PI * rho * rho).exp();
        let q = 4.0 * PI * PI * rho * rho;
        match self {
            Profile::PoissonDerivative => -2.0 * PI * rho * (-2.0 * PI * rho).exp(),
            Profile::GaussDerivative => -q * g,
            Profile::MexicanHat => (1.0 - n + q) * g,
            Profile::Gaussian => g,
            Profile::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Kernel {
    profile: Profile,
    dim: usize,
    cn: f64,
    delta: f64,
    gamma: f64,
    certification: Option<Certification>,
}

impl Kernel {
    pub fn new(profile: Profile, dim: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        let n = dim as f64;
        let cn = gamma((n + 1.0) / 2.0) / PI.powf((n + 1.0) / 2.0);
        Ok(Self {
            profile,
            dim,
            cn,
            delta: 1.0,
            gamma: 1.0,
            certification: None,
        })
    }

    pub fn by_name(name: &str, dim: usize) -> Result<Self> {
        Self::new(Profile::from_name(name)?, dim)
    }

    /// Overrides the declared decay and smoothness exponents.
    pub fn with_exponents(mut self, delta: f64, gamma: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "decay exponent must be positive (got {delta}); the size bound is not integrable"
            )));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "smoothness exponent must lie in (0, 1], got {gamma}"
            )));
        }
        self.delta = delta;
        self.gamma = gamma;
        self.certification = None;
        Ok(self)
    }

    pub fn name(&self) -> &'static str {
        self.profile.name()
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.eval_radius2(norm2(x, self.dim))
    }

    pub fn eval_radius2(&self, r2: f64) -> f64 {
        self.profile.spatial(self.dim, self.cn, r2)
    }

    /// `ψ̂` at frequency magnitude `rho`.
    pub fn fourier(&self, rho: f64) -> f64 {
        self.profile.fourier(self.dim, rho)
    }

    pub fn dilate(&self, t: f64) -> Result<Dilated<'_>> {
        Dilated::new(self, t)
    }

    pub fn certification(&self) -> Option<&Certification> {
        self.certification.as_ref()
    }

    pub fn is_certified(&self) -> bool {
        self.certification.as_ref().is_some_and(|c| c.passed)
    }

    /// Runs [`certify`] and attaches the report.
    pub fn certified(mut self, opts: &CertifyOptions) -> Result<Self> {
        let report = certify(&self, opts)?;
        self.certification = Some(report);
        Ok(self)
    }

    pub(crate) fn require_certified(&self) -> Result<()> {
        if self.is_certified() {
            Ok(())
        } else {
            Err(Error::Uncertified(self.name().to_string()))
        }
    }
}

fn norm2(x: Point, dim: usize) -> f64 {
    match dim {
        1 => x[0] * x[0],
        _ => x[0] * x[0] + x[1] * x[1],
    }
}

/// `t^{-n} ψ(x/t)`.
#[derive(Debug, Clone, Copy)]
pub struct Dilated<'a> {
    kernel: &'a Kernel,
    t: f64,
}

impl<'a> Dilated<'a> {
    fn new(kernel: &'a Kernel, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::InvalidArgument(format!("dilation must be positive, got {t}")));
        }
        Ok(Self { kernel, t })
    }

    pub fn scale(&self) -> f64 {
        self.t
    }

    pub fn eval(&self, x: Point) -> f64 {
        let n = self.kernel.dim as i32;
        let r2 = norm2(x, self.kernel.dim) / (self.t * self.t);
        self.kernel.eval_radius2(r2) / self.t.powi(n)
    }

    pub fn fourier(&self, rho: f64) -> f64 {
        self.kernel.fourier(self.t * rho)
    }

    pub fn dilate(&self, s: f64) -> Result<Self> {
        Dilated::new(self.kernel, self.t * s)
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub probe_budget: usize,
    pub tol_vanish: f64,
    /// Half-width `R` of the probe box `[-R, R]^n`.
    pub box_half: f64,
    /// Midpoint samples per axis for the box quadrature; `None` picks
    /// 2^14 in one dimension and 2^11 in two.
    pub quad_res: Option<usize>,
    /// Smallest smoothness increment `|h|`.
    pub h_min: f64,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            probe_budget: 4096,
            tol_vanish: 1e-6,
            box_half: 64.0,
            quad_res: None,
            h_min: 1.0 / 128.0,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Certification {
    pub kernel: String,
    pub dim: usize,
    pub delta: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    /// Argmax probe of the size ratio.
    pub c1_at: Point,
    /// Argmax probe pair `(x, h)` of the smoothness ratio.
    pub c2_at: (Point, Point),
    /// `|∫ψ|` estimate: box quadrature plus exterior tail.
    pub residual: f64,
    pub box_integral: f64,
    pub tail_integral: f64,
    pub tol_vanish: f64,
    pub size_probes: usize,
    pub smoothness_probes: usize,
    pub passed: bool,
    pub failures: Vec<String>,
}

/// Estimates `C₁`, `C₂` and the vanishing residual of `kernel`.
pub fn certify(kernel: &Kernel, opts: &CertifyOptions) -> Result<Certification> {
    if opts.probe_budget < 1000 {
        return Err(Error::InvalidArgument(format!(
            "probe budget must be at least 1000, got {}",
            opts.probe_budget
        )));
    }
    if !(kernel.delta > 0.0) {
        return Err(Error::InvalidArgument("non-integrable decay exponent".into()));
    }
    let (box_integral, tail_integral) = mass(kernel, opts);
    let residual = (box_integral + tail_integral).abs();

    let n = kernel.dim as f64;
    let (delta, gam) = (kernel.delta, kernel.gamma);
    let size_pts = probe_points(kernel.dim, opts.box_half, opts.probe_budget, opts.seed);
    let (c1, c1_at) = size_pts
        .par_iter()
        .map(|&x| {
            let r = norm2(x, kernel.dim).sqrt();
            (kernel.eval(x).abs() * (1.0 + r).powf(n + delta), x)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, [0.0, 0.0]), max_by_first);

    let pairs = smoothness_pairs(kernel.dim, opts, opts.seed ^ 0x9e37_79b9_7f4a_7c15);
    let (c2, c2_at) = pairs
        .par_iter()
        .map(|&(x, h)| {
            let r = norm2(x, kernel.dim).sqrt();
            let hn = norm2(h, kernel.dim).sqrt();
            let diff = (kernel.eval([x[0] + h[0], x[1] + h[1]]) - kernel.eval(x)).abs();
            (diff * (1.0 + r).powf(n + delta + gam) / hn.powf(gam), (x, h))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold((0.0, ([0.0, 0.0], [0.0, 0.0])), max_by_first);

    let mut failures = Vec::new();
    if !(residual < opts.tol_vanish) {
        failures.push(format!(
            "vanishing: |∫ψ| = {residual:.3e} exceeds tolerance {:.1e}",
            opts.tol_vanish
        ));
    }
    if !c1.is_finite() {
        failures.push("size: constant is not finite".into());
    }
    if !c2.is_finite() {
        failures.push("smoothness: constant is not finite".into());
    }
    Ok(Certification {
        kernel: kernel.name().to_string(),
        dim: kernel.dim,
        delta,
        gamma: gam,
        c1,
        c2,
        c1_at,
        c2_at,
        residual,
        box_integral,
        tail_integral,
        tol_vanish: opts.tol_vanish,
        size_probes: size_pts.len(),
        smoothness_probes: pairs.len(),
        passed: failures.is_empty(),
        failures,
    })
}

fn max_by_first<T>(a: (f64, T), b: (f64, T)) -> (f64, T) {
    if b.0 > a.0 || a.0.is_nan() {
        b
    } else {
        a
    }
}

/// Midpoint box quadrature on `[-R, R]^n` and the exterior integral by
/// the substitution `r = R/u`.
fn mass(kernel: &Kernel, opts: &CertifyOptions) -> (f64, f64) {
    let big_r = opts.box_half;
    let (u, wu) = composite_unit(16, 16);
    match kernel.dim {
        1 => {
            let m = opts.quad_res.unwrap_or(1 << 14);
            let h = 2.0 * big_r / m as f64;
            let inside: f64 = (0..m)
                .into_par_iter()
                .map(|i| kernel.eval_radius2((-big_r + (i as f64 + 0.5) * h).powi(2)))
                .collect::<Vec<_>>()
                .iter()
                .sum::<f64>()
                * h;
            let tail: f64 = u
                .iter()
                .zip(&wu)
                .map(|(&u, &w)| {
                    let r = big_r / u;
                    w * kernel.eval_radius2(r * r) * big_r / (u * u)
                })
                .sum();
            (inside, 2.0 * tail)
        }
        _ => {
            let m = opts.quad_res.unwrap_or(1 << 11);
            let h = 2.0 * big_r / m as f64;
            let inside: f64 = (0..m)
                .into_par_iter()
                .map(|i| {
                    let x = -big_r + (i as f64 + 0.5) * h;
                    (0..m)
                        .map(|j| {
                            let y = -big_r + (j as f64 + 0.5) * h;
                            kernel.eval_radius2(x * x + y * y)
                        })
                        .sum::<f64>()
                })
                .collect::<Vec<_>>()
                .iter()
                .sum::<f64>()
                * h
                * h;
            let (s, ws) = composite_unit(16, 4);
            let tail: f64 = u
                .iter()
                .zip(&wu)
                .map(|(&u, &w)| {
                    let x = big_r / u;
                    let inner: f64 = s
                        .iter()
                        .zip(&ws)
                        .map(|(&s, &v)| v * kernel.eval_radius2(x * x * (1.0 + s * s)))
                        .sum();
                    w * inner * big_r * big_r / (u * u * u)
                })
                .sum();
            (inside, 8.0 * tail)
        }
    }
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> Point {
    match dim {
        1 => [if rng.random_bool(0.5) { 1.0 } else { -1.0 }, 0.0],
        _ => {
            let a = rng.random_range(0.0..2.0 * PI);
            [a.cos(), a.sin()]
        }
    }
}

/// Origin, a deterministic radial sweep, and random points with radii both
/// uniform and log-uniform in the probe box.
fn probe_points(dim: usize, big_r: f64, budget: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(budget);
    pts.push([0.0, 0.0]);
    let sweep = budget / 4;
    for k in 1..=sweep {
        let r = big_r * k as f64 / sweep as f64;
        let d = random_direction(&mut rng, dim);
        pts.push([r * d[0], r * d[1]]);
    }
    while pts.len() < budget {
        let r = if pts.len() % 2 == 0 {
            rng.random_range(0.0..big_r)
        } else {
            rng.random_range((1e-3f64).ln()..big_r.ln()).exp()
        };
        let d = random_direction(&mut rng, dim);
        pts.push([r * d[0], r * d[1]]);
    }
    pts
}

fn smoothness_pairs(dim: usize, opts: &CertifyOptions, seed: u64) -> Vec<(Point, Point)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_lo = 2.0 * opts.h_min;
    let mut out = Vec::with_capacity(opts.probe_budget);
    while out.len() < opts.probe_budget {
        let r = rng.random_range(r_lo.ln()..opts.box_half.ln()).exp();
        let d = random_direction(&mut rng, dim);
        let x = [r * d[0], r * d[1]];
        let hm = if r / 2.0 > opts.h_min {
            rng.random_range(opts.h_min.ln()..(r / 2.0).ln()).exp()
        } else {
            r / 2.0
        };
        let e = random_direction(&mut rng, dim);
        out.push((x, [hm * e[0], hm * e[1]]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> CertifyOptions {
        CertifyOptions {
            probe_budget: 1000,
            ..CertifyOptions::default()
        }
    }

    #[test]
    fn poisson_derivative_values() {
        let k = Kernel::by_name("poisson-derivative", 1).unwrap();
        assert!((k.eval([0.0, 0.0]) + 1.0 / PI).abs() < 1e-15);
        // c1 [ (1+1)^-1 - 2 (1+1)^-2 ] = 0 at |x| = 1
        assert!(k.eval([1.0, 0.0]).abs() < 1e-16);
        let k2 = Kernel::by_name("poisson-derivative", 2).unwrap();
        assert!((k2.eval([0.0, 0.0]) + 2.0 / (2.0 * PI)).abs() < 1e-15);
        for x in [0.3, 1.7, 12.0] {
            assert_eq!(k.eval([x, 0.0]), k.eval([-x, 0.0]));
            assert_eq!(k2.eval([x, 0.5]), k2.eval([-x, -0.5]));
        }
    }

    #[test]
    fn matches_time_derivative_of_poisson_kernel() {
        let poisson = |t: f64, x: f64| t / (PI * (t * t + x * x));
        let k = Kernel::by_name("poisson-derivative", 1).unwrap();
        for x in [0.0, 0.4, 1.3, 5.0] {
            let e = 1e-5;
            let fd = (poisson(1.0 + e, x) - poisson(1.0 - e, x)) / (2.0 * e);
            assert!((fd - k.eval([x, 0.0])).abs() < 1e-9);
        }
    }

    #[test]
    fn fourier_transform_is_consistent() {
        // ψ̂(ξ) by direct quadrature of the even profile against cos(2πxξ).
        for name in ["poisson-derivative", "gauss-derivative", "mexican-hat", "gaussian"] {
            let k = Kernel::by_name(name, 1).unwrap();
            for xi in [0.0, 0.1, 0.37, 1.0] {
                let h = 1e-3;
                let q: f64 = (0..2_000_000)
                    .map(|i| {
                        let x = -1000.0 + (i as f64 + 0.5) * h;
                        k.eval([x, 0.0]) * (2.0 * PI * x * xi).cos()
                    })
                    .sum::<f64>()
                    * h;
                assert!((q - k.fourier(xi)).abs() < 2e-3, "{name} at {xi}: {q} vs {}", k.fourier(xi));
            }
        }
    }

    #[test]
    fn certification_outcomes() {
        let ok = certify(&Kernel::by_name("poisson-derivative", 1).unwrap(), &quick()).unwrap();
        assert!(ok.passed, "{:?}", ok.failures);
        assert!(ok.residual < 1e-6);
        assert!(ok.c1.is_finite() && ok.c1 > 0.0 && ok.c2.is_finite() && ok.c2 > 0.0);

        let zero = certify(&Kernel::by_name("zero", 1).unwrap(), &quick()).unwrap();
        assert!(zero.passed);
        assert_eq!((zero.c1, zero.c2, zero.residual), (0.0, 0.0, 0.0));

        let g = certify(&Kernel::by_name("gaussian", 1).unwrap(), &quick()).unwrap();
        assert!(!g.passed);
        assert!((g.residual - (2.0 * PI).sqrt()).abs() < 1e-9);

        // In one dimension the Mexican hat has zero mass; in two it does not.
        let mh1 = certify(&Kernel::by_name("mexican-hat", 1).unwrap(), &quick()).unwrap();
        assert!(mh1.passed);
        let mh2 = certify(&Kernel::by_name("mexican-hat", 2).unwrap(), &quick()).unwrap();
        assert!(!mh2.passed);
        assert!((mh2.residual - 2.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn poisson_tail_is_accounted_for() {
        let k = Kernel::by_name("poisson-derivative", 1).unwrap();
        let c = certify(&k, &quick()).unwrap();
        // The truncated box alone misses mass ≈ 2/(πR).
        assert!((c.box_integral + 2.0 / (PI * 64.0)).abs() < 1e-4);
        assert!((c.box_integral + c.tail_integral).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = Kernel::by_name("poisson-derivative", 1).unwrap();
        assert!(k.clone().with_exponents(0.0, 1.0).is_err());
        assert!(k.clone().with_exponents(-1.0, 1.0).is_err());
        assert!(k.clone().with_exponents(1.0, 1.5).is_err());
        let small = CertifyOptions {
            probe_budget: 999,
            ..CertifyOptions::default()
        };
        assert!(certify(&k, &small).is_err());
        assert!(Kernel::by_name("poisson-derivative", 3).is_err());
        assert!(matches!(Kernel::by_name("nope", 1), Err(Error::Unknown { .. })));
        assert!(k.dilate(0.0).is_err());
        assert!(k.dilate(-2.0).is_err());
    }

    #[test]
    fn dilation() {
        let k = Kernel::by_name("poisson-derivative", 2).unwrap();
        let one = k.dilate(1.0).unwrap();
        let x = [0.3, -1.1];
        assert_eq!(one.eval(x), k.eval(x));
        for t in [0.25, 4.0] {
            let d = k.dilate(t).unwrap();
            assert!((d.eval([0.0, 0.0]) - k.eval([0.0, 0.0]) / (t * t)).abs() < 1e-14);
            let st = d.dilate(3.0).unwrap();
            let direct = k.dilate(3.0 * t).unwrap();
            assert!((st.eval(x) - direct.eval(x)).abs() <= 1e-15 * direct.eval(x).abs().max(1e-300));
        }
    }

    #[test]
    fn dilated_mass_is_invariant() {
        let k = Kernel::by_name("gauss-derivative", 1).unwrap();
        let ka = Kernel::by_name("gaussian", 1).unwrap();
        for t in [0.25, 4.0] {
            for kk in [&k, &ka] {
                let d = kk.dilate(t).unwrap();
                let h = 1e-3 * t;
                let q: f64 = (0..200_000)
                    .map(|i| d.eval([-100.0 * t + (i as f64 + 0.5) * h, 0.0]))
                    .sum::<f64>()
                    * h;
                assert!((q - kk.fourier(0.0)).abs() < 1e-10);
            }
        }
    }
}
