use std::f64::consts::PI;

use lpsquare::grid::{GridFunction, GridSpec};
use lpsquare::kernels::{CertifyOptions, Kernel};
use lpsquare::operators::{g_function, ScaleGrid};

fn certified(name: &str, dim: usize) -> Kernel {
    Kernel::by_name(name, dim)
        .unwrap()
        .certified(&CertifyOptions {
            probe_budget: 2000,
            ..CertifyOptions::default()
        })
        .unwrap()
}

/// For a pure trigonometric mode of frequency magnitude `rho`, every
/// `ψ_t * f` is `ψ̂(t ρ) f`, so `G f = |f| (Σ_j w_j ψ̂(t_j ρ)²)^{1/2}`.
fn closed_form(kernel: &Kernel, scales: &ScaleGrid, rho: f64) -> f64 {
    scales
        .nodes()
        .iter()
        .zip(scales.weights())
        .map(|(t, w)| w * kernel.fourier(t * rho).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn g_of_a_sine_is_pointwise_closed_form_1d() {
    for name in ["poisson-derivative", "gauss-derivative"] {
        let k = certified(name, 1);
        let s = GridSpec::new(1, 2.0, 512).unwrap();
        let freq = 3.0;
        let f = GridFunction::from_fn(s, |x| (2.0 * PI * freq * x[0] / 2.0).sin()).unwrap();
        let scales = ScaleGrid::default_for(&s, 48).unwrap();
        let g = g_function(&k, &f, &scales).unwrap();
        let c = closed_form(&k, &scales, freq / 2.0);
        assert!(c > 0.0);
        for (gv, fv) in g.values.values().iter().zip(f.values()) {
            assert!((gv - c * fv.abs()).abs() < 1e-10, "{name}: {gv} vs {}", c * fv.abs());
        }
    }
}

#[test]
fn g_of_a_product_sine_is_pointwise_closed_form_2d() {
    let k = certified("poisson-derivative", 2);
    let s = GridSpec::new(2, 1.0, 64).unwrap();
    let f = GridFunction::from_fn(s, |x| (2.0 * PI * x[0]).sin() * (2.0 * PI * x[1]).sin()).unwrap();
    let scales = ScaleGrid::default_for(&s, 32).unwrap();
    let g = g_function(&k, &f, &scales).unwrap();
    let c = closed_form(&k, &scales, 2f64.sqrt());
    for (gv, fv) in g.values.values().iter().zip(f.values()) {
        assert!((gv - c * fv.abs()).abs() < 1e-10);
    }
}
