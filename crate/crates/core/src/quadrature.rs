//! Gauss–Legendre rules on [0, 1].

use std::f64::consts::PI;

/// Nodes and weights of the `m`-point Gauss–Legendre rule mapped to [0, 1].
pub fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[m - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[m - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre: `panels` equal panels of an `m`-point rule on [0, 1].
pub fn composite_unit(m: usize, panels: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre_unit(m);
    let h = 1.0 / panels as f64;
    let mut nodes = Vec::with_capacity(m * panels);
    let mut weights = Vec::with_capacity(m * panels);
    for p in 0..panels {
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push((p as f64 + xi) * h);
            weights.push(wi * h);
        }
    }
    (nodes, weights)
}
