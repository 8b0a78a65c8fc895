use lpsquare::czd::{
    cz_decompose, distribution_function, equivalence_constant, jn_blo_verify, jn_bmo_verify, jn_c2, lambda_grid,
    layer_cake_check, MeasureKind,
};
use lpsquare::family::CubeFamily;
use lpsquare::grid::{DyadicCell, GridFunction, GridSpec, Region};
use lpsquare::oscillation::{blo_constant, blo_p_norm};
use lpsquare::weights::{a1_constant, ap_constant, power_weight, Weight};

fn spec(res: usize) -> GridSpec {
    GridSpec::new(1, 1.0, res).unwrap()
}

fn log_spike(s: GridSpec, c: f64) -> GridFunction {
    let h = s.spacing();
    GridFunction::from_fn(s, |x| -(s.periodic_distance(x, [c, 0.0]).max(h)).ln()).unwrap()
}

#[test]
fn blo_tail_bound_fails_for_weight_itself() {
    let s = spec(4096);
    let w = Weight::power_regularized(s, [0.5, 0.0], 0.7).unwrap();
    let f = w.base().clone();
    let top = f.values().iter().cloned().fold(0.0, f64::max);
    let rep = jn_blo_verify(&f, &w, DyadicCell::root(), &lambda_grid(top, 400)).unwrap();
    assert!(!rep.passed());
    assert!(rep.worst_margin() < 1e-3, "{}", rep.worst_margin());
    let tree = cz_decompose(&f, &w, DyadicCell::root(), std::f64::consts::E, 5).unwrap();
    assert!(!tree.holds());
    assert!(tree.checks.iter().any(|c| !c.measure_ok || !c.oscmean_in_range));
}

#[test]
fn log_spike_tail_is_exponential_and_bounded() {
    let s = spec(8192);
    let f = log_spike(s, 0.5);
    let w = Weight::constant(s, 1.0).unwrap();
    let lambdas = lambda_grid(8.0, 64);
    let rep = jn_blo_verify(&f, &w, DyadicCell::root(), &lambdas).unwrap();
    assert!(rep.passed());
    // Tail of log(1/|x - 1/2|) above its minimum log 2: m = 2 * (1/2) e^{-lambda}
    // for lambda below the cutoff at log(N/2).
    for row in rep.rows.iter().filter(|r| r.lambda < 6.0) {
        let exact = (-row.lambda).exp();
        assert!((row.measured - exact).abs() <= 2.0 * s.spacing(), "{} {}", row.measured, exact);
    }
    let slope = rep.tail_slope().unwrap();
    assert!(slope < rep.bound_slope(1), "measured slope {slope} bound slope {}", rep.bound_slope(1));
    assert!((rep.bound_slope(1) + jn_c2(1) / (rep.a_omega * rep.norm)).abs() < 1e-15);
    let bmo = jn_bmo_verify(&f, &w, DyadicCell::root(), &lambdas).unwrap();
    assert!(bmo.passed());
}

#[test]
fn bound_at_zero_norm_is_flat() {
    let s = spec(64);
    let f = GridFunction::constant(s, 2.0).unwrap();
    let w = Weight::constant(s, 1.0).unwrap();
    let rep = jn_blo_verify(&f, &w, DyadicCell::root(), &[0.5, 1.0]).unwrap();
    assert_eq!(rep.norm, 0.0);
    for r in &rep.rows {
        assert_eq!(r.measured, 0.0);
        assert!((r.bound - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(r.margin, f64::INFINITY);
    }
}

#[test]
fn tree_text_is_line_oriented() {
    let s = spec(256);
    let f = log_spike(s, 0.3);
    let w = Weight::constant(s, 1.0).unwrap();
    let tree = cz_decompose(&f, &w, DyadicCell::root(), 1.2, 4).unwrap();
    assert!(tree.holds());
    assert!(!tree.nodes.is_empty());
    let text = tree.to_text();
    assert_eq!(text.lines().count(), tree.nodes.len());
    for (line, node) in text.lines().zip(&tree.nodes) {
        assert!(line.starts_with(&format!("gen={} parent={} center=", node.generation, node.parent)));
        assert!(line.contains(" side=") && line.contains(" oscmean=") && line.contains(" mininc="));
    }
    for k in 1..=tree.checks.len() as u32 {
        let m: f64 = tree.generation(k).map(|n| n.cube.side).sum();
        assert!(m <= 1.0 / 1.2f64.powi(k as i32) + 1e-12);
    }
}

#[test]
fn tree_rejects_bad_arguments() {
    let s = spec(64);
    let f = log_spike(s, 0.5);
    let w = Weight::constant(s, 1.0).unwrap();
    assert!(cz_decompose(&f, &w, DyadicCell::root(), 1.0, 3).is_err());
    let deep = DyadicCell { level: 7, pos: [0, 0] };
    assert!(cz_decompose(&f, &w, deep, 2.0, 3).is_err());
}

#[test]
fn two_dimensional_tree_and_tail() {
    let s = GridSpec::new(2, 1.0, 64).unwrap();
    let h = s.spacing();
    let f = GridFunction::from_fn(s, |x| -(s.periodic_distance(x, [0.5, 0.5]).max(h)).ln()).unwrap();
    let w = Weight::power_regularized(s, [0.25, 0.25], 0.5).unwrap();
    let tree = cz_decompose(&f, &w, DyadicCell::root(), 1.5, 4).unwrap();
    assert!(tree.holds());
    let rep = jn_blo_verify(&f, &w, DyadicCell::root(), &lambda_grid(5.0, 40)).unwrap();
    assert!(rep.passed());
}

#[test]
fn equivalence_constant_pinned_value() {
    // p = 2, n = 1, [w]_A1 = 1, [nu]_A2 = 1: eps = 1/64, delta = 1/65,
    // K = (4 Γ(2))^{1/2} e^{1/130} / (δ / (2e)) = 2 * 130 e * e^{1/130}.
    let k = equivalence_constant(2.0, 1, 1.0, 1.0).unwrap();
    let want = 260.0 * std::f64::consts::E * (1.0f64 / 130.0).exp();
    assert!((k - want).abs() < 1e-10 * want, "{k} vs {want}");
    assert!(equivalence_constant(1.0, 1, 1.0, 1.0).is_err());
}

#[test]
fn blo_p_sits_between_blo_and_k_blo() {
    let s = spec(1024);
    let fam = CubeFamily::dyadic(s, 8).unwrap();
    let w = Weight::power_regularized(s, [0.3, 0.0], 0.4).unwrap();
    let f = log_spike(s, 0.6);
    let blo = blo_constant(&f, &w, &fam).unwrap().value;
    let a1 = a1_constant(&w, &fam).unwrap();
    for p in [1.5, 2.0, 3.0] {
        let bp = blo_p_norm(&f, &w, p, &fam).unwrap().value;
        let nu = power_weight(&w, 1.0 - p);
        let k = equivalence_constant(p, 1, a1, ap_constant(&nu, p, &fam).unwrap()).unwrap();
        assert!(blo <= bp * (1.0 + 1e-12));
        assert!(bp <= k * blo);
    }
}

#[test]
fn layer_cake_and_distribution_agree() {
    let s = spec(512);
    let g = GridFunction::from_fn(s, |x| (6.0 * x[0]).sin().abs() * 3.0).unwrap();
    let w = Weight::power_regularized(s, [0.5, 0.0], 0.3).unwrap();
    let full = Region::full(s);
    for mu in [MeasureKind::Lebesgue, MeasureKind::Weight] {
        let lc = layer_cake_check(&g, mu, Some(&w), 2.0, &full, 10_000).unwrap();
        assert!(lc.gap_exact < 1e-12);
        assert!(lc.gap_trapezoid < 1e-3);
    }
    let d = distribution_function(&g, MeasureKind::Lebesgue, None, &full, &[-1.0, 0.0, 1.5, 10.0]).unwrap();
    assert!((d.masses[0] - 1.0).abs() < 1e-12);
    assert!(d.masses.windows(2).all(|m| m[1] <= m[0]));
    assert_eq!(d.masses[3], 0.0);
    assert!(distribution_function(&g, MeasureKind::Weight, None, &full, &[1.0]).is_err());
    assert!(distribution_function(&g, MeasureKind::Lebesgue, None, &full, &[1.0, 1.0]).is_err());
    assert!(layer_cake_check(&g, MeasureKind::Lebesgue, None, 0.5, &full, 100).is_err());
}
