//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances and limits are fixed here.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lpsquare::cli::{build_corpus, execute, shared_family, Pair, Suite};
use lpsquare::czd::{
    cz_decompose, distribution_function, equivalence_constant, jn_blo_verify, jn_bmo_verify, lambda_grid,
    layer_cake_check, MeasureKind,
};
use lpsquare::family::CubeFamily;
use lpsquare::grid::{dyadic_cells, dyadic_cubes, DyadicCell, GridFunction, GridSpec, Region};
use lpsquare::kernels::{certify, CertifyOptions, Kernel};
use lpsquare::operators::{OpKind, ScaleFields};
use lpsquare::oscillation::{blo_constant, blo_p_norm, bmo_norm};
use lpsquare::report::corpus::FunctionSpec;
use lpsquare::report::Config;
use lpsquare::weights::{a1_constant, ap_constant, doubling_report, power_weight, Weight};

const VANISH_TOL: f64 = 1e-6;
const CERTIFY_LIMIT: Duration = Duration::from_secs(10);
const STRUCTURAL_TOL: f64 = 1e-12;
const CZ_LIMIT: Duration = Duration::from_secs(5);
const STABILITY_TOL: f64 = 0.10;
const SUITE_LIMIT: Duration = Duration::from_secs(300);
const LAYER_CAKE_TOL: f64 = 1e-3;
const LAYER_CAKE_NODES: usize = 10_000;
const ORACLE_TOL: f64 = 1e-12;

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

fn corpus(res: usize) -> (GridSpec, CubeFamily, Vec<Pair>) {
    let mut config = Config::default();
    config.grid.res = res;
    let spec = config.grid_spec().unwrap();
    let family = shared_family(&config, &spec, config.max_level(&spec)).unwrap();
    let pairs = build_corpus(&config, spec).unwrap();
    (spec, family, pairs)
}

fn roots(spec: &GridSpec) -> Vec<DyadicCell> {
    dyadic_cells(spec, 1).unwrap()
}

fn kernel_certification() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for dim in [1, 2] {
        let kernel = Kernel::by_name("poisson-derivative", dim).unwrap();
        let start = Instant::now();
        let cert = certify(&kernel, &CertifyOptions::default()).unwrap();
        let took = start.elapsed();
        ok &= cert.passed && cert.residual < VANISH_TOL && took < CERTIFY_LIMIT;
        notes.push(format!(
            "n={dim}: passed={} residual={:.2e} C1={:.4} C2={:.4} in {:.2}s",
            cert.passed,
            cert.residual,
            cert.c1,
            cert.c2,
            took.as_secs_f64()
        ));
    }
    verdict(ok, format!("{} (residual < {VANISH_TOL:e}, < {}s)", notes.join("; "), CERTIFY_LIMIT.as_secs()))
}

fn structural_inequality() -> Verdict {
    let (_, family, pairs) = corpus(2048);
    let mut worst = 0.0f64;
    for p in &pairs {
        let bmo = bmo_norm(&p.f, &p.w, &family).unwrap().value;
        let blo = blo_constant(&p.f, &p.w, &family).unwrap().value;
        worst = worst.max(bmo / (2.0 * blo));
    }
    verdict(
        worst <= 1.0 + STRUCTURAL_TOL,
        format!("max BMO/(2 BLO) = {worst:.6} over {} pairs (tol {STRUCTURAL_TOL:e})", pairs.len()),
    )
}

fn blo_square() -> Verdict {
    let (spec, family, pairs) = corpus(2048);
    let config = Config::default();
    let scales = config.scale_grid(&spec).unwrap();
    let kernel = Kernel::by_name("poisson-derivative", 1)
        .unwrap()
        .certified(&CertifyOptions::default())
        .unwrap();
    let unit = Weight::constant(spec, 1.0).unwrap();
    let mut worst = 0.0f64;
    let mut count = 0;
    for p in &pairs {
        let fields = ScaleFields::compute(&kernel, &p.f, &scales).unwrap();
        for op in [OpKind::G, OpKind::S] {
            let t = fields.evaluate(op).unwrap().values;
            let lhs = blo_constant(&t, &unit, &family).unwrap().value.powi(2);
            let rhs = blo_constant(&t.map(|v| v * v).unwrap(), &unit, &family).unwrap().value;
            worst = worst.max(lhs / rhs);
            count += 1;
        }
    }
    verdict(
        worst <= 1.0 + STRUCTURAL_TOL,
        format!("max |F|^2_BLO / |F^2|_BLO = {worst:.6} over {count} (pair, operator) cases"),
    )
}

fn doubling() -> Verdict {
    let (spec, family, pairs) = corpus(2048);
    let level = Config::default().max_level(&spec);
    let cubes = dyadic_cubes(&spec, level).unwrap();
    let mut min_margin = f64::INFINITY;
    let mut violations = 0;
    let mut checked = 0;
    for p in &pairs {
        let a1 = a1_constant(&p.w, &family).unwrap();
        let rep = doubling_report(&p.w, &cubes, a1).unwrap();
        violations += rep.violations();
        checked += rep.entries.len();
        min_margin = min_margin.min(rep.min_margin());
    }
    verdict(
        violations == 0 && min_margin >= 1.0,
        format!("{checked} cube checks, {violations} violations, min margin {min_margin:.6}"),
    )
}

fn cz_invariants() -> Verdict {
    let (spec, _, pairs) = corpus(4096);
    let mut slowest = Duration::ZERO;
    let mut bad = Vec::new();
    let mut runs = 0;
    let mut selected = 0;
    for p in &pairs {
        for root in roots(&spec) {
            let start = Instant::now();
            let tree = cz_decompose(&p.f, &p.w, root, std::f64::consts::E, 5).unwrap();
            slowest = slowest.max(start.elapsed());
            runs += 1;
            selected += tree.nodes.len();
            if !tree.holds() || tree.checks.len() != 5 {
                bad.push(format!("{} level {} pos {}", p.name, root.level, root.pos[0]));
            }
        }
    }
    verdict(
        bad.is_empty() && slowest < CZ_LIMIT,
        format!(
            "{runs} trees ({selected} cubes), failures {bad:?}, slowest {:.3}s (limit {}s)",
            slowest.as_secs_f64(),
            CZ_LIMIT.as_secs()
        ),
    )
}

fn john_nirenberg() -> Verdict {
    let (spec, _, pairs) = corpus(4096);
    let mut bad = Vec::new();
    let mut worst = f64::INFINITY;
    let mut spike_worst = f64::INFINITY;
    for p in &pairs {
        for root in roots(&spec) {
            let r = Region::dyadic(spec, root);
            let v = p.f.values();
            let (lo, hi) = r
                .indices()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(v[i]), b.max(v[i])));
            let lambdas = lambda_grid(if hi > lo { hi - lo } else { 1.0 }, 200);
            for rep in [
                jn_blo_verify(&p.f, &p.w, root, &lambdas).unwrap(),
                jn_bmo_verify(&p.f, &p.w, root, &lambdas).unwrap(),
            ] {
                if !rep.passed() {
                    bad.push(p.name.clone());
                }
                worst = worst.min(rep.worst_margin());
                if matches!(p.function, FunctionSpec::LogSpike { .. }) {
                    spike_worst = spike_worst.min(rep.worst_margin());
                }
            }
        }
    }
    verdict(
        bad.is_empty(),
        format!("BLO and BMO tails: worst margin {worst:.4}, log-spike worst {spike_worst:.4}, failures {bad:?}"),
    )
}

fn norm_equivalence() -> Verdict {
    let (spec, family, pairs) = corpus(2048);
    let mut worst_upper = 0.0f64;
    let mut worst_lower = 0.0f64;
    for p in &pairs {
        let a1 = a1_constant(&p.w, &family).unwrap();
        let blo = blo_constant(&p.f, &p.w, &family).unwrap().value;
        for q in [1.5, 2.0, 3.0] {
            let nu = power_weight(&p.w, 1.0 - q);
            let k = equivalence_constant(q, spec.dim(), a1, ap_constant(&nu, q, &family).unwrap()).unwrap();
            let blo_p = blo_p_norm(&p.f, &p.w, q, &family).unwrap().value;
            worst_upper = worst_upper.max(blo_p / blo / k);
            worst_lower = worst_lower.max(blo / blo_p);
        }
    }
    verdict(
        worst_upper <= 1.0 && worst_lower <= 1.0 + STRUCTURAL_TOL,
        format!("max (BLO^p/BLO)/K = {worst_upper:.3e}; max BLO/BLO^p = {worst_lower:.6}"),
    )
}

fn theorem_stability() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let outcome = execute(Suite::TheoremSuite, &Config::default(), tmp.path(), None).unwrap();
    let took = start.elapsed();
    let m = &outcome.manifest;
    let stab: Vec<String> = m
        .criteria
        .iter()
        .filter(|c| c.name.starts_with("stability:"))
        .map(|c| format!("{} [{}]", c.name, c.detail))
        .collect();
    let all_stable = m.criteria.iter().filter(|c| c.name.starts_with("stability:")).all(|c| c.passed);
    let finite = m.criteria.iter().filter(|c| c.name.starts_with("sup-finite:")).all(|c| c.passed);
    let cfg = Config::default();
    verdict(
        m.error.is_none() && stab.len() == 3 && all_stable && finite && took < SUITE_LIMIT
            && cfg.tolerances.stability == STABILITY_TOL,
        format!(
            "N=2048 M=64 vs N=4096 M=128 in {:.1}s (limit {}s, tol {STABILITY_TOL}): {}",
            took.as_secs_f64(),
            SUITE_LIMIT.as_secs(),
            stab.join("; ")
        ),
    )
}

fn layer_cake() -> Verdict {
    let (spec, _, pairs) = corpus(2048);
    let full = Region::full(spec);
    let mut worst_exact = 0.0f64;
    let mut worst_smooth = 0.0f64;
    let mut step_exact = 0.0f64;
    for p in &pairs {
        let g = p.f.map(f64::abs).unwrap();
        for q in [1.0, 1.5, 2.0, 3.0] {
            let lc = layer_cake_check(&g, MeasureKind::Weight, Some(&p.w), q, &full, LAYER_CAKE_NODES).unwrap();
            worst_exact = worst_exact.max(lc.gap_exact);
            if matches!(p.function, FunctionSpec::Step { .. }) {
                step_exact = step_exact.max(lc.gap_exact);
            }
            if p.function.is_smooth() {
                worst_smooth = worst_smooth.max(lc.gap_trapezoid);
            }
        }
    }
    verdict(
        step_exact <= STRUCTURAL_TOL && worst_exact <= STRUCTURAL_TOL && worst_smooth < LAYER_CAKE_TOL,
        format!(
            "step exact gap {step_exact:.1e}, all exact gaps <= {worst_exact:.1e}, smooth trapezoid gap {worst_smooth:.2e} at {LAYER_CAKE_NODES} nodes"
        ),
    )
}

/// Exhaustive maximal-cube scan over every dyadic sub-cube of each stopping
/// cube, with its own BLO and A1 computed by brute force.
mod oracle {
    pub struct Node {
        pub parent: usize,
        pub level: u32,
        pub pos: usize,
        pub oscmean: f64,
        pub mininc: f64,
    }

    fn cell(level: u32, pos: usize, top: u32) -> std::ops::Range<usize> {
        let len = 1usize << (top - level);
        pos * len..(pos + 1) * len
    }

    fn subcells(level: u32, pos: usize, top: u32) -> Vec<(u32, usize)> {
        let mut out = Vec::new();
        for l in level..=top {
            let k = 1usize << (l - level);
            for j in 0..k {
                out.push((l, pos * k + j));
            }
        }
        out
    }

    pub fn decompose(f: &[f64], w: &[f64], root: (u32, usize), sigma: f64, max_gen: u32) -> Vec<(u32, Vec<Node>)> {
        let top = f.len().trailing_zeros();
        let subs = subcells(root.0, root.1, top);
        let blo = subs
            .iter()
            .map(|&(l, p)| {
                let r = cell(l, p, top);
                let m = f[r.clone()].iter().cloned().fold(f64::INFINITY, f64::min);
                let osc: f64 = f[r.clone()].iter().map(|v| v - m).sum();
                osc / w[r].iter().sum::<f64>()
            })
            .fold(0.0, f64::max);
        let a1 = subs
            .iter()
            .map(|&(l, p)| {
                let r = cell(l, p, top);
                let mean = w[r.clone()].iter().sum::<f64>() / r.len() as f64;
                mean / w[r].iter().cloned().fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        let wmin = w[cell(root.0, root.1, top)].iter().cloned().fold(f64::INFINITY, f64::min);
        let threshold = a1 * wmin * sigma;
        let ft: Vec<f64> = f.iter().map(|v| if blo > 0.0 { v / blo } else { 0.0 }).collect();
        let min_of = |l: u32, p: usize| ft[cell(l, p, top)].iter().cloned().fold(f64::INFINITY, f64::min);
        let mean_of = |l: u32, p: usize, base: f64| {
            let r = cell(l, p, top);
            r.clone().map(|i| ft[i] - base).sum::<f64>() / r.len() as f64
        };

        let mut out = Vec::new();
        let mut stopping: Vec<(usize, u32, usize)> = vec![(0, root.0, root.1)];
        let mut next_id = 1;
        for g in 1..=max_gen {
            let mut gen_nodes = Vec::new();
            let mut next = Vec::new();
            for &(pid, pl, pp) in &stopping {
                if blo == 0.0 {
                    break;
                }
                let pmin = min_of(pl, pp);
                let mut hits: Vec<(u32, usize)> = subcells(pl, pp, top)
                    .into_iter()
                    .filter(|&(l, _)| l > pl && l < top)
                    .filter(|&(l, p)| mean_of(l, p, pmin) > threshold)
                    .collect();
                let snapshot = hits.clone();
                hits.retain(|&(l, p)| {
                    !snapshot
                        .iter()
                        .any(|&(l2, p2)| l2 < l && (p >> (l - l2)) == p2)
                });
                hits.sort_by_key(|&(l, p)| p << (top - l));
                for (l, p) in hits {
                    gen_nodes.push(Node {
                        parent: pid,
                        level: l,
                        pos: p,
                        oscmean: mean_of(l, p, pmin),
                        mininc: min_of(l, p) - pmin,
                    });
                    next.push((next_id, l, p));
                    next_id += 1;
                }
            }
            stopping = next;
            out.push((g, gen_nodes));
        }
        out
    }
}

fn random_instance(rng: &mut ChaCha8Rng, res: usize) -> (Vec<f64>, Vec<f64>) {
    let kind = rng.random_range(0..3);
    let f: Vec<f64> = (0..res)
        .map(|i| {
            let x = i as f64 / res as f64;
            match kind {
                0 => rng.random_range(0.0..1.0),
                1 => -((x - 0.37).abs().max(1.0 / res as f64)).ln() + 0.01 * rng.random_range(0.0..1.0),
                _ => (x * 7.0).fract().powi(3) + rng.random_range(0.0..0.1),
            }
        })
        .collect();
    let w: Vec<f64> = (0..res).map(|_| rng.random_range(0.5..2.0)).collect();
    (f, w)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= ORACLE_TOL * a.abs().max(b.abs()).max(1.0)
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut trees = 0;
    let mut nodes = 0;
    let mut mismatches = Vec::new();
    for case in 0..60 {
        let res = [16usize, 32, 64, 128, 256][case % 5];
        let spec = GridSpec::new(1, 1.0, res).unwrap();
        let (f, w) = random_instance(&mut rng, res);
        let sigma = [1.05, 1.2, 1.5, std::f64::consts::E][case % 4];
        let root_level = (case % 3) as u32;
        let root_pos = rng.random_range(0..(1usize << root_level));
        let gf = GridFunction::new(spec, f.clone()).unwrap();
        let gw = Weight::new(GridFunction::new(spec, w.clone()).unwrap());
        let root = DyadicCell {
            level: root_level,
            pos: [root_pos, 0],
        };
        let tree = cz_decompose(&gf, &gw, root, sigma, 5).unwrap();
        let want = oracle::decompose(&f, &w, (root_level, root_pos), sigma, 5);
        trees += 1;
        for (g, expected) in &want {
            let got: Vec<_> = tree.generation(*g).collect();
            nodes += got.len();
            let same = got.len() == expected.len()
                && got.iter().zip(expected).all(|(a, b)| {
                    a.parent == b.parent
                        && a.cell.level == b.level
                        && a.cell.pos[0] == b.pos
                        && close(a.oscmean, b.oscmean)
                        && close(a.mininc, b.mininc)
                });
            if !same {
                mismatches.push(format!("case {case} generation {g}"));
            }
        }
    }

    let mut dist_bad = 0;
    let mut dist_checks = 0;
    for case in 0..20 {
        let res = 64usize;
        let dim = 1 + case % 2;
        let spec = GridSpec::new(dim, 1.0, res).unwrap();
        let n = spec.len();
        let g: Vec<f64> = (0..n).map(|_| (rng.random_range(0..40) as f64) * 0.25 - 2.0).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
        let idx: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.6)).collect();
        let region = Region::from_indices(spec, idx.clone()).unwrap();
        let gf = GridFunction::new(spec, g.clone()).unwrap();
        let gw = Weight::new(GridFunction::new(spec, w.clone()).unwrap());
        let lambdas: Vec<f64> = (0..60).map(|j| -2.5 + j as f64 * 0.2).collect();
        let vol = spec.cell_volume();
        for (mu, label) in [(MeasureKind::Lebesgue, 0), (MeasureKind::Weight, 1), (MeasureKind::PowerWeight(2.5), 2)] {
            let d = distribution_function(&gf, mu, Some(&gw), &region, &lambdas).unwrap();
            for (k, &lam) in lambdas.iter().enumerate() {
                let recount: f64 = idx
                    .iter()
                    .filter(|&&i| g[i] > lam)
                    .map(|&i| match label {
                        0 => vol,
                        1 => w[i] * vol,
                        _ => w[i].powf(1.0 - 2.5) * vol,
                    })
                    .sum();
                dist_checks += 1;
                if !close(d.masses[k], recount) {
                    dist_bad += 1;
                }
            }
        }
    }
    verdict(
        mismatches.is_empty() && dist_bad == 0,
        format!(
            "{trees} trees / {nodes} nodes vs exhaustive scan, mismatches {mismatches:?}; {dist_checks} distribution values, {dist_bad} mismatches"
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("kernel certification", kernel_certification),
        ("BMO <= 2 BLO", structural_inequality),
        ("BLO square inequality", blo_square),
        ("doubling", doubling),
        ("CZ decomposition invariants", cz_invariants),
        ("John-Nirenberg tails", john_nirenberg),
        ("BLO^p norm equivalence", norm_equivalence),
        ("theorem-suite stability", theorem_stability),
        ("layer-cake identity", layer_cake),
        ("oracle equivalence", oracle_equivalence),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let v = run();
        if !v.passed {
            failed += 1;
        }
        println!("criterion {:>2} [{}] {name}: {}", i + 1, if v.passed { "PASS" } else { "FAIL" }, v.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
