//! The `lpsquare` command line. Each suite reads one configuration, runs its
//! experiments over the corpus in parallel, writes CSV tables and plot
//! scripts into `<out>/<suite>/` and seals a `manifest.json` beside them.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use rayon::prelude::*;

use crate::czd::{
    cz_decompose, equivalence_constant, jn_blo_verify, jn_bmo_verify, lambda_grid, layer_cake_check, LayerCake,
    MeasureKind,
};
use crate::error::{Error, Result};
use crate::family::CubeFamily;
use crate::grid::{dyadic_cells, dyadic_cubes, DyadicCell, GridFunction, GridSpec, Region};
use crate::kernels::{certify, CertifyOptions, Kernel};
use crate::operators::{g_star_threshold, truncation_report, OpKind, ScaleFields, ScaleGrid};
use crate::oscillation::{blo_constant, blo_p_norm, bmo_norm};
use crate::report::corpus::{FunctionSpec, WeightSpec};
use crate::report::{num, Config, Manifest, OutputDir, PlotKind, PlotScript};
use crate::weights::{a1_constant, a1_witness, ap_constant, doubling_report, power_weight, reverse_holder, Weight};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lpsquare", version, about = "Weighted Littlewood-Paley square functions on sampled grids")]
pub struct Cli {
    /// Experiment suite to run.
    #[arg(value_enum)]
    pub suite: Suite,
    /// TOML configuration; built-in defaults are used when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a setting, e.g. `--set grid.res=4096`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Worker threads for corpus-level parallelism.
    #[arg(long, value_name = "K")]
    pub jobs: Option<usize>,
    /// Output directory; defaults to `output.dir` from the configuration.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    KernelCheck,
    Weights,
    Operators,
    TheoremSuite,
    Jn,
}

impl Suite {
    pub fn name(&self) -> &'static str {
        match self {
            Suite::KernelCheck => "kernel-check",
            Suite::Weights => "weights",
            Suite::Operators => "operators",
            Suite::TheoremSuite => "theorem-suite",
            Suite::Jn => "jn",
        }
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub manifest: Manifest,
    pub exit_code: i32,
    /// Directory holding the suite's outputs and manifest.
    pub dir: PathBuf,
}

/// Defaults or the file, then `LPSQUARE_SEED`, then `--set` overrides in order.
pub fn resolve_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    config.apply_env()?;
    for o in &cli.overrides {
        config.apply_override(o)?;
    }
    Ok(config)
}

/// Runs the parsed command line and returns the process exit code.
pub fn main_with(cli: &Cli) -> i32 {
    let config = match resolve_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("lpsquare: {e}");
            return EXIT_ERROR;
        }
    };
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(&config.output.dir));
    match execute(cli.suite, &config, &out, cli.jobs) {
        Ok(outcome) => {
            let m = &outcome.manifest;
            for c in m.criteria.iter().filter(|c| !c.passed) {
                println!("FAIL {}: {}", c.name, c.detail);
            }
            if let Some(e) = &m.error {
                eprintln!("lpsquare: {e}");
            }
            let passed = m.criteria.iter().filter(|c| c.passed).count();
            println!(
                "{}: {passed}/{} checks passed; manifest {}",
                m.command,
                m.criteria.len(),
                outcome.dir.join("manifest.json").display()
            );
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("lpsquare: {e}");
            EXIT_ERROR
        }
    }
}

/// Runs one suite into `<out>/<suite>/`. The manifest is written even when
/// the suite fails; only an unusable output directory is returned as `Err`.
pub fn execute(suite: Suite, config: &Config, out: &Path, jobs: Option<usize>) -> Result<Outcome> {
    let dir_path = out.join(suite.name());
    let mut dir = OutputDir::create(&dir_path)?;
    let mut manifest = Manifest::new(suite.name(), config);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let result = pool.install(|| match suite {
        Suite::KernelCheck => kernel_check(config, &mut manifest, &mut dir),
        Suite::Weights => weights_suite(config, &mut manifest, &mut dir),
        Suite::Operators => operators_suite(config, &mut manifest, &mut dir),
        Suite::TheoremSuite => theorem_suite(config, &mut manifest, &mut dir),
        Suite::Jn => jn_suite(config, &mut manifest, &mut dir),
    });
    if let Err(e) = result {
        manifest.error = Some(e.to_string());
    }
    manifest.finish(dir.written());
    manifest.write(&dir_path.join("manifest.json"))?;
    let exit_code = if manifest.error.is_some() {
        EXIT_ERROR
    } else if manifest.passed {
        EXIT_OK
    } else {
        EXIT_FAILED
    };
    Ok(Outcome {
        manifest,
        exit_code,
        dir: dir_path,
    })
}

fn certify_options(config: &Config) -> CertifyOptions {
    CertifyOptions {
        probe_budget: config.kernel.probe_budget,
        tol_vanish: config.tolerances.vanish,
        box_half: config.kernel.box_half,
        seed: config.kernel.seed,
        ..CertifyOptions::default()
    }
}

/// The cube family shared by every constant of a run.
pub fn shared_family(config: &Config, spec: &GridSpec, max_level: u32) -> Result<CubeFamily> {
    let dyadic = CubeFamily::dyadic(*spec, max_level)?;
    if config.family.balls == 0 {
        return Ok(dyadic);
    }
    let h = spec.spacing();
    let balls = CubeFamily::random_balls(
        *spec,
        config.family.balls,
        config.family.ball_seed,
        (2.0 * h, spec.side() / 4.0),
    )?;
    dyadic.union(&balls)
}

/// A corpus entry sampled on a grid.
#[derive(Debug, Clone)]
pub struct Pair {
    pub name: String,
    pub function: FunctionSpec,
    pub weight: WeightSpec,
    pub f: GridFunction,
    pub w: Weight,
}

pub fn build_corpus(config: &Config, spec: GridSpec) -> Result<Vec<Pair>> {
    config
        .corpus
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let seed = config.corpus.seed.wrapping_add(i as u64);
            Ok(Pair {
                name: p.display_name(i),
                function: p.function.clone(),
                weight: p.weight.clone(),
                f: p.function.build(spec, seed)?,
                w: p.weight.build(spec)?,
            })
        })
        .collect()
}

struct Setup {
    spec: GridSpec,
    scales: ScaleGrid,
    family: CubeFamily,
    pairs: Vec<Pair>,
}

fn setup(config: &Config) -> Result<Setup> {
    let spec = config.grid_spec()?;
    let scales = config.scale_grid(&spec)?;
    let family = shared_family(config, &spec, config.max_level(&spec))?;
    let pairs = build_corpus(config, spec)?;
    Ok(Setup {
        spec,
        scales,
        family,
        pairs,
    })
}

fn describe(m: &mut Manifest, s: &Setup) {
    m.grid = s.spec.to_string();
    m.scales = s.scales.to_string();
    m.family = format!("{} ({} members)", s.family.descriptor(), s.family.len());
}

fn operator_kernel(config: &Config, m: &mut Manifest) -> Result<Kernel> {
    let kernel = Kernel::by_name(&config.kernel.operator, config.grid.dim)?;
    let opts = certify_options(config);
    let kernel = m.time("certify", || kernel.certified(&opts))?;
    if let Some(c) = kernel.certification() {
        m.certifications.push(c.clone());
    }
    Ok(kernel)
}

fn op_label(op: OpKind) -> String {
    match op {
        OpKind::GStar { lambda } => format!("gstar-l{lambda}"),
        OpKind::DilatedS { ell } => format!("s-dilated-{ell}"),
        other => other.tag().to_string(),
    }
}

fn ratio_of(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn rel_change(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (b - a).abs() / a.abs().max(b.abs())
    }
}

fn root_label(cell: &DyadicCell, dim: usize) -> String {
    if dim == 1 {
        format!("L{}-{}", cell.level, cell.pos[0])
    } else {
        format!("L{}-{}-{}", cell.level, cell.pos[0], cell.pos[1])
    }
}

fn write_plot(dir: &mut OutputDir, rel_dir: &str, name: &str, plot: PlotScript) -> Result<()> {
    let rel = if rel_dir.is_empty() {
        format!("{name}.gp")
    } else {
        format!("{rel_dir}/{name}.gp")
    };
    dir.write_text(&rel, &plot.render())
}

// ---------------------------------------------------------------- kernel-check

const KERNEL_HEADER: [&str; 12] = [
    "kernel",
    "dim",
    "delta",
    "gamma",
    "c1",
    "c2",
    "residual",
    "box_integral",
    "tail_integral",
    "probes",
    "passed",
    "expected_pass",
];

fn kernel_check(config: &Config, m: &mut Manifest, dir: &mut OutputDir) -> Result<()> {
    m.grid = config.grid_spec()?.to_string();
    let opts = certify_options(config);
    for name in &config.kernel.expect_fail {
        Kernel::by_name(name, config.grid.dim)?;
    }
    let mut rows = Vec::new();
    for name in &config.kernel.check {
        let kernel = Kernel::by_name(name, config.grid.dim)?;
        let cert = m.time(&format!("certify:{name}"), || certify(&kernel, &opts))?;
        let expected = !config.kernel.expect_fail.contains(name);
        let detail = if cert.failures.is_empty() {
            format!("certified (residual {:e}, C1 {}, C2 {})", cert.residual, cert.c1, cert.c2)
        } else {
            cert.failures.join("; ")
        };
        m.check(
            &format!("kernel:{name}"),
            cert.passed == expected,
            format!("expected {}: {detail}", if expected { "pass" } else { "fail" }),
        );
        rows.push(vec![
            name.clone(),
            cert.dim.to_string(),
            num(cert.delta),
            num(cert.gamma),
            num(cert.c1),
            num(cert.c2),
            num(cert.residual),
            num(cert.box_integral),
            num(cert.tail_integral),
            (cert.size_probes + cert.smoothness_probes).to_string(),
            cert.passed.to_string(),
            expected.to_string(),
        ]);
        m.certifications.push(cert);
    }
    dir.write_csv("kernels.csv", &KERNEL_HEADER, &rows)
}

// --------------------------------------------------------------------- weights

struct WeightResult {
    label: String,
    constant: bool,
    a1: f64,
    a1_center: f64,
    a1_size: f64,
    aps: Vec<f64>,
    refined: Option<(f64, Vec<f64>)>,
    doubling_rows: Vec<Vec<String>>,
    doubling_violations: usize,
    doubling_min_margin: f64,
    reverse_holder: bool,
}

fn weights_suite(config: &Config, m: &mut Manifest, dir: &mut OutputDir) -> Result<()> {
    let spec = config.grid_spec()?;
    let level = config.max_level(&spec);
    let family = shared_family(config, &spec, level)?;
    m.grid = spec.to_string();
    m.family = format!("{} ({} members)", family.descriptor(), family.len());
    let mut specs: Vec<WeightSpec> = Vec::new();
    for p in &config.corpus.pairs {
        if !specs.contains(&p.weight) {
            specs.push(p.weight.clone());
        }
    }
    let refined = if config.experiment.weight_refine {
        let fine = GridSpec::new(spec.dim(), spec.side(), spec.res() * 2)?;
        Some((fine, shared_family(config, &fine, level)?))
    } else {
        None
    };
    let cubes = dyadic_cubes(&spec, level)?;
    let ps = &config.experiment.p_values;
    let results: Vec<WeightResult> = m.time("weights", || {
        specs
            .par_iter()
            .map(|ws| -> Result<WeightResult> {
                let w = ws.build(spec)?;
                let a1 = a1_witness(&w, &family)?;
                let aps = ps.iter().map(|&p| ap_constant(&w, p, &family)).collect::<Result<Vec<_>>>()?;
                let refined = match &refined {
                    Some((fine, ffam)) => {
                        let w2 = ws.build(*fine)?;
                        let aps2 = ps.iter().map(|&p| ap_constant(&w2, p, ffam)).collect::<Result<Vec<_>>>()?;
                        Some((a1_constant(&w2, ffam)?, aps2))
                    }
                    None => None,
                };
                let dbl = doubling_report(&w, &cubes, a1.value)?;
                let doubling_rows = dbl
                    .entries
                    .iter()
                    .map(|e| {
                        vec![
                            num(e.cube.center[0]),
                            num(e.cube.center[1]),
                            num(e.cube.side),
                            num(e.ratio),
                            num(e.bound),
                            num(e.margin()),
                        ]
                    })
                    .collect();
                Ok(WeightResult {
                    label: ws.label(),
                    constant: matches!(ws, WeightSpec::Constant { .. }),
                    a1: a1.value,
                    a1_center: a1.argmax.center()[0],
                    a1_size: a1.argmax.size(),
                    aps,
                    refined,
                    doubling_violations: dbl.violations(),
                    doubling_min_margin: dbl.min_margin(),
                    doubling_rows,
                    reverse_holder: reverse_holder(&w, 1.0, &family)?.holds(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let tol = config.tolerances.weight_stability;
    let mut header = vec!["weight".to_string(), "a1".into(), "a1_refined".into()];
    for p in ps {
        header.push(format!("a_p{p}"));
        header.push(format!("a_p{p}_refined"));
    }
    header.extend(
        ["a1_argmax_center_x", "a1_argmax_size", "doubling_cubes", "doubling_violations", "doubling_min_margin"]
            .map(String::from),
    );
    let mut rows = Vec::new();
    for r in &results {
        m.check(
            &format!("doubling:{}", r.label),
            r.doubling_violations == 0,
            format!(
                "{} cubes, {} violations, min margin {}",
                r.doubling_rows.len(),
                r.doubling_violations,
                r.doubling_min_margin
            ),
        );
        m.check(
            &format!("reverse-holder:{}", r.label),
            r.reverse_holder,
            "sharp exponent on every family member",
        );
        if r.constant {
            let all_one = std::iter::once(r.a1)
                .chain(r.aps.iter().copied())
                .all(|c| (c - 1.0).abs() <= 1e-12);
            m.check(&format!("constant-weight:{}", r.label), all_one, format!("A1 {}, A_p {:?}", r.a1, r.aps));
        }
        if let Some((a1f, apsf)) = &r.refined {
            let worst = std::iter::once(rel_change(r.a1, *a1f))
                .chain(r.aps.iter().zip(apsf).map(|(a, b)| rel_change(*a, *b)))
                .fold(0.0, f64::max);
            m.check(
                &format!("weight-stability:{}", r.label),
                worst <= tol,
                format!("largest relative change {worst:.4} under N doubling (tolerance {tol})"),
            );
        }
        let mut row = vec![r.label.clone(), num(r.a1)];
        row.push(r.refined.as_ref().map_or(String::new(), |x| num(x.0)));
        for (k, a) in r.aps.iter().enumerate() {
            row.push(num(*a));
            row.push(r.refined.as_ref().map_or(String::new(), |x| num(x.1[k])));
        }
        row.extend([
            num(r.a1_center),
            num(r.a1_size),
            r.doubling_rows.len().to_string(),
            r.doubling_violations.to_string(),
            num(r.doubling_min_margin),
        ]);
        rows.push(row);
        dir.write_csv(
            &format!("doubling/{}.csv", r.label),
            &["center_x", "center_y", "side", "ratio", "bound", "margin"],
            &r.doubling_rows,
        )?;
    }
    dir.write_csv("weights.csv", &header, &rows)
}

// ------------------------------------------------------------------- operators

/// λ values for 𝒢*_λ: the configured list, or `λ₀ = 4 + (2δ+2γ)/n`.
fn suite_lambdas(config: &Config, kernel: &Kernel) -> Vec<f64> {
    if config.experiment.lambdas.is_empty() {
        vec![g_star_threshold(kernel) + 1.0]
    } else {
        config.experiment.lambdas.clone()
    }
}

fn weighted_l2(g: &[f64], w: &Weight) -> f64 {
    g.iter().zip(w.values()).map(|(v, wv)| v * v * wv).sum::<f64>().sqrt()
}

struct OperatorResult {
    ratios: Vec<(OpKind, f64)>,
    truncation: crate::operators::TruncationReport,
}

fn operators_suite(config: &Config, m: &mut Manifest, dir: &mut OutputDir) -> Result<()> {
    let s = setup(config)?;
    describe(m, &s);
    let kernel = operator_kernel(config, m)?;
    let mut lambdas = if config.experiment.lambdas.is_empty() {
        let l0 = suite_lambdas(config, &kernel)[0];
        vec![l0, 2.0 * l0, 4.0 * l0]
    } else {
        config.experiment.lambdas.clone()
    };
    lambdas.sort_by(f64::total_cmp);
    lambdas.dedup();
    let mut ops = vec![OpKind::G, OpKind::S];
    ops.extend(lambdas.iter().map(|&lambda| OpKind::GStar { lambda }));

    let eval = |f: &GridFunction, w: &Weight| -> Result<OperatorResult> {
        let fields = ScaleFields::compute(&kernel, f, &s.scales)?;
        let base = weighted_l2(f.values(), w);
        let ratios = ops
            .iter()
            .map(|&op| Ok((op, ratio_of(weighted_l2(fields.evaluate(op)?.values.values(), w), base))))
            .collect::<Result<Vec<_>>>()?;
        Ok(OperatorResult {
            ratios,
            truncation: truncation_report(&kernel, f, &s.scales)?,
        })
    };
    let results: Vec<OperatorResult> =
        m.time("operators", || s.pairs.par_iter().map(|p| eval(&p.f, &p.w)).collect::<Result<Vec<_>>>())?;

    let one = GridFunction::constant(s.spec, 1.0)?;
    let unit = Weight::constant(s.spec, 1.0)?;
    let constant = eval(&one, &unit)?;
    let worst = constant.ratios.iter().map(|r| r.1).fold(0.0, f64::max);
    m.check("constant-annihilated", worst < 1e-10, format!("largest ratio for f = 1 is {worst:e}"));

    let mut rows = Vec::new();
    let mut trunc_rows = Vec::new();
    let mut sup = vec![0.0f64; ops.len()];
    for (p, r) in s.pairs.iter().zip(&results) {
        let finite = r.ratios.iter().all(|x| x.1.is_finite());
        m.check(&format!("l2-finite:{}", p.name), finite, format!("{:?}", r.ratios.iter().map(|x| x.1).collect::<Vec<_>>()));
        let gstar: Vec<f64> = r.ratios.iter().filter(|x| matches!(x.0, OpKind::GStar { .. })).map(|x| x.1).collect();
        let monotone = gstar.windows(2).all(|w| w[1] <= w[0] * (1.0 + config.tolerances.structural));
        m.check(&format!("gstar-monotone:{}", p.name), monotone, format!("ratios {gstar:?} for lambda {lambdas:?}"));
        for (k, (op, ratio)) in r.ratios.iter().enumerate() {
            sup[k] = sup[k].max(*ratio);
            let lambda = match op {
                OpKind::GStar { lambda } => num(*lambda),
                _ => String::new(),
            };
            rows.push(vec![
                p.name.clone(),
                p.function.label(),
                p.weight.label(),
                op.tag().to_string(),
                lambda,
                num(*ratio),
            ]);
        }
        let t = &r.truncation;
        trunc_rows.push(vec![
            p.name.clone(),
            num(t.exact_energy),
            num(t.grid_energy),
            num(t.below),
            num(t.above),
            num(t.relative_error),
        ]);
    }
    dir.write_csv("operators.csv", &["pair", "function", "weight", "operator", "lambda", "ratio"], &rows)?;
    dir.write_csv(
        "truncation.csv",
        &["pair", "exact_energy", "grid_energy", "below", "above", "relative_error"],
        &trunc_rows,
    )?;
    let sup_rows: Vec<Vec<String>> = ops.iter().zip(&sup).map(|(op, v)| vec![op_label(*op), num(*v)]).collect();
    dir.write_csv("operator_constants.csv", &["operator", "sup_ratio"], &sup_rows)?;
    write_plot(
        dir,
        "",
        "operators_hist",
        PlotScript {
            title: "L2(w) operator ratios over the corpus".into(),
            csv: "operators.csv".into(),
            xlabel: "ratio".into(),
            ylabel: "count".into(),
            kind: PlotKind::Histogram { column: 6, bin_width: 0.05 },
        },
    )
}

// --------------------------------------------------------------- theorem-suite

#[derive(Debug, Clone)]
struct TheoremRow {
    op: OpKind,
    blo: f64,
    bmo: f64,
    ratio: f64,
    /// `(‖F‖²_BLO, ‖F²‖_BLO)` with Lebesgue measure, for 𝒢 and 𝒮.
    square: Option<(f64, f64)>,
}

struct TheoremPair {
    bmo: f64,
    blo: f64,
    rows: Vec<TheoremRow>,
}

fn theorem_run(config: &Config, kernel: &Kernel, ops: &[OpKind]) -> Result<(Setup, Vec<TheoremPair>)> {
    let s = setup(config)?;
    let unit = Weight::constant(s.spec, 1.0)?;
    let results = s
        .pairs
        .par_iter()
        .map(|p| -> Result<TheoremPair> {
            let fields = ScaleFields::compute(kernel, &p.f, &s.scales)?;
            let bmo = bmo_norm(&p.f, &p.w, &s.family)?.value;
            let blo_f = blo_constant(&p.f, &p.w, &s.family)?.value;
            let rows = ops
                .iter()
                .map(|&op| {
                    let t = fields.evaluate(op)?.values;
                    let blo = blo_constant(&t, &p.w, &s.family)?.value;
                    let square = if matches!(op, OpKind::G | OpKind::S) {
                        let plain = blo_constant(&t, &unit, &s.family)?.value;
                        let sq = t.map(|v| v * v)?;
                        Some((plain * plain, blo_constant(&sq, &unit, &s.family)?.value))
                    } else {
                        None
                    };
                    Ok(TheoremRow {
                        op,
                        blo,
                        bmo,
                        ratio: ratio_of(blo, bmo),
                        square,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TheoremPair { bmo, blo: blo_f, rows })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((s, results))
}

const THEOREM_HEADER: [&str; 7] = ["pair", "function", "weight", "operator", "blo_value", "bmo_value", "ratio"];

fn theorem_rows(s: &Setup, results: &[TheoremPair]) -> Vec<Vec<String>> {
    let mut rows = Vec::new();
    for (p, r) in s.pairs.iter().zip(results) {
        for t in &r.rows {
            rows.push(vec![
                p.name.clone(),
                p.function.label(),
                p.weight.label(),
                op_label(t.op),
                num(t.blo),
                num(t.bmo),
                num(t.ratio),
            ]);
        }
    }
    rows
}

fn sup_ratios(ops: &[OpKind], results: &[TheoremPair]) -> Vec<f64> {
    (0..ops.len())
        .map(|k| results.iter().map(|r| r.rows[k].ratio).fold(0.0, f64::max))
        .collect()
}

fn theorem_suite(config: &Config, m: &mut Manifest, dir: &mut OutputDir) -> Result<()> {
    let kernel = operator_kernel(config, m)?;
    if !kernel.is_certified() {
        let why = kernel.certification().map(|c| c.failures.join("; ")).unwrap_or_default();
        return Err(Error::Config(format!(
            "refusing to run the theorem suite: kernel `{}` failed certification ({why})",
            kernel.name()
        )));
    }
    let threshold = g_star_threshold(&kernel);
    let (eligible, skipped): (Vec<f64>, Vec<f64>) =
        suite_lambdas(config, &kernel).into_iter().partition(|&l| l > threshold);
    if !skipped.is_empty() {
        log::warn!("skipping G* at lambda {skipped:?}: not above {threshold}");
    }
    m.check(
        "gstar-eligibility",
        true,
        format!("running lambda {eligible:?}, skipped {skipped:?} (threshold {threshold})"),
    );
    let mut ops = vec![OpKind::G, OpKind::S];
    ops.extend(eligible.iter().map(|&lambda| OpKind::GStar { lambda }));

    let (s, results) = m.time("suite", || theorem_run(config, &kernel, &ops))?;
    describe(m, &s);
    let slack = 1.0 + config.tolerances.structural;
    let mut structural = Vec::new();
    let mut squares = Vec::new();
    for (p, r) in s.pairs.iter().zip(&results) {
        m.check(
            &format!("bmo-le-2blo:{}", p.name),
            r.bmo <= 2.0 * r.blo * slack,
            format!("BMO {} vs 2 BLO {}", r.bmo, 2.0 * r.blo),
        );
        structural.push(vec![p.name.clone(), num(r.bmo), num(r.blo), num(ratio_of(r.bmo, 2.0 * r.blo))]);
        for t in &r.rows {
            let label = op_label(t.op);
            m.check(
                &format!("finite:{}:{label}", p.name),
                t.blo.is_finite() && t.ratio.is_finite(),
                format!("BLO {} BMO {} ratio {}", t.blo, t.bmo, t.ratio),
            );
            if let Some((lhs, rhs)) = t.square {
                m.check(
                    &format!("blo-square:{}:{label}", p.name),
                    lhs <= rhs * slack,
                    format!("|F|^2_BLO {lhs} vs |F^2|_BLO {rhs}"),
                );
                squares.push(vec![p.name.clone(), label, num(lhs), num(rhs)]);
            }
        }
    }
    dir.write_csv("theorem.csv", &THEOREM_HEADER, &theorem_rows(&s, &results))?;
    dir.write_csv("structural.csv", &["pair", "bmo", "blo", "bmo_over_2blo"], &structural)?;
    dir.write_csv("blo_square.csv", &["pair", "operator", "blo_squared", "blo_of_square"], &squares)?;

    let sup = sup_ratios(&ops, &results);
    let refined = if config.experiment.refine {
        let fine = config.refined();
        let (fs, fr) = m.time("suite-refined", || theorem_run(&fine, &kernel, &ops))?;
        dir.write_csv("theorem_refined.csv", &THEOREM_HEADER, &theorem_rows(&fs, &fr))?;
        Some(sup_ratios(&ops, &fr))
    } else {
        None
    };
    let tol = config.tolerances.stability;
    let mut rows = Vec::new();
    for (k, op) in ops.iter().enumerate() {
        let label = op_label(*op);
        let mut row = vec![label.clone(), num(sup[k])];
        m.check(&format!("sup-finite:{label}"), sup[k].is_finite(), format!("C = {}", sup[k]));
        if let Some(fine) = &refined {
            let change = rel_change(sup[k], fine[k]);
            m.check(
                &format!("stability:{label}"),
                change <= tol,
                format!("C = {} at N, {} at 2N; relative change {change:.4} (tolerance {tol})", sup[k], fine[k]),
            );
            row.extend([num(fine[k]), num(change)]);
        } else {
            row.extend([String::new(), String::new()]);
        }
        rows.push(row);
    }
    dir.write_csv(
        "theorem_constants.csv",
        &["operator", "sup_ratio", "sup_ratio_refined", "relative_change"],
        &rows,
    )?;
    write_plot(
        dir,
        "",
        "theorem_hist",
        PlotScript {
            title: "BLO(w) / BMO(w) ratios over the corpus".into(),
            csv: "theorem.csv".into(),
            xlabel: "ratio".into(),
            ylabel: "count".into(),
            kind: PlotKind::Histogram { column: 7, bin_width: 0.05 },
        },
    )
}

// -------------------------------------------------------------------------- jn

struct RootResult {
    label: String,
    tree_text: String,
    tree_ok: bool,
    tree_detail: String,
    blo: crate::czd::JnReport,
    bmo: crate::czd::JnReport,
}

struct EquivalenceRow {
    p: f64,
    blo: f64,
    blo_p: f64,
    k: f64,
}

struct JnPair {
    roots: Vec<RootResult>,
    equivalence: Vec<EquivalenceRow>,
    layer_cake: Vec<(f64, LayerCake)>,
}

fn jn_pair(config: &Config, s: &Setup, p: &Pair, roots: &[DyadicCell]) -> Result<JnPair> {
    let spec = s.spec;
    let ex = &config.experiment;
    let v = p.f.values();
    let roots = roots
        .iter()
        .map(|root| -> Result<RootResult> {
            let tree = cz_decompose(&p.f, &p.w, *root, ex.sigma, ex.max_gen)?;
            let failing: Vec<String> = tree
                .checks
                .iter()
                .filter(|c| !c.holds())
                .map(|c| format!("generation {}", c.generation))
                .collect();
            let tree_detail = format!(
                "{} cubes over {} generations; BLO {} A_w {}{}",
                tree.nodes.len(),
                tree.checks.len(),
                tree.blo,
                tree.a_omega,
                if failing.is_empty() {
                    String::new()
                } else {
                    format!("; failing {}", failing.join(", "))
                }
            );
            let region = Region::dyadic(spec, *root);
            let (lo, hi) = region
                .indices()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(v[i]), b.max(v[i])));
            let top = if hi > lo { hi - lo } else { 1.0 };
            let lambdas = lambda_grid(top, ex.jn_lambdas);
            Ok(RootResult {
                label: root_label(root, spec.dim()),
                tree_text: tree.to_text(),
                tree_ok: tree.holds(),
                tree_detail,
                blo: jn_blo_verify(&p.f, &p.w, *root, &lambdas)?,
                bmo: jn_bmo_verify(&p.f, &p.w, *root, &lambdas)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let a1 = a1_constant(&p.w, &s.family)?;
    let blo = blo_constant(&p.f, &p.w, &s.family)?.value;
    let equivalence = ex
        .p_values
        .iter()
        .map(|&q| -> Result<EquivalenceRow> {
            let nu = power_weight(&p.w, 1.0 - q);
            let ap_nu = ap_constant(&nu, q, &s.family)?;
            Ok(EquivalenceRow {
                p: q,
                blo,
                blo_p: blo_p_norm(&p.f, &p.w, q, &s.family)?.value,
                k: equivalence_constant(q, spec.dim(), a1, ap_nu)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let g = p.f.map(f64::abs)?;
    let full = Region::full(spec);
    let layer_cake = ex
        .p_values
        .iter()
        .map(|&q| Ok((q, layer_cake_check(&g, MeasureKind::Weight, Some(&p.w), q, &full, ex.layer_cake_nodes)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(JnPair {
        roots,
        equivalence,
        layer_cake,
    })
}

fn jn_suite(config: &Config, m: &mut Manifest, dir: &mut OutputDir) -> Result<()> {
    let s = setup(config)?;
    describe(m, &s);
    let top = s.spec.max_dyadic_level();
    let mut roots = Vec::new();
    for &level in &config.experiment.root_levels {
        if level > top {
            return Err(Error::Config(format!("root level {level} exceeds the grid depth {top}")));
        }
        roots.extend(dyadic_cells(&s.spec, level)?.into_iter().filter(|c| c.level == level));
    }
    let results: Vec<JnPair> = m.time("jn", || {
        s.pairs
            .par_iter()
            .map(|p| jn_pair(config, &s, p, &roots))
            .collect::<Result<Vec<_>>>()
    })?;
    let slack = 1.0 + config.tolerances.structural;
    let mut summary = Vec::new();
    let mut equiv = Vec::new();
    let mut cake = Vec::new();
    for (p, r) in s.pairs.iter().zip(&results) {
        for root in &r.roots {
            let id = format!("{}:{}", p.name, root.label);
            m.check(&format!("cz-tree:{id}"), root.tree_ok, root.tree_detail.clone());
            for (kind, rep) in [("blo", &root.blo), ("bmo", &root.bmo)] {
                m.check(
                    &format!("jn-{kind}:{id}"),
                    rep.passed(),
                    format!("norm {} worst margin {}", rep.norm, rep.worst_margin()),
                );
                let base = format!("{}-{kind}", root.label);
                dir.write_with(&format!("jn/{}/{base}.csv", p.name), |f| rep.write_csv(f))?;
                write_plot(
                    dir,
                    &format!("jn/{}", p.name),
                    &base,
                    PlotScript {
                        title: format!("{} {} {kind} tail", p.name, root.label),
                        csv: format!("{base}.csv"),
                        xlabel: "lambda".into(),
                        ylabel: "measure".into(),
                        kind: PlotKind::Lines {
                            series: vec![(2, "measured".into()), (3, "bound".into())],
                            log_y: true,
                        },
                    },
                )?;
            }
            dir.write_text(&format!("trees/{}/{}.txt", p.name, root.label), &root.tree_text)?;
            summary.push(vec![
                p.name.clone(),
                root.label.clone(),
                root.tree_ok.to_string(),
                num(root.blo.norm),
                num(root.bmo.norm),
                num(root.blo.a_omega),
                num(root.blo.worst_margin()),
                num(root.bmo.worst_margin()),
            ]);
        }
        for e in &r.equivalence {
            let ratio = ratio_of(e.blo_p, e.blo);
            m.check(
                &format!("blo-p-upper:{}:p={}", p.name, e.p),
                ratio <= e.k,
                format!("ratio {ratio} vs K {}", e.k),
            );
            m.check(
                &format!("blo-p-lower:{}:p={}", p.name, e.p),
                e.blo <= e.blo_p * slack,
                format!("BLO {} vs BLO^p {}", e.blo, e.blo_p),
            );
            equiv.push(vec![p.name.clone(), num(e.p), num(e.blo), num(e.blo_p), num(ratio), num(e.k)]);
        }
        for (q, lc) in &r.layer_cake {
            m.check(
                &format!("layer-cake-exact:{}:p={q}", p.name),
                lc.gap_exact <= config.tolerances.structural,
                format!("relative gap {:e}", lc.gap_exact),
            );
            if p.function.is_smooth() {
                m.check(
                    &format!("layer-cake-trapezoid:{}:p={q}", p.name),
                    lc.gap_trapezoid < config.tolerances.layer_cake,
                    format!("relative gap {:e} at {} nodes", lc.gap_trapezoid, config.experiment.layer_cake_nodes),
                );
            }
            cake.push(vec![
                p.name.clone(),
                num(*q),
                num(lc.lhs),
                num(lc.rhs_exact),
                num(lc.rhs_trapezoid),
                num(lc.gap_exact),
                num(lc.gap_trapezoid),
            ]);
        }
    }
    dir.write_csv(
        "jn_summary.csv",
        &["pair", "root", "tree_ok", "blo_norm", "bmo_norm", "a_omega", "blo_worst_margin", "bmo_worst_margin"],
        &summary,
    )?;
    dir.write_csv("equivalence.csv", &["pair", "p", "blo", "blo_p", "ratio", "k"], &equiv)?;
    dir.write_csv(
        "layer_cake.csv",
        &["pair", "p", "lhs", "rhs_exact", "rhs_trapezoid", "gap_exact", "gap_trapezoid"],
        &cake,
    )
}
