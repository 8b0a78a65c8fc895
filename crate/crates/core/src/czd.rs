//! Stopping-time Calderón–Zygmund decomposition over dyadic cubes,
//! distribution functions, the layer-cake identity, and John–Nirenberg
//! tail checks for BLO(ω) and BMO(ω).

use std::f64::consts::E;
use std::fmt::Write as _;

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::family::CubeFamily;
use crate::grid::{Cube, DyadicCell, GridFunction, GridSpec, Region};
use crate::oscillation::{blo_constant, bmo_norm};
use crate::weights::{a1_constant, Weight};

/// Constants of the exponential tail bound.
pub const JN_C1: f64 = E;

pub fn jn_c2(dim: usize) -> f64 {
    1.0 / (2f64.powi(dim as i32) * E)
}

/// Sums and minima of a grid function on every dyadic cell.
struct Pyramid {
    dim: usize,
    sums: Vec<Vec<f64>>,
    mins: Vec<Vec<f64>>,
}

impl Pyramid {
    fn new(spec: &GridSpec, values: &[f64]) -> Self {
        let dim = spec.dim();
        let top = spec.max_dyadic_level() as usize;
        let mut sums = vec![Vec::new(); top + 1];
        let mut mins = vec![Vec::new(); top + 1];
        sums[top] = values.to_vec();
        mins[top] = values.to_vec();
        for k in (0..top).rev() {
            let per = 1usize << k;
            let fw = per * 2;
            let cells = if dim == 1 { per } else { per * per };
            let mut s = Vec::with_capacity(cells);
            let mut m = Vec::with_capacity(cells);
            for c in 0..cells {
                let kids: Vec<usize> = if dim == 1 {
                    vec![2 * c, 2 * c + 1]
                } else {
                    let (a, b) = (2 * (c / per), 2 * (c % per));
                    vec![a * fw + b, a * fw + b + 1, (a + 1) * fw + b, (a + 1) * fw + b + 1]
                };
                s.push(kids.iter().map(|&i| sums[k + 1][i]).sum());
                m.push(kids.iter().map(|&i| mins[k + 1][i]).fold(f64::INFINITY, f64::min));
            }
            sums[k] = s;
            mins[k] = m;
        }
        Self { dim, sums, mins }
    }

    fn slot(&self, c: DyadicCell) -> usize {
        if self.dim == 1 {
            c.pos[0]
        } else {
            c.pos[0] * (1usize << c.level) + c.pos[1]
        }
    }

    fn sum(&self, c: DyadicCell) -> f64 {
        self.sums[c.level as usize][self.slot(c)]
    }

    fn min(&self, c: DyadicCell) -> f64 {
        self.mins[c.level as usize][self.slot(c)]
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TreeNode {
    /// 1-based; id 0 denotes the root cube.
    pub id: usize,
    pub generation: u32,
    pub parent: usize,
    pub cell: DyadicCell,
    pub cube: Cube,
    /// Mean of `f̃ − min_parent f̃` over the cube.
    pub oscmean: f64,
    /// `min_cube f̃ − min_parent f̃`.
    pub mininc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerationCheck {
    pub generation: u32,
    pub count: usize,
    pub measure: f64,
    /// `m(Q) / σ^k`
    pub measure_bound: f64,
    /// (A): pairwise disjoint, each inside its parent.
    pub nested_disjoint: bool,
    /// (B): every oscillation mean lies in `(A_ω σ, A_ω 2^n σ]`.
    pub oscmean_in_range: bool,
    /// (C): every min-increment lies in `[0, A_ω 2^n σ]`.
    pub mininc_in_range: bool,
    /// (D)
    pub measure_ok: bool,
    /// Largest `f̃ − min_Q f̃` off the generation's union.
    pub off_union_max: f64,
    /// `k σ 2^n A_ω`
    pub off_union_bound: f64,
    /// (E)
    pub off_union_ok: bool,
}

impl GenerationCheck {
    pub fn holds(&self) -> bool {
        self.nested_disjoint && self.oscmean_in_range && self.mininc_in_range && self.measure_ok && self.off_union_ok
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionTree {
    pub root: DyadicCell,
    pub root_cube: Cube,
    pub sigma: f64,
    /// `[ω]_{A1}` over the dyadic sub-cubes of the root.
    pub a1: f64,
    pub min_weight: f64,
    /// `A_ω = [ω]_{A1} min_Q ω`
    pub a_omega: f64,
    /// `‖f‖_{BLO(ω)}` over the dyadic sub-cubes of the root; `f̃ = f / blo`.
    pub blo: f64,
    pub nodes: Vec<TreeNode>,
    /// Node indices per generation (generation `k` at index `k - 1`).
    pub generations: Vec<Vec<usize>>,
    pub checks: Vec<GenerationCheck>,
}

impl DecompositionTree {
    pub fn holds(&self) -> bool {
        self.checks.iter().all(GenerationCheck::holds)
    }

    pub fn generation(&self, k: u32) -> impl Iterator<Item = &TreeNode> + '_ {
        let ids: &[usize] = match k {
            0 => &[],
            _ => self.generations.get(k as usize - 1).map(Vec::as_slice).unwrap_or(&[]),
        };
        ids.iter().map(move |&i| &self.nodes[i])
    }

    /// One line per selected cube:
    /// `gen=<k> parent=<id> center=<..> side=<..> oscmean=<..> mininc=<..>`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for node in &self.nodes {
            let c = node.cube.center;
            let center = if node.cube.dim == 1 {
                format!("{}", c[0])
            } else {
                format!("{},{}", c[0], c[1])
            };
            let _ = writeln!(
                out,
                "gen={} parent={} center={} side={} oscmean={} mininc={}",
                node.generation, node.parent, center, node.cube.side, node.oscmean, node.mininc
            );
        }
        out
    }
}

/// Decomposes `f` inside the dyadic cube `root` for `max_gen` generations.
///
/// Children are scanned in row-major order; a child is selected the first
/// time the mean of `f̃ − min_P f̃` over it exceeds `A_ω σ`, where `P` is the
/// current stopping cube, and otherwise searched recursively. Single-sample
/// cubes are never selected.
pub fn cz_decompose(
    f: &GridFunction,
    w: &Weight,
    root: DyadicCell,
    sigma: f64,
    max_gen: u32,
) -> Result<DecompositionTree> {
    if !(sigma > 1.0) {
        return Err(Error::InvalidArgument(format!("sigma must exceed 1, got {sigma}")));
    }
    let spec = *f.spec();
    let top = spec.max_dyadic_level();
    if root.level > top {
        return Err(Error::InvalidArgument(format!("root level {} exceeds {top}", root.level)));
    }
    let family = CubeFamily::dyadic_within(spec, root, top)?;
    let a1 = a1_constant(w, &family)?;
    let root_region = Region::dyadic(spec, root);
    let min_weight = root_region
        .indices()
        .iter()
        .map(|&i| w.values()[i])
        .fold(f64::INFINITY, f64::min);
    let a_omega = a1 * min_weight;
    let blo = blo_constant(f, w, &family)?.value;

    let scale = if blo > 0.0 { 1.0 / blo } else { 0.0 };
    let ft: Vec<f64> = f.values().iter().map(|v| v * scale).collect();
    let pyr = Pyramid::new(&spec, &ft);
    let threshold = a_omega * sigma;

    let mut nodes: Vec<TreeNode> = Vec::new();
    let mut generations: Vec<Vec<usize>> = Vec::new();
    let mut stopping: Vec<(usize, DyadicCell)> = vec![(0, root)];
    for g in 1..=max_gen {
        let mut this = Vec::new();
        if blo > 0.0 {
            for &(pid, pcell) in &stopping {
                let pmin = pyr.min(pcell);
                let mut stack: Vec<DyadicCell> = pcell.children(spec.dim()).into_iter().rev().collect();
                while let Some(c) = stack.pop() {
                    if c.level >= top {
                        continue;
                    }
                    let n_c = c.samples_per_axis(&spec).pow(spec.dim() as u32) as f64;
                    let mean = pyr.sum(c) / n_c - pmin;
                    if mean > threshold {
                        nodes.push(TreeNode {
                            id: nodes.len() + 1,
                            generation: g,
                            parent: pid,
                            cell: c,
                            cube: c.cube(&spec),
                            oscmean: mean,
                            mininc: pyr.min(c) - pmin,
                        });
                        this.push(nodes.len() - 1);
                    } else {
                        stack.extend(c.children(spec.dim()).into_iter().rev());
                    }
                }
            }
        }
        stopping = this.iter().map(|&i| (nodes[i].id, nodes[i].cell)).collect();
        generations.push(this);
    }

    let mut tree = DecompositionTree {
        root,
        root_cube: root.cube(&spec),
        sigma,
        a1,
        min_weight,
        a_omega,
        blo,
        nodes,
        generations,
        checks: Vec::new(),
    };
    tree.checks = check_tree(&tree, &spec, &ft);
    Ok(tree)
}

/// Re-derives properties (A)–(E) for every generation from the samples.
fn check_tree(tree: &DecompositionTree, spec: &GridSpec, ft: &[f64]) -> Vec<GenerationCheck> {
    const SLACK: f64 = 1e-12;
    let dim = spec.dim();
    let two_n = 2f64.powi(dim as i32);
    let a = tree.a_omega;
    let sigma = tree.sigma;
    let root_region = Region::dyadic(*spec, tree.root);
    let mq = crate::grid::measure(&root_region);
    let root_min = root_region.indices().iter().map(|&i| ft[i]).fold(f64::INFINITY, f64::min);
    let cell_of = |id: usize| if id == 0 { tree.root } else { tree.nodes[id - 1].cell };

    let mut out = Vec::new();
    for (k, ids) in tree.generations.iter().enumerate() {
        let g = k as u32 + 1;
        let mut cover = vec![0u32; spec.len()];
        let mut nested = true;
        let mut b_ok = true;
        let mut c_ok = true;
        let mut measure = 0.0;
        for &i in ids {
            let node = &tree.nodes[i];
            let parent = cell_of(node.parent);
            let pr = Region::dyadic(*spec, parent);
            let r = Region::dyadic(*spec, node.cell);
            nested &= node.cell.is_within(&parent) && node.cell != parent;
            let pmin = pr.indices().iter().map(|&j| ft[j]).fold(f64::INFINITY, f64::min);
            let mean = r.indices().iter().map(|&j| ft[j] - pmin).sum::<f64>() / r.len() as f64;
            let cmin = r.indices().iter().map(|&j| ft[j]).fold(f64::INFINITY, f64::min);
            b_ok &= mean > a * sigma && mean <= a * two_n * sigma * (1.0 + SLACK);
            c_ok &= cmin - pmin >= 0.0 && cmin - pmin <= a * two_n * sigma * (1.0 + SLACK);
            for &j in r.indices() {
                cover[j] += 1;
            }
            measure += crate::grid::measure(&r);
        }
        nested &= cover.iter().all(|&c| c <= 1);
        let off_max = root_region
            .indices()
            .iter()
            .filter(|&&j| cover[j] == 0)
            .map(|&j| ft[j] - root_min)
            .fold(0.0, f64::max);
        let off_bound = g as f64 * sigma * two_n * a;
        let bound = mq / sigma.powi(g as i32);
        out.push(GenerationCheck {
            generation: g,
            count: ids.len(),
            measure,
            measure_bound: bound,
            nested_disjoint: nested,
            oscmean_in_range: b_ok,
            mininc_in_range: c_ok,
            measure_ok: measure <= bound * (1.0 + SLACK),
            off_union_max: off_max,
            off_union_bound: off_bound,
            off_union_ok: off_max <= off_bound * (1.0 + SLACK),
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MeasureKind {
    Lebesgue,
    Weight,
    /// `ν = ω^{1−p}`
    PowerWeight(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionFunction {
    pub lambdas: Vec<f64>,
    /// `μ({x ∈ E : g(x) > λ_i})`
    pub masses: Vec<f64>,
    /// `μ(E)`
    pub total: f64,
}

fn sample_masses(mu: MeasureKind, w: Option<&Weight>, region: &Region) -> Result<Vec<f64>> {
    let vol = region.spec().cell_volume();
    let need = || w.ok_or_else(|| Error::InvalidArgument("this measure needs a weight".into()));
    Ok(match mu {
        MeasureKind::Lebesgue => vec![vol; region.len()],
        MeasureKind::Weight => {
            let w = need()?;
            region.indices().iter().map(|&i| w.values()[i] * vol).collect()
        }
        MeasureKind::PowerWeight(p) => {
            let w = need()?;
            region.indices().iter().map(|&i| w.values()[i].powf(1.0 - p) * vol).collect()
        }
    })
}

/// `λ ↦ μ({g > λ})` on `region` at every `λ` of an increasing grid.
pub fn distribution_function(
    g: &GridFunction,
    mu: MeasureKind,
    w: Option<&Weight>,
    region: &Region,
    lambdas: &[f64],
) -> Result<DistributionFunction> {
    region.check(g)?;
    if lambdas.windows(2).any(|p| !(p[0] < p[1])) {
        return Err(Error::InvalidArgument("lambda grid must be strictly increasing".into()));
    }
    let masses = sample_masses(mu, w, region)?;
    let mut pairs: Vec<(f64, f64)> = region
        .indices()
        .iter()
        .zip(&masses)
        .map(|(&i, &m)| (g.values()[i], m))
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut prefix = Vec::with_capacity(pairs.len() + 1);
    prefix.push(0.0);
    for (_, m) in &pairs {
        prefix.push(prefix.last().unwrap() + m);
    }
    let out = lambdas
        .iter()
        .map(|&lam| prefix[pairs.partition_point(|(v, _)| *v > lam)])
        .collect();
    Ok(DistributionFunction {
        lambdas: lambdas.to_vec(),
        masses: out,
        total: *prefix.last().unwrap(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LayerCake {
    /// `Σ_E |g|^p dμ`
    pub lhs: f64,
    /// Exact integration of the step distribution function.
    pub rhs_exact: f64,
    /// Trapezoid rule of `p λ^{p−1} d(λ)` on `nodes` points of `[0, 1.01 max|g|]`.
    pub rhs_trapezoid: f64,
    pub gap_exact: f64,
    pub gap_trapezoid: f64,
}

pub fn layer_cake_check(
    g: &GridFunction,
    mu: MeasureKind,
    w: Option<&Weight>,
    p: f64,
    region: &Region,
    nodes: usize,
) -> Result<LayerCake> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be at least 1, got {p}")));
    }
    if nodes < 2 {
        return Err(Error::InvalidArgument("need at least two lambda nodes".into()));
    }
    region.check(g)?;
    let masses = sample_masses(mu, w, region)?;
    let abs: Vec<f64> = region.indices().iter().map(|&i| g.values()[i].abs()).collect();
    let lhs: f64 = abs.iter().zip(&masses).map(|(v, m)| v.powf(p) * m).sum();

    // d is constant on [v_{i-1}, v_i) between consecutive distinct values.
    let mut pairs: Vec<(f64, f64)> = abs.iter().cloned().zip(masses.iter().cloned()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut above: f64 = masses.iter().sum();
    let mut prev = 0.0f64;
    let mut rhs_exact = 0.0;
    let mut i = 0;
    while i < pairs.len() {
        let v = pairs[i].0;
        rhs_exact += above * (v.powf(p) - prev.powf(p));
        while i < pairs.len() && pairs[i].0 == v {
            above -= pairs[i].1;
            i += 1;
        }
        prev = v;
    }

    let top = abs.iter().cloned().fold(0.0, f64::max) * 1.01;
    let rhs_trapezoid = if top > 0.0 {
        let lambdas: Vec<f64> = (0..nodes).map(|j| top * j as f64 / (nodes - 1) as f64).collect();
        let abs_g = g.map(f64::abs)?;
        let d = distribution_function(&abs_g, mu, w, region, &lambdas)?;
        let step = top / (nodes - 1) as f64;
        let f: Vec<f64> = lambdas
            .iter()
            .zip(&d.masses)
            .map(|(&l, &m)| if l == 0.0 && p > 1.0 { 0.0 } else { p * l.powf(p - 1.0) * m })
            .collect();
        step * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[nodes - 1]))
    } else {
        0.0
    };
    let rel = |x: f64| if lhs > 0.0 { (x - lhs).abs() / lhs } else { x.abs() };
    Ok(LayerCake {
        lhs,
        rhs_exact,
        rhs_trapezoid,
        gap_exact: rel(rhs_exact),
        gap_trapezoid: rel(rhs_trapezoid),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct JnRow {
    pub lambda: f64,
    pub measured: f64,
    pub bound: f64,
    /// `bound / measured`, infinite when nothing exceeds `λ`.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct JnReport {
    pub rows: Vec<JnRow>,
    /// `‖f‖_{BLO(ω)}` or `‖f‖_{BMO(ω)}` over the dyadic sub-cubes of the root.
    pub norm: f64,
    pub a_omega: f64,
    pub root_measure: f64,
}

impl JnReport {
    pub const CSV_HEADER: [&'static str; 4] = ["lambda", "measured", "bound", "margin"];

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.measured <= r.bound)
    }

    pub fn worst_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    /// Least-squares slope of `ln measured` against `λ` over rows with
    /// positive measure, or `None` with fewer than two such rows.
    pub fn tail_slope(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.measured > 0.0)
            .map(|r| (r.lambda, r.measured.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }

    /// Slope of `ln bound` in `λ`.
    pub fn bound_slope(&self, dim: usize) -> f64 {
        if self.norm > 0.0 {
            -jn_c2(dim) / (self.a_omega * self.norm)
        } else {
            0.0
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(Self::CSV_HEADER)?;
        for r in &self.rows {
            wtr.write_record([
                r.lambda.to_string(),
                r.measured.to_string(),
                r.bound.to_string(),
                r.margin.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn jn_rows(excess: &[f64], h_n: f64, mq: f64, a_omega: f64, norm: f64, dim: usize, lambdas: &[f64]) -> Vec<JnRow> {
    let mut sorted = excess.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    lambdas
        .iter()
        .map(|&lambda| {
            let count = sorted.partition_point(|&v| v > lambda);
            let measured = count as f64 * h_n;
            let exponent = if norm > 0.0 { jn_c2(dim) * lambda / (a_omega * norm) } else { 0.0 };
            let bound = JN_C1 * mq * (-exponent).exp();
            let margin = if measured > 0.0 { bound / measured } else { f64::INFINITY };
            JnRow { lambda, measured, bound, margin }
        })
        .collect()
}

struct RootData {
    family: CubeFamily,
    region: Region,
    a_omega: f64,
    mq: f64,
}

fn root_data(f: &GridFunction, w: &Weight, root: DyadicCell) -> Result<RootData> {
    let spec = *f.spec();
    let family = CubeFamily::dyadic_within(spec, root, spec.max_dyadic_level())?;
    let a1 = a1_constant(w, &family)?;
    let region = Region::dyadic(spec, root);
    let wmin = region.indices().iter().map(|&i| w.values()[i]).fold(f64::INFINITY, f64::min);
    let mq = crate::grid::measure(&region);
    Ok(RootData {
        family,
        region,
        a_omega: a1 * wmin,
        mq,
    })
}

/// `m({x ∈ Q : f − min_Q f > λ}) <= e m(Q) exp(−λ / (A_ω 2^n e ‖f‖_{BLO(ω)}))`.
pub fn jn_blo_verify(f: &GridFunction, w: &Weight, root: DyadicCell, lambdas: &[f64]) -> Result<JnReport> {
    let rd = root_data(f, w, root)?;
    let norm = blo_constant(f, w, &rd.family)?.value;
    let v = f.values();
    let min = rd.region.indices().iter().map(|&i| v[i]).fold(f64::INFINITY, f64::min);
    let excess: Vec<f64> = rd.region.indices().iter().map(|&i| v[i] - min).collect();
    let spec = f.spec();
    Ok(JnReport {
        rows: jn_rows(&excess, spec.cell_volume(), rd.mq, rd.a_omega, norm, spec.dim(), lambdas),
        norm,
        a_omega: rd.a_omega,
        root_measure: rd.mq,
    })
}

/// The same tail bound for `|f − f_Q|` with `‖f‖_{BMO(ω)}`.
pub fn jn_bmo_verify(f: &GridFunction, w: &Weight, root: DyadicCell, lambdas: &[f64]) -> Result<JnReport> {
    let rd = root_data(f, w, root)?;
    let norm = bmo_norm(f, w, &rd.family)?.value;
    let v = f.values();
    let mean = rd.region.indices().iter().map(|&i| v[i]).sum::<f64>() / rd.region.len() as f64;
    let excess: Vec<f64> = rd.region.indices().iter().map(|&i| (v[i] - mean).abs()).collect();
    let spec = f.spec();
    Ok(JnReport {
        rows: jn_rows(&excess, spec.cell_volume(), rd.mq, rd.a_omega, norm, spec.dim(), lambdas),
        norm,
        a_omega: rd.a_omega,
        root_measure: rd.mq,
    })
}

/// `count` equally spaced thresholds in `(0, top]`.
pub fn lambda_grid(top: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|j| top * j as f64 / count as f64).collect()
}

/// `K = [ω]_{A1} (C* p Γ(p))^{1/p} C₁^{δ/p} / (C₂ δ)` with `C* = 2`,
/// `C₁ = e`, `C₂ = 1/(2^n e)`, `δ = ε/(1+ε)`, `ε = 1/(2^{2p+1+n} [ν]_{A_p})`.
pub fn equivalence_constant(p: f64, n: usize, a1: f64, ap_of_nu: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("p must exceed 1, got {p}")));
    }
    let eps = 1.0 / (2f64.powf(2.0 * p + 1.0 + n as f64) * ap_of_nu);
    let delta = eps / (1.0 + eps);
    let cstar = 2.0;
    Ok(a1 * (cstar * p * gamma(p)).powf(1.0 / p) * JN_C1.powf(delta / p) / (jn_c2(n) * delta))
}
