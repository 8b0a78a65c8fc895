//! Run configuration: a TOML file with `[grid]`, `[scales]`, `[family]`,
//! `[kernel]`, `[experiment]`, `[corpus]`, `[tolerances]` and `[output]`
//! sections. Every key has a default, and unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::operators::ScaleGrid;

use super::corpus::{FunctionSpec, PairSpec, WeightSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    pub scales: ScalesSection,
    pub family: FamilySection,
    pub kernel: KernelSection,
    pub experiment: ExperimentSection,
    pub corpus: CorpusSection,
    pub tolerances: Tolerances,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dim: usize,
    pub side: f64,
    pub res: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dim: 1,
            side: 1.0,
            res: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalesSection {
    pub count: usize,
    /// Defaults to `2h`.
    pub t_min: Option<f64>,
    /// Defaults to `L/4`.
    pub t_max: Option<f64>,
}

impl Default for ScalesSection {
    fn default() -> Self {
        Self {
            count: 64,
            t_min: None,
            t_max: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FamilySection {
    /// Dyadic levels `0..=max_level`, capped at `log2 N`.
    pub max_level: u32,
    /// Random balls reported alongside the cube family.
    pub balls: usize,
    pub ball_seed: u64,
}

impl Default for FamilySection {
    fn default() -> Self {
        Self {
            max_level: 8,
            balls: 0,
            ball_seed: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelSection {
    /// Kernel used by the operator suites.
    pub operator: String,
    /// Kernels certified by `kernel-check`.
    pub check: Vec<String>,
    /// Kernels in `check` whose certification is expected to fail.
    pub expect_fail: Vec<String>,
    pub probe_budget: usize,
    pub box_half: f64,
    pub seed: u64,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            operator: "poisson-derivative".into(),
            check: vec![
                "poisson-derivative".into(),
                "gauss-derivative".into(),
                "zero".into(),
                "gaussian".into(),
            ],
            expect_fail: vec!["gaussian".into()],
            probe_budget: 4096,
            box_half: 64.0,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// λ values for 𝒢*_λ; empty means `4 + (2δ + 2γ)/n`.
    pub lambdas: Vec<f64>,
    /// Exponents for the A_p constants and the norm equivalences.
    pub p_values: Vec<f64>,
    pub sigma: f64,
    pub max_gen: u32,
    /// Dyadic levels whose cells serve as root cubes for `jn`.
    pub root_levels: Vec<u32>,
    pub jn_lambdas: usize,
    pub layer_cake_nodes: usize,
    /// Re-run the theorem suite at doubled `N` and `M`.
    pub refine: bool,
    /// Re-run weight constants at doubled `N`.
    pub weight_refine: bool,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            lambdas: Vec::new(),
            p_values: vec![1.5, 2.0, 3.0],
            sigma: std::f64::consts::E,
            max_gen: 5,
            root_levels: vec![0, 1],
            jn_lambdas: 200,
            layer_cake_nodes: 10_000,
            refine: true,
            weight_refine: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub seed: u64,
    #[serde(rename = "pair")]
    pub pairs: Vec<PairSpec>,
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            seed: 1,
            pairs: default_pairs(),
        }
    }
}

fn default_pairs() -> Vec<PairSpec> {
    use FunctionSpec as F;
    use WeightSpec as W;
    let one = W::Constant { value: 1.0 };
    let power = W::PowerRegularized {
        center: None,
        alpha: 0.5,
    };
    let piecewise = W::Piecewise {
        values: vec![1.0, 4.0, 2.0, 0.5],
    };
    let sine = F::Sine {
        frequency: 1,
        amplitude: 1.0,
    };
    let step = F::Step {
        at: 0.5,
        low: 0.0,
        high: 1.0,
    };
    let saw = F::Sawtooth {
        frequency: 3,
        amplitude: 1.0,
    };
    let spike = F::LogSpike { center: None };
    let spike_off = F::LogSpike {
        center: Some(vec![0.3, 0.3]),
    };
    let mart = F::RandomMartingale {
        depth: 8,
        amplitude: 1.0,
        seed: None,
    };
    [
        (sine.clone(), one.clone()),
        (sine, power.clone()),
        (step.clone(), one.clone()),
        (step, piecewise.clone()),
        (saw.clone(), one.clone()),
        (saw, power.clone()),
        (spike.clone(), one.clone()),
        (spike, power.clone()),
        (spike_off, piecewise.clone()),
        (mart.clone(), one),
        (mart.clone(), piecewise),
        (mart, power),
    ]
    .into_iter()
    .map(|(function, weight)| PairSpec {
        name: None,
        function,
        weight,
    })
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub vanish: f64,
    /// Relative slack for exact structural inequalities.
    pub structural: f64,
    /// Allowed relative drift of suite constants under refinement.
    pub stability: f64,
    /// Allowed relative drift of weight constants under refinement.
    pub weight_stability: f64,
    pub layer_cake: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            vanish: 1e-6,
            structural: 1e-12,
            stability: 0.10,
            weight_stability: 0.05,
            layer_cake: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: "lpsquare-out".into() }
    }
}

impl Default for Config {
    fn default() -> Self {
        Self {
            grid: GridSection::default(),
            scales: ScalesSection::default(),
            family: FamilySection::default(),
            kernel: KernelSection::default(),
            experiment: ExperimentSection::default(),
            corpus: CorpusSection::default(),
            tolerances: Tolerances::default(),
            output: OutputSection::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("configuration serialises")
    }

    /// Applies a `section.key=value` override. The value is parsed as a TOML
    /// literal, falling back to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        let mut root = toml::Value::try_from(&*self).map_err(|e| Error::Config(e.to_string()))?;
        let mut slot = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{key}` does not name a setting")))?;
            if i + 1 == parts.len() {
                table.insert(part.to_string(), value.clone());
                break;
            }
            slot = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        *self = root
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("override `{key}`: {e}")))?;
        Ok(())
    }

    /// Replaces the corpus seed when `LPSQUARE_SEED` is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var("LPSQUARE_SEED") {
            self.corpus.seed = v
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("LPSQUARE_SEED `{v}` is not an integer")))?;
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dim, self.grid.side, self.grid.res)
    }

    pub fn scale_grid(&self, spec: &GridSpec) -> Result<ScaleGrid> {
        let t_min = self.scales.t_min.unwrap_or(2.0 * spec.spacing());
        let t_max = self.scales.t_max.unwrap_or(spec.side() / 4.0);
        ScaleGrid::log(t_min, t_max, self.scales.count)
    }

    /// The same experiment at `2N` samples per axis and `2M` scales.
    pub fn refined(&self) -> Self {
        let mut c = self.clone();
        c.grid.res *= 2;
        c.scales.count *= 2;
        if c.scales.t_min.is_some() {
            c.scales.t_min = c.scales.t_min.map(|t| t / 2.0);
        }
        c
    }

    pub fn max_level(&self, spec: &GridSpec) -> u32 {
        self.family.max_level.min(spec.max_dyadic_level())
    }
}
