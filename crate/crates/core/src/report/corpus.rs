//! Named test functions and weights used by the experiment drivers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dyadic_cells, GridFunction, GridSpec, Point};
use crate::weights::Weight;

pub const FUNCTION_FAMILIES: &[&str] = &["step", "sawtooth", "sine", "log-spike", "random-martingale"];
pub const WEIGHT_FAMILIES: &[&str] = &["constant", "power-regularized", "piecewise"];

fn default_one() -> f64 {
    1.0
}
fn default_half() -> f64 {
    0.5
}
fn default_frequency() -> u32 {
    1
}
fn default_depth() -> u32 {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionSpec {
    /// `high` where `x₀ < at·L`, `low` elsewhere.
    Step {
        #[serde(default = "default_half")]
        at: f64,
        #[serde(default)]
        low: f64,
        #[serde(default = "default_one")]
        high: f64,
    },
    /// `amplitude · frac(k x₀ / L)`.
    Sawtooth {
        #[serde(default = "default_frequency")]
        frequency: u32,
        #[serde(default = "default_one")]
        amplitude: f64,
    },
    /// `amplitude · Π sin(2π k x_i / L)`.
    Sine {
        #[serde(default = "default_frequency")]
        frequency: u32,
        #[serde(default = "default_one")]
        amplitude: f64,
    },
    /// `log(1 / max(|x − c|, h))`; `center` is given in units of `L` and
    /// defaults to the middle of the box.
    LogSpike {
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Dyadic martingale with mean-zero uniform increments on the children
    /// of every cell above level `depth`.
    RandomMartingale {
        #[serde(default = "default_depth")]
        depth: u32,
        #[serde(default = "default_one")]
        amplitude: f64,
        #[serde(default)]
        seed: Option<u64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant {
        #[serde(default = "default_one")]
        value: f64,
    },
    /// `max(|x − c|, h)^{−α}`; `center` in units of `L`.
    PowerRegularized {
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default = "default_half")]
        alpha: f64,
    },
    /// Constant on equal slabs along axis 0.
    Piecewise { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub function: FunctionSpec,
    pub weight: WeightSpec,
}

fn center_point(spec: &GridSpec, center: &Option<Vec<f64>>) -> Result<Point> {
    let l = spec.side();
    match center {
        None => Ok([l / 2.0, if spec.dim() == 2 { l / 2.0 } else { 0.0 }]),
        Some(c) => {
            if c.len() < spec.dim() || c.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Config(format!(
                    "center {c:?} must have {} coordinates in [0, 1]",
                    spec.dim()
                )));
            }
            Ok([c[0] * l, if spec.dim() == 2 { c[1] * l } else { 0.0 }])
        }
    }
}

fn fmt_num(x: f64) -> String {
    let s = format!("{x}");
    s.replace('.', "p").replace('-', "m")
}

impl FunctionSpec {
    pub fn label(&self) -> String {
        match self {
            FunctionSpec::Step { at, .. } => format!("step-{}", fmt_num(*at)),
            FunctionSpec::Sawtooth { frequency, .. } => format!("sawtooth-k{frequency}"),
            FunctionSpec::Sine { frequency, .. } => format!("sine-k{frequency}"),
            FunctionSpec::LogSpike { center: None } => "logspike".into(),
            FunctionSpec::LogSpike { center: Some(c) } => {
                let parts: Vec<String> = c.iter().map(|v| fmt_num(*v)).collect();
                format!("logspike-{}", parts.join("-"))
            }
            FunctionSpec::RandomMartingale { depth, .. } => format!("martingale-d{depth}"),
        }
    }

    /// True for families sampled from a smooth function.
    pub fn is_smooth(&self) -> bool {
        matches!(self, FunctionSpec::Sine { .. })
    }

    /// Samples the function; `seed` is used by random families that carry
    /// no seed of their own.
    pub fn build(&self, spec: GridSpec, seed: u64) -> Result<GridFunction> {
        let l = spec.side();
        let dim = spec.dim();
        match *self {
            FunctionSpec::Step { at, low, high } => {
                GridFunction::from_fn(spec, |x| if x[0] < at * l { high } else { low })
            }
            FunctionSpec::Sawtooth { frequency, amplitude } => {
                let k = frequency as f64;
                GridFunction::from_fn(spec, |x| amplitude * (k * x[0] / l).fract())
            }
            FunctionSpec::Sine { frequency, amplitude } => {
                let w = 2.0 * std::f64::consts::PI * frequency as f64 / l;
                GridFunction::from_fn(spec, |x| {
                    let s = (w * x[0]).sin();
                    amplitude * if dim == 2 { s * (w * x[1]).sin() } else { s }
                })
            }
            FunctionSpec::LogSpike { ref center } => {
                let c = center_point(&spec, center)?;
                let h = spec.spacing();
                GridFunction::from_fn(spec, |x| {
                    let d = spec.periodic_distance(x, c).max(h);
                    -d.ln()
                })
            }
            FunctionSpec::RandomMartingale {
                depth,
                amplitude,
                seed: own,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(own.unwrap_or(seed));
                let depth = depth.min(spec.max_dyadic_level());
                let mut values = vec![0.0; spec.len()];
                for cell in dyadic_cells(&spec, depth.saturating_sub(1))? {
                    if cell.level >= depth {
                        continue;
                    }
                    let children = cell.children(dim);
                    let incs: Vec<f64> = children.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
                    let mean = incs.iter().sum::<f64>() / incs.len() as f64;
                    for (child, d) in children.iter().zip(&incs) {
                        for i in child.indices(&spec) {
                            values[i] += amplitude * (d - mean);
                        }
                    }
                }
                GridFunction::new(spec, values)
            }
        }
    }
}

impl WeightSpec {
    pub fn label(&self) -> String {
        match self {
            WeightSpec::Constant { value } => format!("const-{}", fmt_num(*value)),
            WeightSpec::PowerRegularized { alpha, .. } => format!("power-a{}", fmt_num(*alpha)),
            WeightSpec::Piecewise { values } => format!("piecewise{}", values.len()),
        }
    }

    pub fn build(&self, spec: GridSpec) -> Result<Weight> {
        match self {
            WeightSpec::Constant { value } => {
                if !(*value > 0.0 && value.is_finite()) {
                    return Err(Error::Config(format!("constant weight must be positive, got {value}")));
                }
                Weight::constant(spec, *value)
            }
            WeightSpec::PowerRegularized { center, alpha } => {
                let n = spec.dim() as f64;
                if !(0.0..n).contains(alpha) {
                    return Err(Error::Config(format!("power weight exponent must lie in [0, {n}), got {alpha}")));
                }
                Weight::power_regularized(spec, center_point(&spec, center)?, *alpha)
            }
            WeightSpec::Piecewise { values } => {
                if values.is_empty() || values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::Config("piecewise weight needs positive finite values".into()));
                }
                let l = spec.side();
                let k = values.len();
                let base = GridFunction::from_fn(spec, |x| {
                    let slab = ((x[0] / l) * k as f64).floor() as usize;
                    values[slab.min(k - 1)]
                })?;
                Ok(Weight::new(base))
            }
        }
    }
}

impl PairSpec {
    pub fn display_name(&self, index: usize) -> String {
        match &self.name {
            Some(n) => n.clone(),
            None => format!("{index:02}-{}-{}", self.function.label(), self.weight.label()),
        }
    }
}

/// Parses a function family from its name with default parameters.
pub fn function_by_name(name: &str) -> Result<FunctionSpec> {
    let spec = match name {
        "step" => FunctionSpec::Step {
            at: 0.5,
            low: 0.0,
            high: 1.0,
        },
        "sawtooth" => FunctionSpec::Sawtooth {
            frequency: 1,
            amplitude: 1.0,
        },
        "sine" => FunctionSpec::Sine {
            frequency: 1,
            amplitude: 1.0,
        },
        "log-spike" => FunctionSpec::LogSpike { center: None },
        "random-martingale" => FunctionSpec::RandomMartingale {
            depth: default_depth(),
            amplitude: 1.0,
            seed: None,
        },
        other => {
            return Err(Error::Unknown {
                kind: "function family",
                name: other.into(),
                valid: FUNCTION_FAMILIES.join(", "),
            })
        }
    };
    Ok(spec)
}

/// Parses a weight family from its name with default parameters.
pub fn weight_by_name(name: &str) -> Result<WeightSpec> {
    let spec = match name {
        "constant" => WeightSpec::Constant { value: 1.0 },
        "power-regularized" => WeightSpec::PowerRegularized {
            center: None,
            alpha: 0.5,
        },
        "piecewise" => WeightSpec::Piecewise {
            values: vec![1.0, 4.0, 2.0, 0.5],
        },
        other => {
            return Err(Error::Unknown {
                kind: "weight family",
                name: other.into(),
                valid: WEIGHT_FAMILIES.join(", "),
            })
        }
    };
    Ok(spec)
}
