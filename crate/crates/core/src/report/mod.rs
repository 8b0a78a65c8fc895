//! Configuration, the test corpus and everything the drivers write to disk:
//! CSV tables, gnuplot scripts and the JSON run manifest.

pub mod config;
pub mod corpus;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::Result;
use crate::kernels::Certification;

pub use config::Config;
pub use corpus::{FunctionSpec, PairSpec, WeightSpec};

/// Shortest round-trip decimal form; exponent notation outside `[1e-5, 1e16)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-5..1e16).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// A directory that collects a run's outputs and remembers what was written.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn prepare(&mut self, rel: &str) -> Result<PathBuf> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        self.written.push(rel.to_string());
        Ok(path)
    }

    pub fn write_csv<S: AsRef<str>>(&mut self, rel: &str, header: &[S], rows: &[Vec<String>]) -> Result<()> {
        let path = self.prepare(rel)?;
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(header.iter().map(AsRef::as_ref))?;
        for row in rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn write_text(&mut self, rel: &str, text: &str) -> Result<()> {
        let path = self.prepare(rel)?;
        fs::write(path, text)?;
        Ok(())
    }

    /// Writes through a caller-supplied serializer, e.g. `JnReport::write_csv`.
    pub fn write_with(&mut self, rel: &str, f: impl FnOnce(fs::File) -> Result<()>) -> Result<()> {
        let path = self.prepare(rel)?;
        f(fs::File::create(path)?)
    }
}

#[derive(Debug, Clone)]
pub enum PlotKind {
    /// Columns plotted against the first column; `(column, legend)` with
    /// 1-based column numbers as gnuplot expects.
    Lines { series: Vec<(usize, String)>, log_y: bool },
    /// Frequency histogram of one column.
    Histogram { column: usize, bin_width: f64 },
}

/// A gnuplot script over a CSV file, referenced by relative path.
#[derive(Debug, Clone)]
pub struct PlotScript {
    pub title: String,
    pub csv: String,
    pub xlabel: String,
    pub ylabel: String,
    pub kind: PlotKind,
}

impl PlotScript {
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str("set datafile separator ','\n");
        s.push_str("set key outside\n");
        s.push_str(&format!("set title \"{}\"\n", self.title));
        s.push_str(&format!("set xlabel \"{}\"\n", self.xlabel));
        s.push_str(&format!("set ylabel \"{}\"\n", self.ylabel));
        let png = Path::new(&self.csv).with_extension("png");
        s.push_str("set terminal pngcairo size 900,600\n");
        s.push_str(&format!("set output \"{}\"\n", png.display()));
        match &self.kind {
            PlotKind::Lines { series, log_y } => {
                if *log_y {
                    s.push_str("set logscale y\n");
                }
                let plots: Vec<String> = series
                    .iter()
                    .map(|(col, name)| format!("\"{}\" using 1:{col} skip 1 with lines title \"{name}\"", self.csv))
                    .collect();
                s.push_str(&format!("plot {}\n", plots.join(", \\\n     ")));
            }
            PlotKind::Histogram { column, bin_width } => {
                s.push_str(&format!("binwidth = {bin_width}\n"));
                s.push_str("bin(x) = binwidth * floor(x / binwidth)\n");
                s.push_str("set style fill solid 0.5\n");
                s.push_str(&format!(
                    "plot \"{}\" using (bin(${column})):(1.0) skip 1 smooth freq with boxes title \"count\"\n",
                    self.csv
                ));
            }
        }
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub grid: String,
    pub scales: String,
    pub family: String,
    pub certifications: Vec<Certification>,
    pub timings: Vec<Timing>,
    pub criteria: Vec<Criterion>,
    pub outputs: Vec<String>,
    pub error: Option<String>,
    pub passed: bool,
}

impl Manifest {
    pub fn new(command: &str, config: &Config) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            grid: String::new(),
            scales: String::new(),
            family: String::new(),
            certifications: Vec::new(),
            timings: Vec::new(),
            criteria: Vec::new(),
            outputs: Vec::new(),
            error: None,
            passed: false,
        }
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(Timing {
            stage: stage.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let detail = detail.into();
        if passed {
            log::info!("PASS {name}: {detail}");
        } else {
            log::warn!("FAIL {name}: {detail}");
        }
        self.criteria.push(Criterion {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    /// Seals the manifest: passes iff there is no error and every check passed.
    pub fn finish(&mut self, outputs: &[String]) {
        self.outputs = outputs.to_vec();
        self.passed = self.error.is_none() && self.criteria.iter().all(|c| c.passed);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
