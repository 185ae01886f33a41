//! Run configuration, CSV snapshots, the run manifest and post-hoc
//! diagnostics.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::driver::{continue_in_time, DriverConfig, RunResult, RunStatus, SystemState, Trajectory};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::initial_data::{synthesize, validate, InitialTriple, ValidationReport};
use crate::model::{ModelConfig, ModelParams};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DriverSection {
    pub dt: f64,
    #[serde(rename = "T_init")]
    pub t_init: f64,
    pub horizon: f64,
    pub outer_tol: f64,
    #[serde(default = "default_outer_max_iters")]
    pub outer_max_iters: usize,
    #[serde(default = "default_window_shrink")]
    pub window_shrink: f64,
    #[serde(rename = "M_cap", default = "default_m_cap")]
    pub m_cap: f64,
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "default_inner_max_iters")]
    pub inner_max_iters: usize,
}

fn default_outer_max_iters() -> usize {
    DriverConfig::default().outer_max_iters
}
fn default_window_shrink() -> f64 {
    DriverConfig::default().window_shrink
}
fn default_m_cap() -> f64 {
    DriverConfig::default().m_cap
}
fn default_inner_tol() -> f64 {
    DriverConfig::default().inner_tol
}
fn default_inner_max_iters() -> usize {
    DriverConfig::default().inner_max_iters
}

/// `σ̄` as a constant or as a single-field CSV on the run grid.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum SigmaSpec {
    Constant(f64),
    File(PathBuf),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub sigma_bar: SigmaSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xi_ceiling: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Files,
    Synthesize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub mode: InitMode,
    /// `synthesize`: optional ρ0 (single field or snapshot); `files`: a
    /// snapshot holding `rho`, `xi` and `theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0_file: Option<PathBuf>,
    #[serde(default = "default_theta_frac")]
    pub theta_frac: f64,
}

fn default_theta_frac() -> f64 {
    0.5
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub grid: GridConfig,
    pub driver: DriverSection,
    pub source: SourceConfig,
    pub init: InitConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    /// The canonical desk-scale run.
    pub fn canonical() -> Self {
        Self {
            model: ModelConfig {
                c0: 1.0,
                cv: 1.0,
                kappa: 1.0,
                theta_c: 0.0,
                potential: crate::model::PotentialConfig { a: 3.0 },
            },
            grid: GridConfig { dim: 1, n: 129 },
            driver: DriverSection {
                dt: 2.5e-4,
                t_init: 0.1,
                horizon: 0.3,
                outer_tol: 1e-8,
                outer_max_iters: default_outer_max_iters(),
                window_shrink: default_window_shrink(),
                m_cap: default_m_cap(),
                inner_tol: default_inner_tol(),
                inner_max_iters: default_inner_max_iters(),
            },
            source: SourceConfig {
                sigma_bar: SigmaSpec::Constant(0.1),
                xi_ceiling: None,
            },
            init: InitConfig {
                mode: InitMode::Synthesize,
                rho0_file: None,
                theta_frac: 0.5,
            },
            output: OutputConfig {
                dir: PathBuf::from("run"),
                stride: 40,
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.output.stride == 0 {
            return Err(Error::Config("output.stride must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration is always serializable")
    }

    pub fn params(&self) -> Result<ModelParams> {
        self.model.build()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.grid.dim, self.grid.n)
    }

    pub fn driver(&self) -> DriverConfig {
        let d = &self.driver;
        DriverConfig {
            t_init: d.t_init,
            dt: d.dt,
            outer_tol: d.outer_tol,
            outer_max_iters: d.outer_max_iters,
            window_shrink: d.window_shrink,
            m_cap: d.m_cap,
            inner_tol: d.inner_tol,
            inner_max_iters: d.inner_max_iters,
            xi_ceiling: self.source.xi_ceiling,
            ..DriverConfig::default()
        }
    }
}

/// A configuration together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub text: String,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let config = RunConfig::from_toml(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, text, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output.dir)
    }

    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.text.as_bytes()))
    }

    pub fn sigma_bar(&self, grid: Grid) -> Result<ScalarField> {
        match &self.config.source.sigma_bar {
            SigmaSpec::Constant(c) => Ok(ScalarField::constant(grid, *c)),
            SigmaSpec::File(p) => read_field(&self.resolve(p), grid, "value"),
        }
    }

    pub fn default_rho0(grid: Grid) -> ScalarField {
        use std::f64::consts::PI;
        ScalarField::from_fn(grid, |x, y| {
            let wave = if grid.dim() == 1 {
                (PI * x).cos()
            } else {
                (PI * x).cos() * (PI * y).cos()
            };
            0.4 + 0.1 * wave
        })
    }

    pub fn initial_triple(&self, params: &ModelParams) -> Result<InitialTriple> {
        let grid = self.config.grid()?;
        let init = &self.config.init;
        match init.mode {
            InitMode::Synthesize => {
                let rho0 = match &init.rho0_file {
                    Some(p) => {
                        let cols = read_columns(&self.resolve(p), grid)?;
                        cols.get("rho")
                            .or_else(|| cols.get("value"))
                            .cloned()
                            .ok_or_else(|| Error::Config(format!("{} has no rho or value column", p.display())))?
                    }
                    None => Self::default_rho0(grid),
                };
                synthesize(&rho0, init.theta_frac, params)
            }
            InitMode::Files => {
                let p = init
                    .rho0_file
                    .as_ref()
                    .ok_or_else(|| Error::Config("init.mode = \"files\" needs init.rho0_file".into()))?;
                let mut cols = read_columns(&self.resolve(p), grid)?;
                let mut take = |name: &str| {
                    cols.remove(name)
                        .ok_or_else(|| Error::Config(format!("{} has no {name} column", p.display())))
                };
                let (rho, xi, theta) = (take("rho")?, take("xi")?, take("theta")?);
                InitialTriple::new(rho, xi, theta, params)
            }
        }
    }
}

/// `μ = √(ξ/ρ)`.
pub fn chemical_potential(state: &SystemState) -> Result<ScalarField> {
    if !(state.rho.min() > 0.0) {
        return Err(Error::Domain(format!("rho must be positive, min is {}", state.rho.min())));
    }
    Ok(state.rho.zip_map(&state.xi, |r, x| (x.max(0.0) / r).sqrt()))
}

/// Per step, the max norm of `θ·∂t(ξ/θ) − ∂tξ` by forward differences.
pub fn neglected_term_report(traj: &Trajectory) -> Vec<f64> {
    traj.states
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0], &w[1]);
            (0..a.rho.len())
                .map(|k| {
                    let (x0, x1) = (a.xi.values()[k], b.xi.values()[k]);
                    let (t0, t1) = (a.theta.values()[k], b.theta.values()[k]);
                    (t1 * (x1 / t1 - x0 / t0) - (x1 - x0)).abs() / traj.dt
                })
                .fold(0.0, f64::max)
        })
        .collect()
}

fn coord_headers(grid: &Grid) -> &'static [&'static str] {
    if grid.dim() == 1 {
        &["x"]
    } else {
        &["x", "y"]
    }
}

fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_table(path: &Path, grid: &Grid, names: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let coords = coord_headers(grid);
    w.write_record(coords.iter().chain(names))?;
    for k in 0..grid.len() {
        let (x, y) = grid.coords(k);
        let mut row: Vec<String> = vec![fmt_value(x)];
        if grid.dim() == 2 {
            row.push(fmt_value(y));
        }
        row.extend(columns.iter().map(|c| fmt_value(c[k])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_field(path: &Path, field: &ScalarField) -> Result<()> {
    write_table(path, field.grid(), &["value"], &[field.values()])
}

pub fn write_snapshot(path: &Path, state: &SystemState, params: &ModelParams) -> Result<()> {
    let mu = chemical_potential(state)?;
    let margin = state.margin(params);
    write_table(
        path,
        state.rho.grid(),
        &["rho", "xi", "theta", "mu", "margin"],
        &[
            state.rho.values(),
            state.xi.values(),
            state.theta.values(),
            mu.values(),
            margin.values(),
        ],
    )
}

/// All value columns of a CSV written by [`write_field`] or
/// [`write_snapshot`], checked against `grid`.
pub fn read_columns(path: &Path, grid: Grid) -> Result<BTreeMap<String, ScalarField>> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    let ncoord = coord_headers(&grid).len();
    if headers.len() <= ncoord || headers[..ncoord] != *coord_headers(&grid) {
        return Err(Error::Config(format!(
            "{}: header {headers:?} does not match a {}D grid",
            path.display(),
            grid.dim()
        )));
    }
    let mut data = vec![Vec::with_capacity(grid.len()); headers.len() - ncoord];
    let tol = 1e-9 * grid.h();
    for (k, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Config(format!("{}: bad number in row {}", path.display(), k + 2)))
        };
        if k >= grid.len() {
            return Err(Error::Config(format!("{}: more rows than grid points", path.display())));
        }
        let (x, y) = grid.coords(k);
        let off = (parse(0)? - x).abs().max(if ncoord == 2 { (parse(1)? - y).abs() } else { 0.0 });
        if off > tol {
            return Err(Error::Config(format!("{}: row {} is not at grid point {k}", path.display(), k + 2)));
        }
        for (j, col) in data.iter_mut().enumerate() {
            col.push(parse(ncoord + j)?);
        }
    }
    let mut out = BTreeMap::new();
    for (name, values) in headers[ncoord..].iter().zip(data) {
        if values.len() != grid.len() {
            return Err(Error::Config(format!("{}: expected {} rows", path.display(), grid.len())));
        }
        out.insert(name.clone(), ScalarField::new(grid, values)?);
    }
    Ok(out)
}

pub fn read_field(path: &Path, grid: Grid, column: &str) -> Result<ScalarField> {
    read_columns(path, grid)?
        .remove(column)
        .ok_or_else(|| Error::Config(format!("{} has no {column} column", path.display())))
}

pub fn snapshot_name(index: usize, t: f64) -> String {
    format!("t_{index:06}_{t:.6}.csv")
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WindowRecord {
    pub t_start: f64,
    pub length: f64,
    pub steps: usize,
    pub outer_iters: usize,
    pub theta_residual: f64,
    pub increments: Vec<f64>,
    pub inner_iters: usize,
    pub eps0: f64,
    pub min_margin: f64,
    pub delta0: f64,
    pub max_dt_theta: f64,
    pub rate_bound: f64,
    pub shrinks: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ShrinkRecord {
    pub t_start: f64,
    pub steps: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub status: String,
    pub final_time: f64,
    pub levels: usize,
    /// How the window length is chosen at runtime.
    pub window_rule: String,
    pub max_neglected_term: f64,
    pub snapshots: Vec<String>,
    pub windows: Vec<WindowRecord>,
    pub shrink_events: Vec<ShrinkRecord>,
}

pub const WINDOW_RULE: &str = "window length and rate cap are monitored, not computed: \
a window is accepted when the margin stays above half its initial value, \
max |dtheta/dt| stays below M_cap and both Picard loops converge; \
otherwise it is shrunk by window_shrink";

impl Manifest {
    pub fn build(result: &RunResult, config_hash: String, snapshots: Vec<String>) -> Self {
        let traj = &result.trajectory;
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash,
            status: result.status.as_str().to_string(),
            final_time: traj.last().t,
            levels: traj.states.len(),
            window_rule: WINDOW_RULE.to_string(),
            max_neglected_term: neglected_term_report(traj).into_iter().fold(0.0, f64::max),
            snapshots,
            windows: result
                .windows
                .iter()
                .map(|w| WindowRecord {
                    t_start: w.t_start,
                    length: w.length,
                    steps: w.steps,
                    outer_iters: w.outer_iters,
                    theta_residual: w.theta_residual,
                    increments: w.increments.clone(),
                    inner_iters: w.inner_iters,
                    eps0: w.eps0,
                    min_margin: w.min_margin,
                    delta0: w.delta0,
                    max_dt_theta: w.max_dt_theta,
                    rate_bound: w.rate_bound,
                    shrinks: w.shrinks,
                })
                .collect(),
            shrink_events: result
                .shrink_events
                .iter()
                .map(|e| ShrinkRecord {
                    t_start: e.t_start,
                    steps: e.steps,
                    reason: e.reason.label().to_string(),
                })
                .collect(),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is always serializable")
    }

    pub fn read(path: &Path) -> Result<Self> {
        toml::from_str(&fs::read_to_string(path)?).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Levels written to disk: every `stride`-th plus the last.
pub fn saved_levels(len: usize, stride: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).step_by(stride.max(1)).collect();
    if idx.last() != Some(&(len - 1)) {
        idx.push(len - 1);
    }
    idx
}

pub fn write_run(dir: &Path, loaded: &LoadedConfig, result: &RunResult, params: &ModelParams) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let traj = &result.trajectory;
    let mut names = Vec::new();
    for k in saved_levels(traj.states.len(), loaded.config.output.stride) {
        let state = &traj.states[k];
        let name = snapshot_name(k, state.t);
        write_snapshot(&dir.join(&name), state, params)?;
        names.push(name);
    }
    let manifest = Manifest::build(result, loaded.config_hash(), names);
    fs::write(dir.join("manifest.toml"), manifest.to_toml())?;
    fs::write(dir.join("config.toml"), &loaded.text)?;
    Ok(manifest)
}

#[derive(Debug)]
pub enum RunOutcome {
    Rejected(ValidationReport),
    Finished(Box<RunResult>, Manifest),
}

/// Loads, validates, runs and writes a configured run.
pub fn execute(loaded: &LoadedConfig) -> Result<RunOutcome> {
    let params = loaded.config.params()?;
    let triple = loaded.initial_triple(&params)?;
    let report = validate(&triple, &params);
    if !report.passed() {
        return Ok(RunOutcome::Rejected(report));
    }
    let sigma = loaded.sigma_bar(*triple.rho0.grid())?;
    let result = continue_in_time(
        &SystemState::from_initial(&triple),
        &sigma,
        &loaded.config.driver(),
        &params,
        loaded.config.driver.horizon,
    )?;
    let manifest = write_run(&loaded.output_dir(), loaded, &result, &params)?;
    Ok(RunOutcome::Finished(Box::new(result), manifest))
}

/// Invariant summary of one saved snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSummary {
    pub name: String,
    pub min_rho: f64,
    pub max_rho: f64,
    pub min_xi: f64,
    pub min_theta: f64,
    pub max_theta: f64,
    pub max_residual: f64,
    pub min_branch_gap: f64,
    pub max_upper_excess: f64,
    pub min_margin: f64,
}

impl SnapshotSummary {
    pub fn from_state(name: String, s: &SystemState, params: &ModelParams) -> Self {
        let geom = params.branches();
        let (rho, xi, theta) = (s.rho.values(), s.xi.values(), s.theta.values());
        let mut out = Self {
            name,
            min_rho: s.rho.min(),
            max_rho: s.rho.max(),
            min_xi: s.xi.min(),
            min_theta: s.theta.min(),
            max_theta: s.theta.max(),
            max_residual: 0.0,
            min_branch_gap: f64::INFINITY,
            max_upper_excess: f64::NEG_INFINITY,
            min_margin: s.margin(params).min(),
        };
        for k in 0..rho.len() {
            let (r, x, t) = (rho[k], xi[k], theta[k]);
            out.max_residual = out.max_residual.max((params.lambda_raw(r, t) + (r * x).sqrt()).abs());
            out.min_branch_gap = out.min_branch_gap.min(t - geom.s_lower(r));
            out.max_upper_excess = out.max_upper_excess.max(t - geom.s_upper(r));
        }
        out
    }
}

pub fn summarize_run(dir: &Path) -> Result<(Manifest, Vec<SnapshotSummary>)> {
    let manifest = Manifest::read(&dir.join("manifest.toml"))?;
    let loaded = LoadedConfig::load(&dir.join("config.toml"))?;
    let params = loaded.config.params()?;
    let grid = loaded.config.grid()?;
    let mut out = Vec::new();
    for name in &manifest.snapshots {
        let mut cols = read_columns(&dir.join(name), grid)?;
        let mut take = |c: &str| cols.remove(c).ok_or_else(|| Error::Config(format!("{name} has no {c} column")));
        let state = SystemState {
            t: 0.0,
            rho: take("rho")?,
            xi: take("xi")?,
            theta: take("theta")?,
        };
        out.push(SnapshotSummary::from_state(name.clone(), &state, &params));
    }
    Ok((manifest, out))
}

pub fn status_is_success(status: RunStatus) -> bool {
    status != RunStatus::WindowUnderflow
}
