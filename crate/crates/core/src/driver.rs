//! The outer Picard iteration `θ ← F2(F1(θ))` on a time window, with
//! geometric window shrinking and continuation across windows.

use crate::ac_stepper::{f1_map, F1Input, F1Output};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::initial_data::InitialTriple;
use crate::model::ModelParams;
use crate::series::FieldSeries;
use crate::theta_map::{f2_map, margin_check, max_theta_rate, theta_rate_bound, MarginReport, DEFAULT_ROOT_TOL};

/// Windows shorter than this many steps count as underflow.
pub const MIN_WINDOW_STEPS: usize = 16;
/// Reference final time bounding every window.
pub const REFERENCE_FINAL_TIME: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct DriverConfig {
    pub t_init: f64,
    pub dt: f64,
    pub outer_tol: f64,
    pub outer_max_iters: usize,
    pub window_shrink: f64,
    /// Cap on the observed `max |∂tθ|`.
    pub m_cap: f64,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    pub root_tol: f64,
    /// Ceiling on ξ; `None` picks `max ξ0` for a nonnegative source and no
    /// ceiling otherwise.
    pub xi_ceiling: Option<f64>,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            t_init: 0.1,
            dt: 2.5e-4,
            outer_tol: 1e-8,
            outer_max_iters: 30,
            window_shrink: 0.5,
            m_cap: 1e3,
            inner_tol: 1e-12,
            inner_max_iters: 50,
            root_tol: DEFAULT_ROOT_TOL,
            xi_ceiling: None,
        }
    }
}

impl DriverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dt > 0.0
            && self.t_init > self.dt
            && self.t_init <= REFERENCE_FINAL_TIME
            && self.outer_tol > 0.0
            && self.outer_max_iters > 0
            && self.window_shrink > 0.0
            && self.window_shrink < 1.0
            && self.m_cap > 0.0
            && self.inner_tol >= 0.0
            && self.inner_max_iters > 0
            && self.root_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent driver settings: {self:?}")))
        }
    }

    fn steps_for(&self, length: f64) -> usize {
        (length / self.dt).round() as usize
    }
}

/// `(ρ, ξ, θ)` at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub rho: ScalarField,
    pub xi: ScalarField,
    pub theta: ScalarField,
}

impl SystemState {
    pub fn from_initial(t: &InitialTriple) -> Self {
        Self {
            t: 0.0,
            rho: t.rho0.clone(),
            xi: t.xi0.clone(),
            theta: t.theta0.clone(),
        }
    }

    pub fn margin(&self, params: &ModelParams) -> ScalarField {
        self.rho.zip_map(&self.xi, |r, x| params.margin_raw(r, x))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ShrinkReason {
    /// The margin fell below the window's `eps0` (or closed entirely).
    Margin { min_margin: f64, eps0: f64 },
    RateCap { observed: f64, cap: f64 },
    NoContraction { increment: f64 },
    XiCeiling { value: f64 },
    OuterMaxIters { increment: f64 },
}

impl ShrinkReason {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Margin { .. } => "margin",
            Self::RateCap { .. } => "rate_cap",
            Self::NoContraction { .. } => "no_contraction",
            Self::XiCeiling { .. } => "xi_ceiling",
            Self::OuterMaxIters { .. } => "outer_max_iters",
        }
    }
}

#[derive(Debug, Clone)]
pub struct WindowSolution {
    pub theta: FieldSeries,
    pub f1: F1Output,
    pub margin: MarginReport,
    /// `L²(Q)` norms of successive θ increments.
    pub increments: Vec<f64>,
    pub rate_bound: f64,
    pub max_dt_theta: f64,
}

impl WindowSolution {
    pub fn outer_iters(&self) -> usize {
        self.increments.len()
    }
}

#[derive(Debug, Clone)]
pub enum WindowOutcome {
    Accepted(Box<WindowSolution>),
    Shrink(ShrinkReason),
}

/// Source `σ̄` held constant over the window of `theta_guess`.
pub fn run_window(
    theta_guess: &FieldSeries,
    state0: &SystemState,
    sigma_bar: &FieldSeries,
    cfg: &DriverConfig,
    xi_ceiling: f64,
    params: &ModelParams,
) -> Result<WindowOutcome> {
    let mut theta = theta_guess.clone();
    let mut increments = Vec::new();
    for _ in 0..cfg.outer_max_iters {
        let f1 = f1_map(&F1Input {
            theta: &theta,
            rho0: &state0.rho,
            xi0: &state0.xi,
            sigma_bar,
            params,
            inner_tol: cfg.inner_tol,
            inner_max_iters: cfg.inner_max_iters,
            xi_ceiling,
        });
        let f1 = match f1 {
            Ok(out) => out,
            Err(Error::NoContraction { increment, .. }) => {
                return Ok(WindowOutcome::Shrink(ShrinkReason::NoContraction { increment }))
            }
            Err(Error::XiCeiling { value, .. }) => return Ok(WindowOutcome::Shrink(ShrinkReason::XiCeiling { value })),
            Err(e) => return Err(e),
        };
        let mut margin = match margin_check(&f1.rho, &f1.xi_solution.xi, params) {
            Ok(report) => report,
            Err(Error::MarginViolation { min_margin, .. }) => {
                return Ok(WindowOutcome::Shrink(ShrinkReason::Margin { min_margin, eps0: 0.0 }))
            }
            Err(e) => return Err(e),
        };
        if !margin.holds() {
            return Ok(WindowOutcome::Shrink(ShrinkReason::Margin {
                min_margin: margin.min_margin,
                eps0: margin.eps0,
            }));
        }
        let next = f2_map(&f1.rho, &f1.xi_solution.xi, params, cfg.root_tol)?;
        let observed = max_theta_rate(&next);
        if observed > cfg.m_cap {
            return Ok(WindowOutcome::Shrink(ShrinkReason::RateCap {
                observed,
                cap: cfg.m_cap,
            }));
        }
        let increment = next.l2q_distance(&theta);
        increments.push(increment);
        theta = next;
        if increment <= cfg.outer_tol {
            let rate_bound = theta_rate_bound(&theta, &f1.rho, &f1.xi_solution, &mut margin, params);
            return Ok(WindowOutcome::Accepted(Box::new(WindowSolution {
                theta,
                f1,
                margin,
                increments,
                rate_bound,
                max_dt_theta: observed,
            })));
        }
    }
    Ok(WindowOutcome::Shrink(ShrinkReason::OuterMaxIters {
        increment: increments.last().copied().unwrap_or(f64::NAN),
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MarginViolation,
    WindowUnderflow,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Converged => "Converged",
            Self::MarginViolation => "MarginViolation",
            Self::WindowUnderflow => "WindowUnderflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowStats {
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

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkEvent {
    pub t_start: f64,
    pub steps: usize,
    pub reason: ShrinkReason,
}

/// Time levels of a run; one entry per step, seams stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<SystemState>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    fn series(&self, pick: impl Fn(&SystemState) -> &ScalarField) -> FieldSeries {
        FieldSeries {
            t0: self.states[0].t,
            dt: self.dt,
            levels: self.states.iter().map(|s| pick(s).clone()).collect(),
        }
    }

    pub fn rho(&self) -> FieldSeries {
        self.series(|s| &s.rho)
    }

    pub fn xi(&self) -> FieldSeries {
        self.series(|s| &s.xi)
    }

    pub fn theta(&self) -> FieldSeries {
        self.series(|s| &s.theta)
    }

    pub fn last(&self) -> &SystemState {
        &self.states[self.states.len() - 1]
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub trajectory: Trajectory,
    pub windows: Vec<WindowStats>,
    pub margin_history: Vec<MarginReport>,
    pub shrink_events: Vec<ShrinkEvent>,
    pub status: RunStatus,
}

impl RunResult {
    /// Largest ratio between successive θ increments over all windows.
    pub fn worst_increment_ratio(&self) -> f64 {
        self.windows
            .iter()
            .flat_map(|w| w.increments.windows(2).filter(|p| p[1] > 0.0).map(|p| p[1] / p[0]))
            .fold(0.0, f64::max)
    }
}

/// Default ξ ceiling for a source field.
pub fn default_xi_ceiling(xi0: &ScalarField, sigma_bar: &ScalarField) -> f64 {
    if sigma_bar.min() >= 0.0 {
        xi0.max()
    } else {
        f64::INFINITY
    }
}

/// Chains accepted windows from `state0` until `horizon`.
///
/// A window that keeps failing is halved (times `window_shrink`) down to
/// [`MIN_WINDOW_STEPS`]; below that the run stops with `MarginViolation` if
/// the margin caused the last shrink and `WindowUnderflow` otherwise.
pub fn continue_in_time(
    state0: &SystemState,
    sigma_bar: &ScalarField,
    cfg: &DriverConfig,
    params: &ModelParams,
    horizon: f64,
) -> Result<RunResult> {
    cfg.validate()?;
    if sigma_bar.grid() != state0.rho.grid() {
        return Err(Error::Config("source and state live on different grids".into()));
    }
    let xi_ceiling = cfg.xi_ceiling.unwrap_or_else(|| default_xi_ceiling(&state0.xi, sigma_bar));
    let total = cfg.steps_for(horizon - state0.t);
    let initial = cfg.steps_for(cfg.t_init).max(1);

    let mut states = vec![state0.clone()];
    let mut windows = Vec::new();
    let mut margin_history = Vec::new();
    let mut shrink_events = Vec::new();
    let mut done = 0;
    let mut next_len = initial.min(total);
    let mut status = RunStatus::Converged;

    while done < total {
        let seam = states[states.len() - 1].clone();
        let remaining = total - done;
        let floor = MIN_WINDOW_STEPS.min(remaining);
        let mut steps = next_len.min(remaining);
        let mut shrinks = 0;
        let solution = loop {
            let guess = FieldSeries::constant(seam.t, cfg.dt, steps, &seam.theta);
            let sigma = FieldSeries::constant(seam.t, cfg.dt, steps, sigma_bar);
            match run_window(&guess, &seam, &sigma, cfg, xi_ceiling, params)? {
                WindowOutcome::Accepted(sol) => break Some(sol),
                WindowOutcome::Shrink(reason) => {
                    let margin_caused = matches!(reason, ShrinkReason::Margin { .. });
                    shrink_events.push(ShrinkEvent {
                        t_start: seam.t,
                        steps,
                        reason,
                    });
                    shrinks += 1;
                    let shorter = (steps as f64 * cfg.window_shrink).floor() as usize;
                    if shorter < floor || shorter == steps {
                        status = if margin_caused {
                            RunStatus::MarginViolation
                        } else {
                            RunStatus::WindowUnderflow
                        };
                        break None;
                    }
                    steps = shorter;
                }
            }
        };
        let Some(sol) = solution else { break };

        let t_start = seam.t;
        for n in 1..=steps {
            states.push(SystemState {
                t: state0.t + (done + n) as f64 * cfg.dt,
                rho: sol.f1.rho.levels[n].clone(),
                xi: sol.f1.xi_solution.xi.levels[n].clone(),
                theta: sol.theta.levels[n].clone(),
            });
        }
        windows.push(WindowStats {
            t_start,
            length: steps as f64 * cfg.dt,
            steps,
            outer_iters: sol.outer_iters(),
            theta_residual: sol.increments.last().copied().unwrap_or(0.0),
            increments: sol.increments.clone(),
            inner_iters: sol.f1.inner_iters,
            eps0: sol.margin.eps0,
            min_margin: sol.margin.min_margin,
            delta0: sol.margin.delta0,
            max_dt_theta: sol.max_dt_theta,
            rate_bound: sol.rate_bound,
            shrinks,
        });
        margin_history.push(sol.margin);
        done += steps;
        let regrown = (steps as f64 / cfg.window_shrink).ceil() as usize;
        next_len = if shrinks > 0 { regrown.min(initial) } else { initial };
    }

    Ok(RunResult {
        trajectory: Trajectory {
            dt: cfg.dt,
            states,
        },
        windows,
        margin_history,
        shrink_events,
        status,
    })
}
