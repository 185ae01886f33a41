//! Temperature from `(ρ, ξ)`: the pointwise root of `λ(ρ, θ) = −√(ρξ)` on
//! the upper branch `s_lower(ρ) < θ ≤ s_upper(ρ)`, plus the margin that keeps
//! this branch alive and the rate bound it implies.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::model::ModelParams;
use crate::series::FieldSeries;
use crate::xi_transport::XiSolution;

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// Margin `cv·e^(−1−c*ρ) − √(ρξ)` and the constants derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    pub margin: FieldSeries,
    /// Half the smallest margin on the first time level.
    pub eps0: f64,
    pub min_margin: f64,
    /// Guaranteed half-clearance of θ above `s_lower(ρ)` while margin ≥ eps0.
    pub delta0: f64,
    /// Filled by [`theta_rate_bound`].
    pub max_dt_theta: f64,
}

impl MarginReport {
    /// `L0 = 1 / (cv·ln(1 + 2δ0/θ*))`.
    pub fn l0(&self, params: &ModelParams) -> f64 {
        rate_constant(self.delta0, params)
    }

    /// True when the margin stays at or above `eps0` everywhere.
    pub fn holds(&self) -> bool {
        self.min_margin >= self.eps0
    }
}

pub fn rate_constant(delta0: f64, params: &ModelParams) -> f64 {
    let theta_hi = params.branches().theta_star_hi();
    1.0 / (params.cv() * (1.0 + 2.0 * delta0 / theta_hi).ln())
}

/// `δ0 = ½·√((2·eps0/cv)·e^(−1−c*·ρmax))`, from the second-order Taylor
/// expansion of `λ` around its minimum point.
pub fn clearance(eps0: f64, rho_max: f64, params: &ModelParams) -> f64 {
    0.5 * ((2.0 * eps0 / params.cv()) * (-1.0 - params.cstar() * rho_max).exp()).sqrt()
}

pub fn margin_check(rho: &FieldSeries, xi: &FieldSeries, params: &ModelParams) -> Result<MarginReport> {
    let mut min_margin = f64::INFINITY;
    let mut worst = (0, 0);
    let mut levels = Vec::with_capacity(rho.levels.len());
    for (n, (r, x)) in rho.levels.iter().zip(&xi.levels).enumerate() {
        let m = r.zip_map(x, |r, x| params.margin_raw(r, x));
        for (k, &v) in m.values().iter().enumerate() {
            if v < min_margin {
                min_margin = v;
                worst = (n, k);
            }
        }
        levels.push(m);
    }
    if !(min_margin > 0.0) {
        return Err(Error::MarginViolation {
            min_margin,
            level: worst.0,
            index: worst.1,
        });
    }
    let eps0 = 0.5 * levels[0].min();
    let delta0 = clearance(eps0, rho.max(), params);
    Ok(MarginReport {
        margin: FieldSeries {
            t0: rho.t0,
            dt: rho.dt,
            levels,
        },
        eps0,
        min_margin,
        delta0,
        max_dt_theta: 0.0,
    })
}

/// Upper-branch root of `λ(r, s) = −target` for `target = √(ρξ) ≥ 0`.
///
/// Newton from the bracket midpoint, with a bisection step whenever the
/// Newton iterate leaves the bracket `[s_lower(r), s_upper(r)]`.
pub fn solve_upper_branch(r: f64, target: f64, params: &ModelParams, tol: f64) -> Result<f64> {
    let geom = params.branches();
    let upper = geom.s_upper(r);
    if target == 0.0 {
        return Ok(upper);
    }
    let residual = |s: f64| params.lambda_raw(r, s) + target;
    let mut lo = geom.s_lower(r);
    let mut hi = upper;
    if !(residual(lo) < 0.0 && residual(hi) > 0.0) {
        return Err(Error::BracketFailure { r, target });
    }
    let mut s = 0.5 * (lo + hi);
    let mut best = (f64::INFINITY, s);
    for _ in 0..200 {
        let f = residual(s);
        if f.abs() < best.0 {
            best = (f.abs(), s);
        }
        if f.abs() <= tol {
            return Ok(s);
        }
        if f < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let newton = s - f / params.dlambda_ds_raw(r, s);
        s = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    // Bracket collapsed to rounding level; the best iterate is as good as it gets.
    Ok(best.1)
}

/// Pointwise upper-branch temperature for every level of the series.
pub fn f2_map(rho: &FieldSeries, xi: &FieldSeries, params: &ModelParams, tol: f64) -> Result<FieldSeries> {
    let levels = rho
        .levels
        .iter()
        .zip(&xi.levels)
        .map(|(r, x)| f2_field(r, x, params, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldSeries {
        t0: rho.t0,
        dt: rho.dt,
        levels,
    })
}

pub fn f2_field(rho: &ScalarField, xi: &ScalarField, params: &ModelParams, tol: f64) -> Result<ScalarField> {
    let vals = rho
        .values()
        .iter()
        .zip(xi.values())
        .map(|(&r, &x)| solve_upper_branch(r, (r * x).sqrt(), params, tol))
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalarField::from_vec(*rho.grid(), vals))
}

/// `max L0·(|∂t√(ρξ)| + c0·θ*·|∂tρ|)` over all steps and points, by
/// difference quotients; also stored in `report.max_dt_theta`.
pub fn theta_rate_bound(
    theta: &FieldSeries,
    rho: &FieldSeries,
    xi_sol: &XiSolution,
    report: &mut MarginReport,
    params: &ModelParams,
) -> f64 {
    debug_assert_eq!(theta.levels.len(), rho.levels.len());
    let l0 = report.l0(params);
    let c = params.c0() * params.branches().theta_star_hi();
    let dt = rho.dt;
    let mut bound: f64 = 0.0;
    for n in 0..rho.steps() {
        let (r0, r1) = (rho.levels[n].values(), rho.levels[n + 1].values());
        let (y0, y1) = (xi_sol.sqrt_xi.levels[n].values(), xi_sol.sqrt_xi.levels[n + 1].values());
        for k in 0..r0.len() {
            let d_sqrt = (r1[k].sqrt() * y1[k] - r0[k].sqrt() * y0[k]).abs() / dt;
            let d_rho = (r1[k] - r0[k]).abs() / dt;
            bound = bound.max(l0 * (d_sqrt + c * d_rho));
        }
    }
    report.max_dt_theta = bound;
    bound
}

/// Largest observed `|∂tθ|` by difference quotients.
pub fn max_theta_rate(theta: &FieldSeries) -> f64 {
    theta
        .rates()
        .iter()
        .map(|r| r.norms().linf)
        .fold(0.0, f64::max)
}
