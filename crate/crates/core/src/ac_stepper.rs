//! The order-parameter half of the fixed point: for a frozen temperature
//! history, march the Allen-Cahn equation
//!
//! ```text
//! κ ∂tρ − Δρ + f'(ρ) − c0 θ = √(ξ/ρ),   ∂nρ = 0,
//! ```
//!
//! coupled to the maximal `ξ` solution through an inner Picard loop.
//!
//! Time stepping is convex splitting: `f1'` implicit, `f2'` and `−c0θ`
//! explicit. The implicit system is solved by damped Newton; its Jacobian
//! `(κ/dt + f1''(ρ)) I − Δ` is symmetric positive definite in the
//! trapezoid-weighted inner product.

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::model::ModelParams;
use crate::series::FieldSeries;
use crate::xi_transport::{phi_maximal, XiOdeInput, XiSolution};

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITERS: usize = 50;
const MAX_SUBCYCLE_DEPTH: u32 = 6;

/// Solves `(diag·I − Δ) x = rhs` with Neumann boundary conditions.
fn solve_shifted_laplacian(grid: &Grid, diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    match grid.dim() {
        1 => solve_tridiagonal(grid, diag, rhs),
        _ => solve_cg(grid, diag, rhs),
    }
}

/// Thomas algorithm for the 1D mirror-ghost stencil.
fn solve_tridiagonal(grid: &Grid, diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = grid.n();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let lower = |i: usize| if i == n - 1 { -2.0 * inv_h2 } else { -inv_h2 };
    let upper = |i: usize| if i == 0 { -2.0 * inv_h2 } else { -inv_h2 };
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut b = diag[0] + 2.0 * inv_h2;
    c[0] = upper(0) / b;
    d[0] = rhs[0] / b;
    for i in 1..n {
        b = diag[i] + 2.0 * inv_h2 - lower(i) * c[i - 1];
        if i < n - 1 {
            c[i] = upper(i) / b;
        }
        d[i] = (rhs[i] - lower(i) * d[i - 1]) / b;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    x
}

/// Jacobi-preconditioned conjugate gradients on the weighted system
/// `W (diag − Δ) x = W rhs`, which is symmetric positive definite.
fn solve_cg(grid: &Grid, diag: &[f64], rhs: &[f64]) -> Vec<f64> {
    let w = grid.weights();
    let m = rhs.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    let centre = 2.0 * grid.dim() as f64 * inv_h2;
    let mut lap = vec![0.0; m];
    let apply = |x: &[f64], out: &mut [f64], lap: &mut [f64]| {
        grid.laplacian_into(x, lap);
        for k in 0..m {
            out[k] = w[k] * (diag[k] * x[k] - lap[k]);
        }
    };
    let precond: Vec<f64> = (0..m).map(|k| 1.0 / (w[k] * (diag[k] + centre))).collect();
    let b: Vec<f64> = (0..m).map(|k| w[k] * rhs[k]).collect();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x: Vec<f64> = (0..m).map(|k| rhs[k] / (diag[k] + centre)).collect();
    let mut r = vec![0.0; m];
    apply(&x, &mut r, &mut lap);
    for k in 0..m {
        r[k] = b[k] - r[k];
    }
    let mut z: Vec<f64> = (0..m).map(|k| precond[k] * r[k]).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; m];
    for _ in 0..(10 * m).max(100) {
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= 1e-15 * bnorm.max(f64::MIN_POSITIVE) {
            break;
        }
        apply(&p, &mut ap, &mut lap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
            z[k] = precond[k] * r[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..m {
            p[k] = z[k] + beta * p[k];
        }
    }
    x
}

/// One convex-splitting step
/// `(κ/dt)(ρ' − ρ) − Δρ' + f1'(ρ') = −f2'(ρ) + c0 θ + √ξ/√ρ`.
pub fn pde_substep(
    rho_prev: &ScalarField,
    sqrt_xi: &ScalarField,
    theta_now: &ScalarField,
    dt: f64,
    params: &ModelParams,
) -> Result<ScalarField> {
    let grid = *rho_prev.grid();
    let pot = params.potential();
    let c0 = params.c0();
    let shift = params.kappa() / dt;
    let rho = rho_prev.values();
    let rhs: Vec<f64> = rho
        .iter()
        .zip(sqrt_xi.values())
        .zip(theta_now.values())
        .map(|((&r, &y), &th)| -pot.f2_prime(r) + c0 * th + y / r.sqrt())
        .collect();

    let stencil_scale = shift + 4.0 * grid.dim() as f64 / (grid.h() * grid.h());
    let tol = NEWTON_TOL.max(64.0 * f64::EPSILON * stencil_scale);
    let m = rho.len();
    let mut lap = vec![0.0; m];
    let mut residual = |u: &[f64], out: &mut [f64]| -> f64 {
        grid.laplacian_into(u, &mut lap);
        let mut worst: f64 = 0.0;
        for k in 0..m {
            out[k] = shift * (u[k] - rho[k]) - lap[k] + pot.f1_prime(u[k]) - rhs[k];
            // NaN (f1' outside its domain) must count as worst.
            worst = if out[k].abs() > worst || out[k].is_nan() { out[k].abs() } else { worst };
        }
        worst
    };

    let mut u = rho.to_vec();
    let mut res = vec![0.0; m];
    let mut res_norm = residual(&u, &mut res);
    let mut trial = vec![0.0; m];
    let mut trial_res = vec![0.0; m];
    let mut iters = 0;
    while !(res_norm <= tol) {
        if iters == NEWTON_MAX_ITERS {
            return Err(Error::NewtonDivergence {
                iters,
                residual: res_norm,
            });
        }
        iters += 1;
        let diag: Vec<f64> = u.iter().map(|&v| shift + pot.f1_second(v)).collect();
        let neg: Vec<f64> = res.iter().map(|r| -r).collect();
        let step = solve_shifted_laplacian(&grid, &diag, &neg);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            for k in 0..m {
                trial[k] = u[k] + alpha * step[k];
            }
            let tn = residual(&trial, &mut trial_res);
            if tn.is_finite() && (tn < res_norm || tn <= tol) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDivergence {
                iters,
                residual: res_norm,
            });
        }
        std::mem::swap(&mut u, &mut trial);
        std::mem::swap(&mut res, &mut trial_res);
        res_norm = res.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    }

    if let Some((index, &value)) = u.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v < 1.0)) {
        return Err(Error::RangeViolation { index, value });
    }
    Ok(ScalarField::from_vec(grid, u))
}

/// `pde_substep` that sub-cycles with halved steps (data frozen) when the
/// Newton solve fails or the iterate leaves `(0,1)`.
fn advance(
    rho: &ScalarField,
    sqrt_xi: &ScalarField,
    theta: &ScalarField,
    dt: f64,
    params: &ModelParams,
    depth: u32,
) -> Result<ScalarField> {
    match pde_substep(rho, sqrt_xi, theta, dt, params) {
        Err(Error::NewtonDivergence { .. } | Error::RangeViolation { .. }) if depth < MAX_SUBCYCLE_DEPTH => {
            let half = advance(rho, sqrt_xi, theta, 0.5 * dt, params, depth + 1)?;
            advance(&half, sqrt_xi, theta, 0.5 * dt, params, depth + 1)
        }
        other => other,
    }
}

/// Discrete functional `½|∇ρ|² + f(ρ) − c·ρ` integrated with node weights,
/// for a frozen linear coefficient `c` (e.g. `c0θ + √(ξ/ρ̄)`).
pub fn discrete_energy(rho: &ScalarField, coefficient: &ScalarField, params: &ModelParams) -> f64 {
    let grid = rho.grid();
    let w = grid.weights();
    let lap = rho.laplacian_neumann();
    let pot = params.potential();
    rho.values()
        .iter()
        .zip(lap.values())
        .zip(coefficient.values())
        .zip(&w)
        .map(|(((&r, &l), &c), &wk)| wk * (-0.5 * r * l + pot.f(r) - c * r))
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub struct F1Input<'a> {
    /// Frozen temperature on the window's time levels.
    pub theta: &'a FieldSeries,
    pub rho0: &'a ScalarField,
    pub xi0: &'a ScalarField,
    pub sigma_bar: &'a FieldSeries,
    pub params: &'a ModelParams,
    pub inner_tol: f64,
    pub inner_max_iters: usize,
    /// Upper bound enforced on ξ.
    pub xi_ceiling: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsReport {
    pub min_rho: f64,
    pub max_rho: f64,
    pub max_xi: f64,
}

#[derive(Debug, Clone)]
pub struct F1Output {
    pub rho: FieldSeries,
    pub dtrho: Vec<ScalarField>,
    pub xi_solution: XiSolution,
    pub bounds: BoundsReport,
    pub inner_iters: usize,
    /// Last sup-norm increment of the inner loop.
    pub inner_residual: f64,
    pub inner_increments: Vec<f64>,
}

impl F1Input<'_> {
    fn validate(&self) -> Result<()> {
        let geom = self.params.branches();
        let (lo, hi) = (geom.theta_star_lo(), geom.theta_star_hi());
        let (tmin, tmax) = (self.theta.min(), self.theta.max());
        if !(tmin >= lo && tmax <= hi) {
            return Err(Error::Domain(format!(
                "theta range [{tmin}, {tmax}] outside [{lo}, {hi}]"
            )));
        }
        let (rmin, rmax) = (self.rho0.min(), self.rho0.max());
        if !(rmin > 0.0 && rmax < 1.0) {
            return Err(Error::Domain(format!("rho0 range [{rmin}, {rmax}] not inside (0,1)")));
        }
        if !(self.xi0.min() >= 0.0) {
            return Err(Error::Domain("xi0 must be nonnegative".into()));
        }
        if self.sigma_bar.steps() != self.theta.steps() {
            return Err(Error::Domain("source and temperature histories are misaligned".into()));
        }
        Ok(())
    }

    fn solve_xi(&self, v: &FieldSeries) -> Result<XiSolution> {
        let dtv = v.rates();
        phi_maximal(&XiOdeInput {
            v,
            dtv: &dtv,
            sigma_bar: self.sigma_bar,
            xi0: self.xi0,
            kappa: self.params.kappa(),
        })
    }

    fn march(&self, sqrt_xi: &FieldSeries) -> Result<FieldSeries> {
        let dt = self.theta.dt;
        let mut levels = Vec::with_capacity(self.theta.levels.len());
        levels.push(self.rho0.clone());
        for n in 0..self.theta.steps() {
            let next = advance(
                &levels[n],
                &sqrt_xi.levels[n],
                &self.theta.levels[n],
                dt,
                self.params,
                0,
            )?;
            levels.push(next);
        }
        Ok(FieldSeries {
            t0: self.theta.t0,
            dt,
            levels,
        })
    }
}

/// Solves the PDE/ODE pair for a frozen temperature by Picard iteration on
/// the order-parameter history, starting from `ρ0` held constant in time.
pub fn f1_map(input: &F1Input<'_>) -> Result<F1Output> {
    input.validate()?;
    let steps = input.theta.steps();
    let mut v = FieldSeries::constant(input.theta.t0, input.theta.dt, steps, input.rho0);
    let mut increments = Vec::new();
    for _ in 0..input.inner_max_iters {
        let xi = input.solve_xi(&v)?;
        let rho = input.march(&xi.sqrt_xi)?;
        let inc = rho.sup_distance(&v);
        increments.push(inc);
        v = rho;
        if inc <= input.inner_tol {
            return finish(input, v, increments);
        }
    }
    Err(Error::NoContraction {
        iters: increments.len(),
        increment: increments.last().copied().unwrap_or(f64::NAN),
    })
}

fn finish(input: &F1Input<'_>, rho: FieldSeries, increments: Vec<f64>) -> Result<F1Output> {
    let xi_solution = input.solve_xi(&rho)?;
    let bounds = BoundsReport {
        min_rho: rho.min(),
        max_rho: rho.max(),
        max_xi: xi_solution.xi.max(),
    };
    if !(bounds.min_rho > 0.0 && bounds.max_rho < 1.0) {
        let value = if bounds.min_rho <= 0.0 { bounds.min_rho } else { bounds.max_rho };
        return Err(Error::RangeViolation { index: 0, value });
    }
    if bounds.max_xi > input.xi_ceiling * (1.0 + 8.0 * f64::EPSILON) {
        return Err(Error::XiCeiling {
            value: bounds.max_xi,
            ceiling: input.xi_ceiling,
        });
    }
    Ok(F1Output {
        dtrho: rho.rates(),
        rho,
        xi_solution,
        bounds,
        inner_iters: increments.len(),
        inner_residual: *increments.last().expect("at least one iteration"),
        inner_increments: increments,
    })
}
