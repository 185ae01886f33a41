//! Admissibility of Cauchy data `(ρ0, ξ0, θ0)` and a constructor for
//! compatible triples.

use std::fmt;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::model::ModelParams;

pub const COMPATIBILITY_TOL: f64 = 1e-10;
pub const MARGIN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct InitialTriple {
    pub rho0: ScalarField,
    pub xi0: ScalarField,
    pub theta0: ScalarField,
    /// Half the smallest initial margin.
    pub eps0: f64,
}

impl InitialTriple {
    pub fn new(rho0: ScalarField, xi0: ScalarField, theta0: ScalarField, params: &ModelParams) -> Result<Self> {
        if rho0.grid() != xi0.grid() || rho0.grid() != theta0.grid() {
            return Err(Error::InvalidInitialData("fields live on different grids".into()));
        }
        let eps0 = 0.5 * min_margin(&rho0, &xi0, params);
        Ok(Self {
            rho0,
            xi0,
            theta0,
            eps0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub conditions: Vec<Condition>,
    pub eps0: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.conditions.iter().filter(|c| !c.passed).map(|c| c.name).collect()
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.conditions {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            writeln!(f, "{tag} {:<24} {}", c.name, c.detail)?;
        }
        write!(f, "eps0 = {:.6e}", self.eps0)
    }
}

fn min_margin(rho: &ScalarField, xi: &ScalarField, params: &ModelParams) -> f64 {
    rho.values()
        .iter()
        .zip(xi.values())
        .map(|(&r, &x)| params.margin_raw(r, x))
        .fold(f64::INFINITY, f64::min)
}

/// Largest one-sided normal derivative on the boundary, second order.
fn boundary_flux(u: &ScalarField) -> f64 {
    let g = u.grid();
    let (n, h) = (g.n(), g.h());
    let v = u.values();
    let one_sided = |a: f64, b: f64, c: f64| ((-3.0 * a + 4.0 * b - c) / (2.0 * h)).abs();
    let mut worst: f64 = 0.0;
    if g.dim() == 1 {
        worst = worst.max(one_sided(v[0], v[1], v[2]));
        worst = worst.max(one_sided(v[n - 1], v[n - 2], v[n - 3]));
        return worst;
    }
    let at = |i: usize, j: usize| v[j * n + i];
    for t in 0..n {
        worst = worst.max(one_sided(at(0, t), at(1, t), at(2, t)));
        worst = worst.max(one_sided(at(n - 1, t), at(n - 2, t), at(n - 3, t)));
        worst = worst.max(one_sided(at(t, 0), at(t, 1), at(t, 2)));
        worst = worst.max(one_sided(at(t, n - 1), at(t, n - 2), at(t, n - 3)));
    }
    worst
}

fn is_interior(grid: &Grid, k: usize) -> bool {
    let n = grid.n();
    let inner = |i: usize| i > 0 && i < n - 1;
    match grid.dim() {
        1 => inner(k),
        _ => inner(k % n) && inner(k / n),
    }
}

fn check(name: &'static str, passed: bool, detail: String) -> Condition {
    Condition { name, passed, detail }
}

pub fn validate(t: &InitialTriple, params: &ModelParams) -> ValidationReport {
    let geom = params.branches();
    let (rho, xi, theta) = (t.rho0.values(), t.xi0.values(), t.theta0.values());
    let mut conditions = Vec::new();

    let in_range = rho.iter().all(|&r| r > 0.0 && r < 1.0)
        && xi.iter().all(|&x| x >= 0.0)
        && theta.iter().all(|&s| s > 0.0);
    conditions.push(check(
        "range",
        in_range,
        format!(
            "rho0 in [{:.6e}, {:.6e}], min xi0 {:.6e}, min theta0 {:.6e}",
            t.rho0.min(),
            t.rho0.max(),
            t.xi0.min(),
            t.theta0.min()
        ),
    ));

    // Everything below evaluates logarithms of ρ0 and θ0.
    let compat = if in_range {
        rho.iter()
            .zip(xi)
            .zip(theta)
            .map(|((&r, &x), &s)| (params.lambda_raw(r, s) + (r * x).sqrt()).abs())
            .fold(0.0, f64::max)
    } else {
        f64::NAN
    };
    conditions.push(check(
        "compatibility",
        compat <= COMPATIBILITY_TOL,
        format!("max |lambda(rho0, theta0) + sqrt(rho0 xi0)| = {compat:.3e}"),
    ));

    let margin = if in_range { min_margin(&t.rho0, &t.xi0, params) } else { f64::NAN };
    conditions.push(check(
        "necessary_condition",
        -margin <= MARGIN_TOL,
        format!("max sqrt(rho0 xi0) - cv exp(-1 - c* rho0) = {:.3e}", -margin),
    ));
    conditions.push(check(
        "strict_margin",
        margin > MARGIN_TOL,
        format!("min margin = {margin:.3e}"),
    ));

    let branch_gap = if in_range {
        rho.iter()
            .zip(theta)
            .map(|(&r, &s)| s - geom.s_lower(r))
            .fold(f64::INFINITY, f64::min)
    } else {
        f64::NAN
    };
    conditions.push(check(
        "branch",
        branch_gap >= 0.0,
        format!("min theta0 - s_lower(rho0) = {branch_gap:.3e}"),
    ));

    let grid = *t.rho0.grid();
    let lap = t.rho0.laplacian_neumann();
    let lap_max = lap.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    // The boundary stencil itself grows like flux/h, so only interior nodes
    // set the curvature scale.
    let lap_interior = (0..grid.len())
        .filter(|&k| is_interior(&grid, k))
        .fold(0.0f64, |a, k| a.max(lap.values()[k].abs()));
    let flux = boundary_flux(&t.rho0);
    conditions.push(check(
        "neumann",
        flux <= grid.h() * (1.0 + lap_interior),
        format!("max one-sided normal derivative {flux:.3e}"),
    ));
    conditions.push(check(
        "laplacian_bounded",
        lap_max.is_finite(),
        format!("max |laplacian rho0| = {lap_max:.3e}"),
    ));

    let grad = t.xi0.map(|x| x.max(0.0).sqrt()).max_gradient();
    conditions.push(check(
        "sqrt_xi_gradient_finite",
        grad.is_finite(),
        format!("max |grad sqrt(xi0)| = {grad:.3e}"),
    ));

    ValidationReport {
        conditions,
        eps0: 0.5 * margin,
    }
}

/// `θ0 = s_lower + frac·(s_upper − s_lower)`, `ξ0 = λ(ρ0, θ0)²/ρ0`.
pub fn synthesize(rho0: &ScalarField, theta_frac: f64, params: &ModelParams) -> Result<InitialTriple> {
    if !(0.0..=1.0).contains(&theta_frac) {
        return Err(Error::Domain(format!("theta_frac {theta_frac} outside [0, 1]")));
    }
    if !(rho0.min() > 0.0 && rho0.max() < 1.0) {
        return Err(Error::Domain(format!(
            "rho0 range [{}, {}] not inside (0,1)",
            rho0.min(),
            rho0.max()
        )));
    }
    let geom = params.branches();
    let theta0 = rho0.map(|r| {
        let (lo, hi) = (geom.s_lower(r), geom.s_upper(r));
        if theta_frac == 1.0 {
            hi
        } else {
            lo + theta_frac * (hi - lo)
        }
    });
    let xi0 = rho0.zip_map(&theta0, |r, s| {
        if theta_frac == 1.0 {
            return 0.0;
        }
        let lam = params.lambda_raw(r, s).min(0.0);
        lam * lam / r
    });
    InitialTriple::new(rho0.clone(), xi0, theta0, params)
}
