//! Physical parameters, the double-well potential and the consistency
//! function `λ(r, s) = c0·r·s + cv·s·ln s` tying temperature to the
//! order parameter and the entropy-like variable.
//!
//! For fixed `r` the map `s ↦ λ(r, s)` is strictly convex on `(0, ∞)`,
//! tends to zero at `s = 0`, has its minimum at `s_lower(r) = e^(−1−c*·r)`
//! and its positive zero at `s_upper(r) = e^(−c*·r)`, with `c* = c0/cv`.
//! The admissible temperature branch lies strictly between the two.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// User-supplied potential given by closures for `f1`, `f2` and their
/// derivatives. `f2_prime` must be bounded on `(0,1)` by `m2_base`.
#[derive(Clone)]
pub struct CustomPotential {
    pub f1: ScalarFn,
    pub f1_prime: ScalarFn,
    pub f1_second: ScalarFn,
    pub f2: ScalarFn,
    pub f2_prime: ScalarFn,
    pub m2_base: f64,
}

impl CustomPotential {
    /// Potential with `f ≡ 0`. Violates the endpoint blow-up hypothesis, so
    /// it only makes sense for tests of the linear part of the scheme.
    pub fn zero() -> Self {
        let zero: ScalarFn = Arc::new(|_| 0.0);
        Self {
            f1: zero.clone(),
            f1_prime: zero.clone(),
            f1_second: zero.clone(),
            f2: zero.clone(),
            f2_prime: zero,
            m2_base: 0.0,
        }
    }
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential")
            .field("m2_base", &self.m2_base)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum PotentialKind {
    /// `f1(r) = r ln r + (1−r) ln(1−r) + ln 2`, `f2(r) = a·r(1−r)`.
    LogarithmicDoubleWell { a: f64 },
    Custom(CustomPotential),
}

/// Double-well potential `f = f1 + f2` on `(0,1)`: `f1` convex and singular
/// at the endpoints, `f2` smooth with bounded derivative.
///
/// `linear_shift` is added to `f2'` (and `linear_shift·r` to `f2`); it carries
/// the `c0·θ_c` term once the potential is attached to a [`ModelParams`].
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    linear_shift: f64,
}

impl PotentialSpec {
    pub fn logarithmic(a: f64) -> Self {
        Self {
            kind: PotentialKind::LogarithmicDoubleWell { a },
            linear_shift: 0.0,
        }
    }

    pub fn custom(potential: CustomPotential) -> Self {
        Self {
            kind: PotentialKind::Custom(potential),
            linear_shift: 0.0,
        }
    }

    pub fn linear_shift(&self) -> f64 {
        self.linear_shift
    }

    #[inline]
    pub fn f1(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::LogarithmicDoubleWell { .. } => {
                r * r.ln() + (1.0 - r) * (1.0 - r).ln() + std::f64::consts::LN_2
            }
            PotentialKind::Custom(c) => (c.f1)(r),
        }
    }

    #[inline]
    pub fn f1_prime(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::LogarithmicDoubleWell { .. } => (r / (1.0 - r)).ln(),
            PotentialKind::Custom(c) => (c.f1_prime)(r),
        }
    }

    #[inline]
    pub fn f1_second(&self, r: f64) -> f64 {
        match &self.kind {
            PotentialKind::LogarithmicDoubleWell { .. } => 1.0 / (r * (1.0 - r)),
            PotentialKind::Custom(c) => (c.f1_second)(r),
        }
    }

    #[inline]
    pub fn f2(&self, r: f64) -> f64 {
        let base = match &self.kind {
            PotentialKind::LogarithmicDoubleWell { a } => a * r * (1.0 - r),
            PotentialKind::Custom(c) => (c.f2)(r),
        };
        base + self.linear_shift * r
    }

    #[inline]
    pub fn f2_prime(&self, r: f64) -> f64 {
        let base = match &self.kind {
            PotentialKind::LogarithmicDoubleWell { a } => a * (1.0 - 2.0 * r),
            PotentialKind::Custom(c) => (c.f2_prime)(r),
        };
        base + self.linear_shift
    }

    pub fn f(&self, r: f64) -> f64 {
        self.f1(r) + self.f2(r)
    }

    pub fn f_prime(&self, r: f64) -> f64 {
        self.f1_prime(r) + self.f2_prime(r)
    }

    /// `sup |f2'|` over `(0,1)`, shift included.
    pub fn m2_base(&self) -> f64 {
        match &self.kind {
            PotentialKind::LogarithmicDoubleWell { a } => a.abs() + self.linear_shift.abs(),
            PotentialKind::Custom(c) => c.m2_base + self.linear_shift.abs(),
        }
    }

    /// Sampled check of the structural hypotheses: `f ≥ 0`, `f1` convex,
    /// `f'` diverging to `−∞` at 0 and `+∞` at 1.
    pub fn check_structure(&self) -> Result<()> {
        let samples = 999;
        let step = 1.0 / (samples as f64 + 1.0);
        for k in 1..=samples {
            let r = k as f64 * step;
            if self.f(r) < -1e-14 {
                return Err(Error::Domain(format!("potential negative at r = {r}")));
            }
        }
        for k in 2..samples {
            let r = k as f64 * step;
            let second = self.f1(r + step) - 2.0 * self.f1(r) + self.f1(r - step);
            if second < -1e-12 {
                return Err(Error::Domain(format!("f1 not convex near r = {r}")));
            }
        }
        let near = [1e-2, 1e-4, 1e-6, 1e-8];
        let left: Vec<f64> = near.iter().map(|&r| self.f_prime(r)).collect();
        let right: Vec<f64> = near.iter().map(|&e| self.f_prime(1.0 - e)).collect();
        let diverges = |seq: &[f64], sign: f64| {
            seq.windows(2).all(|w| sign * (w[1] - w[0]) > 0.0)
                && sign * seq[seq.len() - 1] > 10.0
        };
        if !diverges(&left, -1.0) {
            return Err(Error::Domain("f' does not diverge to -inf at 0".into()));
        }
        if !diverges(&right, 1.0) {
            return Err(Error::Domain("f' does not diverge to +inf at 1".into()));
        }
        Ok(())
    }
}

/// Physical constants of the model together with the potential.
#[derive(Debug, Clone)]
pub struct ModelParams {
    c0: f64,
    cv: f64,
    cstar: f64,
    kappa: f64,
    theta_c: f64,
    potential: PotentialSpec,
}

impl ModelParams {
    /// Builds the parameter set, folding `c0·θ_c` into `f2'`.
    pub fn new(c0: f64, cv: f64, kappa: f64, theta_c: f64, potential: PotentialSpec) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::Domain(format!("c0 must be positive, got {c0}")));
        }
        if !(cv > 0.0 && cv.is_finite()) {
            return Err(Error::Domain(format!("cv must be positive, got {cv}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::Domain(format!("kappa must be positive, got {kappa}")));
        }
        if !theta_c.is_finite() {
            return Err(Error::Domain("theta_c must be finite".into()));
        }
        let mut potential = potential;
        potential.linear_shift = c0 * theta_c;
        Ok(Self {
            c0,
            cv,
            cstar: c0 / cv,
            kappa,
            theta_c,
            potential,
        })
    }

    /// `c0 = cv = κ = 1`, `θ_c = 0`, logarithmic well with `a = 3`.
    pub fn canonical() -> Self {
        Self::new(1.0, 1.0, 1.0, 0.0, PotentialSpec::logarithmic(3.0)).expect("valid defaults")
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }
    pub fn cv(&self) -> f64 {
        self.cv
    }
    pub fn cstar(&self) -> f64 {
        self.cstar
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn theta_c(&self) -> f64 {
        self.theta_c
    }
    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn branches(&self) -> BranchGeometry {
        BranchGeometry {
            cstar: self.cstar,
            cv: self.cv,
        }
    }

    /// `sup |f2'| + c0·θ*`, the bound on the explicit part of the nonlinearity
    /// once `−c0·θ` is read as part of `f2'`.
    pub fn m2(&self) -> f64 {
        self.potential.m2_base() + self.c0 * self.branches().theta_star_hi()
    }

    #[inline]
    pub(crate) fn lambda_raw(&self, r: f64, s: f64) -> f64 {
        self.c0 * r * s + self.cv * s * s.ln()
    }

    #[inline]
    pub(crate) fn dlambda_ds_raw(&self, r: f64, s: f64) -> f64 {
        self.c0 * r + self.cv * (1.0 + s.ln())
    }

    #[inline]
    pub(crate) fn margin_raw(&self, r: f64, xi: f64) -> f64 {
        self.cv * (-1.0 - self.cstar * r).exp() - (r * xi).sqrt()
    }
}

/// Minimum point and positive zero of `s ↦ λ(r, s)`, and the global
/// temperature bounds `θ⁎ = inf s_lower = e^(−(1+c*))`, `θ* = sup s_upper = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchGeometry {
    cstar: f64,
    cv: f64,
}

impl BranchGeometry {
    #[inline]
    pub fn s_lower(&self, r: f64) -> f64 {
        (-1.0 - self.cstar * r).exp()
    }

    #[inline]
    pub fn s_upper(&self, r: f64) -> f64 {
        (-self.cstar * r).exp()
    }

    /// `λ(r, s_lower(r))`.
    #[inline]
    pub fn lambda_min(&self, r: f64) -> f64 {
        -self.cv * (-1.0 - self.cstar * r).exp()
    }

    pub fn theta_star_lo(&self) -> f64 {
        (-(1.0 + self.cstar)).exp()
    }

    pub fn theta_star_hi(&self) -> f64 {
        1.0
    }
}

/// `f'(r) = f1'(r) + f2'(r)`, with `c0·θ_c` already inside `f2'`.
pub fn f_prime(r: f64, params: &ModelParams) -> Result<f64> {
    if !(r > 0.0 && r < 1.0) {
        return Err(Error::Domain(format!("f' needs r in (0,1), got {r}")));
    }
    Ok(params.potential.f_prime(r))
}

fn check_s(s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::Domain(format!("lambda needs s > 0, got {s}")));
    }
    Ok(())
}

/// `λ(r, s) = c0·r·s + cv·s·ln s`.
pub fn lambda(r: f64, s: f64, params: &ModelParams) -> Result<f64> {
    check_s(s)?;
    Ok(params.lambda_raw(r, s))
}

/// `∂λ/∂s(r, s) = c0·r + cv·(1 + ln s)`.
pub fn dlambda_ds(r: f64, s: f64, params: &ModelParams) -> Result<f64> {
    check_s(s)?;
    Ok(params.dlambda_ds_raw(r, s))
}

/// Serializable view of the model section of the run configuration.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelConfig {
    pub c0: f64,
    pub cv: f64,
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default)]
    pub theta_c: f64,
    #[serde(default)]
    pub potential: PotentialConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PotentialConfig {
    pub a: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { a: 3.0 }
    }
}

fn one() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn build(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.c0,
            self.cv,
            self.kappa,
            self.theta_c,
            PotentialSpec::logarithmic(self.potential.a),
        )
    }
}

impl From<&ModelParams> for Option<ModelConfig> {
    fn from(p: &ModelParams) -> Self {
        match p.potential.kind {
            PotentialKind::LogarithmicDoubleWell { a } => Some(ModelConfig {
                c0: p.c0,
                cv: p.cv,
                kappa: p.kappa,
                theta_c: p.theta_c,
                potential: PotentialConfig { a },
            }),
            PotentialKind::Custom(_) => None,
        }
    }
}
