//! Pointwise entropy-like variable `ξ` driven by a given order-parameter
//! history `v`:
//!
//! ```text
//! ∂t ξ + g(t) √ξ = 0,   g = (κ |∂t v|² + σ̄) / √v,   ξ(0) = ξ0.
//! ```
//!
//! The right-hand side is not Lipschitz at `ξ = 0`, so the Cauchy problem
//! can have many solutions. We integrate `y = √ξ`, for which the equation is
//! `y' = −g/2`, and select the maximal solution: `y` is clamped at zero while
//! `g ≥ 0` and released from zero as soon as `g < 0`.

use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::series::FieldSeries;

/// Data for one pointwise ODE solve over a time window.
///
/// `v` and `sigma_bar` live on the `steps + 1` time levels, `dtv` holds one
/// rate per step.
#[derive(Debug, Clone, Copy)]
pub struct XiOdeInput<'a> {
    pub v: &'a FieldSeries,
    pub dtv: &'a [ScalarField],
    pub sigma_bar: &'a FieldSeries,
    pub xi0: &'a ScalarField,
    pub kappa: f64,
}

impl XiOdeInput<'_> {
    pub fn dt(&self) -> f64 {
        self.v.dt
    }

    fn validate(&self) -> Result<()> {
        let steps = self.v.steps();
        if self.dtv.len() != steps || self.sigma_bar.steps() != steps {
            return Err(Error::Domain(format!(
                "misaligned ODE input: {} levels, {} rates, {} source levels",
                steps + 1,
                self.dtv.len(),
                self.sigma_bar.levels.len()
            )));
        }
        let vmin = self.v.min();
        if !(vmin > 0.0) {
            return Err(Error::Domain(format!("v must be strictly positive, min is {vmin}")));
        }
        let xmin = self.xi0.min();
        if !(xmin >= 0.0) {
            return Err(Error::Domain(format!("xi0 must be nonnegative, min is {xmin}")));
        }
        Ok(())
    }

    /// `g` on step `n` at point `k`, with `v` and `σ̄` taken at the step midpoint.
    #[inline]
    fn rate_coefficient(&self, n: usize, k: usize) -> f64 {
        let v = &self.v.levels;
        let s = &self.sigma_bar.levels;
        let vm = 0.5 * (v[n].values()[k] + v[n + 1].values()[k]);
        let sm = 0.5 * (s[n].values()[k] + s[n + 1].values()[k]);
        let d = self.dtv[n].values()[k];
        (self.kappa * d * d + sm) / vm.sqrt()
    }
}

/// Maximal solution on the window.
#[derive(Debug, Clone, PartialEq)]
pub struct XiSolution {
    pub xi: FieldSeries,
    pub sqrt_xi: FieldSeries,
    /// `chi[n][k]` is true exactly where `xi` is positive.
    pub chi: Vec<Vec<bool>>,
}

/// Integrates `y = √ξ` per point with the maximal-solution rule.
pub fn phi_maximal(input: &XiOdeInput<'_>) -> Result<XiSolution> {
    input.validate()?;
    let steps = input.v.steps();
    let dt = input.dt();
    let grid = *input.xi0.grid();
    let npts = grid.len();

    let mut y_levels: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);
    y_levels.push(input.xi0.values().iter().map(|x| x.sqrt()).collect());
    for n in 0..steps {
        let prev = &y_levels[n];
        let next: Vec<f64> = (0..npts)
            .map(|k| {
                let y = prev[k];
                let g = input.rate_coefficient(n, k);
                if y > 0.0 || g < 0.0 {
                    (y - 0.5 * g * dt).max(0.0)
                } else {
                    0.0
                }
            })
            .collect();
        y_levels.push(next);
    }

    let chi = y_levels
        .iter()
        .map(|ys| ys.iter().map(|&y| y > 0.0).collect())
        .collect();
    let sqrt_levels: Vec<ScalarField> = y_levels
        .into_iter()
        .map(|ys| ScalarField::from_vec(grid, ys))
        .collect();
    let sqrt_xi = FieldSeries {
        t0: input.v.t0,
        dt,
        levels: sqrt_levels,
    };
    let xi = sqrt_xi.map(|y| y * y);
    Ok(XiSolution { xi, sqrt_xi, chi })
}

/// `∂t√ξ = −χ·g/2` on each step, with `χ` taken at the end of the step.
pub fn dt_sqrt_xi(sol: &XiSolution, input: &XiOdeInput<'_>) -> Vec<ScalarField> {
    let grid = *input.xi0.grid();
    (0..input.v.steps())
        .map(|n| {
            let vals = (0..grid.len())
                .map(|k| {
                    if sol.chi[n + 1][k] {
                        -0.5 * input.rate_coefficient(n, k)
                    } else {
                        0.0
                    }
                })
                .collect();
            ScalarField::from_vec(grid, vals)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use proptest::prelude::*;

    struct Case {
        v: FieldSeries,
        dtv: Vec<ScalarField>,
        sigma: FieldSeries,
        xi0: ScalarField,
    }

    impl Case {
        fn uniform(grid: Grid, dt: f64, steps: usize, v: f64, sigma: f64, xi0: f64) -> Self {
            let vf = ScalarField::constant(grid, v);
            let vs = FieldSeries::constant(0.0, dt, steps, &vf);
            let dtv = vs.rates();
            Self {
                v: vs,
                dtv,
                sigma: FieldSeries::constant(0.0, dt, steps, &ScalarField::constant(grid, sigma)),
                xi0: ScalarField::constant(grid, xi0),
            }
        }

        fn input(&self) -> XiOdeInput<'_> {
            XiOdeInput {
                v: &self.v,
                dtv: &self.dtv,
                sigma_bar: &self.sigma,
                xi0: &self.xi0,
                kappa: 1.0,
            }
        }
    }

    fn grid() -> Grid {
        Grid::line(3).unwrap()
    }

    #[test]
    fn decay_to_zero_matches_closed_form() {
        let dt = 1e-3;
        let case = Case::uniform(grid(), dt, 1500, 0.25, 1.0, 1.0);
        let sol = phi_maximal(&case.input()).unwrap();
        for (n, level) in sol.xi.levels.iter().enumerate() {
            let t = n as f64 * dt;
            let exact = (1.0 - t).max(0.0).powi(2);
            assert!((level.values()[1] - exact).abs() < 1e-12, "t={t}");
        }
        assert!((sol.xi.levels[500].values()[0] - 0.25).abs() < 1e-12);
        assert!(sol.xi.levels[1000..].iter().all(|l| l.max() == 0.0));
    }

    #[test]
    fn zero_rate_keeps_initial_value() {
        let case = Case::uniform(grid(), 0.01, 100, 0.3, 0.0, 0.7);
        let sol = phi_maximal(&case.input()).unwrap();
        assert!(sol.xi.levels.iter().all(|l| l.values().iter().all(|&x| (x - 0.7).abs() < 1e-15)));
    }

    #[test]
    fn peano_release_picks_the_largest_solution() {
        let dt = 1e-3;
        let case = Case::uniform(grid(), dt, 1000, 0.25, -1.0, 0.0);
        let sol = phi_maximal(&case.input()).unwrap();
        for (n, level) in sol.xi.levels.iter().enumerate() {
            let t = n as f64 * dt;
            assert!((level.values()[2] - t * t).abs() < 1e-12);
        }
        assert!(sol.chi[1].iter().all(|&c| c));
        assert!(sol.chi[0].iter().all(|&c| !c));
    }

    #[test]
    fn rejects_nonpositive_v_and_negative_xi0() {
        let bad = Case::uniform(grid(), 0.1, 3, 0.0, 1.0, 1.0);
        assert!(matches!(phi_maximal(&bad.input()), Err(Error::Domain(_))));
        let bad = Case::uniform(grid(), 0.1, 3, 0.5, 1.0, -1e-3);
        assert!(matches!(phi_maximal(&bad.input()), Err(Error::Domain(_))));
    }

    #[test]
    fn rate_field_examples() {
        let case = Case::uniform(grid(), 0.01, 200, 0.25, 1.0, 1.0);
        let input = case.input();
        let sol = phi_maximal(&input).unwrap();
        let rates = dt_sqrt_xi(&sol, &input);
        assert!(rates[..99].iter().all(|r| r.values().iter().all(|&v| (v + 1.0).abs() < 1e-14)));
        // after extinction chi = 0 and g > 0
        assert!(rates[120..].iter().all(|r| r.max() == 0.0 && r.min() == 0.0));
    }

    #[test]
    fn rate_field_matches_time_differences() {
        let g = Grid::line(9).unwrap();
        let dt = 1e-3;
        let steps = 400;
        let v = FieldSeries::from_fn(0.0, dt, steps, |t| {
            ScalarField::from_fn(g, |x, _| 0.4 + 0.1 * (3.0 * t + x).sin())
        });
        let dtv = v.rates();
        let sigma = FieldSeries::from_fn(0.0, dt, steps, |t| {
            ScalarField::from_fn(g, |x, _| (5.0 * t - 2.0 * x).cos())
        });
        let xi0 = ScalarField::from_fn(g, |x, _| 0.05 * x);
        let input = XiOdeInput { v: &v, dtv: &dtv, sigma_bar: &sigma, xi0: &xi0, kappa: 1.0 };
        let sol = phi_maximal(&input).unwrap();
        let rates = dt_sqrt_xi(&sol, &input);
        let fd = sol.sqrt_xi.rates();
        let mut checked = 0;
        for n in 0..steps {
            for k in 0..g.len() {
                if sol.chi[n][k] == sol.chi[n + 1][k] {
                    let diff = (fd[n].values()[k] - rates[n].values()[k]).abs();
                    assert!(diff <= 10.0 * dt, "step {n} point {k}: {diff}");
                    checked += 1;
                }
            }
        }
        assert!(checked > steps * g.len() / 2);
    }

    /// Analytic maximal solution of `y' = −g(t)/2` for piecewise-constant `g`.
    fn analytic(y0: f64, pieces: &[(f64, f64)], t: f64) -> f64 {
        let mut y = y0;
        let mut start = 0.0;
        for &(end, g) in pieces {
            if t <= start {
                break;
            }
            let span = t.min(end) - start;
            if g >= 0.0 {
                y = (y - 0.5 * g * span).max(0.0);
            } else {
                y -= 0.5 * g * span;
            }
            start = end;
        }
        y
    }

    #[test]
    fn piecewise_constant_coefficient_oracle() {
        let g = grid();
        let dt = 1e-4;
        let steps = 10_000;
        let pieces: [(f64, f64); 4] = [(0.2, 3.0), (0.45, -2.0), (0.7, 4.0), (1.0, -0.5)];
        let coeff = |t: f64| pieces.iter().find(|p| t < p.0).map_or(pieces[3].1, |p| p.1);
        // v ≡ 1 and σ̄ ≡ −2, so g = dtv² − 2 on each step; dtv is per step,
        // which puts the breakpoints exactly on the step grid.
        let v = FieldSeries::constant(0.0, dt, steps, &ScalarField::constant(g, 1.0));
        let dtv: Vec<ScalarField> = (0..steps)
            .map(|n| ScalarField::constant(g, (coeff((n as f64 + 0.5) * dt) + 2.0).sqrt()))
            .collect();
        let sigma = FieldSeries::constant(0.0, dt, steps, &ScalarField::constant(g, -2.0));
        let xi0 = ScalarField::constant(g, 0.01);
        let input = XiOdeInput { v: &v, dtv: &dtv, sigma_bar: &sigma, xi0: &xi0, kappa: 1.0 };
        let sol = phi_maximal(&input).unwrap();
        let mut worst: f64 = 0.0;
        for (n, level) in sol.sqrt_xi.levels.iter().enumerate() {
            let exact = analytic(0.1, &pieces, n as f64 * dt);
            worst = worst.max((level.values()[0] - exact).abs());
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    fn perturbed_case(g: Grid, eps: f64, dt: f64, steps: usize) -> (FieldSeries, Vec<ScalarField>) {
        let v = FieldSeries::from_fn(0.0, dt, steps, |t| {
            ScalarField::from_fn(g, |x, _| {
                0.4 + 0.1 * (2.0 * t + x).cos() + eps * (7.0 * t).sin() * (1.0 + x)
            })
        });
        let dtv = v.rates();
        (v, dtv)
    }

    #[test]
    fn stability_in_l1_is_linear_in_the_perturbation() {
        let g = Grid::line(17).unwrap();
        let dt = 1e-3;
        let steps = 300;
        let sigma = FieldSeries::from_fn(0.0, dt, steps, |_| ScalarField::from_fn(g, |x, _| 0.3 - 0.6 * x));
        let xi0 = ScalarField::from_fn(g, |x, _| 0.02 + 0.02 * x);
        let (v0, d0) = perturbed_case(g, 0.0, dt, steps);
        let base = phi_maximal(&XiOdeInput { v: &v0, dtv: &d0, sigma_bar: &sigma, xi0: &xi0, kappa: 1.0 }).unwrap();
        let mut ratios = Vec::new();
        for eps in [1e-2, 3e-3, 1e-3, 3e-4, 1e-4] {
            let (v1, d1) = perturbed_case(g, eps, dt, steps);
            let sol = phi_maximal(&XiOdeInput { v: &v1, dtv: &d1, sigma_bar: &sigma, xi0: &xi0, kappa: 1.0 }).unwrap();
            let lhs = base
                .sqrt_xi
                .levels
                .iter()
                .zip(&sol.sqrt_xi.levels)
                .map(|(a, b)| a.zip_map(b, |x, y| x - y).norms().l1)
                .fold(0.0, f64::max);
            let dv = v0.zip_map(&v1, |a, b| a - b);
            let l1q = |fields: &[ScalarField]| fields.iter().map(|f| f.norms().l1 * dt).sum::<f64>();
            let ddt: Vec<ScalarField> = d0.iter().zip(&d1).map(|(a, b)| a.zip_map(b, |x, y| x - y)).collect();
            let rhs = l1q(&ddt) + l1q(&dv.levels[..steps]);
            ratios.push(lhs / rhs);
        }
        let fitted = ratios[0];
        assert!(ratios.iter().all(|&r| r.is_finite() && r <= 2.0 * fitted), "{ratios:?}");
    }

    proptest! {
        #[test]
        fn nonnegative_and_monotone_for_nonnegative_source(
            sigma in 0.0f64..2.0, vel in -1.0f64..1.0, xi in 0.0f64..1.0, v in 0.05f64..0.95)
        {
            let g = grid();
            let dt = 1e-2;
            let steps = 100;
            let vs = FieldSeries::from_fn(0.0, dt, steps, |t| ScalarField::constant(g, v + 0.01 * vel * t));
            let dtv = vs.rates();
            let sig = FieldSeries::constant(0.0, dt, steps, &ScalarField::constant(g, sigma));
            let xi0 = ScalarField::constant(g, xi);
            let sol = phi_maximal(&XiOdeInput { v: &vs, dtv: &dtv, sigma_bar: &sig, xi0: &xi0, kappa: 1.0 }).unwrap();
            for w in sol.xi.levels.windows(2) {
                prop_assert!(w[1].min() >= 0.0);
                prop_assert!(w[1].values().iter().zip(w[0].values()).all(|(b, a)| b <= a));
            }
            for (lvl, mask) in sol.xi.levels.iter().zip(&sol.chi) {
                prop_assert!(lvl.values().iter().zip(mask).all(|(&x, &c)| c == (x > 0.0)));
            }
        }

        #[test]
        fn comparison_principle(a in 0.0f64..1.0, b in 0.0f64..1.0, s0 in -2.0f64..2.0, s1 in -2.0f64..2.0) {
            let g = grid();
            let dt = 1e-2;
            let steps = 100;
            let vs = FieldSeries::constant(0.0, dt, steps, &ScalarField::constant(g, 0.5));
            let dtv = vs.rates();
            let sig = FieldSeries::from_fn(0.0, dt, steps, |t| ScalarField::constant(g, if t < 0.5 { s0 } else { s1 }));
            let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
            let run = |x0: f64| {
                let xi0 = ScalarField::constant(g, x0);
                phi_maximal(&XiOdeInput { v: &vs, dtv: &dtv, sigma_bar: &sig, xi0: &xi0, kappa: 1.0 }).unwrap()
            };
            let (sa, sb) = (run(hi), run(lo));
            for (x, y) in sa.xi.levels.iter().zip(&sb.xi.levels) {
                prop_assert!(x.values().iter().zip(y.values()).all(|(p, q)| p >= q));
            }
        }
    }
}
