//! The H4 layer: Gauss equation `Delta u = e^{2u} - 1 + e^{-4u} t f` with
//! `mean(e^{2u}) = 1 - R`, and the fixed point of `f_hat -> e^{2w} f` where
//! `Delta w = R - 1 + e^{2u}`.

use std::f64::consts::LN_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fixed_point::{FixedPointOptions, FixedPointProblem, IterationRecord};
use crate::gauss::{GaussForm, ADMISSIBLE_SLACK};
use crate::poisson::{solve_poisson_zero_mean, PoissonOptions};
use crate::ray::{balance_requirement, solve_with_volume, VolumeOptions, VolumeSolve};
use crate::sections::balance_of;
use crate::surface::{HyperbolicSurface, ScalarField};

/// Exploratory bracket parameter for H4 runs (the form requires `eta < 1/2`).
pub const H4_EXPLORATORY_ETA: f64 = 0.499;
const MIN_DAMPING: f64 = 1.0 / 64.0;

/// `(u, t)` with `mean(e^{2u}) = 1 - R`; requires `bal(f) >= (8 + eta)^3 R / (16 eta)`.
pub fn solve_gauss_h4(surface: &HyperbolicSurface, f: &ScalarField, eta: f64, r: f64, opts: VolumeOptions) -> Result<VolumeSolve> {
    solve_with_volume(surface, GaussForm::H4, f, eta, r, opts)
}

#[derive(Debug, Clone)]
pub struct RescalingCheck {
    pub direct: VolumeSolve,
    /// `u~ + ln 2 / 2` from the solve with `(R/2, eta/2, f/4)`.
    pub rescaled_u: ScalarField,
    pub rescaled_t: f64,
    pub u_difference: f64,
    pub t_difference: f64,
}

/// Solves directly and through the substitution `u = u~ + ln2/2`, `R~ = R/2`,
/// `eta~ = eta/2`, `f~ = f/4` into the PU(2,1) form.
pub fn h4_rescaling_check(surface: &HyperbolicSurface, f: &ScalarField, eta: f64, r: f64, opts: VolumeOptions) -> Result<RescalingCheck> {
    let direct = solve_gauss_h4(surface, f, eta, r, opts)?;
    let tilde = solve_with_volume(surface, GaussForm::Pu21, &f.scale(0.25), 0.5 * eta, 0.5 * r, opts)?;
    let rescaled_u = tilde.solution.u.map(|x| x + 0.5 * LN_2);
    Ok(RescalingCheck {
        u_difference: rescaled_u.distance(&direct.solution.u)?,
        t_difference: (tilde.t() - direct.t()).abs(),
        rescaled_t: tilde.t(),
        rescaled_u,
        direct,
    })
}

/// Closed form for constant data `c`: `u = ln(1 - R) / 2`, `t c = R (1 - R)^2`.
pub fn h4_constant_pair(r: f64, c: f64) -> (f64, f64) {
    (0.5 * (1.0 - r).ln(), r * (1.0 - r).powi(2) / c)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct H4Hypothesis {
    pub balance: f64,
    pub bal_ok: bool,
    /// `A exp(-4 C sqrt(Vol) eta / (4 + eta))`.
    pub lhs: f64,
    /// `(8 + eta)^3 R / (16 eta)`.
    pub rhs: f64,
    pub exp_ok: bool,
}

impl H4Hypothesis {
    pub fn holds(&self) -> bool {
        self.bal_ok && self.exp_ok
    }
}

/// `C (eta / (4 + eta)) sqrt(Vol)`, the sup-norm radius for `w`.
pub fn h4_radius(c: f64, eta: f64, volume: f64) -> f64 {
    c * eta / (4.0 + eta) * volume.sqrt()
}

pub fn check_h4_hypothesis(surface: &HyperbolicSurface, p: &FixedPointProblem) -> Result<H4Hypothesis> {
    if !(p.a > 0.0 && p.r > 0.0 && p.eta > 0.0 && p.eta < 0.5) {
        return Err(Error::Precondition("A, R must be positive and eta in (0, 1/2)".into()));
    }
    let balance = balance_of(surface, p.f.values())?;
    let c = &p.constants;
    let lhs = p.a * (-4.0 * h4_radius(c.poisson_constant, p.eta, c.volume)).exp();
    let rhs = balance_requirement(GaussForm::H4, p.eta, p.r);
    Ok(H4Hypothesis { balance, bal_ok: balance >= p.a - ADMISSIBLE_SLACK, lhs, rhs, exp_ok: lhs >= rhs })
}

#[derive(Debug, Clone)]
pub struct H4Certificate {
    pub u: ScalarField,
    pub w: ScalarField,
    /// `w - u`
    pub v: ScalarField,
    pub t: f64,
    pub f_hat: ScalarField,
    pub eta: f64,
    pub r: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    pub hypothesis: H4Hypothesis,
    pub hypothesis_overridden: bool,
    pub radius: f64,
    pub w_sup: f64,
    pub in_radius: bool,
    /// `sup |Delta u - (e^{2u} - 1 + e^{-4u} e^{2w} t f)|`
    pub uw_gauss_residual: f64,
    /// `sup |Delta w - (R - 1 + e^{2u})|`
    pub uw_poisson_residual: f64,
    /// `sup |Delta u - (e^{2u} - 1 + e^{-2u} e^{2v} t f)|`
    pub uv_gauss_residual: f64,
    /// `sup |Delta v - (R - e^{-2u} e^{2v} t f)|`
    pub uv_poisson_residual: f64,
    /// `sup e^{-4u} e^{2v} t f`
    pub af_bound: f64,
    /// `sup |e^{-4u} e^{2v} t f - e^{-6u} e^{2w} t f|`
    pub af_identity_gap: f64,
    pub af_ok: bool,
}

pub fn run_fixed_point_h4(surface: &HyperbolicSurface, problem: &FixedPointProblem, opts: FixedPointOptions) -> Result<H4Certificate> {
    let hypothesis = check_h4_hypothesis(surface, problem)?;
    if !hypothesis.holds() && !opts.override_hypothesis {
        return Err(Error::HypothesisFails { lhs: hypothesis.lhs, rhs: hypothesis.rhs });
    }
    let exploratory = !hypothesis.holds();
    let vol_opts = VolumeOptions {
        enforce_balance: !exploratory,
        extended_eta: exploratory.then_some(H4_EXPLORATORY_ETA),
        ..VolumeOptions::default()
    };
    let (eta, r) = (problem.eta, problem.r);
    let radius = h4_radius(problem.constants.poisson_constant, eta, problem.constants.volume);
    let mut f_hat = problem.f.clone();
    let mut theta = opts.damping.clamp(MIN_DAMPING, 1.0);
    let mut history = Vec::new();
    let mut last_drift = f64::INFINITY;
    let mut state = None;
    let mut converged = false;
    for k in 1..=opts.max_iter {
        let vs = solve_gauss_h4(surface, &f_hat, eta, r, vol_opts)?;
        let u = &vs.solution.u;
        let rhs = u.map(|x| r - 1.0 + (2.0 * x).exp());
        let mean = surface.mean(&rhs)?;
        if mean.abs() > 1e-6 {
            return Err(Error::SolvabilityViolated { mean, allowed: 1e-6 });
        }
        let w = solve_poisson_zero_mean(surface, &rhs, PoissonOptions { project_mean: true, ..Default::default() }, None)?.v;
        let next_hat = w.map(|x| (2.0 * x).exp()).mul(&problem.f)?;
        let drift = next_hat.distance(&f_hat)?;
        history.push(IterationRecord { iteration: k, drift, damping: theta, t: vs.t(), v_sup: w.sup_abs() });
        if drift <= opts.drift_tol {
            state = Some((vs, w, f_hat.clone()));
            converged = true;
            break;
        }
        if drift > last_drift {
            theta = (0.5 * theta).max(MIN_DAMPING);
        }
        last_drift = drift;
        let next = f_hat.scale(1.0 - theta).add(&next_hat.scale(theta))?;
        state = Some((vs, w, f_hat));
        f_hat = next;
    }
    let (vs, w, f_used) = state.ok_or_else(|| Error::Precondition("max_iter must be at least 1".into()))?;
    let u = vs.solution.u.clone();
    let t = vs.t();
    let v = w.sub(&u)?;
    let (lu, lw, lv) = (surface.laplacian(&u)?, surface.laplacian(&w)?, surface.laplacian(&v)?);
    let f = problem.f.values();
    let mut c = Residuals::default();
    for i in 0..u.len() {
        let (ui, wi, vi) = (u.values()[i], w.values()[i], v.values()[i]);
        let e2u = (2.0 * ui).exp();
        let cw = (-4.0 * ui).exp() * (2.0 * wi).exp() * t * f[i];
        let cv = (-2.0 * ui).exp() * (2.0 * vi).exp() * t * f[i];
        c.uw_g = c.uw_g.max((lu.values()[i] - (e2u - 1.0 + cw)).abs());
        c.uw_p = c.uw_p.max((lw.values()[i] - (r - 1.0 + e2u)).abs());
        c.uv_g = c.uv_g.max((lu.values()[i] - (e2u - 1.0 + cv)).abs());
        c.uv_p = c.uv_p.max((lv.values()[i] - (r - cv)).abs());
        let af_v = (-4.0 * ui).exp() * (2.0 * vi).exp() * t * f[i];
        let af_w = (-6.0 * ui).exp() * (2.0 * wi).exp() * t * f[i];
        c.af = c.af.max(af_v);
        c.gap = c.gap.max((af_v - af_w).abs());
    }
    let w_sup = w.sup_abs();
    Ok(H4Certificate {
        u,
        w,
        v,
        t,
        f_hat: f_used,
        eta,
        r,
        iterations: history.len(),
        converged,
        history,
        hypothesis,
        hypothesis_overridden: exploratory,
        radius,
        w_sup,
        in_radius: w_sup <= radius,
        uw_gauss_residual: c.uw_g,
        uw_poisson_residual: c.uw_p,
        uv_gauss_residual: c.uv_g,
        uv_poisson_residual: c.uv_p,
        af_bound: c.af,
        af_identity_gap: c.gap,
        af_ok: c.af <= eta,
    })
}

#[derive(Default)]
struct Residuals {
    uw_g: f64,
    uw_p: f64,
    uv_g: f64,
    uv_p: f64,
    af: f64,
    gap: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::regular_octagon_genus2;
    use crate::spectral::GeometryConstants;

    fn surface() -> HyperbolicSurface {
        HyperbolicSurface::uniformize(regular_octagon_genus2(6).unwrap(), 1e-10).unwrap()
    }

    #[test]
    fn constant_pair_and_rescaling() {
        let s = surface();
        let (eta, r, c) = (0.4, 0.002, 0.05);
        let f = s.constant(c);
        let sol = solve_gauss_h4(&s, &f, eta, r, VolumeOptions::default()).unwrap();
        let (u, t) = h4_constant_pair(r, c);
        assert!(sol.solution.u.values().iter().all(|x| (x - u).abs() <= 1e-8));
        assert!((sol.t() - t).abs() <= 1e-8);
        let g = s.field_from_fn(|i| 1.0 + 0.05 * (i as f64 * 0.37).sin());
        let chk = h4_rescaling_check(&s, &g, eta, r, VolumeOptions::default()).unwrap();
        assert!(chk.u_difference <= 1e-10, "{}", chk.u_difference);
    }

    #[test]
    fn zero_data_gives_zero() {
        let s = surface();
        let (lo, hi) = GaussForm::H4.bracket(0.3);
        assert!(lo < 0.0 && hi == 0.0);
        let sol = crate::gauss::solve_gauss_form(&s, GaussForm::H4, &s.constant(0.0), 1.0, 0.3, 1e-12).unwrap();
        assert!(sol.u.sup_abs() <= 1e-12);
    }

    #[test]
    fn constant_fixed_point() {
        let s = surface();
        let (eta, r, c) = (0.4, 0.002, 0.05);
        let constants = GeometryConstants::from_values(1.0, s.spectral_gap().unwrap(), s.volume(), 0.1).unwrap();
        let p = FixedPointProblem { f: s.constant(c), eta, r, a: 1.0, constants };
        let cert = run_fixed_point_h4(&s, &p, FixedPointOptions::default()).unwrap();
        let (u, t) = h4_constant_pair(r, c);
        assert!(cert.converged && cert.iterations <= 2);
        assert!(cert.u.values().iter().all(|x| (x - u).abs() <= 1e-8));
        assert!(cert.w.sup_abs() <= 1e-8);
        assert!(cert.v.values().iter().all(|x| (x + u).abs() <= 1e-8));
        assert!((cert.t - t).abs() <= 1e-8);
        assert!(cert.af_identity_gap <= 1e-15 && cert.af_ok);
        assert!((cert.af_bound - r / (1.0 - r)).abs() <= 1e-8);
    }
}
