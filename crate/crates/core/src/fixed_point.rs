//! Picard iteration of the composed map `Phi3 . Phi2 . Phi1` and almost-Fuchsian
//! certificates for the resulting `(u, v, t)`.
//!
//! `Phi1` solves the Gauss equation with prescribed volume, `Phi2` the zero-mean
//! Poisson equation `Delta v = 3/2 - 3R - 3 e^{2u}`, and `Phi3` reweights the data,
//! `f_hat = e^{2v} f`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss::{GaussForm, ADMISSIBLE_SLACK};
use crate::poisson::{solve_poisson_zero_mean, PoissonOptions};
use crate::ray::{balance_requirement, solve_with_volume, VolumeOptions, VolumeSolve};
use crate::sections::balance_of;
use crate::spectral::GeometryConstants;
use crate::surface::{HyperbolicSurface, ScalarField};

pub const DRIFT_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 200;
/// Bracket parameter used by exploratory runs when the volume target lies beyond
/// the admissible interval for the requested `eta`.
pub const EXPLORATORY_ETA: f64 = 0.999;
const MIN_DAMPING: f64 = 1.0 / 64.0;

#[derive(Debug, Clone)]
pub struct FixedPointProblem {
    pub f: ScalarField,
    pub eta: f64,
    pub r: f64,
    /// Balance lower bound `A`.
    pub a: f64,
    pub constants: GeometryConstants,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct HypothesisCheck {
    pub balance: f64,
    pub bal_ok: bool,
    /// `A exp(-12 C eta sqrt(Vol) / (2 (2 + eta)))`.
    pub lhs: f64,
    /// `(2 + eta)^3 R / (2 eta)`.
    pub rhs: f64,
    pub exp_ok: bool,
}

impl HypothesisCheck {
    pub fn holds(&self) -> bool {
        self.bal_ok && self.exp_ok
    }
}

/// `3 C eta sqrt(Vol) / (2 (2 + eta))`, the sup-norm radius of `U3`.
pub fn u3_radius(c: f64, eta: f64, volume: f64) -> f64 {
    3.0 * c * eta * volume.sqrt() / (2.0 * (2.0 + eta))
}

/// The exponential factor of the hypothesis, `exp(-12 C eta sqrt(Vol) / (2 (2 + eta)))`.
pub fn hypothesis_factor(c: f64, eta: f64, volume: f64) -> f64 {
    (-12.0 * c * eta * volume.sqrt() / (2.0 * (2.0 + eta))).exp()
}

pub fn check_hypothesis_values(a: f64, c: f64, eta: f64, volume: f64, r: f64, balance: f64) -> HypothesisCheck {
    let lhs = a * hypothesis_factor(c, eta, volume);
    let rhs = balance_requirement(GaussForm::Pu21, eta, r);
    HypothesisCheck { balance, bal_ok: balance >= a - ADMISSIBLE_SLACK, lhs, rhs, exp_ok: lhs >= rhs }
}

pub fn check_hypothesis(surface: &HyperbolicSurface, problem: &FixedPointProblem) -> Result<HypothesisCheck> {
    if !(problem.a > 0.0 && problem.r > 0.0 && problem.eta > 0.0 && problem.eta < 1.0) {
        return Err(Error::Precondition("A, R must be positive and eta in (0, 1)".into()));
    }
    let balance = balance_of(surface, problem.f.values())?;
    let c = &problem.constants;
    Ok(check_hypothesis_values(problem.a, c.poisson_constant, problem.eta, c.volume, problem.r, balance))
}

/// `Phi1`: `(u_hat, t)` with `mean(e^{2 u_hat}) = 1/2 - R`.
pub fn phi1(surface: &HyperbolicSurface, f_hat: &ScalarField, eta: f64, r: f64, opts: VolumeOptions) -> Result<VolumeSolve> {
    solve_with_volume(surface, GaussForm::Pu21, f_hat, eta, r, opts)
}

#[derive(Debug, Clone)]
pub struct Phi2Result {
    pub v: ScalarField,
    /// `mean(3/2 - 3R - 3 e^{2u})` before projection.
    pub rhs_mean: f64,
    pub rhs_sup: f64,
    /// `3 eta / (2 (2 + eta))`, implied by the `U2` bracket.
    pub rhs_sup_bound: f64,
    pub v_sup: f64,
    pub radius: f64,
    pub in_u3: bool,
}

/// `Phi2`: zero-mean `v` with `Delta v = 3/2 - 3R - 3 e^{2 u_hat}`.
pub fn phi2(
    surface: &HyperbolicSurface,
    u_hat: &ScalarField,
    r: f64,
    eta: f64,
    constants: &GeometryConstants,
) -> Result<Phi2Result> {
    let rhs = u_hat.map(|u| 1.5 - 3.0 * r - 3.0 * (2.0 * u).exp());
    let rhs_mean = surface.mean(&rhs)?;
    if rhs_mean.abs() > 1e-6 {
        return Err(Error::SolvabilityViolated { mean: rhs_mean, allowed: 1e-6 });
    }
    let sol = solve_poisson_zero_mean(surface, &rhs, PoissonOptions { project_mean: true, ..Default::default() }, None)?;
    let radius = u3_radius(constants.poisson_constant, eta, constants.volume);
    let v_sup = sol.norms.v_sup;
    Ok(Phi2Result {
        v: sol.v,
        rhs_mean,
        rhs_sup: rhs.sup_abs(),
        rhs_sup_bound: 3.0 * eta / (2.0 * (2.0 + eta)),
        v_sup,
        radius,
        in_u3: v_sup <= radius,
    })
}

#[derive(Debug, Clone)]
pub struct Phi3Result {
    pub f_hat: ScalarField,
    pub balance_before: f64,
    pub balance_after: f64,
    /// `bal(f_hat) >= e^{-4 |v|_inf} bal(f)`.
    pub weighting_inequality: bool,
}

/// `Phi3`: `f_hat = e^{2v} f`.
pub fn phi3(surface: &HyperbolicSurface, v: &ScalarField, f: &ScalarField) -> Result<Phi3Result> {
    let f_hat = v.map(|x| (2.0 * x).exp()).mul(f)?;
    let balance_before = balance_of(surface, f.values())?;
    let balance_after = balance_of(surface, f_hat.values())?;
    Ok(Phi3Result {
        weighting_inequality: balance_after >= (-4.0 * v.sup_abs()).exp() * balance_before,
        f_hat,
        balance_before,
        balance_after,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct FixedPointOptions {
    pub max_iter: usize,
    pub drift_tol: f64,
    /// Initial damping `theta` in `(0, 1]`; halved whenever the drift grows.
    pub damping: f64,
    pub override_hypothesis: bool,
    pub residual_tol: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        FixedPointOptions { max_iter: MAX_ITER, drift_tol: DRIFT_TOL, damping: 1.0, override_hypothesis: false, residual_tol: 1e-6 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub drift: f64,
    pub damping: f64,
    pub t: f64,
    pub v_sup: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Memberships {
    pub u1: bool,
    pub u2: bool,
    pub u3: bool,
}

#[derive(Debug, Clone)]
pub struct FixedPointCertificate {
    pub u: ScalarField,
    pub v: ScalarField,
    pub t: f64,
    pub f_hat: ScalarField,
    pub f: ScalarField,
    pub eta: f64,
    pub r: f64,
    pub iterations: usize,
    pub converged: bool,
    pub history: Vec<IterationRecord>,
    pub hypothesis: HypothesisCheck,
    pub hypothesis_overridden: bool,
    pub memberships: Memberships,
    pub u3_radius: f64,
    /// `sup |f_hat - e^{2v} f|`.
    pub fixed_point_defect: f64,
    pub gauss_residual: f64,
    pub poisson_residual: f64,
    pub af_bound: f64,
    pub af_ok: bool,
}

fn in_iteration(k: usize, e: Error) -> Error {
    match e {
        Error::Precondition(m) => Error::Precondition(format!("fixed-point iteration {k}: {m}")),
        Error::Inadmissible(m) => Error::Inadmissible(format!("fixed-point iteration {k}: {m}")),
        other => other,
    }
}

/// Membership of `u` in `U2`: prescribed volume and the pointwise bracket.
pub fn in_u2(surface: &HyperbolicSurface, u: &ScalarField, eta: f64, r: f64, tol: f64) -> Result<bool> {
    let e2 = u.map(|x| (2.0 * x).exp());
    let mean = surface.mean(&e2)?;
    Ok((mean - (0.5 - r)).abs() <= tol
        && e2.inf() >= 1.0 / (2.0 + eta) - ADMISSIBLE_SLACK
        && e2.sup() <= 0.5 + ADMISSIBLE_SLACK)
}

pub fn run_fixed_point(
    surface: &HyperbolicSurface,
    problem: &FixedPointProblem,
    opts: FixedPointOptions,
) -> Result<FixedPointCertificate> {
    let hypothesis = check_hypothesis(surface, problem)?;
    if !hypothesis.holds() && !opts.override_hypothesis {
        return Err(Error::HypothesisFails { lhs: hypothesis.lhs, rhs: hypothesis.rhs });
    }
    let exploratory = !hypothesis.holds();
    let vol_opts = VolumeOptions {
        enforce_balance: !exploratory,
        extended_eta: exploratory.then_some(EXPLORATORY_ETA),
        ..VolumeOptions::default()
    };
    let (eta, r) = (problem.eta, problem.r);
    let mut f_hat = problem.f.clone();
    let mut theta = opts.damping.clamp(MIN_DAMPING, 1.0);
    let mut history = Vec::new();
    let mut last_drift = f64::INFINITY;
    let mut state = None;
    let mut converged = false;
    for k in 1..=opts.max_iter {
        let vs = phi1(surface, &f_hat, eta, r, vol_opts).map_err(|e| in_iteration(k, e))?;
        let p2 = phi2(surface, &vs.solution.u, r, eta, &problem.constants).map_err(|e| in_iteration(k, e))?;
        let p3 = phi3(surface, &p2.v, &problem.f).map_err(|e| in_iteration(k, e))?;
        let drift = p3.f_hat.distance(&f_hat)?;
        history.push(IterationRecord { iteration: k, drift, damping: theta, t: vs.t(), v_sup: p2.v_sup });
        if drift <= opts.drift_tol {
            state = Some((vs, p2, f_hat.clone()));
            converged = true;
            break;
        }
        if drift > last_drift {
            theta = (0.5 * theta).max(MIN_DAMPING);
        }
        last_drift = drift;
        let next = f_hat.scale(1.0 - theta).add(&p3.f_hat.scale(theta))?;
        state = Some((vs, p2, f_hat));
        f_hat = next;
    }
    let (vs, p2, f_used) = state.ok_or_else(|| Error::Precondition("max_iter must be at least 1".into()))?;
    let u = vs.solution.u.clone();
    let t = vs.t();
    let v = p2.v.clone();
    let af = af_certificate(surface, &u, &v, t, &problem.f, eta, r, opts.residual_tol)?;
    let reweighted = v.map(|x| (2.0 * x).exp()).mul(&problem.f)?;
    let u1 = f_used.values().iter().all(|&x| x >= 0.0)
        && balance_of(surface, f_used.values())? >= balance_requirement(GaussForm::Pu21, eta, r) - ADMISSIBLE_SLACK;
    let memberships = Memberships { u1, u2: in_u2(surface, &u, eta, r, 1e-8)?, u3: p2.in_u3 };
    Ok(FixedPointCertificate {
        fixed_point_defect: f_used.distance(&reweighted)?,
        u,
        v,
        t,
        f_hat: f_used,
        f: problem.f.clone(),
        eta,
        r,
        iterations: history.len(),
        converged,
        history,
        hypothesis,
        hypothesis_overridden: exploratory,
        memberships,
        u3_radius: p2.radius,
        gauss_residual: af.gauss_residual,
        poisson_residual: af.poisson_residual,
        af_bound: af.af_bound,
        af_ok: af.af_bound <= eta,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AfReport {
    /// `sup e^{-6u} e^{2v} t f`.
    pub af_bound: f64,
    pub eta: f64,
    /// `eta - af_bound`.
    pub margin: f64,
    /// `sup |Delta u - (2 e^{2u} - 1 + e^{-4u} e^{2v} t f)|`.
    pub gauss_residual: f64,
    /// `sup |Delta v - (3/2 - 3R - 3 e^{2u})|`.
    pub poisson_residual: f64,
    pub pass: bool,
}

/// Evaluates the almost-Fuchsian bound and both curvature equations.
#[allow(clippy::too_many_arguments)]
pub fn af_certificate(
    surface: &HyperbolicSurface,
    u: &ScalarField,
    v: &ScalarField,
    t: f64,
    f: &ScalarField,
    eta: f64,
    r: f64,
    tol: f64,
) -> Result<AfReport> {
    let lu = surface.laplacian(u)?;
    let lv = surface.laplacian(v)?;
    surface.owns(f)?;
    let (mut af_bound, mut gauss_residual, mut poisson_residual) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..u.len() {
        let (ui, vi, fi) = (u.values()[i], v.values()[i], f.values()[i]);
        let coupling = (-4.0 * ui).exp() * (2.0 * vi).exp() * t * fi;
        af_bound = af_bound.max((-2.0 * ui).exp() * coupling);
        gauss_residual = gauss_residual.max((lu.values()[i] - (2.0 * (2.0 * ui).exp() - 1.0 + coupling)).abs());
        poisson_residual = poisson_residual.max((lv.values()[i] - (1.5 - 3.0 * r - 3.0 * (2.0 * ui).exp())).abs());
    }
    Ok(AfReport {
        af_bound,
        eta,
        margin: eta - af_bound,
        gauss_residual,
        poisson_residual,
        pass: af_bound <= eta && eta < 1.0 && gauss_residual <= tol && poisson_residual <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::regular_octagon_genus2;
    use std::f64::consts::LN_2;

    fn surface() -> HyperbolicSurface {
        HyperbolicSurface::uniformize(regular_octagon_genus2(6).unwrap(), 1e-10).unwrap()
    }

    fn constants(s: &HyperbolicSurface) -> GeometryConstants {
        GeometryConstants::from_values(1.0, s.spectral_gap().unwrap(), s.volume(), 0.1).unwrap()
    }

    #[test]
    fn hypothesis_limits() {
        let small_eta = check_hypothesis_values(1.0, 1.0, 1e-9, 4.0 * std::f64::consts::PI, 0.01, 1.0);
        assert!(!small_eta.exp_ok);
        let small_r = check_hypothesis_values(1.0, 1.0, 0.1, 4.0 * std::f64::consts::PI, 1e-12, 1.0);
        assert!(small_r.exp_ok);
    }

    #[test]
    fn radius_identity() {
        for (c, eta, vol) in [(1.0, 0.1, 12.0), (0.3, 0.9, 100.0)] {
            let lhs = (-4.0 * u3_radius(c, eta, vol)).exp();
            assert!((lhs - hypothesis_factor(c, eta, vol)).abs() <= 4.0 * f64::EPSILON * lhs);
        }
    }

    #[test]
    fn constant_case_one_step() {
        let s = surface();
        let (c, eta, r) = (0.02, 0.5, 0.02);
        let p = FixedPointProblem { f: s.constant(c), eta, r, a: 1.0, constants: constants(&s) };
        let cert = run_fixed_point(&s, &p, FixedPointOptions::default()).unwrap();
        assert!(cert.converged && cert.iterations <= 2);
        let u = 0.5 * (0.5 - r).ln();
        assert!(cert.u.values().iter().all(|x| (x - u).abs() <= 1e-8));
        assert!(cert.v.sup_abs() <= 1e-8);
        assert!((cert.t - 2.0 * r * (0.5 - r).powi(2) / c).abs() <= 1e-8);
        assert!((cert.af_bound - 2.0 * r / (0.5 - r)).abs() <= 1e-8);
        assert!(cert.memberships.u1 && cert.memberships.u2 && cert.memberships.u3 && cert.af_ok);
    }

    #[test]
    fn missing_hypothesis_without_override_fails() {
        let s = surface();
        let p = FixedPointProblem { f: s.constant(0.02), eta: 0.5, r: 0.12, a: 1.0, constants: constants(&s) };
        assert!(matches!(run_fixed_point(&s, &p, FixedPointOptions::default()), Err(Error::HypothesisFails { .. })));
        let opts = FixedPointOptions { override_hypothesis: true, ..Default::default() };
        let cert = run_fixed_point(&s, &p, opts).unwrap();
        assert!(cert.hypothesis_overridden);
        assert!((cert.af_bound - 0.24 / 0.38).abs() <= 1e-8 && !cert.af_ok);
    }

    #[test]
    fn degenerate_certificate() {
        let s = surface();
        let u = s.constant(-LN_2 / 2.0);
        let v = s.constant(0.0);
        let f = s.constant(0.0);
        assert!(af_certificate(&s, &u, &v, 1.0, &f, 0.5, 0.0, 1e-10).unwrap().pass);
        assert!(!af_certificate(&s, &u, &v, 1.0, &f, 0.5, 0.1, 1e-10).unwrap().pass);
    }

    #[test]
    fn phi3_identities() {
        let s = surface();
        let f = s.field_from_fn(|i| 1.0 + (i as f64).sin());
        let zero = phi3(&s, &s.constant(0.0), &f).unwrap();
        assert_eq!(zero.f_hat, f);
        let shifted = phi3(&s, &s.constant(0.3), &f).unwrap();
        assert!((shifted.balance_after - shifted.balance_before).abs() < 1e-14);
        let v = s.field_from_fn(|i| 0.2 * ((i * 7) as f64).cos());
        assert!(phi3(&s, &v, &f).unwrap().weighting_inequality);
    }
}
