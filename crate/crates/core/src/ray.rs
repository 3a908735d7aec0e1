//! The ray `t -> u_t` of solutions of `Delta u_t = 2 e^{2u_t} - 1 + e^{-4u_t} t f`,
//! its volume curve `F(t) = mean(e^{2u_t})`, and the volume-prescribed solve.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gauss::{certify, check_admissible, solve_raw, GaussForm, GaussSolution, ADMISSIBLE_SLACK, GAUSS_TOL};
use crate::sections::balance_of;
use crate::surface::{HyperbolicSurface, ScalarField};

pub const RAY_POINTS: usize = 33;
pub const CONCAVITY_TOL: f64 = 1e-8;
/// Absolute tolerance on `mean(e^{2u})` in the volume solve.
pub const VOLUME_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct RayProfile {
    pub form: GaussForm,
    pub f: ScalarField,
    pub eta: f64,
    pub t: Vec<f64>,
    pub u: Vec<ScalarField>,
    /// `F(t) = mean(e^{2 u_t})`.
    pub volume: Vec<f64>,
    pub residuals: Vec<f64>,
    pub udot: Option<Vec<ScalarField>>,
    pub uddot: Option<Vec<ScalarField>>,
}

/// Largest `t` keeping `t f` admissible (1 when `f` vanishes).
pub fn max_admissible_t(form: GaussForm, f: &ScalarField, eta: f64) -> f64 {
    let sup = f.sup();
    if sup > 0.0 {
        form.admissible_bound(eta) / sup
    } else {
        1.0
    }
}

/// `n` Chebyshev-Lobatto points on `[0, t_max]`, increasing, endpoints included.
pub fn chebyshev_grid(t_max: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let mut g: Vec<f64> = (0..n).map(|j| 0.5 * t_max * (1.0 - (PI * j as f64 / (n - 1) as f64).cos())).collect();
    g[0] = 0.0;
    g[n - 1] = t_max;
    g
}

fn mean_exp2(surface: &HyperbolicSurface, u: &[f64]) -> f64 {
    let e: Vec<f64> = u.iter().map(|v| (2.0 * v).exp()).collect();
    surface.mean_of(&e)
}

pub(crate) fn solve_ray_form(
    surface: &HyperbolicSurface,
    form: GaussForm,
    f: &ScalarField,
    eta: f64,
    t_grid: &[f64],
    tol: f64,
) -> Result<RayProfile> {
    surface.owns(f)?;
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Precondition("t grid must be nonnegative and strictly increasing".into()));
    }
    let t_max = max_admissible_t(form, f, eta);
    let mut prev: Option<Vec<f64>> = None;
    let mut out = RayProfile {
        form,
        f: f.clone(),
        eta,
        t: t_grid.to_vec(),
        u: vec![],
        volume: vec![],
        residuals: vec![],
        udot: None,
        uddot: None,
    };
    for &t in t_grid {
        let g: Vec<f64> = f.values().iter().map(|v| t * v).collect();
        check_admissible(form, &g, eta).map_err(|e| {
            Error::Inadmissible(format!("{e}; maximal admissible t is {t_max:e}"))
        })?;
        let (u, iters, method) = solve_raw(surface, form, &g, eta, prev.as_deref(), tol)?;
        let sol = certify(surface, form, u, f, t, eta, iters, method)?;
        out.volume.push(mean_exp2(surface, sol.u.values()));
        out.residuals.push(sol.residual_sup);
        prev = Some(sol.u.values().to_vec());
        out.u.push(sol.u);
    }
    Ok(out)
}

/// Solves along `t_grid`, or 33 Chebyshev points on the admissible interval.
pub fn solve_ray(
    surface: &HyperbolicSurface,
    f: &ScalarField,
    eta: f64,
    t_grid: Option<&[f64]>,
    tol: f64,
) -> Result<RayProfile> {
    let default;
    let grid = match t_grid {
        Some(g) => g,
        None => {
            default = chebyshev_grid(max_admissible_t(GaussForm::Pu21, f, eta), RAY_POINTS);
            &default
        }
    };
    solve_ray_form(surface, GaussForm::Pu21, f, eta, grid, tol)
}

/// First and second `t`-derivatives of `u_t` from the linearized equations
/// `Delta udot = c udot + e^{-4u} f` and
/// `Delta uddot = c uddot + (8 e^{2u} + 16 e^{-4u} t f) udot^2 - 8 e^{-4u} f udot`,
/// with `c = 4 e^{2u} - 4 e^{-4u} t f` (complex hyperbolic form).
pub fn ray_derivatives(surface: &HyperbolicSurface, profile: &mut RayProfile) -> Result<()> {
    if profile.form != GaussForm::Pu21 {
        return Err(Error::Precondition("ray derivatives are implemented for the complex hyperbolic form".into()));
    }
    let f = profile.f.values();
    let mass = surface.mass();
    let n = surface.n_vertices();
    let mut udots = Vec::with_capacity(profile.t.len());
    let mut uddots = Vec::with_capacity(profile.t.len());
    for (k, &t) in profile.t.iter().enumerate() {
        let u = profile.u[k].values();
        let em4: Vec<f64> = u.iter().map(|v| (-4.0 * v).exp()).collect();
        let e2: Vec<f64> = u.iter().map(|v| (2.0 * v).exp()).collect();
        let c: Vec<f64> = (0..n).map(|i| 4.0 * e2[i] - 4.0 * em4[i] * t * f[i]).collect();
        if let Some(i) = (0..n).find(|&i| !(c[i] > 0.0)) {
            return Err(Error::Precondition(format!(
                "linearized coefficient {:e} <= 0 at vertex {i}, t = {t}: the almost-Fuchsian bound is broken",
                c[i]
            )));
        }
        let b1: Vec<f64> = (0..n).map(|i| -mass[i] * em4[i] * f[i]).collect();
        let ud = surface.solve_shifted(&c, &b1, None)?;
        let b2: Vec<f64> = (0..n)
            .map(|i| {
                let src = (8.0 * e2[i] + 16.0 * em4[i] * t * f[i]) * ud[i] * ud[i] - 8.0 * em4[i] * f[i] * ud[i];
                -mass[i] * src
            })
            .collect();
        let udd = surface.solve_shifted(&c, &b2, None)?;
        udots.push(surface.field(ud)?);
        uddots.push(surface.field(udd)?);
    }
    profile.udot = Some(udots);
    profile.uddot = Some(uddots);
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct RayChecks {
    pub f0_error: f64,
    pub nonincreasing: bool,
    /// Largest weighted second difference of `F` on the grid (concave when <= 0).
    pub max_second_difference: f64,
    pub concave: bool,
    pub max_udot: f64,
    pub max_uddot: f64,
    /// `max (uddot + 2 udot^2)`.
    pub max_combination: f64,
    pub max_residual: f64,
}

/// Weighted second differences `[h_- F_+ - (h_- + h_+) F + h_+ F_-] / ((h_- + h_+) / 2)`.
pub fn second_differences(t: &[f64], v: &[f64]) -> Vec<f64> {
    (1..t.len().saturating_sub(1))
        .map(|j| {
            let (hm, hp) = (t[j] - t[j - 1], t[j + 1] - t[j]);
            (hm * v[j + 1] - (hm + hp) * v[j] + hp * v[j - 1]) / (0.5 * (hm + hp))
        })
        .collect()
}

pub fn check_ray(profile: &RayProfile) -> RayChecks {
    let base = match profile.form {
        GaussForm::Pu21 => 0.5,
        GaussForm::H4 => 1.0,
    };
    let sd = second_differences(&profile.t, &profile.volume);
    let max_sd = sd.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let fold_max = |fields: &Option<Vec<ScalarField>>| {
        fields.as_ref().map_or(f64::NAN, |v| v.iter().map(ScalarField::sup).fold(f64::NEG_INFINITY, f64::max))
    };
    let max_combination = match (&profile.udot, &profile.uddot) {
        (Some(a), Some(b)) => a
            .iter()
            .zip(b)
            .flat_map(|(x, y)| x.values().iter().zip(y.values()).map(|(p, q)| q + 2.0 * p * p))
            .fold(f64::NEG_INFINITY, f64::max),
        _ => f64::NAN,
    };
    RayChecks {
        f0_error: profile.volume.first().map_or(f64::NAN, |v| (v - base).abs()),
        nonincreasing: profile.volume.windows(2).all(|w| w[1] <= w[0] + CONCAVITY_TOL * base),
        max_second_difference: max_sd,
        concave: sd.iter().all(|&d| d <= CONCAVITY_TOL * base),
        max_udot: fold_max(&profile.udot),
        max_uddot: fold_max(&profile.uddot),
        max_combination,
        max_residual: profile.residuals.iter().copied().fold(0.0, f64::max),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeReport {
    /// `max_t [F(t) - (1/2 - 2 t mean(f))]`; the inequality holds when <= tol.
    pub max_excess: f64,
    pub holds: bool,
    pub mean_f: f64,
    /// `mean(udot_0)`, equal to `F'(0)`.
    pub slope_from_derivative: f64,
    /// Second-order one-sided difference of `F` at 0 (needs two grid points after 0).
    pub slope_from_differences: f64,
    /// `F'(0) = -2 mean(f)` relative error of the finite-difference slope.
    pub slope_relative_error: f64,
}

pub fn check_slope_inequality(surface: &HyperbolicSurface, profile: &RayProfile) -> Result<SlopeReport> {
    let mean_f = surface.mean(&profile.f)?;
    let max_excess = profile
        .t
        .iter()
        .zip(&profile.volume)
        .map(|(t, v)| v - (0.5 - 2.0 * t * mean_f))
        .fold(f64::NEG_INFINITY, f64::max);
    let slope_from_derivative = profile.udot.as_ref().map_or(f64::NAN, |d| surface.mean_of(d[0].values()));
    let slope_from_differences = if profile.t.len() >= 3 {
        // three-point formula on a possibly nonuniform grid
        let (t0, t1, t2) = (profile.t[0], profile.t[1], profile.t[2]);
        let (f0, f1, f2) = (profile.volume[0], profile.volume[1], profile.volume[2]);
        let (h1, h2) = (t1 - t0, t2 - t0);
        (f1 - f0) * h2 / (h1 * (h2 - h1)) - (f2 - f0) * h1 / (h2 * (h2 - h1))
    } else {
        f64::NAN
    };
    let exact = -2.0 * mean_f;
    let slope_relative_error = if exact != 0.0 {
        ((slope_from_differences - exact) / exact).abs()
    } else {
        slope_from_differences.abs()
    };
    Ok(SlopeReport {
        max_excess,
        holds: max_excess <= CONCAVITY_TOL,
        mean_f,
        slope_from_derivative,
        slope_from_differences,
        slope_relative_error,
    })
}

#[derive(Debug, Clone)]
pub struct VolumeSolve {
    pub solution: GaussSolution,
    pub target_r: f64,
    /// `mean(e^{2u})`.
    pub achieved: f64,
    pub target: f64,
    pub balance: f64,
    pub balance_required: f64,
    pub t_max: f64,
    pub evaluations: usize,
}

impl VolumeSolve {
    pub fn t(&self) -> f64 {
        self.solution.t
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VolumeOptions {
    pub tol: f64,
    pub gauss_tol: f64,
    /// Refuse when the balance hypothesis fails (off for exploratory runs).
    pub enforce_balance: bool,
    /// Exploratory runs only: when the target is not reached on the admissible
    /// interval for `eta`, retry with this larger bracket parameter.
    pub extended_eta: Option<f64>,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        VolumeOptions { tol: VOLUME_TOL, gauss_tol: GAUSS_TOL, enforce_balance: true, extended_eta: None }
    }
}

/// Balance needed for the volume target to be reachable on the admissible interval.
pub fn balance_requirement(form: GaussForm, eta: f64, r: f64) -> f64 {
    match form {
        GaussForm::Pu21 => (2.0 + eta).powi(3) * r / (2.0 * eta),
        GaussForm::H4 => (8.0 + eta).powi(3) * r / (16.0 * eta),
    }
}

fn volume_base(form: GaussForm) -> f64 {
    match form {
        GaussForm::Pu21 => 0.5,
        GaussForm::H4 => 1.0,
    }
}

pub(crate) fn solve_with_volume(
    surface: &HyperbolicSurface,
    form: GaussForm,
    f: &ScalarField,
    eta: f64,
    r: f64,
    opts: VolumeOptions,
) -> Result<VolumeSolve> {
    surface.owns(f)?;
    let base = volume_base(form);
    if !(r > 0.0 && r < base) {
        return Err(Error::Precondition(format!("R = {r} outside (0, {base})")));
    }
    let balance = balance_of(surface, f.values())?;
    let balance_required = balance_requirement(form, eta, r);
    if opts.enforce_balance && balance < balance_required - ADMISSIBLE_SLACK {
        return Err(Error::BalanceHypothesis { required: balance_required, actual: balance });
    }
    match bisect_volume(surface, form, f, eta, base - r, opts) {
        Err(Error::NotBracketed { .. }) if opts.extended_eta.is_some_and(|e| e > eta) => {
            bisect_volume(surface, form, f, opts.extended_eta.unwrap_or(eta), base - r, opts)
        }
        other => other,
    }
    .map(|(solution, achieved, t_max, evaluations)| VolumeSolve {
        solution,
        target_r: r,
        achieved,
        target: base - r,
        balance,
        balance_required,
        t_max,
        evaluations,
    })
}

fn bisect_volume(
    surface: &HyperbolicSurface,
    form: GaussForm,
    f: &ScalarField,
    eta: f64,
    target: f64,
    opts: VolumeOptions,
) -> Result<(GaussSolution, f64, f64, usize)> {
    let base = volume_base(form);
    let t_max = max_admissible_t(form, f, eta);
    let mut evaluations = 0;
    let mut eval = |t: f64, warm: Option<&[f64]>| -> Result<(Vec<f64>, f64, usize, crate::gauss::GaussMethod)> {
        evaluations += 1;
        let g: Vec<f64> = f.values().iter().map(|v| t * v).collect();
        let (u, it, m) = solve_raw(surface, form, &g, eta, warm, opts.gauss_tol)?;
        let vol = mean_exp2(surface, &u);
        Ok((u, vol, it, m))
    };
    let (u_hi, f_hi, it_hi, m_hi) = eval(t_max, None)?;
    if f_hi > target + opts.tol {
        return Err(Error::NotBracketed { target, lo: f_hi, hi: base });
    }
    // Illinois regula falsi on G(t) = F(t) - target with G(0) > 0 >= G(t_max).
    let (mut a, mut ga) = (0.0, base - target);
    let (mut b, mut gb) = (t_max, f_hi - target);
    let mut best = (t_max, u_hi, f_hi, it_hi, m_hi);
    let mut side = 0i32;
    for _ in 0..200 {
        if (best.2 - target).abs() <= 1e-3 * opts.tol || (b - a) <= 1e-15 * t_max {
            break;
        }
        let mut t = b - gb * (b - a) / (gb - ga);
        if !(t > a && t < b) {
            t = 0.5 * (a + b);
        }
        let (u, vol, it, m) = eval(t, Some(&best.1))?;
        let g = vol - target;
        if g > 0.0 {
            a = t;
            ga = g;
            if side == 1 {
                gb *= 0.5;
            }
            side = 1;
        } else {
            b = t;
            gb = g;
            if side == -1 {
                ga *= 0.5;
            }
            side = -1;
        }
        best = (t, u, vol, it, m);
    }
    let (t, u, achieved, it, m) = best;
    if (achieved - target).abs() > opts.tol {
        return Err(Error::NotConverged { what: "volume bisection", iterations: evaluations, residual: achieved - target });
    }
    let solution = certify(surface, form, u, f, t, eta, it, m)?;
    Ok((solution, achieved, t_max, evaluations))
}

/// Finds `(u, t)` with `mean(e^{2u}) = 1/2 - R` and `sup e^{-6u} t f <= eta`.
pub fn solve_gauss_with_volume(
    surface: &HyperbolicSurface,
    f: &ScalarField,
    eta: f64,
    r: f64,
    opts: VolumeOptions,
) -> Result<VolumeSolve> {
    solve_with_volume(surface, GaussForm::Pu21, f, eta, r, opts)
}

/// Closed form for constant data `c`: `u = ln(1/2 - R) / 2`, `t c = 2 R (1/2 - R)^2`.
pub fn constant_volume_pair(r: f64, c: f64) -> (f64, f64) {
    (0.5 * (0.5 - r).ln(), 2.0 * r * (0.5 - r).powi(2) / c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::constant_solution;
    use crate::mesh::regular_octagon_genus2;

    fn surface() -> HyperbolicSurface {
        HyperbolicSurface::uniformize(regular_octagon_genus2(6).unwrap(), 1e-10).unwrap()
    }

    fn bump(s: &HyperbolicSurface, eta: f64) -> ScalarField {
        let bound = GaussForm::Pu21.admissible_bound(eta);
        let pos = s.mesh().positions().unwrap().to_vec();
        s.field_from_fn(|i| bound * (0.3 + 0.7 * (-4.0 * (pos[i][0] - 0.2).powi(2) - 4.0 * pos[i][1].powi(2)).exp()))
    }

    #[test]
    fn chebyshev_grid_shape() {
        let g = chebyshev_grid(2.0, 33);
        assert_eq!(g.len(), 33);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[32], 2.0);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(g[1] - g[0] < g[17] - g[16]);
    }

    #[test]
    fn zero_data_ray_is_flat() {
        let s = surface();
        let mut p = solve_ray(&s, &s.constant(0.0), 0.5, None, GAUSS_TOL).unwrap();
        ray_derivatives(&s, &mut p).unwrap();
        assert!(p.volume.iter().all(|v| (v - 0.5).abs() < 1e-14));
        assert!(p.udot.as_ref().unwrap().iter().all(|d| d.sup_abs() == 0.0));
        let slope = check_slope_inequality(&s, &p).unwrap();
        assert!(slope.holds);
    }

    #[test]
    fn constant_ray_matches_scalar_curve() {
        let s = surface();
        let eta = 0.5;
        let c = 0.9 * GaussForm::Pu21.admissible_bound(eta);
        let p = solve_ray(&s, &s.constant(c), eta, None, GAUSS_TOL).unwrap();
        for (t, v) in p.t.iter().zip(&p.volume) {
            let u = constant_solution(GaussForm::Pu21, t * c, eta).unwrap();
            assert!((v - (2.0 * u).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn bump_ray_structure() {
        let s = surface();
        let eta = 0.5;
        let f = bump(&s, eta);
        let mut p = solve_ray(&s, &f, eta, None, GAUSS_TOL).unwrap();
        ray_derivatives(&s, &mut p).unwrap();
        let c = check_ray(&p);
        assert!(c.f0_error < 1e-14 && c.nonincreasing && c.concave, "{c:?}");
        assert!(c.max_udot <= 0.0 && c.max_uddot <= 1e-12 && c.max_combination <= 1e-8, "{c:?}");
        let slope = check_slope_inequality(&s, &p).unwrap();
        assert!(slope.holds, "{slope:?}");
        assert!((slope.slope_from_derivative + 2.0 * slope.mean_f).abs() < 1e-9 * slope.mean_f);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let s = surface();
        let eta = 0.5;
        let f = bump(&s, eta);
        let t0 = 0.5;
        let h = 1e-3;
        let mut p = solve_ray(&s, &f, eta, Some(&[t0 - h, t0, t0 + h]), 1e-12).unwrap();
        ray_derivatives(&s, &mut p).unwrap();
        let fd = p.u[2].sub(&p.u[0]).unwrap().scale(0.5 / h);
        let ud = &p.udot.as_ref().unwrap()[1];
        assert!(fd.distance(ud).unwrap() <= 1e-4 * ud.sup_abs());
    }

    #[test]
    fn constant_volume_solve() {
        let s = surface();
        let eta = 0.5;
        let c = 0.01;
        let r = 0.05;
        let vs = solve_gauss_with_volume(&s, &s.constant(c), eta, r, VolumeOptions::default()).unwrap();
        let (u, t) = constant_volume_pair(r, c);
        assert!((vs.t() - t).abs() <= 1e-8 * t.max(1.0), "{} vs {t}", vs.t());
        assert!(vs.solution.u.values().iter().all(|v| (v - u).abs() <= 1e-8));
        assert!(vs.solution.coupling_sup <= eta);
    }

    #[test]
    fn balance_failure_is_reported() {
        let s = surface();
        let mut vals = vec![1e-4; s.n_vertices()];
        vals[0] = 1.0;
        let err = solve_gauss_with_volume(&s, &s.field(vals).unwrap(), 0.5, 0.1, VolumeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::BalanceHypothesis { .. }));
    }
}
