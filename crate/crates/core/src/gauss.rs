//! The semilinear Gauss equation `Delta u = a e^{2u} - 1 + e^{-4u} g` with `g = t f`.
//!
//! `a = 2` is the complex hyperbolic form, `a = 1` the H4 form. Solutions are
//! bracketed between the constant sub- and supersolutions of the form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::surface::{HyperbolicSurface, ScalarField};

pub const GAUSS_TOL: f64 = 1e-10;
pub const GAUSS_MAX_ITER: usize = 100;
/// Slack on pointwise admissibility and bracket checks.
pub const ADMISSIBLE_SLACK: f64 = 1e-12;
/// Shift of the monotone fallback; dominates the linearization coefficient.
pub const MONOTONE_SHIFT: f64 = 4.0 * (1.0 + 1e-2);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussForm {
    /// `Delta u = 2 e^{2u} - 1 + e^{-4u} g`
    Pu21,
    /// `Delta u = e^{2u} - 1 + e^{-4u} g`
    H4,
}

impl GaussForm {
    pub fn exp_coefficient(self) -> f64 {
        match self {
            GaussForm::Pu21 => 2.0,
            GaussForm::H4 => 1.0,
        }
    }

    /// Upper limit (exclusive) on `eta`.
    pub fn eta_limit(self) -> f64 {
        match self {
            GaussForm::Pu21 => 1.0,
            GaussForm::H4 => 0.5,
        }
    }

    /// `(subsolution, supersolution)` constants.
    pub fn bracket(self, eta: f64) -> (f64, f64) {
        match self {
            GaussForm::Pu21 => (-(2.0 + eta).ln() / 2.0, -(2.0f64).ln() / 2.0),
            GaussForm::H4 => ((4.0 / (4.0 + eta)).ln() / 2.0, 0.0),
        }
    }

    /// Largest admissible pointwise value of `g`; the subsolution is exact there.
    pub fn admissible_bound(self, eta: f64) -> f64 {
        match self {
            GaussForm::Pu21 => eta / (2.0 + eta).powi(3),
            GaussForm::H4 => 16.0 * eta / (4.0 + eta).powi(3),
        }
    }

    /// Bound on `sup |Delta u|` implied by the bracket.
    pub fn laplacian_bound(self, eta: f64) -> f64 {
        match self {
            GaussForm::Pu21 => eta / (2.0 + eta),
            GaussForm::H4 => eta / (4.0 + eta),
        }
    }

    pub fn rhs(self, u: f64, g: f64) -> f64 {
        self.exp_coefficient() * (2.0 * u).exp() - 1.0 + (-4.0 * u).exp() * g
    }

    fn rhs_derivative(self, u: f64, g: f64) -> f64 {
        2.0 * self.exp_coefficient() * (2.0 * u).exp() - 4.0 * (-4.0 * u).exp() * g
    }

    fn check_eta(self, eta: f64) -> Result<()> {
        if !(eta > 0.0 && eta < self.eta_limit()) {
            return Err(Error::Inadmissible(format!("eta = {eta} outside (0, {})", self.eta_limit())));
        }
        Ok(())
    }
}

/// Constant solution for constant data `c`: root of `a x^3 - x^2 + c = 0`, `x = e^{2u}`,
/// inside the bracket.
pub fn constant_solution(form: GaussForm, c: f64, eta: f64) -> Result<f64> {
    form.check_eta(eta)?;
    let bound = form.admissible_bound(eta);
    if !(c >= -ADMISSIBLE_SLACK && c <= bound + ADMISSIBLE_SLACK) {
        return Err(Error::Inadmissible(format!("constant data {c} outside [0, {bound}]")));
    }
    let (lo, hi) = form.bracket(eta);
    let a = form.exp_coefficient();
    let p = |x: f64| a * x * x * x - x * x + c;
    let (mut xl, mut xh) = ((2.0 * lo).exp(), (2.0 * hi).exp());
    if p(xl) >= 0.0 {
        return Ok(lo);
    }
    if p(xh) <= 0.0 {
        return Ok(hi);
    }
    for _ in 0..200 {
        let mid = 0.5 * (xl + xh);
        if mid <= xl || mid >= xh {
            break;
        }
        if p(mid) < 0.0 {
            xl = mid;
        } else {
            xh = mid;
        }
    }
    Ok(0.5 * (0.5 * (xl + xh)).ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussMethod {
    Newton,
    Monotone,
}

#[derive(Debug, Clone)]
pub struct GaussSolution {
    pub form: GaussForm,
    pub u: ScalarField,
    pub f: ScalarField,
    pub t: f64,
    pub eta: f64,
    pub residual_sup: f64,
    pub bracket_ok: bool,
    pub laplacian_sup: f64,
    pub laplacian_bound_ok: bool,
    /// `sup e^{-6u} t f`.
    pub coupling_sup: f64,
    pub iterations: usize,
    pub method: GaussMethod,
}

/// Checks `0 <= g <= bound` pointwise and reports the worst vertex.
pub(crate) fn check_admissible(form: GaussForm, g: &[f64], eta: f64) -> Result<()> {
    let bound = form.admissible_bound(eta);
    let mut worst: Option<(usize, f64)> = None;
    for (i, &v) in g.iter().enumerate() {
        let excess = if v < 0.0 { -v } else { v - bound };
        if excess > ADMISSIBLE_SLACK && worst.map_or(true, |(_, e)| excess > e) {
            worst = Some((i, excess));
        }
    }
    match worst {
        None => Ok(()),
        Some((i, _)) => Err(Error::Inadmissible(format!(
            "data value {:e} at vertex {i} outside [0, {bound:e}] for eta = {eta}",
            g[i]
        ))),
    }
}

fn residual_vec(surface: &HyperbolicSurface, form: GaussForm, u: &[f64], g: &[f64]) -> Vec<f64> {
    let su = surface.stiffness().mul(u);
    let mass = surface.mass();
    (0..u.len()).map(|i| su[i] + mass[i] * form.rhs(u[i], g[i])).collect()
}

fn sup_scaled(r: &[f64], mass: &[f64]) -> f64 {
    r.iter().zip(mass).fold(0.0, |m, (a, b)| m.max((a / b).abs()))
}

fn l2_scaled(r: &[f64], mass: &[f64]) -> f64 {
    r.iter().zip(mass).map(|(a, b)| a * a / b).sum::<f64>().sqrt()
}

/// Raw solve on vertex arrays: returns `(u, iterations, method)`.
pub(crate) fn solve_raw(
    surface: &HyperbolicSurface,
    form: GaussForm,
    g: &[f64],
    eta: f64,
    u0: Option<&[f64]>,
    tol: f64,
) -> Result<(Vec<f64>, usize, GaussMethod)> {
    let (lo, hi) = form.bracket(eta);
    let mass = surface.mass();
    let n = surface.n_vertices();
    let clamp = |v: f64| v.clamp(lo, hi);
    let mut u: Vec<f64> = match u0 {
        Some(w) => w.iter().map(|&v| clamp(v)).collect(),
        None => vec![hi; n],
    };
    let mut r = residual_vec(surface, form, &u, g);
    let mut res = sup_scaled(&r, mass);
    let mut it = 0;
    while res > tol && it < GAUSS_MAX_ITER {
        it += 1;
        let coeff: Vec<f64> = u.iter().zip(g).map(|(&ui, &gi)| form.rhs_derivative(ui, gi)).collect();
        let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = match surface.solve_shifted(&coeff, &neg_r, None) {
            Ok(s) => s,
            Err(_) => break,
        };
        let merit0 = l2_scaled(&r, mass);
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| clamp(a + s * d)).collect();
            let rt = residual_vec(surface, form, &trial, g);
            let merit = l2_scaled(&rt, mass);
            if merit < (1.0 - 1e-4 * s) * merit0 || sup_scaled(&rt, mass) <= tol {
                u = trial;
                r = rt;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        res = sup_scaled(&r, mass);
        if !accepted {
            break;
        }
    }
    if res <= tol {
        return Ok((u, it, GaussMethod::Newton));
    }
    // Monotone iteration from the supersolution: (S + lambda M) u' = M (lambda u - R(u)).
    let mut u: Vec<f64> = vec![hi; n];
    let coeff = vec![MONOTONE_SHIFT; n];
    let mut res = f64::INFINITY;
    for k in 1..=GAUSS_MAX_ITER * 50 {
        let b: Vec<f64> = (0..n).map(|i| mass[i] * (MONOTONE_SHIFT * u[i] - form.rhs(u[i], g[i]))).collect();
        u = surface.solve_shifted(&coeff, &b, Some(&u))?;
        let r = residual_vec(surface, form, &u, g);
        res = sup_scaled(&r, mass);
        if res <= tol {
            return Ok((u, it + k, GaussMethod::Monotone));
        }
    }
    Err(Error::NotConverged { what: "Gauss equation", iterations: it + GAUSS_MAX_ITER * 50, residual: res })
}

/// Re-evaluates residual, bracket and derived bounds through the public Laplacian.
pub(crate) fn certify(
    surface: &HyperbolicSurface,
    form: GaussForm,
    u: Vec<f64>,
    f: &ScalarField,
    t: f64,
    eta: f64,
    iterations: usize,
    method: GaussMethod,
) -> Result<GaussSolution> {
    let u = surface.field(u)?;
    let lap = surface.laplacian(&u)?;
    let (lo, hi) = form.bracket(eta);
    let mut residual_sup = 0.0f64;
    let mut coupling_sup = 0.0f64;
    for i in 0..u.len() {
        let (ui, gi) = (u.values()[i], t * f.values()[i]);
        residual_sup = residual_sup.max((lap.values()[i] - form.rhs(ui, gi)).abs());
        coupling_sup = coupling_sup.max((-6.0 * ui).exp() * gi);
    }
    let bracket_ok = u.values().iter().all(|&v| v >= lo - ADMISSIBLE_SLACK && v <= hi + ADMISSIBLE_SLACK);
    let laplacian_sup = lap.sup_abs();
    Ok(GaussSolution {
        form,
        laplacian_bound_ok: laplacian_sup <= form.laplacian_bound(eta) + residual_sup + ADMISSIBLE_SLACK,
        u,
        f: f.clone(),
        t,
        eta,
        residual_sup,
        bracket_ok,
        laplacian_sup,
        coupling_sup,
        iterations,
        method,
    })
}

/// Solves `Delta u = a e^{2u} - 1 + e^{-4u} t f` for admissible `t f`.
pub fn solve_gauss_form(
    surface: &HyperbolicSurface,
    form: GaussForm,
    f: &ScalarField,
    t: f64,
    eta: f64,
    tol: f64,
) -> Result<GaussSolution> {
    surface.owns(f)?;
    form.check_eta(eta)?;
    let g: Vec<f64> = f.values().iter().map(|v| t * v).collect();
    check_admissible(form, &g, eta)?;
    let (u, iters, method) = solve_raw(surface, form, &g, eta, None, tol)?;
    certify(surface, form, u, f, t, eta, iters, method)
}

/// `Delta u = 2 e^{2u} - 1 + e^{-4u} f` with `0 <= f <= eta / (2 + eta)^3`.
pub fn solve_gauss(surface: &HyperbolicSurface, f: &ScalarField, eta: f64, tol: f64) -> Result<GaussSolution> {
    solve_gauss_form(surface, GaussForm::Pu21, f, 1.0, eta, tol)
}

#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    pub eps: f64,
    pub differences: Vec<f64>,
    pub max_difference: f64,
    /// `max_difference / eps`.
    pub ratio: f64,
}

/// Solves for `f + df` over random perturbations `|df| <= eps` and reports
/// `sup |u(f + df) - u(f)|`. Draws are reproducible from `seed`.
pub fn gauss_stability_probe(
    surface: &HyperbolicSurface,
    f: &ScalarField,
    eta: f64,
    eps: f64,
    draws: usize,
    seed: u64,
) -> Result<StabilityReport> {
    let base = solve_gauss(surface, f, eta, GAUSS_TOL)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut differences = Vec::with_capacity(draws);
    for _ in 0..draws {
        let dir: Vec<f64> = (0..surface.n_vertices()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let perturbed = surface.field(f.values().iter().zip(&dir).map(|(a, d)| a + eps * d).collect())?;
        let sol = solve_gauss(surface, &perturbed, eta, GAUSS_TOL)?;
        differences.push(sol.u.distance(&base.u)?);
    }
    let max_difference = differences.iter().copied().fold(0.0, f64::max);
    Ok(StabilityReport { eps, max_difference, ratio: if eps > 0.0 { max_difference / eps } else { 0.0 }, differences })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::regular_octagon_genus2;
    use std::f64::consts::LN_2;

    fn surface() -> HyperbolicSurface {
        HyperbolicSurface::uniformize(regular_octagon_genus2(6).unwrap(), 1e-10).unwrap()
    }

    #[test]
    fn zero_data_gives_supersolution() {
        let s = surface();
        let sol = solve_gauss(&s, &s.constant(0.0), 0.5, GAUSS_TOL).unwrap();
        assert!(sol.u.values().iter().all(|&v| (v + LN_2 / 2.0).abs() <= 1e-12));
        assert!(sol.bracket_ok && sol.laplacian_bound_ok);
    }

    #[test]
    fn boundary_data_gives_subsolution() {
        let s = surface();
        let eta = 0.5;
        let c = eta / (2.0f64 + eta).powi(3);
        let sol = solve_gauss(&s, &s.constant(c), eta, GAUSS_TOL).unwrap();
        let lo = -(2.0 + eta).ln() / 2.0;
        assert!(sol.u.values().iter().all(|&v| (v - lo).abs() <= 1e-9));
    }

    #[test]
    fn constant_roots_satisfy_cubic() {
        for form in [GaussForm::Pu21, GaussForm::H4] {
            let eta = 0.3;
            for k in 0..=10 {
                let c = form.admissible_bound(eta) * k as f64 / 10.0;
                let u = constant_solution(form, c, eta).unwrap();
                assert!(form.rhs(u, c).abs() < 1e-13, "{form:?} c={c}");
                let (lo, hi) = form.bracket(eta);
                assert!(u >= lo - 1e-15 && u <= hi + 1e-15);
            }
        }
    }

    #[test]
    fn inadmissible_data_reports_vertex() {
        let s = surface();
        let mut vals = vec![0.0; s.n_vertices()];
        vals[7] = 1.0;
        let err = solve_gauss(&s, &s.field(vals).unwrap(), 0.5, GAUSS_TOL).unwrap_err();
        assert!(err.to_string().contains("vertex 7"), "{err}");
        let err = solve_gauss(&s, &s.constant(-1e-6), 0.5, GAUSS_TOL).unwrap_err();
        assert!(matches!(err, Error::Inadmissible(_)));
        assert!(solve_gauss(&s, &s.constant(0.0), 1.0, GAUSS_TOL).is_err());
    }

    #[test]
    fn comparison_principle() {
        let s = surface();
        let eta = 0.5;
        let bound = eta / (2.0f64 + eta).powi(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f: Vec<f64> = (0..s.n_vertices()).map(|_| rng.gen_range(0.0..0.5) * bound).collect();
        let g: Vec<f64> = f.iter().map(|v| v + rng.gen_range(0.0..0.5) * bound).collect();
        let uf = solve_gauss(&s, &s.field(f).unwrap(), eta, GAUSS_TOL).unwrap();
        let ug = solve_gauss(&s, &s.field(g).unwrap(), eta, GAUSS_TOL).unwrap();
        assert!(uf.u.values().iter().zip(ug.u.values()).all(|(a, b)| a >= &(b - 1e-12)));
    }

    #[test]
    fn integral_identity() {
        let s = surface();
        let eta = 0.5;
        let bound = eta / (2.0f64 + eta).powi(3);
        let f = s.field_from_fn(|i| bound * (0.5 + 0.5 * ((i as f64) * 0.37).sin()));
        let sol = solve_gauss(&s, &f, eta, GAUSS_TOL).unwrap();
        let rhs = s.field_from_fn(|i| GaussForm::Pu21.rhs(sol.u.values()[i], f.values()[i]));
        assert!(s.mean(&rhs).unwrap().abs() <= 1e-10);
    }

    #[test]
    fn zero_perturbation_is_zero_difference() {
        let s = surface();
        let f = s.constant(0.01);
        let rep = gauss_stability_probe(&s, &f, 0.5, 0.0, 2, 1).unwrap();
        assert_eq!(rep.max_difference, 0.0);
    }
}
