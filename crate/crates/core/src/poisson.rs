//! Zero-mean Poisson solves `Delta v = rhs` and the norm chain bounding `|v|_inf`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::GeometryConstants;
use crate::surface::{HyperbolicSurface, ScalarField};

pub const POISSON_TOL: f64 = 1e-10;
/// Allowed `|mean(rhs)| / L2(rhs)` before the solvability condition is declared violated.
pub const MEAN_TOL: f64 = 1e-10;
pub const CHAIN_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, Copy)]
pub struct PoissonOptions {
    pub tol: f64,
    /// Subtract the mean of `rhs` instead of rejecting it.
    pub project_mean: bool,
}

impl Default for PoissonOptions {
    fn default() -> Self {
        PoissonOptions { tol: POISSON_TOL, project_mean: false }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PoissonNorms {
    pub v_sup: f64,
    pub v_l2: f64,
    pub grad_l2: f64,
    pub rhs_l2: f64,
    pub laplacian_l2: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundReport {
    pub poisson_constant: f64,
    /// `C(delta, Lambda) L2(rhs)`.
    pub bound: f64,
    pub v_sup: f64,
    pub holds: bool,
}

#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub v: ScalarField,
    pub rhs: ScalarField,
    pub mean_removed: f64,
    pub residual_sup: f64,
    pub norms: PoissonNorms,
    pub bound_report: Option<BoundReport>,
}

/// Solves `Delta v = rhs` for the unique `v` of zero mean.
pub fn solve_poisson_zero_mean(
    surface: &HyperbolicSurface,
    rhs: &ScalarField,
    opts: PoissonOptions,
    constants: Option<&GeometryConstants>,
) -> Result<PoissonSolution> {
    surface.owns(rhs)?;
    let mean = surface.mean(rhs)?;
    let l2 = surface.l2(rhs)?;
    let rhs = if mean.abs() > MEAN_TOL * l2.max(f64::MIN_POSITIVE) {
        if !opts.project_mean {
            return Err(Error::SolvabilityViolated { mean, allowed: MEAN_TOL * l2 });
        }
        rhs.map(|x| x - mean)
    } else {
        rhs.clone()
    };
    let mass = surface.mass();
    let b: Vec<f64> = rhs.values().iter().zip(mass).map(|(r, m)| -r * m).collect();
    let mut v = surface.solve_stiffness_zero_mean(&b)?;
    surface.project_zero_mean(&mut v);
    let v = surface.field(v)?;
    let lap = surface.laplacian(&v)?;
    let residual_sup = lap.distance(&rhs)?;
    if residual_sup > opts.tol * (1.0 + rhs.sup_abs()) {
        return Err(Error::NotConverged { what: "Poisson solve", iterations: 0, residual: residual_sup });
    }
    let norms = PoissonNorms {
        v_sup: v.sup_abs(),
        v_l2: surface.l2(&v)?,
        grad_l2: surface.dirichlet(&v)?.max(0.0).sqrt(),
        rhs_l2: surface.l2(&rhs)?,
        laplacian_l2: surface.l2(&lap)?,
    };
    let bound_report = constants.map(|c| {
        let bound = c.poisson_constant * norms.rhs_l2;
        BoundReport { poisson_constant: c.poisson_constant, bound, v_sup: norms.v_sup, holds: norms.v_sup <= bound }
    });
    Ok(PoissonSolution { v, rhs, mean_removed: if opts.project_mean { mean } else { 0.0 }, residual_sup, norms, bound_report })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChainLink {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs` (0 when both vanish).
    pub ratio: f64,
    pub holds: bool,
}

impl ChainLink {
    fn new(lhs: f64, rhs: f64) -> Self {
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        ChainLink { lhs, rhs, ratio, holds: lhs <= rhs * (1.0 + CHAIN_SLACK) + f64::MIN_POSITIVE }
    }
}

/// The three links of the sup-norm estimate, evaluated on a solution.
///
/// `gradient` and `w22` use the factors `Lambda^-2` and `sqrt(1 + 2 Lambda^-2 + Lambda^-3)`
/// as displayed with the estimate. From `|grad v|^2 = -<v, Delta v> <= |v| |rhs|` one only
/// gets `Lambda^-1`, which is the sharp factor and differs once `Lambda > 1`; the
/// `*_sharp` links use it.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChainReport {
    pub spectral_gap: f64,
    pub poincare: ChainLink,
    pub gradient: ChainLink,
    pub gradient_sharp: ChainLink,
    pub w22: ChainLink,
    pub w22_sharp: ChainLink,
}

impl ChainReport {
    pub fn displayed_links_hold(&self) -> bool {
        self.poincare.holds && self.gradient.holds && self.w22.holds
    }

    pub fn sharp_links_hold(&self) -> bool {
        self.poincare.holds && self.gradient_sharp.holds && self.w22_sharp.holds
    }
}

pub fn poisson_norm_chain(surface: &HyperbolicSurface, sol: &PoissonSolution) -> Result<ChainReport> {
    let lambda = surface.spectral_gap()?;
    Ok(norm_chain(&sol.norms, lambda))
}

pub fn norm_chain(n: &PoissonNorms, lambda: f64) -> ChainReport {
    let w22 = (n.v_l2.powi(2) + 2.0 * n.grad_l2.powi(2) + n.laplacian_l2.powi(2)).sqrt();
    ChainReport {
        spectral_gap: lambda,
        poincare: ChainLink::new(n.v_l2, n.rhs_l2 / lambda),
        gradient: ChainLink::new(n.grad_l2.powi(2), n.rhs_l2.powi(2) / (lambda * lambda)),
        gradient_sharp: ChainLink::new(n.grad_l2.powi(2), n.rhs_l2.powi(2) / lambda),
        w22: ChainLink::new(w22, (1.0 + 2.0 / lambda.powi(2) + 1.0 / lambda.powi(3)).sqrt() * n.rhs_l2),
        w22_sharp: ChainLink::new(w22, (1.0 + 2.0 / lambda + 1.0 / lambda.powi(2)).sqrt() * n.rhs_l2),
    }
}
