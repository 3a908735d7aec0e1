//! Generalized eigenpairs of `(S, M)`, the spectral gap and the Poisson constant.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::surface::HyperbolicSurface;
use crate::systole::Systole;

/// Meshes up to this size are solved densely.
const DENSE_LIMIT: usize = 400;
const EIGEN_RTOL: f64 = 1e-11;
const MAX_RESTARTS: usize = 40;
const KRYLOV_BLOCKS: usize = 3;
const GUARD: usize = 4;
const SEED: u64 = 0x5eed_cafe;

/// The smallest nonzero generalized eigenpairs, eigenvectors M-orthonormal.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    /// `||S x - lambda M x||_{M^-1} / (lambda ||x||_M)` per pair.
    pub residuals: Vec<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn gap(&self) -> f64 {
        self.eigenvalues[0]
    }

    fn truncated(&self, k: usize) -> Spectrum {
        Spectrum {
            eigenvalues: self.eigenvalues[..k].to_vec(),
            eigenvectors: self.eigenvectors[..k].to_vec(),
            residuals: self.residuals[..k].to_vec(),
        }
    }
}

fn m_dot(mass: &[f64], a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).zip(mass).map(|((x, y), m)| x * y * m).sum()
}

fn relative_residual(surface: &HyperbolicSurface, x: &[f64], lambda: f64) -> f64 {
    let mass = surface.mass();
    let sx = surface.stiffness().mul(x);
    let r: f64 = sx.iter().zip(x).zip(mass).map(|((s, xi), m)| (s - lambda * m * xi).powi(2) / m).sum();
    r.sqrt() / (lambda.abs() * m_dot(mass, x, x).sqrt())
}

fn dense_spectrum(surface: &HyperbolicSurface, k: usize) -> Result<Spectrum> {
    let n = surface.n_vertices();
    let mass = surface.mass();
    let inv_sqrt: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for (j, v) in surface.stiffness().row(i) {
            a[(i, j)] = v * inv_sqrt[i] * inv_sqrt[j];
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    // order[0] is the constant mode
    let mut out = Spectrum { eigenvalues: vec![], eigenvectors: vec![], residuals: vec![] };
    for &idx in order.iter().skip(1).take(k) {
        let mut x: Vec<f64> = (0..n).map(|i| eig.eigenvectors[(i, idx)] * inv_sqrt[i]).collect();
        surface.project_zero_mean(&mut x);
        let nrm = m_dot(mass, &x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nrm);
        normalize_sign(&mut x);
        let lambda = surface.stiffness().quad_form(&x);
        out.residuals.push(relative_residual(surface, &x, lambda));
        out.eigenvalues.push(lambda);
        out.eigenvectors.push(x);
    }
    Ok(out)
}

/// Fixes the sign so the entry of largest magnitude is positive.
fn normalize_sign(x: &mut [f64]) {
    let mut best = 0.0f64;
    for &v in x.iter() {
        if v.abs() > best.abs() + 1e-12 {
            best = v;
        }
    }
    if best < 0.0 {
        x.iter_mut().for_each(|v| *v = -*v);
    }
}

/// M-orthonormalizes `block` against `basis` and itself, dropping dependent vectors.
fn orthonormalize(mass: &[f64], basis: &[Vec<f64>], block: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for mut v in block {
        let n0 = m_dot(mass, &v, &v).sqrt();
        if n0 == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for q in basis.iter().chain(kept.iter()) {
                let c = m_dot(mass, q, &v);
                v.iter_mut().zip(q).for_each(|(a, b)| *a -= c * b);
            }
        }
        let n1 = m_dot(mass, &v, &v).sqrt();
        if n1 > 1e-10 * n0 {
            v.iter_mut().for_each(|a| *a /= n1);
            kept.push(v);
        }
    }
    kept
}

fn krylov_spectrum(surface: &HyperbolicSurface, k: usize) -> Result<Spectrum> {
    let n = surface.n_vertices();
    let mass = surface.mass();
    let factor = surface.reference_factor()?;
    let apply_t = |v: &[f64]| -> Vec<f64> {
        let mv: Vec<f64> = v.iter().zip(mass).map(|(a, m)| a * m).collect();
        let mut w = factor.solve(&mv);
        surface.project_zero_mean(&mut w);
        w
    };
    let block = k + GUARD;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut start: Vec<Vec<f64>> = (0..block)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            surface.project_zero_mean(&mut v);
            v
        })
        .collect();
    let mut last_worst = f64::INFINITY;
    for restart in 0..MAX_RESTARTS {
        let mut q: Vec<Vec<f64>> = Vec::new();
        let mut tq: Vec<Vec<f64>> = Vec::new();
        let mut v = orthonormalize(mass, &q, start);
        for _ in 0..KRYLOV_BLOCKS {
            if v.is_empty() {
                break;
            }
            let w: Vec<Vec<f64>> = v.iter().map(|x| apply_t(x)).collect();
            q.extend(v);
            tq.extend(w.iter().cloned());
            v = orthonormalize(mass, &q, w);
        }
        let m = q.len();
        if m < k {
            return Err(Error::NotConverged { what: "eigensolver (Krylov space too small)", iterations: restart, residual: f64::INFINITY });
        }
        let mut h = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            let mq: Vec<f64> = q[i].iter().zip(mass).map(|(a, b)| a * b).collect();
            for j in 0..m {
                h[(i, j)] = dot(&mq, &tq[j]);
            }
        }
        let h = (&h + h.transpose()) * 0.5;
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let mut ritz: Vec<(f64, Vec<f64>)> = Vec::with_capacity(block);
        for &idx in order.iter().take(block.min(m)) {
            let mut x = vec![0.0; n];
            for (c, qc) in q.iter().enumerate() {
                let y = eig.eigenvectors[(c, idx)];
                x.iter_mut().zip(qc).for_each(|(a, b)| *a += y * b);
            }
            let nrm = m_dot(mass, &x, &x).sqrt();
            x.iter_mut().for_each(|a| *a /= nrm);
            let lambda = surface.stiffness().quad_form(&x);
            ritz.push((lambda, x));
        }
        ritz.sort_by(|a, b| a.0.total_cmp(&b.0));
        let residuals: Vec<f64> = ritz.iter().take(k).map(|(l, x)| relative_residual(surface, x, *l)).collect();
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        if worst <= EIGEN_RTOL || (restart + 1 == MAX_RESTARTS && worst <= 1e3 * EIGEN_RTOL) || (worst <= 1e2 * EIGEN_RTOL && worst >= 0.9 * last_worst) {
            let mut out = Spectrum { eigenvalues: vec![], eigenvectors: vec![], residuals };
            for (l, mut x) in ritz.into_iter().take(k) {
                normalize_sign(&mut x);
                out.eigenvalues.push(l);
                out.eigenvectors.push(x);
            }
            return Ok(out);
        }
        last_worst = worst;
        start = ritz.into_iter().map(|(_, x)| x).collect();
    }
    Err(Error::NotConverged { what: "eigensolver", iterations: MAX_RESTARTS, residual: last_worst })
}

impl HyperbolicSurface {
    /// The `k` smallest nonzero eigenpairs of `S x = lambda M x`, cached per surface.
    pub fn spectrum(&self, k: usize) -> Result<Arc<Spectrum>> {
        let n = self.n_vertices();
        if k == 0 || k >= n {
            return Err(Error::Precondition(format!("requested {k} eigenpairs on {n} vertices")));
        }
        let mut cache = self.spectrum_cache.lock().expect("spectrum cache poisoned");
        if let Some(s) = cache.as_ref() {
            if s.len() >= k {
                return Ok(if s.len() == k { s.clone() } else { Arc::new(s.truncated(k)) });
            }
        }
        let spec = if n <= DENSE_LIMIT { dense_spectrum(self, k)? } else { krylov_spectrum(self, k)? };
        let spec = Arc::new(spec);
        *cache = Some(spec.clone());
        Ok(spec)
    }

    /// Smallest nonzero eigenvalue `Lambda` of `(S, M)`.
    pub fn spectral_gap(&self) -> Result<f64> {
        Ok(self.spectrum(1)?.gap())
    }
}

/// Dense reference eigenvalues (for tests and small meshes).
pub fn dense_eigenvalues(surface: &HyperbolicSurface, k: usize) -> Result<Vec<f64>> {
    Ok(dense_spectrum(surface, k)?.eigenvalues)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum CSobMode {
    Fixed(f64),
    Empirical(usize),
}

impl Default for CSobMode {
    fn default() -> Self {
        CSobMode::Empirical(20)
    }
}

/// `C(delta, Lambda) = C_sob sqrt(1 + 2 Lambda^-2 + Lambda^-3)`.
pub fn poisson_constant_formula(c_sob: f64, lambda: f64) -> f64 {
    c_sob * (1.0 + 2.0 / (lambda * lambda) + 1.0 / lambda.powi(3)).sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryConstants {
    pub systole: f64,
    pub systole_source: String,
    pub spectral_gap: f64,
    pub volume: f64,
    pub c_sob: f64,
    pub c_sob_mode: CSobMode,
    pub poisson_constant: f64,
}

impl GeometryConstants {
    /// Constants from explicit values, bypassing any measurement.
    pub fn from_values(systole: f64, spectral_gap: f64, volume: f64, c_sob: f64) -> Result<Self> {
        for (name, v) in [("systole", systole), ("spectral gap", spectral_gap), ("volume", volume), ("C_sob", c_sob)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Precondition(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(GeometryConstants {
            systole,
            systole_source: "user".into(),
            spectral_gap,
            volume,
            c_sob,
            c_sob_mode: CSobMode::Fixed(c_sob),
            poisson_constant: poisson_constant_formula(c_sob, spectral_gap),
        })
    }
}

/// Empirical Morrey-Sobolev surrogate: max over eigenfields of
/// `sup|phi| / sqrt(|phi|^2 + 2 |grad phi|^2 + |Delta phi|^2)`.
pub fn empirical_c_sob(surface: &HyperbolicSurface, m: usize) -> Result<f64> {
    let spec = surface.spectrum(m)?;
    if spec.len() < m {
        return Err(Error::Precondition(format!("C_sob needs {m} eigenpairs, only {} computed", spec.len())));
    }
    let mut best = 0.0f64;
    for x in &spec.eigenvectors {
        let l2 = surface.l2_of(x);
        let grad = surface.stiffness().quad_form(x);
        let lap = surface.l2_of(&surface.laplacian_of(x));
        let sup = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        best = best.max(sup / (l2 * l2 + 2.0 * grad + lap * lap).sqrt());
    }
    Ok(best)
}

pub fn poisson_constant(surface: &HyperbolicSurface, mode: CSobMode, systole: &Systole) -> Result<GeometryConstants> {
    let lambda = surface.spectral_gap()?;
    let c_sob = match mode {
        CSobMode::Fixed(v) => {
            if !(v > 0.0) {
                return Err(Error::Precondition(format!("C_sob must be positive, got {v}")));
            }
            v
        }
        CSobMode::Empirical(m) => {
            if m == 0 || m >= surface.n_vertices() {
                return Err(Error::Precondition(format!("empirical C_sob with m = {m} exceeds available eigenpairs")));
            }
            empirical_c_sob(surface, m)?
        }
    };
    Ok(GeometryConstants {
        systole: systole.value,
        systole_source: systole.source.to_string(),
        spectral_gap: lambda,
        volume: surface.volume(),
        c_sob,
        c_sob_mode: mode,
        poisson_constant: poisson_constant_formula(c_sob, lambda),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{flat_torus, regular_octagon_genus2};
    use std::f64::consts::PI;

    #[test]
    fn formula_limits() {
        assert!((poisson_constant_formula(1.0, 1.0) - 2.0).abs() < 1e-15);
        assert!((poisson_constant_formula(1.0, 1e8) - 1.0).abs() < 1e-12);
        assert!(poisson_constant_formula(2.0, 3.0) > poisson_constant_formula(1.0, 3.0));
        assert!(poisson_constant_formula(1.0, 3.0) < poisson_constant_formula(1.0, 2.0));
    }

    #[test]
    fn torus_gap_approaches_four_pi_squared() {
        let target = (2.0 * PI).powi(2);
        let mut prev = f64::INFINITY;
        for n in [8, 16, 32] {
            let s = HyperbolicSurface::from_mesh_metric(flat_torus(n).unwrap());
            let gap = s.spectral_gap().unwrap();
            let err = (gap - target).abs();
            assert!(err < prev, "n={n} gap={gap}");
            prev = err;
        }
        assert!(prev / target < 0.01);
    }

    #[test]
    fn krylov_matches_dense() {
        let s = HyperbolicSurface::uniformize(regular_octagon_genus2(8).unwrap(), 1e-10).unwrap();
        let dense = dense_eigenvalues(&s, 8).unwrap();
        let kry = krylov_spectrum(&s, 8).unwrap();
        for (a, b) in dense.iter().zip(&kry.eigenvalues) {
            assert!((a - b).abs() <= 1e-9 * a, "{a} vs {b}");
        }
        assert!(kry.residuals.iter().all(|&r| r <= 1e-9));
    }

    #[test]
    fn eigenfield_laplacian() {
        let s = HyperbolicSurface::uniformize(regular_octagon_genus2(10).unwrap(), 1e-10).unwrap();
        let spec = s.spectrum(3).unwrap();
        let phi = s.field(spec.eigenvectors[0].clone()).unwrap();
        let lap = s.laplacian(&phi).unwrap();
        let expect = phi.scale(-spec.eigenvalues[0]);
        assert!(lap.distance(&expect).unwrap() <= 1e-8 * expect.sup_abs());
    }

    #[test]
    fn poincare_inequality_on_random_fields() {
        let s = HyperbolicSurface::uniformize(regular_octagon_genus2(8).unwrap(), 1e-10).unwrap();
        let lambda = s.spectral_gap().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let mut v: Vec<f64> = (0..s.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            s.project_zero_mean(&mut v);
            let l2 = s.l2_of(&v);
            assert!(l2 * l2 <= s.stiffness().quad_form(&v) / lambda * (1.0 + 1e-10));
        }
    }

    #[test]
    fn fixed_mode_and_zero_m_rejected() {
        let s = HyperbolicSurface::uniformize(regular_octagon_genus2(4).unwrap(), 1e-10).unwrap();
        let sys = Systole::user(0.7);
        let c = poisson_constant(&s, CSobMode::Fixed(1.0), &sys).unwrap();
        assert!((c.poisson_constant - poisson_constant_formula(1.0, c.spectral_gap)).abs() < 1e-15);
        assert!(poisson_constant(&s, CSobMode::Empirical(0), &sys).is_err());
        assert!(poisson_constant(&s, CSobMode::Empirical(100000), &sys).is_err());
    }
}
