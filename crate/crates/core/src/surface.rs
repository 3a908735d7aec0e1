//! Discretized closed surfaces with a conformal factor, and scalar fields on them.
//!
//! The stiffness matrix `S` is the cotangent discretization of the Dirichlet form of
//! the base mesh. In two dimensions the Dirichlet form is conformally invariant, so a
//! conformal change of metric `e^{2 phi}` only rescales the lumped vertex areas:
//! `mu_i = A_i e^{2 phi_i}`. The Laplacian is `Delta f = -M^{-1} S f` (trace of the
//! Hessian, nonpositive at a maximum).

use std::f64::consts::PI;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, pcg, CsrMatrix, EnvelopeCholesky};
use crate::mesh::TriangleMesh;
use crate::spectral::Spectrum;

/// Default sup-norm tolerance on the curvature residual after uniformization.
pub const UNIFORMIZATION_TOL: f64 = 1e-8;
const UNIFORMIZATION_MAX_ITER: usize = 60;
/// Shift `sigma` of the reference factorization `S + sigma M`.
pub(crate) const PRECOND_SHIFT: f64 = 1.0;
const CG_RTOL: f64 = 1e-13;
const CG_MAX_ITER: usize = 5000;

static NEXT_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct SurfaceId(u64);

impl SurfaceId {
    fn fresh() -> Self {
        SurfaceId(NEXT_ID.fetch_add(1, Ordering::Relaxed))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UniformizationReport {
    pub iterations: usize,
    /// `sup_i |K_i + 1|` at exit.
    pub curvature_residual: f64,
    /// `sup_i |phi_i - phi0_i|` relative to the starting conformal factor.
    pub update_sup: f64,
}

#[derive(Debug)]
pub struct HyperbolicSurface {
    id: SurfaceId,
    mesh: TriangleMesh,
    phi: Vec<f64>,
    stiffness: CsrMatrix,
    edge_weights: Vec<f64>,
    base_area: Vec<f64>,
    mass: Vec<f64>,
    volume: f64,
    angle_defect: Vec<f64>,
    uniformization: Option<UniformizationReport>,
    precond: OnceLock<std::result::Result<EnvelopeCholesky, String>>,
    pub(crate) spectrum_cache: Mutex<Option<Arc<Spectrum>>>,
}

/// Cotangent weight `(cot a + cot b) / 2` of every edge.
pub fn cotan_weights(mesh: &TriangleMesh) -> Vec<f64> {
    let mut w = vec![0.0; mesh.n_edges()];
    for t in 0..mesh.n_triangles() {
        let ang = mesh.triangle_angles(t);
        for (k, &e) in mesh.tri_edges()[t].iter().enumerate() {
            w[e] += 0.5 / ang[k].tan();
        }
    }
    w
}

fn assemble_stiffness(mesh: &TriangleMesh, weights: &[f64]) -> CsrMatrix {
    let mut trip = Vec::with_capacity(4 * mesh.n_edges() + mesh.n_vertices());
    for v in 0..mesh.n_vertices() {
        trip.push((v, v, 0.0));
    }
    for (e, &[a, b]) in mesh.edges().iter().enumerate() {
        let w = weights[e];
        trip.push((a, a, w));
        trip.push((b, b, w));
        trip.push((a, b, -w));
        trip.push((b, a, -w));
    }
    CsrMatrix::from_triplets(mesh.n_vertices(), trip)
}

fn barycentric_areas(mesh: &TriangleMesh) -> Vec<f64> {
    let mut a = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let third = mesh.triangle_area(t) / 3.0;
        for &v in tri {
            a[v] += third;
        }
    }
    a
}

fn angle_defects(mesh: &TriangleMesh) -> Vec<f64> {
    let mut d = vec![2.0 * PI; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let ang = mesh.triangle_angles(t);
        for (k, &v) in tri.iter().enumerate() {
            d[v] -= ang[k];
        }
    }
    d
}

struct Liouville<'a> {
    s: &'a CsrMatrix,
    area: &'a [f64],
    defect: &'a [f64],
}

impl Liouville<'_> {
    /// `G(phi) = S phi + A e^{2 phi} + Theta`; zero iff the curvature is -1 everywhere.
    fn gradient(&self, phi: &[f64]) -> Vec<f64> {
        let mut g = self.s.mul(phi);
        for i in 0..g.len() {
            g[i] += self.area[i] * (2.0 * phi[i]).exp() + self.defect[i];
        }
        g
    }

    fn energy(&self, phi: &[f64]) -> f64 {
        let quad = 0.5 * self.s.quad_form(phi);
        let exp: f64 = self.area.iter().zip(phi).map(|(a, p)| 0.5 * a * (2.0 * p).exp()).sum();
        quad + exp + dot(self.defect, phi)
    }

    fn residual(&self, phi: &[f64], g: &[f64]) -> f64 {
        g.iter()
            .zip(self.area.iter().zip(phi))
            .map(|(gi, (a, p))| (gi / (a * (2.0 * p).exp())).abs())
            .fold(0.0, f64::max)
    }
}

fn solve_liouville(
    s: &CsrMatrix,
    area: &[f64],
    defect: &[f64],
    phi0: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, UniformizationReport)> {
    let problem = Liouville { s, area, defect };
    let mut phi = phi0.to_vec();
    let mut g = problem.gradient(&phi);
    let mut res = problem.residual(&phi, &g);
    let mut factor: Option<EnvelopeCholesky> = None;
    for it in 0..UNIFORMIZATION_MAX_ITER {
        if res <= tol {
            let update_sup = phi.iter().zip(phi0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            return Ok((phi, UniformizationReport { iterations: it, curvature_residual: res, update_sup }));
        }
        let diag: Vec<f64> = area.iter().zip(&phi).map(|(a, p)| 2.0 * a * (2.0 * p).exp()).collect();
        let jac = s.add_diagonal(&diag);
        if factor.is_none() {
            factor = Some(EnvelopeCholesky::factor(&jac)?);
        }
        let neg_g: Vec<f64> = g.iter().map(|v| -v).collect();
        let pre = factor.as_ref().expect("factor set");
        let (step, stats) = pcg(|x, y| jac.mul_into(x, y), |r| pre.solve(r), &neg_g, None, None, CG_RTOL, CG_MAX_ITER)?;
        if stats.iterations > 40 {
            factor = None;
        }
        let e0 = problem.energy(&phi);
        let slope = dot(&g, &step);
        let mut s_len = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = phi.iter().zip(&step).map(|(p, d)| p + s_len * d).collect();
            let e1 = problem.energy(&trial);
            let g1 = problem.gradient(&trial);
            let r1 = problem.residual(&trial, &g1);
            if e1 <= e0 + 1e-4 * s_len * slope + 1e-13 * e0.abs() || r1 < res {
                accepted = Some((trial, g1, r1));
                break;
            }
            s_len *= 0.5;
        }
        match accepted {
            Some((p, g1, r1)) => {
                phi = p;
                g = g1;
                res = r1;
            }
            None => {
                return Err(Error::NotConverged { what: "uniformization line search", iterations: it, residual: res })
            }
        }
    }
    if res <= tol {
        let update_sup = phi.iter().zip(phi0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        return Ok((phi, UniformizationReport { iterations: UNIFORMIZATION_MAX_ITER, curvature_residual: res, update_sup }));
    }
    Err(Error::NotConverged { what: "uniformization Newton", iterations: UNIFORMIZATION_MAX_ITER, residual: res })
}

impl HyperbolicSurface {
    /// Solves the discrete Liouville equation for a conformal factor with curvature -1.
    pub fn uniformize(mesh: TriangleMesh, tol: f64) -> Result<Self> {
        let phi0 = vec![0.0; mesh.n_vertices()];
        Self::uniformize_from(mesh, &phi0, tol)
    }

    /// Newton started from a given conformal factor (e.g. a previous solution).
    pub fn uniformize_from(mesh: TriangleMesh, phi0: &[f64], tol: f64) -> Result<Self> {
        let genus = mesh.genus();
        if genus < 2 {
            return Err(Error::GenusTooSmall { genus });
        }
        if phi0.len() != mesh.n_vertices() {
            return Err(Error::FieldLength { expected: mesh.n_vertices(), got: phi0.len() });
        }
        let weights = cotan_weights(&mesh);
        let s = assemble_stiffness(&mesh, &weights);
        let area = barycentric_areas(&mesh);
        let defect = angle_defects(&mesh);
        let (phi, report) = solve_liouville(&s, &area, &defect, phi0, tol)?;
        Ok(Self::from_parts(mesh, phi, weights, s, area, defect, Some(report)))
    }

    /// Uses the mesh metric unchanged (`phi = 0`). Intended for flat meshes and
    /// operator tests; no curvature normalization is performed.
    pub fn from_mesh_metric(mesh: TriangleMesh) -> Self {
        let phi = vec![0.0; mesh.n_vertices()];
        Self::with_conformal_factor(mesh, phi)
    }

    /// Assembles operators for a given conformal factor without solving for it.
    pub fn with_conformal_factor(mesh: TriangleMesh, phi: Vec<f64>) -> Self {
        let weights = cotan_weights(&mesh);
        let s = assemble_stiffness(&mesh, &weights);
        let area = barycentric_areas(&mesh);
        let defect = angle_defects(&mesh);
        Self::from_parts(mesh, phi, weights, s, area, defect, None)
    }

    /// Operators for a covering mesh whose vertex areas and conformal factor are
    /// copied from the base (so fiberwise values agree bit for bit).
    pub(crate) fn lifted(mesh: TriangleMesh, phi: Vec<f64>, base_area: Vec<f64>) -> Self {
        let weights = cotan_weights(&mesh);
        let s = assemble_stiffness(&mesh, &weights);
        let defect = angle_defects(&mesh);
        Self::from_parts(mesh, phi, weights, s, base_area, defect, None)
    }

    fn from_parts(
        mesh: TriangleMesh,
        phi: Vec<f64>,
        edge_weights: Vec<f64>,
        stiffness: CsrMatrix,
        base_area: Vec<f64>,
        angle_defect: Vec<f64>,
        uniformization: Option<UniformizationReport>,
    ) -> Self {
        let mass: Vec<f64> = base_area.iter().zip(&phi).map(|(a, p)| a * (2.0 * p).exp()).collect();
        let volume = mass.iter().sum();
        HyperbolicSurface {
            id: SurfaceId::fresh(),
            mesh,
            phi,
            stiffness,
            edge_weights,
            base_area,
            mass,
            volume,
            angle_defect,
            uniformization,
            precond: OnceLock::new(),
            spectrum_cache: Mutex::new(None),
        }
    }

    pub fn id(&self) -> SurfaceId {
        self.id
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn n_vertices(&self) -> usize {
        self.mesh.n_vertices()
    }

    pub fn genus(&self) -> i64 {
        self.mesh.genus()
    }

    pub fn conformal_factor(&self) -> &[f64] {
        &self.phi
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.edge_weights
    }

    /// Number of edges with a negative cotangent weight. When nonzero, discrete
    /// maximum-principle guarantees only hold if checked a posteriori.
    pub fn negative_weight_count(&self) -> usize {
        self.edge_weights.iter().filter(|&&w| w < 0.0).count()
    }

    /// Lumped vertex areas of the base mesh metric.
    pub fn base_area(&self) -> &[f64] {
        &self.base_area
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn uniformization(&self) -> Option<&UniformizationReport> {
        self.uniformization.as_ref()
    }

    /// Discrete curvature `K_i = (Theta_i + (S phi)_i) / mu_i` of the conformal metric.
    pub fn curvature(&self) -> Vec<f64> {
        let sphi = self.stiffness.mul(&self.phi);
        (0..self.n_vertices()).map(|i| (self.angle_defect[i] + sphi[i]) / self.mass[i]).collect()
    }

    /// Edge lengths of the conformal metric, `l_ij e^{(phi_i + phi_j) / 2}`.
    pub fn metric_edge_lengths(&self) -> Vec<f64> {
        self.mesh
            .edges()
            .iter()
            .zip(self.mesh.edge_lengths())
            .map(|(&[a, b], l)| l * (0.5 * (self.phi[a] + self.phi[b])).exp())
            .collect()
    }

    pub fn field(&self, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != self.n_vertices() {
            return Err(Error::FieldLength { expected: self.n_vertices(), got: values.len() });
        }
        Ok(ScalarField { surface: self.id, values })
    }

    pub fn constant(&self, c: f64) -> ScalarField {
        ScalarField { surface: self.id, values: vec![c; self.n_vertices()] }
    }

    pub fn field_from_fn<F: FnMut(usize) -> f64>(&self, f: F) -> ScalarField {
        ScalarField { surface: self.id, values: (0..self.n_vertices()).map(f).collect() }
    }

    pub(crate) fn owns(&self, f: &ScalarField) -> Result<()> {
        if f.surface != self.id {
            return Err(Error::SurfaceMismatch);
        }
        Ok(())
    }

    pub(crate) fn mean_of(&self, v: &[f64]) -> f64 {
        dot(&self.mass, v) / self.volume
    }

    pub(crate) fn l2_of(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.mass).map(|(x, m)| m * x * x).sum::<f64>().sqrt()
    }

    /// Normalized integral `(sum mu_i f_i) / Vol`.
    pub fn mean(&self, f: &ScalarField) -> Result<f64> {
        self.owns(f)?;
        Ok(self.mean_of(&f.values))
    }

    /// `sqrt(sum mu_i f_i^2)`.
    pub fn l2(&self, f: &ScalarField) -> Result<f64> {
        self.owns(f)?;
        Ok(self.l2_of(&f.values))
    }

    /// Dirichlet energy `f . S f`, the discrete `||grad f||_2^2`.
    pub fn dirichlet(&self, f: &ScalarField) -> Result<f64> {
        self.owns(f)?;
        Ok(self.stiffness.quad_form(&f.values))
    }

    pub(crate) fn laplacian_of(&self, v: &[f64]) -> Vec<f64> {
        let mut out = self.stiffness.mul(v);
        for (o, m) in out.iter_mut().zip(&self.mass) {
            *o = -*o / m;
        }
        out
    }

    pub fn laplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.owns(f)?;
        Ok(ScalarField { surface: self.id, values: self.laplacian_of(&f.values) })
    }

    /// Removes the M-weighted mean.
    pub(crate) fn project_zero_mean(&self, v: &mut [f64]) {
        let m = self.mean_of(v);
        for x in v.iter_mut() {
            *x -= m;
        }
    }

    pub(crate) fn reference_factor(&self) -> Result<&EnvelopeCholesky> {
        self.precond
            .get_or_init(|| {
                let shifted: Vec<f64> = self.mass.iter().map(|m| PRECOND_SHIFT * m).collect();
                EnvelopeCholesky::factor(&self.stiffness.add_diagonal(&shifted)).map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Precondition(e.clone()))
    }

    /// Solves `(S + M diag(c)) x = b` for a positive coefficient field `c`.
    pub(crate) fn solve_shifted(&self, coeff: &[f64], b: &[f64], x0: Option<&[f64]>) -> Result<Vec<f64>> {
        if let Some((i, c)) = coeff.iter().enumerate().find(|(_, c)| !(**c > 0.0)) {
            return Err(Error::Precondition(format!(
                "shifted operator coefficient must be positive (got {c:e} at vertex {i})"
            )));
        }
        let diag: Vec<f64> = coeff.iter().zip(&self.mass).map(|(c, m)| c * m).collect();
        let op = self.stiffness.add_diagonal(&diag);
        let pre = self.reference_factor()?;
        let (x, _) = pcg(|x, y| op.mul_into(x, y), |r| pre.solve(r), b, x0, None, CG_RTOL, CG_MAX_ITER)?;
        Ok(x)
    }

    /// Solves `S x = b` for `sum b = 0` with `x` of zero M-mean (constants deflated).
    pub(crate) fn solve_stiffness_zero_mean(&self, b: &[f64]) -> Result<Vec<f64>> {
        let pre = self.reference_factor()?;
        // drop the round-off component outside the range of S
        let shift = b.iter().sum::<f64>() / b.len() as f64;
        let b: Vec<f64> = b.iter().map(|v| v - shift).collect();
        let b = b.as_slice();
        let project = |v: &mut [f64]| self.project_zero_mean(v);
        let (x, _) = pcg(
            |x, y| self.stiffness.mul_into(x, y),
            |r| pre.solve(r),
            b,
            None,
            Some(&project),
            CG_RTOL,
            CG_MAX_ITER,
        )?;
        Ok(x)
    }
}

/// Per-vertex values bound to one surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    surface: SurfaceId,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn surface_id(&self) -> SurfaceId {
        self.surface
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if self.surface != other.surface {
            return Err(Error::SurfaceMismatch);
        }
        Ok(ScalarField {
            surface: self.surface,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn exp(&self) -> ScalarField {
        self.map(f64::exp)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField { surface: self.surface, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `sup |self - other|`.
    pub fn distance(&self, other: &ScalarField) -> Result<f64> {
        Ok(self.sub(other)?.sup_abs())
    }
}
