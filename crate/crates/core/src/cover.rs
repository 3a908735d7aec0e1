//! Cyclic covers cut along a primitive integral cocycle, and balanced families on them.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::TriangleMesh;
use crate::sections::{balance_ratio, graph_distance, SectionNormSpec};
use crate::surface::{HyperbolicSurface, ScalarField};
use crate::systole::Cocycle;

/// A `k`-sheeted cyclic cover. Cover vertex `s * V + v` sits over base vertex `v` on sheet `s`.
#[derive(Debug)]
pub struct CoverSpec {
    pub degree: usize,
    pub base_vertices: usize,
    pub base_genus: i64,
    pub cocycle: Cocycle,
    pub surface: HyperbolicSurface,
}

impl CoverSpec {
    pub fn genus(&self) -> i64 {
        self.surface.genus()
    }

    pub fn projection(&self, cover_vertex: usize) -> usize {
        cover_vertex % self.base_vertices
    }

    pub fn sheet(&self, cover_vertex: usize) -> usize {
        cover_vertex / self.base_vertices
    }

    pub fn lift_index(&self, base_vertex: usize, sheet: usize) -> usize {
        sheet * self.base_vertices + base_vertex
    }

    /// Pullback of a base field: the same value on every point of a fiber.
    pub fn lift_field(&self, base: &HyperbolicSurface, f: &ScalarField) -> Result<ScalarField> {
        base.owns(f)?;
        if base.n_vertices() != self.base_vertices {
            return Err(Error::SurfaceMismatch);
        }
        let vals = f.values();
        Ok(self.surface.field_from_fn(|i| vals[i % self.base_vertices]))
    }
}

/// Cuts the surface along the dual of `cocycle` and glues `k` copies cyclically.
pub fn cyclic_cover(surface: &HyperbolicSurface, cocycle: &Cocycle, k: usize) -> Result<CoverSpec> {
    if k < 2 {
        return Err(Error::Precondition(format!("cover degree must be at least 2, got {k}")));
    }
    let mesh = surface.mesh();
    if !cocycle.is_primitive(mesh) {
        return Err(Error::Precondition("cutting cocycle is not closed and primitive".into()));
    }
    let nv = mesh.n_vertices();
    let kk = k as i64;
    let sheet = |s: i64| s.rem_euclid(kk) as usize;
    let mut tris = Vec::with_capacity(k * mesh.n_triangles());
    for s in 0..k {
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let te = mesh.tri_edges()[t];
            // edge from tri[0] to tri[1] is opposite corner 2, tri[1] to tri[2] opposite corner 0
            let w01 = cocycle.along(mesh, te[2], tri[0]);
            let w12 = cocycle.along(mesh, te[0], tri[1]);
            let s0 = s as i64;
            tris.push([
                sheet(s0) * nv + tri[0],
                sheet(s0 + w01) * nv + tri[1],
                sheet(s0 + w01 + w12) * nv + tri[2],
            ]);
        }
    }
    let base_lengths = mesh.edge_lengths();
    let cover_mesh = TriangleMesh::new(k * nv, tris, |a, b| {
        mesh.edge_between(a % nv, b % nv)
            .map(|e| base_lengths[e])
            .ok_or_else(|| Error::InvalidMesh(format!("cover edge ({a}, {b}) has no base edge")))
    })?;
    let phi = surface.conformal_factor();
    let area = surface.base_area();
    let lifted_phi: Vec<f64> = (0..k * nv).map(|i| phi[i % nv]).collect();
    let lifted_area: Vec<f64> = (0..k * nv).map(|i| area[i % nv]).collect();
    let cover = HyperbolicSurface::lifted(cover_mesh, lifted_phi, lifted_area);
    let expected = kk * (surface.genus() - 1) + 1;
    if cover.genus() != expected {
        return Err(Error::InvalidMesh(format!("cover genus {} differs from k(g-1)+1 = {expected}", cover.genus())));
    }
    Ok(CoverSpec { degree: k, base_vertices: nv, base_genus: surface.genus(), cocycle: cocycle.clone(), surface: cover })
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyMember {
    pub k: usize,
    pub genus: i64,
    pub vertices: usize,
    pub volume: f64,
    pub systole: f64,
    pub systole_source: String,
    pub spectral_gap: f64,
    pub balance: f64,
    pub lifted_balance: f64,
    /// `n k + d` zeros counted with multiplicity on the cover.
    pub zero_count: u64,
    /// `n (g' - 1) + d`.
    pub bundle_degree: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilyReport {
    pub base_degree: u32,
    pub d: u32,
    pub marked_base_vertex: usize,
    pub local_radius: f64,
    pub members: Vec<FamilyMember>,
    pub inf_systole: f64,
    pub inf_spectral_gap: f64,
    pub inf_balance: f64,
}

/// Covers of the base carrying the lifted norm times a local zero factor of order `d`.
///
/// The factor is `min(1, (dist / rho)^(2 d))` around the lift on sheet 0 of the vertex
/// where the base norm is largest, with `rho` a quarter of the base systole estimate.
pub fn build_balanced_family(
    base: &HyperbolicSurface,
    spec: &SectionNormSpec,
    cocycle: &Cocycle,
    k_list: &[usize],
    d: u32,
) -> Result<FamilyReport> {
    base.owns(&spec.f_alpha)?;
    let base_systole = base.systole(None)?.value;
    let rho = base_systole / 4.0;
    let marked = (0..base.n_vertices())
        .max_by(|&a, &b| spec.f_alpha.values()[a].total_cmp(&spec.f_alpha.values()[b]))
        .unwrap_or(0);
    let members: Vec<FamilyMember> = k_list
        .par_iter()
        .map(|&k| -> Result<FamilyMember> {
            let cover = cyclic_cover(base, cocycle, k)?;
            let lifted = cover.lift_field(base, &spec.f_alpha)?;
            let lifted_balance = balance_ratio(&cover.surface, &lifted)?;
            let f = if d == 0 {
                lifted
            } else {
                let dist = graph_distance(&cover.surface, &[cover.lift_index(marked, 0)]);
                let vals = lifted.values();
                cover.surface.field_from_fn(|i| vals[i] * (dist[i] / rho).min(1.0).powi(2 * d as i32))
            };
            let systole = cover.surface.systole(None)?;
            let genus = cover.genus();
            Ok(FamilyMember {
                k,
                genus,
                vertices: cover.surface.n_vertices(),
                volume: cover.surface.volume(),
                systole: systole.value,
                systole_source: systole.source.to_string(),
                spectral_gap: cover.surface.spectral_gap()?,
                balance: balance_ratio(&cover.surface, &f)?,
                lifted_balance,
                zero_count: u64::from(spec.degree) * k as u64 + u64::from(d),
                bundle_degree: i64::from(spec.degree) * (genus - 1) + i64::from(d),
            })
        })
        .collect::<Result<_>>()?;
    let inf = |g: fn(&FamilyMember) -> f64| members.iter().map(g).fold(f64::INFINITY, f64::min);
    Ok(FamilyReport {
        base_degree: spec.degree,
        d,
        marked_base_vertex: marked,
        local_radius: rho,
        inf_systole: inf(|m| m.systole),
        inf_spectral_gap: inf(|m| m.spectral_gap),
        inf_balance: inf(|m| m.balance),
        members,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::regular_octagon_genus2;
    use crate::sections::{build_section_norm, ScaleMode};
    use crate::systole::cohomology_basis;

    fn surface() -> HyperbolicSurface {
        HyperbolicSurface::uniformize(regular_octagon_genus2(4).unwrap(), 1e-10).unwrap()
    }

    #[test]
    fn genus_and_lift_exactness() {
        let s = surface();
        let w = &cohomology_basis(s.mesh())[0];
        let f = s.field_from_fn(|i| 1.0 + (i as f64).sin().powi(2));
        for k in [2, 3, 4] {
            let c = cyclic_cover(&s, w, k).unwrap();
            assert_eq!(c.genus(), k as i64 + 1);
            assert_eq!(c.surface.mesh().euler_characteristic(), k as i64 * s.mesh().euler_characteristic());
            let lf = c.lift_field(&s, &f).unwrap();
            assert_eq!(lf.sup(), f.sup());
            assert!((c.surface.volume() - k as f64 * s.volume()).abs() < 1e-10 * c.surface.volume());
            let (b0, b1) = (balance_ratio(&s, &f).unwrap(), balance_ratio(&c.surface, &lf).unwrap());
            assert!((b0 - b1).abs() <= 4.0 * f64::EPSILON, "{b0} {b1}");
            assert!(c.surface.curvature().iter().all(|k| (k + 1.0).abs() < 1e-7));
        }
    }

    #[test]
    fn rejects_bad_input() {
        let s = surface();
        let w = &cohomology_basis(s.mesh())[0];
        assert!(cyclic_cover(&s, w, 1).is_err());
        let doubled = Cocycle { values: w.values.iter().map(|v| 2 * v).collect() };
        assert!(cyclic_cover(&s, &doubled, 2).is_err());
    }

    #[test]
    fn pure_lift_family_has_constant_balance() {
        let s = surface();
        let w = &cohomology_basis(s.mesh())[0];
        let spec = build_section_norm(&s, &[(0, 1)], ScaleMode::Sup).unwrap();
        let fam = build_balanced_family(&s, &spec, w, &[2, 3], 0).unwrap();
        for m in &fam.members {
            assert!((m.balance - spec.balance).abs() < 1e-14);
            assert_eq!(m.bundle_degree, m.genus - 1);
        }
        let fam1 = build_balanced_family(&s, &spec, w, &[2, 3], 1).unwrap();
        assert!(fam1.inf_balance > 0.0 && fam1.inf_balance < spec.balance);
        assert_eq!(fam1.members[1].zero_count, 4);
    }
}
