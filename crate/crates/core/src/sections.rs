//! Balance ratios and synthetic Hermitian-Einstein section norms.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poisson::{solve_poisson_zero_mean, PoissonOptions};
use crate::surface::{HyperbolicSurface, ScalarField};

/// `bal(f) = mean(f) / sup(f)` for a nonnegative field that is not identically zero.
pub fn balance_ratio(surface: &HyperbolicSurface, f: &ScalarField) -> Result<f64> {
    surface.owns(f)?;
    balance_of(surface, f.values())
}

pub(crate) fn balance_of(surface: &HyperbolicSurface, f: &[f64]) -> Result<f64> {
    if let Some(v) = f.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Precondition(format!("balance ratio needs a nonnegative field (found {v})")));
    }
    let sup = f.iter().copied().fold(0.0, f64::max);
    if sup == 0.0 {
        return Err(Error::Precondition("balance ratio of the zero field is undefined".into()));
    }
    Ok(surface.mean_of(f) / sup)
}

/// Normalization of the free scale `s` in `f_alpha = s e^{2 psi}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMode {
    /// `sup f_alpha = 1`
    #[default]
    Sup,
    /// `L2(f_alpha) = 1`
    L2,
}

/// Synthetic section norm with prescribed zeros. The field `f_alpha` is positive
/// everywhere; a zero of multiplicity `m` is a deep minimum of `f_alpha` at its
/// vertex (the log-pole of `psi` smeared over one vertex area).
#[derive(Debug, Clone)]
pub struct SectionNormSpec {
    pub zeros: Vec<(usize, u32)>,
    pub degree: u32,
    /// Zero-mean solution of `Delta psi = 2 pi (sum m_i delta_{z_i} - n / Vol)`.
    pub psi: ScalarField,
    pub f_alpha: ScalarField,
    pub scale: f64,
    pub scale_mode: ScaleMode,
    pub balance: f64,
    /// Largest error of `sum_{B} mu Delta psi = 2 pi (m(B) - n mu(B) / Vol)` over the
    /// tested vertex sets `B`.
    pub identity_error: f64,
}

pub fn build_section_norm(
    surface: &HyperbolicSurface,
    zeros: &[(usize, u32)],
    scale_mode: ScaleMode,
) -> Result<SectionNormSpec> {
    let n_v = surface.n_vertices();
    let degree: u32 = zeros.iter().map(|z| z.1).sum();
    if degree == 0 {
        return Err(Error::Precondition("n >= 1 required: a section needs at least one zero".into()));
    }
    let mut seen = HashSet::new();
    for &(z, m) in zeros {
        if z >= n_v {
            return Err(Error::Precondition(format!("zero at vertex {z} but the surface has {n_v} vertices")));
        }
        if m == 0 || !seen.insert(z) {
            return Err(Error::Precondition(format!("zero at vertex {z} repeated or of multiplicity 0")));
        }
    }
    let vol = surface.volume();
    let mass = surface.mass();
    let uniform = 2.0 * PI * f64::from(degree) / vol;
    let mut load = vec![-uniform; n_v];
    for &(z, m) in zeros {
        load[z] += 2.0 * PI * f64::from(m) / mass[z];
    }
    let rhs = surface.field(load)?;
    let opts = PoissonOptions { project_mean: true, ..Default::default() };
    let sol = solve_poisson_zero_mean(surface, &rhs, opts, None)?;
    let psi = sol.v;
    let raw = psi.map(|x| (2.0 * x).exp());
    let scale = match scale_mode {
        ScaleMode::Sup => 1.0 / raw.sup(),
        ScaleMode::L2 => 1.0 / surface.l2(&raw)?,
    };
    let f_alpha = raw.scale(scale);
    let balance = balance_ratio(surface, &f_alpha)?;

    // integrate Delta psi against indicators: each zero vertex, each one-ring, everything
    let lap = surface.laplacian(&psi)?;
    let adj = surface.mesh().vertex_neighbors();
    let mut sets: Vec<Vec<usize>> = vec![(0..n_v).collect()];
    for &(z, _) in zeros {
        sets.push(vec![z]);
        let mut ring: Vec<usize> = adj[z].iter().map(|p| p.0).collect();
        ring.push(z);
        sets.push(ring);
    }
    let mut identity_error = 0.0f64;
    for set in &sets {
        let lhs: f64 = set.iter().map(|&i| mass[i] * lap.values()[i]).sum();
        let m_in: u32 = zeros.iter().filter(|z| set.contains(&z.0)).map(|z| z.1).sum();
        let mu: f64 = set.iter().map(|&i| mass[i]).sum();
        let expect = 2.0 * PI * (f64::from(m_in) - f64::from(degree) * mu / vol);
        identity_error = identity_error.max((lhs - expect).abs());
    }
    Ok(SectionNormSpec { zeros: zeros.to_vec(), degree, psi, f_alpha, scale, scale_mode, balance, identity_error })
}

/// Metric distance along mesh edges from a set of source vertices.
pub fn graph_distance(surface: &HyperbolicSurface, sources: &[usize]) -> Vec<f64> {
    let lengths = surface.metric_edge_lengths();
    let adj = surface.mesh().vertex_neighbors();
    let mut dist = vec![f64::INFINITY; surface.n_vertices()];
    let mut heap = BinaryHeap::new();
    for &s in sources {
        dist[s] = 0.0;
        heap.push((Reverse(OrdF64(0.0)), s));
    }
    while let Some((Reverse(OrdF64(d)), v)) = heap.pop() {
        if d > dist[v] {
            continue;
        }
        for &(w, e) in &adj[v] {
            let nd = d + lengths[e];
            if nd < dist[w] {
                dist[w] = nd;
                heap.push((Reverse(OrdF64(nd)), w));
            }
        }
    }
    dist
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FgBalBounds {
    pub radius: f64,
    /// `max(sup_off f, 1 / inf_off f)` for the sup-normalized norm.
    pub c1: f64,
    /// `sup_on f`.
    pub c2: f64,
    pub on_zone_vertices: usize,
    pub off_zone_vertices: usize,
    pub zone_metric: &'static str,
}

/// Two-zone bounds on and off the disks `D(z, r)` around the zeros.
pub fn check_fgbal_bounds(surface: &HyperbolicSurface, spec: &SectionNormSpec, r: f64, systole: f64) -> Result<FgBalBounds> {
    if spec.degree == 0 {
        return Err(Error::Precondition("n >= 1 required".into()));
    }
    if !(r > 0.0 && r < systole / 2.0) {
        return Err(Error::Precondition(format!("radius {r} must lie in (0, systole / 2 = {})", systole / 2.0)));
    }
    surface.owns(&spec.f_alpha)?;
    let sources: Vec<usize> = spec.zeros.iter().map(|z| z.0).collect();
    let dist = graph_distance(surface, &sources);
    let f = spec.f_alpha.scale(1.0 / spec.f_alpha.sup());
    let (mut sup_off, mut inf_off, mut sup_on) = (0.0f64, f64::INFINITY, 0.0f64);
    let (mut on, mut off) = (0, 0);
    for (i, &d) in dist.iter().enumerate() {
        let v = f.values()[i];
        if d < r {
            on += 1;
            sup_on = sup_on.max(v);
        } else {
            off += 1;
            sup_off = sup_off.max(v);
            inf_off = inf_off.min(v);
        }
    }
    if off == 0 {
        return Err(Error::Precondition(format!("radius {r} leaves no vertex outside the zero disks")));
    }
    Ok(FgBalBounds {
        radius: r,
        c1: sup_off.max(1.0 / inf_off),
        c2: sup_on,
        on_zone_vertices: on,
        off_zone_vertices: off,
        zone_metric: "edge-path distance",
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::regular_octagon_genus2;

    fn surface() -> HyperbolicSurface {
        HyperbolicSurface::uniformize(regular_octagon_genus2(8).unwrap(), 1e-10).unwrap()
    }

    #[test]
    fn balance_basics() {
        let s = surface();
        assert!((balance_ratio(&s, &s.constant(2.5)).unwrap() - 1.0).abs() < 1e-14);
        let g = s.field_from_fn(|i| 1.0 + (i as f64 * 0.1).sin().abs());
        let b = balance_ratio(&s, &g).unwrap();
        assert!((balance_ratio(&s, &g.scale(7.0)).unwrap() - b).abs() < 1e-15);
        assert!(balance_ratio(&s, &s.constant(0.0)).is_err());
        let eps = 1e-3;
        let mut spike = vec![eps; s.n_vertices()];
        spike[5] = 1.0;
        let expect = eps + (1.0 - eps) * s.mass()[5] / s.volume();
        assert!((balance_ratio(&s, &s.field(spike).unwrap()).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn single_zero_norm() {
        let s = surface();
        let spec = build_section_norm(&s, &[(0, 1)], ScaleMode::Sup).unwrap();
        let fmin = spec.f_alpha.inf();
        assert_eq!(spec.f_alpha.values()[0], fmin);
        assert!(s.mean(&s.laplacian(&spec.psi).unwrap()).unwrap().abs() < 1e-12);
        assert!(spec.identity_error < 1e-9, "{}", spec.identity_error);
        assert!(spec.balance > 0.0 && spec.balance <= 1.0);
    }

    #[test]
    fn multiplicity_versus_two_zeros() {
        let s = surface();
        let far = graph_distance(&s, &[0]).iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0;
        let two = build_section_norm(&s, &[(0, 1), (far, 1)], ScaleMode::Sup).unwrap();
        let double = build_section_norm(&s, &[(0, 2)], ScaleMode::Sup).unwrap();
        assert_eq!(two.degree, double.degree);
        assert!(two.balance > double.balance);
    }

    #[test]
    fn fgbal_zones() {
        let s = surface();
        let spec = build_section_norm(&s, &[(0, 1)], ScaleMode::Sup).unwrap();
        let sys = 3.0;
        let mut prev = 0.0;
        for r in [1.2, 0.8, 0.4, 0.2] {
            let b = check_fgbal_bounds(&s, &spec, r, sys).unwrap();
            assert!(b.c1.is_finite() && b.c1 >= prev);
            prev = b.c1;
        }
        assert!(check_fgbal_bounds(&s, &spec, 1.6, sys).is_err());
        assert!(build_section_norm(&s, &[], ScaleMode::Sup).is_err());
        assert!(build_section_norm(&s, &[(s.n_vertices(), 1)], ScaleMode::Sup).is_err());
    }
}
