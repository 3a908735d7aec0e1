use curvlab::gauss::{constant_solution, solve_gauss, GaussForm};
use curvlab::mesh::regular_octagon_genus2;
use curvlab::poisson::{solve_poisson_zero_mean, PoissonOptions};
use curvlab::ray::{constant_volume_pair, solve_gauss_with_volume, VolumeOptions};
use curvlab::HyperbolicSurface;

fn surface() -> HyperbolicSurface {
    HyperbolicSurface::uniformize(regular_octagon_genus2(5).unwrap(), 1e-10).unwrap()
}

#[test]
fn constant_data_gives_the_scalar_root() {
    let s = surface();
    let eta = 0.3;
    let c = 0.5 * eta / (2.0f64 + eta).powi(3);
    let u = constant_solution(GaussForm::Pu21, c, eta).unwrap();
    // 2x^3 - x^2 + c = 0 with x = e^{2u}
    let x = (2.0 * u).exp();
    assert!((2.0 * x * x * x - x * x + c).abs() < 1e-14);
    let sol = solve_gauss(&s, &s.constant(c), eta, 1e-12).unwrap();
    assert!(sol.u.values().iter().all(|v| (v - u).abs() < 1e-10));
}

#[test]
fn inadmissible_data_is_refused() {
    let s = surface();
    let eta = 0.3;
    let too_big = 2.0 * eta / (2.0f64 + eta).powi(3);
    assert!(solve_gauss(&s, &s.constant(too_big), eta, 1e-10).is_err());
    assert!(solve_gauss(&s, &s.constant(-0.01), eta, 1e-10).is_err());
}

#[test]
fn volume_prescription_hits_target() {
    let s = surface();
    let (r, c) = (0.05, 0.03);
    let vs = solve_gauss_with_volume(&s, &s.constant(c), 0.5, r, VolumeOptions::default()).unwrap();
    let (u, t) = constant_volume_pair(r, c);
    assert!((vs.t() - t).abs() < 1e-8);
    assert!(vs.solution.u.values().iter().all(|v| (v - u).abs() < 1e-8));
    let mean = s.mean(&vs.solution.u.map(|x| (2.0 * x).exp())).unwrap();
    assert!((mean - (0.5 - r)).abs() < 1e-8);
}

#[test]
fn poisson_inverts_the_laplacian_on_zero_mean_data() {
    let s = surface();
    let v0 = s.field_from_fn(|i| ((i as f64) * 0.41).sin());
    let m = s.mean(&v0).unwrap();
    let v0 = v0.map(|x| x - m);
    let rhs = s.laplacian(&v0).unwrap();
    let sol = solve_poisson_zero_mean(&s, &rhs, PoissonOptions::default(), None).unwrap();
    assert!(sol.v.distance(&v0).unwrap() < 1e-8);
    assert!(s.mean(&sol.v).unwrap().abs() < 1e-12);
}
