use causal_geometry::catalog;
use causal_geometry::ode::{self, OdeOptions};
use causal_geometry::oracle::christoffel_oracle;
use causal_geometry::spray::{conservation_report, integrate_geodesic, integrate_geodesic_at, spray, spray_homogeneity_defect};
use causal_geometry::PhasePoint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Null direction at `(u, v, x, y) = (1, 0, 0, 0)` with `u' = a`, `x' = b`, `y' = c`.
fn kapadia_null(rng: &mut ChaCha8Rng) -> PhasePoint {
    let mut a: f64 = rng.random_range(0.5..1.5);
    if rng.random_bool(0.5) {
        a = -a;
    }
    let b: f64 = rng.random_range(-1.0..1.0);
    let c: f64 = rng.random_range(-1.0..1.0);
    PhasePoint::new(vec![1.0, 0.0, 0.0, 0.0], vec![a, (b * b + c * c) / a, b, c]).unwrap()
}

fn cone_residual(x0: &[f64], x: &[f64]) -> f64 {
    let terms = [
        (x[0] - x0[0]) * (x[1] - x0[1]),
        -(x[2] - x0[2]).powi(2),
        -2.0 * (x[3] - x0[3]).powi(2) / (x[0] + x0[0]),
    ];
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    terms.iter().sum::<f64>().abs() / scale.max(f64::MIN_POSITIVE)
}

#[test]
fn kapadia_geodesics_stay_on_the_vertex_cone() {
    let g = catalog::kapadia();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let p = kapadia_null(&mut rng);
        let tr = integrate_geodesic(&g, &p, 0.5, 1e-10).unwrap();
        assert!(tr.completed());
        let r = cone_residual(&p.x, &tr.end().x);
        assert!(r <= 1e-6, "cone residual {r:e}");
        assert!(conservation_report(&tr, &g).unwrap().max_g <= 1e-8);
        assert!(tr.semispray_defect <= 1e-8, "{:e}", tr.semispray_defect);
    }
}

#[test]
fn trajectories_match_the_christoffel_geodesics() {
    let g = catalog::diag_poly();
    let metric = g.metric.clone().unwrap();
    for p in catalog::cone_points(&g, 5, 3).unwrap() {
        let tr = integrate_geodesic(&g, &p, 0.3, 1e-12).unwrap();
        let n = p.dim();
        let rhs = |_t: f64, y: &[f64]| {
            let lc = christoffel_oracle(&metric, &y[..n])?;
            Ok(y[n..].iter().copied().chain(lc.geodesic_acceleration(&y[n..])).collect())
        };
        let o = OdeOptions {
            rtol: 1e-12,
            atol: 1e-12,
            ..Default::default()
        };
        let sol = ode::integrate(rhs, 0.0, &p.to_state(), 0.3, &o).unwrap();
        let a = tr.end().to_state();
        let b = sol.y.last().unwrap();
        for i in 0..2 * n {
            assert!((a[i] - b[i]).abs() <= 1e-8, "{i}: {} vs {}", a[i], b[i]);
        }
    }
}

#[test]
fn rescaled_velocity_reparametrizes() {
    for g in [catalog::kapadia(), catalog::wuenschmann_cone(), catalog::frw_like()] {
        let p = catalog::cone_points(&g, 1, 5).unwrap().remove(0);
        let t_end = 0.2;
        let slow = integrate_geodesic_at(&g, &p, t_end, 1e-11, Some(&[t_end])).unwrap();
        let fast = integrate_geodesic_at(&g, &p.scaled(2.0), t_end / 2.0, 1e-11, Some(&[t_end / 2.0])).unwrap();
        assert!(slow.completed() && fast.completed(), "{}", g.name);
        let (a, b) = (slow.end(), fast.end());
        for i in 0..p.dim() {
            assert!((a.x[i] - b.x[i]).abs() < 1e-8, "{}", g.name);
            assert!((2.0 * a.v[i] - b.v[i]).abs() < 1e-8, "{}", g.name);
        }
    }
}

#[test]
fn spray_identities_on_and_off_the_cone() {
    for g in catalog::builtins() {
        let mut pts = catalog::cone_points(&g, 50, 9).unwrap();
        pts.extend(catalog::domain_points(&g, 50, 9).unwrap());
        for p in &pts {
            let s = spray(&g, p).unwrap();
            assert!(s.residual <= 1e-10, "{}: residual {:e}", g.name, s.residual);
            assert!(s.vg <= 1e-11, "{}: V(G) {:e}", g.name, s.vg);
            assert!(spray_homogeneity_defect(&g, p).unwrap() <= 1e-10, "{}", g.name);
        }
    }
}

#[test]
fn wuenschmann_drift_is_small() {
    let g = catalog::wuenschmann_cone();
    for p in catalog::cone_points(&g, 5, 21).unwrap() {
        let tr = integrate_geodesic(&g, &p, 0.1, 1e-10).unwrap();
        if tr.completed() {
            assert!(conservation_report(&tr, &g).unwrap().max_g <= 1e-8);
        }
    }
}
